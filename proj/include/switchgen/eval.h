// Copyright 2026 The switchgen Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SWITCHGEN_EVAL_H_
#define SWITCHGEN_EVAL_H_

// Prompt construction, scoring and the task x format variation grid.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "switchgen/decode.h"
#include "switchgen/lm.h"
#include "switchgen/schema.h"
#include "switchgen/token_index.h"

namespace switchgen {

enum class Metric { kExactMatch, kLabelAccuracy };

const char* metric_name(Metric metric);

struct Shot {
  std::string question;
  std::string answer;               // full exemplar answer, reasoning included
  std::optional<std::string> gold;  // answer value; recovered from `answer` when absent
};

struct TaskItem {
  std::string question;
  std::string gold;
};

struct TaskSpec {
  std::string name;
  Metric metric = Metric::kExactMatch;
  AnswerSchema schema;
  std::vector<std::string> task_descriptions;
  std::vector<std::string> format_descriptions;
  std::vector<Shot> shots;
  std::vector<TaskItem> items;

  // Throws InvalidArgument when an invariant fails.
  void validate() const;

  // {"name", "metric", "schema", "task_descriptions", "format_descriptions",
  //  "shots":[{"q","a","gold"?}], "items":[{"q","gold"}]}
  static TaskSpec from_json(const nlohmann::json& doc);
  static TaskSpec load(const std::filesystem::path& path);
};

enum class PromptKind { kBase, kInstructFormat, kBetterFormat };

const char* prompt_kind_name(PromptKind kind);
PromptKind parse_prompt_kind(std::string_view name);

struct PromptStyle {
  PromptKind kind = PromptKind::kBase;
  int shots = 0;
};

struct Message {
  std::string role;  // "system", "user" or "assistant"
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

// Throws MissingShots when style.shots exceeds the pool and InvalidArgument
// for a bad variation index.
std::vector<Message> build_prompt(const TaskSpec& task, const PromptStyle& style,
                                  std::size_t task_variation, std::size_t format_variation,
                                  std::string_view question);

// Flat text fed to the LM: "role: content" blocks, then an open assistant turn.
std::string render_messages(const std::vector<Message>& messages);

// Replaces everything after the last "answer is " with a final_answer
// object holding `value` (JSON-quoted when `quote`).
std::string rewrite_answer_clause(std::string_view text, std::string_view value, bool quote);

// The value after the last "answer is ", trailing period and space removed.
std::optional<std::string> answer_after_marker(std::string_view text);

struct Normalization {
  bool collapse_whitespace = true;  // trim and squeeze runs
  bool strip_numeric_commas = true;
  bool casefold_letters = true;  // single-letter labels only
  bool strip_separators = false;  // drop '-' and whitespace (contains_gold)

  static Normalization strict() { return {false, false, false, false}; }
};

std::string normalize_answer(std::string_view text, const Normalization& norm);

int score_item(const std::optional<std::string>& parsed, std::string_view gold, Metric metric,
               const Normalization& norm = {});

bool contains_gold(std::string_view raw, std::string_view gold, const Normalization& norm = {});

// final_answer object if present, else the text after the last "answer is ".
std::optional<std::string> extract_answer(std::string_view text);

enum class Method { kNatural, kConstrained, kHybrid };

const char* method_name(Method method);
Method parse_method(std::string_view name);

struct EvalConfig {
  Method method = Method::kHybrid;
  DecodeOptions decode;
  std::vector<std::string> trigger_texts = {"{"};
  bool trigger_on_eos = true;
  Normalization normalization;
  std::uint64_t seed = 0;  // per-item seeds derive from this
  int threads = 1;
  std::string model = "lm";  // label for report rows
};

struct ItemRecord {
  std::size_t task_variation = 0;
  std::size_t format_variation = 0;
  std::size_t item = 0;
  std::string raw;
  std::optional<std::string> parsed;
  std::string gold;
  bool correct = false;
  bool contains_gold = false;
  int preamble_tokens = 0;
  int constrained_tokens = 0;
  int total_tokens = 0;
  double elapsed_seconds = 0.0;
  std::string termination;
  std::string error;  // empty unless the item failed

  nlohmann::ordered_json to_json() const;
};

struct EvalReport {
  std::string task;
  std::string model;
  PromptStyle style;
  Method method = Method::kHybrid;
  std::vector<std::vector<double>> grid;  // [task variation][format variation], percent
  double mean = 0.0;
  double std_dev = 0.0;  // population
  double contains_gold_rate = 0.0;
  double mean_total_tokens = 0.0;
  double mean_preamble_tokens = 0.0;
  double mean_constrained_tokens = 0.0;
  double mean_elapsed_seconds = 0.0;
  std::vector<ItemRecord> items;

  // Recomputes mean and std from the grid.
  bool consistent(double tolerance = 1e-9) const;
  nlohmann::ordered_json to_json() const;
};

struct GridStats {
  double mean = 0.0;
  double std_dev = 0.0;
};

// Population statistics over every cell.
GridStats grid_stats(const std::vector<std::vector<double>>& grid);

EvalReport run_grid(const TaskSpec& task, const PromptStyle& style, const EvalConfig& config,
                    const LmProvider& lm, const Vocabulary& vocab);

// One row of a token/time table: model, shots, generation type, mean
// generated tokens and mean seconds per sample.
struct OverheadRow {
  std::string model;
  int shots = 0;
  std::string type;
  double tokens = 0.0;
  double seconds = 0.0;
};

struct OverheadReport {
  std::vector<OverheadRow> rows;
  std::vector<Overhead> per_item;  // hybrid minus natural, aligned by item record
  double mean_token_delta = 0.0;
};

// Both reports must cover the same task, style and items in the same order.
OverheadReport compare_overhead(const EvalReport& natural, const EvalReport& hybrid);

std::string format_overhead_table(const std::vector<OverheadRow>& rows);
nlohmann::ordered_json overhead_to_json(const OverheadReport& report);

}  // namespace switchgen

#endif  // SWITCHGEN_EVAL_H_
