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

#include "switchgen/eval.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "switchgen/automata.h"
#include "switchgen/error.h"

namespace switchgen {

namespace {

constexpr std::string_view kMarker = "answer is ";

std::string lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view text) {
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  return text;
}

std::string collapse(std::string_view text) {
  std::string out;
  bool gap = false;
  for (char c : trim(text)) {
    if (is_space(c)) {
      gap = true;
      continue;
    }
    if (gap) out.push_back(' ');
    gap = false;
    out.push_back(c);
  }
  return out;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Commas with a digit on both sides.
std::string strip_digit_commas(std::string_view text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == ',' && i > 0 && i + 1 < text.size() && is_digit(text[i - 1]) &&
        is_digit(text[i + 1])) {
      continue;
    }
    out.push_back(text[i]);
  }
  return out;
}

bool looks_numeric(std::string_view text) {
  bool digit = false;
  for (char c : text) {
    if (is_digit(c)) {
      digit = true;
    } else if (c != ',' && c != '.' && c != '-' && c != '+') {
      return false;
    }
  }
  return digit;
}

std::string drop_separators(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c != '-' && !is_space(c)) out.push_back(c);
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string final_answer_object(std::string_view value, bool quote) {
  const std::string rendered =
      quote ? nlohmann::json(std::string(value)).dump() : std::string(value);
  return "{\"final_answer\": " + rendered + "}";
}

std::string gold_document(const AnswerSchema& schema, const std::string& gold) {
  using K = AnswerSchema::Kind;
  if (!schema.quoted && (schema.kind == K::kInteger || schema.kind == K::kDecimal)) {
    return "{\"final_answer\": " + gold + "}";
  }
  return final_answer_object(gold, true);
}

std::string format_value(double v, int precision) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(precision);
  out << v;
  return out.str();
}

}  // namespace

const char* metric_name(Metric metric) {
  return metric == Metric::kExactMatch ? "exact_match" : "label_accuracy";
}

void TaskSpec::validate() const {
  if (items.empty()) throw InvalidArgument("task '" + name + "' has no items");
  if (task_descriptions.empty() || format_descriptions.empty()) {
    throw InvalidArgument("task '" + name + "' needs task and format descriptions");
  }
  schema.validate();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!conforms_to_schema(schema, gold_document(schema, items[i].gold))) {
      throw InvalidArgument("gold answer of item " + std::to_string(i) + " ('" + items[i].gold +
                            "') does not fit the " + kind_name(schema.kind) + " schema");
    }
  }
}

TaskSpec TaskSpec::from_json(const nlohmann::json& doc) {
  TaskSpec task;
  try {
    task.name = doc.value("name", std::string("task"));
    const std::string metric = doc.value("metric", std::string("exact_match"));
    if (metric == "exact_match") {
      task.metric = Metric::kExactMatch;
    } else if (metric == "label_accuracy") {
      task.metric = Metric::kLabelAccuracy;
    } else {
      throw FormatError("unknown metric '" + metric + "'");
    }
    task.schema = AnswerSchema::from_json(doc.at("schema"));
    task.task_descriptions = doc.at("task_descriptions").get<std::vector<std::string>>();
    task.format_descriptions = doc.at("format_descriptions").get<std::vector<std::string>>();
    if (doc.contains("shots")) {
      for (const auto& s : doc["shots"]) {
        Shot shot{s.at("q").get<std::string>(), s.at("a").get<std::string>(), std::nullopt};
        if (s.contains("gold")) shot.gold = s["gold"].get<std::string>();
        task.shots.push_back(std::move(shot));
      }
    }
    for (const auto& it : doc.at("items")) {
      task.items.push_back({it.at("q").get<std::string>(), it.at("gold").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed task file: ") + e.what());
  }
  task.validate();
  return task;
}

TaskSpec TaskSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open task file " + path.string());
  const auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw FormatError("task file " + path.string() + " is not JSON");
  return from_json(doc);
}

const char* prompt_kind_name(PromptKind kind) {
  switch (kind) {
    case PromptKind::kBase:
      return "base";
    case PromptKind::kInstructFormat:
      return "instruct_format";
    case PromptKind::kBetterFormat:
      return "better_format";
  }
  return "?";
}

PromptKind parse_prompt_kind(std::string_view name) {
  if (name == "base") return PromptKind::kBase;
  if (name == "instruct_format" || name == "if") return PromptKind::kInstructFormat;
  if (name == "better_format" || name == "bf") return PromptKind::kBetterFormat;
  throw InvalidArgument("unknown prompt style '" + std::string(name) + "'");
}

std::optional<std::string> answer_after_marker(std::string_view text) {
  const std::size_t pos = lower(text).rfind(kMarker);
  if (pos == std::string::npos) return std::nullopt;
  std::string_view rest = text.substr(pos + kMarker.size());
  rest = rest.substr(0, rest.find('\n'));
  rest = trim(rest);
  if (!rest.empty() && rest.back() == '.') rest.remove_suffix(1);
  rest = trim(rest);
  if (rest.empty()) return std::nullopt;
  return std::string(rest);
}

std::string rewrite_answer_clause(std::string_view text, std::string_view value, bool quote) {
  const std::size_t pos = lower(text).rfind(kMarker);
  if (pos == std::string::npos) {
    std::string out(trim(text));
    return out + " The answer is " + final_answer_object(value, quote);
  }
  return std::string(text.substr(0, pos + kMarker.size())) + final_answer_object(value, quote);
}

std::vector<Message> build_prompt(const TaskSpec& task, const PromptStyle& style,
                                  std::size_t task_variation, std::size_t format_variation,
                                  std::string_view question) {
  if (task_variation >= task.task_descriptions.size() ||
      format_variation >= task.format_descriptions.size()) {
    throw InvalidArgument("variation index out of range");
  }
  if (style.shots < 0) throw InvalidArgument("shot count must be >= 0");
  if (static_cast<std::size_t>(style.shots) > task.shots.size()) {
    throw MissingShots("asked for " + std::to_string(style.shots) + " shots, pool has " +
                       std::to_string(task.shots.size()));
  }
  const bool better = style.kind == PromptKind::kBetterFormat;
  const std::string& task_text = task.task_descriptions[task_variation];
  std::string format_text = task.format_descriptions[format_variation];
  if (better) {
    const auto placeholder = answer_after_marker(format_text);
    format_text = rewrite_answer_clause(format_text, placeholder.value_or("<answer>"), false);
  }

  std::vector<std::pair<std::string, std::string>> shots;
  for (int k = 0; k < style.shots; ++k) {
    const Shot& shot = task.shots[k];
    std::string answer = shot.answer;
    if (better) {
      const auto value = shot.gold ? shot.gold : answer_after_marker(answer);
      if (!value) throw InvalidArgument("shot " + std::to_string(k) + " has no answer value");
      answer = rewrite_answer_clause(answer, *value, true);
    }
    shots.emplace_back(shot.question, std::move(answer));
  }

  std::vector<Message> messages;
  if (style.kind == PromptKind::kBase) {
    std::string content = "Follow the instruction to complete the task: " + task_text +
                          "\nInstruct: " + format_text;
    if (!shots.empty()) {
      content += "\nFew-shot examples:";
      for (const auto& [q, a] : shots) content += "\nQuestion: " + q + "\nAnswer: " + a;
    }
    content += "\nQuestion: " + std::string(question);
    messages.push_back({"user", std::move(content)});
    return messages;
  }
  messages.push_back({"system", "Follow the instruction to complete the task:\n" + task_text +
                                    "\nInstruct: " + format_text});
  for (auto& [q, a] : shots) {
    messages.push_back({"user", std::move(q)});
    messages.push_back({"assistant", std::move(a)});
  }
  messages.push_back({"user", std::string(question)});
  return messages;
}

std::string render_messages(const std::vector<Message>& messages) {
  std::string out;
  for (const auto& m : messages) out += m.role + ": " + m.content + "\n";
  out += "assistant: ";
  return out;
}

std::string normalize_answer(std::string_view text, const Normalization& norm) {
  std::string out = norm.collapse_whitespace ? collapse(text) : std::string(text);
  if (norm.strip_separators) out = drop_separators(out);
  if (norm.strip_numeric_commas && looks_numeric(out)) {
    out.erase(std::remove(out.begin(), out.end(), ','), out.end());
  }
  if (norm.casefold_letters && out.size() == 1 &&
      std::isalpha(static_cast<unsigned char>(out[0]))) {
    out = lower(out);
  }
  return out;
}

int score_item(const std::optional<std::string>& parsed, std::string_view gold, Metric metric,
               const Normalization& norm) {
  if (!parsed) return 0;
  (void)metric;  // labels and free answers share the normalized comparison
  return normalize_answer(*parsed, norm) == normalize_answer(gold, norm) ? 1 : 0;
}

bool contains_gold(std::string_view raw, std::string_view gold, const Normalization& norm) {
  auto prepare = [&](std::string_view text) {
    std::string out = norm.collapse_whitespace ? collapse(text) : std::string(text);
    if (norm.strip_separators) out = drop_separators(out);
    if (norm.strip_numeric_commas) out = strip_digit_commas(out);
    return out;
  };
  const std::string haystack = prepare(raw);
  const std::string needle = prepare(gold);
  if (haystack.empty() || needle.empty()) return false;
  return haystack.find(needle) != std::string::npos;
}

std::optional<std::string> extract_answer(std::string_view text) {
  if (auto value = parse_final_answer(text)) return value;
  return answer_after_marker(text);
}

const char* method_name(Method method) {
  switch (method) {
    case Method::kNatural:
      return "natural";
    case Method::kConstrained:
      return "constrained";
    case Method::kHybrid:
      return "hybrid";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "natural") return Method::kNatural;
  if (name == "constrained") return Method::kConstrained;
  if (name == "hybrid") return Method::kHybrid;
  throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

nlohmann::ordered_json ItemRecord::to_json() const {
  nlohmann::ordered_json doc;
  doc["task_variation"] = task_variation;
  doc["format_variation"] = format_variation;
  doc["item"] = item;
  doc["raw"] = raw;
  doc["parsed"] = parsed ? nlohmann::ordered_json(*parsed) : nlohmann::ordered_json(nullptr);
  doc["gold"] = gold;
  doc["correct"] = correct;
  doc["contains_gold"] = contains_gold;
  doc["preamble_tokens"] = preamble_tokens;
  doc["constrained_tokens"] = constrained_tokens;
  doc["total_tokens"] = total_tokens;
  doc["elapsed_seconds"] = elapsed_seconds;
  doc["termination"] = termination;
  if (!error.empty()) doc["error"] = error;
  return doc;
}

GridStats grid_stats(const std::vector<std::vector<double>>& grid) {
  std::vector<double> cells;
  for (const auto& row : grid) cells.insert(cells.end(), row.begin(), row.end());
  GridStats stats;
  if (cells.empty()) return stats;
  double sum = 0.0;
  for (double c : cells) sum += c;
  stats.mean = sum / static_cast<double>(cells.size());
  double sq = 0.0;
  for (double c : cells) sq += (c - stats.mean) * (c - stats.mean);
  stats.std_dev = std::sqrt(sq / static_cast<double>(cells.size()));
  return stats;
}

bool EvalReport::consistent(double tolerance) const {
  const GridStats stats = grid_stats(grid);
  for (const auto& row : grid) {
    for (double c : row) {
      if (c < 0.0 || c > 100.0) return false;
    }
  }
  return std::abs(stats.mean - mean) <= tolerance && std::abs(stats.std_dev - std_dev) <= tolerance;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json doc;
  doc["task"] = task;
  doc["model"] = model;
  doc["style"] = {{"kind", prompt_kind_name(style.kind)}, {"shots", style.shots}};
  doc["method"] = method_name(method);
  doc["grid"] = grid;
  doc["mean"] = mean;
  doc["std"] = std_dev;
  doc["std_kind"] = "population";
  doc["contains_gold_rate"] = contains_gold_rate;
  doc["mean_total_tokens"] = mean_total_tokens;
  doc["mean_preamble_tokens"] = mean_preamble_tokens;
  doc["mean_constrained_tokens"] = mean_constrained_tokens;
  doc["mean_elapsed_seconds"] = mean_elapsed_seconds;
  auto& list = doc["items"] = nlohmann::ordered_json::array();
  for (const auto& item : items) list.push_back(item.to_json());
  return doc;
}

EvalReport run_grid(const TaskSpec& task, const PromptStyle& style, const EvalConfig& config,
                    const LmProvider& lm, const Vocabulary& vocab) {
  task.validate();
  const std::size_t n_task = task.task_descriptions.size();
  const std::size_t n_format = task.format_descriptions.size();
  const std::size_t n_items = task.items.size();
  // Fails fast on MissingShots before any generation.
  build_prompt(task, style, 0, 0, "");

  std::optional<TokenIndex> index;
  if (config.method != Method::kNatural) {
    index = build_index(compile(parse_regex(schema_to_regex(task.schema))), vocab);
  }
  const TriggerSet triggers =
      TriggerSet::from_texts(vocab, config.trigger_texts, config.trigger_on_eos);
  if (config.method == Method::kHybrid && triggers.empty() && !config.decode.preamble_budget) {
    throw InvalidArgument("hybrid evaluation needs a trigger token or a preamble budget");
  }
  const Decoder decoder(lm, vocab, index ? &*index : nullptr);

  const std::size_t total = n_task * n_format * n_items;
  std::vector<ItemRecord> records(total);
  auto evaluate = [&](std::size_t flat) {
    ItemRecord& rec = records[flat];
    rec.item = flat % n_items;
    rec.format_variation = (flat / n_items) % n_format;
    rec.task_variation = flat / (n_items * n_format);
    const TaskItem& item = task.items[rec.item];
    rec.gold = item.gold;
    try {
      const auto prompt = vocab.tokenize(
          render_messages(build_prompt(task, style, rec.task_variation, rec.format_variation,
                                       item.question)));
      DecodeOptions options = config.decode;
      options.record_trace = false;
      options.sampler.seed = splitmix64(config.seed ^ splitmix64(flat));
      DecodeResult result;
      switch (config.method) {
        case Method::kNatural:
          result = decoder.free_generate(prompt, options);
          rec.parsed = extract_answer(result.text);
          break;
        case Method::kConstrained:
          result = decoder.masked_generate(prompt, options);
          rec.parsed = parse_final_answer(result.constrained_text);
          break;
        case Method::kHybrid:
          result = decoder.hybrid_generate(prompt, triggers, options);
          rec.parsed = parse_final_answer(result.constrained_text);
          break;
      }
      rec.raw = result.text;
      rec.preamble_tokens = result.preamble_tokens;
      rec.constrained_tokens = result.constrained_tokens;
      rec.total_tokens = result.total_tokens;
      rec.elapsed_seconds = result.elapsed_seconds;
      rec.termination = termination_name(result.termination);
      rec.correct = score_item(rec.parsed, rec.gold, task.metric, config.normalization) == 1;
      rec.contains_gold = contains_gold(rec.raw, rec.gold, config.normalization);
    } catch (const Error& e) {
      rec.parsed.reset();
      rec.correct = false;
      rec.error = e.what();
      rec.termination = "error";
    }
  };

  const int threads = std::max(1, config.threads);
  if (threads == 1 || total < 2) {
    for (std::size_t i = 0; i < total; ++i) evaluate(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < total; i = next++) evaluate(i);
      });
    }
  }

  EvalReport report;
  report.task = task.name;
  report.model = config.model;
  report.style = style;
  report.method = config.method;
  report.grid.assign(n_task, std::vector<double>(n_format, 0.0));
  std::vector<std::vector<int>> correct(n_task, std::vector<int>(n_format, 0));
  double gold_hits = 0.0;
  for (const auto& rec : records) {
    if (rec.correct) ++correct[rec.task_variation][rec.format_variation];
    if (rec.contains_gold) gold_hits += 1.0;
    report.mean_total_tokens += rec.total_tokens;
    report.mean_preamble_tokens += rec.preamble_tokens;
    report.mean_constrained_tokens += rec.constrained_tokens;
    report.mean_elapsed_seconds += rec.elapsed_seconds;
  }
  for (std::size_t i = 0; i < n_task; ++i) {
    for (std::size_t j = 0; j < n_format; ++j) {
      report.grid[i][j] = 100.0 * correct[i][j] / static_cast<double>(n_items);
    }
  }
  const GridStats stats = grid_stats(report.grid);
  report.mean = stats.mean;
  report.std_dev = stats.std_dev;
  const double count = static_cast<double>(total);
  report.contains_gold_rate = 100.0 * gold_hits / count;
  report.mean_total_tokens /= count;
  report.mean_preamble_tokens /= count;
  report.mean_constrained_tokens /= count;
  report.mean_elapsed_seconds /= count;
  report.items = std::move(records);
  return report;
}

OverheadReport compare_overhead(const EvalReport& natural, const EvalReport& hybrid) {
  if (natural.items.size() != hybrid.items.size()) {
    throw InvalidArgument("reports cover different numbers of items");
  }
  OverheadReport report;
  for (std::size_t i = 0; i < natural.items.size(); ++i) {
    const ItemRecord& a = natural.items[i];
    const ItemRecord& b = hybrid.items[i];
    if (a.item != b.item || a.task_variation != b.task_variation ||
        a.format_variation != b.format_variation) {
      throw InvalidArgument("item records are not aligned");
    }
    report.per_item.push_back(
        {b.total_tokens - a.total_tokens, b.elapsed_seconds - a.elapsed_seconds});
    report.mean_token_delta += b.total_tokens - a.total_tokens;
  }
  if (!report.per_item.empty()) report.mean_token_delta /= report.per_item.size();
  report.rows.push_back({natural.model, natural.style.shots, method_name(natural.method),
                         natural.mean_total_tokens, natural.mean_elapsed_seconds});
  report.rows.push_back({hybrid.model, hybrid.style.shots,
                         std::string(method_name(hybrid.method)) + "-" +
                             prompt_kind_name(hybrid.style.kind),
                         hybrid.mean_total_tokens, hybrid.mean_elapsed_seconds});
  return report;
}

std::string format_overhead_table(const std::vector<OverheadRow>& rows) {
  std::string out = "| Model | Shot | Type | Token | Time (s) |\n|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out += "| " + r.model + " | " + std::to_string(r.shots) + " | " + r.type + " | " +
           format_value(r.tokens, 1) + " | " + format_value(r.seconds, 4) + " |\n";
  }
  return out;
}

nlohmann::ordered_json overhead_to_json(const OverheadReport& report) {
  nlohmann::ordered_json doc;
  auto& rows = doc["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"model", r.model},
                    {"shots", r.shots},
                    {"type", r.type},
                    {"tokens", r.tokens},
                    {"seconds", r.seconds}});
  }
  doc["mean_token_delta"] = report.mean_token_delta;
  auto& deltas = doc["per_item_token_delta"] = nlohmann::ordered_json::array();
  for (const auto& o : report.per_item) deltas.push_back(o.token_delta);
  return doc;
}

}  // namespace switchgen
