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

#ifndef SWITCHGEN_LM_H_
#define SWITCHGEN_LM_H_

// Next-token distribution providers: scripted replay for tests, a smoothed
// n-gram model for desk-scale runs, and an HTTP client for real models.

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "switchgen/token_index.h"

namespace switchgen {

// The prompt and the tokens generated after it. Providers that only care
// about the concatenation call full().
struct LmContext {
  std::span<const TokenId> prompt;
  std::span<const TokenId> generated;

  std::size_t size() const { return prompt.size() + generated.size(); }
  std::vector<TokenId> full() const;
};

class LmProvider {
 public:
  virtual ~LmProvider() = default;

  virtual int vocab_size() const = 0;
  virtual TokenId eos_id() const = 0;

  // Length vocab_size(), all finite. Must be safe to call concurrently.
  virtual std::vector<double> next_logits(const LmContext& context) const = 0;
};

// Throws InvalidArgument for ids outside [0, vocab_size) and
// ContextTooLong when the context exceeds `max_context`.
void check_context(const LmContext& context, int vocab_size, std::size_t max_context);

inline constexpr double kOneHotFloor = -1e9;

// One scripted step: a token id emitted as one-hot logits, or explicit
// logits.
struct ScriptStep {
  TokenId token = -1;
  std::vector<double> logits;

  static ScriptStep one_hot(TokenId id) { return {id, {}}; }
  static ScriptStep explicit_logits(std::vector<double> values) { return {-1, std::move(values)}; }
};

// A script used when the decoded prompt contains every string in
// `prompt_contains` (an empty filter matches everything).
struct ScriptRule {
  std::vector<std::string> prompt_contains;
  std::vector<ScriptStep> steps;
};

// Replays steps by generated position: the step at index
// context.generated.size() is served, so repeated calls with the same
// context return the same logits. Past the end of the script the provider
// emits EOS one-hot forever.
class ScriptedLm final : public LmProvider {
 public:
  ScriptedLm(int vocab_size, TokenId eos_id, std::vector<ScriptStep> steps);
  // Rules are matched against the prompt decoded through `vocab`.
  ScriptedLm(std::shared_ptr<const Vocabulary> vocab, std::vector<ScriptRule> rules);

  // {"version":1, "rules":[{"prompt_contains"?: str | [str], "steps"?:[id | [logits]],
  //   "text"?: str}]}; "text" is tokenized greedily with `vocab`.
  static ScriptedLm from_json(const nlohmann::json& doc,
                              std::shared_ptr<const Vocabulary> vocab);
  static ScriptedLm load(const std::filesystem::path& path,
                         std::shared_ptr<const Vocabulary> vocab);

  int vocab_size() const override { return vocab_size_; }
  TokenId eos_id() const override { return eos_id_; }
  std::vector<double> next_logits(const LmContext& context) const override;

 private:
  const ScriptRule* select(const LmContext& context) const;

  int vocab_size_;
  TokenId eos_id_;
  std::shared_ptr<const Vocabulary> vocab_;
  std::vector<ScriptRule> rules_;
};

struct NgramTrainOptions {
  int order = 3;
  // Treat each non-empty line as a sequence ending in EOS. Off: the whole
  // corpus is one sequence and EOS is only reachable through smoothing.
  bool eos_per_line = false;
};

// Add-one smoothed n-gram model over a Vocabulary. Counts are kept for all
// history lengths below the order so short contexts (including the empty
// one) back off to the longest available history.
class NgramLm final : public LmProvider {
 public:
  // Throws InvalidArgument for order outside [2, 4] and EmptyCorpus when
  // nothing in the corpus tokenizes.
  static NgramLm train(std::string_view corpus, const Vocabulary& vocab,
                       const NgramTrainOptions& options = {});
  static NgramLm train_file(const std::filesystem::path& corpus, const Vocabulary& vocab,
                            const NgramTrainOptions& options = {});

  int order() const { return order_; }
  int vocab_size() const override { return vocab_size_; }
  TokenId eos_id() const override { return eos_id_; }
  std::vector<double> next_logits(const LmContext& context) const override;

  // Probability of `next` after `history` (only the last order-1 tokens
  // matter).
  double probability(std::span<const TokenId> history, TokenId next) const;

  nlohmann::ordered_json to_json() const;
  static NgramLm from_json(const nlohmann::json& doc);
  static NgramLm load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  friend bool operator==(const NgramLm& a, const NgramLm& b) {
    return a.order_ == b.order_ && a.vocab_size_ == b.vocab_size_ && a.eos_id_ == b.eos_id_ &&
           a.max_context_ == b.max_context_ && a.rows_ == b.rows_;
  }

 private:
  struct Row {
    std::map<TokenId, long> next;
    long total = 0;

    friend bool operator==(const Row&, const Row&) = default;
  };

  const Row* row_for(std::span<const TokenId> history) const;

  int order_ = 2;
  int vocab_size_ = 0;
  TokenId eos_id_ = 0;
  std::size_t max_context_ = 1 << 20;
  std::map<std::vector<TokenId>, Row> rows_;
};

// Client of the logit-server protocol:
//   POST <base>/v1/logits  {"context":[int...], "prompt_length":int}
//   -> 200 {"vocab_size":int, "logits":[float...]}
//   -> 4xx/5xx {"error":str}
class RemoteLm final : public LmProvider {
 public:
  RemoteLm(std::string base_url, int vocab_size, TokenId eos_id,
           std::chrono::milliseconds timeout = std::chrono::seconds(60));

  int vocab_size() const override { return vocab_size_; }
  TokenId eos_id() const override { return eos_id_; }

  // Throws RemoteError on transport failure or error status and
  // ProtocolError on a malformed or wrongly sized response.
  std::vector<double> next_logits(const LmContext& context) const override;

 private:
  std::string scheme_host_port_;
  std::string path_prefix_;
  int vocab_size_;
  TokenId eos_id_;
  std::chrono::milliseconds timeout_;
};

// Serves any provider over the logit-server protocol. Used for record and
// replay stubs and to put the n-gram model behind HTTP.
class LogitServer {
 public:
  explicit LogitServer(const LmProvider& provider);
  ~LogitServer();

  LogitServer(const LogitServer&) = delete;
  LogitServer& operator=(const LogitServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace switchgen

#endif  // SWITCHGEN_LM_H_
