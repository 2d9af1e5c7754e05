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

#include "switchgen/lm.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "switchgen/error.h"

namespace switchgen {

std::vector<TokenId> LmContext::full() const {
  std::vector<TokenId> out(prompt.begin(), prompt.end());
  out.insert(out.end(), generated.begin(), generated.end());
  return out;
}

void check_context(const LmContext& context, int vocab_size, std::size_t max_context) {
  if (context.size() > max_context) {
    throw ContextTooLong("context of " + std::to_string(context.size()) +
                         " tokens exceeds " + std::to_string(max_context));
  }
  for (auto part : {context.prompt, context.generated}) {
    for (TokenId t : part) {
      if (t < 0 || t >= vocab_size) {
        throw InvalidArgument("context token " + std::to_string(t) + " outside vocabulary");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// ScriptedLm

namespace {

void check_steps(const std::vector<ScriptStep>& steps, int vocab_size) {
  for (const auto& step : steps) {
    if (step.token >= vocab_size) {
      throw InvalidArgument("scripted token " + std::to_string(step.token) +
                            " outside vocabulary");
    }
    if (step.token < 0 && static_cast<int>(step.logits.size()) != vocab_size) {
      throw InvalidArgument("scripted logits must have vocabulary length");
    }
  }
}

}  // namespace

ScriptedLm::ScriptedLm(int vocab_size, TokenId eos_id, std::vector<ScriptStep> steps)
    : vocab_size_(vocab_size), eos_id_(eos_id) {
  if (vocab_size_ < 1 || eos_id_ < 0 || eos_id_ >= vocab_size_) {
    throw InvalidArgument("bad scripted LM vocabulary");
  }
  check_steps(steps, vocab_size_);
  rules_.push_back({{}, std::move(steps)});
}

ScriptedLm::ScriptedLm(std::shared_ptr<const Vocabulary> vocab, std::vector<ScriptRule> rules)
    : vocab_size_(vocab->size()),
      eos_id_(vocab->eos_id()),
      vocab_(std::move(vocab)),
      rules_(std::move(rules)) {
  for (const auto& rule : rules_) check_steps(rule.steps, vocab_size_);
}

const ScriptRule* ScriptedLm::select(const LmContext& context) const {
  std::string prompt_text;
  bool decoded = false;
  for (const auto& rule : rules_) {
    if (rule.prompt_contains.empty()) return &rule;
    if (!vocab_) continue;
    if (!decoded) {
      prompt_text = vocab_->decode(context.prompt);
      decoded = true;
    }
    const bool all = std::all_of(
        rule.prompt_contains.begin(), rule.prompt_contains.end(),
        [&](const std::string& needle) { return prompt_text.find(needle) != std::string::npos; });
    if (all) return &rule;
  }
  return nullptr;
}

std::vector<double> ScriptedLm::next_logits(const LmContext& context) const {
  check_context(context, vocab_size_, static_cast<std::size_t>(-1));
  const ScriptRule* rule = select(context);
  const std::size_t at = context.generated.size();
  std::vector<double> logits;
  if (rule && at < rule->steps.size()) {
    const ScriptStep& step = rule->steps[at];
    if (step.token < 0) {
      if (static_cast<int>(step.logits.size()) != vocab_size_) {
        throw InvalidArgument("scripted logits have the wrong length");
      }
      return step.logits;
    }
    logits.assign(vocab_size_, kOneHotFloor);
    logits[step.token] = 0.0;
    return logits;
  }
  logits.assign(vocab_size_, kOneHotFloor);
  logits[eos_id_] = 0.0;
  return logits;
}

ScriptedLm ScriptedLm::from_json(const nlohmann::json& doc,
                                 std::shared_ptr<const Vocabulary> vocab) {
  try {
    std::vector<ScriptRule> rules;
    for (const auto& r : doc.at("rules")) {
      ScriptRule rule;
      if (r.contains("prompt_contains")) {
        const auto& filter = r["prompt_contains"];
        if (filter.is_array()) {
          rule.prompt_contains = filter.get<std::vector<std::string>>();
        } else {
          rule.prompt_contains.push_back(filter.get<std::string>());
        }
      }
      if (r.contains("text")) {
        for (TokenId t : vocab->tokenize(r["text"].get<std::string>())) {
          rule.steps.push_back(ScriptStep::one_hot(t));
        }
      }
      if (r.contains("steps")) {
        for (const auto& s : r["steps"]) {
          if (s.is_array()) {
            rule.steps.push_back(ScriptStep::explicit_logits(s.get<std::vector<double>>()));
          } else {
            const TokenId t = s.get<TokenId>();
            if (t < 0 || t >= vocab->size()) throw FormatError("scripted token out of range");
            rule.steps.push_back(ScriptStep::one_hot(t));
          }
        }
      }
      for (const auto& s : rule.steps) {
        if (s.token < 0 && static_cast<int>(s.logits.size()) != vocab->size()) {
          throw FormatError("scripted logits must have vocabulary length");
        }
      }
      rules.push_back(std::move(rule));
    }
    return ScriptedLm(std::move(vocab), std::move(rules));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed script: ") + e.what());
  }
}

ScriptedLm ScriptedLm::load(const std::filesystem::path& path,
                            std::shared_ptr<const Vocabulary> vocab) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open script " + path.string());
  const auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw FormatError("script is not valid JSON");
  return from_json(doc, std::move(vocab));
}

// ---------------------------------------------------------------------------
// NgramLm

NgramLm NgramLm::train(std::string_view corpus, const Vocabulary& vocab,
                       const NgramTrainOptions& options) {
  if (options.order < 2 || options.order > 4) {
    throw InvalidArgument("n-gram order must be within [2, 4]");
  }
  std::vector<std::vector<TokenId>> sequences;
  std::size_t content_tokens = 0;
  auto add_sequence = [&](std::string_view text, bool with_eos) {
    auto ids = vocab.tokenize(text);
    if (ids.empty()) return;
    content_tokens += ids.size();
    if (with_eos) ids.push_back(vocab.eos_id());
    sequences.push_back(std::move(ids));
  };
  if (options.eos_per_line) {
    std::size_t start = 0;
    while (start <= corpus.size()) {
      const std::size_t nl = corpus.find('\n', start);
      const std::size_t end = nl == std::string_view::npos ? corpus.size() : nl;
      add_sequence(corpus.substr(start, end - start), true);
      if (nl == std::string_view::npos) break;
      start = nl + 1;
    }
  } else {
    add_sequence(corpus, false);
  }
  if (content_tokens == 0) throw EmptyCorpus("corpus contains no tokenizable text");

  NgramLm lm;
  lm.order_ = options.order;
  lm.vocab_size_ = vocab.size();
  lm.eos_id_ = vocab.eos_id();
  for (const auto& seq : sequences) {
    for (std::size_t j = 0; j < seq.size(); ++j) {
      for (int h = 0; h < lm.order_ && static_cast<std::size_t>(h) <= j; ++h) {
        std::vector<TokenId> history(seq.begin() + (j - h), seq.begin() + j);
        Row& row = lm.rows_[std::move(history)];
        ++row.next[seq[j]];
        ++row.total;
      }
    }
  }
  return lm;
}

NgramLm NgramLm::train_file(const std::filesystem::path& corpus, const Vocabulary& vocab,
                            const NgramTrainOptions& options) {
  std::ifstream in(corpus, std::ios::binary);
  if (!in) throw Error("cannot open corpus " + corpus.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return train(buf.str(), vocab, options);
}

const NgramLm::Row* NgramLm::row_for(std::span<const TokenId> history) const {
  const std::size_t h = std::min<std::size_t>(order_ - 1, history.size());
  std::vector<TokenId> key(history.end() - h, history.end());
  auto it = rows_.find(key);
  return it == rows_.end() ? nullptr : &it->second;
}

double NgramLm::probability(std::span<const TokenId> history, TokenId next) const {
  const Row* row = row_for(history);
  if (!row) return 1.0 / vocab_size_;
  auto it = row->next.find(next);
  const double count = it == row->next.end() ? 0.0 : static_cast<double>(it->second);
  return (count + 1.0) / (static_cast<double>(row->total) + vocab_size_);
}

std::vector<double> NgramLm::next_logits(const LmContext& context) const {
  check_context(context, vocab_size_, max_context_);
  // Only the trailing order-1 tokens matter.
  std::vector<TokenId> tail;
  const std::size_t want = order_ - 1;
  const std::size_t from_generated = std::min(want, context.generated.size());
  const std::size_t from_prompt = std::min(want - from_generated, context.prompt.size());
  tail.insert(tail.end(), context.prompt.end() - from_prompt, context.prompt.end());
  tail.insert(tail.end(), context.generated.end() - from_generated, context.generated.end());

  const Row* row = row_for(tail);
  if (!row) return std::vector<double>(vocab_size_, -std::log(static_cast<double>(vocab_size_)));
  const double denom = static_cast<double>(row->total) + vocab_size_;
  std::vector<double> logits(vocab_size_, std::log(1.0 / denom));
  for (const auto& [token, count] : row->next) {
    logits[token] = std::log((static_cast<double>(count) + 1.0) / denom);
  }
  return logits;
}

nlohmann::ordered_json NgramLm::to_json() const {
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  doc["order"] = order_;
  doc["vocab_size"] = vocab_size_;
  doc["eos_id"] = eos_id_;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& [history, row] : rows_) {
    nlohmann::ordered_json entry;
    entry["history"] = history;
    auto next = nlohmann::ordered_json::array();
    for (const auto& [token, count] : row.next) next.push_back({token, count});
    entry["next"] = std::move(next);
    rows.push_back(std::move(entry));
  }
  doc["rows"] = std::move(rows);
  return doc;
}

NgramLm NgramLm::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("version").get<int>() != 1) throw FormatError("unsupported n-gram version");
    NgramLm lm;
    lm.order_ = doc.at("order").get<int>();
    lm.vocab_size_ = doc.at("vocab_size").get<int>();
    lm.eos_id_ = doc.at("eos_id").get<TokenId>();
    if (lm.order_ < 2 || lm.order_ > 4 || lm.vocab_size_ < 1 || lm.eos_id_ < 0 ||
        lm.eos_id_ >= lm.vocab_size_) {
      throw FormatError("bad n-gram header");
    }
    for (const auto& entry : doc.at("rows")) {
      auto history = entry.at("history").get<std::vector<TokenId>>();
      if (static_cast<int>(history.size()) >= lm.order_) throw FormatError("history too long");
      Row row;
      for (const auto& pair : entry.at("next")) {
        const TokenId t = pair.at(0).get<TokenId>();
        const long c = pair.at(1).get<long>();
        if (t < 0 || t >= lm.vocab_size_ || c < 1) throw FormatError("bad n-gram count");
        row.next[t] = c;
        row.total += c;
      }
      lm.rows_.emplace(std::move(history), std::move(row));
    }
    return lm;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed n-gram model: ") + e.what());
  }
}

NgramLm NgramLm::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open n-gram model " + path.string());
  const auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw FormatError("n-gram model is not valid JSON");
  return from_json(doc);
}

void NgramLm::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

// ---------------------------------------------------------------------------
// RemoteLm

RemoteLm::RemoteLm(std::string base_url, int vocab_size, TokenId eos_id,
                   std::chrono::milliseconds timeout)
    : vocab_size_(vocab_size), eos_id_(eos_id), timeout_(timeout) {
  if (base_url.find("://") == std::string::npos) base_url = "http://" + base_url;
  const std::size_t host_start = base_url.find("://") + 3;
  const std::size_t slash = base_url.find('/', host_start);
  scheme_host_port_ = base_url.substr(0, slash);
  if (slash != std::string::npos) path_prefix_ = base_url.substr(slash);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::vector<double> RemoteLm::next_logits(const LmContext& context) const {
  check_context(context, vocab_size_, static_cast<std::size_t>(-1));
  nlohmann::json request;
  request["context"] = context.full();
  request["prompt_length"] = context.prompt.size();

  httplib::Client client(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  auto res = client.Post(path_prefix_ + "/v1/logits", request.dump(), "application/json");
  if (!res) {
    throw RemoteError("logit server unreachable: " + httplib::to_string(res.error()));
  }
  const auto body = nlohmann::json::parse(res->body, nullptr, false);
  if (res->status < 200 || res->status >= 300) {
    std::string message = "HTTP " + std::to_string(res->status);
    if (!body.is_discarded() && body.is_object() && body.contains("error") &&
        body["error"].is_string()) {
      message += ": " + body["error"].get<std::string>();
    }
    throw RemoteError("logit server error, " + message);
  }
  if (body.is_discarded() || !body.is_object()) throw ProtocolError("response is not a JSON object");
  try {
    const int v = body.at("vocab_size").get<int>();
    auto logits = body.at("logits").get<std::vector<double>>();
    if (v != vocab_size_) {
      throw ProtocolError("server vocab_size " + std::to_string(v) + " != " +
                          std::to_string(vocab_size_));
    }
    if (static_cast<int>(logits.size()) != vocab_size_) {
      throw ProtocolError("server returned " + std::to_string(logits.size()) +
                          " logits, expected " + std::to_string(vocab_size_));
    }
    for (double x : logits) {
      if (!std::isfinite(x)) throw ProtocolError("server returned a non-finite logit");
    }
    return logits;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed logits response: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// LogitServer

struct LogitServer::Impl {
  const LmProvider& provider;
  httplib::Server server;
  std::thread thread;

  explicit Impl(const LmProvider& p) : provider(p) {
    server.Post("/v1/logits", [this](const httplib::Request& req, httplib::Response& res) {
      auto fail = [&](int status, const std::string& message) {
        res.status = status;
        res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
      };
      const auto doc = nlohmann::json::parse(req.body, nullptr, false);
      if (doc.is_discarded() || !doc.is_object() || !doc.contains("context") ||
          !doc["context"].is_array()) {
        return fail(400, "request must be {\"context\": [int, ...]}");
      }
      std::vector<TokenId> full;
      try {
        full = doc["context"].get<std::vector<TokenId>>();
      } catch (const nlohmann::json::exception&) {
        return fail(400, "context must contain integers");
      }
      std::size_t prompt_length = 0;
      if (doc.contains("prompt_length") && doc["prompt_length"].is_number_unsigned()) {
        prompt_length = std::min<std::size_t>(doc["prompt_length"].get<std::size_t>(), full.size());
      }
      const std::span<const TokenId> all(full);
      const LmContext context{all.first(prompt_length), all.subspan(prompt_length)};
      try {
        nlohmann::json out;
        out["vocab_size"] = provider.vocab_size();
        out["logits"] = provider.next_logits(context);
        res.set_content(out.dump(), "application/json");
      } catch (const ContextTooLong& e) {
        fail(413, e.what());
      } catch (const InvalidArgument& e) {
        fail(400, e.what());
      } catch (const std::exception& e) {
        fail(500, e.what());
      }
    });
  }
};

LogitServer::LogitServer(const LmProvider& provider)
    : impl_(std::make_unique<Impl>(provider)) {}

LogitServer::~LogitServer() { stop(); }

int LogitServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error("cannot bind logit server");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void LogitServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error("cannot bind logit server");
}

void LogitServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace switchgen
