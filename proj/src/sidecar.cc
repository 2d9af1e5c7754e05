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

#include "switchgen/sidecar.h"

#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "switchgen/automata.h"
#include "switchgen/error.h"
#include "switchgen/schema.h"

namespace switchgen {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

struct Session {
  std::shared_ptr<const TokenIndex> index;
  StateId state = 0;
  Clock::time_point last_used;
};

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, json{{"error", message}});
}

}  // namespace

struct MaskSidecar::Impl {
  SidecarOptions options;
  httplib::Server server;
  std::thread thread;

  mutable std::mutex mu;
  std::map<std::string, std::shared_ptr<const Vocabulary>> vocabularies;
  std::map<std::pair<std::string, std::string>, std::shared_ptr<const TokenIndex>> cache;
  std::map<std::string, Session> sessions;
  std::mt19937_64 id_source{std::random_device{}()};

  explicit Impl(SidecarOptions opts) : options(opts) {
    server.Post("/v1/session",
                [this](const httplib::Request& req, httplib::Response& res) { open(req, res); });
    server.Post("/v1/allowed",
                [this](const httplib::Request& req, httplib::Response& res) { allowed(req, res); });
    server.Post("/v1/advance",
                [this](const httplib::Request& req, httplib::Response& res) { advance(req, res); });
    server.Delete("/v1/session", [this](const httplib::Request& req, httplib::Response& res) {
      const auto doc = json::parse(req.body, nullptr, false);
      if (doc.is_discarded() || !doc.is_object() || !doc.contains("session_id") ||
          !doc["session_id"].is_string()) {
        return fail(res, 400, "request must carry a session_id");
      }
      close(doc["session_id"].get<std::string>(), res);
    });
    server.Delete(R"(/v1/session/([0-9a-f]+))",
                  [this](const httplib::Request& req, httplib::Response& res) {
                    close(req.matches[1].str(), res);
                  });
  }

  // Drops idle sessions; caller holds `mu`.
  void sweep(Clock::time_point now) {
    for (auto it = sessions.begin(); it != sessions.end();) {
      if (now - it->second.last_used > options.idle_ttl) {
        it = sessions.erase(it);
      } else {
        ++it;
      }
    }
  }

  std::string new_id() {
    static constexpr char kHex[] = "0123456789abcdef";
    std::uint64_t bits = id_source();
    std::string id(16, '0');
    for (char& c : id) {
      c = kHex[bits & 15];
      bits >>= 4;
    }
    return id;
  }

  static std::optional<json> body_of(const httplib::Request& req, httplib::Response& res) {
    auto doc = json::parse(req.body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      fail(res, 400, "request body must be a JSON object");
      return std::nullopt;
    }
    return doc;
  }

  // Looks up a live session and refreshes its idle clock; caller holds `mu`.
  Session* find(const json& doc, httplib::Response& res) {
    if (!doc.contains("session_id") || !doc["session_id"].is_string()) {
      fail(res, 400, "request must carry a session_id");
      return nullptr;
    }
    const auto now = Clock::now();
    sweep(now);
    auto it = sessions.find(doc["session_id"].get<std::string>());
    if (it == sessions.end()) {
      fail(res, 404, "unknown session");
      return nullptr;
    }
    it->second.last_used = now;
    return &it->second;
  }

  void open(const httplib::Request& req, httplib::Response& res) {
    const auto doc = body_of(req, res);
    if (!doc) return;
    const bool has_pattern = doc->contains("pattern");
    const bool has_schema = doc->contains("schema");
    if (has_pattern == has_schema) {
      return fail(res, 400, "give exactly one of pattern or schema");
    }
    if (!doc->contains("vocab_id") || !(*doc)["vocab_id"].is_string()) {
      return fail(res, 400, "request must carry a vocab_id");
    }
    const std::string vocab_id = (*doc)["vocab_id"].get<std::string>();
    std::shared_ptr<const Vocabulary> vocab;
    {
      std::lock_guard lock(mu);
      auto it = vocabularies.find(vocab_id);
      if (it == vocabularies.end()) return fail(res, 404, "unknown vocabulary '" + vocab_id + "'");
      vocab = it->second;
    }
    std::string regex;
    try {
      if (has_pattern) {
        if (!(*doc)["pattern"].is_string()) return fail(res, 400, "pattern must be a string");
        regex = (*doc)["pattern"].get<std::string>();
      } else {
        const AnswerSchema schema = AnswerSchema::from_json((*doc)["schema"]);
        schema.validate();
        regex = schema_to_regex(schema);
      }
    } catch (const Error& e) {
      return fail(res, 422, e.what());
    } catch (const json::exception& e) {
      return fail(res, 422, e.what());
    }

    std::shared_ptr<const TokenIndex> index;
    {
      std::lock_guard lock(mu);
      auto it = cache.find({vocab_id, regex});
      if (it != cache.end()) index = it->second;
    }
    if (!index) {
      try {
        CompileOptions compile_options;
        compile_options.max_states = options.max_states;
        index = std::make_shared<const TokenIndex>(build_index(
            compile(parse_regex(regex), compile_options), *vocab, options.index_threads));
      } catch (const Error& e) {
        return fail(res, 422, e.what());
      }
      std::lock_guard lock(mu);
      cache.emplace(std::make_pair(vocab_id, regex), index);
    }

    std::lock_guard lock(mu);
    const auto now = Clock::now();
    sweep(now);
    std::string id = new_id();
    while (sessions.count(id)) id = new_id();
    sessions[id] = Session{index, 0, now};
    reply(res, 200, json{{"session_id", id}, {"state", 0}, {"accept", index->is_accept(0)}});
  }

  void allowed(const httplib::Request& req, httplib::Response& res) {
    const auto doc = body_of(req, res);
    if (!doc) return;
    std::lock_guard lock(mu);
    Session* session = find(*doc, res);
    if (!session) return;
    reply(res, 200,
          json{{"token_ids", session->index->allowed_tokens(session->state)},
               {"eos_allowed", session->index->eos_allowed(session->state)}});
  }

  void advance(const httplib::Request& req, httplib::Response& res) {
    const auto doc = body_of(req, res);
    if (!doc) return;
    if (!doc->contains("token_id") || !(*doc)["token_id"].is_number_integer()) {
      return fail(res, 400, "request must carry an integer token_id");
    }
    const auto token = (*doc)["token_id"].get<std::int64_t>();
    std::lock_guard lock(mu);
    Session* session = find(*doc, res);
    if (!session) return;
    if (token < 0 || token >= session->index->vocab_size()) {
      return fail(res, 409, "token " + std::to_string(token) + " is not in the vocabulary");
    }
    try {
      session->state = session->index->advance(session->state, static_cast<TokenId>(token));
    } catch (const DisallowedToken& e) {
      return fail(res, 409, e.what());
    }
    reply(res, 200,
          json{{"state", session->state}, {"accept", session->index->is_accept(session->state)}});
  }

  void close(const std::string& id, httplib::Response& res) {
    std::lock_guard lock(mu);
    sweep(Clock::now());
    if (sessions.erase(id) == 0) return fail(res, 404, "unknown session");
    reply(res, 200, json{{"closed", id}});
  }
};

MaskSidecar::MaskSidecar(SidecarOptions options) : impl_(std::make_unique<Impl>(options)) {}

MaskSidecar::~MaskSidecar() { stop(); }

void MaskSidecar::add_vocabulary(const std::string& vocab_id,
                                 std::shared_ptr<const Vocabulary> vocab) {
  std::lock_guard lock(impl_->mu);
  impl_->vocabularies[vocab_id] = std::move(vocab);
}

void MaskSidecar::add_index(const std::string& vocab_id, const std::string& regex,
                            std::shared_ptr<const TokenIndex> index) {
  std::lock_guard lock(impl_->mu);
  impl_->cache[{vocab_id, regex}] = std::move(index);
}

std::size_t MaskSidecar::session_count() const {
  std::lock_guard lock(impl_->mu);
  impl_->sweep(Clock::now());
  return impl_->sessions.size();
}

int MaskSidecar::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error("cannot bind mask sidecar on " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void MaskSidecar::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw Error("cannot bind mask sidecar on " + host + ":" + std::to_string(port));
  }
}

void MaskSidecar::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace switchgen
