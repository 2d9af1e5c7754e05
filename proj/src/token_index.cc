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

#include "switchgen/token_index.h"

#include <algorithm>
#include <thread>

#include "switchgen/error.h"

namespace switchgen {

namespace {

// Byte trie over the non-EOS vocabulary entries.
struct Trie {
  struct Node {
    std::vector<std::pair<std::uint8_t, int>> children;  // sorted by byte
    TokenId token = -1;
  };

  explicit Trie(const Vocabulary& vocab) {
    nodes.emplace_back();
    for (TokenId id = 0; id < vocab.size(); ++id) {
      if (id == vocab.eos_id()) continue;
      int node = 0;
      for (char c : vocab.bytes(id)) {
        const auto b = static_cast<std::uint8_t>(c);
        auto& kids = nodes[node].children;
        auto it = std::lower_bound(
            kids.begin(), kids.end(), b,
            [](const std::pair<std::uint8_t, int>& e, std::uint8_t v) { return e.first < v; });
        if (it != kids.end() && it->first == b) {
          node = it->second;
        } else {
          const int child = static_cast<int>(nodes.size());
          kids.insert(it, {b, child});
          nodes.emplace_back();
          node = child;
        }
      }
      nodes[node].token = id;
    }
  }

  std::vector<Node> nodes;
};

std::vector<TokenEdge> edges_from(const Dfa& dfa, const Trie& trie, StateId state) {
  std::vector<TokenEdge> out;
  std::vector<std::pair<int, StateId>> stack{{0, state}};
  while (!stack.empty()) {
    const auto [node, at] = stack.back();
    stack.pop_back();
    for (const auto& [byte, child] : trie.nodes[node].children) {
      const StateId next = dfa.step(at, byte);
      if (next == kDead) continue;
      if (trie.nodes[child].token >= 0) out.push_back({trie.nodes[child].token, next});
      stack.emplace_back(child, next);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const TokenEdge& a, const TokenEdge& b) { return a.token < b.token; });
  return out;
}

}  // namespace

TokenIndex build_index(const Dfa& dfa, const Vocabulary& vocab, int threads) {
  TokenIndex index;
  const int n = dfa.num_states();
  index.vocab_size_ = vocab.size();
  index.eos_id_ = vocab.eos_id();
  index.dfa_hash_ = dfa.hash();
  index.accept_.resize(n);
  index.edges_.resize(n);
  for (StateId s = 0; s < n; ++s) index.accept_[s] = dfa.is_accept(s) ? 1 : 0;

  const Trie trie(vocab);
  const int workers = std::clamp(threads, 1, std::max(1, n));
  if (workers == 1) {
    for (StateId s = 0; s < n; ++s) index.edges_[s] = edges_from(dfa, trie, s);
    return index;
  }
  std::vector<std::jthread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (StateId s = w; s < n; s += workers) index.edges_[s] = edges_from(dfa, trie, s);
    });
  }
  pool.clear();
  return index;
}

void TokenIndex::check_state(StateId state) const {
  if (state < 0 || state >= num_states()) {
    throw UnknownState("unknown DFA state " + std::to_string(state));
  }
}

std::span<const TokenEdge> TokenIndex::edges(StateId state) const {
  check_state(state);
  return edges_[state];
}

bool TokenIndex::eos_allowed(StateId state) const {
  check_state(state);
  return accept_[state] != 0;
}

std::vector<TokenId> TokenIndex::allowed_tokens(StateId state) const {
  check_state(state);
  std::vector<TokenId> out;
  out.reserve(edges_[state].size() + 1);
  for (const auto& e : edges_[state]) out.push_back(e.token);
  if (accept_[state]) out.insert(std::lower_bound(out.begin(), out.end(), eos_id_), eos_id_);
  return out;
}

std::vector<char> TokenIndex::mask(StateId state) const {
  check_state(state);
  std::vector<char> m(vocab_size_, 0);
  for (const auto& e : edges_[state]) m[e.token] = 1;
  if (accept_[state]) m[eos_id_] = 1;
  return m;
}

StateId TokenIndex::advance(StateId state, TokenId token) const {
  check_state(state);
  const auto& list = edges_[state];
  auto it = std::lower_bound(list.begin(), list.end(), token,
                             [](const TokenEdge& e, TokenId t) { return e.token < t; });
  if (token == eos_id_ || it == list.end() || it->token != token) {
    throw DisallowedToken("token " + std::to_string(token) + " not allowed at state " +
                          std::to_string(state));
  }
  return it->next;
}

nlohmann::ordered_json TokenIndex::to_json() const {
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  doc["dfa_hash"] = dfa_hash_;
  doc["vocab_size"] = vocab_size_;
  doc["eos_id"] = eos_id_;
  auto states = nlohmann::ordered_json::array();
  for (StateId s = 0; s < num_states(); ++s) {
    nlohmann::ordered_json entry;
    entry["id"] = s;
    entry["accept"] = accept_[s] != 0;
    auto edges = nlohmann::ordered_json::array();
    for (const auto& e : edges_[s]) edges.push_back({e.token, e.next});
    entry["edges"] = std::move(edges);
    states.push_back(std::move(entry));
  }
  doc["states"] = std::move(states);
  return doc;
}

TokenIndex TokenIndex::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("version").get<int>() != 1) throw FormatError("unsupported index version");
    TokenIndex index;
    index.dfa_hash_ = doc.at("dfa_hash").get<std::string>();
    index.vocab_size_ = doc.at("vocab_size").get<int>();
    index.eos_id_ = doc.at("eos_id").get<TokenId>();
    const auto& states = doc.at("states");
    const int n = static_cast<int>(states.size());
    if (n < 1) throw FormatError("index has no states");
    index.edges_.resize(n);
    index.accept_.resize(n);
    for (const auto& entry : states) {
      const int id = entry.at("id").get<int>();
      if (id < 0 || id >= n) throw FormatError("state id out of range");
      index.accept_[id] = entry.at("accept").get<bool>() ? 1 : 0;
      auto& list = index.edges_[id];
      for (const auto& e : entry.at("edges")) {
        const TokenId t = e.at(0).get<TokenId>();
        const StateId next = e.at(1).get<StateId>();
        if (t < 0 || t >= index.vocab_size_ || t == index.eos_id_ || next < 0 || next >= n) {
          throw FormatError("index edge out of range");
        }
        if (!list.empty() && list.back().token >= t) {
          throw FormatError("index edges must be sorted by token id");
        }
        list.push_back({t, next});
      }
    }
    return index;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed index document: ") + e.what());
  }
}

}  // namespace switchgen
