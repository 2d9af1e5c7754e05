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

#ifndef SWITCHGEN_TOKEN_INDEX_H_
#define SWITCHGEN_TOKEN_INDEX_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "switchgen/automata.h"

namespace switchgen {

using TokenId = std::int32_t;

// Token id -> byte sequence. Only the EOS entry may be empty, and no two
// entries share the same bytes.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> tokens, TokenId eos_id);

  int size() const { return static_cast<int>(tokens_.size()); }
  TokenId eos_id() const { return eos_id_; }
  const std::string& bytes(TokenId id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Id of the token whose bytes are exactly `text`, or -1.
  TokenId find(std::string_view text) const;

  // Concatenated bytes of `ids`; EOS contributes nothing.
  std::string decode(std::span<const TokenId> ids) const;

  // Greedy longest-match segmentation. Bytes no token covers are skipped.
  std::vector<TokenId> tokenize(std::string_view text) const;

  nlohmann::ordered_json to_json() const;
  static Vocabulary from_json(const nlohmann::json& doc);

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::vector<std::string> tokens_;
  TokenId eos_id_ = 0;
  std::size_t max_token_length_ = 0;
  std::unordered_map<std::string, TokenId> lookup_;
};

// Throws FormatError on malformed files and Error when the file cannot be
// opened.
Vocabulary load_vocabulary(const std::filesystem::path& path);
void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);

std::string base64_encode(std::string_view bytes);
// Throws FormatError on malformed input.
std::string base64_decode(std::string_view text);

struct TokenEdge {
  TokenId token;
  StateId next;

  friend bool operator==(const TokenEdge&, const TokenEdge&) = default;
};

// Per DFA state, every non-EOS token whose full byte walk survives and the
// state it lands in. EOS is allowed exactly at accept states.
class TokenIndex {
 public:
  TokenIndex() = default;

  int num_states() const { return static_cast<int>(edges_.size()); }
  int vocab_size() const { return vocab_size_; }
  TokenId eos_id() const { return eos_id_; }
  const std::string& dfa_hash() const { return dfa_hash_; }

  // Throws UnknownState for ids outside the DFA (including kDead).
  std::span<const TokenEdge> edges(StateId state) const;
  bool eos_allowed(StateId state) const;
  bool is_accept(StateId state) const { return eos_allowed(state); }

  // Sorted token ids allowed at `state`, EOS included iff eos_allowed.
  std::vector<TokenId> allowed_tokens(StateId state) const;

  // Dense view of allowed_tokens: one flag per vocabulary entry.
  std::vector<char> mask(StateId state) const;

  // Throws DisallowedToken if `token` is EOS or has no edge from `state`.
  StateId advance(StateId state, TokenId token) const;

  nlohmann::ordered_json to_json() const;
  static TokenIndex from_json(const nlohmann::json& doc);

  friend bool operator==(const TokenIndex&, const TokenIndex&) = default;

 private:
  friend TokenIndex build_index(const Dfa&, const Vocabulary&, int);

  void check_state(StateId state) const;

  std::vector<std::vector<TokenEdge>> edges_;
  std::vector<char> accept_;
  int vocab_size_ = 0;
  TokenId eos_id_ = 0;
  std::string dfa_hash_;
};

// Walks every token from every state using a byte trie over the vocabulary.
// `threads` > 1 splits states across workers; the result is identical.
TokenIndex build_index(const Dfa& dfa, const Vocabulary& vocab, int threads = 1);

inline std::vector<TokenId> allowed_tokens(const TokenIndex& index, StateId state) {
  return index.allowed_tokens(state);
}

inline StateId advance(const TokenIndex& index, StateId state, TokenId token) {
  return index.advance(state, token);
}

}  // namespace switchgen

#endif  // SWITCHGEN_TOKEN_INDEX_H_
