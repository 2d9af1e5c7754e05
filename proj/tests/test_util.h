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

#ifndef SWITCHGEN_TESTS_TEST_UTIL_H_
#define SWITCHGEN_TESTS_TEST_UTIL_H_

// Oracles and generators shared by the unit tests and the acceptance suite.
// Nothing here goes through the trie walk, the subset construction or the
// sampler under test.

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "switchgen/automata.h"
#include "switchgen/token_index.h"

namespace switchgen::testing {

inline std::filesystem::path data_dir() { return SWITCHGEN_DATA_DIR; }

// Random AST over `alphabet` with nesting depth at most `depth`.
inline RegexAst random_ast(std::mt19937_64& rng, const std::string& alphabet, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 8);
  auto letter = [&] {
    return static_cast<std::uint8_t>(alphabet[rng() % alphabet.size()]);
  };
  switch (pick(rng)) {
    case 0:
      return RegexNode::literal(letter());
    case 1: {
      ByteSet set;
      const int n = 1 + static_cast<int>(rng() % alphabet.size());
      for (int i = 0; i < n; ++i) set.set(letter());
      return RegexNode::byte_class(set);
    }
    case 2:
    case 3: {
      std::vector<RegexNode> parts;
      const int n = 2 + static_cast<int>(rng() % 2);
      for (int i = 0; i < n; ++i) parts.push_back(random_ast(rng, alphabet, depth - 1));
      return RegexNode::concat(std::move(parts));
    }
    case 4: {
      std::vector<RegexNode> parts;
      const int n = 2 + static_cast<int>(rng() % 2);
      for (int i = 0; i < n; ++i) parts.push_back(random_ast(rng, alphabet, depth - 1));
      return RegexNode::alternation(std::move(parts));
    }
    case 5:
      return RegexNode::star(random_ast(rng, alphabet, depth - 1));
    case 6:
      return RegexNode::plus(random_ast(rng, alphabet, depth - 1));
    case 7:
      return RegexNode::optional(random_ast(rng, alphabet, depth - 1));
    default: {
      const int lo = static_cast<int>(rng() % 3);
      const int hi = lo + static_cast<int>(rng() % 3);
      return RegexNode::repeat(random_ast(rng, alphabet, depth - 1), lo, hi);
    }
  }
}

// Every string over `alphabet` of length 0..max_len, shortest first.
inline std::vector<std::string> all_strings(const std::string& alphabet, int max_len) {
  std::vector<std::string> out = {""};
  std::size_t begin = 0;
  for (int len = 1; len <= max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t i = begin; i < end; ++i) {
      for (char c : alphabet) out.push_back(out[i] + c);
    }
    begin = end;
  }
  return out;
}

// Byte-by-byte walk through the DFA table.
inline StateId byte_walk(const Dfa& dfa, StateId state, const std::string& bytes) {
  for (unsigned char c : bytes) {
    if (state == kDead) return kDead;
    state = dfa.step(state, c);
  }
  return state;
}

// Random accepting walk: stop at an accept state with probability 1/4 (or
// when no byte leads on), otherwise follow a uniformly chosen live byte.
inline std::string random_accepted(const Dfa& dfa, std::mt19937_64& rng) {
  std::string out;
  StateId s = dfa.start();
  for (;;) {
    std::vector<int> live;
    for (int b = 0; b < 256; ++b) {
      if (dfa.step(s, static_cast<std::uint8_t>(b)) != kDead) live.push_back(b);
    }
    if (dfa.is_accept(s) && (live.empty() || rng() % 4 == 0)) return out;
    if (live.empty()) return out;  // unreachable for trimmed automata
    const int b = live[rng() % live.size()];
    out.push_back(static_cast<char>(b));
    s = dfa.step(s, static_cast<std::uint8_t>(b));
  }
}

// Synthetic vocabulary: `n` distinct byte strings of length 1..6 over
// `alphabet`, then EOS (empty) at id n.
inline Vocabulary synthetic_vocab(std::mt19937_64& rng, const std::string& alphabet, int n) {
  std::vector<std::string> tokens;
  for (char c : alphabet) tokens.emplace_back(1, c);
  while (static_cast<int>(tokens.size()) < n) {
    const int len = 1 + static_cast<int>(rng() % 6);
    std::string t;
    for (int i = 0; i < len; ++i) t.push_back(alphabet[rng() % alphabet.size()]);
    if (std::find(tokens.begin(), tokens.end(), t) == tokens.end()) tokens.push_back(t);
  }
  tokens.resize(n);
  tokens.emplace_back();
  return Vocabulary(std::move(tokens), n);
}

}  // namespace switchgen::testing

#endif  // SWITCHGEN_TESTS_TEST_UTIL_H_
