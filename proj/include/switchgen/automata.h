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

#ifndef SWITCHGEN_AUTOMATA_H_
#define SWITCHGEN_AUTOMATA_H_

// Regular expressions over bytes and their compiled deterministic automata.
//
// Supported syntax: literals, escapes (\. \{ \} \" \\ \n \t \r \xHH and any
// other escaped punctuation), classes [..] with ranges and negation, `.`
// (any byte except '\n'), `|`, `*`, `+`, `?`, `{m}`, `{m,n}`, `{m,}` and
// groups `( )` / `(?: )`. Matching is always whole-string.

#include <bitset>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace switchgen {

using StateId = std::int32_t;
using ByteSet = std::bitset<256>;

// Reserved sink id. Never a member of Dfa's state set.
inline constexpr StateId kDead = -1;

// Largest finite upper bound accepted in `{m,n}`.
inline constexpr int kMaxRepeat = 64;
// `{m,}` is stored with max == kUnbounded.
inline constexpr int kUnbounded = -1;

struct RegexNode {
  enum class Kind {
    kLiteral,
    kClass,
    kConcat,
    kAlternation,
    kStar,
    kPlus,
    kOptional,
    kRepeat,
    kGroup,
  };

  Kind kind = Kind::kLiteral;
  std::uint8_t byte = 0;  // kLiteral
  ByteSet bytes;          // kClass
  int min = 0;            // kRepeat
  int max = 0;            // kRepeat, or kUnbounded
  std::vector<RegexNode> children;

  static RegexNode literal(std::uint8_t b);
  static RegexNode byte_class(const ByteSet& set);
  static RegexNode concat(std::vector<RegexNode> parts);
  static RegexNode alternation(std::vector<RegexNode> branches);
  static RegexNode star(RegexNode inner);
  static RegexNode plus(RegexNode inner);
  static RegexNode optional(RegexNode inner);
  static RegexNode repeat(RegexNode inner, int min, int max);
  static RegexNode group(RegexNode inner);

  friend bool operator==(const RegexNode& a, const RegexNode& b);
};

using RegexAst = RegexNode;

// Throws SyntaxError carrying the byte offset of the offending input.
RegexAst parse_regex(std::string_view pattern);

// Prints an AST back to pattern syntax. For parsed ASTs,
// parse_regex(to_pattern(ast)) == ast. Operands that need bracketing and
// carry no kGroup node are wrapped in parentheses.
std::string to_pattern(const RegexAst& ast);

// Escapes every regex metacharacter (and non-printable byte) in `text` so
// the result matches exactly `text`.
std::string regex_escape(std::string_view text);

class Dfa {
 public:
  Dfa() = default;
  Dfa(int num_states, std::vector<StateId> table, std::vector<char> accept);

  int num_states() const { return static_cast<int>(accept_.size()); }
  StateId start() const { return 0; }
  bool is_accept(StateId s) const {
    return s >= 0 && s < num_states() && accept_[s] != 0;
  }
  bool is_live(StateId s) const { return s >= 0 && s < num_states(); }

  StateId step(StateId s, std::uint8_t input) const {
    if (!is_live(s)) return kDead;
    return table_[static_cast<std::size_t>(s) * 256 + input];
  }

  std::span<const StateId> row(StateId s) const {
    return {table_.data() + static_cast<std::size_t>(s) * 256, 256};
  }

  // Walks `input` from `from`; returns kDead as soon as the walk dies.
  StateId walk(StateId from, std::string_view input) const;
  bool accepts(std::string_view input) const {
    return is_accept(walk(start(), input));
  }

  // {version, num_states, start, accepts, transitions} with transitions
  // sorted by (state, byte). DEAD edges are omitted.
  nlohmann::ordered_json to_json() const;
  static Dfa from_json(const nlohmann::json& doc);

  // FNV-1a 64 over the canonical JSON serialization, as 16 hex digits.
  std::string hash() const;

  friend bool operator==(const Dfa&, const Dfa&) = default;

 private:
  std::vector<StateId> table_;  // num_states * 256
  std::vector<char> accept_;
};

struct CompileOptions {
  bool minimize = true;
  int max_states = 100000;
};

// Thompson NFA, subset construction, trimming of states that cannot reach
// an accept state, optional Hopcroft minimization, and breadth-first
// renumbering so that equal languages yield byte-identical automata.
// Throws LimitExceeded past `max_states` subset states.
Dfa compile(const RegexAst& ast, const CompileOptions& options = {});

inline StateId dfa_step(const Dfa& dfa, StateId state, std::uint8_t input) {
  return dfa.step(state, input);
}

// Independent matcher used as an oracle against compile(). Builds a
// position (Glushkov) automaton straight from the AST and simulates it
// breadth-first on sets of positions; shares no code with compile().
bool nfa_matches(const RegexAst& ast, std::string_view text);

// True iff `text` is a prefix of some string in the language of `ast`.
bool nfa_is_prefix(const RegexAst& ast, std::string_view text);

class NfaMatcher {
 public:
  explicit NfaMatcher(const RegexAst& ast);

  bool matches(std::string_view text) const;
  bool is_prefix(std::string_view text) const;

 private:
  struct Position {
    ByteSet bytes;
    std::vector<int> follow;
  };

  // Positions alive after consuming `text`; empty means the run died.
  std::vector<int> run(std::string_view text, bool* at_start) const;

  std::vector<Position> positions_;
  std::vector<int> first_;
  std::vector<char> is_last_;
  bool nullable_ = false;
};

}  // namespace switchgen

#endif  // SWITCHGEN_AUTOMATA_H_
