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

// Position-automaton matcher. Deliberately independent of the Thompson
// construction in automata.cc so the two can check each other.

#include <algorithm>

#include "switchgen/automata.h"

namespace switchgen {

namespace {

struct Summary {
  bool nullable = true;
  std::vector<int> first;
  std::vector<int> last;
};

void append_unique(std::vector<int>& into, const std::vector<int>& from) {
  for (int x : from) {
    if (std::find(into.begin(), into.end(), x) == into.end()) into.push_back(x);
  }
}

}  // namespace

// Builds positions recursively. Each visit of a leaf creates a fresh
// position, so bounded repetition simply visits its operand repeatedly.
class GlushkovBuilder {
 public:
  struct Pos {
    ByteSet bytes;
    std::vector<int> follow;
  };

  Summary visit(const RegexNode& n) {
    using K = RegexNode::Kind;
    switch (n.kind) {
      case K::kLiteral: {
        ByteSet s;
        s.set(n.byte);
        return leaf(s);
      }
      case K::kClass:
        return leaf(n.bytes);
      case K::kGroup:
        return visit(n.children.front());
      case K::kConcat: {
        Summary acc;
        for (const auto& c : n.children) acc = seq(acc, visit(c));
        return acc;
      }
      case K::kAlternation: {
        Summary acc;
        acc.nullable = false;
        for (const auto& c : n.children) {
          Summary b = visit(c);
          acc.nullable = acc.nullable || b.nullable;
          append_unique(acc.first, b.first);
          append_unique(acc.last, b.last);
        }
        return acc;
      }
      case K::kStar: {
        Summary s = loop(visit(n.children.front()));
        s.nullable = true;
        return s;
      }
      case K::kPlus:
        return loop(visit(n.children.front()));
      case K::kOptional: {
        Summary s = visit(n.children.front());
        s.nullable = true;
        return s;
      }
      case K::kRepeat: {
        Summary acc;
        for (int i = 0; i < n.min; ++i) acc = seq(acc, visit(n.children.front()));
        if (n.max == kUnbounded) {
          Summary tail = loop(visit(n.children.front()));
          tail.nullable = true;
          acc = seq(acc, tail);
        } else {
          for (int i = n.min; i < n.max; ++i) {
            Summary opt = visit(n.children.front());
            opt.nullable = true;
            acc = seq(acc, opt);
          }
        }
        return acc;
      }
    }
    return {};
  }

  std::vector<Pos> positions;

 private:
  Summary leaf(const ByteSet& s) {
    positions.push_back({s, {}});
    const int p = static_cast<int>(positions.size()) - 1;
    return {false, {p}, {p}};
  }

  Summary seq(const Summary& a, const Summary& b) {
    for (int p : a.last) append_unique(positions[p].follow, b.first);
    Summary out;
    out.nullable = a.nullable && b.nullable;
    out.first = a.first;
    if (a.nullable) append_unique(out.first, b.first);
    out.last = b.last;
    if (b.nullable) append_unique(out.last, a.last);
    return out;
  }

  Summary loop(Summary s) {
    for (int p : s.last) append_unique(positions[p].follow, s.first);
    return s;
  }
};

NfaMatcher::NfaMatcher(const RegexAst& ast) {
  GlushkovBuilder builder;
  const Summary root = builder.visit(ast);
  positions_.reserve(builder.positions.size());
  for (auto& p : builder.positions) {
    positions_.push_back({p.bytes, std::move(p.follow)});
  }
  first_ = root.first;
  nullable_ = root.nullable;
  is_last_.assign(positions_.size(), 0);
  for (int p : root.last) is_last_[p] = 1;
}

std::vector<int> NfaMatcher::run(std::string_view text, bool* at_start) const {
  *at_start = text.empty();
  std::vector<int> current;
  std::vector<char> seen(positions_.size(), 0);
  bool first_step = true;
  for (char ch : text) {
    const auto b = static_cast<std::uint8_t>(ch);
    const std::vector<int>& candidates_src = first_;
    std::vector<int> next;
    auto consider = [&](int q) {
      if (!seen[q] && positions_[q].bytes.test(b)) {
        seen[q] = 1;
        next.push_back(q);
      }
    };
    if (first_step) {
      for (int q : candidates_src) consider(q);
      first_step = false;
    } else {
      for (int p : current) {
        for (int q : positions_[p].follow) consider(q);
      }
    }
    for (int q : next) seen[q] = 0;
    current = std::move(next);
    if (current.empty()) return current;
  }
  return current;
}

bool NfaMatcher::matches(std::string_view text) const {
  bool at_start = false;
  const auto alive = run(text, &at_start);
  if (at_start) return nullable_;
  return std::any_of(alive.begin(), alive.end(),
                     [&](int p) { return is_last_[p] != 0; });
}

bool NfaMatcher::is_prefix(std::string_view text) const {
  bool at_start = false;
  const auto alive = run(text, &at_start);
  // Every position lies on some accepted word (classes are never empty), so
  // any surviving position certifies a completion exists.
  return at_start || !alive.empty();
}

bool nfa_matches(const RegexAst& ast, std::string_view text) {
  return NfaMatcher(ast).matches(text);
}

bool nfa_is_prefix(const RegexAst& ast, std::string_view text) {
  return NfaMatcher(ast).is_prefix(text);
}

}  // namespace switchgen
