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

#include "switchgen/automata.h"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <map>
#include <utility>

#include "switchgen/error.h"

namespace switchgen {

// ---------------------------------------------------------------------------
// AST construction

RegexNode RegexNode::literal(std::uint8_t b) {
  RegexNode n;
  n.kind = Kind::kLiteral;
  n.byte = b;
  return n;
}

RegexNode RegexNode::byte_class(const ByteSet& set) {
  RegexNode n;
  n.kind = Kind::kClass;
  n.bytes = set;
  return n;
}

RegexNode RegexNode::concat(std::vector<RegexNode> parts) {
  RegexNode n;
  n.kind = Kind::kConcat;
  n.children = std::move(parts);
  return n;
}

RegexNode RegexNode::alternation(std::vector<RegexNode> branches) {
  RegexNode n;
  n.kind = Kind::kAlternation;
  n.children = std::move(branches);
  return n;
}

namespace {

RegexNode unary(RegexNode::Kind kind, RegexNode inner) {
  RegexNode n;
  n.kind = kind;
  n.children.push_back(std::move(inner));
  return n;
}

}  // namespace

RegexNode RegexNode::star(RegexNode inner) {
  return unary(Kind::kStar, std::move(inner));
}
RegexNode RegexNode::plus(RegexNode inner) {
  return unary(Kind::kPlus, std::move(inner));
}
RegexNode RegexNode::optional(RegexNode inner) {
  return unary(Kind::kOptional, std::move(inner));
}
RegexNode RegexNode::group(RegexNode inner) {
  return unary(Kind::kGroup, std::move(inner));
}

RegexNode RegexNode::repeat(RegexNode inner, int min, int max) {
  RegexNode n = unary(Kind::kRepeat, std::move(inner));
  n.min = min;
  n.max = max;
  return n;
}

bool operator==(const RegexNode& a, const RegexNode& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case RegexNode::Kind::kLiteral:
      return a.byte == b.byte;
    case RegexNode::Kind::kClass:
      return a.bytes == b.bytes;
    case RegexNode::Kind::kRepeat:
      if (a.min != b.min || a.max != b.max) return false;
      break;
    default:
      break;
  }
  return a.children == b.children;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

ByteSet dot_set() {
  ByteSet s;
  s.set();
  s.reset('\n');
  return s;
}

ByteSet range_set(int lo, int hi) {
  ByteSet s;
  for (int b = lo; b <= hi; ++b) s.set(b);
  return s;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

class Parser {
 public:
  explicit Parser(std::string_view pattern) : p_(pattern) {}

  RegexNode parse() {
    if (p_.empty()) throw SyntaxError("empty pattern", 0);
    RegexNode root = parse_alternation();
    if (pos_ < p_.size()) throw SyntaxError("unbalanced ')'", pos_);
    return root;
  }

 private:
  bool at_end() const { return pos_ >= p_.size(); }
  char peek() const { return p_[pos_]; }

  RegexNode parse_alternation() {
    std::vector<RegexNode> branches;
    for (;;) {
      if (at_end() || peek() == '|' || peek() == ')') {
        throw SyntaxError("empty alternation branch", pos_);
      }
      branches.push_back(parse_concat());
      if (!at_end() && peek() == '|') {
        ++pos_;
        continue;
      }
      break;
    }
    if (branches.size() == 1) return std::move(branches.front());
    return RegexNode::alternation(std::move(branches));
  }

  RegexNode parse_concat() {
    std::vector<RegexNode> items;
    while (!at_end() && peek() != '|' && peek() != ')') {
      RegexNode atom = parse_atom();
      items.push_back(parse_quantifiers(std::move(atom)));
    }
    if (items.size() == 1) return std::move(items.front());
    return RegexNode::concat(std::move(items));
  }

  // Returns true and fills min/max when a quantifier starts at pos_.
  bool try_quantifier(int& min, int& max) {
    const std::size_t start = pos_;
    switch (peek()) {
      case '*':
        ++pos_;
        min = 0;
        max = kUnbounded;
        return true;
      case '+':
        ++pos_;
        min = 1;
        max = kUnbounded;
        return true;
      case '?':
        ++pos_;
        min = 0;
        max = 1;
        return true;
      case '{':
        break;
      default:
        return false;
    }
    ++pos_;
    auto read_int = [&](int& out) {
      if (at_end() || !is_digit(peek())) return false;
      long v = 0;
      while (!at_end() && is_digit(peek())) {
        v = v * 10 + (peek() - '0');
        if (v > 100000) throw SyntaxError("bad repetition bounds", start);
        ++pos_;
      }
      out = static_cast<int>(v);
      return true;
    };
    if (!read_int(min)) throw SyntaxError("bad repetition bounds", start);
    max = min;
    if (!at_end() && peek() == ',') {
      ++pos_;
      if (!read_int(max)) max = kUnbounded;
    }
    if (at_end() || peek() != '}') {
      throw SyntaxError("bad repetition bounds", start);
    }
    ++pos_;
    if (min > kMaxRepeat || (max != kUnbounded && (max < min || max > kMaxRepeat))) {
      throw SyntaxError("bad repetition bounds", start);
    }
    return true;
  }

  RegexNode parse_quantifiers(RegexNode atom) {
    if (at_end()) return atom;
    int min = 0;
    int max = 0;
    const char op = peek();
    if (!try_quantifier(min, max)) return atom;
    if (!at_end() && (peek() == '*' || peek() == '+' || peek() == '?' ||
                      peek() == '{')) {
      throw SyntaxError("unsupported stacked or lazy quantifier", pos_);
    }
    switch (op) {
      case '*':
        return RegexNode::star(std::move(atom));
      case '+':
        return RegexNode::plus(std::move(atom));
      case '?':
        return RegexNode::optional(std::move(atom));
      default:
        return RegexNode::repeat(std::move(atom), min, max);
    }
  }

  RegexNode parse_atom() {
    const std::size_t start = pos_;
    const char c = peek();
    switch (c) {
      case '(': {
        ++pos_;
        if (!at_end() && peek() == '?') {
          if (pos_ + 1 < p_.size() && p_[pos_ + 1] == ':') {
            pos_ += 2;
          } else {
            throw SyntaxError("unsupported lookaround or group flag", start);
          }
        }
        if (at_end()) throw SyntaxError("unbalanced '('", start);
        RegexNode inner = parse_alternation();
        if (at_end() || peek() != ')') throw SyntaxError("unbalanced '('", start);
        ++pos_;
        return RegexNode::group(std::move(inner));
      }
      case '*':
      case '+':
      case '?':
      case '{':
        throw SyntaxError("quantifier without operand", start);
      case '[':
        return RegexNode::byte_class(parse_class());
      case '.':
        ++pos_;
        return RegexNode::byte_class(dot_set());
      case '^':
      case '$':
        throw SyntaxError("unsupported anchor", start);
      case '\\': {
        ByteSet set;
        const int b = parse_escape(set);
        if (b >= 0) return RegexNode::literal(static_cast<std::uint8_t>(b));
        return RegexNode::byte_class(set);
      }
      default:
        ++pos_;
        return RegexNode::literal(static_cast<std::uint8_t>(c));
    }
  }

  // Consumes an escape sequence starting at the backslash. Returns the
  // literal byte, or -1 after filling `set` for a class shorthand.
  int parse_escape(ByteSet& set) {
    const std::size_t start = pos_;
    ++pos_;
    if (at_end()) throw SyntaxError("dangling backslash", start);
    const char c = p_[pos_++];
    switch (c) {
      case 'n':
        return '\n';
      case 't':
        return '\t';
      case 'r':
        return '\r';
      case 'f':
        return '\f';
      case 'v':
        return '\v';
      case 'x': {
        if (pos_ + 2 > p_.size()) throw SyntaxError("bad \\x escape", start);
        const int hi = hex_value(p_[pos_]);
        const int lo = hex_value(p_[pos_ + 1]);
        if (hi < 0 || lo < 0) throw SyntaxError("bad \\x escape", start);
        pos_ += 2;
        return hi * 16 + lo;
      }
      case 'd':
      case 'D':
        set = range_set('0', '9');
        if (c == 'D') set.flip();
        return -1;
      case 'w':
      case 'W':
        set = range_set('0', '9') | range_set('a', 'z') | range_set('A', 'Z');
        set.set('_');
        if (c == 'W') set.flip();
        return -1;
      case 's':
      case 'S':
        for (char ws : {' ', '\t', '\n', '\r', '\f', '\v'}) {
          set.set(static_cast<unsigned char>(ws));
        }
        if (c == 'S') set.flip();
        return -1;
      default:
        break;
    }
    if (c >= '1' && c <= '9') throw SyntaxError("unsupported backreference", start);
    if (c == 'k') throw SyntaxError("unsupported backreference", start);
    const auto uc = static_cast<unsigned char>(c);
    if ((uc >= '!' && uc <= '/') || (uc >= ':' && uc <= '@') ||
        (uc >= '[' && uc <= '`') || (uc >= '{' && uc <= '~') || uc == ' ') {
      return uc;
    }
    throw SyntaxError("unsupported escape", start);
  }

  ByteSet parse_class() {
    const std::size_t start = pos_;
    ++pos_;
    bool negate = false;
    if (!at_end() && peek() == '^') {
      negate = true;
      ++pos_;
    }
    ByteSet set;
    bool first = true;
    for (;;) {
      if (at_end()) throw SyntaxError("unterminated class", start);
      if (peek() == ']' && !first) {
        ++pos_;
        break;
      }
      first = false;
      int lo = -1;
      if (peek() == '\\') {
        ByteSet shorthand;
        lo = parse_escape(shorthand);
        if (lo < 0) {
          set |= shorthand;
          continue;
        }
      } else {
        lo = static_cast<unsigned char>(p_[pos_++]);
      }
      if (pos_ + 1 < p_.size() && peek() == '-' && p_[pos_ + 1] != ']') {
        const std::size_t range_at = pos_;
        ++pos_;
        int hi = -1;
        if (peek() == '\\') {
          ByteSet shorthand;
          hi = parse_escape(shorthand);
          if (hi < 0) throw SyntaxError("bad class range", range_at);
        } else {
          hi = static_cast<unsigned char>(p_[pos_++]);
        }
        if (hi < lo) throw SyntaxError("bad class range", range_at);
        set |= range_set(lo, hi);
      } else {
        set.set(lo);
      }
    }
    if (negate) set.flip();
    if (set.none()) throw SyntaxError("empty class", start);
    return set;
  }

  std::string_view p_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Printer

std::string hex_escape(std::uint8_t b) {
  char buf[5];
  std::snprintf(buf, sizeof(buf), "\\x%02x", b);
  return buf;
}

std::string escape_byte(std::uint8_t b) {
  switch (b) {
    case '\\': case '.': case '[': case ']': case '(': case ')': case '{':
    case '}': case '|': case '*': case '+': case '?': case '^': case '$':
      return std::string{'\\', static_cast<char>(b)};
    case '\n':
      return "\\n";
    case '\t':
      return "\\t";
    case '\r':
      return "\\r";
    default:
      break;
  }
  if (b < 0x20 || b >= 0x7f) return hex_escape(b);
  return std::string(1, static_cast<char>(b));
}

std::string escape_class_byte(std::uint8_t b) {
  switch (b) {
    case '\\': case ']': case '[': case '^': case '-':
      return std::string{'\\', static_cast<char>(b)};
    default:
      break;
  }
  if (b < 0x20 || b >= 0x7f) return hex_escape(b);
  return std::string(1, static_cast<char>(b));
}

std::string print_class(const ByteSet& set) {
  if (set == dot_set()) return ".";
  const bool negate = set.count() > 128;
  const ByteSet body = negate ? ~set : set;
  std::string out = negate ? "[^" : "[";
  int b = 0;
  while (b < 256) {
    if (!body.test(b)) {
      ++b;
      continue;
    }
    int e = b;
    while (e + 1 < 256 && body.test(e + 1)) ++e;
    out += escape_class_byte(static_cast<std::uint8_t>(b));
    if (e > b + 1) out += '-';
    if (e > b) out += escape_class_byte(static_cast<std::uint8_t>(e));
    b = e + 1;
  }
  out += ']';
  return out;
}

void print(const RegexNode& n, std::string& out);

void print_wrapped(const RegexNode& n, std::string& out, bool wrap) {
  if (wrap) out += '(';
  print(n, out);
  if (wrap) out += ')';
}

bool is_atomic(const RegexNode& n) {
  using K = RegexNode::Kind;
  return n.kind == K::kLiteral || n.kind == K::kClass || n.kind == K::kGroup;
}

void print(const RegexNode& n, std::string& out) {
  using K = RegexNode::Kind;
  switch (n.kind) {
    case K::kLiteral:
      out += escape_byte(n.byte);
      return;
    case K::kClass:
      out += print_class(n.bytes);
      return;
    case K::kConcat:
      for (const auto& c : n.children) {
        print_wrapped(c, out, c.kind == K::kAlternation || c.kind == K::kConcat);
      }
      return;
    case K::kAlternation:
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) out += '|';
        print_wrapped(n.children[i], out,
                      n.children[i].kind == K::kAlternation);
      }
      return;
    case K::kGroup:
      out += '(';
      print(n.children.front(), out);
      out += ')';
      return;
    case K::kStar:
    case K::kPlus:
    case K::kOptional:
    case K::kRepeat:
      break;
  }
  const RegexNode& inner = n.children.front();
  print_wrapped(inner, out, !is_atomic(inner));
  switch (n.kind) {
    case K::kStar:
      out += '*';
      break;
    case K::kPlus:
      out += '+';
      break;
    case K::kOptional:
      out += '?';
      break;
    default:
      out += '{' + std::to_string(n.min);
      if (n.max == kUnbounded) {
        out += ',';
      } else if (n.max != n.min) {
        out += ',' + std::to_string(n.max);
      }
      out += '}';
      break;
  }
}

}  // namespace

RegexAst parse_regex(std::string_view pattern) { return Parser(pattern).parse(); }

std::string to_pattern(const RegexAst& ast) {
  std::string out;
  print(ast, out);
  return out;
}

std::string regex_escape(std::string_view text) {
  std::string out;
  for (char c : text) out += escape_byte(static_cast<std::uint8_t>(c));
  return out;
}

// ---------------------------------------------------------------------------
// Thompson construction

namespace {

struct ThompsonState {
  std::vector<int> eps;
  ByteSet on;
  int to = -1;
};

class ThompsonBuilder {
 public:
  struct Frag {
    int start;
    int end;
  };

  Frag build(const RegexNode& n) {
    using K = RegexNode::Kind;
    switch (n.kind) {
      case K::kLiteral: {
        ByteSet s;
        s.set(n.byte);
        return edge(s);
      }
      case K::kClass:
        return edge(n.bytes);
      case K::kGroup:
        return build(n.children.front());
      case K::kConcat: {
        Frag f = build(n.children.front());
        for (std::size_t i = 1; i < n.children.size(); ++i) {
          f = chain(f, build(n.children[i]));
        }
        return f;
      }
      case K::kAlternation: {
        const int s = add();
        const int e = add();
        for (const auto& c : n.children) {
          const Frag f = build(c);
          states_[s].eps.push_back(f.start);
          states_[f.end].eps.push_back(e);
        }
        return {s, e};
      }
      case K::kStar:
        return star(build(n.children.front()));
      case K::kPlus: {
        const Frag f = build(n.children.front());
        const int e = add();
        states_[f.end].eps.push_back(f.start);
        states_[f.end].eps.push_back(e);
        return {f.start, e};
      }
      case K::kOptional:
        return optional(build(n.children.front()));
      case K::kRepeat: {
        const RegexNode& inner = n.children.front();
        Frag f = epsilon();
        for (int i = 0; i < n.min; ++i) f = chain(f, build(inner));
        if (n.max == kUnbounded) {
          f = chain(f, star(build(inner)));
        } else {
          for (int i = n.min; i < n.max; ++i) f = chain(f, optional(build(inner)));
        }
        return f;
      }
    }
    return epsilon();
  }

  std::vector<ThompsonState> take() { return std::move(states_); }

 private:
  int add() {
    states_.emplace_back();
    return static_cast<int>(states_.size()) - 1;
  }

  Frag edge(const ByteSet& on) {
    const int s = add();
    const int e = add();
    states_[s].on = on;
    states_[s].to = e;
    return {s, e};
  }

  Frag epsilon() {
    const int s = add();
    const int e = add();
    states_[s].eps.push_back(e);
    return {s, e};
  }

  Frag chain(Frag a, Frag b) {
    states_[a.end].eps.push_back(b.start);
    return {a.start, b.end};
  }

  Frag star(Frag f) {
    const int s = add();
    const int e = add();
    states_[s].eps.push_back(f.start);
    states_[s].eps.push_back(e);
    states_[f.end].eps.push_back(f.start);
    states_[f.end].eps.push_back(e);
    return {s, e};
  }

  Frag optional(Frag f) {
    const int s = add();
    const int e = add();
    states_[s].eps.push_back(f.start);
    states_[s].eps.push_back(e);
    states_[f.end].eps.push_back(e);
    return {s, e};
  }

  std::vector<ThompsonState> states_;
};

std::vector<int> closure(const std::vector<ThompsonState>& nfa,
                         std::vector<int> seed, std::vector<char>& mark) {
  std::vector<int> out;
  std::vector<int> stack = std::move(seed);
  while (!stack.empty()) {
    const int s = stack.back();
    stack.pop_back();
    if (mark[s]) continue;
    mark[s] = 1;
    out.push_back(s);
    for (int t : nfa[s].eps) {
      if (!mark[t]) stack.push_back(t);
    }
  }
  for (int s : out) mark[s] = 0;
  std::sort(out.begin(), out.end());
  return out;
}

// Raw DFA produced by subset construction or minimization, before
// canonical renumbering. Transitions use kDead for the sink.
struct RawDfa {
  std::vector<StateId> table;
  std::vector<char> accept;
  StateId start = 0;

  int size() const { return static_cast<int>(accept.size()); }
};

RawDfa subset_construction(const std::vector<ThompsonState>& nfa, int start,
                           int accept_state, int max_states) {
  // Partition the byte alphabet into classes that no NFA edge separates.
  std::vector<ByteSet> edge_sets;
  for (const auto& s : nfa) {
    if (s.to >= 0 &&
        std::find(edge_sets.begin(), edge_sets.end(), s.on) == edge_sets.end()) {
      edge_sets.push_back(s.on);
    }
  }
  std::map<std::vector<bool>, int> signature_to_class;
  std::vector<int> byte_class(256);
  std::vector<int> representative;
  for (int b = 0; b < 256; ++b) {
    std::vector<bool> sig(edge_sets.size());
    for (std::size_t i = 0; i < edge_sets.size(); ++i) sig[i] = edge_sets[i].test(b);
    auto [it, inserted] =
        signature_to_class.emplace(std::move(sig), static_cast<int>(representative.size()));
    if (inserted) representative.push_back(b);
    byte_class[b] = it->second;
  }

  std::vector<char> mark(nfa.size(), 0);
  std::map<std::vector<int>, StateId> ids;
  std::vector<std::vector<int>> sets;
  RawDfa dfa;

  auto intern = [&](std::vector<int> set) -> StateId {
    auto it = ids.find(set);
    if (it != ids.end()) return it->second;
    if (static_cast<int>(sets.size()) >= max_states) {
      throw LimitExceeded("subset construction exceeded " +
                          std::to_string(max_states) + " states");
    }
    const auto id = static_cast<StateId>(sets.size());
    ids.emplace(set, id);
    dfa.accept.push_back(
        std::binary_search(set.begin(), set.end(), accept_state) ? 1 : 0);
    sets.push_back(std::move(set));
    dfa.table.resize(sets.size() * 256, kDead);
    return id;
  };

  dfa.start = intern(closure(nfa, {start}, mark));
  for (std::size_t cur = 0; cur < sets.size(); ++cur) {
    std::vector<StateId> per_class(representative.size(), kDead);
    for (std::size_t c = 0; c < representative.size(); ++c) {
      const int rep = representative[c];
      std::vector<int> moved;
      for (int s : sets[cur]) {
        if (nfa[s].to >= 0 && nfa[s].on.test(rep)) moved.push_back(nfa[s].to);
      }
      if (moved.empty()) continue;
      per_class[c] = intern(closure(nfa, std::move(moved), mark));
    }
    for (int b = 0; b < 256; ++b) {
      dfa.table[cur * 256 + b] = per_class[byte_class[b]];
    }
  }
  return dfa;
}

// Sends every transition into a state that cannot reach an accept state
// to kDead.
RawDfa trim(RawDfa dfa) {
  const int n = dfa.size();
  std::vector<std::vector<int>> reverse(n);
  for (int s = 0; s < n; ++s) {
    for (int b = 0; b < 256; ++b) {
      const StateId t = dfa.table[s * 256 + b];
      if (t != kDead) reverse[t].push_back(s);
    }
  }
  std::vector<char> live(n, 0);
  std::vector<int> stack;
  for (int s = 0; s < n; ++s) {
    if (dfa.accept[s]) {
      live[s] = 1;
      stack.push_back(s);
    }
  }
  while (!stack.empty()) {
    const int s = stack.back();
    stack.pop_back();
    for (int p : reverse[s]) {
      if (!live[p]) {
        live[p] = 1;
        stack.push_back(p);
      }
    }
  }
  if (!live[dfa.start]) {
    RawDfa empty;
    empty.table.assign(256, kDead);
    empty.accept = {0};
    return empty;
  }
  for (auto& t : dfa.table) {
    if (t != kDead && !live[t]) t = kDead;
  }
  return dfa;
}

// Hopcroft partition refinement over the completed automaton (trimmed
// states plus one explicit sink).
RawDfa minimize(const RawDfa& dfa) {
  const int n = dfa.size();
  const int sink = n;
  const int total = n + 1;
  auto target = [&](int s, int b) -> int {
    if (s == sink) return sink;
    const StateId t = dfa.table[s * 256 + b];
    return t == kDead ? sink : t;
  };

  // Bytes with identical columns are interchangeable symbols.
  std::map<std::vector<int>, int> column_to_symbol;
  std::vector<int> symbol_byte;
  for (int b = 0; b < 256; ++b) {
    std::vector<int> column(total);
    for (int s = 0; s < total; ++s) column[s] = target(s, b);
    if (column_to_symbol.emplace(std::move(column), static_cast<int>(symbol_byte.size()))
            .second) {
      symbol_byte.push_back(b);
    }
  }
  const int symbols = static_cast<int>(symbol_byte.size());

  // Inverse transitions in CSR form: for symbol c, sources of target t are
  // inv_src[c][inv_off[c][t] .. inv_off[c][t+1]).
  std::vector<std::vector<int>> inv_off(symbols, std::vector<int>(total + 1, 0));
  std::vector<std::vector<int>> inv_src(symbols, std::vector<int>(total));
  for (int c = 0; c < symbols; ++c) {
    auto& off = inv_off[c];
    for (int s = 0; s < total; ++s) ++off[target(s, symbol_byte[c]) + 1];
    for (int t = 0; t < total; ++t) off[t + 1] += off[t];
    std::vector<int> fill(off.begin(), off.end() - 1);
    for (int s = 0; s < total; ++s) {
      inv_src[c][fill[target(s, symbol_byte[c])]++] = s;
    }
  }

  std::vector<std::vector<int>> blocks;
  std::vector<int> block_of(total, -1);
  {
    std::vector<int> accepting;
    std::vector<int> rejecting;
    for (int s = 0; s < total; ++s) {
      (s != sink && dfa.accept[s] ? accepting : rejecting).push_back(s);
    }
    for (auto* part : {&accepting, &rejecting}) {
      if (part->empty()) continue;
      for (int s : *part) block_of[s] = static_cast<int>(blocks.size());
      blocks.push_back(std::move(*part));
    }
  }

  std::deque<int> work;
  std::vector<char> in_work(blocks.size(), 0);
  auto push_work = [&](int b) {
    if (static_cast<int>(in_work.size()) <= b) in_work.resize(b + 1, 0);
    if (!in_work[b]) {
      in_work[b] = 1;
      work.push_back(b);
    }
  };
  if (blocks.size() == 2) {
    push_work(blocks[0].size() <= blocks[1].size() ? 0 : 1);
  }

  std::vector<char> marked(total, 0);
  std::vector<int> marked_count;
  while (!work.empty()) {
    const int splitter_id = work.front();
    work.pop_front();
    in_work[splitter_id] = 0;
    const std::vector<int> splitter = blocks[splitter_id];
    for (int c = 0; c < symbols; ++c) {
      std::vector<int> touched_states;
      for (int t : splitter) {
        for (int i = inv_off[c][t]; i < inv_off[c][t + 1]; ++i) {
          const int s = inv_src[c][i];
          if (!marked[s]) {
            marked[s] = 1;
            touched_states.push_back(s);
          }
        }
      }
      marked_count.assign(blocks.size(), 0);
      std::vector<int> touched_blocks;
      for (int s : touched_states) {
        if (marked_count[block_of[s]]++ == 0) touched_blocks.push_back(block_of[s]);
      }
      for (int y : touched_blocks) {
        if (marked_count[y] == static_cast<int>(blocks[y].size())) continue;
        std::vector<int> inside;
        std::vector<int> outside;
        for (int s : blocks[y]) (marked[s] ? inside : outside).push_back(s);
        const int z = static_cast<int>(blocks.size());
        for (int s : outside) block_of[s] = z;
        blocks[y] = std::move(inside);
        blocks.push_back(std::move(outside));
        if (static_cast<int>(in_work.size()) > y && in_work[y]) {
          push_work(z);
        } else {
          push_work(blocks[y].size() <= blocks[z].size() ? y : z);
        }
      }
      for (int s : touched_states) marked[s] = 0;
    }
  }

  const int sink_block = block_of[sink];
  std::vector<StateId> new_id(blocks.size(), kDead);
  int next = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (static_cast<int>(b) != sink_block) new_id[b] = next++;
  }
  RawDfa out;
  out.table.assign(static_cast<std::size_t>(next) * 256, kDead);
  out.accept.assign(next, 0);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (static_cast<int>(b) == sink_block) continue;
    const int rep = blocks[b].front();
    const StateId id = new_id[b];
    out.accept[id] = dfa.accept[rep];
    for (int byte = 0; byte < 256; ++byte) {
      out.table[id * 256 + byte] = new_id[block_of[target(rep, byte)]];
    }
  }
  out.start = new_id[block_of[dfa.start]];
  return out;
}

// Breadth-first renumbering from the start state, visiting bytes in order.
// Drops unreachable states.
Dfa canonicalize(const RawDfa& dfa) {
  std::vector<StateId> new_id(dfa.size(), kDead);
  std::vector<int> order;
  new_id[dfa.start] = 0;
  order.push_back(dfa.start);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int s = order[i];
    for (int b = 0; b < 256; ++b) {
      const StateId t = dfa.table[s * 256 + b];
      if (t != kDead && new_id[t] == kDead) {
        new_id[t] = static_cast<StateId>(order.size());
        order.push_back(t);
      }
    }
  }
  const int n = static_cast<int>(order.size());
  std::vector<StateId> table(static_cast<std::size_t>(n) * 256, kDead);
  std::vector<char> accept(n, 0);
  for (int i = 0; i < n; ++i) {
    const int s = order[i];
    accept[i] = dfa.accept[s];
    for (int b = 0; b < 256; ++b) {
      const StateId t = dfa.table[s * 256 + b];
      table[i * 256 + b] = t == kDead ? kDead : new_id[t];
    }
  }
  return Dfa(n, std::move(table), std::move(accept));
}

}  // namespace

Dfa compile(const RegexAst& ast, const CompileOptions& options) {
  ThompsonBuilder builder;
  const auto frag = builder.build(ast);
  const auto nfa = builder.take();
  RawDfa raw = trim(subset_construction(nfa, frag.start, frag.end, options.max_states));
  if (options.minimize) raw = minimize(raw);
  return canonicalize(raw);
}

// ---------------------------------------------------------------------------
// Dfa

Dfa::Dfa(int num_states, std::vector<StateId> table, std::vector<char> accept)
    : table_(std::move(table)), accept_(std::move(accept)) {
  if (num_states < 1 || static_cast<int>(accept_.size()) != num_states ||
      table_.size() != static_cast<std::size_t>(num_states) * 256) {
    throw InvalidArgument("inconsistent DFA dimensions");
  }
}

StateId Dfa::walk(StateId from, std::string_view input) const {
  StateId s = from;
  for (char c : input) {
    s = step(s, static_cast<std::uint8_t>(c));
    if (s == kDead) return kDead;
  }
  return s;
}

nlohmann::ordered_json Dfa::to_json() const {
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  doc["num_states"] = num_states();
  doc["start"] = start();
  auto accepts = nlohmann::ordered_json::array();
  for (int s = 0; s < num_states(); ++s) {
    if (accept_[s]) accepts.push_back(s);
  }
  doc["accepts"] = std::move(accepts);
  auto transitions = nlohmann::ordered_json::array();
  for (int s = 0; s < num_states(); ++s) {
    for (int b = 0; b < 256; ++b) {
      const StateId t = table_[s * 256 + b];
      if (t != kDead) transitions.push_back({s, b, t});
    }
  }
  doc["transitions"] = std::move(transitions);
  return doc;
}

Dfa Dfa::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("version").get<int>() != 1) throw FormatError("unsupported DFA version");
    const int n = doc.at("num_states").get<int>();
    const int start = doc.at("start").get<int>();
    if (n < 1 || start < 0 || start >= n) throw FormatError("bad DFA header");
    RawDfa raw;
    raw.start = start;
    raw.accept.assign(n, 0);
    raw.table.assign(static_cast<std::size_t>(n) * 256, kDead);
    for (const auto& a : doc.at("accepts")) {
      const int s = a.get<int>();
      if (s < 0 || s >= n) throw FormatError("accept state out of range");
      raw.accept[s] = 1;
    }
    for (const auto& tr : doc.at("transitions")) {
      if (!tr.is_array() || tr.size() != 3) throw FormatError("bad transition entry");
      const int s = tr[0].get<int>();
      const int b = tr[1].get<int>();
      const int t = tr[2].get<int>();
      if (s < 0 || s >= n || b < 0 || b > 255 || t < 0 || t >= n) {
        throw FormatError("transition out of range");
      }
      auto& slot = raw.table[s * 256 + b];
      if (slot != kDead) throw FormatError("duplicate transition");
      slot = t;
    }
    Dfa dfa = canonicalize(raw);
    if (dfa.num_states() != n) throw FormatError("DFA has unreachable states");
    return dfa;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed DFA document: ") + e.what());
  }
}

std::string Dfa::hash() const {
  const std::string text = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace switchgen
