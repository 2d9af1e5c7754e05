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

#include "switchgen/schema.h"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>

#include "switchgen/automata.h"
#include "switchgen/error.h"

namespace switchgen {

namespace {

constexpr int kMaxStringLength = 4096;

constexpr std::string_view kIntegerBody = "(0|-?[1-9][0-9]{0,11})";
constexpr std::string_view kDecimalBody =
    "(-?(0|[1-9][0-9]{0,11})\\.[0-9]{1,6}|0|-?[1-9][0-9]{0,11})";

// One JSON string character: printable ASCII other than quote and
// backslash, a short escape, or a well-formed UTF-8 multi-byte sequence.
constexpr std::string_view kStringUnit =
    "[ !#-\\[\\]-\\x7f]"
    "|\\\\[\"\\\\nt]"
    "|[\\xc2-\\xdf][\\x80-\\xbf]"
    "|\\xe0[\\xa0-\\xbf][\\x80-\\xbf]"
    "|[\\xe1-\\xec\\xee\\xef][\\x80-\\xbf]{2}"
    "|\\xed[\\x80-\\x9f][\\x80-\\xbf]"
    "|\\xf0[\\x90-\\xbf][\\x80-\\xbf]{2}"
    "|[\\xf1-\\xf3][\\x80-\\xbf]{3}"
    "|\\xf4[\\x80-\\x8f][\\x80-\\xbf]{2}";

std::string quote_if(bool quoted, std::string_view body) {
  if (!quoted) return std::string(body);
  return "\"" + std::string(body) + "\"";
}

std::string value_regex(const AnswerSchema& s) {
  using K = AnswerSchema::Kind;
  switch (s.kind) {
    case K::kEnum: {
      std::string alts;
      for (std::size_t i = 0; i < s.choices.size(); ++i) {
        if (i) alts += '|';
        const std::string literal = nlohmann::json(s.choices[i]).dump();
        alts += regex_escape(std::string_view(literal).substr(1, literal.size() - 2));
      }
      return "\"(" + alts + ")\"";
    }
    case K::kInteger:
      return quote_if(s.quoted, kIntegerBody);
    case K::kDecimal:
      return quote_if(s.quoted, kDecimalBody);
    case K::kString: {
      std::string body;
      int left = s.max_len;
      while (left > 0) {
        const int chunk = std::min(left, kMaxRepeat);
        body += "(" + std::string(kStringUnit) + "){0," + std::to_string(chunk) + "}";
        left -= chunk;
      }
      return "\"" + body + "\"";
    }
    case K::kPattern:
      return "\"(" + s.pattern + ")\"";
  }
  return {};
}

bool json_safe_pattern_byte(int b) {
  return b >= 0x20 && b <= 0x7e && b != '"' && b != '\\';
}

std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (char c : s) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

bool full_strtod(const std::string& s) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size() && std::isfinite(v);
}

std::optional<std::string> render_value(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  return v.dump();
}

// End offset (exclusive) of the brace-balanced object opening at `open`,
// honouring JSON string quoting; npos when it never closes.
std::size_t balanced_end(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace

const char* kind_name(AnswerSchema::Kind kind) {
  switch (kind) {
    case AnswerSchema::Kind::kEnum:
      return "enum";
    case AnswerSchema::Kind::kInteger:
      return "integer";
    case AnswerSchema::Kind::kDecimal:
      return "decimal";
    case AnswerSchema::Kind::kString:
      return "string";
    case AnswerSchema::Kind::kPattern:
      return "pattern";
  }
  return "?";
}

AnswerSchema AnswerSchema::enumeration(std::vector<std::string> choices, int whitespace) {
  AnswerSchema s;
  s.kind = Kind::kEnum;
  s.choices = std::move(choices);
  s.whitespace = whitespace;
  return s;
}

AnswerSchema AnswerSchema::integer(int whitespace) {
  AnswerSchema s;
  s.kind = Kind::kInteger;
  s.whitespace = whitespace;
  return s;
}

AnswerSchema AnswerSchema::decimal(int whitespace) {
  AnswerSchema s;
  s.kind = Kind::kDecimal;
  s.whitespace = whitespace;
  return s;
}

AnswerSchema AnswerSchema::free_string(int max_len, int whitespace) {
  AnswerSchema s;
  s.kind = Kind::kString;
  s.max_len = max_len;
  s.whitespace = whitespace;
  return s;
}

AnswerSchema AnswerSchema::raw_pattern(std::string pattern, int whitespace) {
  AnswerSchema s;
  s.kind = Kind::kPattern;
  s.pattern = std::move(pattern);
  s.whitespace = whitespace;
  return s;
}

void AnswerSchema::validate() const {
  if (whitespace < 0 || whitespace > kMaxRepeat) {
    throw InvalidSchema("whitespace must be within [0, " + std::to_string(kMaxRepeat) + "]");
  }
  switch (kind) {
    case Kind::kEnum:
      if (choices.empty()) throw InvalidSchema("enum schema needs at least one choice");
      for (const auto& c : choices) {
        if (c.empty()) throw InvalidSchema("enum choices must be non-empty");
        try {
          (void)nlohmann::json(c).dump();
        } catch (const nlohmann::json::exception&) {
          throw InvalidSchema("enum choice is not valid UTF-8");
        }
      }
      break;
    case Kind::kString:
      if (max_len < 1 || max_len > kMaxStringLength) {
        throw InvalidSchema("string max_len must be within [1, " +
                            std::to_string(kMaxStringLength) + "]");
      }
      break;
    case Kind::kPattern: {
      const Dfa dfa = compile(parse_regex(pattern));
      for (StateId s = 0; s < dfa.num_states(); ++s) {
        const auto row = dfa.row(s);
        for (int b = 0; b < 256; ++b) {
          if (row[b] != kDead && !json_safe_pattern_byte(b)) {
            throw InvalidSchema(
                "pattern may emit bytes that are not plain JSON string characters");
          }
        }
      }
      break;
    }
    case Kind::kInteger:
    case Kind::kDecimal:
      break;
  }
}

AnswerSchema AnswerSchema::from_json(const nlohmann::json& doc) {
  try {
    AnswerSchema s;
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "enum") {
      s.kind = Kind::kEnum;
      s.choices = doc.at("choices").get<std::vector<std::string>>();
    } else if (kind == "integer") {
      s.kind = Kind::kInteger;
    } else if (kind == "decimal") {
      s.kind = Kind::kDecimal;
    } else if (kind == "string") {
      s.kind = Kind::kString;
      s.max_len = doc.at("max_len").get<int>();
    } else if (kind == "pattern") {
      s.kind = Kind::kPattern;
      s.pattern = doc.at("pattern").get<std::string>();
    } else {
      throw InvalidSchema("unknown schema kind \"" + kind + "\"");
    }
    if (doc.contains("whitespace")) s.whitespace = doc["whitespace"].get<int>();
    if (doc.contains("quoted")) s.quoted = doc["quoted"].get<bool>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidSchema(std::string("malformed schema: ") + e.what());
  }
}

nlohmann::ordered_json AnswerSchema::to_json() const {
  nlohmann::ordered_json doc;
  doc["kind"] = kind_name(kind);
  switch (kind) {
    case Kind::kEnum:
      doc["choices"] = choices;
      break;
    case Kind::kString:
      doc["max_len"] = max_len;
      break;
    case Kind::kPattern:
      doc["pattern"] = pattern;
      break;
    case Kind::kInteger:
    case Kind::kDecimal:
      doc["quoted"] = quoted;
      break;
  }
  doc["whitespace"] = whitespace;
  return doc;
}

std::string schema_to_regex(const AnswerSchema& schema) {
  schema.validate();
  const std::string ws =
      schema.whitespace == 0 ? "" : "[ \\t\\n]{0," + std::to_string(schema.whitespace) + "}";
  return "\\{" + ws + "\"final_answer\"" + ws + ":" + ws + value_regex(schema) + ws + "\\}";
}

std::optional<std::string> parse_final_answer(std::string_view text) {
  for (std::size_t i = text.size(); i-- > 0;) {
    if (text[i] != '{') continue;
    const std::size_t end = balanced_end(text, i);
    if (end == std::string_view::npos) continue;
    const auto doc = nlohmann::json::parse(text.substr(i, end - i), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) continue;
    auto it = doc.find("final_answer");
    if (it == doc.end()) continue;
    return render_value(*it);
  }
  return std::nullopt;
}

bool conforms_to_schema(const AnswerSchema& schema, std::string_view document) {
  const auto doc = nlohmann::json::parse(document, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || doc.size() != 1 ||
      !doc.contains("final_answer")) {
    return false;
  }
  const auto& v = doc["final_answer"];
  using K = AnswerSchema::Kind;
  switch (schema.kind) {
    case K::kEnum:
      return v.is_string() &&
             std::find(schema.choices.begin(), schema.choices.end(),
                       v.get<std::string>()) != schema.choices.end();
    case K::kInteger: {
      if (!schema.quoted) return v.is_number_integer();
      if (!v.is_string()) return false;
      const std::string s = v.get<std::string>();
      try {
        std::size_t used = 0;
        const long long n = std::stoll(s, &used, 10);
        return used == s.size() && std::to_string(n) == s;
      } catch (const std::exception&) {
        return false;
      }
    }
    case K::kDecimal:
      if (!schema.quoted) return v.is_number();
      return v.is_string() && full_strtod(v.get<std::string>());
    case K::kString:
      return v.is_string() &&
             utf8_length(v.get<std::string>()) <= static_cast<std::size_t>(schema.max_len);
    case K::kPattern:
      return v.is_string() && nfa_matches(parse_regex(schema.pattern), v.get<std::string>());
  }
  return false;
}

}  // namespace switchgen
