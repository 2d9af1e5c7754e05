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

#ifndef SWITCHGEN_SCHEMA_H_
#define SWITCHGEN_SCHEMA_H_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace switchgen {

// The single-key answer object `{"final_answer": <value>}` and the shape of
// its value.
struct AnswerSchema {
  enum class Kind { kEnum, kInteger, kDecimal, kString, kPattern };

  Kind kind = Kind::kEnum;
  std::vector<std::string> choices;  // kEnum
  int max_len = 0;                   // kString, in characters
  std::string pattern;               // kPattern
  int whitespace = 2;                // max whitespace run between structural tokens
  bool quoted = true;                // kInteger/kDecimal: "42" instead of 42

  static AnswerSchema enumeration(std::vector<std::string> choices, int whitespace = 2);
  static AnswerSchema integer(int whitespace = 2);
  static AnswerSchema decimal(int whitespace = 2);
  static AnswerSchema free_string(int max_len, int whitespace = 2);
  static AnswerSchema raw_pattern(std::string pattern, int whitespace = 2);

  // Throws InvalidSchema, or SyntaxError for a malformed kPattern regex.
  void validate() const;

  // {"kind", "choices"?, "max_len"?, "pattern"?, "whitespace"?, "quoted"?}
  static AnswerSchema from_json(const nlohmann::json& doc);
  nlohmann::ordered_json to_json() const;
};

const char* kind_name(AnswerSchema::Kind kind);

// Pattern of shape \{W"final_answer"W:W<VALUE>W\} with W = [ \t\n]{0,k}.
std::string schema_to_regex(const AnswerSchema& schema);

// Value of the last brace-balanced JSON object in `text` that carries a
// final_answer key. Numbers are rendered canonically; strings verbatim.
std::optional<std::string> parse_final_answer(std::string_view text);

// True iff `document` is a JSON object whose only key is final_answer and
// whose value conforms to `schema`.
bool conforms_to_schema(const AnswerSchema& schema, std::string_view document);

}  // namespace switchgen

#endif  // SWITCHGEN_SCHEMA_H_
