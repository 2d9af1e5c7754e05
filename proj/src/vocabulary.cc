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

#include <sodium.h>

#include <fstream>
#include <sstream>

#include "switchgen/error.h"
#include "switchgen/token_index.h"

namespace switchgen {

Vocabulary::Vocabulary(std::vector<std::string> tokens, TokenId eos_id)
    : tokens_(std::move(tokens)), eos_id_(eos_id) {
  if (tokens_.empty()) throw FormatError("vocabulary is empty");
  if (eos_id_ < 0 || eos_id_ >= size()) throw FormatError("eos_id out of range");
  for (TokenId id = 0; id < size(); ++id) {
    if (id == eos_id_) continue;
    const std::string& t = tokens_[id];
    if (t.empty()) {
      throw FormatError("token " + std::to_string(id) + " is empty");
    }
    if (!lookup_.emplace(t, id).second) {
      throw FormatError("duplicate token bytes at id " + std::to_string(id));
    }
    max_token_length_ = std::max(max_token_length_, t.size());
  }
}

TokenId Vocabulary::find(std::string_view text) const {
  auto it = lookup_.find(std::string(text));
  return it == lookup_.end() ? -1 : it->second;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id != eos_id_) out += tokens_.at(id);
  }
  return out;
}

std::vector<TokenId> Vocabulary::tokenize(std::string_view text) const {
  std::vector<TokenId> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t longest = std::min(max_token_length_, text.size() - i);
    std::size_t taken = 0;
    for (std::size_t len = longest; len > 0; --len) {
      auto it = lookup_.find(std::string(text.substr(i, len)));
      if (it != lookup_.end()) {
        out.push_back(it->second);
        taken = len;
        break;
      }
    }
    i += taken == 0 ? 1 : taken;
  }
  return out;
}

nlohmann::ordered_json Vocabulary::to_json() const {
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  doc["eos_id"] = eos_id_;
  auto tokens = nlohmann::ordered_json::array();
  for (const auto& t : tokens_) tokens.push_back(base64_encode(t));
  doc["tokens"] = std::move(tokens);
  return doc;
}

Vocabulary Vocabulary::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw FormatError("vocabulary must be a JSON object");
  if (!doc.contains("eos_id")) throw FormatError("missing eos_id");
  if (!doc.contains("tokens") || !doc["tokens"].is_array()) {
    throw FormatError("missing tokens array");
  }
  if (doc.contains("version") && doc["version"] != 1) {
    throw FormatError("unsupported vocabulary version");
  }
  if (!doc["eos_id"].is_number_integer()) throw FormatError("eos_id must be an integer");
  std::vector<std::string> tokens;
  tokens.reserve(doc["tokens"].size());
  for (const auto& t : doc["tokens"]) {
    if (!t.is_string()) throw FormatError("tokens must be base64 strings");
    tokens.push_back(base64_decode(t.get<std::string>()));
  }
  return Vocabulary(std::move(tokens), doc["eos_id"].get<TokenId>());
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open vocabulary file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("vocabulary is not valid JSON: ") + e.what());
  }
  return Vocabulary::from_json(doc);
}

void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << vocab.to_json().dump(1) << '\n';
}

std::string base64_encode(std::string_view bytes) {
  const std::size_t cap =
      sodium_base64_encoded_len(bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  std::string out(cap, '\0');
  sodium_bin2base64(out.data(), cap,
                    reinterpret_cast<const unsigned char*>(bytes.data()),
                    bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  out.resize(cap - 1);  // drop the terminator
  return out;
}

std::string base64_decode(std::string_view text) {
  std::string out(text.size(), '\0');
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()), out.size(),
                        text.data(), text.size(), nullptr, &len, &end,
                        sodium_base64_VARIANT_ORIGINAL) != 0 ||
      end != text.data() + text.size()) {
    throw FormatError("bad base64 token \"" + std::string(text) + "\"");
  }
  out.resize(len);
  return out;
}

}  // namespace switchgen
