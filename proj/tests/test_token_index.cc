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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

#include "switchgen/automata.h"
#include "switchgen/error.h"
#include "switchgen/token_index.h"
#include "test_util.h"

namespace switchgen {
namespace {

namespace fs = std::filesystem;
using testing::byte_walk;
using testing::random_ast;
using testing::synthetic_vocab;

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("switchgen_" + std::to_string(::getpid()) + "_" + name);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

Vocabulary yes_no_vocab() { return Vocabulary({"Y", "es", "No", ".", "Yes.", "<eos>"}, 5); }

TEST(Vocabulary, LoadsToyFile) {
  const auto path = temp_file("toy.json");
  write_text(path, R"({"version":1,"eos_id":3,"tokens":["WQ==","ZXM=","Lg==","PGVvcz4="]})");
  const Vocabulary vocab = load_vocabulary(path);
  EXPECT_EQ(vocab.size(), 4);
  EXPECT_EQ(vocab.eos_id(), 3);
  EXPECT_EQ(vocab.bytes(0), "Y");
  EXPECT_EQ(vocab.bytes(1), "es");
  EXPECT_EQ(vocab.bytes(3), "<eos>");
  fs::remove(path);
}

TEST(Vocabulary, RejectsMalformedFiles) {
  const auto path = temp_file("bad.json");
  write_text(path, R"({"version":1,"eos_id":2,"tokens":["YQ==","YQ==",""]})");
  EXPECT_THROW(load_vocabulary(path), FormatError);  // same bytes under two ids
  write_text(path, R"({"version":1,"tokens":["YQ==",""]})");
  EXPECT_THROW(load_vocabulary(path), FormatError);
  write_text(path, R"({"version":1,"eos_id":1,"tokens":["***",""]})");
  EXPECT_THROW(load_vocabulary(path), FormatError);
  write_text(path, R"({"version":1,"eos_id":5,"tokens":["YQ==",""]})");
  EXPECT_THROW(load_vocabulary(path), FormatError);
  write_text(path, R"({"version":1,"eos_id":1,"tokens":["","YQ=="]})");
  EXPECT_THROW(load_vocabulary(path), FormatError);  // empty non-EOS token
  write_text(path, "not json");
  EXPECT_THROW(load_vocabulary(path), FormatError);
  fs::remove(path);
  EXPECT_THROW(load_vocabulary(path), Error);
}

TEST(Vocabulary, SyntheticRoundTrip) {
  std::mt19937_64 rng(11);
  const Vocabulary vocab = synthetic_vocab(rng, "abcde", 1000);
  const auto path = temp_file("synthetic.json");
  save_vocabulary(vocab, path);
  const Vocabulary once = load_vocabulary(path);
  save_vocabulary(once, path);
  EXPECT_EQ(load_vocabulary(path), vocab);
  EXPECT_EQ(once.size(), 1001);
  fs::remove(path);
}

TEST(Vocabulary, Base64) {
  EXPECT_EQ(base64_encode(""), "");
  EXPECT_EQ(base64_encode("f"), "Zg==");
  EXPECT_EQ(base64_encode("foobar"), "Zm9vYmFy");
  EXPECT_EQ(base64_decode("Zm9vYg=="), "foob");
  std::string all;
  for (int b = 0; b < 256; ++b) all.push_back(static_cast<char>(b));
  EXPECT_EQ(base64_decode(base64_encode(all)), all);
  EXPECT_THROW(base64_decode("Zm9=vYg"), FormatError);
}

TEST(Vocabulary, TokenizeAndDecode) {
  const Vocabulary vocab = yes_no_vocab();
  EXPECT_EQ(vocab.tokenize("Yes.No."), (std::vector<TokenId>{4, 2, 3}));
  EXPECT_EQ(vocab.tokenize("Yes"), (std::vector<TokenId>{0, 1}));
  EXPECT_EQ(vocab.tokenize("Y?es"), (std::vector<TokenId>{0, 1}));
  const std::vector<TokenId> ids = {0, 1, 3, 5};
  EXPECT_EQ(vocab.decode(ids), "Yes.");
  EXPECT_EQ(vocab.find("No"), 2);
  EXPECT_EQ(vocab.find("Nope"), -1);
}

TEST(BuildIndex, YesNoExample) {
  const Dfa dfa = compile(parse_regex("Yes\\.|No\\."));
  const TokenIndex index = build_index(dfa, yes_no_vocab());
  EXPECT_EQ(allowed_tokens(index, 0), (std::vector<TokenId>{0, 2, 4}));
  const StateId done = advance(index, 0, 4);
  EXPECT_TRUE(index.eos_allowed(done));
  EXPECT_EQ(index.allowed_tokens(done), (std::vector<TokenId>{5}));
  EXPECT_TRUE(index.edges(done).empty());

  // "No" then "." spells No.
  StateId s = advance(index, 0, 2);
  EXPECT_FALSE(index.eos_allowed(s));
  s = advance(index, s, 3);
  EXPECT_TRUE(index.eos_allowed(s));

  EXPECT_THROW(advance(index, 0, 1), DisallowedToken);
  EXPECT_THROW(advance(index, done, 5), DisallowedToken);
  EXPECT_THROW(index.allowed_tokens(kDead), UnknownState);
  EXPECT_THROW(index.allowed_tokens(index.num_states()), UnknownState);
}

TEST(BuildIndex, StarLoop) {
  const TokenIndex index = build_index(compile(parse_regex("a*")),
                                       Vocabulary({"a", "aaa", "b", ""}, 3));
  EXPECT_EQ(index.advance(0, 1), 0);
  EXPECT_EQ(index.allowed_tokens(0), (std::vector<TokenId>{0, 1, 3}));
}

TEST(BuildIndex, UncoveredBytesGiveEmptySet) {
  const TokenIndex index = build_index(compile(parse_regex("ab")), Vocabulary({"a", ""}, 1));
  const StateId s = index.advance(0, 0);
  EXPECT_TRUE(index.allowed_tokens(s).empty());
}

TEST(BuildIndex, TokensOvershootingTheEndAreDropped) {
  const TokenIndex index = build_index(compile(parse_regex("ab")), Vocabulary({"ab", "abc", ""}, 2));
  EXPECT_EQ(index.allowed_tokens(0), (std::vector<TokenId>{0}));
}

TEST(BuildIndex, MatchesByteWalkOnRandomAutomata) {
  std::mt19937_64 rng(99);
  const Vocabulary vocab = synthetic_vocab(rng, "abcde", 1000);
  for (int trial = 0; trial < 20; ++trial) {
    const Dfa dfa = compile(random_ast(rng, "abcd", 5));
    const TokenIndex index = build_index(dfa, vocab);
    ASSERT_EQ(index.num_states(), dfa.num_states());
    for (StateId q = 0; q < dfa.num_states(); ++q) {
      const auto mask = index.mask(q);
      ASSERT_EQ(index.eos_allowed(q), dfa.is_accept(q));
      ASSERT_EQ(mask[vocab.eos_id()] != 0, dfa.is_accept(q));
      for (TokenId t = 0; t < vocab.size(); ++t) {
        if (t == vocab.eos_id()) continue;
        const StateId expected = byte_walk(dfa, q, vocab.bytes(t));
        ASSERT_EQ(mask[t] != 0, expected != kDead);
        if (expected != kDead) ASSERT_EQ(index.advance(q, t), expected);
      }
    }
    EXPECT_EQ(build_index(dfa, vocab, 4), index);
  }
}

TEST(BuildIndex, AdvanceChainsAreLanguagePrefixes) {
  std::mt19937_64 rng(5);
  const Vocabulary vocab = synthetic_vocab(rng, "abc", 200);
  for (int trial = 0; trial < 30; ++trial) {
    const RegexAst ast = random_ast(rng, "abc", 4);
    const TokenIndex index = build_index(compile(ast), vocab);
    StateId s = 0;
    std::string text;
    for (int step = 0; step < 12; ++step) {
      const auto edges = index.edges(s);
      if (edges.empty()) break;
      const TokenEdge e = edges[rng() % edges.size()];
      text += vocab.bytes(e.token);
      s = index.advance(s, e.token);
      ASSERT_TRUE(nfa_is_prefix(ast, text)) << to_pattern(ast) << " / " << text;
    }
  }
}

TEST(IndexJson, RoundTripAndValidation) {
  const Dfa dfa = compile(parse_regex("Yes\\.|No\\."));
  const TokenIndex index = build_index(dfa, yes_no_vocab());
  const auto doc = index.to_json();
  EXPECT_EQ(doc["version"], 1);
  EXPECT_EQ(doc["dfa_hash"], dfa.hash());
  EXPECT_EQ(TokenIndex::from_json(nlohmann::json::parse(doc.dump())), index);

  auto unsorted = nlohmann::json::parse(doc.dump());
  auto& edges = unsorted["states"][0]["edges"];
  std::swap(edges[0], edges[1]);
  EXPECT_THROW(TokenIndex::from_json(unsorted), FormatError);

  auto dangling = nlohmann::json::parse(doc.dump());
  dangling["states"][0]["edges"][0][1] = 1000;
  EXPECT_THROW(TokenIndex::from_json(dangling), FormatError);
}

}  // namespace
}  // namespace switchgen
