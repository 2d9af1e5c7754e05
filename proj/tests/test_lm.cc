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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <unistd.h>

#include "httplib.h"
#include "switchgen/automata.h"
#include "switchgen/decode.h"
#include "switchgen/error.h"
#include "switchgen/lm.h"
#include "test_util.h"

namespace switchgen {
namespace {

namespace fs = std::filesystem;

double logsumexp(const std::vector<double>& x) {
  double m = -INFINITY;
  for (double v : x) m = std::max(m, v);
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

std::size_t argmax(const std::vector<double>& x) {
  return static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
}

LmContext ctx(const std::vector<TokenId>& prompt, const std::vector<TokenId>& generated = {}) {
  return {prompt, generated};
}

const Vocabulary& ab() {
  static const Vocabulary vocab({"a", "b", ""}, 2);
  return vocab;
}

const Vocabulary& toy() {
  static const Vocabulary vocab = load_vocabulary(testing::data_dir() / "toy_vocab.json");
  return vocab;
}

TEST(ScriptedLm, OneHotThenEosForever) {
  const ScriptedLm lm(10, 9, {ScriptStep::one_hot(7)});
  const auto first = lm.next_logits(ctx({1, 2}));
  EXPECT_EQ(first[7], 0.0);
  for (int i = 0; i < 10; ++i) {
    if (i != 7) EXPECT_EQ(first[i], kOneHotFloor);
  }
  for (int n = 1; n < 5; ++n) {
    const std::vector<TokenId> gen(n, 7);
    EXPECT_EQ(argmax(lm.next_logits(ctx({}, gen))), 9u);
  }
}

TEST(ScriptedLm, ExplicitLogitsAndValidation) {
  const ScriptedLm lm(3, 2, {ScriptStep::explicit_logits({0.5, -1.0, 2.0})});
  EXPECT_EQ(lm.next_logits(ctx({})), (std::vector<double>{0.5, -1.0, 2.0}));
  EXPECT_THROW(ScriptedLm(3, 2, {ScriptStep::one_hot(3)}), InvalidArgument);
  EXPECT_THROW(ScriptedLm(3, 2, {ScriptStep::explicit_logits({1.0})}), InvalidArgument);
  EXPECT_THROW(lm.next_logits(ctx({5})), InvalidArgument);
}

TEST(ScriptedLm, RulesSelectByPrompt) {
  auto vocab = std::make_shared<const Vocabulary>(toy());
  const auto doc = nlohmann::json::parse(R"({"version":1,"rules":[
    {"prompt_contains":["alpha","beta"],"text":"B"},
    {"prompt_contains":"alpha","text":"A"},
    {"text":"C"}]})");
  const ScriptedLm lm = ScriptedLm::from_json(doc, vocab);
  auto first = [&](const std::string& prompt) {
    const auto ids = vocab->tokenize(prompt);
    return vocab->bytes(static_cast<TokenId>(argmax(lm.next_logits(ctx(ids)))));
  };
  EXPECT_EQ(first("alpha and beta"), "B");
  EXPECT_EQ(first("only alpha"), "A");
  EXPECT_EQ(first("nothing"), "C");
}

TEST(NgramLm, BigramArgmaxAfterA) {
  const NgramLm lm = NgramLm::train("ababab", ab(), {2, false});
  EXPECT_EQ(argmax(lm.next_logits(ctx({0}))), 1u);
  EXPECT_EQ(argmax(lm.next_logits(ctx({1}))), 0u);
}

TEST(NgramLm, AddOneClosedForm) {
  const NgramLm lm = NgramLm::train("aa", ab(), {2, false});
  const double v = ab().size();
  const std::vector<TokenId> history = {0};
  EXPECT_NEAR(lm.probability(history, 0), 2.0 / (1.0 + v), 1e-12);
  EXPECT_NEAR(std::exp(lm.next_logits(ctx({0}))[0]), 2.0 / (1.0 + v), 1e-12);
  EXPECT_NEAR(lm.probability(history, 1), 1.0 / (1.0 + v), 1e-12);
}

TEST(NgramLm, EmptyContextIsNormalized) {
  const NgramLm lm = NgramLm::train("ababab", ab(), {3, false});
  EXPECT_NEAR(logsumexp(lm.next_logits(ctx({}))), 0.0, 1e-9);
}

TEST(NgramLm, DistributionValidOnRandomContexts) {
  const NgramLm lm = NgramLm::train_file(testing::data_dir() / "toy_corpus.txt", toy(), {3, true});
  std::mt19937_64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    std::vector<TokenId> context(rng() % 6);
    for (TokenId& t : context) t = static_cast<TokenId>(rng() % toy().size());
    const auto logits = lm.next_logits(ctx(context));
    ASSERT_EQ(static_cast<int>(logits.size()), toy().size());
    for (double x : logits) ASSERT_TRUE(std::isfinite(x));
    ASSERT_NEAR(logsumexp(logits), 0.0, 1e-6);
  }
}

TEST(NgramLm, DeterministicTrainingAndSerialization) {
  const auto corpus = testing::data_dir() / "toy_corpus.txt";
  const NgramLm a = NgramLm::train_file(corpus, toy());
  const NgramLm b = NgramLm::train_file(corpus, toy());
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  const auto path = fs::temp_directory_path() / ("switchgen_ngram_" + std::to_string(::getpid()));
  a.save(path);
  EXPECT_EQ(NgramLm::load(path), a);
  fs::remove(path);
}

TEST(NgramLm, Errors) {
  EXPECT_THROW(NgramLm::train("zzz", ab()), EmptyCorpus);
  EXPECT_THROW(NgramLm::train("", ab()), EmptyCorpus);
  EXPECT_THROW(NgramLm::train("ab", ab(), {5, false}), InvalidArgument);
  EXPECT_THROW(NgramLm::train("ab", ab(), {1, false}), InvalidArgument);
}

TEST(CheckContext, Limits) {
  const std::vector<TokenId> p = {0, 1, 2};
  EXPECT_THROW(check_context(ctx(p), 3, 2), ContextTooLong);
  EXPECT_THROW(check_context(ctx({0, 3}), 3, 10), InvalidArgument);
  EXPECT_NO_THROW(check_context(ctx(p), 3, 3));
}

class UniformLm final : public LmProvider {
 public:
  explicit UniformLm(int v) : v_(v) {}
  int vocab_size() const override { return v_; }
  TokenId eos_id() const override { return v_ - 1; }
  std::vector<double> next_logits(const LmContext&) const override {
    return std::vector<double>(v_, 0.0);
  }

 private:
  int v_;
};

TEST(RemoteLm, UniformStub) {
  const UniformLm uniform(5);
  LogitServer server(uniform);
  const int port = server.start();
  const RemoteLm remote("http://127.0.0.1:" + std::to_string(port), 5, 4);
  EXPECT_EQ(remote.next_logits(ctx({0, 1})), std::vector<double>(5, 0.0));
}

TEST(RemoteLm, ShortResponseIsProtocolError) {
  httplib::Server stub;
  stub.Post("/v1/logits", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"vocab_size":5,"logits":[0,0,0,0]})", "application/json");
  });
  const int port = stub.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { stub.listen_after_bind(); });
  stub.wait_until_ready();
  const RemoteLm remote("http://127.0.0.1:" + std::to_string(port), 5, 4);
  EXPECT_THROW(remote.next_logits(ctx({0})), ProtocolError);
  stub.stop();
  thread.join();
}

TEST(RemoteLm, ErrorsAndPrefix) {
  httplib::Server stub;
  stub.Post("/model/v1/logits", [](const httplib::Request& req, httplib::Response& res) {
    const auto doc = nlohmann::json::parse(req.body);
    if (doc["context"].size() > 2) {
      res.status = 413;
      res.set_content(R"({"error":"too long"})", "application/json");
      return;
    }
    res.set_content(R"({"vocab_size":3,"logits":[1,2,3]})", "application/json");
  });
  const int port = stub.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { stub.listen_after_bind(); });
  stub.wait_until_ready();
  const RemoteLm remote("http://127.0.0.1:" + std::to_string(port) + "/model", 3, 2);
  EXPECT_EQ(remote.next_logits(ctx({0})), (std::vector<double>{1, 2, 3}));
  EXPECT_THROW(remote.next_logits(ctx({0, 1, 0})), RemoteError);
  const RemoteLm wrong_v("http://127.0.0.1:" + std::to_string(port) + "/model", 4, 2);
  EXPECT_THROW(wrong_v.next_logits(ctx({0})), ProtocolError);
  stub.stop();
  thread.join();
  EXPECT_THROW(remote.next_logits(ctx({0})), RemoteError);
}

TEST(RemoteLm, ReplayMatchesLocalProvider) {
  // Record the n-gram model's logits along its own greedy completion, then
  // serve the recording over HTTP and decode against it.
  const NgramLm ngram = NgramLm::train_file(testing::data_dir() / "toy_corpus.txt", toy(), {3, true});
  const auto prompt = toy().tokenize("Let's think");
  DecodeOptions options;
  options.max_new_tokens = 40;
  const auto reference = Decoder(ngram, toy()).free_generate(prompt, options);

  std::vector<ScriptStep> recording;
  std::vector<TokenId> generated;
  for (int i = 0; i < reference.steps; ++i) {
    recording.push_back(ScriptStep::explicit_logits(ngram.next_logits(ctx(prompt, generated))));
    if (i < reference.total_tokens) generated.push_back(reference.tokens[i]);
  }
  const ScriptedLm replay(toy().size(), toy().eos_id(), recording);
  LogitServer server(replay);
  const int port = server.start();
  const RemoteLm remote("http://127.0.0.1:" + std::to_string(port), toy().size(), toy().eos_id());
  const auto over_http = Decoder(remote, toy()).free_generate(prompt, options);
  const auto scripted = Decoder(replay, toy()).free_generate(prompt, options);
  EXPECT_EQ(over_http.tokens, reference.tokens);
  EXPECT_EQ(scripted.tokens, reference.tokens);
  EXPECT_EQ(over_http.termination, reference.termination);
}

}  // namespace
}  // namespace switchgen
