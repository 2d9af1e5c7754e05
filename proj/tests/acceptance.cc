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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "switchgen/automata.h"
#include "switchgen/decode.h"
#include "switchgen/error.h"
#include "switchgen/eval.h"
#include "switchgen/lm.h"
#include "switchgen/schema.h"
#include "switchgen/sidecar.h"
#include "switchgen/token_index.h"
#include "test_util.h"

namespace switchgen {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::shared_ptr<const Vocabulary> toy() {
  static const auto vocab =
      std::make_shared<const Vocabulary>(load_vocabulary(testing::data_dir() / "toy_vocab.json"));
  return vocab;
}

const std::vector<AnswerSchema>& fuzz_schemas() {
  static const std::vector<AnswerSchema> schemas = {
      AnswerSchema::enumeration({"A", "B", "C", "D", "E"}), AnswerSchema::integer(),
      AnswerSchema::decimal()};
  return schemas;
}

SamplerConfig random_sampler(std::mt19937_64& rng) {
  const std::uint64_t seed = rng();
  switch (rng() % 3) {
    case 0:
      return SamplerConfig::greedy();
    case 1:
      return SamplerConfig::with_temperature(0.25 + 2.0 * (rng() % 1000) / 1000.0, seed);
    default:
      return SamplerConfig::with_top_k(1 + static_cast<int>(rng() % 10), 1.0, seed);
  }
}

// Random explicit-logit script of 0..40 steps; one-hot EOS afterwards.
ScriptedLm random_script(std::mt19937_64& rng, int vocab_size, TokenId eos) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double scales[] = {0.5, 2.0, 8.0};
  const double scale = scales[rng() % 3];
  std::vector<ScriptStep> steps;
  const int n = static_cast<int>(rng() % 41);
  for (int i = 0; i < n; ++i) {
    std::vector<double> logits(vocab_size);
    for (double& x : logits) x = scale * gauss(rng);
    if (rng() % 2 == 0) logits[rng() % vocab_size] += 20.0;
    steps.push_back(ScriptStep::explicit_logits(std::move(logits)));
  }
  return ScriptedLm(vocab_size, eos, std::move(steps));
}

Outcome structural_validity() {
  const auto start = Clock::now();
  const Vocabulary& vocab = *toy();
  std::vector<TokenIndex> indices;
  std::vector<NfaMatcher> oracles;
  for (const auto& schema : fuzz_schemas()) {
    const std::string regex = schema_to_regex(schema);
    indices.push_back(build_index(compile(parse_regex(regex)), vocab));
    oracles.emplace_back(parse_regex(regex));
  }
  const TriggerSet triggers = TriggerSet::from_texts(vocab, {"{"}, true);

  std::mt19937_64 rng(20260101);
  int complete = 0;
  int failures = 0;
  std::string first_failure;
  const int kRuns = 10000;
  for (int run = 0; run < kRuns; ++run) {
    const std::size_t which = run % indices.size();
    const ScriptedLm lm = random_script(rng, vocab.size(), vocab.eos_id());
    const Decoder decoder(lm, vocab, &indices[which]);
    DecodeOptions options;
    options.max_new_tokens = 64;
    options.sampler = random_sampler(rng);
    const DecodeResult r = (run / 3) % 2 == 0 ? decoder.masked_generate({}, options)
                                              : decoder.hybrid_generate({}, triggers, options);
    if (r.termination != Termination::kRegexComplete) continue;
    ++complete;
    bool ok = oracles[which].matches(r.constrained_text);
    const json doc = json::parse(r.constrained_text, nullptr, false);
    ok = ok && doc.is_object() && doc.contains("final_answer");
    if (!ok) {
      if (failures++ == 0) first_failure = r.constrained_text;
    }
  }
  const double elapsed = seconds_since(start);
  std::ostringstream detail;
  detail << kRuns << " runs, " << complete << " regex_complete, " << failures << " invalid, "
         << elapsed << " s";
  if (failures) detail << "; first invalid: " << first_failure;
  // A run set where almost nothing completes would make the check vacuous.
  return {failures == 0 && complete >= kRuns / 2 && elapsed <= 120.0, detail.str()};
}

Outcome dfa_oracle_equivalence() {
  const auto start = Clock::now();
  const std::string alphabet = "abcd";
  const auto strings = testing::all_strings(alphabet, 8);
  std::mt19937_64 rng(424242);
  int mismatches = 0;
  int over_limit = 0;
  std::string first;
  for (int n = 0; n < 200;) {
    const int depth = 1 + static_cast<int>(rng() % 6);
    const RegexAst ast = testing::random_ast(rng, alphabet, depth);
    Dfa dfa;
    try {
      dfa = compile(ast);
    } catch (const LimitExceeded&) {
      ++over_limit;
      continue;
    }
    ++n;
    const NfaMatcher oracle(ast);
    for (const auto& s : strings) {
      if (dfa.accepts(s) != oracle.matches(s)) {
        if (mismatches++ == 0) first = to_pattern(ast) + " on '" + s + "'";
      }
    }
  }
  const double elapsed = seconds_since(start);
  std::ostringstream detail;
  detail << "200 regexes x " << strings.size() << " strings, " << mismatches << " mismatches, "
         << over_limit << " redrawn over the state limit, " << elapsed << " s";
  if (mismatches) detail << "; first: " << first;
  return {mismatches == 0 && elapsed <= 60.0, detail.str()};
}

Outcome token_index_brute_force() {
  std::mt19937_64 rng(31337);
  long checked = 0;
  long mismatches = 0;
  for (int n = 0; n < 20;) {
    const RegexAst ast = testing::random_ast(rng, "abcd", 1 + static_cast<int>(rng() % 5));
    Dfa dfa;
    try {
      dfa = compile(ast);
    } catch (const LimitExceeded&) {
      continue;
    }
    ++n;
    const Vocabulary vocab = testing::synthetic_vocab(rng, "abcde", 1000);
    const TokenIndex index = build_index(dfa, vocab);
    for (StateId s = 0; s < dfa.num_states(); ++s) {
      const auto allowed = index.allowed_tokens(s);
      const std::set<TokenId> member(allowed.begin(), allowed.end());
      for (TokenId t = 0; t < vocab.size(); ++t) {
        ++checked;
        if (t == vocab.eos_id()) {
          if (member.count(t) != (dfa.is_accept(s) ? 1u : 0u)) ++mismatches;
          continue;
        }
        const StateId walk = testing::byte_walk(dfa, s, vocab.bytes(t));
        const bool expect = walk != kDead;
        if (member.count(t) != (expect ? 1u : 0u)) {
          ++mismatches;
        } else if (expect && index.advance(s, t) != walk) {
          ++mismatches;
        }
      }
    }
  }
  std::ostringstream detail;
  detail << "20 automata, " << checked << " (state, token) pairs, " << mismatches
         << " mismatches";
  return {mismatches == 0, detail.str()};
}

const std::vector<std::string>& corpus_prompts() {
  static const std::vector<std::string> prompts = {
      "Question: Alice has 3 apples.", "Let's think step by step.", "The answer is",
      "Question: Take the last letters.", "First,", ""};
  return prompts;
}

Outcome prefix_equivalence() {
  const Vocabulary& vocab = *toy();
  const NgramLm lm = NgramLm::train_file(testing::data_dir() / "toy_corpus.txt", vocab, {3, true});
  const TokenIndex index = build_index(
      compile(parse_regex(schema_to_regex(fuzz_schemas()[0]))), vocab);
  const Decoder decoder(lm, vocab, &index);
  const TriggerSet triggers = TriggerSet::from_texts(vocab, {"{"}, true);
  std::mt19937_64 rng(777);
  int mismatches = 0;
  int triggered = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto prompt = vocab.tokenize(corpus_prompts()[trial % corpus_prompts().size()]);
    DecodeOptions options;
    options.max_new_tokens = 160;
    options.sampler = random_sampler(rng);
    const DecodeResult natural = decoder.free_generate(prompt, options);
    const DecodeResult hybrid = decoder.hybrid_generate(prompt, triggers, options);
    std::vector<TokenId> prefix;
    for (TokenId t : natural.tokens) {
      if (triggers.contains(t, vocab.eos_id())) break;
      prefix.push_back(t);
    }
    const std::vector<TokenId> preamble(hybrid.tokens.begin(),
                                        hybrid.tokens.begin() + hybrid.preamble_tokens);
    if (hybrid.trigger_token && *hybrid.trigger_token != vocab.eos_id()) ++triggered;
    if (preamble != prefix) ++mismatches;
  }
  std::ostringstream detail;
  detail << "1000 trials, " << triggered << " switched on '{', " << mismatches << " mismatches";
  return {mismatches == 0, detail.str()};
}

Outcome overhead_accounting() {
  const Vocabulary& vocab = *toy();
  const NgramLm lm = NgramLm::train_file(testing::data_dir() / "toy_corpus.txt", vocab, {3, true});
  const TokenIndex index = build_index(
      compile(parse_regex(schema_to_regex(fuzz_schemas()[0]))), vocab);
  const Decoder decoder(lm, vocab, &index);
  std::mt19937_64 rng(5150);
  int counted = 0;
  int mismatches = 0;
  for (int run = 0; run < 300; ++run) {
    const auto prompt = vocab.tokenize(corpus_prompts()[run % corpus_prompts().size()]);
    DecodeOptions options;
    options.max_new_tokens = 512;
    options.record_trace = true;
    options.sampler = SamplerConfig::with_temperature(1.0, rng());
    const DecodeResult natural = decoder.free_generate(prompt, options);
    const DecodeResult hybrid = decoder.hybrid_generate(prompt, TriggerSet::eos_only(), options);
    if (natural.termination != Termination::kNaturalEos ||
        hybrid.termination != Termination::kRegexComplete) {
      continue;
    }
    ++counted;
    // Recount from the trace: constrained-phase draws that were not EOS.
    int recount = 0;
    for (const auto& step : hybrid.trace) {
      if (step.phase == Phase::kConstrained && step.token != vocab.eos_id()) ++recount;
    }
    const std::vector<TokenId> tail(hybrid.tokens.end() - recount, hybrid.tokens.end());
    const bool ok = count_overhead(natural, hybrid).token_delta == recount &&
                    vocab.decode(tail) == hybrid.constrained_text;
    if (!ok) ++mismatches;
  }

  // Report plumbing through the harness.
  const TaskSpec task = TaskSpec::load(testing::data_dir() / "shuffleobj_mini.json");
  EvalConfig config;
  config.decode.max_new_tokens = 512;
  config.decode.sampler = SamplerConfig::with_temperature(1.0, 0);
  config.trigger_texts.clear();
  config.trigger_on_eos = true;
  config.seed = 11;
  config.threads = 4;
  config.model = "ngram-3";
  config.method = Method::kNatural;
  const EvalReport natural = run_grid(task, {PromptKind::kInstructFormat, 1}, config, lm, vocab);
  config.method = Method::kHybrid;
  const EvalReport hybrid = run_grid(task, {PromptKind::kInstructFormat, 1}, config, lm, vocab);
  const OverheadReport overhead = compare_overhead(natural, hybrid);
  int harness_checked = 0;
  for (std::size_t i = 0; i < overhead.per_item.size(); ++i) {
    if (natural.items[i].termination != "natural_eos" ||
        hybrid.items[i].termination != "regex_complete") {
      continue;
    }
    ++harness_checked;
    if (overhead.per_item[i].token_delta != hybrid.items[i].constrained_tokens) ++mismatches;
  }
  std::cout << format_overhead_table(overhead.rows);
  const bool shaped = overhead.rows.size() == 2 && overhead.rows[0].type == "natural" &&
                      overhead.rows[1].tokens > 0.0;
  std::ostringstream detail;
  detail << counted << " decoder runs and " << harness_checked << " harness items recounted, "
         << mismatches << " mismatches, mean delta " << overhead.mean_token_delta << " tokens";
  return {mismatches == 0 && counted > 0 && harness_checked > 0 && shaped, detail.str()};
}

std::string item_question(int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "item %03d.", k);
  return buf;
}

TaskSpec fixture_task(int n) {
  TaskSpec task;
  task.name = "fixture";
  task.metric = Metric::kLabelAccuracy;
  task.schema = AnswerSchema::enumeration({"A", "B", "C", "D", "E"});
  task.task_descriptions = {"TASK-0", "TASK-1", "TASK-2"};
  task.format_descriptions = {"FMT-0 The answer is <x>", "FMT-1 The answer is <x>",
                              "FMT-2 The answer is <x>"};
  for (int k = 0; k < n; ++k) task.items.push_back({item_question(k), "A"});
  return task;
}

ScriptRule answer_rule(std::vector<std::string> filter, const std::string& letter) {
  ScriptRule rule;
  rule.prompt_contains = std::move(filter);
  for (TokenId t : toy()->tokenize("So. The answer is {\"final_answer\": \"" + letter + "\"}")) {
    rule.steps.push_back(ScriptStep::one_hot(t));
  }
  return rule;
}

Outcome harness_exactness() {
  EvalConfig config;
  config.decode.max_new_tokens = 64;
  config.threads = 4;
  std::ostringstream detail;
  bool pass = true;

  std::vector<ScriptRule> alternating;
  for (int k = 0; k < 4; ++k) alternating.push_back(answer_rule({item_question(k)}, k % 2 ? "B" : "A"));
  const EvalReport a = run_grid(fixture_task(4), {PromptKind::kBase, 0}, config,
                                ScriptedLm(toy(), alternating), *toy());
  for (const auto& row : a.grid) {
    for (double c : row) pass = pass && c == 50.0;
  }
  pass = pass && std::abs(a.mean - 50.0) <= 1e-9 && std::abs(a.std_dev) <= 1e-9;
  detail << "fixture 1 mean " << a.mean << " std " << a.std_dev;

  std::vector<ScriptRule> graded;
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 100; ++k) {
      graded.push_back(
          answer_rule({"FMT-" + std::to_string(j), item_question(k)}, k < 74 + j ? "A" : "D"));
    }
  }
  const EvalReport b = run_grid(fixture_task(100), {PromptKind::kBase, 0}, config,
                                ScriptedLm(toy(), graded), *toy());
  for (const auto& row : b.grid) {
    pass = pass && row == std::vector<double>{74.0, 75.0, 76.0};
  }
  pass = pass && std::abs(b.mean - 75.0) <= 1e-9 &&
         std::abs(b.std_dev - std::sqrt(2.0 / 3.0)) <= 1e-9 && a.consistent() && b.consistent();
  detail << "; fixture 2 mean " << b.mean << " std " << b.std_dev;
  return {pass, detail.str()};
}

Outcome premature_trigger() {
  const Vocabulary& vocab = *toy();
  const ScriptedLm lm = ScriptedLm::load(testing::data_dir() / "scripted_premature.json", toy());
  const std::string full =
      "We use the set {1, 2, 3} and pick the largest, which is 3. The answer is "
      "{\"final_answer\": \"C\"}";
  const TokenIndex index = build_index(
      compile(parse_regex(schema_to_regex(fuzz_schemas()[0]))), vocab);
  const Decoder decoder(lm, vocab, &index);
  const auto prompt = vocab.tokenize("Question: pick the largest.");
  DecodeOptions options;
  options.max_new_tokens = 128;

  const DecodeResult cut =
      decoder.hybrid_generate(prompt, TriggerSet::from_texts(vocab, {"{"}, true), options);
  const DecodeResult kept = decoder.hybrid_generate(prompt, TriggerSet::eos_only(), options);
  const bool truncated = cut.preamble_text == "We use the set " &&
                         cut.switch_reason == SwitchReason::kTriggerToken &&
                         cut.termination == Termination::kRegexComplete;
  const bool complete = kept.preamble_text == full && kept.switch_reason == SwitchReason::kEos &&
                        kept.termination == Termination::kRegexComplete &&
                        extract_answer(kept.preamble_text) == std::optional<std::string>("C");
  std::ostringstream detail;
  detail << "default triggers: preamble '" << cut.preamble_text << "'; EOS-only: "
         << kept.preamble_tokens << " preamble tokens";
  return {truncated && complete, detail.str()};
}

Outcome sidecar_differential() {
  const auto vocab = toy();
  MaskSidecar sidecar;
  sidecar.add_vocabulary("toy", vocab);
  const int port = sidecar.start();
  httplib::Client client("127.0.0.1", port);

  const std::vector<std::string> patterns = {
      schema_to_regex(fuzz_schemas()[0]), schema_to_regex(fuzz_schemas()[1]),
      schema_to_regex(fuzz_schemas()[2]), "Yes\\.|No\\.", "[a-z]{1,8}"};
  std::vector<TokenIndex> local;
  for (const auto& p : patterns) local.push_back(build_index(compile(parse_regex(p)), *vocab));

  std::mt19937_64 rng(8080);
  int steps = 0;
  int mismatches = 0;
  int sessions = 0;
  std::string first;
  auto note = [&](const std::string& what) {
    if (mismatches++ == 0) first = what;
  };
  while (steps < 1000 && mismatches == 0) {
    const std::size_t which = rng() % patterns.size();
    auto res = client.Post("/v1/session", json{{"vocab_id", "toy"}, {"pattern", patterns[which]}}.dump(),
                           "application/json");
    if (!res || res->status != 200) {
      note("session open failed");
      break;
    }
    ++sessions;
    const std::string id = json::parse(res->body)["session_id"];
    const TokenIndex& index = local[which];
    StateId state = 0;
    while (steps < 1000) {
      res = client.Post("/v1/allowed", json{{"session_id", id}}.dump(), "application/json");
      const auto allowed = index.allowed_tokens(state);
      const std::string expect_allowed =
          json{{"token_ids", allowed}, {"eos_allowed", index.eos_allowed(state)}}.dump();
      if (!res || res->status != 200 || res->body != expect_allowed) {
        note("allowed differs at state " + std::to_string(state));
        break;
      }
      std::vector<TokenId> moves;
      for (TokenId t : allowed) {
        if (t != vocab->eos_id()) moves.push_back(t);
      }
      if (moves.empty() || (index.is_accept(state) && rng() % 8 == 0)) break;
      ++steps;
      if (rng() % 10 == 0) {
        // Off-mask step: rejected, state unchanged.
        TokenId bad = static_cast<TokenId>(rng() % vocab->size());
        if (std::binary_search(allowed.begin(), allowed.end(), bad)) continue;
        res = client.Post("/v1/advance", json{{"session_id", id}, {"token_id", bad}}.dump(),
                          "application/json");
        if (!res || res->status != 409) note("disallowed token accepted");
        continue;
      }
      const TokenId t = moves[rng() % moves.size()];
      state = index.advance(state, t);
      res = client.Post("/v1/advance", json{{"session_id", id}, {"token_id", t}}.dump(),
                        "application/json");
      const std::string expect_advance =
          json{{"state", state}, {"accept", index.is_accept(state)}}.dump();
      if (!res || res->status != 200 || res->body != expect_advance) {
        note("advance differs: " + (res ? res->body : std::string("no response")));
        break;
      }
    }
    client.Delete("/v1/session/" + id);
  }
  sidecar.stop();
  std::ostringstream detail;
  detail << steps << " steps over " << sessions << " sessions, " << mismatches << " mismatches";
  if (mismatches) detail << "; first: " << first;
  return {mismatches == 0 && steps == 1000, detail.str()};
}

struct Criterion {
  int number;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace switchgen

int main(int argc, char** argv) {
  using namespace switchgen;
  const std::vector<Criterion> criteria = {
      {1, "structural validity", structural_validity},
      {2, "DFA-oracle equivalence", dfa_oracle_equivalence},
      {3, "token index soundness and completeness", token_index_brute_force},
      {4, "prefix equivalence", prefix_equivalence},
      {5, "overhead accounting", overhead_accounting},
      {6, "harness exactness", harness_exactness},
      {7, "premature trigger mitigation", premature_trigger},
      {8, "sidecar differential", sidecar_differential},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.number)) continue;
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    if (!outcome.pass) ++failed;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << " [" << c.number << "] " << c.name << ": "
              << outcome.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
