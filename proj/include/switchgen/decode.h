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

#ifndef SWITCHGEN_DECODE_H_
#define SWITCHGEN_DECODE_H_

// Generation loops: unconstrained, fully masked, and hybrid (free text until
// a trigger token, then automaton-guided until the pattern completes).

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "switchgen/lm.h"
#include "switchgen/sampling.h"
#include "switchgen/token_index.h"

namespace switchgen {

enum class Phase { kPreamble = -1, kConstrained = 0, kDone = 1 };

enum class Termination { kRegexComplete, kNaturalEos, kBudgetExhausted, kDeadEnd };

const char* termination_name(Termination t);

// Why a hybrid session left the preamble.
enum class SwitchReason { kNone, kTriggerToken, kEos, kPreambleBudget };

const char* switch_reason_name(SwitchReason r);

struct TriggerSet {
  std::vector<TokenId> tokens;
  bool include_eos = false;

  bool empty() const { return tokens.empty() && !include_eos; }
  bool contains(TokenId token, TokenId eos_id) const;

  // Every vocabulary entry whose bytes are exactly one of `texts`.
  static TriggerSet from_texts(const Vocabulary& vocab, const std::vector<std::string>& texts,
                               bool include_eos);
  // EOS as the unique trigger: the whole natural answer is kept.
  static TriggerSet eos_only() { return {{}, true}; }
};

struct DecodeOptions {
  int max_new_tokens = 256;            // L: bounds sampling steps
  std::optional<int> preamble_budget;  // L_pre: bounds preamble tokens
  SamplerConfig sampler;
  bool record_trace = false;
};

struct TraceStep {
  Phase phase = Phase::kPreamble;
  TokenId token = -1;
  std::optional<StateId> dfa_state;  // state before the step, constrained only
  bool masked = false;
  bool trigger = false;
  // Model probability on tokens outside the mask, before masking.
  double disallowed_mass = 0.0;
  // Probability left on tokens outside the mask after masking; always 0.
  double leaked_mass = 0.0;

  nlohmann::ordered_json to_json() const;
};

struct DecodeResult {
  std::vector<TokenId> tokens;  // preamble then constrained; no trigger, no EOS
  std::string text;
  std::string preamble_text;
  std::string constrained_text;
  int preamble_tokens = 0;
  int constrained_tokens = 0;
  int total_tokens = 0;
  int steps = 0;  // sampling steps, including trigger and EOS draws
  double elapsed_seconds = 0.0;
  double preamble_seconds = 0.0;
  double constrained_seconds = 0.0;
  Termination termination = Termination::kBudgetExhausted;
  SwitchReason switch_reason = SwitchReason::kNone;
  std::optional<TokenId> trigger_token;
  std::optional<StateId> final_state;
  std::vector<TraceStep> trace;

  nlohmann::ordered_json to_json(bool include_timing = true) const;
  // One JSON object per line, one line per trace step.
  void write_trace(std::ostream& out) const;
};

// Stateless driver; every call is an independent session with its own RNG,
// so one Decoder may serve many threads over a shared TokenIndex.
class Decoder {
 public:
  // `index` may be null when only free_generate is used.
  Decoder(const LmProvider& lm, const Vocabulary& vocab, const TokenIndex* index = nullptr);

  DecodeResult free_generate(std::span<const TokenId> prompt, const DecodeOptions& options) const;
  DecodeResult masked_generate(std::span<const TokenId> prompt,
                               const DecodeOptions& options) const;
  // The trigger token is consumed, never appended; constrained decoding then
  // restarts at the start state using the logits of the trigger step.
  DecodeResult hybrid_generate(std::span<const TokenId> prompt, const TriggerSet& triggers,
                               const DecodeOptions& options) const;

 private:
  DecodeResult run(std::span<const TokenId> prompt, Phase first_phase,
                   const TriggerSet* triggers, const DecodeOptions& options) const;

  const LmProvider& lm_;
  const Vocabulary& vocab_;
  const TokenIndex* index_;
};

struct Overhead {
  int token_delta = 0;
  double seconds_delta = 0.0;
};

// hybrid.total - natural.total and the wall-time difference.
Overhead count_overhead(const DecodeResult& natural, const DecodeResult& hybrid);

}  // namespace switchgen

#endif  // SWITCHGEN_DECODE_H_
