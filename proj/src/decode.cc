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

#include "switchgen/decode.h"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "switchgen/error.h"

namespace switchgen {

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::kRegexComplete:
      return "regex_complete";
    case Termination::kNaturalEos:
      return "natural_eos";
    case Termination::kBudgetExhausted:
      return "budget_exhausted";
    case Termination::kDeadEnd:
      return "dead_end";
  }
  return "?";
}

const char* switch_reason_name(SwitchReason r) {
  switch (r) {
    case SwitchReason::kNone:
      return "none";
    case SwitchReason::kTriggerToken:
      return "trigger_token";
    case SwitchReason::kEos:
      return "eos";
    case SwitchReason::kPreambleBudget:
      return "preamble_budget";
  }
  return "?";
}

bool TriggerSet::contains(TokenId token, TokenId eos_id) const {
  if (token == eos_id) return include_eos;
  return std::find(tokens.begin(), tokens.end(), token) != tokens.end();
}

TriggerSet TriggerSet::from_texts(const Vocabulary& vocab, const std::vector<std::string>& texts,
                                  bool include_eos) {
  TriggerSet set;
  set.include_eos = include_eos;
  for (const auto& text : texts) {
    const TokenId id = vocab.find(text);
    if (id >= 0 && id != vocab.eos_id()) set.tokens.push_back(id);
  }
  std::sort(set.tokens.begin(), set.tokens.end());
  set.tokens.erase(std::unique(set.tokens.begin(), set.tokens.end()), set.tokens.end());
  return set;
}

nlohmann::ordered_json TraceStep::to_json() const {
  nlohmann::ordered_json doc;
  doc["phase"] = static_cast<int>(phase);
  doc["token_id"] = token;
  if (dfa_state) doc["dfa_state"] = *dfa_state;
  doc["masked"] = masked;
  if (trigger) doc["trigger"] = true;
  if (masked) {
    doc["disallowed_mass"] = disallowed_mass;
    doc["leaked_mass"] = leaked_mass;
  }
  return doc;
}

nlohmann::ordered_json DecodeResult::to_json(bool include_timing) const {
  nlohmann::ordered_json doc;
  doc["text"] = text;
  doc["preamble"] = preamble_text;
  doc["constrained"] = constrained_text;
  doc["tokens"] = tokens;
  doc["preamble_tokens"] = preamble_tokens;
  doc["constrained_tokens"] = constrained_tokens;
  doc["total_tokens"] = total_tokens;
  doc["steps"] = steps;
  doc["termination"] = termination_name(termination);
  doc["switch_reason"] = switch_reason_name(switch_reason);
  if (trigger_token) doc["trigger_token"] = *trigger_token;
  if (final_state) doc["final_state"] = *final_state;
  if (include_timing) {
    doc["elapsed_seconds"] = elapsed_seconds;
    doc["preamble_seconds"] = preamble_seconds;
    doc["constrained_seconds"] = constrained_seconds;
  }
  return doc;
}

void DecodeResult::write_trace(std::ostream& out) const {
  for (const auto& step : trace) out << step.to_json().dump() << '\n';
}

Decoder::Decoder(const LmProvider& lm, const Vocabulary& vocab, const TokenIndex* index)
    : lm_(lm), vocab_(vocab), index_(index) {
  if (lm_.vocab_size() != vocab_.size() || lm_.eos_id() != vocab_.eos_id()) {
    throw InvalidArgument("LM and vocabulary disagree on size or EOS id");
  }
  if (index_ && (index_->vocab_size() != vocab_.size() || index_->eos_id() != vocab_.eos_id())) {
    throw InvalidArgument("token index was built for a different vocabulary");
  }
}

DecodeResult Decoder::free_generate(std::span<const TokenId> prompt,
                                    const DecodeOptions& options) const {
  return run(prompt, Phase::kPreamble, nullptr, options);
}

DecodeResult Decoder::masked_generate(std::span<const TokenId> prompt,
                                      const DecodeOptions& options) const {
  return run(prompt, Phase::kConstrained, nullptr, options);
}

DecodeResult Decoder::hybrid_generate(std::span<const TokenId> prompt, const TriggerSet& triggers,
                                      const DecodeOptions& options) const {
  if (triggers.empty() && !options.preamble_budget) {
    throw InvalidArgument("hybrid decoding needs a trigger or a preamble budget");
  }
  return run(prompt, Phase::kPreamble, &triggers, options);
}

DecodeResult Decoder::run(std::span<const TokenId> prompt, Phase first_phase,
                          const TriggerSet* triggers, const DecodeOptions& options) const {
  using Clock = std::chrono::steady_clock;
  if (options.max_new_tokens < 1) throw InvalidArgument("max_new_tokens must be >= 1");
  if (options.preamble_budget && *options.preamble_budget < 0) {
    throw InvalidArgument("preamble budget must be >= 0");
  }
  options.sampler.validate();
  const bool can_switch = triggers != nullptr;
  if ((first_phase == Phase::kConstrained || can_switch) && index_ == nullptr) {
    throw InvalidArgument("constrained decoding needs a token index");
  }

  const TokenId eos = vocab_.eos_id();
  const int vocab_size = vocab_.size();
  Rng rng(options.sampler.seed);
  DecodeResult result;
  Phase phase = first_phase;
  StateId state = 0;
  std::vector<TokenId> generated;
  std::optional<std::vector<double>> carried;
  bool finished = false;
  const auto session_start = Clock::now();

  auto fetch_logits = [&]() {
    if (carried) {
      auto out = std::move(*carried);
      carried.reset();
      return out;
    }
    auto logits = lm_.next_logits({prompt, generated});
    if (static_cast<int>(logits.size()) != vocab_size) {
      throw ProtocolError("LM returned " + std::to_string(logits.size()) + " logits, expected " +
                          std::to_string(vocab_size));
    }
    for (double x : logits) {
      if (!std::isfinite(x)) throw ProtocolError("LM returned a non-finite logit");
    }
    return logits;
  };

  auto enter_constrained = [&](SwitchReason reason) {
    phase = Phase::kConstrained;
    state = 0;
    result.switch_reason = reason;
  };

  while (result.steps < options.max_new_tokens && !finished) {
    if (phase == Phase::kPreamble && can_switch && options.preamble_budget &&
        result.preamble_tokens >= *options.preamble_budget) {
      enter_constrained(SwitchReason::kPreambleBudget);
      continue;
    }
    const auto step_start = Clock::now();
    std::vector<double> logits = fetch_logits();
    ++result.steps;

    if (phase == Phase::kPreamble) {
      const auto dist = softmax(logits);
      const TokenId t = sample_token(dist, options.sampler, rng);
      const bool is_trigger = can_switch && triggers->contains(t, eos);
      if (options.record_trace) {
        TraceStep step;
        step.phase = Phase::kPreamble;
        step.token = t;
        step.trigger = is_trigger;
        result.trace.push_back(step);
      }
      if (is_trigger) {
        result.trigger_token = t;
        enter_constrained(t == eos ? SwitchReason::kEos : SwitchReason::kTriggerToken);
        carried = std::move(logits);
      } else if (t == eos) {
        result.termination = Termination::kNaturalEos;
        finished = true;
      } else {
        generated.push_back(t);
        ++result.preamble_tokens;
      }
      result.preamble_seconds +=
          std::chrono::duration<double>(Clock::now() - step_start).count();
      continue;
    }

    const std::vector<TokenId> allowed = index_->allowed_tokens(state);
    if (allowed.empty()) {
      result.termination = Termination::kDeadEnd;
      finished = true;
      result.constrained_seconds +=
          std::chrono::duration<double>(Clock::now() - step_start).count();
      break;
    }
    const auto dist = apply_mask(logits, allowed);
    const TokenId t = sample_token(dist, options.sampler, rng);
    if (options.record_trace) {
      TraceStep step;
      step.phase = Phase::kConstrained;
      step.token = t;
      step.dfa_state = state;
      step.masked = true;
      const auto raw = softmax(logits);
      double allowed_mass = 0.0;
      for (TokenId a : allowed) allowed_mass += raw[a];
      step.disallowed_mass = std::max(0.0, 1.0 - allowed_mass);
      std::vector<char> ok(vocab_size, 0);
      for (TokenId a : allowed) ok[a] = 1;
      for (int i = 0; i < vocab_size; ++i) {
        if (!ok[i]) step.leaked_mass += dist[i];
      }
      result.trace.push_back(step);
    }
    if (t == eos) {
      result.termination = Termination::kRegexComplete;
      finished = true;
    } else {
      state = index_->advance(state, t);
      generated.push_back(t);
      ++result.constrained_tokens;
    }
    result.constrained_seconds +=
        std::chrono::duration<double>(Clock::now() - step_start).count();
  }
  if (!finished) result.termination = Termination::kBudgetExhausted;

  result.elapsed_seconds = std::chrono::duration<double>(Clock::now() - session_start).count();
  result.tokens = std::move(generated);
  result.total_tokens = static_cast<int>(result.tokens.size());
  const std::span<const TokenId> all(result.tokens);
  result.preamble_text = vocab_.decode(all.first(result.preamble_tokens));
  result.constrained_text = vocab_.decode(all.subspan(result.preamble_tokens));
  result.text = result.preamble_text + result.constrained_text;
  if (phase == Phase::kConstrained) result.final_state = state;
  return result;
}

Overhead count_overhead(const DecodeResult& natural, const DecodeResult& hybrid) {
  return {hybrid.total_tokens - natural.total_tokens,
          hybrid.elapsed_seconds - natural.elapsed_seconds};
}

}  // namespace switchgen
