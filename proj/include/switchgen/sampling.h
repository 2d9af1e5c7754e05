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

#ifndef SWITCHGEN_SAMPLING_H_
#define SWITCHGEN_SAMPLING_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "switchgen/token_index.h"

namespace switchgen {

struct SamplerConfig {
  enum class Strategy { kGreedy, kTemperature, kTopK };

  Strategy strategy = Strategy::kGreedy;
  double temperature = 1.0;  // > 0, finite
  int top_k = 1;             // >= 1 for kTopK
  std::uint64_t seed = 0;    // ignored by kGreedy

  static SamplerConfig greedy() { return {}; }
  static SamplerConfig with_temperature(double t, std::uint64_t seed) {
    return {Strategy::kTemperature, t, 1, seed};
  }
  static SamplerConfig with_top_k(int k, double t, std::uint64_t seed) {
    return {Strategy::kTopK, t, k, seed};
  }

  // Throws InvalidArgument.
  void validate() const;
};

// Uniform doubles in [0, 1) from the top 53 bits of a 64-bit Mersenne
// twister, so draws are reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

std::vector<double> softmax(std::span<const double> logits);

// Softmax restricted to `allowed`; every other entry is exactly 0. Throws
// EmptyMask when `allowed` is empty.
std::vector<double> apply_mask(std::span<const double> logits,
                               std::span<const TokenId> allowed);

// Greedy: argmax, lowest id on ties, no RNG use. Temperature: one draw
// from dist^(1/t) renormalized. Top-k: the k most probable ids (lower id
// first on ties) then a temperature draw. Zero-probability ids are never
// returned.
TokenId sample_token(std::span<const double> dist, const SamplerConfig& config, Rng& rng);

}  // namespace switchgen

#endif  // SWITCHGEN_SAMPLING_H_
