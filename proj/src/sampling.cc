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

#include "switchgen/sampling.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "switchgen/error.h"

namespace switchgen {

void SamplerConfig::validate() const {
  if (strategy == Strategy::kGreedy) return;
  if (!std::isfinite(temperature) || temperature <= 0.0) {
    throw InvalidArgument("temperature must be finite and > 0");
  }
  if (strategy == Strategy::kTopK && top_k < 1) throw InvalidArgument("top_k must be >= 1");
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double hi = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

std::vector<double> apply_mask(std::span<const double> logits,
                               std::span<const TokenId> allowed) {
  if (allowed.empty()) throw EmptyMask("no token is allowed in this state");
  double hi = -std::numeric_limits<double>::infinity();
  for (TokenId t : allowed) {
    if (t < 0 || static_cast<std::size_t>(t) >= logits.size()) {
      throw InvalidArgument("allowed token outside the logit vector");
    }
    hi = std::max(hi, logits[t]);
  }
  std::vector<double> out(logits.size(), 0.0);
  double sum = 0.0;
  for (TokenId t : allowed) {
    out[t] = std::exp(logits[t] - hi);
    sum += out[t];
  }
  for (TokenId t : allowed) out[t] /= sum;
  return out;
}

namespace {

TokenId argmax(std::span<const double> dist) {
  return static_cast<TokenId>(std::max_element(dist.begin(), dist.end()) - dist.begin());
}

TokenId draw(std::span<const TokenId> ids, std::span<const double> dist, double temperature,
             Rng& rng) {
  // Weights dist^(1/t), computed in log space relative to the largest.
  double top = -std::numeric_limits<double>::infinity();
  for (TokenId id : ids) top = std::max(top, std::log(dist[id]));
  std::vector<double> weights(ids.size());
  double total = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    weights[i] = std::exp((std::log(dist[ids[i]]) - top) / temperature);
    total += weights[i];
  }
  const double u = rng.uniform() * total;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    cumulative += weights[i];
    if (u < cumulative && weights[i] > 0.0) return ids[i];
  }
  for (std::size_t i = ids.size(); i-- > 0;) {
    if (weights[i] > 0.0) return ids[i];
  }
  return ids.back();
}

}  // namespace

TokenId sample_token(std::span<const double> dist, const SamplerConfig& config, Rng& rng) {
  if (dist.empty()) throw InvalidArgument("empty distribution");
  if (config.strategy == SamplerConfig::Strategy::kGreedy) return argmax(dist);

  std::vector<TokenId> ids;
  ids.reserve(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] > 0.0) ids.push_back(static_cast<TokenId>(i));
  }
  if (ids.empty()) return argmax(dist);
  if (config.strategy == SamplerConfig::Strategy::kTopK &&
      ids.size() > static_cast<std::size_t>(config.top_k)) {
    std::stable_sort(ids.begin(), ids.end(),
                     [&](TokenId a, TokenId b) { return dist[a] > dist[b]; });
    ids.resize(config.top_k);
    std::sort(ids.begin(), ids.end());
  }
  return draw(ids, dist, config.temperature, rng);
}

}  // namespace switchgen
