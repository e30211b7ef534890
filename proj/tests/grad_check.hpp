// Copyright 2026 The FeSAIL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FESAIL_TESTS_GRAD_CHECK_HPP_
#define FESAIL_TESTS_GRAD_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fesail/feature_registry.hpp"
#include "fesail/model.hpp"

namespace fesail::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  double guard = 0.0;
};

// Relative error with a small floor so that both-near-zero entries compare
// absolutely.
inline double RelError(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Full loss (CE + lambda * guard) on a toy model with m=2, k=3, hidden [4]:
// analytic gradients against central differences for every embedding row in
// the batch and every dense parameter.
inline GradCheckResult CheckToyGradients(std::uint64_t seed, double lambda = 0.1,
                                         std::uint32_t eta = 5, double step = 1e-5) {
  constexpr std::uint32_t kPerField = 4;
  std::mt19937_64 rng(seed);
  ModelConfig config;
  config.num_fields = 2;
  config.embedding_dim = 3;
  config.hidden = {4};
  ModelState state = InitModel(config, seed, 2 * kPerField);

  // Staleness: everything seen once, then a few spans of random presence.
  StalenessTable table;
  std::vector<FeatureId> all;
  for (std::uint32_t f = 0; f < 2 * kPerField; ++f) all.push_back(FeatureId{f});
  table.Update(all);
  std::bernoulli_distribution keep(0.5);
  for (int t = 0; t < 6; ++t) {
    std::vector<FeatureId> present;
    for (FeatureId f : all) {
      if (keep(rng)) present.push_back(f);
    }
    table.Update(present);
  }
  std::uint32_t s_max = 0;
  for (FeatureId f : all) s_max = std::max(s_max, table.staleness(f));

  std::uniform_int_distribution<std::uint32_t> pick(0, kPerField - 1);
  std::vector<Sample> samples(6);
  for (Sample& s : samples) {
    s.features = {FeatureId{pick(rng)}, FeatureId{kPerField + pick(rng)}};
    s.label = keep(rng) ? 1 : 0;
  }
  std::vector<const Sample*> ptrs;
  for (const Sample& s : samples) ptrs.push_back(&s);
  const Batch batch(ptrs);

  // Anchors are the current rows; moving the rows afterwards gives the guard
  // a non-trivial displacement.
  const AnchorTable anchors = SnapshotAnchors(state, all);
  std::normal_distribution<double> jitter(0.0, 0.3);
  for (double& x : state.embeddings) x += jitter(rng);

  GuardTerm term;
  term.table = &table;
  term.s_max = s_max;
  term.config.eta = eta;
  term.config.lambda = lambda;
  term.anchors = &anchors;

  Gradients grads;
  const LossBreakdown base = ComputeLoss(state, batch, &term, &grads);
  GradCheckResult result;
  result.guard = base.guard;

  auto numeric = [&](double& param) {
    const double saved = param;
    param = saved + step;
    const double up = ComputeLoss(state, batch, &term, nullptr).total;
    param = saved - step;
    const double down = ComputeLoss(state, batch, &term, nullptr).total;
    param = saved;
    return (up - down) / (2.0 * step);
  };
  auto compare = [&](double analytic, double& param) {
    result.max_rel_error = std::max(result.max_rel_error, RelError(analytic, numeric(param)));
    ++result.checked;
  };

  const std::size_t k = config.embedding_dim;
  for (std::size_t r = 0; r < grads.rows.size(); ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      compare(grads.row_grads[r * k + j], state.embeddings[grads.rows[r].value * k + j]);
    }
  }
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    for (std::size_t i = 0; i < state.layers[l].weight.size(); ++i) {
      compare(grads.layers[l].weight[i], state.layers[l].weight[i]);
    }
    for (std::size_t i = 0; i < state.layers[l].bias.size(); ++i) {
      compare(grads.layers[l].bias[i], state.layers[l].bias[i]);
    }
  }
  return result;
}

}  // namespace fesail::testing

#endif  // FESAIL_TESTS_GRAD_CHECK_HPP_
