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

#ifndef FESAIL_SAMPLER_HPP_
#define FESAIL_SAMPLER_HPP_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "fesail/feature_registry.hpp"

namespace fesail {

// A replay candidate: a pool sample holding at least one stale feature.
struct Candidate {
  std::size_t pool_index = 0;
  // Distinct stale features, ascending.
  std::vector<FeatureId> stale;
};

using CandidateSet = std::vector<Candidate>;

// Per-feature coverage weights indexed by FeatureId::value. Fresh features
// carry 0.
using FeatureWeights = std::vector<double>;

inline constexpr std::size_t kUnboundedCapacity = std::numeric_limits<std::size_t>::max();

// Keeps every pool sample that holds a feature outside `current_features`
// (sorted, distinct) and annotates it with those features.
CandidateSet RssFilter(std::span<const Sample> pool,
                       std::span<const FeatureId> current_features);

// WeightOf for every stale feature known to `table`, 0 elsewhere. The result
// has table.capacity() entries.
FeatureWeights ComputeWeights(const StalenessTable& table, WeightFunction func,
                              double bias);

struct GreedyResult {
  // Candidate indices (positions in the CandidateSet) in selection order.
  std::vector<std::size_t> order;
  // Marginal uncovered weight W_l of each pick.
  std::vector<double> marginal;
  double covered_weight = 0.0;
  // Number of times a candidate's residual weight was (re)computed after the
  // initial pass.
  std::size_t residual_updates = 0;
};

// Algorithm 1 as written: each of the L iterations rescans every unselected
// candidate for the largest residual weight. Ties go to the smallest index.
GreedyResult SasGreedyNaive(const CandidateSet& candidates,
                            const FeatureWeights& weights, std::size_t capacity);

// Same selection as SasGreedyNaive, maintained through an inverted index from
// stale feature to candidates. After each pick only the neighbours that share
// a newly covered feature get their residual recomputed.
GreedyResult SasGreedyNeighbor(const CandidateSet& candidates,
                               const FeatureWeights& weights, std::size_t capacity);

struct OptimalCover {
  double value = 0.0;
  std::vector<std::size_t> selection;
};

inline constexpr std::size_t kBruteForceLimit = 20;

// Exhaustive maximum over all subsets of size <= capacity. Throws kSize when
// there are more than kBruteForceLimit candidates.
OptimalCover BruteForceOptimal(const CandidateSet& candidates,
                               const FeatureWeights& weights, std::size_t capacity);

// Total weight of the union of stale features covered by `selection`.
double CoveredWeight(const CandidateSet& candidates,
                     std::span<const std::size_t> selection,
                     const FeatureWeights& weights);

// Uniform sample of min(capacity, pool_size) distinct indices, ascending.
std::vector<std::size_t> RandomSample(std::size_t pool_size, std::size_t capacity,
                                      std::uint64_t seed);

}  // namespace fesail

#endif  // FESAIL_SAMPLER_HPP_
