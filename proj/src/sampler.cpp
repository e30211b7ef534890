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

#include "fesail/sampler.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <queue>

#include "fesail/error.hpp"
#include "fesail/rng.hpp"

namespace fesail {
namespace {

// Residual weight of one candidate: uncovered stale features summed in
// ascending id order. Both greedy variants go through this function so their
// values agree bit for bit.
double Residual(const Candidate& c, const FeatureWeights& weights,
                const std::vector<char>& covered) {
  double w = 0.0;
  for (FeatureId f : c.stale) {
    if (!covered[f.value]) w += weights[f.value];
  }
  return w;
}

std::size_t WeightSpan(const CandidateSet& candidates, const FeatureWeights& weights) {
  std::size_t n = weights.size();
  for (const Candidate& c : candidates) {
    for (FeatureId f : c.stale) {
      if (f.value >= weights.size()) {
        throw Error(ErrorKind::kLookup,
                    "no weight for stale feature " + std::to_string(f.value));
      }
    }
  }
  return n;
}

}  // namespace

CandidateSet RssFilter(std::span<const Sample> pool,
                       std::span<const FeatureId> current_features) {
  CandidateSet out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    Candidate c;
    c.pool_index = i;
    for (FeatureId f : pool[i].features) {
      if (!std::binary_search(current_features.begin(), current_features.end(), f)) {
        c.stale.push_back(f);
      }
    }
    if (c.stale.empty()) continue;
    std::sort(c.stale.begin(), c.stale.end());
    c.stale.erase(std::unique(c.stale.begin(), c.stale.end()), c.stale.end());
    out.push_back(std::move(c));
  }
  return out;
}

FeatureWeights ComputeWeights(const StalenessTable& table, WeightFunction func,
                              double bias) {
  FeatureWeights weights(table.capacity(), 0.0);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const FeatureId id{static_cast<std::uint32_t>(i)};
    if (!table.knows(id)) continue;
    const std::uint32_t s = table.staleness(id);
    if (s >= 1) weights[i] = WeightOf(s, func, bias);
  }
  return weights;
}

GreedyResult SasGreedyNaive(const CandidateSet& candidates,
                            const FeatureWeights& weights, std::size_t capacity) {
  GreedyResult result;
  std::vector<char> covered(WeightSpan(candidates, weights), 0);
  std::vector<char> selected(candidates.size(), 0);
  std::vector<double> residual(candidates.size(), 0.0);
  const std::size_t rounds = std::min(capacity, candidates.size());
  for (std::size_t round = 0; round < rounds; ++round) {
    std::size_t best = candidates.size();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (selected[i]) continue;
      residual[i] = Residual(candidates[i], weights, covered);
      if (round > 0) ++result.residual_updates;
      if (best == candidates.size() || residual[i] > residual[best]) best = i;
    }
    selected[best] = 1;
    for (FeatureId f : candidates[best].stale) covered[f.value] = 1;
    result.order.push_back(best);
    result.marginal.push_back(residual[best]);
    result.covered_weight += residual[best];
  }
  return result;
}

GreedyResult SasGreedyNeighbor(const CandidateSet& candidates,
                               const FeatureWeights& weights, std::size_t capacity) {
  GreedyResult result;
  const std::size_t n = candidates.size();
  std::vector<char> covered(WeightSpan(candidates, weights), 0);

  // Inverted index: stale feature -> candidates holding it (ascending).
  std::vector<std::vector<std::size_t>> postings(covered.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (FeatureId f : candidates[i].stale) postings[f.value].push_back(i);
  }

  struct Entry {
    double weight;
    std::size_t index;
    std::uint32_t version;
  };
  // Max-heap on weight, smallest index first among equal weights.
  auto lower_priority = [](const Entry& a, const Entry& b) {
    if (a.weight != b.weight) return a.weight < b.weight;
    return a.index > b.index;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(lower_priority)> heap(
      lower_priority);

  std::vector<double> residual(n);
  std::vector<std::uint32_t> version(n, 0);
  std::vector<char> selected(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    residual[i] = Residual(candidates[i], weights, covered);
    heap.push({residual[i], i, 0});
  }

  std::vector<std::size_t> stamp(n, 0);
  std::vector<std::size_t> touched;
  const std::size_t rounds = std::min(capacity, n);
  for (std::size_t round = 0; round < rounds; ++round) {
    // Lazy deletion: skip entries whose candidate was picked or re-weighted.
    while (selected[heap.top().index] || heap.top().version != version[heap.top().index]) {
      heap.pop();
    }
    const std::size_t best = heap.top().index;
    heap.pop();
    selected[best] = 1;
    result.order.push_back(best);
    result.marginal.push_back(residual[best]);
    result.covered_weight += residual[best];

    touched.clear();
    for (FeatureId f : candidates[best].stale) {
      if (covered[f.value]) continue;
      covered[f.value] = 1;
      for (std::size_t nb : postings[f.value]) {
        if (selected[nb] || stamp[nb] == round + 1) continue;
        stamp[nb] = round + 1;
        touched.push_back(nb);
      }
    }
    for (std::size_t nb : touched) {
      residual[nb] = Residual(candidates[nb], weights, covered);
      ++version[nb];
      ++result.residual_updates;
      heap.push({residual[nb], nb, version[nb]});
    }
  }
  return result;
}

OptimalCover BruteForceOptimal(const CandidateSet& candidates,
                               const FeatureWeights& weights, std::size_t capacity) {
  const std::size_t n = candidates.size();
  if (n > kBruteForceLimit) {
    throw Error(ErrorKind::kSize, "brute force limited to " +
                                      std::to_string(kBruteForceLimit) +
                                      " candidates, got " + std::to_string(n));
  }
  WeightSpan(candidates, weights);
  // Local feature numbering keeps the union bookkeeping small.
  std::vector<FeatureId> universe;
  for (const Candidate& c : candidates) {
    universe.insert(universe.end(), c.stale.begin(), c.stale.end());
  }
  std::sort(universe.begin(), universe.end());
  universe.erase(std::unique(universe.begin(), universe.end()), universe.end());
  std::vector<std::vector<std::size_t>> local(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (FeatureId f : candidates[i].stale) {
      local[i].push_back(static_cast<std::size_t>(
          std::lower_bound(universe.begin(), universe.end(), f) - universe.begin()));
    }
  }

  OptimalCover best;
  std::uint32_t best_mask = 0;
  std::vector<char> hit(universe.size());
  const std::uint32_t limit = std::uint32_t{1} << n;
  for (std::uint32_t mask = 0; mask < limit; ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) > capacity) continue;
    std::fill(hit.begin(), hit.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (std::uint32_t{1} << i)) {
        for (std::size_t f : local[i]) hit[f] = 1;
      }
    }
    double value = 0.0;
    for (std::size_t f = 0; f < universe.size(); ++f) {
      if (hit[f]) value += weights[universe[f].value];
    }
    if (value > best.value) {
      best.value = value;
      best_mask = mask;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (best_mask & (std::uint32_t{1} << i)) best.selection.push_back(i);
  }
  return best;
}

double CoveredWeight(const CandidateSet& candidates,
                     std::span<const std::size_t> selection,
                     const FeatureWeights& weights) {
  std::vector<FeatureId> covered;
  for (std::size_t i : selection) {
    const Candidate& c = candidates.at(i);
    covered.insert(covered.end(), c.stale.begin(), c.stale.end());
  }
  std::sort(covered.begin(), covered.end());
  covered.erase(std::unique(covered.begin(), covered.end()), covered.end());
  double total = 0.0;
  for (FeatureId f : covered) total += weights.at(f.value);
  return total;
}

std::vector<std::size_t> RandomSample(std::size_t pool_size, std::size_t capacity,
                                      std::uint64_t seed) {
  std::vector<std::size_t> all(pool_size);
  std::iota(all.begin(), all.end(), 0);
  if (capacity >= pool_size) return all;
  std::vector<std::size_t> out;
  out.reserve(capacity);
  Rng rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(out), capacity, rng);
  return out;
}

}  // namespace fesail
