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

// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. FESAIL_ACCEPTANCE_ONLY=3,5 restricts the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "fesail/feature_registry.hpp"
#include "fesail/metrics.hpp"
#include "fesail/model.hpp"
#include "fesail/pipeline.hpp"
#include "fesail/sampler.hpp"
#include "fesail/stream.hpp"
#include "grad_check.hpp"
#include "test_util.hpp"

namespace fesail {
namespace {

namespace fs = std::filesystem;
using testing::CoverInstance;
using testing::RandomInstance;
using testing::TempDir;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// Desk-scale stream shared by criteria 6, 7 and 10: 12 spans x 5000 samples,
// 5 fields x 400 features with skewed popularity. About 30% of the features go
// missing; rarer ones go missing more often and for longer, up to 8 spans.

SyntheticSpec DeskSpec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_spans = 12;
  spec.samples_per_span = 5000;
  spec.num_fields = 5;
  spec.features_per_field = 400;
  spec.noise = 0.5;
  spec.weight_scale = 3.0;
  spec.suppress_fraction = 0.3;
  spec.max_gap = 8;
  spec.gap_end_min = 8;
  spec.popularity_skew = 1.0;
  spec.gaps_follow_rarity = true;
  spec.seed = seed;
  return spec;
}

PipelineConfig DeskConfig(Policy policy, std::uint64_t seed) {
  PipelineConfig c;
  c.policy = policy;
  c.train.batch_size = 32;
  c.seed = seed;
  return c;
}

class DeskStreams {
 public:
  explicit DeskStreams(const fs::path& root) : root_(root) {}

  const std::vector<fs::path>& Paths(std::uint64_t seed) {
    auto it = paths_.find(seed);
    if (it == paths_.end()) {
      const fs::path dir = root_ / ("desk_" + std::to_string(seed));
      it = paths_.emplace(seed, WriteSynthetic(GenerateSynthetic(DeskSpec(seed)), dir)).first;
    }
    return it->second;
  }

  const RunResult& Run(Policy policy, std::uint64_t seed) {
    const auto key = std::make_pair(static_cast<int>(policy), seed);
    auto it = runs_.find(key);
    if (it == runs_.end()) {
      it = runs_.emplace(key, RunIncremental(DeskConfig(policy, seed), Paths(seed))).first;
    }
    return it->second;
  }

 private:
  fs::path root_;
  std::map<std::uint64_t, std::vector<fs::path>> paths_;
  std::map<std::pair<int, std::uint64_t>, RunResult> runs_;
};

constexpr std::uint64_t kDeskSeeds = 5;

// Count-weighted AUC per bucket, pooled over spans.
std::map<std::uint32_t, double> PooledBucketAuc(const RunResult& r) {
  std::map<std::uint32_t, std::pair<double, double>> acc;
  for (const BucketRow& b : r.buckets) {
    if (!b.auc) continue;
    acc[b.bucket].first += *b.auc * static_cast<double>(b.count);
    acc[b.bucket].second += static_cast<double>(b.count);
  }
  std::map<std::uint32_t, double> out;
  for (const auto& [bucket, sums] : acc) out[bucket] = sums.first / sums.second;
  return out;
}

double HighBucketAuc(const RunResult& r, std::uint32_t min_bucket) {
  double sum = 0.0, weight = 0.0;
  for (const BucketRow& b : r.buckets) {
    if (!b.auc || b.bucket < min_bucket) continue;
    sum += *b.auc * static_cast<double>(b.count);
    weight += static_cast<double>(b.count);
  }
  return weight > 0.0 ? sum / weight : std::nan("");
}

// ---------------------------------------------------------------------------

Verdict Criterion1() {
  std::mt19937_64 rng(20260101);
  const double ratio = 1.0 - 1.0 / std::exp(1.0);
  double worst = 1.0;
  int failures = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<std::size_t> n(1, 12);
    std::uniform_int_distribution<std::size_t> cap(1, 4);
    std::uniform_int_distribution<std::size_t> universe(4, 24);
    const CoverInstance inst = RandomInstance(rng, n(rng), universe(rng), 6);
    const std::size_t L = cap(rng);
    const double greedy = SasGreedyNaive(inst.candidates, inst.weights, L).covered_weight;
    const double opt = BruteForceOptimal(inst.candidates, inst.weights, L).value;
    if (!(greedy >= ratio * opt)) ++failures;
    if (opt > 0.0) worst = std::min(worst, greedy / opt);
  }
  return {failures == 0,
          Fmt("200 instances, worst greedy/OPT %.4f (bound %.4f), %d violations", worst, ratio,
              failures)};
}

Verdict Criterion2() {
  std::mt19937_64 rng(20260102);
  int mismatches = 0;
  int sparse_instances = 0;
  int sparse_not_fewer = 0;
  std::size_t naive_updates = 0, neighbor_updates = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const bool sparse = trial % 2 == 0;
    std::uniform_int_distribution<std::size_t> n(50, 2000);
    const std::size_t count = trial < 10 ? 2000 : n(rng);
    const std::size_t universe = sparse ? count * 10 : std::max<std::size_t>(20, count / 4);
    const CoverInstance inst = RandomInstance(rng, count, universe, 5);
    std::uniform_int_distribution<std::size_t> cap(1, count / 2);
    const std::size_t L = cap(rng);
    const GreedyResult a = SasGreedyNaive(inst.candidates, inst.weights, L);
    const GreedyResult b = SasGreedyNeighbor(inst.candidates, inst.weights, L);
    if (a.order != b.order || a.marginal != b.marginal) ++mismatches;
    if (sparse) {
      ++sparse_instances;
      if (!(b.residual_updates < a.residual_updates)) ++sparse_not_fewer;
      naive_updates += a.residual_updates;
      neighbor_updates += b.residual_updates;
    }
  }
  return {mismatches == 0 && sparse_not_fewer == 0,
          Fmt("100 instances, %d order mismatches; sparse instances %d, residual updates "
              "naive %zu vs neighbor %zu, %d not fewer",
              mismatches, sparse_instances, naive_updates, neighbor_updates, sparse_not_fewer)};
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string cell;
  while (std::getline(s, cell, ',')) out.push_back(cell);
  return out;
}

Verdict Criterion3(const fs::path& root) {
  std::mt19937_64 rng(20260103);
  int mismatched_schedules = 0;
  std::size_t compared = 0;
  std::uint32_t max_seen = 0;
  for (int trial = 0; trial < 50; ++trial) {
    SyntheticSpec spec;
    std::uniform_int_distribution<std::size_t> spans(4, 12);
    spec.num_spans = spans(rng);
    spec.samples_per_span = 60;
    spec.num_fields = 2;
    spec.features_per_field = 12;
    spec.suppress_fraction = std::uniform_real_distribution<double>(0.0, 0.6)(rng);
    spec.max_gap = std::uniform_int_distribution<std::size_t>(1, spec.num_spans - 2)(rng);
    spec.seed = rng();
    // A few explicit absences on top of the random gaps, never emptying a field.
    std::uniform_int_distribution<std::size_t> feature(0, spec.features_per_field - 1);
    std::uniform_int_distribution<std::size_t> span(1, spec.num_spans - 1);
    for (int k = 0; k < 3; ++k) spec.schedule[{0, feature(rng)}].push_back(span(rng));
    for (auto& [key, list] : spec.schedule) {
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
    }

    const fs::path dir = root / ("sched_" + std::to_string(trial));
    const auto paths = WriteSynthetic(GenerateSynthetic(spec), dir);
    PipelineConfig config;
    config.policy = Policy::kIU;
    config.embedding_dim = 2;
    config.hidden = {2};
    config.train.max_epochs = 1;
    config.train.batch_size = 64;
    const RunResult r = RunIncremental(config, paths);

    // Independent trace from the raw files: token sets per applied span.
    const std::size_t applied = r.staleness.span_index();
    std::vector<std::set<std::pair<std::size_t, std::string>>> present(applied);
    for (std::size_t t = 0; t < applied; ++t) {
      std::ifstream in(paths[t]);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cols = SplitCsv(line);
        for (std::size_t f = 1; f < cols.size(); ++f) present[t].insert({f - 1, cols[f]});
      }
    }
    std::set<std::pair<std::size_t, std::string>> universe;
    for (const auto& s : present) universe.insert(s.begin(), s.end());
    bool ok = true;
    for (const auto& [field, token] : universe) {
      std::uint32_t trailing = 0;
      for (std::size_t t = applied; t-- > 0 && !present[t].count({field, token});) ++trailing;
      FeatureId id;
      if (!r.dictionary.Find(FieldId{static_cast<std::uint32_t>(field)}, token, &id) ||
          !r.staleness.knows(id) || r.staleness.staleness(id) != trailing) {
        ok = false;
      }
      max_seen = std::max(max_seen, trailing);
      ++compared;
    }
    if (r.staleness.num_known() != universe.size()) ok = false;
    if (!ok) ++mismatched_schedules;
  }
  return {mismatched_schedules == 0,
          Fmt("50 schedules, %zu feature values compared, max staleness %u, %d mismatched",
              compared, max_seen, mismatched_schedules)};
}

Verdict Criterion4() {
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const testing::GradCheckResult r = testing::CheckToyGradients(seed, 0.1, 5, 1e-5);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
  }
  return {worst < 1e-4,
          Fmt("50 seeds, %zu partials, max relative error %.3g (limit 1e-4)", checked, worst)};
}

Verdict Criterion5() {
  const double a = GuardCoefficient(2, 10, 5);
  bool saturated = true;
  for (std::uint32_t s = 5; s <= 12; ++s) {
    for (std::uint32_t s_max = 5; s_max <= 12; ++s_max) {
      if (s <= s_max) saturated = saturated && GuardCoefficient(s, s_max, 5) == 1.0;
    }
  }
  bool zero = true;
  for (std::uint32_t s_max = 0; s_max <= 12; ++s_max) {
    zero = zero && GuardCoefficient(0, s_max, 5) == 0.0;
  }
  return {a == 0.4 && saturated && zero,
          Fmt("(2,5,10) -> %.17g; saturated cells all 1: %s; s=0 all 0: %s", a,
              saturated ? "yes" : "no", zero ? "yes" : "no")};
}

Verdict Criterion6(DeskStreams& desk) {
  double rho_sum = 0.0, gain_sum = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < kDeskSeeds; ++seed) {
    const auto pooled = PooledBucketAuc(desk.Run(Policy::kIU, seed));
    std::vector<double> x, y;
    for (const auto& [bucket, auc] : pooled) {
      x.push_back(bucket);
      y.push_back(auc);
    }
    const double rho = x.size() >= 2 ? SpearmanRho(x, y) : 0.0;
    const double gain = HighBucketAuc(desk.Run(Policy::kFeSAIL, seed), 3) -
                        HighBucketAuc(desk.Run(Policy::kIU, seed), 3);
    rho_sum += rho;
    gain_sum += gain;
    per_seed += Fmt(" [%.2f %+.4f]", rho, gain);
  }
  const double rho = rho_sum / kDeskSeeds;
  const double gain = gain_sum / kDeskSeeds;
  return {rho < -0.5 && gain >= 0.01,
          Fmt("IU rho %.3f (need < -0.5); FeSAIL - IU AUC at buckets >= 3 %+.4f (need >= "
              "0.01); per seed [rho gain]:",
              rho, gain) +
              per_seed};
}

Verdict Criterion7(DeskStreams& desk) {
  std::map<Policy, double> mean;
  for (Policy p : {Policy::kIU, Policy::kRSSSAS, Policy::kRSSSAR, Policy::kFeSAIL}) {
    for (std::uint64_t seed = 0; seed < kDeskSeeds; ++seed) {
      mean[p] += desk.Run(p, seed).mean_auc / kDeskSeeds;
    }
  }
  const double f = mean[Policy::kFeSAIL];
  const bool pass = f >= mean[Policy::kRSSSAS] && f >= mean[Policy::kRSSSAR] &&
                    f > mean[Policy::kIU] && f - mean[Policy::kIU] >= 0.005;
  return {pass, Fmt("mean AUC FeSAIL %.4f, RSS+SAS %.4f, RSS+SAR %.4f, IU %.4f (FeSAIL - IU "
                    "%+.4f, need >= 0.005)",
                    f, mean[Policy::kRSSSAS], mean[Policy::kRSSSAR], mean[Policy::kIU],
                    f - mean[Policy::kIU])};
}

Verdict Criterion8(const fs::path& root) {
  // About one sample per feature and span, and most features go missing for a
  // while, so the RSS candidates outnumber |D_t| once the pool holds two spans.
  SyntheticSpec spec;
  spec.num_spans = 12;
  spec.samples_per_span = 2000;
  spec.num_fields = 5;
  spec.features_per_field = 2000;
  spec.suppress_fraction = 0.9;
  spec.max_gap = 8;
  spec.seed = 8;
  const auto paths = WriteSynthetic(GenerateSynthetic(spec), root / "drop");
  PipelineConfig config;
  config.policy = Policy::kRSSSAS;
  config.embedding_dim = 4;
  config.hidden = {8};
  config.train.max_epochs = 1;
  const RunResult r = RunIncremental(config, paths);

  int binding = 0, below = 0, ordered = 0, with_drops = 0;
  double worst = 0.0;
  for (const SpanMetrics& m : r.spans) {
    if (m.candidate_count > m.reservoir_size) ++binding;
    worst = std::max(worst, m.drop_ratio);
    if (m.drop_ratio < 0.30) ++below;
    // Trend of the per-staleness drop ratio within the span.
    std::vector<double> staleness, ratio;
    std::size_t dropped = 0;
    for (const DropRatioRow& d : r.drop_ratios) {
      if (d.span != m.span) continue;
      staleness.push_back(d.staleness);
      ratio.push_back(d.ratio);
      dropped += d.dropped;
    }
    if (dropped == 0 || staleness.size() < 2) continue;
    ++with_drops;
    if (SpearmanRho(staleness, ratio) >= 0.0) ++ordered;
  }
  const int spans = static_cast<int>(r.spans.size());
  const bool pass = 2 * binding >= spans && below == spans && with_drops > 0 &&
                    ordered >= 0.7 * with_drops;
  return {pass, Fmt("candidates > L in %d/%d spans, worst drop ratio %.4f, below 0.30 in "
                    "%d/%d; drop ratio non-decreasing in staleness (Spearman >= 0) in %d/%d "
                    "spans with drops",
                    binding, spans, worst, below, spans, ordered, with_drops)};
}

bool BitIdentical(const RunResult& a, const RunResult& b) {
  if (a.spans.size() != b.spans.size() || a.buckets.size() != b.buckets.size()) return false;
  for (std::size_t i = 0; i < a.spans.size(); ++i) {
    const SpanMetrics& x = a.spans[i];
    const SpanMetrics& y = b.spans[i];
    if (std::memcmp(&x.auc, &y.auc, sizeof(double)) != 0 ||
        std::memcmp(&x.logloss, &y.logloss, sizeof(double)) != 0 ||
        x.reservoir_size != y.reservoir_size || x.epochs != y.epochs) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.buckets.size(); ++i) {
    if (a.buckets[i].count != b.buckets[i].count || a.buckets[i].auc != b.buckets[i].auc) {
      return false;
    }
  }
  return a.reservoirs == b.reservoirs && Fingerprint(a.model) == Fingerprint(b.model);
}

Verdict Criterion9(const fs::path& root) {
  SyntheticSpec spec;
  spec.num_spans = 6;
  spec.samples_per_span = 800;
  spec.num_fields = 4;
  spec.features_per_field = 60;
  spec.weight_scale = 3.0;
  spec.suppress_fraction = 0.4;
  spec.max_gap = 3;
  spec.seed = 9;
  const auto paths = WriteSynthetic(GenerateSynthetic(spec), root / "algebra");
  int identical = 0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    PipelineConfig base;
    base.embedding_dim = 4;
    base.hidden = {8};
    base.train.max_epochs = 3;
    base.seed = seed;

    PipelineConfig no_guard = base;
    no_guard.policy = Policy::kFeSAIL;
    no_guard.guard.lambda = 0.0;
    PipelineConfig sas = base;
    sas.policy = Policy::kRSSSAS;
    identical += BitIdentical(RunIncremental(no_guard, paths), RunIncremental(sas, paths));

    PipelineConfig unbounded = base;
    unbounded.policy = Policy::kFeSAIL;
    unbounded.capacity = Capacity::Parse("inf");
    PipelineConfig sar = base;
    sar.policy = Policy::kRSSSAR;
    identical += BitIdentical(RunIncremental(unbounded, paths), RunIncremental(sar, paths));
  }
  return {identical == 6, Fmt("%d/6 run pairs bit-identical over 3 seeds", identical)};
}

Verdict Criterion10(DeskStreams& desk) {
  std::vector<SweepCell> cells;
  for (WeightFunction f :
       {WeightFunction::kInverseProportional, WeightFunction::kNegativeExponential}) {
    for (double b : {0.1, 0.5, 1.0, 2.0}) cells.push_back({f, b});
  }
  // A 250-sample reservoir binds from the fourth span on, so the weights
  // actually decide which candidates survive.
  PipelineConfig config = DeskConfig(Policy::kFeSAIL, 0);
  config.capacity = Capacity::Parse("250");
  const SweepResult sweep = RunSweep(config, cells,
                                     SweepCell{WeightFunction::kInverseProportional, 1.0},
                                     desk.Paths(0));
  double min_jaccard = 1.0;
  for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
    for (std::size_t j = 0; j < sweep.rows.size(); ++j) {
      min_jaccard = std::min(min_jaccard, sweep.pairwise_jaccard[i][j]);
    }
  }
  double lo = 1.0, hi = 0.0;
  for (const SweepRow& row : sweep.rows) {
    lo = std::min(lo, row.mean_auc);
    hi = std::max(hi, row.mean_auc);
  }
  return {min_jaccard > 0.8 && hi - lo < 0.005,
          Fmt("8 cells, min pairwise Jaccard %.4f (need > 0.8), mean AUC spread %.4f (need < "
              "0.005)",
              min_jaccard, hi - lo)};
}

}  // namespace
}  // namespace fesail

int main() {
  using namespace fesail;
  spdlog::set_level(spdlog::level::err);
  std::set<int> only;
  if (const char* env = std::getenv("FESAIL_ACCEPTANCE_ONLY")) {
    std::stringstream s(env);
    std::string item;
    while (std::getline(s, item, ',')) only.insert(std::stoi(item));
  }
  TempDir root("acceptance");
  DeskStreams desk(root.path());

  struct Entry {
    int id;
    double limit_s;  // 0: no runtime limit of its own
    std::function<Verdict()> run;
  };
  const std::vector<Entry> entries = {
      {1, 10, Criterion1},
      {2, 60, Criterion2},
      {3, 0, [&] { return Criterion3(root.path()); }},
      {4, 0, Criterion4},
      {5, 0, Criterion5},
      {6, 0, [&] { return Criterion6(desk); }},
      {7, 0, [&] { return Criterion7(desk); }},
      {8, 0, [&] { return Criterion8(root.path()); }},
      {9, 0, [&] { return Criterion9(root.path()); }},
      {10, 0, [&] { return Criterion10(desk); }},
  };

  // Criteria 6 and 7 share runs; the desk budget covers both.
  constexpr double kDeskBudgetS = 15 * 60;
  double desk_seconds = 0.0;
  int failed = 0;
  for (const Entry& e : entries) {
    if (!only.empty() && !only.count(e.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = e.run();
    } catch (const std::exception& ex) {
      v = {false, std::string("exception: ") + ex.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (e.limit_s > 0 && secs >= e.limit_s) {
      v.pass = false;
      v.detail += Fmt("; runtime %.1f s over %.0f s limit", secs, e.limit_s);
    }
    if (e.id == 6 || e.id == 7) {
      desk_seconds += secs;
      if (desk_seconds >= kDeskBudgetS) {
        v.pass = false;
        v.detail += Fmt("; desk runs took %.0f s, over the %.0f s budget", desk_seconds,
                        kDeskBudgetS);
      }
    }
    std::printf("criterion %2d: %s  %s  (%.1f s)\n", e.id, v.pass ? "PASS" : "FAIL",
                v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
