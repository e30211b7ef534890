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

#ifndef FESAIL_PIPELINE_HPP_
#define FESAIL_PIPELINE_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fesail/feature_registry.hpp"
#include "fesail/model.hpp"
#include "fesail/sampler.hpp"
#include "fesail/stream.hpp"

namespace fesail {

// Replay policies. FeSAIL = RSS candidates + greedy capacity-bound selection
// + guard regularizer; the others drop one or more of those pieces.
enum class Policy { kIU, kRS, kFSS, kRSS, kRSSSAR, kRSSSAS, kFeSAIL };

std::string_view ToString(Policy policy);
// Throws kConfig listing the valid names.
Policy ParsePolicy(std::string_view name);
const std::vector<Policy>& AllPolicies();
bool UsesGuard(Policy policy);
bool UsesGreedySelection(Policy policy);

// Reservoir size limit L.
struct Capacity {
  enum class Mode { kMatchSpan, kFixed, kUnbounded };
  Mode mode = Mode::kMatchSpan;
  std::size_t value = 0;

  std::size_t Resolve(std::size_t span_size) const;
  // "match", "inf" or a non-negative integer.
  static Capacity Parse(std::string_view text);
  std::string ToString() const;
  bool operator==(const Capacity&) const = default;
};

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 10;
  std::size_t patience = 2;
  double validation_fraction = 0.1;
  bool operator==(const TrainConfig&) const = default;
};

struct PipelineConfig {
  Policy policy = Policy::kFeSAIL;
  Capacity capacity;
  WeightFunction func = WeightFunction::kInverseProportional;
  double bias = 1.0;
  GuardConfig guard;
  std::size_t embedding_dim = 8;
  std::vector<std::size_t> hidden = {32, 16};
  TrainConfig train;
  std::uint32_t bucket_cap = 10;
  // IU only: refill the reservoir with the most recent history up to the
  // size the full-stale policy would replay.
  bool iu_supplement = false;
  std::uint64_t seed = 0;

  // Throws kConfig on out-of-range values.
  void Validate() const;
  bool operator==(const PipelineConfig&) const = default;
};

// Identity of a sample: (span index, row within span).
struct SampleKey {
  std::uint32_t span = 0;
  std::uint32_t row = 0;
  auto operator<=>(const SampleKey&) const = default;
};

struct SpanMetrics {
  std::size_t span = 0;
  double auc = 0.0;
  double logloss = 0.0;
  std::size_t reservoir_size = 0;
  std::size_t candidate_count = 0;
  double covered_weight = 0.0;
  double drop_ratio = 0.0;
  std::uint32_t s_max = 0;
  std::size_t epochs = 0;
  double sample_ms = 0.0;
  double train_ms = 0.0;
};

struct BucketRow {
  std::size_t span = 0;
  std::uint32_t bucket = 0;
  std::optional<double> auc;  // absent when the bucket holds one class
  std::size_t count = 0;
};

struct DropRatioRow {
  std::size_t span = 0;
  std::uint32_t staleness = 0;
  std::size_t total = 0;
  std::size_t dropped = 0;
  double ratio = 0.0;
};

struct SelectionLogRow {
  std::size_t span = 0;
  std::size_t iteration = 0;
  std::size_t candidate = 0;
  double marginal = 0.0;
};

struct DropRatioReport {
  double overall = 0.0;
  std::size_t total = 0;
  std::size_t dropped = 0;
  // staleness -> (distinct candidate stale features, of which uncovered)
  std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> by_staleness;
};

// Fraction of the distinct stale features in `candidates` that none of the
// selected candidates covers, overall and per staleness value.
DropRatioReport ComputeDropRatio(const CandidateSet& candidates,
                                 std::span<const std::size_t> selected,
                                 const StalenessTable& table);
// Same, given the covered feature set directly (sorted, distinct).
DropRatioReport ComputeDropRatioCovered(const CandidateSet& candidates,
                                        std::span<const FeatureId> covered,
                                        const StalenessTable& table);

// Assigns each test sample to bucket min(cap, max feature staleness) and
// reports AUC per bucket. Features unknown to the table count as fresh.
std::vector<BucketRow> StalenessBucketedEval(const ModelState& model,
                                             const SpanDataset& test_span,
                                             const StalenessTable& table,
                                             std::uint32_t bucket_cap);

struct RunResult {
  PipelineConfig config;
  std::vector<SpanMetrics> spans;  // incremental spans only
  std::vector<BucketRow> buckets;
  std::vector<DropRatioRow> drop_ratios;
  std::vector<SelectionLogRow> selection_log;
  // Reservoir R_t of each incremental span, sorted.
  std::vector<std::vector<SampleKey>> reservoirs;
  ModelState model;
  StalenessTable staleness;
  FeatureDictionary dictionary;
  double mean_auc = 0.0;
  double mean_logloss = 0.0;
};

// Runs the span loop: pretrain on D_0, then for each t in [1, T-2] update
// staleness with F(D_t), build R_t from R_{t-1} u D_{t-1}, train on
// R_t u D_t and evaluate on D_{t+1}. Throws kInput for fewer than three spans
// or out-of-order files.
RunResult RunIncremental(const PipelineConfig& config,
                         const std::vector<std::filesystem::path>& span_paths);

struct SweepCell {
  WeightFunction func = WeightFunction::kInverseProportional;
  double bias = 1.0;
  bool operator==(const SweepCell&) const = default;
};

std::string ToString(const SweepCell& cell);

struct SweepRow {
  SweepCell cell;
  double mean_auc = 0.0;
  double jaccard_vs_control = 0.0;
  bool is_control = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t control_index = 0;
  // Mean over spans of the reservoir Jaccard similarity for each cell pair.
  std::vector<std::vector<double>> pairwise_jaccard;
  std::vector<std::string> warnings;
};

// Mean over incremental spans of the Jaccard similarity of two runs'
// reservoirs.
double ReservoirJaccard(const RunResult& a, const RunResult& b);

// Runs `base` once per distinct cell. Duplicate cells are dropped with a
// warning. The control is `control` when given, otherwise the cell with the
// highest mean AUC. Throws kConfig for an empty grid.
SweepResult RunSweep(const PipelineConfig& base, const std::vector<SweepCell>& cells,
                     std::optional<SweepCell> control,
                     const std::vector<std::filesystem::path>& span_paths);

}  // namespace fesail

#endif  // FESAIL_PIPELINE_HPP_
