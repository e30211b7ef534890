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

#include "fesail/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "fesail/error.hpp"
#include "fesail/metrics.hpp"
#include "fesail/rng.hpp"

namespace fesail {
namespace {

namespace fs = std::filesystem;

struct PolicyInfo {
  Policy policy;
  std::string_view name;
};

constexpr PolicyInfo kPolicies[] = {
    {Policy::kIU, "IU"},           {Policy::kRS, "RS"},
    {Policy::kFSS, "FSS"},         {Policy::kRSS, "RSS"},
    {Policy::kRSSSAR, "RSS+SAR"},  {Policy::kRSSSAS, "RSS+SAS"},
    {Policy::kFeSAIL, "FeSAIL"},
};

double MillisSince(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

std::size_t NumFieldsOf(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kInput, "cannot open span file " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto commas = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    if (commas == 0) {
      throw Error(ErrorKind::kParse, path.string() + ":1: expected label and tokens");
    }
    return commas;
  }
  throw Error(ErrorKind::kParse, path.string() + ": empty span");
}

// Spans are read on first use so the loop never touches D_{t+1} before it
// evaluates on it.
class SpanStore {
 public:
  SpanStore(const std::vector<fs::path>& paths, FeatureDictionary& dict, ModelState& model)
      : paths_(paths), dict_(dict), model_(model), spans_(paths.size()) {}

  const SpanDataset& Get(std::size_t t) {
    if (!spans_[t]) {
      spans_[t] = LoadSpan(paths_[t], dict_, t);
      GrowEmbeddings(model_, dict_.size());
    }
    return *spans_[t];
  }

  const Sample& At(SampleKey key) { return Get(key.span).samples[key.row]; }

 private:
  const std::vector<fs::path>& paths_;
  FeatureDictionary& dict_;
  ModelState& model_;
  std::vector<std::optional<SpanDataset>> spans_;
};

std::vector<SampleKey> KeysOf(const SpanDataset& span) {
  std::vector<SampleKey> keys(span.samples.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    keys[i] = {static_cast<std::uint32_t>(span.span_index), static_cast<std::uint32_t>(i)};
  }
  return keys;
}

bool HasStaleFeature(const Sample& s, std::span<const FeatureId> current) {
  return std::any_of(s.features.begin(), s.features.end(), [&](FeatureId f) {
    return !std::binary_search(current.begin(), current.end(), f);
  });
}

double EvalLogLoss(const ModelState& model, const std::vector<const Sample*>& samples) {
  const std::vector<double> preds = Forward(model, Batch(samples));
  std::vector<int> labels;
  labels.reserve(samples.size());
  for (const Sample* s : samples) labels.push_back(s->label);
  return CeLoss(preds, labels);
}

// Trains on `data` with a seeded shuffle, a held-out tail for validation and
// patience-based early stopping; the best validation state is kept. Returns
// the number of epochs run.
std::size_t TrainSpan(ModelState& model, std::vector<const Sample*> data,
                      const GuardContext* guard, const TrainConfig& train,
                      std::uint64_t seed, std::size_t span) {
  if (data.empty()) return 0;
  Rng rng = MakeRng(seed, SeedStream::kShuffle, span);
  std::shuffle(data.begin(), data.end(), rng);
  const auto holdout = static_cast<std::size_t>(
      std::floor(train.validation_fraction * static_cast<double>(data.size())));
  const std::size_t n_train = data.size() - holdout;
  const std::vector<const Sample*> validation(data.begin() + n_train, data.end());
  data.resize(n_train);

  double best_loss = std::numeric_limits<double>::infinity();
  std::optional<ModelState> best_state;
  std::size_t bad_epochs = 0;
  std::size_t epochs = 0;
  for (std::size_t epoch = 0; epoch < train.max_epochs; ++epoch) {
    std::shuffle(data.begin(), data.end(), rng);
    for (std::size_t start = 0; start < data.size(); start += train.batch_size) {
      const std::size_t len = std::min(train.batch_size, data.size() - start);
      TrainStep(model, Batch(data.data() + start, len), guard, train.adam);
    }
    ++epochs;
    if (validation.empty()) continue;
    const double loss = EvalLogLoss(model, validation);
    spdlog::debug("span {} epoch {} validation logloss {:.6f}", span, epoch, loss);
    if (loss < best_loss) {
      best_loss = loss;
      best_state = model;
      bad_epochs = 0;
    } else if (++bad_epochs >= train.patience) {
      break;
    }
  }
  if (best_state) model = std::move(*best_state);
  return epochs;
}

std::vector<std::size_t> SortedIndices(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

std::string_view ToString(Policy policy) {
  for (const PolicyInfo& info : kPolicies) {
    if (info.policy == policy) return info.name;
  }
  return "unknown";
}

Policy ParsePolicy(std::string_view name) {
  for (const PolicyInfo& info : kPolicies) {
    if (info.name == name) return info.policy;
  }
  std::string valid;
  for (const PolicyInfo& info : kPolicies) {
    if (!valid.empty()) valid += ", ";
    valid += info.name;
  }
  throw Error(ErrorKind::kConfig,
              "unknown policy '" + std::string(name) + "'; valid policies: " + valid);
}

const std::vector<Policy>& AllPolicies() {
  static const std::vector<Policy> all = [] {
    std::vector<Policy> v;
    for (const PolicyInfo& info : kPolicies) v.push_back(info.policy);
    return v;
  }();
  return all;
}

bool UsesGuard(Policy policy) {
  return policy == Policy::kRSSSAR || policy == Policy::kFeSAIL;
}

bool UsesGreedySelection(Policy policy) {
  return policy == Policy::kRSSSAS || policy == Policy::kFeSAIL;
}

std::size_t Capacity::Resolve(std::size_t span_size) const {
  switch (mode) {
    case Mode::kMatchSpan: return span_size;
    case Mode::kFixed: return value;
    case Mode::kUnbounded: return kUnboundedCapacity;
  }
  return span_size;
}

Capacity Capacity::Parse(std::string_view text) {
  if (text == "match") return {Mode::kMatchSpan, 0};
  if (text == "inf") return {Mode::kUnbounded, 0};
  std::size_t value = 0;
  const std::string s(text);
  std::size_t used = 0;
  try {
    if (!s.empty() && s[0] != '-') value = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw Error(ErrorKind::kConfig,
                "capacity must be 'match', 'inf' or a non-negative integer, got '" + s + "'");
  }
  return {Mode::kFixed, value};
}

std::string Capacity::ToString() const {
  switch (mode) {
    case Mode::kMatchSpan: return "match";
    case Mode::kUnbounded: return "inf";
    case Mode::kFixed: return std::to_string(value);
  }
  return "match";
}

void PipelineConfig::Validate() const {
  guard.Validate();
  if (embedding_dim == 0) throw Error(ErrorKind::kConfig, "embedding_dim must be >= 1");
  if (hidden.empty()) throw Error(ErrorKind::kConfig, "hidden layer list is empty");
  for (std::size_t h : hidden) {
    if (h == 0) throw Error(ErrorKind::kConfig, "hidden layer width must be >= 1");
  }
  if (train.batch_size == 0) throw Error(ErrorKind::kConfig, "batch_size must be >= 1");
  if (train.max_epochs == 0) throw Error(ErrorKind::kConfig, "max_epochs must be >= 1");
  if (train.patience == 0) throw Error(ErrorKind::kConfig, "patience must be >= 1");
  if (!(train.validation_fraction >= 0.0 && train.validation_fraction < 1.0)) {
    throw Error(ErrorKind::kConfig, "validation_fraction must lie in [0, 1)");
  }
  if (!(train.adam.learning_rate > 0.0)) {
    throw Error(ErrorKind::kConfig, "learning_rate must be > 0");
  }
  if (!std::isfinite(bias)) throw Error(ErrorKind::kConfig, "bias must be finite");
}

DropRatioReport ComputeDropRatioCovered(const CandidateSet& candidates,
                                        std::span<const FeatureId> covered,
                                        const StalenessTable& table) {
  std::vector<FeatureId> universe;
  for (const Candidate& c : candidates) {
    universe.insert(universe.end(), c.stale.begin(), c.stale.end());
  }
  std::sort(universe.begin(), universe.end());
  universe.erase(std::unique(universe.begin(), universe.end()), universe.end());

  DropRatioReport report;
  for (FeatureId f : universe) {
    const bool kept = std::binary_search(covered.begin(), covered.end(), f);
    auto& [total, dropped] = report.by_staleness[table.staleness(f)];
    ++total;
    ++report.total;
    if (!kept) {
      ++dropped;
      ++report.dropped;
    }
  }
  report.overall = report.total == 0
                       ? 0.0
                       : static_cast<double>(report.dropped) / static_cast<double>(report.total);
  return report;
}

DropRatioReport ComputeDropRatio(const CandidateSet& candidates,
                                 std::span<const std::size_t> selected,
                                 const StalenessTable& table) {
  std::vector<FeatureId> covered;
  for (std::size_t i : selected) {
    const Candidate& c = candidates.at(i);
    covered.insert(covered.end(), c.stale.begin(), c.stale.end());
  }
  std::sort(covered.begin(), covered.end());
  covered.erase(std::unique(covered.begin(), covered.end()), covered.end());
  return ComputeDropRatioCovered(candidates, covered, table);
}

std::vector<BucketRow> StalenessBucketedEval(const ModelState& model,
                                             const SpanDataset& test_span,
                                             const StalenessTable& table,
                                             std::uint32_t bucket_cap) {
  std::map<std::uint32_t, std::pair<std::vector<double>, std::vector<int>>> groups;
  const std::vector<double> preds = Forward(model, std::span<const Sample>(test_span.samples));
  for (std::size_t i = 0; i < test_span.samples.size(); ++i) {
    const Sample& s = test_span.samples[i];
    std::uint32_t bucket = 0;
    for (FeatureId f : s.features) bucket = std::max(bucket, table.staleness_or_zero(f));
    bucket = std::min(bucket, bucket_cap);
    groups[bucket].first.push_back(preds[i]);
    groups[bucket].second.push_back(s.label);
  }
  std::vector<BucketRow> rows;
  for (const auto& [bucket, group] : groups) {
    BucketRow row;
    row.span = test_span.span_index;
    row.bucket = bucket;
    row.count = group.first.size();
    const auto positives = std::count(group.second.begin(), group.second.end(), 1);
    if (positives > 0 && static_cast<std::size_t>(positives) < group.second.size()) {
      row.auc = Auc(group.first, group.second);
    }
    rows.push_back(row);
  }
  return rows;
}

RunResult RunIncremental(const PipelineConfig& config,
                         const std::vector<fs::path>& span_paths) {
  config.Validate();
  if (span_paths.size() < 3) {
    throw Error(ErrorKind::kInput, "need at least 3 spans (pretrain, incremental, test), got " +
                                       std::to_string(span_paths.size()));
  }
  ValidateSpanOrder(span_paths);

  RunResult result;
  result.config = config;
  const std::size_t num_fields = NumFieldsOf(span_paths[0]);
  result.dictionary = FeatureDictionary(num_fields);
  result.model = InitModel({num_fields, config.embedding_dim, config.hidden}, config.seed);
  FeatureDictionary& dict = result.dictionary;
  ModelState& model = result.model;
  StalenessTable& table = result.staleness;
  SpanStore store(span_paths, dict, model);

  // Pretraining on D_0; R_0 = D_0.
  const SpanDataset& d0 = store.Get(0);
  table.Update(d0.feature_set);
  {
    std::vector<const Sample*> data;
    for (const Sample& s : d0.samples) data.push_back(&s);
    const std::size_t epochs = TrainSpan(model, data, nullptr, config.train, config.seed, 0);
    spdlog::debug("pretrained on span 0 ({} samples, {} epochs)", d0.samples.size(), epochs);
  }
  std::vector<SampleKey> reservoir = KeysOf(d0);

  UpdateTracker tracker;
  const std::size_t last = span_paths.size() - 1;
  for (std::size_t t = 1; t < last; ++t) {
    const SpanDataset& current = store.Get(t);
    const auto sample_start = std::chrono::steady_clock::now();
    table.Update(current.feature_set);
    const FeatureWeights weights = ComputeWeights(table, config.func, config.bias);

    // Pool R_{t-1} u D_{t-1}, deduplicated by sample identity.
    std::vector<SampleKey> pool = reservoir;
    const std::vector<SampleKey> previous_keys = KeysOf(store.Get(t - 1));
    pool.insert(pool.end(), previous_keys.begin(), previous_keys.end());
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    std::vector<const Sample*> pool_samples;
    pool_samples.reserve(pool.size());
    for (SampleKey key : pool) pool_samples.push_back(&store.At(key));

    std::vector<Sample> pool_copy;
    pool_copy.reserve(pool_samples.size());
    for (const Sample* s : pool_samples) pool_copy.push_back(*s);
    const CandidateSet candidates = RssFilter(pool_copy, current.feature_set);

    const std::size_t capacity = config.capacity.Resolve(current.samples.size());
    std::vector<SampleKey> next;
    switch (config.policy) {
      case Policy::kIU: {
        if (config.iu_supplement) {
          std::size_t target = 0;
          for (std::size_t h = 0; h < t; ++h) {
            for (const Sample& s : store.Get(h).samples) {
              target += HasStaleFeature(s, current.feature_set) ? 1 : 0;
            }
          }
          for (std::size_t h = t; h-- > 0 && next.size() < target;) {
            const std::vector<SampleKey> keys = KeysOf(store.Get(h));
            for (std::size_t r = keys.size(); r-- > 0 && next.size() < target;) {
              next.push_back(keys[r]);
            }
          }
        }
        break;
      }
      case Policy::kRS: {
        for (std::size_t i : RandomSample(pool.size(), capacity,
                                          DeriveSeed(config.seed, SeedStream::kRandomSample, t))) {
          next.push_back(pool[i]);
        }
        break;
      }
      case Policy::kFSS: {
        for (std::size_t h = 0; h < t; ++h) {
          const SpanDataset& span = store.Get(h);
          for (std::size_t r = 0; r < span.samples.size(); ++r) {
            if (HasStaleFeature(span.samples[r], current.feature_set)) {
              next.push_back({static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(r)});
            }
          }
        }
        break;
      }
      case Policy::kRSS:
      case Policy::kRSSSAR: {
        for (const Candidate& c : candidates) next.push_back(pool[c.pool_index]);
        break;
      }
      case Policy::kRSSSAS:
      case Policy::kFeSAIL: {
        const GreedyResult greedy = SasGreedyNeighbor(candidates, weights, capacity);
        for (std::size_t i = 0; i < greedy.order.size(); ++i) {
          result.selection_log.push_back({t, i, greedy.order[i], greedy.marginal[i]});
        }
        for (std::size_t c : SortedIndices(greedy.order)) {
          next.push_back(pool[candidates[c].pool_index]);
        }
        break;
      }
    }
    std::sort(next.begin(), next.end());
    reservoir = std::move(next);

    // Coverage bookkeeping over the stale features the reservoir carries.
    std::vector<FeatureId> covered;
    for (SampleKey key : reservoir) {
      for (FeatureId f : store.At(key).features) {
        if (!std::binary_search(current.feature_set.begin(), current.feature_set.end(), f)) {
          covered.push_back(f);
        }
      }
    }
    std::sort(covered.begin(), covered.end());
    covered.erase(std::unique(covered.begin(), covered.end()), covered.end());
    const DropRatioReport drop = ComputeDropRatioCovered(candidates, covered, table);

    SpanMetrics metrics;
    metrics.span = t;
    metrics.reservoir_size = reservoir.size();
    metrics.candidate_count = candidates.size();
    for (FeatureId f : covered) metrics.covered_weight += weights[f.value];
    metrics.drop_ratio = drop.overall;
    for (const auto& [s, counts] : drop.by_staleness) {
      const double ratio = counts.first == 0 ? 0.0
                                             : static_cast<double>(counts.second) /
                                                   static_cast<double>(counts.first);
      result.drop_ratios.push_back({t, s, counts.first, counts.second, ratio});
    }
    metrics.sample_ms = MillisSince(sample_start);

    // Train on R_t u D_t.
    const auto train_start = std::chrono::steady_clock::now();
    std::vector<const Sample*> data;
    data.reserve(reservoir.size() + current.samples.size());
    for (SampleKey key : reservoir) data.push_back(&store.At(key));
    for (const Sample& s : current.samples) data.push_back(&s);
    std::uint32_t s_max = 0;
    for (SampleKey key : reservoir) {
      for (FeatureId f : store.At(key).features) s_max = std::max(s_max, table.staleness(f));
    }
    metrics.s_max = s_max;
    tracker.Reset();
    GuardContext guard{&table, s_max, config.guard, &tracker};
    const bool use_guard = UsesGuard(config.policy) && config.guard.lambda != 0.0;
    metrics.epochs = TrainSpan(model, std::move(data), use_guard ? &guard : nullptr,
                               config.train, config.seed, t);
    metrics.train_ms = MillisSince(train_start);

    // Evaluate on D_{t+1} with the staleness frozen at span t.
    const SpanDataset& test = store.Get(t + 1);
    const std::vector<double> preds = Forward(model, std::span<const Sample>(test.samples));
    std::vector<int> labels;
    labels.reserve(test.samples.size());
    for (const Sample& s : test.samples) labels.push_back(s.label);
    metrics.logloss = CeLoss(preds, labels);
    try {
      metrics.auc = Auc(preds, labels);
    } catch (const Error& e) {
      spdlog::warn("span {}: {}", t + 1, e.what());
      metrics.auc = std::numeric_limits<double>::quiet_NaN();
    }
    for (BucketRow row : StalenessBucketedEval(model, test, table, config.bucket_cap)) {
      row.span = t;
      result.buckets.push_back(row);
    }
    spdlog::debug("span {} policy {}: reservoir {} candidates {} auc {:.4f} logloss {:.4f}", t,
                  ToString(config.policy), metrics.reservoir_size, metrics.candidate_count,
                  metrics.auc, metrics.logloss);
    result.spans.push_back(metrics);
    result.reservoirs.push_back(reservoir);
  }

  double auc_sum = 0.0, loss_sum = 0.0;
  std::size_t auc_n = 0;
  for (const SpanMetrics& m : result.spans) {
    if (std::isfinite(m.auc)) {
      auc_sum += m.auc;
      ++auc_n;
    }
    loss_sum += m.logloss;
  }
  result.mean_auc = auc_n == 0 ? std::numeric_limits<double>::quiet_NaN()
                               : auc_sum / static_cast<double>(auc_n);
  result.mean_logloss = loss_sum / static_cast<double>(result.spans.size());
  return result;
}

std::string ToString(const SweepCell& cell) {
  std::ostringstream out;
  out << ToString(cell.func) << ":" << cell.bias;
  return out.str();
}

double ReservoirJaccard(const RunResult& a, const RunResult& b) {
  const std::size_t n = std::min(a.reservoirs.size(), b.reservoirs.size());
  if (n == 0) return 1.0;
  double sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) sum += Jaccard(a.reservoirs[t], b.reservoirs[t]);
  return sum / static_cast<double>(n);
}

SweepResult RunSweep(const PipelineConfig& base, const std::vector<SweepCell>& cells,
                     std::optional<SweepCell> control,
                     const std::vector<fs::path>& span_paths) {
  if (cells.empty()) throw Error(ErrorKind::kConfig, "sweep grid is empty");
  SweepResult sweep;
  std::vector<SweepCell> unique;
  for (const SweepCell& cell : cells) {
    if (std::find(unique.begin(), unique.end(), cell) != unique.end()) {
      sweep.warnings.push_back("duplicate grid cell " + ToString(cell) + " dropped");
      spdlog::warn("{}", sweep.warnings.back());
      continue;
    }
    unique.push_back(cell);
  }
  if (control && std::find(unique.begin(), unique.end(), *control) == unique.end()) {
    throw Error(ErrorKind::kConfig, "control cell " + ToString(*control) + " is not in the grid");
  }

  std::vector<RunResult> runs;
  for (const SweepCell& cell : unique) {
    PipelineConfig config = base;
    config.func = cell.func;
    config.bias = cell.bias;
    spdlog::info("sweep cell {}", ToString(cell));
    runs.push_back(RunIncremental(config, span_paths));
  }

  if (control) {
    sweep.control_index = static_cast<std::size_t>(
        std::find(unique.begin(), unique.end(), *control) - unique.begin());
  } else {
    for (std::size_t i = 1; i < runs.size(); ++i) {
      if (runs[i].mean_auc > runs[sweep.control_index].mean_auc) sweep.control_index = i;
    }
  }
  sweep.pairwise_jaccard.assign(runs.size(), std::vector<double>(runs.size(), 1.0));
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      const double js = ReservoirJaccard(runs[i], runs[j]);
      sweep.pairwise_jaccard[i][j] = js;
      sweep.pairwise_jaccard[j][i] = js;
    }
  }
  for (std::size_t i = 0; i < runs.size(); ++i) {
    sweep.rows.push_back({unique[i], runs[i].mean_auc,
                          sweep.pairwise_jaccard[i][sweep.control_index],
                          i == sweep.control_index});
  }
  return sweep;
}

}  // namespace fesail
