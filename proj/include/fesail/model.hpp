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

#ifndef FESAIL_MODEL_HPP_
#define FESAIL_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fesail/feature_registry.hpp"

namespace fesail {

struct ModelConfig {
  std::size_t num_fields = 0;
  std::size_t embedding_dim = 8;
  std::vector<std::size_t> hidden = {32, 16};
  bool operator==(const ModelConfig&) const = default;
};

// Row-major dense layer: out = weight * in + bias.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

// Embedding&MLP click model plus its adaptive-moment state.
//
// The concatenated field embeddings (num_fields * embedding_dim wide) feed
// ReLU hidden layers and a final linear unit producing the logit. Moments for
// embedding rows are only touched when the row is in a mini-batch.
struct ModelState {
  ModelConfig config;
  std::uint64_t seed = 0;

  std::size_t num_rows = 0;
  std::vector<double> embeddings;  // num_rows x embedding_dim
  std::vector<DenseLayer> layers;  // hidden layers, then the output unit

  std::uint64_t step = 0;
  std::vector<double> embedding_m;
  std::vector<double> embedding_v;
  std::vector<DenseLayer> layer_m;
  std::vector<DenseLayer> layer_v;

  std::span<const double> row(FeatureId id) const;
  std::span<double> row(FeatureId id);
  std::size_t input_width() const { return config.num_fields * config.embedding_dim; }
};

// Throws kConfig for num_fields == 0, embedding_dim == 0, an empty hidden
// list or a zero-width hidden layer. Parameters are drawn from N(0, 1/fan_in)
// with fan_in = embedding_dim for embedding rows.
ModelState InitModel(const ModelConfig& config, std::uint64_t seed,
                     std::size_t num_rows = 0);

// Appends rows up to `new_total`. Each new row is seeded from (seed, row), so
// growth in several steps yields the same table as one step. Throws
// kContract when asked to shrink.
void GrowEmbeddings(ModelState& state, std::size_t new_total);

using Batch = std::span<const Sample* const>;

// Click probabilities; throws kLookup for feature ids beyond num_rows.
std::vector<double> Forward(const ModelState& state, Batch batch);
std::vector<double> Forward(const ModelState& state, std::span<const Sample> batch);

inline constexpr double kProbabilityClamp = 1e-7;

// Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
double CeLoss(std::span<const double> preds, std::span<const int> labels);

struct GuardConfig {
  std::uint32_t eta = 5;
  double lambda = 0.1;
  double epsilon = 1e-8;

  // Throws kConfig unless eta >= 1, lambda >= 0 and epsilon > 0.
  void Validate() const;
  bool operator==(const GuardConfig&) const = default;
};

// min(s, eta) / min(s_max, eta); 0 when s == 0 or s_max == 0.
double GuardCoefficient(std::uint32_t staleness, std::uint32_t s_max,
                        std::uint32_t eta);

// Reference embedding rows for the guard displacement.
class AnchorTable {
 public:
  void Set(FeatureId id, std::span<const double> values);
  // nullptr when the feature has no anchor.
  const std::vector<double>* Find(FeatureId id) const;
  std::size_t size() const { return rows_.size(); }
  void Clear() { rows_.clear(); }

 private:
  std::unordered_map<FeatureId, std::vector<double>> rows_;
};

// Snapshot of the current rows of `ids`.
AnchorTable SnapshotAnchors(const ModelState& state, std::span<const FeatureId> ids);

// sum_i coef_i * sqrt(||e_i - anchor_i||^2 + epsilon) over the distinct
// features in `batch_features` that are stale (s >= 1). Throws kState if a
// stale feature has no anchor.
double GuardLoss(std::span<const FeatureId> batch_features, const StalenessTable& table,
                 std::uint32_t s_max, const AnchorTable& anchors,
                 const ModelState& state, const GuardConfig& config);

// Everything the guard needs for one mini-batch.
struct GuardTerm {
  const StalenessTable* table = nullptr;
  std::uint32_t s_max = 0;
  GuardConfig config;
  const AnchorTable* anchors = nullptr;
};

struct LossBreakdown {
  double total = 0.0;
  double ce = 0.0;
  double guard = 0.0;
};

struct Gradients {
  std::vector<FeatureId> rows;  // distinct batch features, ascending
  std::vector<double> row_grads;  // rows.size() x embedding_dim
  std::vector<DenseLayer> layers;
};

// Distinct features of a batch, ascending.
std::vector<FeatureId> BatchFeatures(Batch batch);

// Mean CE over the batch plus lambda * guard (guard skipped when `guard` is
// null or lambda == 0). Fills `grads` when non-null.
LossBreakdown ComputeLoss(const ModelState& state, Batch batch, const GuardTerm* guard,
                          Gradients* grads);

// Remembers each embedding row as it was before its latest update, so the
// guard can measure the embedding change between consecutive mini-batches
// that touch the row. A row not yet updated anchors to its current value.
class UpdateTracker {
 public:
  void Reset() { previous_.Clear(); }
  AnchorTable AnchorsFor(const ModelState& state, std::span<const FeatureId> ids) const;
  void Record(const ModelState& state, std::span<const FeatureId> ids);

 private:
  AnchorTable previous_;
};

// Guard inputs for TrainStep; the anchors come from the tracker.
struct GuardContext {
  const StalenessTable* table = nullptr;
  std::uint32_t s_max = 0;
  GuardConfig config;
  UpdateTracker* tracker = nullptr;
};

// One adaptive-moment step on CE + lambda * guard. Only embedding rows in the
// batch change. Throws kContract on an empty batch and kNumeric when the
// loss or a gradient is not finite (state untouched in that case).
LossBreakdown TrainStep(ModelState& state, Batch batch, const GuardContext* guard,
                        const AdamConfig& adam);

// Versioned binary checkpoint; LoadCheckpoint restores bit-exact state.
void SaveCheckpoint(const ModelState& state, const std::filesystem::path& path);
ModelState LoadCheckpoint(const std::filesystem::path& path);
std::string SerializeModel(const ModelState& state);
ModelState DeserializeModel(const std::string& bytes);

// FNV-1a over the serialized state.
std::uint64_t Fingerprint(const ModelState& state);

}  // namespace fesail

#endif  // FESAIL_MODEL_HPP_
