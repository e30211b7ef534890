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

#include "fesail/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "fesail/error.hpp"
#include "fesail/rng.hpp"

namespace fesail {
namespace {

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

DenseLayer ZerosLike(const DenseLayer& layer) {
  DenseLayer z;
  z.in = layer.in;
  z.out = layer.out;
  z.weight.assign(layer.weight.size(), 0.0);
  z.bias.assign(layer.bias.size(), 0.0);
  return z;
}

void InitRow(std::span<double> row, std::uint64_t seed, std::size_t index) {
  Rng rng = MakeRng(seed, SeedStream::kEmbeddingRow, index);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(row.size())));
  for (double& v : row) v = dist(rng);
}

void CheckIds(const ModelState& state, const Sample& sample) {
  if (sample.features.size() != state.config.num_fields) {
    throw Error(ErrorKind::kShape, "sample has " + std::to_string(sample.features.size()) +
                                       " features, model expects " +
                                       std::to_string(state.config.num_fields));
  }
  for (FeatureId f : sample.features) {
    if (f.value >= state.num_rows) {
      throw Error(ErrorKind::kLookup, "feature id " + std::to_string(f.value) +
                                          " beyond embedding rows " +
                                          std::to_string(state.num_rows));
    }
  }
}

// Forward pass of one sample, keeping every layer input for backprop.
// acts[l] is the input of layer l; returns the logit.
double ForwardOne(const ModelState& state, const Sample& sample,
                  std::vector<std::vector<double>>& acts) {
  const std::size_t k = state.config.embedding_dim;
  acts.resize(state.layers.size());
  std::vector<double>& x = acts[0];
  x.resize(state.input_width());
  for (std::size_t f = 0; f < sample.features.size(); ++f) {
    std::span<const double> e = state.row(sample.features[f]);
    std::copy(e.begin(), e.end(), x.begin() + f * k);
  }
  double logit = 0.0;
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    const DenseLayer& layer = state.layers[l];
    const std::vector<double>& in = acts[l];
    const bool last = l + 1 == state.layers.size();
    std::vector<double>* out = last ? nullptr : &acts[l + 1];
    if (out != nullptr) out->resize(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* w = layer.weight.data() + o * layer.in;
      double z = layer.bias[o];
      for (std::size_t i = 0; i < layer.in; ++i) z += w[i] * in[i];
      if (last) {
        logit = z;
      } else {
        (*out)[o] = z < 0.0 ? 0.0 : z;  // NaN passes through
      }
    }
  }
  return logit;
}

// Adds the guard value and, when `row_grads` is set, lambda-scaled gradients.
double AccumulateGuard(std::span<const FeatureId> rows, const ModelState& state,
                       const StalenessTable& table, std::uint32_t s_max,
                       const AnchorTable& anchors, const GuardConfig& config,
                       std::vector<double>* row_grads) {
  const std::size_t k = state.config.embedding_dim;
  double total = 0.0;
  std::vector<double> diff(k);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const FeatureId id = rows[r];
    const double coef = GuardCoefficient(table.staleness(id), s_max, config.eta);
    if (coef == 0.0) continue;
    const std::vector<double>* anchor = anchors.Find(id);
    if (anchor == nullptr || anchor->size() != k) {
      throw Error(ErrorKind::kState,
                  "no anchor for stale batch feature " + std::to_string(id.value));
    }
    std::span<const double> e = state.row(id);
    double sq = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      diff[j] = e[j] - (*anchor)[j];
      sq += diff[j] * diff[j];
    }
    const double norm = std::sqrt(sq + config.epsilon);
    total += coef * norm;
    if (row_grads != nullptr) {
      const double scale = config.lambda * coef / norm;
      for (std::size_t j = 0; j < k; ++j) (*row_grads)[r * k + j] += scale * diff[j];
    }
  }
  return total;
}

void AdamUpdate(std::span<double> param, std::span<double> m, std::span<double> v,
                std::span<const double> grad, const AdamConfig& adam, double bc1,
                double bc2) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * grad[i];
    v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * grad[i] * grad[i];
    param[i] -= adam.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + adam.epsilon);
  }
}

bool AllFinite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double x) { return std::isfinite(x); });
}

// Little binary writer/reader for checkpoints.
class Writer {
 public:
  template <typename T>
  void Put(const T& value) {
    out_.append(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void PutVector(const std::vector<double>& v) {
    Put<std::uint64_t>(v.size());
    out_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  template <typename T>
  T Get() {
    Need(sizeof(T));
    T value;
    std::memcpy(&value, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::vector<double> GetVector() {
    const auto n = Get<std::uint64_t>();
    Need(n * sizeof(double));
    std::vector<double> v(n);
    std::memcpy(v.data(), in_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void Need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw Error(ErrorKind::kParse, "truncated checkpoint");
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[8] = {'F', 'E', 'S', 'A', 'I', 'L', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

void PutLayer(Writer& w, const DenseLayer& layer) {
  w.Put<std::uint64_t>(layer.in);
  w.Put<std::uint64_t>(layer.out);
  w.PutVector(layer.weight);
  w.PutVector(layer.bias);
}

DenseLayer GetLayer(Reader& r) {
  DenseLayer layer;
  layer.in = r.Get<std::uint64_t>();
  layer.out = r.Get<std::uint64_t>();
  layer.weight = r.GetVector();
  layer.bias = r.GetVector();
  if (layer.weight.size() != layer.in * layer.out || layer.bias.size() != layer.out) {
    throw Error(ErrorKind::kParse, "checkpoint layer shape mismatch");
  }
  return layer;
}

}  // namespace

std::span<const double> ModelState::row(FeatureId id) const {
  const std::size_t k = config.embedding_dim;
  return {embeddings.data() + static_cast<std::size_t>(id.value) * k, k};
}

std::span<double> ModelState::row(FeatureId id) {
  const std::size_t k = config.embedding_dim;
  return {embeddings.data() + static_cast<std::size_t>(id.value) * k, k};
}

ModelState InitModel(const ModelConfig& config, std::uint64_t seed, std::size_t num_rows) {
  if (config.num_fields == 0) throw Error(ErrorKind::kConfig, "model needs at least one field");
  if (config.embedding_dim == 0) throw Error(ErrorKind::kConfig, "embedding_dim must be >= 1");
  if (config.hidden.empty()) throw Error(ErrorKind::kConfig, "hidden layer list is empty");
  for (std::size_t h : config.hidden) {
    if (h == 0) throw Error(ErrorKind::kConfig, "hidden layer width must be >= 1");
  }
  ModelState state;
  state.config = config;
  state.seed = seed;

  Rng rng = MakeRng(seed, SeedStream::kInit);
  std::size_t in = state.input_width();
  std::vector<std::size_t> widths = config.hidden;
  widths.push_back(1);
  for (std::size_t out : widths) {
    DenseLayer layer;
    layer.in = in;
    layer.out = out;
    layer.weight.resize(in * out);
    layer.bias.assign(out, 0.0);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
    for (double& w : layer.weight) w = dist(rng);
    state.layer_m.push_back(ZerosLike(layer));
    state.layer_v.push_back(ZerosLike(layer));
    state.layers.push_back(std::move(layer));
    in = out;
  }
  GrowEmbeddings(state, num_rows);
  return state;
}

void GrowEmbeddings(ModelState& state, std::size_t new_total) {
  if (new_total < state.num_rows) {
    throw Error(ErrorKind::kContract, "embedding table cannot shrink from " +
                                          std::to_string(state.num_rows) + " to " +
                                          std::to_string(new_total));
  }
  const std::size_t k = state.config.embedding_dim;
  const std::size_t old = state.num_rows;
  state.embeddings.resize(new_total * k);
  state.embedding_m.resize(new_total * k, 0.0);
  state.embedding_v.resize(new_total * k, 0.0);
  state.num_rows = new_total;
  for (std::size_t r = old; r < new_total; ++r) {
    InitRow(state.row(FeatureId{static_cast<std::uint32_t>(r)}), state.seed, r);
  }
}

std::vector<double> Forward(const ModelState& state, Batch batch) {
  std::vector<double> out;
  out.reserve(batch.size());
  std::vector<std::vector<double>> acts;
  for (const Sample* s : batch) {
    CheckIds(state, *s);
    out.push_back(Sigmoid(ForwardOne(state, *s, acts)));
  }
  return out;
}

std::vector<double> Forward(const ModelState& state, std::span<const Sample> batch) {
  std::vector<const Sample*> ptrs;
  ptrs.reserve(batch.size());
  for (const Sample& s : batch) ptrs.push_back(&s);
  return Forward(state, Batch(ptrs));
}

double CeLoss(std::span<const double> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) {
    throw Error(ErrorKind::kShape, "predictions and labels differ in length (" +
                                       std::to_string(preds.size()) + " vs " +
                                       std::to_string(labels.size()) + ")");
  }
  if (preds.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double p = std::clamp(preds[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    sum -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return sum / static_cast<double>(preds.size());
}

void GuardConfig::Validate() const {
  if (eta < 1) throw Error(ErrorKind::kConfig, "guard eta must be >= 1");
  if (!(lambda >= 0.0)) throw Error(ErrorKind::kConfig, "guard lambda must be >= 0");
  if (!(epsilon > 0.0)) throw Error(ErrorKind::kConfig, "guard epsilon must be > 0");
}

double GuardCoefficient(std::uint32_t staleness, std::uint32_t s_max, std::uint32_t eta) {
  const std::uint32_t den = std::min(s_max, eta);
  if (staleness == 0 || den == 0) return 0.0;
  return static_cast<double>(std::min(staleness, eta)) / static_cast<double>(den);
}

void AnchorTable::Set(FeatureId id, std::span<const double> values) {
  rows_[id].assign(values.begin(), values.end());
}

const std::vector<double>* AnchorTable::Find(FeatureId id) const {
  auto it = rows_.find(id);
  return it == rows_.end() ? nullptr : &it->second;
}

AnchorTable SnapshotAnchors(const ModelState& state, std::span<const FeatureId> ids) {
  AnchorTable anchors;
  for (FeatureId id : ids) anchors.Set(id, state.row(id));
  return anchors;
}

double GuardLoss(std::span<const FeatureId> batch_features, const StalenessTable& table,
                 std::uint32_t s_max, const AnchorTable& anchors, const ModelState& state,
                 const GuardConfig& config) {
  std::vector<FeatureId> rows(batch_features.begin(), batch_features.end());
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  for (FeatureId id : rows) {
    if (id.value >= state.num_rows) {
      throw Error(ErrorKind::kLookup, "feature id " + std::to_string(id.value) +
                                          " beyond embedding rows");
    }
  }
  return AccumulateGuard(rows, state, table, s_max, anchors, config, nullptr);
}

std::vector<FeatureId> BatchFeatures(Batch batch) {
  std::vector<FeatureId> rows;
  for (const Sample* s : batch) rows.insert(rows.end(), s->features.begin(), s->features.end());
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  return rows;
}

LossBreakdown ComputeLoss(const ModelState& state, Batch batch, const GuardTerm* guard,
                          Gradients* grads) {
  LossBreakdown loss;
  if (batch.empty()) return loss;
  const std::size_t k = state.config.embedding_dim;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const std::vector<FeatureId> rows = BatchFeatures(batch);

  if (grads != nullptr) {
    grads->rows = rows;
    grads->row_grads.assign(rows.size() * k, 0.0);
    grads->layers.clear();
    for (const DenseLayer& layer : state.layers) grads->layers.push_back(ZerosLike(layer));
  }

  std::vector<std::vector<double>> acts;
  std::vector<double> delta;
  std::vector<double> delta_prev;
  double ce_sum = 0.0;
  for (const Sample* s : batch) {
    CheckIds(state, *s);
    const double p = Sigmoid(ForwardOne(state, *s, acts));
    const double pc = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
    ce_sum -= s->label == 1 ? std::log(pc) : std::log(1.0 - pc);
    if (grads == nullptr) continue;

    delta.assign(1, (p - static_cast<double>(s->label)) * inv_batch);
    for (std::size_t l = state.layers.size(); l-- > 0;) {
      const DenseLayer& layer = state.layers[l];
      DenseLayer& g = grads->layers[l];
      const std::vector<double>& in = acts[l];
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        g.bias[o] += d;
        double* gw = g.weight.data() + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) gw[i] += d * in[i];
      }
      delta_prev.assign(layer.in, 0.0);
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* w = layer.weight.data() + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) delta_prev[i] += w[i] * d;
      }
      if (l > 0) {
        // ReLU derivative, read off the stored activation.
        for (std::size_t i = 0; i < layer.in; ++i) {
          if (in[i] <= 0.0) delta_prev[i] = 0.0;
        }
      }
      delta.swap(delta_prev);
    }
    // delta now holds d loss / d input.
    for (std::size_t f = 0; f < s->features.size(); ++f) {
      const auto pos = static_cast<std::size_t>(
          std::lower_bound(rows.begin(), rows.end(), s->features[f]) - rows.begin());
      double* g = grads->row_grads.data() + pos * k;
      for (std::size_t j = 0; j < k; ++j) g[j] += delta[f * k + j];
    }
  }
  loss.ce = ce_sum * inv_batch;

  if (guard != nullptr && guard->config.lambda != 0.0) {
    if (guard->table == nullptr || guard->anchors == nullptr) {
      throw Error(ErrorKind::kState, "guard term without staleness table or anchors");
    }
    loss.guard = AccumulateGuard(rows, state, *guard->table, guard->s_max, *guard->anchors,
                                 guard->config, grads ? &grads->row_grads : nullptr);
    loss.total = loss.ce + guard->config.lambda * loss.guard;
  } else {
    loss.total = loss.ce;
  }
  return loss;
}

AnchorTable UpdateTracker::AnchorsFor(const ModelState& state,
                                      std::span<const FeatureId> ids) const {
  AnchorTable anchors;
  for (FeatureId id : ids) {
    const std::vector<double>* prev = previous_.Find(id);
    if (prev != nullptr) {
      anchors.Set(id, *prev);
    } else {
      anchors.Set(id, state.row(id));
    }
  }
  return anchors;
}

void UpdateTracker::Record(const ModelState& state, std::span<const FeatureId> ids) {
  for (FeatureId id : ids) previous_.Set(id, state.row(id));
}

LossBreakdown TrainStep(ModelState& state, Batch batch, const GuardContext* guard,
                        const AdamConfig& adam) {
  if (batch.empty()) throw Error(ErrorKind::kContract, "train step on an empty batch");
  const std::size_t k = state.config.embedding_dim;

  Gradients grads;
  LossBreakdown loss;
  const bool use_guard = guard != nullptr && guard->config.lambda != 0.0;
  if (use_guard) {
    if (guard->table == nullptr || guard->tracker == nullptr) {
      throw Error(ErrorKind::kState, "guard context without staleness table or tracker");
    }
    std::vector<FeatureId> stale;
    for (FeatureId id : BatchFeatures(batch)) {
      if (guard->table->staleness(id) >= 1) stale.push_back(id);
    }
    const AnchorTable anchors = guard->tracker->AnchorsFor(state, stale);
    const GuardTerm term{guard->table, guard->s_max, guard->config, &anchors};
    loss = ComputeLoss(state, batch, &term, &grads);
    guard->tracker->Record(state, stale);
  } else {
    loss = ComputeLoss(state, batch, nullptr, &grads);
  }

  bool finite = std::isfinite(loss.total) && AllFinite(grads.row_grads);
  for (const DenseLayer& g : grads.layers) {
    finite = finite && AllFinite(g.weight) && AllFinite(g.bias);
  }
  if (!finite) {
    throw Error(ErrorKind::kNumeric, "non-finite loss or gradient (loss=" +
                                         std::to_string(loss.total) + ")");
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    AdamUpdate(state.layers[l].weight, state.layer_m[l].weight, state.layer_v[l].weight,
               grads.layers[l].weight, adam, bc1, bc2);
    AdamUpdate(state.layers[l].bias, state.layer_m[l].bias, state.layer_v[l].bias,
               grads.layers[l].bias, adam, bc1, bc2);
  }
  for (std::size_t r = 0; r < grads.rows.size(); ++r) {
    const std::size_t offset = static_cast<std::size_t>(grads.rows[r].value) * k;
    AdamUpdate(std::span<double>(state.embeddings).subspan(offset, k),
               std::span<double>(state.embedding_m).subspan(offset, k),
               std::span<double>(state.embedding_v).subspan(offset, k),
               std::span<const double>(grads.row_grads).subspan(r * k, k), adam, bc1, bc2);
  }
  return loss;
}

std::string SerializeModel(const ModelState& state) {
  Writer w;
  w.str().append(kMagic, sizeof(kMagic));
  w.Put<std::uint32_t>(kCheckpointVersion);
  w.Put<std::uint64_t>(state.seed);
  w.Put<std::uint64_t>(state.config.num_fields);
  w.Put<std::uint64_t>(state.config.embedding_dim);
  w.Put<std::uint64_t>(state.config.hidden.size());
  for (std::size_t h : state.config.hidden) w.Put<std::uint64_t>(h);
  w.Put<std::uint64_t>(state.num_rows);
  w.Put<std::uint64_t>(state.step);
  w.PutVector(state.embeddings);
  w.PutVector(state.embedding_m);
  w.PutVector(state.embedding_v);
  w.Put<std::uint64_t>(state.layers.size());
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    PutLayer(w, state.layers[l]);
    PutLayer(w, state.layer_m[l]);
    PutLayer(w, state.layer_v[l]);
  }
  return std::move(w.str());
}

ModelState DeserializeModel(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorKind::kParse, "not a model checkpoint");
  }
  const std::string body = bytes.substr(sizeof(kMagic));
  Reader r(body);
  const auto version = r.Get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::kParse, "unsupported checkpoint version " + std::to_string(version));
  }
  ModelState state;
  state.seed = r.Get<std::uint64_t>();
  state.config.num_fields = r.Get<std::uint64_t>();
  state.config.embedding_dim = r.Get<std::uint64_t>();
  const auto n_hidden = r.Get<std::uint64_t>();
  state.config.hidden.clear();
  for (std::uint64_t i = 0; i < n_hidden; ++i) state.config.hidden.push_back(r.Get<std::uint64_t>());
  state.num_rows = r.Get<std::uint64_t>();
  state.step = r.Get<std::uint64_t>();
  state.embeddings = r.GetVector();
  state.embedding_m = r.GetVector();
  state.embedding_v = r.GetVector();
  const std::size_t expected = state.num_rows * state.config.embedding_dim;
  if (state.embeddings.size() != expected || state.embedding_m.size() != expected ||
      state.embedding_v.size() != expected) {
    throw Error(ErrorKind::kParse, "checkpoint embedding shape mismatch");
  }
  const auto n_layers = r.Get<std::uint64_t>();
  if (n_layers != n_hidden + 1) throw Error(ErrorKind::kParse, "checkpoint layer count mismatch");
  for (std::uint64_t l = 0; l < n_layers; ++l) {
    state.layers.push_back(GetLayer(r));
    state.layer_m.push_back(GetLayer(r));
    state.layer_v.push_back(GetLayer(r));
  }
  if (!r.done()) throw Error(ErrorKind::kParse, "trailing bytes in checkpoint");
  return state;
}

void SaveCheckpoint(const ModelState& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  const std::string bytes = SerializeModel(state);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "cannot write checkpoint " + path.string());
}

ModelState LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open checkpoint " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return DeserializeModel(buffer.str());
}

std::uint64_t Fingerprint(const ModelState& state) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : SerializeModel(state)) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace fesail
