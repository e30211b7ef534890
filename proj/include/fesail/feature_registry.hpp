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

#ifndef FESAIL_FEATURE_REGISTRY_HPP_
#define FESAIL_FEATURE_REGISTRY_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fesail {

struct FieldId {
  std::uint32_t value = 0;
  auto operator<=>(const FieldId&) const = default;
};

// Dense, append-only identifier of one categorical feature. Ids are scoped
// to a field by the dictionary, so two fields never share an id.
struct FeatureId {
  std::uint32_t value = 0;
  auto operator<=>(const FeatureId&) const = default;
};

// One labeled interaction: exactly one feature per field.
struct Sample {
  std::vector<FeatureId> features;
  int label = 0;
};

// Maps raw tokens to feature ids, one namespace per field.
class FeatureDictionary {
 public:
  FeatureDictionary() = default;
  explicit FeatureDictionary(std::size_t num_fields);

  std::size_t num_fields() const { return per_field_.size(); }
  // Total number of features N across all fields.
  std::size_t size() const { return fields_.size(); }

  // Returns the id for `token` in `field`, assigning the next dense id if the
  // token is new.
  FeatureId Encode(FieldId field, std::string_view token);

  // Throws kArity unless tokens.size() == num_fields().
  Sample EncodeSample(std::span<const std::string> tokens, int label = 0);

  // Lookup without growth; false when unseen.
  bool Find(FieldId field, std::string_view token, FeatureId* out) const;

  FieldId field_of(FeatureId id) const;
  const std::string& token_of(FeatureId id) const;

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };
  using TokenMap =
      std::unordered_map<std::string, std::uint32_t, StringHash, std::equal_to<>>;

  std::vector<TokenMap> per_field_;
  std::vector<FieldId> fields_;
  std::vector<std::string> tokens_;
};

// Per-feature count of consecutive absent spans.
//
// A feature becomes known to the table the first time it is present in an
// applied span and enters with staleness 0. Every later Update either resets
// it (present) or increments it (absent).
class StalenessTable {
 public:
  StalenessTable() = default;

  // Applies one span's feature set.
  void Update(std::span<const FeatureId> present);

  // Throws kLookup for a feature the table has never seen.
  std::uint32_t staleness(FeatureId id) const;
  // Unknown features read as 0.
  std::uint32_t staleness_or_zero(FeatureId id) const;
  bool knows(FeatureId id) const;

  // Number of updates applied so far.
  std::size_t span_index() const { return span_index_; }
  // One past the largest id ever registered.
  std::size_t capacity() const { return values_.size(); }
  std::size_t num_known() const { return num_known_; }

 private:
  static constexpr std::uint32_t kUnknown = 0xffffffffu;
  std::vector<std::uint32_t> values_;
  std::size_t span_index_ = 0;
  std::size_t num_known_ = 0;
};

enum class WeightFunction { kInverseProportional, kNegativeExponential };

std::string_view ToString(WeightFunction func);
// Accepts "inverse_proportional" and "negative_exponential".
WeightFunction ParseWeightFunction(std::string_view name);

// Coverage weight of a stale feature: func(s) + bias. Throws kDomain for
// s == 0; fresh features carry no coverage weight.
double WeightOf(std::uint32_t staleness, WeightFunction func, double bias);

// Features of `sample` with staleness >= 1, in field order.
std::vector<FeatureId> StaleFeatures(const Sample& sample,
                                     const StalenessTable& table);

}  // namespace fesail

template <>
struct std::hash<fesail::FeatureId> {
  std::size_t operator()(fesail::FeatureId id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};

#endif  // FESAIL_FEATURE_REGISTRY_HPP_
