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

#include "fesail/feature_registry.hpp"

#include <cmath>
#include <string>

#include "fesail/error.hpp"

namespace fesail {

FeatureDictionary::FeatureDictionary(std::size_t num_fields)
    : per_field_(num_fields) {
  if (num_fields == 0) {
    throw Error(ErrorKind::kConfig, "feature dictionary needs at least one field");
  }
}

FeatureId FeatureDictionary::Encode(FieldId field, std::string_view token) {
  if (field.value >= per_field_.size()) {
    throw Error(ErrorKind::kArity, "field " + std::to_string(field.value) +
                                       " out of range");
  }
  TokenMap& map = per_field_[field.value];
  if (auto it = map.find(token); it != map.end()) return FeatureId{it->second};
  const auto id = static_cast<std::uint32_t>(fields_.size());
  map.emplace(std::string(token), id);
  fields_.push_back(field);
  tokens_.emplace_back(token);
  return FeatureId{id};
}

Sample FeatureDictionary::EncodeSample(std::span<const std::string> tokens,
                                       int label) {
  if (tokens.size() != per_field_.size()) {
    throw Error(ErrorKind::kArity,
                "expected " + std::to_string(per_field_.size()) +
                    " tokens, got " + std::to_string(tokens.size()));
  }
  Sample sample;
  sample.label = label;
  sample.features.reserve(tokens.size());
  for (std::size_t f = 0; f < tokens.size(); ++f) {
    sample.features.push_back(
        Encode(FieldId{static_cast<std::uint32_t>(f)}, tokens[f]));
  }
  return sample;
}

bool FeatureDictionary::Find(FieldId field, std::string_view token,
                             FeatureId* out) const {
  if (field.value >= per_field_.size()) return false;
  const TokenMap& map = per_field_[field.value];
  auto it = map.find(token);
  if (it == map.end()) return false;
  if (out != nullptr) *out = FeatureId{it->second};
  return true;
}

FieldId FeatureDictionary::field_of(FeatureId id) const {
  if (id.value >= fields_.size()) {
    throw Error(ErrorKind::kLookup, "unknown feature id " + std::to_string(id.value));
  }
  return fields_[id.value];
}

const std::string& FeatureDictionary::token_of(FeatureId id) const {
  if (id.value >= tokens_.size()) {
    throw Error(ErrorKind::kLookup, "unknown feature id " + std::to_string(id.value));
  }
  return tokens_[id.value];
}

void StalenessTable::Update(std::span<const FeatureId> present) {
  std::vector<char> seen(values_.size(), 0);
  for (FeatureId id : present) {
    if (id.value >= values_.size()) {
      values_.resize(id.value + 1, kUnknown);
      seen.resize(id.value + 1, 0);
    }
    seen[id.value] = 1;
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (seen[i]) {
      if (values_[i] == kUnknown) ++num_known_;
      values_[i] = 0;
    } else if (values_[i] != kUnknown) {
      ++values_[i];
    }
  }
  ++span_index_;
}

std::uint32_t StalenessTable::staleness(FeatureId id) const {
  if (!knows(id)) {
    throw Error(ErrorKind::kLookup,
                "feature " + std::to_string(id.value) + " has no staleness entry");
  }
  return values_[id.value];
}

std::uint32_t StalenessTable::staleness_or_zero(FeatureId id) const {
  return knows(id) ? values_[id.value] : 0;
}

bool StalenessTable::knows(FeatureId id) const {
  return id.value < values_.size() && values_[id.value] != kUnknown;
}

std::string_view ToString(WeightFunction func) {
  switch (func) {
    case WeightFunction::kInverseProportional: return "inverse_proportional";
    case WeightFunction::kNegativeExponential: return "negative_exponential";
  }
  return "unknown";
}

WeightFunction ParseWeightFunction(std::string_view name) {
  if (name == "inverse_proportional") return WeightFunction::kInverseProportional;
  if (name == "negative_exponential") return WeightFunction::kNegativeExponential;
  throw Error(ErrorKind::kConfig,
              "unknown weight function '" + std::string(name) +
                  "' (valid: inverse_proportional, negative_exponential)");
}

double WeightOf(std::uint32_t staleness, WeightFunction func, double bias) {
  if (staleness == 0) {
    throw Error(ErrorKind::kDomain, "weight is only defined for stale features (s >= 1)");
  }
  const double s = static_cast<double>(staleness);
  switch (func) {
    case WeightFunction::kInverseProportional: return 1.0 / s + bias;
    case WeightFunction::kNegativeExponential: return std::exp(-s) + bias;
  }
  return bias;
}

std::vector<FeatureId> StaleFeatures(const Sample& sample,
                                     const StalenessTable& table) {
  std::vector<FeatureId> out;
  for (FeatureId id : sample.features) {
    if (table.staleness(id) >= 1) out.push_back(id);
  }
  return out;
}

}  // namespace fesail
