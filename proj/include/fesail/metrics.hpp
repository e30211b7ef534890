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

#ifndef FESAIL_METRICS_HPP_
#define FESAIL_METRICS_HPP_

#include <span>
#include <vector>

namespace fesail {

// Rank-based (Mann-Whitney) ROC AUC; tied scores contribute 1/2. Throws
// kDomain unless both classes are present, kShape on length mismatch.
double Auc(std::span<const double> preds, std::span<const int> labels);

// Spearman rank correlation with average ranks for ties. Returns 0 when
// either side is constant; throws kShape on length mismatch or < 2 points.
double SpearmanRho(std::span<const double> x, std::span<const double> y);

template <typename T>
double Jaccard(const std::vector<T>& a_sorted, const std::vector<T>& b_sorted) {
  if (a_sorted.empty() && b_sorted.empty()) return 1.0;
  std::size_t i = 0, j = 0, common = 0;
  while (i < a_sorted.size() && j < b_sorted.size()) {
    if (a_sorted[i] < b_sorted[j]) {
      ++i;
    } else if (b_sorted[j] < a_sorted[i]) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  return static_cast<double>(common) /
         static_cast<double>(a_sorted.size() + b_sorted.size() - common);
}

}  // namespace fesail

#endif  // FESAIL_METRICS_HPP_
