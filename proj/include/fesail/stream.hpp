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

#ifndef FESAIL_STREAM_HPP_
#define FESAIL_STREAM_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fesail/feature_registry.hpp"

namespace fesail {

// One time span D_t after encoding.
struct SpanDataset {
  std::size_t span_index = 0;
  std::vector<Sample> samples;
  // Sorted, distinct union of all sample features.
  std::vector<FeatureId> feature_set;
};

// Reads a span CSV (`label,token_1,...,token_m` per row) through the shared
// dictionary. Blank lines are skipped. Malformed rows raise kParse with the
// 1-based line number; a file without rows raises kParse "empty span".
SpanDataset LoadSpan(const std::filesystem::path& path, FeatureDictionary& dict,
                     std::size_t span_index);

// Same as LoadSpan over in-memory CSV text.
SpanDataset ParseSpan(const std::string& text, FeatureDictionary& dict,
                      std::size_t span_index, const std::string& source = "<memory>");

std::vector<FeatureId> FeatureSetOf(const std::vector<Sample>& samples);

// `span_%03d.csv`.
std::string SpanFileName(std::size_t index);

// Lists span files in `dir` sorted by index. Throws kInput when the directory
// is missing, holds no span files, or the indices are not 0,1,2,...
std::vector<std::filesystem::path> ListSpanFiles(const std::filesystem::path& dir);

// Checks that `paths` are named span_%03d.csv with consecutive increasing
// indices. Throws kInput otherwise.
void ValidateSpanOrder(const std::vector<std::filesystem::path>& paths);

// Description of a synthetic drifting stream.
//
// Feature j of field f is written as token "f<f>_<j>". A feature is absent
// from exactly the spans listed in its schedule and present in every other
// span; the random part of the schedule (suppress_fraction, max_gap) places
// one contiguous absence gap per chosen feature inside spans [1, num_spans-2]
// so the feature reappears before the stream ends.
struct SyntheticSpec {
  std::size_t num_spans = 12;
  std::size_t samples_per_span = 5000;
  std::size_t num_fields = 5;
  std::size_t features_per_field = 400;
  // Click model: p(click) = sigmoid(weight_scale * mean(latent) + noise * z).
  double noise = 0.5;
  double weight_scale = 1.0;
  // Zipf exponent of feature popularity within a field; 0 draws uniformly.
  double popularity_skew = 0.0;
  double suppress_fraction = 0.0;
  std::size_t max_gap = 0;
  // Earliest span a random gap may end in. Late ends put every staleness
  // value into the same evaluation spans.
  std::size_t gap_end_min = 0;
  // Ties gaps to popularity: the chance of a gap grows linearly with the
  // feature's rank (mean chance stays suppress_fraction) and so does the
  // longest gap it may draw. Rare features then go missing more often and for
  // longer, as they do in click logs.
  bool gaps_follow_rarity = false;
  // Explicit absences, keyed by (field, feature index within field).
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> schedule;
  std::uint64_t seed = 0;
};

struct SyntheticStream {
  // absent[f * features_per_field + j][t] is true when that feature is
  // suppressed in span t.
  std::vector<std::vector<bool>> absent;
  std::vector<double> latent_weights;
  // CSV text of each span, ready to be written.
  std::vector<std::string> span_csv;
};

// Deterministic for a given spec. Throws kSpec when the spec is inconsistent,
// including "field emptied in span k" when a schedule removes every feature
// of a field from some span.
SyntheticStream GenerateSynthetic(const SyntheticSpec& spec);

// Writes span_%03d.csv files into `out_dir` (created if needed) and returns
// their paths in span order.
std::vector<std::filesystem::path> WriteSynthetic(const SyntheticStream& stream,
                                                  const std::filesystem::path& out_dir);

// For each v, the number of (feature, span) presence events where the feature
// was absent for exactly v spans immediately before. A feature's first
// appearance counts as v = 0.
std::map<std::uint32_t, std::size_t> FeaturePresenceHistogram(
    const std::vector<SpanDataset>& spans);

}  // namespace fesail

#endif  // FESAIL_STREAM_HPP_
