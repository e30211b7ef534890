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

#ifndef FESAIL_CONFIG_HPP_
#define FESAIL_CONFIG_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fesail/pipeline.hpp"
#include "fesail/stream.hpp"

namespace fesail {

// Sectioned key-value files:
//
//   [data]    spans
//   [run]     policy seed out selection_log checkpoint
//   [policy]  capacity func bias iu_supplement
//   [guard]   eta lambda epsilon
//   [model]   embedding_dim hidden
//   [train]   learning_rate batch_size max_epochs patience
//             validation_fraction bucket_cap
//   [grid]    func bias control            (sweep only)
//
// Unknown sections or keys raise kConfig.
struct RunConfig {
  PipelineConfig pipeline;
  std::filesystem::path data_dir;
  std::filesystem::path out_dir = "run";
  bool selection_log = false;
  bool checkpoint = true;
  bool operator==(const RunConfig&) const = default;
};

// Relative paths are resolved against `base_dir`.
RunConfig ParseRunConfig(const std::string& text, const std::filesystem::path& base_dir);
RunConfig LoadRunConfig(const std::filesystem::path& path);
// Writes every key, so the output re-parses to an equal RunConfig.
std::string FormatRunConfig(const RunConfig& config);
// Pipeline checks plus existence of the data directory.
void ValidateRunConfig(const RunConfig& config);

// [synthetic] num_spans samples_per_span num_fields features_per_field noise
//             weight_scale popularity_skew suppress_fraction max_gap
//             gap_end_min gaps_follow_rarity seed
// [schedule]  f<field>_<feature> = span,span,...
SyntheticSpec ParseSyntheticSpec(const std::string& text);
SyntheticSpec LoadSyntheticSpec(const std::filesystem::path& path);
std::string FormatSyntheticSpec(const SyntheticSpec& spec);

struct SweepGrid {
  std::vector<SweepCell> cells;  // func x bias, in file order
  std::optional<SweepCell> control;
};

// Reads the [grid] section; other sections are ignored so the grid may live
// in the run config. Throws kConfig when the grid is missing or empty.
SweepGrid ParseSweepGrid(const std::string& text);
SweepGrid LoadSweepGrid(const std::filesystem::path& path);

std::string ReadTextFile(const std::filesystem::path& path);

}  // namespace fesail

#endif  // FESAIL_CONFIG_HPP_
