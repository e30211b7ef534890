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

#include "fesail/stream.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "fesail/error.hpp"
#include "fesail/rng.hpp"

namespace fesail {
namespace {

namespace fs = std::filesystem;

std::vector<std::string> SplitCommas(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

// Returns -1 when the name is not span_%03d.csv.
long SpanIndexOf(const fs::path& path) {
  static const std::regex kPattern(R"(span_(\d{3,})\.csv)");
  std::smatch match;
  const std::string name = path.filename().string();
  if (!std::regex_match(name, match, kPattern)) return -1;
  return std::stol(match[1].str());
}

}  // namespace

std::vector<FeatureId> FeatureSetOf(const std::vector<Sample>& samples) {
  std::vector<FeatureId> out;
  for (const Sample& s : samples) {
    out.insert(out.end(), s.features.begin(), s.features.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

SpanDataset ParseSpan(const std::string& text, FeatureDictionary& dict,
                      std::size_t span_index, const std::string& source) {
  SpanDataset span;
  span.span_index = span_index;
  const std::size_t expected_columns = dict.num_fields() + 1;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols = SplitCommas(line);
    if (cols.size() != expected_columns) {
      throw Error(ErrorKind::kParse,
                  source + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(expected_columns) + " columns, got " +
                      std::to_string(cols.size()));
    }
    if (cols[0] != "0" && cols[0] != "1") {
      throw Error(ErrorKind::kParse, source + ":" + std::to_string(line_no) +
                                         ": label not binary: '" + cols[0] + "'");
    }
    const int label = cols[0] == "1" ? 1 : 0;
    span.samples.push_back(dict.EncodeSample(
        std::span<const std::string>(cols).subspan(1), label));
  }
  if (span.samples.empty()) {
    throw Error(ErrorKind::kParse, source + ": empty span");
  }
  span.feature_set = FeatureSetOf(span.samples);
  return span;
}

SpanDataset LoadSpan(const fs::path& path, FeatureDictionary& dict,
                     std::size_t span_index) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kInput, "cannot open span file " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return ParseSpan(buffer.str(), dict, span_index, path.string());
}

std::string SpanFileName(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "span_%03zu.csv", index);
  return buf;
}

void ValidateSpanOrder(const std::vector<fs::path>& paths) {
  long previous = -1;
  for (const fs::path& p : paths) {
    const long index = SpanIndexOf(p);
    if (index < 0) {
      throw Error(ErrorKind::kInput, "not a span file name: " + p.string());
    }
    if (previous >= 0 && index != previous + 1) {
      throw Error(ErrorKind::kInput, "span files out of order or missing near " +
                                         p.filename().string());
    }
    previous = index;
  }
}

std::vector<fs::path> ListSpanFiles(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorKind::kInput, "span directory not found: " + dir.string());
  }
  std::vector<std::pair<long, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const long index = SpanIndexOf(entry.path());
    if (index >= 0 && entry.is_regular_file()) found.emplace_back(index, entry.path());
  }
  if (found.empty()) {
    throw Error(ErrorKind::kInput, "no span_%03d.csv files in " + dir.string());
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (found[i].first != static_cast<long>(i)) {
      throw Error(ErrorKind::kInput, "missing " + SpanFileName(i) + " in " + dir.string());
    }
    out.push_back(found[i].second);
  }
  return out;
}

SyntheticStream GenerateSynthetic(const SyntheticSpec& spec) {
  if (spec.num_spans == 0 || spec.samples_per_span == 0 || spec.num_fields == 0 ||
      spec.features_per_field == 0) {
    throw Error(ErrorKind::kSpec, "synthetic spec sizes must be positive");
  }
  if (spec.features_per_field > spec.samples_per_span) {
    throw Error(ErrorKind::kSpec,
                "features_per_field exceeds samples_per_span; presence cannot be guaranteed");
  }
  if (spec.suppress_fraction < 0.0 || spec.suppress_fraction > 1.0) {
    throw Error(ErrorKind::kSpec, "suppress_fraction must lie in [0, 1]");
  }
  if (spec.noise < 0.0) throw Error(ErrorKind::kSpec, "noise must be non-negative");
  if (!(spec.popularity_skew >= 0.0)) {
    throw Error(ErrorKind::kSpec, "popularity_skew must be non-negative");
  }

  const std::size_t per_field = spec.features_per_field;
  const std::size_t total = spec.num_fields * per_field;
  SyntheticStream out;
  out.absent.assign(total, std::vector<bool>(spec.num_spans, false));

  Rng weight_rng = MakeRng(spec.seed, SeedStream::kData, 0);
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  out.latent_weights.resize(total);
  for (double& w : out.latent_weights) w = unit_normal(weight_rng);

  // Random gaps stay inside [1, num_spans - 2] so that span 0 holds every
  // feature and each suppressed feature comes back before the last span.
  if (spec.suppress_fraction > 0.0 && spec.max_gap > 0 && spec.num_spans >= 3) {
    Rng schedule_rng = MakeRng(spec.seed, SeedStream::kData, 1);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const std::size_t room = spec.num_spans - 2;
    for (std::size_t g = 0; g < total; ++g) {
      // Popularity rank within the field scaled to (0, 1]; 1 is the rarest.
      const double rarity = static_cast<double>(g % per_field + 1) /
                            static_cast<double>(per_field);
      const double chance =
          spec.gaps_follow_rarity ? std::min(1.0, 2.0 * spec.suppress_fraction * rarity)
                                  : spec.suppress_fraction;
      if (coin(schedule_rng) >= chance) continue;
      std::size_t max_len = std::min(spec.max_gap, room);
      if (spec.gaps_follow_rarity) {
        max_len = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(rarity * static_cast<double>(max_len))));
      }
      const std::size_t len =
          std::uniform_int_distribution<std::size_t>(1, max_len)(schedule_rng);
      // The gap covers [end - len + 1, end]; end is drawn from
      // [max(len, gap_end_min), room].
      const std::size_t lowest_end = std::min(room, std::max(len, spec.gap_end_min));
      const std::size_t end =
          std::uniform_int_distribution<std::size_t>(lowest_end, room)(schedule_rng);
      for (std::size_t t = end + 1 - len; t <= end; ++t) out.absent[g][t] = true;
    }
  }
  for (const auto& [key, spans] : spec.schedule) {
    const auto [field, feature] = key;
    if (field >= spec.num_fields || feature >= per_field) {
      throw Error(ErrorKind::kSpec, "schedule entry f" + std::to_string(field) + "_" +
                                        std::to_string(feature) + " out of range");
    }
    for (std::size_t t : spans) {
      if (t >= spec.num_spans) {
        throw Error(ErrorKind::kSpec, "schedule span " + std::to_string(t) +
                                          " beyond num_spans");
      }
      out.absent[field * per_field + feature][t] = true;
    }
  }

  std::vector<std::string> names(total);
  for (std::size_t f = 0; f < spec.num_fields; ++f) {
    for (std::size_t j = 0; j < per_field; ++j) {
      names[f * per_field + j] = "f" + std::to_string(f) + "_" + std::to_string(j);
    }
  }

  const std::size_t n = spec.samples_per_span;
  out.span_csv.reserve(spec.num_spans);
  for (std::size_t t = 0; t < spec.num_spans; ++t) {
    Rng rng = MakeRng(spec.seed, SeedStream::kData, 1000 + t);
    // columns[f][i] = global feature index of sample i in field f.
    std::vector<std::vector<std::size_t>> columns(spec.num_fields);
    for (std::size_t f = 0; f < spec.num_fields; ++f) {
      std::vector<std::size_t> active;
      for (std::size_t j = 0; j < per_field; ++j) {
        if (!out.absent[f * per_field + j][t]) active.push_back(f * per_field + j);
      }
      if (active.empty()) {
        throw Error(ErrorKind::kSpec, "field emptied in span " + std::to_string(t) +
                                          " (field " + std::to_string(f) + ")");
      }
      std::vector<std::size_t>& col = columns[f];
      col = active;
      if (spec.popularity_skew > 0.0) {
        // Feature j of a field is drawn with weight 1 / (j + 1)^skew.
        std::vector<double> popularity;
        popularity.reserve(active.size());
        for (std::size_t g : active) {
          const double rank = static_cast<double>(g - f * per_field + 1);
          popularity.push_back(std::pow(rank, -spec.popularity_skew));
        }
        std::discrete_distribution<std::size_t> pick(popularity.begin(), popularity.end());
        while (col.size() < n) col.push_back(active[pick(rng)]);
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, active.size() - 1);
        while (col.size() < n) col.push_back(active[pick(rng)]);
      }
      std::shuffle(col.begin(), col.end(), rng);
    }
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::string text;
    text.reserve(n * spec.num_fields * 8);
    for (std::size_t i = 0; i < n; ++i) {
      double mean = 0.0;
      for (std::size_t f = 0; f < spec.num_fields; ++f) {
        mean += out.latent_weights[columns[f][i]];
      }
      mean /= static_cast<double>(spec.num_fields);
      const double logit = spec.weight_scale * mean + spec.noise * unit_normal(rng);
      const double p = 1.0 / (1.0 + std::exp(-logit));
      text += uniform(rng) < p ? '1' : '0';
      for (std::size_t f = 0; f < spec.num_fields; ++f) {
        text += ',';
        text += names[columns[f][i]];
      }
      text += '\n';
    }
    out.span_csv.push_back(std::move(text));
  }
  return out;
}

std::vector<fs::path> WriteSynthetic(const SyntheticStream& stream,
                                     const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw Error(ErrorKind::kIo, "cannot create " + out_dir.string() + ": " + ec.message());
  }
  std::vector<fs::path> paths;
  for (std::size_t t = 0; t < stream.span_csv.size(); ++t) {
    const fs::path path = out_dir / SpanFileName(t);
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    file << stream.span_csv[t];
    if (!file) throw Error(ErrorKind::kIo, "cannot write " + path.string());
    paths.push_back(path);
  }
  return paths;
}

std::map<std::uint32_t, std::size_t> FeaturePresenceHistogram(
    const std::vector<SpanDataset>& spans) {
  std::map<std::uint32_t, std::size_t> histogram;
  // Consecutive absences since the last presence; absent key = never seen.
  std::unordered_map<FeatureId, std::uint32_t> gap;
  for (const SpanDataset& span : spans) {
    for (FeatureId id : span.feature_set) {
      auto it = gap.find(id);
      ++histogram[it == gap.end() ? 0 : it->second];
    }
    for (auto& [id, count] : gap) ++count;
    for (FeatureId id : span.feature_set) gap[id] = 0;
  }
  return histogram;
}

}  // namespace fesail
