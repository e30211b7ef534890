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

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fesail/error.hpp"
#include "fesail/feature_registry.hpp"
#include "fesail/stream.hpp"
#include "test_util.hpp"

namespace fesail {
namespace {

using testing::TempDir;

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ErrorKind KindOf(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::kIo;
}

SyntheticSpec SmallSpec() {
  SyntheticSpec spec;
  spec.num_spans = 6;
  spec.samples_per_span = 200;
  spec.num_fields = 3;
  spec.features_per_field = 20;
  spec.seed = 5;
  return spec;
}

TEST_CASE("load_span counts samples and distinct features") {
  TempDir dir("load");
  const auto path = dir.path() / "span_000.csv";
  std::ofstream(path) << "1,a,x\n0,b,x\n";
  FeatureDictionary dict(2);
  const SpanDataset span = LoadSpan(path, dict, 0);
  CHECK(span.samples.size() == 2);
  CHECK(span.feature_set.size() == 3);
  CHECK(span.samples[0].label == 1);
  CHECK(span.samples[1].label == 0);
}

TEST_CASE("load_span errors") {
  FeatureDictionary dict(2);
  SUBCASE("empty file") {
    try {
      ParseSpan("\n\n", dict, 0);
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kParse);
      CHECK(std::string(e.what()).find("empty span") != std::string::npos);
    }
  }
  SUBCASE("non-binary label carries the line number") {
    try {
      ParseSpan("1,a,x\n2,a,x\n", dict, 0);
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kParse);
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
  }
  SUBCASE("wrong column count") {
    CHECK(KindOf([&] { ParseSpan("1,a\n", dict, 0); }) == ErrorKind::kParse);
  }
  SUBCASE("missing file") {
    CHECK(KindOf([&] { LoadSpan("/nonexistent/span_000.csv", dict, 0); }) ==
          ErrorKind::kInput);
  }
}

TEST_CASE("span file listing enforces order") {
  TempDir dir("list");
  CHECK(KindOf([&] { ListSpanFiles(dir.path()); }) == ErrorKind::kInput);
  std::ofstream(dir.path() / "span_000.csv") << "1,a\n";
  std::ofstream(dir.path() / "span_002.csv") << "1,a\n";
  CHECK(KindOf([&] { ListSpanFiles(dir.path()); }) == ErrorKind::kInput);
  std::ofstream(dir.path() / "span_001.csv") << "1,a\n";
  const auto files = ListSpanFiles(dir.path());
  REQUIRE(files.size() == 3);
  CHECK(files[2].filename() == "span_002.csv");
  CHECK(SpanFileName(7) == "span_007.csv");
  CHECK(KindOf([&] {
          ValidateSpanOrder({dir.path() / "span_001.csv", dir.path() / "span_000.csv"});
        }) == ErrorKind::kInput);
}

TEST_CASE("synthetic stream without schedules keeps every feature present") {
  const SyntheticStream stream = GenerateSynthetic(SmallSpec());
  REQUIRE(stream.span_csv.size() == 6);
  FeatureDictionary dict(3);
  std::vector<SpanDataset> spans;
  for (std::size_t t = 0; t < 6; ++t) spans.push_back(ParseSpan(stream.span_csv[t], dict, t));
  for (const SpanDataset& s : spans) {
    CHECK(s.samples.size() == 200);
    CHECK(s.feature_set.size() == 60);
  }
  const auto hist = FeaturePresenceHistogram(spans);
  REQUIRE(hist.size() == 1);
  CHECK(hist.at(0) == 60 * 6);
}

TEST_CASE("scheduled gap yields staleness two on return") {
  SyntheticSpec spec = SmallSpec();
  spec.schedule[{1, 4}] = {2, 3};
  const SyntheticStream stream = GenerateSynthetic(spec);
  FeatureDictionary dict(3);
  StalenessTable table;
  std::vector<SpanDataset> spans;
  FeatureId target;
  for (std::size_t t = 0; t < 5; ++t) {
    spans.push_back(ParseSpan(stream.span_csv[t], dict, t));
    if (t == 0) REQUIRE(dict.Find(FieldId{1}, "f1_4", &target));
    if (t == 4) CHECK(table.staleness(target) == 2);
    table.Update(spans.back().feature_set);
  }
  const auto hist = FeaturePresenceHistogram(spans);
  CHECK(hist.at(2) == 1);
  CHECK(hist.count(1) == 0);
}

TEST_CASE("synthetic generation is deterministic") {
  SyntheticSpec spec = SmallSpec();
  spec.suppress_fraction = 0.3;
  spec.max_gap = 3;
  TempDir a("det_a");
  TempDir b("det_b");
  const auto pa = WriteSynthetic(GenerateSynthetic(spec), a.path());
  const auto pb = WriteSynthetic(GenerateSynthetic(spec), b.path());
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(Slurp(pa[i]) == Slurp(pb[i]));
}

TEST_CASE("field-emptying schedule is a spec error") {
  SyntheticSpec spec = SmallSpec();
  spec.features_per_field = 2;
  spec.schedule[{0, 0}] = {3};
  spec.schedule[{0, 1}] = {3};
  try {
    GenerateSynthetic(spec);
    FAIL("expected a spec error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSpec);
    CHECK(std::string(e.what()).find("field emptied in span 3") != std::string::npos);
  }
}

TEST_CASE("round trip and schedule fidelity on random schedules") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticSpec spec = SmallSpec();
    spec.seed = seed;
    spec.suppress_fraction = 0.4;
    spec.max_gap = 3;
    const SyntheticStream stream = GenerateSynthetic(spec);
    TempDir dir("rt");
    const auto paths = WriteSynthetic(stream, dir.path());
    REQUIRE(paths == ListSpanFiles(dir.path()));
    FeatureDictionary dict(spec.num_fields);
    for (std::size_t t = 0; t < paths.size(); ++t) {
      const SpanDataset span = LoadSpan(paths[t], dict, t);
      CHECK(span.samples.size() == spec.samples_per_span);
      for (std::size_t f = 0; f < spec.num_fields; ++f) {
        for (std::size_t j = 0; j < spec.features_per_field; ++j) {
          const std::string token = "f" + std::to_string(f) + "_" + std::to_string(j);
          FeatureId id;
          const bool known = dict.Find(FieldId{static_cast<std::uint32_t>(f)}, token, &id);
          const bool present =
              known && std::binary_search(span.feature_set.begin(), span.feature_set.end(), id);
          CHECK(present == !stream.absent[f * spec.features_per_field + j][t]);
        }
      }
    }
  }
}

TEST_CASE("random gaps reappear before the last span") {
  SyntheticSpec spec = SmallSpec();
  spec.num_spans = 10;
  spec.suppress_fraction = 0.5;
  spec.max_gap = 8;
  spec.gap_end_min = 8;
  const SyntheticStream stream = GenerateSynthetic(spec);
  for (const auto& row : stream.absent) {
    CHECK_FALSE(row.front());
    CHECK_FALSE(row.back());
  }
}

TEST_CASE("rarity-coupled gaps favour the tail") {
  SyntheticSpec spec = SmallSpec();
  spec.num_spans = 12;
  spec.features_per_field = 100;
  spec.samples_per_span = 2000;
  spec.suppress_fraction = 0.3;
  spec.max_gap = 8;
  spec.gaps_follow_rarity = true;
  const SyntheticStream stream = GenerateSynthetic(spec);
  std::size_t head_gaps = 0, tail_gaps = 0, head_longest = 0;
  for (std::size_t g = 0; g < stream.absent.size(); ++g) {
    const std::size_t missing = static_cast<std::size_t>(
        std::count(stream.absent[g].begin(), stream.absent[g].end(), true));
    const std::size_t rank = g % spec.features_per_field;
    if (rank < 10) head_longest = std::max(head_longest, missing);
    if (missing == 0) continue;
    (rank < spec.features_per_field / 2 ? head_gaps : tail_gaps) += 1;
  }
  CHECK(tail_gaps > 2 * head_gaps);
  // The ten most popular ranks may draw gaps of at most one span.
  CHECK(head_longest <= 1);
}

}  // namespace
}  // namespace fesail
