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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <string>
#include <vector>

#include "fesail/config.hpp"
#include "fesail/error.hpp"
#include "fesail/feature_registry.hpp"
#include "fesail/metrics.hpp"
#include "fesail/model.hpp"
#include "fesail/pipeline.hpp"
#include "fesail/sampler.hpp"
#include "fesail/stream.hpp"

namespace py = pybind11;

namespace fesail {
namespace {

// Candidates arrive from Python as lists of stale feature ids.
CandidateSet ToCandidates(const std::vector<std::vector<std::uint32_t>>& stale_sets) {
  CandidateSet out(stale_sets.size());
  for (std::size_t i = 0; i < stale_sets.size(); ++i) {
    out[i].pool_index = i;
    for (std::uint32_t f : stale_sets[i]) out[i].stale.push_back(FeatureId{f});
    std::sort(out[i].stale.begin(), out[i].stale.end());
    out[i].stale.erase(std::unique(out[i].stale.begin(), out[i].stale.end()),
                       out[i].stale.end());
  }
  return out;
}

std::vector<FeatureId> ToIds(const std::vector<std::uint32_t>& ids) {
  std::vector<FeatureId> out;
  out.reserve(ids.size());
  for (std::uint32_t v : ids) out.push_back(FeatureId{v});
  return out;
}

py::dict GreedyToDict(const GreedyResult& r) {
  py::dict d;
  d["order"] = r.order;
  d["marginal"] = r.marginal;
  d["covered_weight"] = r.covered_weight;
  d["residual_updates"] = r.residual_updates;
  return d;
}

}  // namespace
}  // namespace fesail

PYBIND11_MODULE(_fesail, m) {
  using namespace fesail;
  m.doc() = "Staleness-aware replay sampling and training";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::exception<Error>(m, "FesailError"); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error_type.get_stored(),
                    (std::string(ToString(e.kind())) + ": " + e.what()).c_str());
    }
  });

  m.def(
      "weight_of",
      [](std::uint32_t s, const std::string& func, double bias) {
        return WeightOf(s, ParseWeightFunction(func), bias);
      },
      py::arg("staleness"), py::arg("func") = "inverse_proportional", py::arg("bias") = 1.0);

  py::class_<StalenessTable>(m, "StalenessTable")
      .def(py::init<>())
      .def("update",
           [](StalenessTable& t, const std::vector<std::uint32_t>& present) {
             t.Update(ToIds(present));
           })
      .def("staleness", [](const StalenessTable& t, std::uint32_t id) {
        return t.staleness(FeatureId{id});
      })
      .def("knows", [](const StalenessTable& t, std::uint32_t id) { return t.knows(FeatureId{id}); })
      .def_property_readonly("span_index", &StalenessTable::span_index)
      .def_property_readonly("num_known", &StalenessTable::num_known);

  m.def(
      "sas_greedy",
      [](const std::vector<std::vector<std::uint32_t>>& stale_sets,
         const std::vector<double>& weights, std::size_t capacity, bool neighbor) {
        const CandidateSet candidates = ToCandidates(stale_sets);
        return GreedyToDict(neighbor ? SasGreedyNeighbor(candidates, weights, capacity)
                                     : SasGreedyNaive(candidates, weights, capacity));
      },
      py::arg("stale_sets"), py::arg("weights"), py::arg("capacity"),
      py::arg("neighbor") = true);

  m.def(
      "brute_force_optimal",
      [](const std::vector<std::vector<std::uint32_t>>& stale_sets,
         const std::vector<double>& weights, std::size_t capacity) {
        const OptimalCover best = BruteForceOptimal(ToCandidates(stale_sets), weights, capacity);
        return py::make_tuple(best.value, best.selection);
      },
      py::arg("stale_sets"), py::arg("weights"), py::arg("capacity"));

  m.def(
      "covered_weight",
      [](const std::vector<std::vector<std::uint32_t>>& stale_sets,
         const std::vector<std::size_t>& selection, const std::vector<double>& weights) {
        return CoveredWeight(ToCandidates(stale_sets), selection, weights);
      },
      py::arg("stale_sets"), py::arg("selection"), py::arg("weights"));

  m.def("random_sample", &RandomSample, py::arg("pool_size"), py::arg("capacity"),
        py::arg("seed"));

  m.def("guard_coefficient", &GuardCoefficient, py::arg("staleness"), py::arg("s_max"),
        py::arg("eta"));

  m.def(
      "auc",
      [](const std::vector<double>& preds, const std::vector<int>& labels) {
        return Auc(preds, labels);
      },
      py::arg("preds"), py::arg("labels"));

  m.def(
      "ce_loss",
      [](const std::vector<double>& preds, const std::vector<int>& labels) {
        return CeLoss(preds, labels);
      },
      py::arg("preds"), py::arg("labels"));

  m.def(
      "generate_synthetic",
      [](const std::string& spec_text, const std::filesystem::path& out_dir) {
        const SyntheticSpec spec = ParseSyntheticSpec(spec_text);
        return WriteSynthetic(GenerateSynthetic(spec), out_dir);
      },
      py::arg("spec_text"), py::arg("out_dir"),
      "Writes span files for an INI-style spec and returns their paths.");

  m.def(
      "run_incremental",
      [](const std::string& config_text, const std::filesystem::path& base_dir) {
        const RunConfig config = ParseRunConfig(config_text, base_dir);
        ValidateRunConfig(config);
        RunResult result;
        {
          py::gil_scoped_release release;
          result = RunIncremental(config.pipeline, ListSpanFiles(config.data_dir));
        }
        py::list spans;
        for (const SpanMetrics& s : result.spans) {
          py::dict row;
          row["span"] = s.span;
          row["auc"] = s.auc;
          row["logloss"] = s.logloss;
          row["reservoir_size"] = s.reservoir_size;
          row["candidate_count"] = s.candidate_count;
          row["covered_weight"] = s.covered_weight;
          row["drop_ratio"] = s.drop_ratio;
          spans.append(row);
        }
        py::list buckets;
        for (const BucketRow& b : result.buckets) {
          py::dict row;
          row["span"] = b.span;
          row["bucket"] = b.bucket;
          row["auc"] = b.auc ? py::cast(*b.auc) : py::none();
          row["count"] = b.count;
          buckets.append(row);
        }
        py::dict out;
        out["spans"] = spans;
        out["buckets"] = buckets;
        out["mean_auc"] = result.mean_auc;
        out["mean_logloss"] = result.mean_logloss;
        out["fingerprint"] = Fingerprint(result.model);
        return out;
      },
      py::arg("config_text"), py::arg("base_dir") = std::filesystem::path("."),
      "Runs the span loop for an INI-style run config.");
}
