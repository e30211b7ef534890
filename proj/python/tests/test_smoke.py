# Copyright 2026 The FeSAIL Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import pytest

import fesail

ABC = [[1, 2], [2, 3], [3]]
WEIGHTS = [0.0, 2.0, 1.5, 1.0]


def test_weight_of():
    assert fesail.weight_of(1) == 2.0
    assert fesail.weight_of(2) == 1.5
    assert math.isclose(fesail.weight_of(1, "negative_exponential", 0.0), math.exp(-1))
    with pytest.raises(fesail.FesailError):
        fesail.weight_of(0)


def test_staleness_table():
    table = fesail.StalenessTable()
    table.update([0, 1])
    table.update([0])
    table.update([0])
    assert table.staleness(0) == 0
    assert table.staleness(1) == 2
    assert table.span_index == 3


def test_greedy_matches_hand_values():
    for neighbor in (False, True):
        result = fesail.sas_greedy(ABC, WEIGHTS, 2, neighbor=neighbor)
        assert result["order"] == [0, 1]
        assert result["covered_weight"] == 4.5
    value, selection = fesail.brute_force_optimal(ABC, WEIGHTS, 1)
    assert value == 3.5 and selection == [0]
    assert fesail.covered_weight(ABC, [0, 1], WEIGHTS) == 4.5


def test_metrics_and_guard():
    assert fesail.auc([0.9, 0.1], [1, 0]) == 1.0
    assert math.isclose(fesail.ce_loss([0.5], [1]), math.log(2))
    assert fesail.guard_coefficient(2, 10, 5) == 0.4
    assert fesail.random_sample(10, 3, 7) == fesail.random_sample(10, 3, 7)


def test_generate_and_run(tmp_path):
    spec = "\n".join([
        "[synthetic]", "num_spans = 4", "samples_per_span = 300", "num_fields = 3",
        "features_per_field = 20", "weight_scale = 4", "seed = 3",
        "[schedule]", "f0_1 = 1,2",
    ])
    files = fesail.generate_synthetic(spec, str(tmp_path / "data"))
    assert len(files) == 4
    config = "\n".join([
        "[data]", "spans = data", "[run]", "policy = FeSAIL", "seed = 1",
        "[train]", "max_epochs = 2",
    ])
    first = fesail.run_incremental(config, str(tmp_path))
    second = fesail.run_incremental(config, str(tmp_path))
    assert len(first["spans"]) == 2
    assert first["fingerprint"] == second["fingerprint"]
    assert all(0.0 <= s["auc"] <= 1.0 for s in first["spans"])
