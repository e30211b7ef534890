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

"""Staleness-aware replay sampling and training for incremental CTR models."""

from ._fesail import (
    FesailError,
    StalenessTable,
    auc,
    brute_force_optimal,
    ce_loss,
    covered_weight,
    generate_synthetic,
    guard_coefficient,
    random_sample,
    run_incremental,
    sas_greedy,
    weight_of,
)

__all__ = [
    "FesailError",
    "StalenessTable",
    "auc",
    "brute_force_optimal",
    "ce_loss",
    "covered_weight",
    "generate_synthetic",
    "guard_coefficient",
    "random_sample",
    "run_incremental",
    "sas_greedy",
    "weight_of",
]
