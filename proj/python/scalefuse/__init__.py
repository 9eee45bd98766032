# Copyright 2026 The scalefuse Authors. All Rights Reserved.
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

"""Python access to the scalefuse C++ core.

Config arguments are key=value text in the same format the CLI reads;
an empty string means all defaults.
"""

import json

from ._scalefuse import (
    ConfigError,
    ContractError,
    DataError,
    DivergenceError,
    Error,
    Model,
    ablation_row_names,
    aggregate_bag,
    cross_attention,
    default_config,
    generate_dataset,
    macro_scores,
    mean_pool,
    normalize_config,
    pairwise_distances,
    paired_t_test,
    read_manifest,
    render_table,
    roc_auc_macro,
    write_dataset,
)
from . import _scalefuse

__all__ = [
    "ConfigError", "ContractError", "DataError", "DivergenceError", "Error", "Model",
    "ablate", "ablation_row_names", "aggregate_bag", "cross_attention", "cross_validate",
    "default_config", "generate_dataset", "macro_scores", "mean_pool", "normalize_config",
    "pairwise_distances", "paired_t_test", "read_manifest", "render_table", "roc_auc_macro",
    "write_dataset",
]


def cross_validate(config="", seed=None, jobs=1):
    """Stratified k-fold run; returns the summary document as a dict."""
    return json.loads(_scalefuse.cross_validate(config, seed, jobs))


def ablate(suite, config="", seed=None, jobs=1):
    """Runs every row of an ablation suite; returns the summary as a dict."""
    return json.loads(_scalefuse.ablate(suite, config, seed, jobs))
