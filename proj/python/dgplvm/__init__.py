# Copyright 2026 The dgplvm Authors
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
#

"""Latent-input Gaussian process models with derivative information.

Thin wrapper over the C++ core. See ``fit`` and ``simulate``.
"""

from ._dgplvm import (
    Block,
    Dataset,
    DegenerateData,
    InitializationError,
    InvalidArgument,
    KernelFamily,
    KernelSpec,
    NotPositiveDefinite,
    Parameterization,
    ParseError,
    Scenario,
    SchemaError,
    all_variant_codes,
    bulk_ess,
    dataset_hash,
    fit,
    joint_cov,
    kernel_block,
    read_dataset_csv,
    rmse_latent,
    simulate,
    split_rhat,
    tail_ess,
    write_dataset_csv,
)

__version__ = "0.1.0"


def latent_draws(result, chain=0):
    """Posterior draws of x from a ``fit`` result, one column per input."""
    c = result["chains"][chain]
    cols = [i for i, n in enumerate(c["names"]) if n.startswith("x[")]
    return c["draws"][:, cols]
