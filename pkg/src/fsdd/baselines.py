"""Ablation counterpart: the same denoiser sampled with the sum-repair disabled.

The unconstrained arm shares every component with the constrained sampler
except the greedy adjustment calls, isolating exactly what the fixed-sum
machinery contributes.
"""

from __future__ import annotations

import enum

import numpy as np

from .net import ParameterStore
from .sampler import SampleConfig, generate_batch


class BaselineKind(str, enum.Enum):
    DISCRETE_NO_FIXED_SUM = "discrete_no_fixed_sum"
    FSDD = "fsdd"


def generate_baseline(
    params: ParameterStore, config: SampleConfig, kind: BaselineKind | str, n: int = 1
) -> np.ndarray:
    """Draw n samples as an (n, C) integer array.

    The fsdd arm delegates to the constrained sampler; the
    discrete_no_fixed_sum arm runs the identical reverse loop with every
    greedy adjustment disabled, so row sums are unconstrained.
    """
    kind = BaselineKind(kind)
    if kind is BaselineKind.FSDD:
        return generate_batch(params, config, n, adjust=True)
    return generate_batch(params, config, n, adjust=False)
