"""Fixed-sum discrete diffusion over token-count vectors.

The package converts unordered token multisets to fixed-sum count vectors and
back, corrupts and denoises those vectors without ever leaving the sum-M
constraint set, and ships a fully self-contained trainable denoiser with an
oracle-checked gradient path.
"""

from .codec import (
    ConstraintError,
    CountVector,
    FormatError,
    TokenMultiset,
    counts_to_set,
    random_permutation,
    set_to_counts,
)
from .forward import NoisySample, forward_params, greedy_adjust, sample_forward
from .kernels import (
    GaussianParams,
    RngStream,
    discretized_gaussian_pmf,
    sample_discretized_gaussian,
    sample_multinomial_noise,
    top_p_sample,
)
from .metrics import EvalReport, enumerate_count_vectors, sum_violation, tv_distance
from .net import DenoiserConfig, DenoiserLogits, ParameterStore, cross_entropy_loss, forward
from .sampler import SampleConfig, generate, guided_logits, reverse_step

__version__ = "0.1.0"

__all__ = [
    "ConstraintError",
    "CountVector",
    "DenoiserConfig",
    "DenoiserLogits",
    "EvalReport",
    "FormatError",
    "GaussianParams",
    "NoisySample",
    "ParameterStore",
    "RngStream",
    "SampleConfig",
    "TokenMultiset",
    "__version__",
    "counts_to_set",
    "cross_entropy_loss",
    "discretized_gaussian_pmf",
    "enumerate_count_vectors",
    "forward",
    "forward_params",
    "generate",
    "greedy_adjust",
    "guided_logits",
    "random_permutation",
    "reverse_step",
    "sample_discretized_gaussian",
    "sample_forward",
    "sample_multinomial_noise",
    "set_to_counts",
    "sum_violation",
    "top_p_sample",
    "tv_distance",
]
