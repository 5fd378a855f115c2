"""Near-linear distribution compression.

Compress and Compress++ wrap any halving/thinning algorithm (kernel halving,
kernel thinning, kernel herding, standard thinning ship built in) to produce
sqrt(n)-point coresets in near-linear time, with MMD diagnostics, failure
budget wiring, streaming operation, and a benchmark harness.
"""

from ._accel import EvalCounter
from .backend import active_backend, set_backend
from .compress import (CompressConfig, CompressTrace, HalveCall,
                       RecursionSummary, StreamingCompressor, ThinCall,
                       beta_n, choose_g, compress, compress_streaming,
                       compresspp, delta_budget, ell_n, error_recursion,
                       runtime_recursion)
from .diagnostics import (DecayFit, SubGaussParams, compress_inflation_bound,
                          compress_params, compresspp_params, fit_decay,
                          kt_params, mmd_empirical, mmd_to_target)
from .kernels import (KernelSpec, TargetSpec, gram, kernel_eval,
                      register_kernel_family, target_mean_embedding,
                      target_self_energy)
from .points import (PointSeq, SeedPath, concatenate, partition4, split_seed,
                     standard_thin)
from .targets import (TargetPreset, ar1_chain, get_preset, ingest_chain,
                      preset_targets, sample_target)
from .thinners import (HalveOutcome, HalverSpec, ThinnerSpec, herd_halve,
                       herding, kernel_halve, kt, kt_split, kt_swap,
                       run_halver, run_thinner, symmetrize, uniform_halve)

__all__ = [
    "EvalCounter",
    "active_backend", "set_backend",
    "CompressConfig", "CompressTrace", "HalveCall", "ThinCall",
    "RecursionSummary", "StreamingCompressor", "beta_n", "choose_g",
    "compress", "compress_streaming", "compresspp", "delta_budget", "ell_n",
    "error_recursion", "runtime_recursion",
    "DecayFit", "SubGaussParams", "compress_inflation_bound",
    "compress_params", "compresspp_params", "fit_decay", "kt_params",
    "mmd_empirical", "mmd_to_target",
    "KernelSpec", "TargetSpec", "gram", "kernel_eval",
    "register_kernel_family", "target_mean_embedding", "target_self_energy",
    "PointSeq", "SeedPath", "concatenate", "partition4", "split_seed",
    "standard_thin",
    "TargetPreset", "ar1_chain", "get_preset", "ingest_chain",
    "preset_targets", "sample_target",
    "HalveOutcome", "HalverSpec", "ThinnerSpec", "herd_halve", "herding",
    "kernel_halve", "kt", "kt_split", "kt_swap", "run_halver", "run_thinner",
    "symmetrize", "uniform_halve",
]
