"""MMD computation (empirical and closed-form) and the sub-Gaussian error
parameter calculators for halvers, thinners, and the meta-procedures."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._accel import EvalCounter
from .compress import beta_n
from .kernels import (KernelOps, KernelSpec, TargetSpec, _embed_rows,
                      target_self_energy)
from .points import PointSeq


def mmd_empirical(kernel: KernelSpec, s1: PointSeq, s2: PointSeq,
                  counter: Optional[EvalCounter] = None) -> float:
    """Kernel maximum mean discrepancy between two empirical measures.

    Biased V-statistic form (diagonal terms included): the square root of
    mean k(s1,s1) - 2 mean k(s1,s2) + mean k(s2,s2), with round-off negatives
    clamped to zero before the root.
    """
    if s1.n == 0 or s2.n == 0:
        raise ValueError("MMD of an empty sequence is undefined")
    if s1.d != s2.d:
        raise ValueError(f"dimension mismatch: {s1.d} vs {s2.d}")
    ops = KernelOps(kernel, counter)
    sq = ops.mean(s1.data, s1.data) - 2.0 * ops.mean(s1.data, s2.data) \
        + ops.mean(s2.data, s2.data)
    return math.sqrt(max(sq, 0.0))


def mmd_to_target(kernel: KernelSpec, target: TargetSpec, s: PointSeq,
                  counter: Optional[EvalCounter] = None) -> float:
    """Exact MMD between an analytic target and an empirical measure.

    Only gaussian_iid / mog_iid targets have the required closed forms; score
    external-sample targets with mmd_empirical against their reference sample.
    """
    if not target.analytic:
        raise ValueError("mmd_to_target needs an analytic target; use "
                         "mmd_empirical against the reference sample instead")
    if s.n == 0:
        raise ValueError("MMD of an empty sequence is undefined")
    if s.d != target.d:
        raise ValueError(f"dimension mismatch: {s.d} vs {target.d}")
    ops = KernelOps(kernel, counter)
    sq = target_self_energy(target, kernel) \
        - 2.0 * float(np.mean(_embed_rows(target, kernel, s.data))) \
        + ops.mean(s.data, s.data)
    return math.sqrt(max(sq, 0.0))


@dataclass(frozen=True)
class SubGaussParams:
    """Tail-bound parameters of a thinning algorithm's MMD error: shift `a`,
    scale `v`, plus the opaque constants they were computed with."""

    a: float
    v: float
    C_a: float = 1.0
    C_v: float = 1.0
    inflation_M: float = 1.0
    k_sup: float = 1.0

    def __post_init__(self):
        if self.a < 0 or self.v < 0:
            raise ValueError("shift and scale must be non-negative")
        if self.inflation_M < 1.0:
            raise ValueError("inflation_M must be at least 1")
        if self.k_sup <= 0.0:
            raise ValueError("k_sup must be positive")

    @property
    def eps(self) -> float:
        """Scalar error summary max(v, a)."""
        return max(self.a, self.v)


def compress_params(h: SubGaussParams, n: int, g: int) -> SubGaussParams:
    """Compress tail parameters from the halver's parameters at input size
    ell_n: scale 4 (a + v) sqrt(2 (log4 n - g)), shift scale * sqrt(log(n+1))."""
    beta = beta_n(n, g)
    v_tilde = 4.0 * (h.a + h.v) * math.sqrt(2.0 * (beta + 1))
    a_tilde = v_tilde * math.sqrt(math.log(n + 1.0))
    return SubGaussParams(a=a_tilde, v=v_tilde, C_a=h.C_a, C_v=h.C_v,
                          inflation_M=h.inflation_M, k_sup=h.k_sup)


def compress_inflation_bound(n: int) -> float:
    """Ceiling on eps(compress) / eps(halver at ell_n): 10 log(n + 1)."""
    return 10.0 * math.log(n + 1.0)


def compresspp_params(h: SubGaussParams, t: SubGaussParams, n: int,
                      g: int) -> SubGaussParams:
    """Compress++ tail parameters from the halver's (at ell_n) and the
    thinner's (at ell_n / 2): v_hat = v_tilde + v', a_hat = a_tilde + a' +
    v_hat sqrt(log 2)."""
    comp = compress_params(h, n, g)
    v_hat = comp.v + t.v
    a_hat = comp.a + t.a + v_hat * math.sqrt(math.log(2.0))
    return SubGaussParams(a=a_hat, v=v_hat, C_a=h.C_a, C_v=h.C_v,
                          inflation_M=h.inflation_M, k_sup=h.k_sup)


def kt_params(n: int, n_out: int, delta: float, k_sup: float = 1.0,
              C_a: float = 1.0, C_v: float = 1.0,
              inflation_M: float = 1.0) -> SubGaussParams:
    """Kernel-thinning tail parameters for compressing n points to n_out:
    a = (C_a / n_out) sqrt(k_sup) and
    v = (C_v / n_out) sqrt(k_sup log(6 n_out log2(n / n_out) / delta)) * M,
    exact in the supplied opaque constants."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    n, n_out = int(n), int(n_out)
    if n_out < 1 or n % n_out != 0:
        raise ValueError(f"n_out must divide n, got {n} / {n_out}")
    ratio = n // n_out
    if ratio & (ratio - 1):
        raise ValueError(f"n / n_out must be a power of 2, got {ratio}")
    if ratio == 1:
        raise ValueError("n_out must be strictly smaller than n")
    rounds = ratio.bit_length() - 1
    a = C_a / n_out * math.sqrt(k_sup)
    v = C_v / n_out * math.sqrt(
        k_sup * math.log(6.0 * n_out * rounds / delta)) * inflation_M
    return SubGaussParams(a=a, v=v, C_a=C_a, C_v=C_v,
                          inflation_M=inflation_M, k_sup=k_sup)


@dataclass(frozen=True)
class DecayFit:
    """Least-squares line through (log10 n, log10 value) points."""

    slope: float
    intercept: float
    r2: float


def fit_decay(points) -> DecayFit:
    """Fit the empirical decay rate of a positive curve on a log-log scale.

    `points` is a sequence of (n, value) pairs; at least three are required
    and every entry must be positive.
    """
    pts = [(float(n), float(v)) for n, v in points]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points to fit a decay rate, got {len(pts)}")
    if any(n <= 0 or v <= 0 for n, v in pts):
        raise ValueError("decay fits need strictly positive sizes and values")
    x = np.log10([n for n, _ in pts])
    y = np.log10([v for _, v in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return DecayFit(slope=float(slope), intercept=float(intercept), r2=r2)
