"""Halving and thinning algorithms.

Halvers return both halves of their input so callers can symmetrize (return
either half with equal probability), which makes any halver conditionally
unbiased. Thinners map n points to floor(n / thin_factor) points. All
randomness flows through SeedPath, so identical (input, spec, seed) triples
reproduce outputs bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _accel, backend
from ._accel import EvalCounter
from .kernels import KernelOps, KernelSpec
from .points import PointSeq, SeedPath

HALVER_ALGORITHMS = ("kernel_halve", "uniform_halve", "herd_halve")
THINNER_ALGORITHMS = ("kt", "kt_split_only", "herding", "standard")


@dataclass(frozen=True)
class HalverSpec:
    """Declarative halver: algorithm name, kernel (if kernel-based), failure
    budget, and whether the dispatcher should symmetrize the output."""

    algorithm: str
    kernel: Optional[KernelSpec] = None
    delta: float = 0.5
    symmetrized: bool = False

    def __post_init__(self):
        if self.algorithm not in HALVER_ALGORITHMS:
            raise ValueError(f"unknown halver {self.algorithm!r}; "
                             f"expected one of {HALVER_ALGORITHMS}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.algorithm != "uniform_halve" and self.kernel is None:
            raise ValueError(f"{self.algorithm} requires a kernel")

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "kernel": None if self.kernel is None else self.kernel.to_json(),
            "delta": self.delta,
            "symmetrized": self.symmetrized,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "HalverSpec":
        kern = obj.get("kernel")
        return cls(
            algorithm=obj["algorithm"],
            kernel=None if kern is None else KernelSpec.from_json(kern),
            delta=obj.get("delta", 0.5),
            symmetrized=obj.get("symmetrized", False),
        )


@dataclass(frozen=True)
class ThinnerSpec:
    """Declarative 2^g-thinner (or any integer factor for herding/standard)."""

    algorithm: str
    kernel: Optional[KernelSpec] = None
    delta: float = 0.5
    thin_factor: int = 1

    def __post_init__(self):
        if self.algorithm not in THINNER_ALGORITHMS:
            raise ValueError(f"unknown thinner {self.algorithm!r}; "
                             f"expected one of {THINNER_ALGORITHMS}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        tf = int(self.thin_factor)
        if tf < 1:
            raise ValueError(f"thin_factor must be >= 1, got {tf}")
        if self.algorithm in ("kt", "kt_split_only") and tf & (tf - 1):
            raise ValueError(f"{self.algorithm} needs a power-of-two thin_factor, got {tf}")
        if self.algorithm != "standard" and self.kernel is None:
            raise ValueError(f"{self.algorithm} requires a kernel")
        object.__setattr__(self, "thin_factor", tf)

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "kernel": None if self.kernel is None else self.kernel.to_json(),
            "delta": self.delta,
            "thin_factor": self.thin_factor,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ThinnerSpec":
        kern = obj.get("kernel")
        return cls(
            algorithm=obj["algorithm"],
            kernel=None if kern is None else KernelSpec.from_json(kern),
            delta=obj.get("delta", 0.5),
            thin_factor=obj.get("thin_factor", 1),
        )


@dataclass
class HalveOutcome:
    """Both halves of a halving call. `coin` records the symmetrization draw
    (+1 kept `selected`, -1 kept `complement`, 0 not yet drawn)."""

    selected: PointSeq
    complement: PointSeq
    coin: int = 0


# ---------------------------------------------------------------------------
# Core index-level routines
# ---------------------------------------------------------------------------


def _check_even(n: int) -> None:
    if n % 2 != 0:
        raise ValueError(f"halving needs an even number of points, got {n}")


def _split_pair_indices(signs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # signs[t] = +1 puts the second point of pair t into the selected half.
    pairs = np.arange(signs.size, dtype=np.int64)
    second = (signs == 1).astype(np.int64)
    selected = 2 * pairs + second
    complement = 2 * pairs + (1 - second)
    return selected, complement


def _halve_signs(X: np.ndarray, kernel: KernelSpec, delta_i: float,
                 uniforms: np.ndarray, counter) -> np.ndarray:
    two_log = 2.0 * math.log(2.0 / delta_i)
    if backend.use_numba() and kernel.family == "gaussian":
        signs, nev = _accel.nb_halve_signs(
            X, 1.0 / (2.0 * kernel.bandwidth_sq), two_log, uniforms)
        if counter is not None:
            counter.add(nev)
        return signs
    return _accel.np_halve_signs(X, KernelOps(kernel, counter), two_log, uniforms)


def _herd_indices(X: np.ndarray, kernel: KernelSpec, m_out: int,
                  distinct: bool, counter) -> np.ndarray:
    ops = KernelOps(kernel, counter)
    meank = ops.mean_rows(X, X)
    if backend.use_numba() and kernel.family == "gaussian":
        idx, nev = _accel.nb_herding(
            X, 1.0 / (2.0 * kernel.bandwidth_sq), meank, m_out, distinct)
        if counter is not None:
            counter.add(nev)
        return idx
    return _accel.np_herding(X, ops, meank, m_out, distinct)


def _baseline_indices(n: int, m_out: int) -> np.ndarray:
    return (np.arange(1, m_out + 1, dtype=np.int64) * n - 1) // m_out


def _kt_split_indices(X: np.ndarray, kernel: KernelSpec, delta: float,
                      rounds: int, rng: np.random.Generator,
                      counter) -> list[np.ndarray]:
    n = X.shape[0]
    groups = [np.arange(n, dtype=np.int64)]
    if rounds == 0:
        return groups
    # Every pairwise coin, at every round, runs on the budget delta / n fixed
    # by the size handed to this invocation.
    delta_i = delta / n
    for _ in range(rounds):
        nxt = []
        for ix in groups:
            uniforms = rng.random(ix.size // 2)
            signs = _halve_signs(np.ascontiguousarray(X[ix]), kernel,
                                 delta_i, uniforms, counter)
            sel, comp = _split_pair_indices(signs)
            nxt.append(ix[sel])
            nxt.append(ix[comp])
        groups = nxt
    return groups


def _kt_swap_indices(X: np.ndarray, pool: list[np.ndarray], kernel: KernelSpec,
                     distinct: bool, counter) -> np.ndarray:
    ops = KernelOps(kernel, counter)
    meank = ops.mean_rows(X, X)
    best_score = np.inf
    best_ix = None
    for ix in pool:
        rows = np.ascontiguousarray(X[ix])
        score = ops.mean(rows, rows) - 2.0 * float(np.mean(meank[ix]))
        if score < best_score:
            best_score = score
            best_ix = ix
    coreset = best_ix.astype(np.int64).copy()
    member_count = np.zeros(X.shape[0], dtype=np.int64)
    np.add.at(member_count, coreset, 1)
    if distinct and member_count.max() > 1:
        raise ValueError("distinct swap requires candidates without repeats")
    if backend.use_numba() and kernel.family == "gaussian":
        final_score, nev = _accel.nb_swap_sweep(
            X, 1.0 / (2.0 * kernel.bandwidth_sq), coreset, meank,
            member_count, distinct)
        if counter is not None:
            counter.add(nev)
    else:
        diag = ops.diag(X)
        final_score = _accel.np_swap_sweep(
            X, ops, coreset, meank, diag, member_count, distinct)
    # Greedy replacements only ever accept improvements.
    assert final_score <= best_score + 1e-9, \
        f"swap worsened the coreset: {final_score} > {best_score}"
    return coreset


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def kernel_halve(s: PointSeq, kernel: KernelSpec, delta: float, seed: SeedPath,
                 counter: Optional[EvalCounter] = None) -> HalveOutcome:
    """Self-balancing kernel halving of consecutive pairs.

    Walks the pairs (x_1, x_2), (x_3, x_4), ... keeping a signed discrepancy
    between the two growing halves; each pair's assignment flips with a
    probability chosen to shrink that discrepancy, with per-pair failure
    budget delta / n feeding the adaptive threshold.
    """
    _check_even(s.n)
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if s.n == 0:
        return HalveOutcome(s, s)
    uniforms = seed.generator().random(s.n // 2)
    signs = _halve_signs(s.data, kernel, delta / s.n, uniforms, counter)
    sel, comp = _split_pair_indices(signs)
    return HalveOutcome(s.take(sel), s.take(comp))


def uniform_halve(s: PointSeq, seed: SeedPath) -> HalveOutcome:
    """Reference halver: a fair coin routes each consecutive pair."""
    _check_even(s.n)
    if s.n == 0:
        return HalveOutcome(s, s)
    uniforms = seed.generator().random(s.n // 2)
    signs = np.where(uniforms <= 0.5, 1, -1).astype(np.int64)
    sel, comp = _split_pair_indices(signs)
    return HalveOutcome(s.take(sel), s.take(comp))


def herd_halve(s: PointSeq, kernel: KernelSpec,
               counter: Optional[EvalCounter] = None) -> HalveOutcome:
    """Deterministic halver: greedily herd n/2 distinct points; the rest form
    the complement (in input order)."""
    _check_even(s.n)
    if s.n == 0:
        return HalveOutcome(s, s)
    sel = _herd_indices(s.data, kernel, s.n // 2, True, counter)
    mask = np.ones(s.n, dtype=bool)
    mask[sel] = False
    comp = np.flatnonzero(mask).astype(np.int64)
    return HalveOutcome(s.take(sel), s.take(comp))


def symmetrize(outcome: HalveOutcome, seed: SeedPath) -> PointSeq:
    """Return the selected half or its complement with equal probability,
    recording the coin on the outcome."""
    coin = 1 if seed.generator().random() < 0.5 else -1
    outcome.coin = coin
    return outcome.selected if coin == 1 else outcome.complement


def kt_split(s: PointSeq, kernel: KernelSpec, delta: float, rounds: int,
             seed: SeedPath, counter: Optional[EvalCounter] = None) -> list[PointSeq]:
    """`rounds` recursive rounds of kernel halving; returns all 2^rounds leaf
    coresets of size n / 2^rounds."""
    rounds = int(rounds)
    if rounds < 0:
        raise ValueError("rounds must be non-negative")
    if s.n % (1 << rounds) != 0:
        raise ValueError(f"{s.n} points cannot be split {rounds} times evenly")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    groups = _kt_split_indices(s.data, kernel, delta, rounds,
                               seed.generator(), counter)
    return [s.take(ix) for ix in groups]


def kt_swap(s_in: PointSeq, candidates: list[PointSeq], kernel: KernelSpec,
            counter: Optional[EvalCounter] = None,
            distinct: bool = False) -> PointSeq:
    """Pick the candidate (or the standard-thinning baseline) closest to the
    input in MMD, then run one greedy pass swapping each coreset position for
    the input point that most reduces MMD to the input.

    Candidate rows must be input points; the result is never worse, in MMD to
    the input, than the best pool member.
    """
    if not candidates:
        raise ValueError("kt_swap needs at least one candidate")
    sizes = {c.n for c in candidates}
    if len(sizes) != 1:
        raise ValueError(f"candidates must share one size, got {sorted(sizes)}")
    m_out = sizes.pop()
    if not 1 <= m_out <= s_in.n:
        raise ValueError(f"candidate size {m_out} outside 1..{s_in.n}")
    lookup: dict[bytes, int] = {}
    for i in range(s_in.n - 1, -1, -1):
        lookup[s_in.data[i].tobytes()] = i
    pool = []
    for c in candidates:
        if c.d != s_in.d:
            raise ValueError("candidate dimension does not match input")
        try:
            pool.append(np.array([lookup[row.tobytes()] for row in c.data],
                                 dtype=np.int64))
        except KeyError:
            raise ValueError("kt_swap candidates must consist of input points")
    pool.append(_baseline_indices(s_in.n, m_out))
    idx = _kt_swap_indices(s_in.data, pool, kernel, distinct, counter)
    return s_in.take(idx)


def kt(s: PointSeq, kernel: KernelSpec, delta: float, thin_factor: int,
       seed: SeedPath, counter: Optional[EvalCounter] = None) -> PointSeq:
    """Kernel thinning: split into 2^g candidate coresets, then swap-refine
    the best of them against the input. thin_factor = 2^g."""
    tf = int(thin_factor)
    if tf < 1 or tf & (tf - 1):
        raise ValueError(f"thin_factor must be a power of two, got {thin_factor}")
    if s.n % tf != 0:
        raise ValueError(f"{s.n} points are not divisible by thin_factor {tf}")
    if tf == 1:
        return s
    rounds = tf.bit_length() - 1
    groups = _kt_split_indices(s.data, kernel, delta, rounds,
                               seed.generator(), counter)
    pool = groups + [_baseline_indices(s.n, s.n // tf)]
    idx = _kt_swap_indices(s.data, pool, kernel, False, counter)
    return s.take(idx)


def herding(s: PointSeq, kernel: KernelSpec, m_out: int, distinct: bool = False,
            counter: Optional[EvalCounter] = None) -> PointSeq:
    """Greedy kernel herding against the input's empirical measure.

    Repetition is allowed unless `distinct` is set (the mode used when herding
    serves as a halver). Ties break toward the lowest input index.
    """
    m_out = int(m_out)
    if not 1 <= m_out <= s.n:
        raise ValueError(f"m_out must satisfy 1 <= m_out <= n, got {m_out}")
    idx = _herd_indices(s.data, kernel, m_out, distinct, counter)
    return s.take(idx)


# ---------------------------------------------------------------------------
# Dispatchers
# ---------------------------------------------------------------------------


def run_halver(spec: HalverSpec, s: PointSeq, seed: SeedPath,
               delta: Optional[float] = None,
               counter: Optional[EvalCounter] = None) -> HalveOutcome:
    """Execute a declared halver; `delta` overrides the declared budget
    (the meta-procedures pass per-call budgets this way)."""
    d = spec.delta if delta is None else delta
    if spec.algorithm == "kernel_halve":
        out = kernel_halve(s, spec.kernel, d, seed, counter)
    elif spec.algorithm == "uniform_halve":
        out = uniform_halve(s, seed)
    else:
        out = herd_halve(s, spec.kernel, counter)
    assert out.selected.n == s.n // 2 == out.complement.n, \
        "halver violated the exact-half contract"
    return out


def run_thinner(spec: ThinnerSpec, s: PointSeq, seed: SeedPath,
                delta: Optional[float] = None,
                counter: Optional[EvalCounter] = None) -> PointSeq:
    """Execute a declared thinner; output size is floor(n / thin_factor)."""
    from .points import standard_thin

    d = spec.delta if delta is None else delta
    tf = spec.thin_factor
    if spec.algorithm == "kt":
        return kt(s, spec.kernel, d, tf, seed, counter)
    if spec.algorithm == "kt_split_only":
        if tf == 1:
            return s
        rounds = tf.bit_length() - 1
        return kt_split(s, spec.kernel, d, rounds, seed, counter)[0]
    if spec.algorithm == "herding":
        return herding(s, spec.kernel, s.n // tf, False, counter)
    return standard_thin(s, s.n // tf)
