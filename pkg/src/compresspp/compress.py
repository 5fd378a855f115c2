"""Compress and Compress++ meta-procedures, their failure-probability budgets,
oversampling selection rules, analytic runtime/error recursions, and the
bounded-memory streaming variant.

Compress recursively splits the input into four blocks, compresses each, and
halves the concatenation, returning 2^g * sqrt(n) input points. Compress++
then applies a 2^g-thinner to reach sqrt(n). Every Halve/Thin invocation is
recorded in a trace for call-count, budget, and memory accounting.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Union

import numpy as np

from ._accel import EvalCounter
from .points import PointSeq, SeedPath, concatenate, partition4
from .thinners import HalverSpec, ThinnerSpec, run_halver, run_thinner, symmetrize

logger = logging.getLogger("compresspp")

BUDGET_VARIANTS = (
    "ex3_ktsplit_compress",
    "ex5_kt_compress",
    "ex6_ktsplit_cpp",
    "ex7_kt_cpp",
    "fixed_delta",
)
_COMPRESS_ONLY_VARIANTS = ("ex3_ktsplit_compress", "ex5_kt_compress")
_CPP_VARIANTS = ("ex6_ktsplit_cpp", "ex7_kt_cpp")


def _exact_log4(x: int) -> int:
    k = (int(x).bit_length() - 1) // 2
    if 4 ** k != x:
        raise ValueError(f"{x} is not a power of 4")
    return k


def validate_input_size(n: int, g: int) -> None:
    """Inputs must satisfy n = 4^k * 4^g so the recursion bottoms out at 4^g."""
    base = 4 ** g
    if n < base or n % base != 0:
        raise ValueError(f"input size {n} is not of the form 4^k * 4^g for g={g}")
    try:
        _exact_log4(n // base)
    except ValueError:
        raise ValueError(
            f"input size {n} is not of the form 4^k * 4^g for g={g}") from None


def ell_n(n: int, g: int) -> int:
    """Size of the top-level halve input: 2^(g+1) * sqrt(n)."""
    return (1 << (g + 1)) * math.isqrt(n)


def beta_n(n: int, g: int) -> int:
    """Depth of the halve-call ladder: log4(n) - g - 1 (-1 at the base case)."""
    validate_input_size(n, g)
    return _exact_log4(n) - g - 1


@dataclass(frozen=True)
class CompressConfig:
    """Wiring for one meta-procedure run: oversampling parameter g, the halver,
    an optional 2^g-thinner (Compress++ only), the global failure probability,
    and the per-call budget rule."""

    g: int
    halver: HalverSpec
    thinner: Optional[ThinnerSpec] = None
    delta: float = 0.5
    budget_variant: str = "fixed_delta"

    def __post_init__(self):
        g = int(self.g)
        if g < 0:
            raise ValueError(f"g must be non-negative, got {g}")
        object.__setattr__(self, "g", g)
        if self.budget_variant not in BUDGET_VARIANTS:
            raise ValueError(f"unknown budget_variant {self.budget_variant!r}; "
                             f"expected one of {BUDGET_VARIANTS}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.thinner is not None and self.thinner.thin_factor != 1 << g:
            raise ValueError(
                f"thinner factor {self.thinner.thin_factor} must equal 2^g = {1 << g}")
        if self.budget_variant in _CPP_VARIANTS and g == 0:
            # The two-stage budget gives thinning a g / (g + 2^g (beta+1))
            # share, which is zero mass at g = 0.
            logger.warning("rejecting %s with g=0: the thinning stage would "
                           "receive a zero failure budget", self.budget_variant)
            raise ValueError(f"{self.budget_variant} requires g >= 1 "
                             "(thin budget degenerates to zero at g = 0)")

    def to_json(self) -> dict:
        return {
            "g": self.g,
            "halver": self.halver.to_json(),
            "thinner": None if self.thinner is None else self.thinner.to_json(),
            "delta": self.delta,
            "budget_variant": self.budget_variant,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CompressConfig":
        thinner = obj.get("thinner")
        return cls(
            g=obj["g"],
            halver=HalverSpec.from_json(obj["halver"]),
            thinner=None if thinner is None else ThinnerSpec.from_json(thinner),
            delta=obj.get("delta", 0.5),
            budget_variant=obj.get("budget_variant", "fixed_delta"),
        )


@dataclass(frozen=True)
class HalveCall:
    level: int
    size: int
    delta: float


@dataclass(frozen=True)
class ThinCall:
    size: int
    delta: float


@dataclass
class CompressTrace:
    """Audit record of every Halve/Thin invocation made by a run."""

    halve_calls: list[HalveCall] = field(default_factory=list)
    thin_call: Optional[ThinCall] = None
    peak_stored_points: int = 0

    def size_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for call in self.halve_calls:
            hist[call.size] = hist.get(call.size, 0) + 1
        return hist

    def failure_mass(self) -> float:
        """Total failure probability implied by the realized budgets: each call
        run at budget d fails with probability at most d / 2."""
        mass = sum(c.delta for c in self.halve_calls) / 2.0
        if self.thin_call is not None:
            mass += self.thin_call.delta / 2.0
        return mass

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps({"level": c.level, "size": c.size, "delta": c.delta}) + "\n"
            for c in self.halve_calls
        )


def delta_budget(variant: str, ell: int, n: int, g: int, delta: float,
                 role: str = "halve") -> float:
    """Failure budget handed to one Halve (or Thin) call of input size `ell`
    inside a size-n run; summing the implied per-call failure masses over a
    full run never exceeds delta / 2."""
    if variant not in BUDGET_VARIANTS:
        raise ValueError(f"unknown budget_variant {variant!r}")
    if role not in ("halve", "thin"):
        raise ValueError(f"role must be 'halve' or 'thin', got {role!r}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    validate_input_size(n, g)
    beta = beta_n(n, g)
    ln = ell_n(n, g)
    if role == "halve":
        valid = {ln >> i for i in range(beta + 1)}
        if ell not in valid:
            raise ValueError(
                f"halve input size {ell} is not of the form {ln} * 2^-i "
                f"for i in 0..{beta}")
    else:
        if ell != ln // 2:
            raise ValueError(f"thin input size {ell} must equal {ln // 2}")
    if variant == "fixed_delta":
        return delta
    if variant in _COMPRESS_ONLY_VARIANTS:
        if role == "thin":
            raise ValueError(f"{variant} defines no thinning budget")
        return ell * ell / (n * 4 ** (g + 1) * (beta + 1)) * delta
    # ex6 / ex7: two-stage allocation shared between all halve calls and the
    # single thin call.
    denom = g + (1 << g) * (beta + 1)
    if role == "halve":
        return ell * ell / (4 * n * (1 << g) * denom) * delta
    if g == 0:
        logger.warning("%s thin budget is degenerate (zero) at g=0", variant)
    return g / denom * delta


def _compress_rec(s: PointSeq, cfg: CompressConfig, seed: SeedPath, level: int,
                  n_top: int, counter, parallel: bool):
    if s.n == 4 ** cfg.g:
        return s, []
    parts = partition4(s)
    args = [(parts[i], cfg, seed.split(i), level + 1, n_top, counter, False)
            for i in range(4)]
    if parallel:
        with ThreadPoolExecutor(max_workers=4) as pool:
            futures = [pool.submit(_compress_rec, *a) for a in args]
            results = [f.result() for f in futures]
    else:
        results = [_compress_rec(*a) for a in args]
    calls: list[HalveCall] = []
    for _, child_calls in results:
        calls.extend(child_calls)
    stitched = concatenate([r[0] for r in results])
    d_call = delta_budget(cfg.budget_variant, stitched.n, n_top, cfg.g, cfg.delta)
    outcome = run_halver(cfg.halver, stitched, seed.split(4), delta=d_call,
                         counter=counter)
    out = symmetrize(outcome, seed.split(5)) if cfg.halver.symmetrized \
        else outcome.selected
    calls.append(HalveCall(level, stitched.n, d_call))
    return out, calls


def compress(s: PointSeq, cfg: CompressConfig, seed: SeedPath,
             counter: Optional[EvalCounter] = None,
             parallel: bool = False) -> tuple[PointSeq, CompressTrace]:
    """Divide-and-conquer compression to 2^g * sqrt(n) input points.

    Splits into four contiguous blocks, recurses, and halves the concatenated
    results; inputs of size 4^g return unchanged. Each recursive branch draws
    from its own seed path, so results are identical under any execution
    schedule (set `parallel` to run the four top-level branches in threads).
    """
    validate_input_size(s.n, cfg.g)
    out, calls = _compress_rec(s, cfg, seed, 0, s.n, counter, parallel)
    assert out.n == (1 << cfg.g) * math.isqrt(s.n), "compress output size contract"
    return out, CompressTrace(halve_calls=calls)


def compresspp(s: PointSeq, cfg: CompressConfig, seed: SeedPath,
               counter: Optional[EvalCounter] = None,
               parallel: bool = False) -> tuple[PointSeq, CompressTrace]:
    """Two-stage root thinning: compress to 2^g * sqrt(n) points, then run the
    configured 2^g-thinner to reach exactly sqrt(n)."""
    if cfg.thinner is None:
        raise ValueError("compresspp requires cfg.thinner")
    if cfg.budget_variant in _COMPRESS_ONLY_VARIANTS:
        raise ValueError(f"budget variant {cfg.budget_variant} has no thinning "
                         "stage; use ex6_ktsplit_cpp, ex7_kt_cpp, or fixed_delta")
    inter, trace = compress(s, cfg, seed.split(0), counter, parallel)
    d_thin = delta_budget(cfg.budget_variant, inter.n, s.n, cfg.g, cfg.delta,
                          role="thin")
    out = run_thinner(cfg.thinner, inter, seed.split(1), delta=d_thin,
                      counter=counter)
    trace.thin_call = ThinCall(inter.n, d_thin)
    assert out.n == math.isqrt(s.n), "compresspp output size contract"
    return out, trace


# ---------------------------------------------------------------------------
# Streaming variant
# ---------------------------------------------------------------------------


class StreamingCompressor:
    """Bounded-memory Compress over an unbounded point stream.

    Input is consumed in batches of 4^(g+1) points feeding a ladder of level
    buffers; whenever level i holds 2^i * 4^(g+1) points they are halved into
    level i+1 and level i empties. After every n = 4^(j+g+1) input points
    (j >= 1) the freshly filled top level, a coreset of size 2^g * sqrt(n), is
    emitted together with a trace snapshot. Stored points (buffers plus the
    running halver's working copy) stay below 4^(g+3) sqrt(t) + 2^(g+1) sqrt(t)
    for t points consumed.
    """

    def __init__(self, cfg: CompressConfig, seed: SeedPath):
        if cfg.budget_variant != "fixed_delta":
            raise ValueError("streaming compression supports only the "
                             "fixed_delta budget variant")
        self.cfg = cfg
        self.seed = seed
        self.batch_size = 4 ** (cfg.g + 1)
        self._d: Optional[int] = None
        self._pending: list[np.ndarray] = []
        self._pending_count = 0
        self._levels: list[list[np.ndarray]] = [[]]
        self._level_counts: list[int] = [0]
        self._batches = 0
        self.points_consumed = 0
        self._call_seq = 0
        self._halve_calls: list[HalveCall] = []
        self.peak_stored_points = 0

    @property
    def stored_points(self) -> int:
        return self._pending_count + sum(self._level_counts)

    def _track(self, extra: int = 0) -> None:
        current = self.stored_points + extra
        if current > self.peak_stored_points:
            self.peak_stored_points = current

    def push(self, points) -> list[tuple[PointSeq, CompressTrace]]:
        """Feed more points; returns any coresets emitted along the way."""
        arr = points.data if isinstance(points, PointSeq) else \
            np.array(points, dtype=np.float64, ndmin=2)
        if arr.size == 0:
            return []
        if self._d is None:
            self._d = arr.shape[1]
        elif arr.shape[1] != self._d:
            raise ValueError(f"stream dimension changed from {self._d} "
                             f"to {arr.shape[1]}")
        self._pending.append(arr)
        self._pending_count += arr.shape[0]
        self._track()
        emissions = []
        while self._pending_count >= self.batch_size:
            block = np.vstack(self._pending)
            batch, rest = block[:self.batch_size], block[self.batch_size:]
            self._pending = [rest] if rest.shape[0] else []
            self._pending_count = rest.shape[0]
            emissions.extend(self._process_batch(batch))
        return emissions

    def _halve(self, rows: np.ndarray, level: int) -> np.ndarray:
        self._track(extra=rows.shape[0])  # halver stores its own copy
        outcome = run_halver(self.cfg.halver, PointSeq(rows),
                             self.seed.split(self._call_seq),
                             delta=self.cfg.delta)
        self._call_seq += 1
        if self.cfg.halver.symmetrized:
            out = symmetrize(outcome, self.seed.split(self._call_seq))
            self._call_seq += 1
        else:
            out = outcome.selected
        self._halve_calls.append(
            HalveCall(level, rows.shape[0], self.cfg.delta))
        return out.data

    def _process_batch(self, batch: np.ndarray):
        self._batches += 1
        self.points_consumed += self.batch_size
        self._levels[0].append(batch)
        self._level_counts[0] += batch.shape[0]
        self._track()
        i = 0
        while i < len(self._levels):
            cap = (1 << i) * self.batch_size
            if self._level_counts[i] == cap:
                out = self._halve(np.vstack(self._levels[i]), i)
                if i + 1 == len(self._levels):
                    self._levels.append([])
                    self._level_counts.append(0)
                self._levels[i] = []
                self._level_counts[i] = 0
                self._levels[i + 1].append(out)
                self._level_counts[i + 1] += out.shape[0]
                self._track()
            i += 1
        t = self._batches
        j = 0
        while 4 ** (j + 1) <= t:
            j += 1
        if j >= 1 and t == 4 ** j:
            coreset = PointSeq(np.vstack(self._levels[j + 1]))
            trace = CompressTrace(halve_calls=list(self._halve_calls),
                                  peak_stored_points=self.peak_stored_points)
            return [(coreset, trace)]
        return []


def compress_streaming(stream: Iterable, cfg: CompressConfig, seed: SeedPath):
    """Generator over (coreset, trace) emissions while consuming `stream`
    (any iterable of point blocks; buffering is handled internally)."""
    sc = StreamingCompressor(cfg, seed)
    for block in stream:
        yield from sc.push(block)


# ---------------------------------------------------------------------------
# Oversampling selection and analytic recursions
# ---------------------------------------------------------------------------

G_MODES = ("compress_err_bound", "cpp_subgauss", "cpp_mmd", "kt_cpp_default",
           "experiments")
EXPERIMENTS_G = 4


def choose_g(n: int, mode: str, ratio: float = 1.0) -> int:
    """Smallest oversampling parameter satisfying the selected rule.

    compress_err_bound / cpp_subgauss: g >= log4 log4 n + log2(ratio), the
    rule keeping two-stage single-function error within sqrt(2) of the
    thinning stage. cpp_mmd: g >= log2 log(n+1) + log2(8.5 * ratio), keeping
    MMD error within a factor of 4. kt_cpp_default: ceil(log2 log n + 3.1).
    experiments: the fixed benchmark preset (4). `ratio` is the halver/thinner
    rescaled-error ratio (1 when both stages derive from the same algorithm).
    """
    n = int(n)
    if n < 4:
        raise ValueError(f"n must be at least 4, got {n}")
    if ratio <= 0.0:
        raise ValueError(f"ratio must be positive, got {ratio}")
    if mode == "experiments":
        return EXPERIMENTS_G
    if mode in ("compress_err_bound", "cpp_subgauss"):
        bound = math.log(math.log(n, 4), 4) + math.log2(ratio)
    elif mode == "cpp_mmd":
        bound = math.log2(math.log(n + 1)) + math.log2(8.5 * ratio)
    elif mode == "kt_cpp_default":
        bound = math.log2(math.log(n)) + 3.1
    else:
        raise ValueError(f"unknown mode {mode!r}; expected one of {G_MODES}")
    return max(0, math.ceil(bound))


@dataclass(frozen=True)
class RecursionSummary:
    """Exact unrolled recursion values; nu_sq_bound carries the closed-form
    ceiling (beta+1) * nu(ell_n)^2 valid when n * nu(n) is non-decreasing."""

    runtime_units: float = 0.0
    nu_sq: float = 0.0
    nu_sq_bound: Optional[float] = None

    def __post_init__(self):
        if self.runtime_units < 0 or self.nu_sq < 0:
            raise ValueError("recursion summaries must be non-negative")


SizeFunction = Union[Callable[[int], float], Mapping[int, float]]


def _as_fn(table: SizeFunction) -> Callable[[int], float]:
    if callable(table):
        return table
    def lookup(size: int) -> float:
        try:
            return table[size]
        except KeyError:
            raise ValueError(f"no table entry for halve input size {size}")
    return lookup


def runtime_recursion(r_halve: SizeFunction, n: int, g: int) -> RecursionSummary:
    """Total halver cost over one compress run: sum_i 4^i * r(ell_n * 2^-i)."""
    beta = beta_n(n, g)
    ln = ell_n(n, g)
    fn = _as_fn(r_halve)
    total = sum((4 ** i) * float(fn(ln >> i)) for i in range(beta + 1))
    return RecursionSummary(runtime_units=total)


def error_recursion(nu_halve: SizeFunction, n: int, g: int) -> RecursionSummary:
    """Compress sub-Gaussian parameter: nu^2 = sum_i 4^-i * nu(ell_n * 2^-i)^2,
    plus the (beta+1) * nu(ell_n)^2 bound."""
    beta = beta_n(n, g)
    ln = ell_n(n, g)
    fn = _as_fn(nu_halve)
    total = sum(4.0 ** (-i) * float(fn(ln >> i)) ** 2 for i in range(beta + 1))
    bound = (beta + 1) * float(fn(ln)) ** 2 if beta >= 0 else 0.0
    return RecursionSummary(nu_sq=total, nu_sq_bound=bound)
