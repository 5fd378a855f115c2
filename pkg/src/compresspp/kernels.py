"""Kernel evaluation and closed-form expectations for Gaussian and
mixture-of-Gaussian targets.

Only the Gaussian family ships built in; `register_kernel_family` lets library
users plug in additional positive-definite kernels, which then run through the
vectorized numpy engines (the jitted fast path covers the Gaussian family).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _accel, backend
from .points import PointSeq

_BLOCK = 2048


def _gaussian_gram(X: np.ndarray, Y: np.ndarray, bandwidth_sq: float) -> np.ndarray:
    # ||x-y||^2 via the expansion trick; clip round-off negatives before exp.
    sq = (
        np.sum(X * X, axis=1)[:, None]
        + np.sum(Y * Y, axis=1)[None, :]
        - 2.0 * (X @ Y.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * bandwidth_sq))


_FAMILIES: dict[str, Callable[[np.ndarray, np.ndarray, float], np.ndarray]] = {
    "gaussian": _gaussian_gram,
}


def register_kernel_family(name: str, gram_fn) -> None:
    """Register `gram_fn(X, Y, bandwidth_sq) -> matrix` under a new family name."""
    if name in _FAMILIES:
        raise ValueError(f"kernel family {name!r} is already registered")
    _FAMILIES[name] = gram_fn


@dataclass(frozen=True)
class KernelSpec:
    """Positive-definite kernel description: family name plus squared bandwidth."""

    bandwidth_sq: float
    family: str = "gaussian"

    def __post_init__(self):
        bw = float(self.bandwidth_sq)
        if not np.isfinite(bw) or bw <= 0.0:
            raise ValueError(f"bandwidth_sq must be finite and positive, got {bw}")
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "bandwidth_sq", bw)

    def to_json(self) -> dict:
        return {"family": self.family, "bandwidth_sq": self.bandwidth_sq}

    @classmethod
    def from_json(cls, obj: dict) -> "KernelSpec":
        return cls(bandwidth_sq=obj["bandwidth_sq"], family=obj.get("family", "gaussian"))


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """Pointwise kernel value k(x, y)."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    y = np.asarray(y, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if spec.family == "gaussian":
        # Direct squared distance keeps k(x, y) bitwise symmetric in (x, y).
        sq = float(np.sum((x[0] - y[0]) ** 2))
        return float(np.exp(-sq / (2.0 * spec.bandwidth_sq)))
    return float(_FAMILIES[spec.family](x, y, spec.bandwidth_sq)[0, 0])


class KernelOps:
    """Counted kernel primitives over raw (n, d) arrays.

    Dispatches Gaussian full-array reductions to the jitted cores when the
    numba backend is active; everything else runs through the registered gram
    function in fixed-order blocks, so sums are deterministic per backend.
    """

    def __init__(self, spec: KernelSpec, counter: Optional[_accel.EvalCounter] = None):
        self.spec = spec
        self.counter = counter
        self._gram = _FAMILIES[spec.family]

    def _count(self, n: int) -> None:
        if self.counter is not None:
            self.counter.add(n)

    def uncount(self, n: int) -> None:
        if self.counter is not None:
            self.counter.add(-n)

    def _fast(self) -> bool:
        return backend.use_numba() and self.spec.family == "gaussian"

    def rows(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        self._count(A.shape[0] * B.shape[0])
        return self._gram(A, B, self.spec.bandwidth_sq)

    def diag(self, A: np.ndarray) -> np.ndarray:
        if self.spec.family == "gaussian":
            # k(x, x) = 1 identically; no evaluations spent.
            return np.ones(A.shape[0])
        self._count(A.shape[0])
        g = self._gram
        bw = self.spec.bandwidth_sq
        return np.array([g(A[i:i + 1], A[i:i + 1], bw)[0, 0] for i in range(A.shape[0])])

    def mean(self, A: np.ndarray, B: np.ndarray) -> float:
        """Mean of k over all ordered pairs A x B (diagonal included)."""
        if A.shape[0] == 0 or B.shape[0] == 0:
            raise ValueError("mean kernel of an empty sequence is undefined")
        self._count(A.shape[0] * B.shape[0])
        if self._fast():
            val, _ = _accel.nb_gram_mean(A, B, 1.0 / (2.0 * self.spec.bandwidth_sq))
            return float(val)
        total = 0.0
        bw = self.spec.bandwidth_sq
        for i in range(0, A.shape[0], _BLOCK):
            ab = A[i:i + _BLOCK]
            for j in range(0, B.shape[0], _BLOCK):
                total += float(np.sum(self._gram(ab, B[j:j + _BLOCK], bw)))
        return total / (A.shape[0] * B.shape[0])

    def mean_rows(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """out[i] = mean_j k(A[i], B[j])."""
        if B.shape[0] == 0:
            raise ValueError("mean kernel against an empty sequence is undefined")
        self._count(A.shape[0] * B.shape[0])
        if self._fast():
            out, _ = _accel.nb_mean_rows(A, B, 1.0 / (2.0 * self.spec.bandwidth_sq))
            return out
        out = np.zeros(A.shape[0])
        bw = self.spec.bandwidth_sq
        for j in range(0, B.shape[0], _BLOCK):
            out += np.sum(self._gram(A, B[j:j + _BLOCK], bw), axis=1)
        return out / B.shape[0]


def gram(spec: KernelSpec, s1: PointSeq, s2: PointSeq,
         counter: Optional[_accel.EvalCounter] = None) -> np.ndarray:
    """Full kernel matrix between two point sequences."""
    if s1.d != s2.d:
        raise ValueError(f"dimension mismatch: {s1.d} vs {s2.d}")
    return KernelOps(spec, counter).rows(s1.data, s2.data)


# ---------------------------------------------------------------------------
# Targets
# ---------------------------------------------------------------------------

TARGET_KINDS = ("gaussian_iid", "mog_iid", "external_sample")


@dataclass(frozen=True)
class TargetSpec:
    """Distribution a coreset is judged against.

    gaussian_iid is the standard normal in d dimensions; mog_iid is a uniform
    mixture of unit-covariance Gaussians at the given means; external_sample
    carries a reference point sequence instead of an analytic form.
    """

    kind: str
    d: int
    means: Optional[np.ndarray] = None
    reference_sample: Optional[PointSeq] = None

    def __post_init__(self):
        if self.kind not in TARGET_KINDS:
            raise ValueError(f"unknown target kind {self.kind!r}")
        object.__setattr__(self, "d", int(self.d))
        if self.kind == "mog_iid":
            if self.means is None:
                raise ValueError("mog_iid target requires component means")
            mu = np.array(self.means, dtype=np.float64, ndmin=2)
            if mu.shape[1] != self.d:
                raise ValueError(f"means have dimension {mu.shape[1]}, target has {self.d}")
            mu.setflags(write=False)
            object.__setattr__(self, "means", mu)
        elif self.means is not None:
            raise ValueError(f"means are only meaningful for mog_iid, not {self.kind}")
        if (self.reference_sample is not None) != (self.kind == "external_sample"):
            raise ValueError("reference_sample must be present iff kind is external_sample")
        if self.reference_sample is not None and self.reference_sample.d != self.d:
            raise ValueError("reference_sample dimension does not match target")

    @property
    def analytic(self) -> bool:
        return self.kind in ("gaussian_iid", "mog_iid")

    def to_json(self) -> dict:
        obj = {"kind": self.kind, "d": self.d}
        if self.means is not None:
            obj["means"] = self.means.tolist()
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "TargetSpec":
        return cls(kind=obj["kind"], d=obj["d"], means=obj.get("means"))


def _component_means(t: TargetSpec) -> np.ndarray:
    if t.kind == "gaussian_iid":
        return np.zeros((1, t.d))
    return t.means


def _embed_rows(t: TargetSpec, k: KernelSpec, Y: np.ndarray) -> np.ndarray:
    """E_{X~P} k(X, y) for each row y, via the Gaussian convolution identity."""
    if not t.analytic:
        raise ValueError("mean embedding requires an analytic target "
                         "(gaussian_iid or mog_iid)")
    if k.family != "gaussian":
        raise ValueError("closed-form embeddings are only available for the "
                         "Gaussian kernel family")
    bw = k.bandwidth_sq
    mu = _component_means(t)
    scale = (bw / (bw + 1.0)) ** (t.d / 2.0)
    sq = (
        np.sum(Y * Y, axis=1)[:, None]
        + np.sum(mu * mu, axis=1)[None, :]
        - 2.0 * (Y @ mu.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return scale * np.mean(np.exp(-sq / (2.0 * (bw + 1.0))), axis=1)


def target_mean_embedding(t: TargetSpec, k: KernelSpec, y) -> float:
    """E_{X~P} k(X, y) for a single point y."""
    y = np.asarray(y, dtype=np.float64).reshape(1, -1)
    if y.shape[1] != t.d:
        raise ValueError(f"point has dimension {y.shape[1]}, target has {t.d}")
    return float(_embed_rows(t, k, y)[0])


def target_self_energy(t: TargetSpec, k: KernelSpec) -> float:
    """E_{X,X'~P} k(X, X') with X, X' independent."""
    if not t.analytic:
        raise ValueError("self energy requires an analytic target")
    if k.family != "gaussian":
        raise ValueError("closed-form self energy is only available for the "
                         "Gaussian kernel family")
    bw = k.bandwidth_sq
    mu = _component_means(t)
    scale = (bw / (bw + 2.0)) ** (t.d / 2.0)
    sq = (
        np.sum(mu * mu, axis=1)[:, None]
        + np.sum(mu * mu, axis=1)[None, :]
        - 2.0 * (mu @ mu.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return float(scale * np.mean(np.exp(-sq / (2.0 * (bw + 2.0)))))
