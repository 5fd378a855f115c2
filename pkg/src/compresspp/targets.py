"""Benchmark targets: i.i.d. samplers, the named target presets, a synthetic
autocorrelated chain generator, and MCMC-chain ingestion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import TargetSpec
from .points import PointSeq, SeedPath, standard_thin


@dataclass(frozen=True)
class TargetPreset:
    """Named target together with its kernel bandwidth rule (sigma^2 = 2d for
    the analytic presets)."""

    id: str
    target: TargetSpec
    bandwidth_sq: float


def sample_target(t: TargetSpec, n: int, seed: SeedPath) -> PointSeq:
    """n i.i.d. draws from an analytic target. Mixture draws pick a component
    uniformly, then add unit-covariance Gaussian noise."""
    if not t.analytic:
        raise ValueError("can only sample analytic targets "
                         "(gaussian_iid or mog_iid)")
    n = int(n)
    if n < 0:
        raise ValueError(f"sample size must be non-negative, got {n}")
    if n == 0:
        return PointSeq.empty(t.d)
    rng = seed.generator()
    noise = rng.standard_normal((n, t.d))
    if t.kind == "gaussian_iid":
        return PointSeq(noise)
    comp = rng.integers(0, t.means.shape[0], size=n)
    return PointSeq(t.means[comp] + noise)


def _mog8_means() -> np.ndarray:
    # Stored exactly as printed in the experiment tables; the first two means
    # coincide (see the corrected variant flag below).
    return np.array([
        [-3.0, 3.0],
        [-3.0, 3.0],
        [-3.0, -3.0],
        [3.0, -3.0],
        [0.0, 6.0],
        [-6.0, 0.0],
        [6.0, 0.0],
        [0.0, -6.0],
    ])


def _mog32_means() -> np.ndarray:
    # Two concentric circles: radius 10 for j <= 16, radius 20 for j > 16.
    j = np.arange(1, 33, dtype=np.float64)
    radius = np.where(j <= 16, 10.0, 20.0)
    return np.column_stack([radius * np.sin(j), radius * np.cos(j)])


def preset_targets(corrected_mog: bool = False) -> list[TargetPreset]:
    """The benchmark target suite: standard normals in d = 2, 4, 10, 100 and
    2-d Gaussian mixtures with 4, 6, 8, or 32 components, all with bandwidth
    sigma^2 = 2d.

    The printed mixture table repeats the mean [-3, 3]; `corrected_mog`
    replaces the duplicate second mean with [3, 3] instead of reproducing the
    table verbatim.
    """
    presets = []
    for d in (2, 4, 10, 100):
        presets.append(TargetPreset(
            id=f"gauss_d{d}",
            target=TargetSpec(kind="gaussian_iid", d=d),
            bandwidth_sq=2.0 * d,
        ))
    mog8 = _mog8_means()
    if corrected_mog:
        mog8 = mog8.copy()
        mog8[1] = [3.0, 3.0]
    for m in (4, 6, 8):
        presets.append(TargetPreset(
            id=f"mog_M{m}",
            target=TargetSpec(kind="mog_iid", d=2, means=mog8[:m]),
            bandwidth_sq=4.0,
        ))
    presets.append(TargetPreset(
        id="mog_M32",
        target=TargetSpec(kind="mog_iid", d=2, means=_mog32_means()),
        bandwidth_sq=4.0,
    ))
    return presets


def get_preset(preset_id: str, corrected_mog: bool = False) -> TargetPreset:
    for preset in preset_targets(corrected_mog=corrected_mog):
        if preset.id == preset_id:
            return preset
    known = [p.id for p in preset_targets()]
    raise ValueError(f"unknown target preset {preset_id!r}; known: {known}")


def ar1_chain(n: int, d: int, seed: SeedPath, rho: float = 0.9) -> PointSeq:
    """Synthetic stationary AR(1) Gaussian chain with N(0, I_d) marginals,
    a stand-in for externally supplied MCMC output."""
    n, d = int(n), int(d)
    if n < 1:
        raise ValueError(f"chain length must be positive, got {n}")
    if not -1.0 < rho < 1.0:
        raise ValueError(f"autocorrelation must lie in (-1, 1), got {rho}")
    rng = seed.generator()
    x = np.empty((n, d))
    x[0] = rng.standard_normal(d)
    scale = np.sqrt(1.0 - rho * rho)
    innovations = rng.standard_normal((n - 1, d))
    for t in range(1, n):
        x[t] = rho * x[t - 1] + scale * innovations[t - 1]
    return PointSeq(x)


def ingest_chain(path, n: int, normalize: bool = False) -> PointSeq:
    """Load a post-burn-in chain CSV and standard-thin it to n points.

    With `normalize`, coordinates are z-scored using the mean and standard
    deviation of the full post-burn-in chain (computed before thinning).
    """
    chain = PointSeq.from_csv(path)
    if n > chain.n:
        raise ValueError(f"requested {n} points from a chain of length {chain.n}")
    if normalize:
        mean = chain.data.mean(axis=0)
        sd = chain.data.std(axis=0)
        if np.any(sd == 0.0):
            raise ValueError("cannot normalize a coordinate with zero variance")
        chain = PointSeq((chain.data - mean) / sd)
    return standard_thin(chain, n)
