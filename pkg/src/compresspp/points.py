"""Point sequences, structural thinning operations, and splittable seed paths."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class PointSeq:
    """Ordered, immutable sequence of d-dimensional points.

    Order is significant: the halving algorithms consume consecutive pairs and
    the meta-procedures split off contiguous blocks. The backing array is a
    C-contiguous float64 matrix with one point per row, locked against writes.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if arr.ndim != 2:
            raise ValueError(f"points must form an (n, d) array, got shape {arr.shape}")
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValueError("every point coordinate must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @staticmethod
    def _wrap(arr: np.ndarray) -> "PointSeq":
        # Internal fast path: arr is already validated float64 and read-only
        # (views of a locked array inherit the lock).
        obj = object.__new__(PointSeq)
        object.__setattr__(obj, "data", arr)
        return obj

    @classmethod
    def empty(cls, d: int) -> "PointSeq":
        return cls(np.empty((0, int(d))))

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return self.n

    def take(self, indices) -> "PointSeq":
        """New sequence holding rows `indices` in the given order."""
        idx = np.asarray(indices, dtype=np.int64)
        picked = self.data[idx]
        picked.setflags(write=False)
        return PointSeq._wrap(picked)

    def to_csv(self, path) -> None:
        """Headerless CSV, one point per row, 17 significant digits."""
        np.savetxt(path, self.data, fmt="%.17g", delimiter=",")

    @classmethod
    def from_csv(cls, path) -> "PointSeq":
        try:
            arr = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
        except ValueError as exc:
            raise ValueError(f"malformed point CSV {path}: {exc}") from exc
        return cls(arr)

    def to_jsonl(self, path) -> None:
        """One JSON object per line: {"x": [coordinates]}."""
        with open(path, "w") as fh:
            for row in self.data:
                fh.write(json.dumps({"x": row.tolist()}) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "PointSeq":
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rows.append(json.loads(line)["x"])
        if not rows:
            raise ValueError(f"no points found in {path}")
        return cls(np.array(rows))


def partition4(s: PointSeq) -> tuple[PointSeq, PointSeq, PointSeq, PointSeq]:
    """Split into four equal contiguous blocks in input order."""
    if s.n % 4 != 0:
        raise ValueError(f"cannot partition {s.n} points into four equal blocks")
    q = s.n // 4
    return tuple(PointSeq._wrap(s.data[i * q:(i + 1) * q]) for i in range(4))


def concatenate(parts) -> PointSeq:
    """Append the parts' rows in argument order."""
    parts = list(parts)
    if not parts:
        raise ValueError("concatenate needs at least one part")
    dims = {p.d for p in parts}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch across parts: {sorted(dims)}")
    out = np.vstack([p.data for p in parts])
    out.setflags(write=False)
    return PointSeq._wrap(out)


def standard_thin(s: PointSeq, m: int) -> PointSeq:
    """Keep m evenly spaced points, anchored so the final point is retained.

    Uses indices ceil((i+1) * n / m) - 1 for i = 0..m-1, the usual convention
    when summarizing an MCMC chain.
    """
    m = int(m)
    if not 1 <= m <= s.n:
        raise ValueError(f"thinned size must satisfy 1 <= m <= n, got m={m}, n={s.n}")
    idx = (np.arange(1, m + 1, dtype=np.int64) * s.n - 1) // m
    return s.take(idx)


@dataclass(frozen=True)
class SeedPath:
    """Splittable random stream address: a root seed plus a path of child indices.

    The derived stream is a pure function of (root_seed, path), so replaying a
    recursion with the same seed path reproduces every draw bit for bit, and
    sibling paths yield computationally independent streams regardless of
    execution order.
    """

    root_seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        root = int(self.root_seed)
        if not 0 <= root < 2 ** 64:
            raise ValueError(f"root_seed must be a 64-bit unsigned integer, got {root}")
        path = tuple(int(c) for c in self.path)
        if any(c < 0 for c in path):
            raise ValueError(f"path entries must be non-negative, got {path}")
        object.__setattr__(self, "root_seed", root)
        object.__setattr__(self, "path", path)

    def split(self, child: int) -> "SeedPath":
        return SeedPath(self.root_seed, self.path + (int(child),))

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(self.root_seed, spawn_key=self.path)
        )


def split_seed(sp: SeedPath, child: int) -> SeedPath:
    """Child stream address; same (root_seed, path) always gives the same stream."""
    return sp.split(child)
