"""Experiment harness: run thinning algorithms over an (algorithm, n, rep)
grid with paired inputs, kernel-evaluation counters, and wall-clock timing.

Every algorithm performs root thinning (n points down to sqrt(n)) so MMD
curves are directly comparable; the compress-based entries additionally log
their halve-call traces. Records are bit-reproducible from (seed, config).
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from ._accel import EvalCounter
from .compress import CompressConfig, compress, compresspp
from .diagnostics import DecayFit, fit_decay, mmd_empirical, mmd_to_target
from .kernels import KernelSpec, TargetSpec
from .points import PointSeq, SeedPath, standard_thin
from .targets import ar1_chain, get_preset, ingest_chain, sample_target
from .thinners import HalverSpec, ThinnerSpec, herding, kt

ALGORITHMS = ("st", "iid", "kt", "herd", "kt_compress", "kt_compresspp",
              "herd_compresspp")
THREADS_ENV = "COMPRESSPP_THREADS"


@dataclass
class ExperimentRecord:
    """One benchmark row: what ran, on how many points, and how it did."""

    algo_id: str
    n: int
    d: int
    target_id: str
    g: int
    delta: float
    mmd: float
    wall_time_s: float
    halve_calls: int
    kernel_evals: int
    peak_points: int
    seed: int
    rep: int

    def __post_init__(self):
        if self.mmd < 0 or self.wall_time_s < 0:
            raise ValueError("mmd and wall_time_s must be non-negative")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


RECORD_FIELDS = [f.name for f in fields(ExperimentRecord)]
_INT_FIELDS = {"n", "d", "g", "halve_calls", "kernel_evals", "peak_points",
               "seed", "rep"}
_FLOAT_FIELDS = {"delta", "mmd", "wall_time_s"}

_DEFAULTS = {
    "g": 4,
    "delta": 0.5,
    "reps_mmd": 10,
    "reps_time": 3,
    "seed": 0,
}


def _is_power_of_4(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0 and (n.bit_length() - 1) % 2 == 0


def validate_config(cfg: dict) -> list[str]:
    """Collect configuration problems as 'path: message' strings."""
    errors = []
    algos = cfg.get("algos")
    if not isinstance(algos, list) or not algos:
        errors.append("algos: required non-empty list")
    else:
        for i, a in enumerate(algos):
            if a not in ALGORITHMS:
                errors.append(f"algos[{i}]: unknown algorithm {a!r}; "
                              f"expected one of {ALGORITHMS}")
    g = cfg.get("g", _DEFAULTS["g"])
    if not isinstance(g, int) or g < 0:
        errors.append(f"g: must be a non-negative integer, got {g!r}")
        g = _DEFAULTS["g"]
    n_grid = cfg.get("n_grid")
    if not isinstance(n_grid, list) or not n_grid:
        errors.append("n_grid: required non-empty list")
    else:
        needs_g = isinstance(algos, list) and any(
            a in ("kt_compresspp", "herd_compresspp") for a in algos)
        for i, n in enumerate(n_grid):
            if not isinstance(n, int) or not _is_power_of_4(n) or n < 4:
                errors.append(f"n_grid[{i}]: {n!r} is not a power of 4 (>= 4)")
            elif needs_g and n < 4 ** g:
                errors.append(f"n_grid[{i}]: {n} is below 4^g = {4 ** g} "
                              "required by the compress++ algorithms")
    delta = cfg.get("delta", _DEFAULTS["delta"])
    if not isinstance(delta, (int, float)) or not 0.0 < delta < 1.0:
        errors.append(f"delta: must lie in (0, 1), got {delta!r}")
    for key in ("reps_mmd", "reps_time"):
        val = cfg.get(key, _DEFAULTS[key])
        if not isinstance(val, int) or val < 1:
            errors.append(f"{key}: must be a positive integer, got {val!r}")
    seed = cfg.get("seed", _DEFAULTS["seed"])
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        errors.append(f"seed: must be a 64-bit unsigned integer, got {seed!r}")
    target = cfg.get("target")
    if target is None:
        errors.append("target: required (preset id, target JSON, or "
                      "{'chain_csv': path})")
    elif isinstance(target, str):
        if not (target.startswith("ar1_d") or _is_known_preset(target)):
            errors.append(f"target: unknown preset {target!r}")
    elif isinstance(target, dict):
        if "chain_csv" in target:
            if not os.path.exists(target["chain_csv"]):
                errors.append(f"target.chain_csv: no such file "
                              f"{target['chain_csv']!r}")
        elif "kind" in target:
            try:
                TargetSpec.from_json(target)
            except (ValueError, KeyError) as exc:
                errors.append(f"target: {exc}")
        else:
            errors.append("target: dict must carry 'kind' or 'chain_csv'")
    else:
        errors.append(f"target: unsupported type {type(target).__name__}")
    bw = cfg.get("bandwidth_sq")
    if bw is not None and (not isinstance(bw, (int, float)) or bw <= 0):
        errors.append(f"bandwidth_sq: must be positive, got {bw!r}")
    return errors


def _is_known_preset(preset_id: str) -> bool:
    try:
        get_preset(preset_id)
        return True
    except ValueError:
        return False


class _TargetHandle:
    """Resolved target: how to draw inputs and how to score outputs."""

    def __init__(self, cfg: dict):
        spec = cfg["target"]
        self.bandwidth_sq = cfg.get("bandwidth_sq")
        self.chain: Optional[PointSeq] = None
        self.ar1_d: Optional[int] = None
        if isinstance(spec, str) and spec.startswith("ar1_d"):
            self.ar1_d = int(spec[len("ar1_d"):])
            self.target = None
            self.target_id = spec
            if self.bandwidth_sq is None:
                self.bandwidth_sq = 2.0 * self.ar1_d
        elif isinstance(spec, str):
            preset = get_preset(spec, corrected_mog=cfg.get("corrected_mog", False))
            self.target = preset.target
            self.target_id = preset.id
            if self.bandwidth_sq is None:
                self.bandwidth_sq = preset.bandwidth_sq
        elif "chain_csv" in spec:
            self.chain = ingest_chain(spec["chain_csv"],
                                      n=_chain_len(spec["chain_csv"]),
                                      normalize=spec.get("normalize", False))
            self.target = None
            self.target_id = "chain:" + os.path.basename(spec["chain_csv"])
            if self.bandwidth_sq is None:
                self.bandwidth_sq = 2.0 * self.chain.d
        else:
            self.target = TargetSpec.from_json(spec)
            self.target_id = spec.get("id", self.target.kind)
            if self.bandwidth_sq is None:
                self.bandwidth_sq = 2.0 * self.target.d
        self.kernel = KernelSpec(bandwidth_sq=float(self.bandwidth_sq))

    @property
    def analytic(self) -> bool:
        return self.target is not None and self.target.analytic

    @property
    def d(self) -> int:
        if self.ar1_d is not None:
            return self.ar1_d
        if self.chain is not None:
            return self.chain.d
        return self.target.d

    def draw_input(self, n: int, seed: SeedPath) -> PointSeq:
        if self.analytic:
            return sample_target(self.target, n, seed)
        if self.ar1_d is not None:
            # Stand-in MCMC output: a 4x-length chain standard-thinned to n.
            return standard_thin(ar1_chain(4 * n, self.ar1_d, seed), n)
        if n > self.chain.n:
            raise ValueError(f"n={n} exceeds the ingested chain length "
                             f"{self.chain.n}")
        return standard_thin(self.chain, n)

    def score(self, s_in: PointSeq, out: PointSeq) -> float:
        if self.analytic:
            return mmd_to_target(self.kernel, self.target, out)
        return mmd_empirical(self.kernel, s_in, out)


def _chain_len(path) -> int:
    with open(path) as fh:
        return sum(1 for line in fh if line.strip())


def run_algorithm(algo: str, s_in: PointSeq, kernel: KernelSpec, g: int,
                  delta: float, seed: SeedPath,
                  counter: Optional[EvalCounter] = None):
    """Run one root-thinning algorithm; returns (coreset, halve_call_count)."""
    n = s_in.n
    root = math.isqrt(n)
    if algo == "st":
        return standard_thin(s_in, root), 0
    if algo == "iid":
        return s_in.take(np.arange(root)), 0
    if algo == "kt":
        return kt(s_in, kernel, delta, root, seed, counter), 0
    if algo == "herd":
        return herding(s_in, kernel, root, counter=counter), 0
    if algo == "kt_compress":
        cfg = CompressConfig(
            g=0,
            halver=HalverSpec("kernel_halve", kernel, delta, symmetrized=True),
            delta=delta,
            budget_variant="ex5_kt_compress",
        )
        out, trace = compress(s_in, cfg, seed, counter)
        return out, len(trace.halve_calls)
    if algo == "kt_compresspp":
        cfg = CompressConfig(
            g=g,
            halver=HalverSpec("kernel_halve", kernel, delta, symmetrized=True),
            thinner=ThinnerSpec("kt", kernel, delta, thin_factor=1 << g),
            delta=delta,
            budget_variant="ex7_kt_cpp",
        )
        out, trace = compresspp(s_in, cfg, seed, counter)
        return out, len(trace.halve_calls)
    if algo == "herd_compresspp":
        cfg = CompressConfig(
            g=g,
            halver=HalverSpec("herd_halve", kernel, delta, symmetrized=True),
            thinner=ThinnerSpec("herding", kernel, delta, thin_factor=1 << g),
            delta=delta,
            budget_variant="fixed_delta",
        )
        out, trace = compresspp(s_in, cfg, seed, counter)
        return out, len(trace.halve_calls)
    raise ValueError(f"unknown algorithm {algo!r}")


def run_suite(config, out_path=None) -> list[ExperimentRecord]:
    """Run the configured grid; one record per (algorithm, n, rep).

    `config` is a dict or a path to a JSON file. All algorithms in a given
    (n, rep) cell receive the same input sequence, so MMD comparisons are
    paired. COMPRESSPP_THREADS caps how many cells run concurrently.
    """
    if not isinstance(config, dict):
        with open(config) as fh:
            config = json.load(fh)
    problems = validate_config(config)
    if problems:
        raise ValueError("invalid config:\n" + "\n".join(problems))
    cfg = {**_DEFAULTS, **config}
    handle = _TargetHandle(cfg)
    base = SeedPath(cfg["seed"])
    reps = max(cfg["reps_mmd"], 1)
    algos = cfg["algos"]
    cells = [(ni, n, rep) for ni, n in enumerate(cfg["n_grid"])
             for rep in range(reps)]

    def run_cell(cell):
        ni, n, rep = cell
        cell_seed = base.split(ni).split(rep)
        s_in = handle.draw_input(n, cell_seed.split(0))
        rows = []
        for ai, algo in enumerate(algos):
            counter = EvalCounter()
            start = time.perf_counter()
            out, halve_calls = run_algorithm(
                algo, s_in, handle.kernel, cfg["g"], cfg["delta"],
                cell_seed.split(1 + ai), counter)
            elapsed = time.perf_counter() - start
            rows.append(ExperimentRecord(
                algo_id=algo, n=n, d=s_in.d, target_id=handle.target_id,
                g=cfg["g"] if algo.endswith("compresspp") else 0,
                delta=cfg["delta"], mmd=handle.score(s_in, out),
                wall_time_s=elapsed, halve_calls=halve_calls,
                kernel_evals=counter.count, peak_points=n,
                seed=cfg["seed"], rep=rep))
        return rows

    workers = max(1, int(os.environ.get(THREADS_ENV, "1")))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            nested = list(pool.map(run_cell, cells))
    else:
        nested = [run_cell(c) for c in cells]
    records = [row for rows in nested for row in rows]
    order = {a: i for i, a in enumerate(algos)}
    records.sort(key=lambda r: (cfg["n_grid"].index(r.n), r.rep,
                                order[r.algo_id]))
    if out_path is not None:
        write_records(records, out_path)
    return records


def write_records(records: list[ExperimentRecord], path) -> None:
    """CSV (with header) or JSONL, chosen by file extension."""
    path = str(path)
    if path.endswith(".jsonl"):
        with open(path, "w") as fh:
            for r in records:
                fh.write(json.dumps(r.to_dict()) + "\n")
        return
    with open(path, "w") as fh:
        fh.write(",".join(RECORD_FIELDS) + "\n")
        for r in records:
            d = r.to_dict()
            fh.write(",".join(_format_field(d[k]) for k in RECORD_FIELDS) + "\n")


def _format_field(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def read_records(path) -> list[ExperimentRecord]:
    path = str(path)
    records = []
    if path.endswith(".jsonl"):
        with open(path) as fh:
            rows = [json.loads(line) for line in fh if line.strip()]
    else:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            rows = []
            for line in fh:
                if line.strip():
                    rows.append(dict(zip(header, line.strip().split(","))))
    for row in rows:
        kwargs = {}
        for key in RECORD_FIELDS:
            val = row[key]
            if key in _INT_FIELDS:
                kwargs[key] = int(val)
            elif key in _FLOAT_FIELDS:
                kwargs[key] = float(val)
            else:
                kwargs[key] = str(val)
        records.append(ExperimentRecord(**kwargs))
    return records


def fit_results(records: list[ExperimentRecord],
                curve: str = "mmd") -> dict[str, DecayFit]:
    """Log-log decay fit of `curve` ("mmd", "time", or "evals") against n,
    per algorithm, averaging replicates at each n.

    Algorithms whose series cannot sit on a log scale (fewer than three grid
    sizes, or zero values such as kernel_evals for standard thinning) are
    omitted from the result.
    """
    column = {"mmd": "mmd", "time": "wall_time_s", "evals": "kernel_evals"}
    if curve not in column:
        raise ValueError(f"unknown curve {curve!r}; expected one of "
                         f"{tuple(column)}")
    attr = column[curve]
    by_algo: dict[str, dict[int, list[float]]] = {}
    for r in records:
        by_algo.setdefault(r.algo_id, {}).setdefault(r.n, []).append(
            float(getattr(r, attr)))
    fits = {}
    for algo, series in by_algo.items():
        pts = [(n, float(np.mean(vals))) for n, vals in sorted(series.items())]
        try:
            fits[algo] = fit_decay(pts)
        except ValueError:
            continue
    return fits
