"""Command-line surface: run benchmark suites, thin a single input, and fit
decay slopes from result files."""

from __future__ import annotations

import sys

import click

from . import bench
from ._accel import EvalCounter
from .backend import active_backend
from .bench import fit_results, read_records, run_suite
from .points import SeedPath


@click.group()
def main():
    """Near-linear distribution compression toolkit."""


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True), help="Suite config JSON.")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Destination .csv or .jsonl for the records.")
def run(config_path, out_path):
    """Run a benchmark suite described by a config file."""
    records = run_suite(config_path, out_path)
    click.echo(f"wrote {len(records)} records to {out_path} "
               f"(backend: {active_backend()})")


@main.command()
@click.option("--algo", required=True,
              type=click.Choice(bench.ALGORITHMS), help="Thinning algorithm.")
@click.option("--n", "n", required=True, type=int,
              help="Input size (a power of 4).")
@click.option("--g", "g", default=4, show_default=True, type=int,
              help="Oversampling parameter for the compress++ algorithms.")
@click.option("--delta", default=0.5, show_default=True, type=float,
              help="Global failure probability.")
@click.option("--target", default="gauss_d2", show_default=True,
              help="Target preset id (e.g. gauss_d10, mog_M8, ar1_d4).")
@click.option("--chain", "chain_path", type=click.Path(exists=True),
              default=None, help="CSV of post-burn-in chain points; "
              "overrides --target.")
@click.option("--normalize", is_flag=True,
              help="Z-score chain coordinates before thinning.")
@click.option("--bandwidth-sq", type=float, default=None,
              help="Kernel bandwidth sigma^2 override (default 2d).")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Destination CSV for the coreset.")
def thin(algo, n, g, delta, target, chain_path, normalize, bandwidth_sq,
         seed, out_path):
    """Thin one input sequence down to sqrt(n) points."""
    cfg = {
        "algos": [algo],
        "n_grid": [n],
        "g": g,
        "delta": delta,
        "seed": seed,
        "reps_mmd": 1,
        "target": ({"chain_csv": chain_path, "normalize": normalize}
                   if chain_path else target),
    }
    if bandwidth_sq is not None:
        cfg["bandwidth_sq"] = bandwidth_sq
    problems = bench.validate_config(cfg)
    if problems:
        raise click.ClickException("invalid options:\n" + "\n".join(problems))
    merged = {**bench._DEFAULTS, **cfg}
    handle = bench._TargetHandle(merged)
    base = SeedPath(seed)
    s_in = handle.draw_input(n, base.split(0).split(0).split(0))
    counter = EvalCounter()
    out, _ = bench.run_algorithm(algo, s_in, handle.kernel, g, delta,
                                 base.split(0).split(0).split(1), counter)
    out.to_csv(out_path)
    click.echo(f"wrote {out.n} x {out.d} coreset to {out_path} "
               f"({counter.count} kernel evals, mmd="
               f"{handle.score(s_in, out):.6g})")


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True),
              help="Records file produced by `run` (.csv or .jsonl).")
@click.option("--curve", default="mmd", show_default=True,
              type=click.Choice(["mmd", "time", "evals"]),
              help="Which column to fit against n on a log-log scale.")
def fit(in_path, curve):
    """Fit per-algorithm log-log decay slopes from a records file."""
    records = read_records(in_path)
    if not records:
        raise click.ClickException(f"no records in {in_path}")
    fits = fit_results(records, curve)
    click.echo(f"{'algo':<18}{'slope':>10}{'intercept':>12}{'r2':>8}")
    for algo, f in sorted(fits.items()):
        click.echo(f"{algo:<18}{f.slope:>10.4f}{f.intercept:>12.4f}"
                   f"{f.r2:>8.4f}")
    skipped = sorted({r.algo_id for r in records} - set(fits))
    if skipped:
        click.echo(f"(no log-log fit for: {', '.join(skipped)})")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
