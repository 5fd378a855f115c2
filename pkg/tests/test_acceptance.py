"""Acceptance suite: every criterion at its stated tolerance, one pass/fail
line per criterion (run with `pytest tests/test_acceptance.py -s` to see the
lines as they complete)."""

import contextlib
import math

import numpy as np
import pytest

from compresspp import (CompressConfig, EvalCounter, HalverSpec, KernelSpec,
                        PointSeq, SeedPath, StreamingCompressor, SubGaussParams,
                        TargetSpec, ThinnerSpec, compress, compress_params,
                        compresspp, compresspp_params, ell_n, error_recursion,
                        fit_decay, kernel_eval, kernel_halve, mmd_empirical,
                        mmd_to_target, runtime_recursion, sample_target,
                        symmetrize, uniform_halve)
from compresspp.bench import run_algorithm
from conftest import gaussian_points


@contextlib.contextmanager
def criterion(label):
    try:
        yield
    except Exception:
        print(f"ACCEPTANCE {label}: FAIL")
        raise
    print(f"ACCEPTANCE {label}: PASS")


def valid_grid(n_max_exp, g_max):
    for g in range(g_max + 1):
        for k_exp in range(0, n_max_exp + 1):
            n = 4 ** k_exp * 4 ** g
            if 4 <= n <= 4 ** n_max_exp:
                yield n, g


def test_1_size_and_structure_contracts():
    with criterion("1 size/structure contracts"):
        for n, g in valid_grid(7, 3):
            seed = SeedPath(n * 13 + g)
            s = gaussian_points(n, 2, n + g)
            cfg = CompressConfig(
                g=g, halver=HalverSpec("uniform_halve"),
                thinner=ThinnerSpec("standard", thin_factor=1 << g))
            out, trace = compress(s, cfg, seed)
            root = math.isqrt(n)
            assert out.n == (1 << g) * root
            input_rows = {row.tobytes() for row in s.data}
            assert all(row.tobytes() in input_rows for row in out.data)
            beta = round(math.log(n, 4)) - g - 1
            expected = {ell_n(n, g) >> i: 4 ** i for i in range(beta + 1)}
            assert trace.size_histogram() == expected
            out_pp, trace_pp = compresspp(s, cfg, seed.split(1))
            assert out_pp.n == root
            assert all(row.tobytes() in input_rows for row in out_pp.data)
            assert trace_pp.size_histogram() == expected


def test_2_recursion_identities():
    with criterion("2 runtime/error recursion identities"):
        for n, g in valid_grid(7, 3):
            log4n = round(math.log(n, 4))
            rs = runtime_recursion(lambda l: l * l, n, g)
            assert rs.runtime_units == 4 ** (g + 1) * n * (log4n - g)
            c = 0.83
            es = error_recursion(lambda l: c, n, g)
            beta = log4n - g - 1
            closed = c * c * (4.0 / 3.0) * (1.0 - 4.0 ** (-(beta + 1)))
            assert es.nu_sq == pytest.approx(closed, rel=1e-12)


def test_3_measured_scaling_slopes():
    with criterion("3 measured kernel-eval scaling (kt 2.0+-0.1, "
                   "kt-compress++ <= 1.3)"):
        k = KernelSpec(4.0)
        seed = SeedPath(11)
        counts = {"kt": [], "kt_compresspp": []}
        for ni, n in enumerate([4 ** 5, 4 ** 6, 4 ** 7, 4 ** 8]):
            s = gaussian_points(n, 2, 9000 + ni)
            for ai, algo in enumerate(counts):
                ctr = EvalCounter()
                run_algorithm(algo, s, k, 4, 0.5,
                              seed.split(ni).split(ai), ctr)
                counts[algo].append((n, ctr.count))
        kt_slope = fit_decay(counts["kt"]).slope
        cpp_slope = fit_decay(counts["kt_compresspp"]).slope
        print(f"  kt slope={kt_slope:.3f}  kt_compresspp slope={cpp_slope:.3f}")
        assert 1.9 <= kt_slope <= 2.1
        assert cpp_slope <= 1.3


def test_4_mmd_decay_bands():
    with criterion("4 MMD decay (st/iid in [-0.33,-0.17]; kt, c++ <= -0.38; "
                   "c++ within 1.5x kt)"):
        k = KernelSpec(4.0)
        t = TargetSpec("gaussian_iid", 2)
        seed = SeedPath(2024)
        grid = [4 ** 4, 4 ** 5, 4 ** 6, 4 ** 7]
        algos = ("st", "iid", "kt", "kt_compresspp")
        means = {a: [] for a in algos}
        for ni, n in enumerate(grid):
            vals = {a: [] for a in algos}
            for rep in range(10):
                cell = seed.split(ni).split(rep)
                s = sample_target(t, n, cell.split(0))
                for ai, algo in enumerate(algos):
                    out, _ = run_algorithm(algo, s, k, 4, 0.5,
                                           cell.split(1 + ai))
                    vals[algo].append(mmd_to_target(k, t, out))
            for a in algos:
                means[a].append((n, float(np.mean(vals[a]))))
        slopes = {a: fit_decay(means[a]).slope for a in algos}
        print(f"  slopes: { {a: round(s, 3) for a, s in slopes.items()} }")
        assert -0.33 <= slopes["st"] <= -0.17
        assert -0.33 <= slopes["iid"] <= -0.17
        assert slopes["kt"] <= -0.38
        assert slopes["kt_compresspp"] <= -0.38
        for (n, m_cpp), (_, m_kt) in zip(means["kt_compresspp"], means["kt"]):
            assert m_cpp <= 1.5 * m_kt, f"ratio breach at n={n}"


def test_5_error_inflation_margin():
    with criterion("5 error inflation (c++ within 4x kt on >= 90% of 20 "
                   "instances)"):
        k = KernelSpec(4.0)
        t = TargetSpec("gaussian_iid", 2)
        seed = SeedPath(31415)
        hits = 0
        for i in range(20):
            cell = seed.split(i)
            s = sample_target(t, 4096, cell.split(0))
            cpp_out, _ = run_algorithm("kt_compresspp", s, k, 4, 0.5,
                                       cell.split(1))
            kt_out, _ = run_algorithm("kt", s, k, 4, 0.5, cell.split(2))
            hits += (mmd_empirical(k, s, cpp_out)
                     <= 4.0 * mmd_empirical(k, s, kt_out))
        print(f"  within 4x on {hits}/20 instances")
        assert hits >= 18


def test_6_streaming_memory_bound():
    with criterion("6 streaming memory bound (zero tolerance)"):
        for g in (0, 1):
            cfg = CompressConfig(g=g, halver=HalverSpec("uniform_halve"))
            sc = StreamingCompressor(cfg, SeedPath(60 + g))
            rng = np.random.default_rng(g)
            batch = 4 ** (g + 1)
            while sc.points_consumed < 4 ** 7:
                sc.push(rng.standard_normal((batch, 1)))
                t = sc.points_consumed
                bound = 4 ** (g + 3) * math.sqrt(t) + 2 ** (g + 1) * math.sqrt(t)
                assert sc.peak_stored_points <= bound, \
                    f"g={g}, t={t}: {sc.peak_stored_points} > {bound}"


def _rkhs_means(data, z, bandwidth_sq):
    return float(np.mean(np.exp(
        -np.sum((data - z) ** 2, axis=1) / (2.0 * bandwidth_sq))))


def test_7_unbiasedness_suite():
    with criterion("7 Monte-Carlo unbiasedness (3 SE, 10^4 seeds, two test "
                   "functions)"):
        k = KernelSpec(2.0)
        z1 = np.zeros(1)
        z2 = np.ones(1)
        n_seeds = 10_000

        def check(label, input_seq, run_one):
            p_in = [_rkhs_means(input_seq.data, z, 2.0) for z in (z1, z2)]
            devs = np.empty((n_seeds, 2))
            for i in range(n_seeds):
                half = run_one(i)
                devs[i] = [
                    _rkhs_means(half.data, z, 2.0) - p for z, p in
                    zip((z1, z2), p_in)]
            for col in range(2):
                se = devs[:, col].std(ddof=1) / math.sqrt(n_seeds)
                assert abs(devs[:, col].mean()) <= 3 * se, \
                    f"{label}, test function {col}"

        s32 = gaussian_points(32, 1, 777)
        base = SeedPath(271828)
        check("symmetrized kernel_halve", s32,
              lambda i: symmetrize(
                  kernel_halve(s32, k, 0.5, base.split(i).split(0)),
                  base.split(i).split(1)))
        check("uniform_halve", s32,
              lambda i: uniform_halve(s32, base.split(i)).selected)

        s64 = gaussian_points(64, 1, 778)
        cfg = CompressConfig(
            g=0, halver=HalverSpec("kernel_halve", k, 0.5, symmetrized=True))
        check("compress with symmetrized halver", s64,
              lambda i: compress(s64, cfg, base.split(50_000 + i))[0])


def test_8_oracle_equivalences():
    with criterion("8 oracle equivalences (brute-force MMD, 10^6-draw MC, "
                   "exact re-derivations)"):
        # mmd_empirical vs the O(n^2) double loop, 50 cases at 1e-10 relative.
        rng = np.random.default_rng(88)
        for _ in range(50):
            d = int(rng.integers(1, 4))
            k = KernelSpec(float(rng.uniform(0.5, 5.0)))
            s1 = PointSeq(rng.standard_normal((int(rng.integers(1, 10)), d)))
            s2 = PointSeq(rng.standard_normal((int(rng.integers(1, 10)), d)))

            def mean_k(a, b):
                return sum(kernel_eval(k, x, y) for x in a.data
                           for y in b.data) / (a.n * b.n)

            slow = math.sqrt(max(
                mean_k(s1, s1) - 2 * mean_k(s1, s2) + mean_k(s2, s2), 0.0))
            assert mmd_empirical(k, s1, s2) == pytest.approx(
                slow, rel=1e-10, abs=1e-12)

        # mmd_to_target vs a 10^6-draw Monte-Carlo estimate, 5 cases at 3 SE.
        cases = [
            (TargetSpec("gaussian_iid", 1), KernelSpec(2.0), 8),
            (TargetSpec("gaussian_iid", 2), KernelSpec(4.0), 16),
            (TargetSpec("mog_iid", 2, means=[[-3, 3], [3, -3]]),
             KernelSpec(4.0), 16),
            (TargetSpec("mog_iid", 1, means=[[0.0], [2.0], [-2.0]]),
             KernelSpec(1.5), 32),
            (TargetSpec("gaussian_iid", 2), KernelSpec(1.0), 4),
        ]
        n_draws = 10 ** 6
        for case_idx, (t, k, m) in enumerate(cases):
            s = sample_target(t, m, SeedPath(500 + case_idx))
            mc_rng = np.random.default_rng(900 + case_idx)

            def draw(count):
                if t.kind == "gaussian_iid":
                    return mc_rng.standard_normal((count, t.d))
                comp = mc_rng.integers(0, t.means.shape[0], size=count)
                return t.means[comp] + mc_rng.standard_normal((count, t.d))

            X, Xp = draw(n_draws), draw(n_draws)
            pair_term = np.exp(-np.sum((X - Xp) ** 2, axis=1)
                               / (2 * k.bandwidth_sq))
            cross = np.zeros(n_draws)
            for row in s.data:
                cross += np.exp(-np.sum((X - row) ** 2, axis=1)
                                / (2 * k.bandwidth_sq))
            cross /= s.n
            u = pair_term - 2.0 * cross
            from compresspp.kernels import KernelOps

            sq_mc = u.mean() + KernelOps(k).mean(s.data, s.data)
            se = u.std(ddof=1) / math.sqrt(n_draws)
            sq_closed = mmd_to_target(k, t, s) ** 2
            assert abs(sq_closed - sq_mc) <= 3 * se, f"MC case {case_idx}"

        # Parameter maps vs inline re-derivations, exact.
        rng = np.random.default_rng(89)
        for _ in range(50):
            g = int(rng.integers(0, 3))
            n = 4 ** int(rng.integers(1, 6)) * 4 ** g
            a, v = rng.uniform(0, 3, size=2)
            out = compress_params(SubGaussParams(a=a, v=v), n, g)
            log4n = round(math.log(n, 4))
            v_t = 4.0 * (a + v) * math.sqrt(2.0 * (log4n - g))
            assert out.v == v_t and out.a == v_t * math.sqrt(math.log(n + 1.0))
            a2, v2 = rng.uniform(0, 3, size=2)
            out_pp = compresspp_params(SubGaussParams(a=a, v=v),
                                       SubGaussParams(a=a2, v=v2), n, g)
            v_h = v_t + v2
            a_h = v_t * math.sqrt(math.log(n + 1.0)) + a2 \
                + v_h * math.sqrt(math.log(2.0))
            assert out_pp.v == v_h and out_pp.a == a_h


def test_9_delta_budget_union_bound():
    with criterion("9 delta-budget union bound (<= delta/2 + 1e-12)"):
        delta = 0.5
        for variant, gs in (("ex3_ktsplit_compress", (0, 1, 2)),
                            ("ex5_kt_compress", (0, 1, 2)),
                            ("ex6_ktsplit_cpp", (1, 2)),
                            ("ex7_kt_cpp", (1, 2))):
            for g in gs:
                for k_exp in range(0, 5):
                    n = 4 ** k_exp * 4 ** g
                    if n < 4:
                        continue
                    s = gaussian_points(n, 1, n + g)
                    if variant.endswith("cpp"):
                        cfg = CompressConfig(
                            g=g, halver=HalverSpec("uniform_halve"),
                            thinner=ThinnerSpec("standard",
                                                thin_factor=1 << g),
                            delta=delta, budget_variant=variant)
                        _, trace = compresspp(s, cfg, SeedPath(1))
                    else:
                        cfg = CompressConfig(
                            g=g, halver=HalverSpec("uniform_halve"),
                            delta=delta, budget_variant=variant)
                        _, trace = compress(s, cfg, SeedPath(1))
                    assert trace.failure_mass() <= delta / 2.0 + 1e-12, \
                        f"{variant}, n={n}, g={g}"
