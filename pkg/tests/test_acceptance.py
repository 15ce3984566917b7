"""Acceptance criteria, run at their stated tolerances and trial counts.

Each test records one line in ``RESULTS``; ``conftest.py`` prints them at the
end of the session. Running this file directly prints the same lines.
"""

import math
import time

import numpy as np
import pytest

from pinstring import (
    SpaceTimeGrid,
    dyadic_grid,
    f_value,
    hit_events,
    hit_probability,
    lemma1_bound,
    lemma1_oracle_check,
    plancherel_constant,
    recurrence_experiment,
    rng_stream,
    sample_exact,
    second_moment_hit_bound,
)
from pinstring.cli import main
from pinstring.kernel import DEFAULT_KERNEL
from pinstring.probe import double_point_grid_bound, double_points, double_points_bruteforce
from pinstring.sampler import ExactSampler, draw_replicas
from pinstring.selftest import (
    F0_CLOSED_FORM,
    independent_plancherel,
    run_selftest,
    scaling_error,
    time_reversal_error,
)
from pinstring.spde import SpdeConfig, integrate_spde_ensemble

pytestmark = pytest.mark.slow

RESULTS = {}


def record(number, ok, detail):
    RESULTS[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(RESULTS[number])
    assert ok, detail


def separated(ests):
    """Strictly decreasing estimates whose consecutive 95% intervals do not overlap."""
    return all(a.estimate > b.estimate and a.ci_low > b.ci_high for a, b in zip(ests, ests[1:]))


def test_criterion_01_equal_time_exact():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    t, x, y = rng.uniform(0, 5, 1000), rng.uniform(-5, 5, 1000), rng.uniform(-5, 5, 1000)
    err = max(abs(DEFAULT_KERNEL.increment_variance((a, b), (a, c)) - abs(b - c))
              for a, b, c in zip(t, x, y))
    dt = time.perf_counter() - t0
    record(1, err <= 1e-12 and dt < 1, f"max |inc - |x-y|| = {err:.2e}, {dt:.2f}s")


def test_criterion_02_f_oracle():
    t0 = time.perf_counter()
    f0 = f_value(0.0)
    grid = [round(0.1 * k, 10) for k in range(501)]
    low = min(f_value(a) for a in grid)
    ratio = f_value(50.0) / 50.0
    dt = time.perf_counter() - t0
    ok = abs(f0 - 0.729427) <= 1e-5 and abs(f0 - F0_CLOSED_FORM) <= 1e-8 \
        and low >= 0.398942 and 0.98 <= ratio <= 1.02 and dt < 10
    record(2, ok, f"F(0) = {f0:.7f}, min F = {low:.6f}, F(50)/50 = {ratio:.5f}, {dt:.2f}s")


def test_criterion_03_plancherel():
    t0 = time.perf_counter()
    c0, ref = plancherel_constant(), independent_plancherel()
    report = dict((name, detail) for name, _, detail in run_selftest())
    dt = time.perf_counter() - t0
    noted = "not reproduced" in report["plancherel_constant"]
    ok = abs(c0 - ref) <= 1e-6 and noted and dt < 5
    record(3, ok, f"c0 = {c0:.9f} vs independent {ref:.9f} (normalization 1 reported as "
                  f"not reproduced), {dt:.2f}s")


def test_criterion_04_invariances():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    sc = scaling_error(DEFAULT_KERNEL, rng, scales=(0.5, 2.0, 3.0), count=100)
    tr = time_reversal_error(DEFAULT_KERNEL, rng, count=100)
    dt = time.perf_counter() - t0
    record(4, sc <= 1e-9 and tr <= 1e-9 and dt < 5,
           f"scaling rel err {sc:.1e}, time reversal err {tr:.1e}, {dt:.2f}s")


def test_criterion_05_exact_sampler_covariance():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    grid = SpaceTimeGrid(rng.uniform(0, 2, 25), rng.uniform(-2, 2, 25))
    sampler = ExactSampler(grid)
    reps = 50000
    u = draw_replicas(sampler, 1, 505, 0, reps)[:, 0, :]
    i, j = np.triu_indices(25)
    prod = u[:, i] * u[:, j]
    se = prod.std(axis=0) / math.sqrt(reps)
    z = np.abs(prod.mean(axis=0) - sampler.gram[i, j]) / se
    frac = float(np.mean(z <= 4))
    dt = time.perf_counter() - t0
    record(5, frac >= 0.99 and dt < 120,
           f"{frac:.2%} of {z.size} entries within 4 SE (worst {z.max():.2f} SE), {dt:.1f}s")


def stationary_increments(kappa, initial_scale, seed):
    dx = 0.02
    cfg = SpdeConfig(dx=dx, dt=dx * dx / 4, horizon=0.25, kappa=kappa,
                     initial_scale=initial_scale, extent=2.0)
    fields = integrate_spde_ensemble(cfg, seed, 2000)[:, :, 0]
    keep = np.abs(cfg.nodes) <= cfg.extent + 1e-9
    f = fields[:, keep]
    out = []
    for lag in (0.25, 0.5, 1.0):
        k = int(round(lag / dx))
        per = ((f[:, k:] - f[:, :-k]) ** 2).mean(axis=1)
        out.append((lag, per.mean(), per.std() / math.sqrt(per.size)))
    return out


def test_criterion_06_spde_cross_validation():
    t0 = time.perf_counter()
    half = stationary_increments(0.5, 1.0, 606)
    unit = stationary_increments(1.0, 0.5, 607)
    dt = time.perf_counter() - t0
    rel = [m / lag - 1 for lag, m, _ in half] + [m / (lag / 2) - 1 for lag, m, _ in unit]
    ok = max(abs(r) for r in rel) < 0.05 and dt < 600
    fmt = lambda rs: " ".join(f"{r:+.3f}" for r in rs)
    record(6, ok, f"relative error at lags 0.25/0.5/1: kappa=1/2 {fmt(rel[:3])}; "
                  f"kappa=1 {fmt(rel[3:])}, {dt:.0f}s")


def test_criterion_07_lemma1_soundness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    ok = all(lemma1_oracle_check(rng.dirichlet(np.full(8, 0.5))) for _ in range(500))
    disjoint = lemma1_bound([0.1, 0.2, 0.3], 0.0) == pytest.approx(0.6)
    identical = lemma1_bound([0.4, 0.4, 0.4], 3 * 0.4) == pytest.approx(0.4)
    dt = time.perf_counter() - t0
    record(7, ok and disjoint and identical and dt < 5,
           f"500 systems sound, disjoint/identical fixtures tight, {dt:.2f}s")


def test_criterion_08_second_moment_bound():
    t0 = time.perf_counter()
    b1 = second_moment_hit_bound(1, 5)
    b2 = second_moment_hit_bound(2, 5)
    b6 = second_moment_hit_bound(1, 6)
    dt = time.perf_counter() - t0
    ratio = max(b1, b2) / min(b1, b2)
    ok = b1 > 0 and b2 > 0 and ratio <= 3 and b6 < b1 and dt < 300
    record(8, ok, f"d=5: n=1 {b1:.4f}, n=2 {b2:.4f} (ratio {ratio:.2f}); "
                  f"d=6 n=1 {b6:.4f}, {dt:.0f}s")


@pytest.mark.xfail(strict=True, reason="d=5 and d=8 hit rates at delta=0.1 are both below the "
                                        "20000-trial resolution; see README")
def test_criterion_09_hitting_monotonicity():
    t0 = time.perf_counter()
    ests = [hit_probability(hit_events(1, d, delta=0.1), 20000, 9, with_bound=False)
            for d in (1, 3, 5, 8)]
    dt = time.perf_counter() - t0
    detail = "; ".join(f"d={e.dim}: {e.successes}/20000 [{e.ci_low:.1e}, {e.ci_high:.1e}]"
                       for e in ests)
    record(9, separated(ests) and dt < 120, f"{detail}, {dt:.1f}s")


def random_sample_with_duplicate(k):
    grid = dyadic_grid(1, 8, 4)
    s = sample_exact(grid, 2, rng_stream(1000, k))
    rng = np.random.default_rng(k)
    a, b = rng.choice(len(grid), 2, replace=False)
    s.values[b] = s.values[a]
    return s


def test_criterion_10_double_points():
    t0 = time.perf_counter()
    bound = double_point_grid_bound(1, 11)
    match = True
    for k in range(20):
        s = random_sample_with_duplicate(k)
        for mode in ("simultaneous", "range"):
            for tol in (1e-12, 0.1):
                fast = double_points(s, mode, tol).pairs
                match &= fast == double_points_bruteforce(s, mode, tol).pairs
    dt = time.perf_counter() - t0
    record(10, bound > 0 and match and dt < 300,
           f"bound(n=1, d=11) = {bound:.3e}, detector == brute force on 20 samples, {dt:.0f}s")


def test_criterion_11_recurrence():
    t0 = time.perf_counter()
    e2 = recurrence_experiment(4, 0.5, 2, 5000, 11)
    e8 = recurrence_experiment(4, 0.5, 8, 5000, 11)
    dt = time.perf_counter() - t0
    ok = e2.estimate > e8.estimate and e2.ci_low > e8.ci_high \
        and all(e.analytic_bound <= e.ci_high for e in (e2, e8)) and dt < 300
    record(11, ok, f"d=2 {e2.estimate:.4f} [{e2.ci_low:.4f}, {e2.ci_high:.4f}] bound "
                   f"{e2.analytic_bound:.4f}; d=8 {e8.estimate:.4f} [{e8.ci_low:.4f}, "
                   f"{e8.ci_high:.4f}] bound {e8.analytic_bound:.2e}, {dt:.1f}s")


def test_criterion_12_determinism(tmp_path):
    t0 = time.perf_counter()
    runs = [["recur", "--dim", str(d), "--N", "4", "--delta", "0.5", "--trials", "5000",
             "--seed", "11"] for d in (2, 8)]
    runs += [["hitprob", "--dim", str(d), "--n", "1", "--delta", "0.1", "--trials", "20000",
              "--seed", "9"] for d in (1, 3, 5, 8)]
    same = True
    for k, args in enumerate(runs):
        outs = []
        for w in ("1", "3"):
            path = tmp_path / f"run{k}_{w}.csv"
            assert main(args + ["--workers", w, "--output", str(path)]) == 0
            outs.append(path.read_bytes())
        same &= outs[0] == outs[1]
    dt = time.perf_counter() - t0
    record(12, same, f"{len(runs)} CLI runs byte-identical at workers=1 and 3, {dt:.1f}s")


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn(Path(tempfile.mkdtemp())) if "tmp_path" in fn.__code__.co_varnames else fn()
            except AssertionError:
                pass
