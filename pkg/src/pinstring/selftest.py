"""Kernel identity suite shared by the ``selftest`` command and the tests."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .grid import SpaceTimeGrid
from .kernel import (
    INV_SQRT_2PI,
    PinnedKernel,
    f_value,
    plancherel_constant,
)

F0_CLOSED_FORM = INV_SQRT_2PI + (2.0 - math.sqrt(2.0)) / math.sqrt(math.pi)


def independent_plancherel() -> float:
    """``(4 pi)^{-1} int 2 (1 - cos u) / u^2 du`` with the infinite tail done by ``quad``."""
    val, _ = integrate.quad(lambda u: 2.0 * (1.0 - math.cos(u)) / (u * u) if u else 1.0,
                            0.0, 1000.0, limit=2000)
    # int_A^inf 2(1 - cos u)/u^2 du = 2/A - 2 int_A^inf cos(u)/u^2 du
    tail_cos, _ = integrate.quad(lambda u: 1.0 / (u * u), 1000.0, np.inf, weight="cos", wvar=1.0)
    return 2.0 * (val + 2.0 / 1000.0 - 2.0 * tail_cos) / (4.0 * math.pi)


def _random_tuples(rng, count, t_max=2.0, x_max=2.0):
    t = rng.uniform(0, t_max, (count, 2))
    x = rng.uniform(-x_max, x_max, (count, 2))
    return t[:, 0], x[:, 0], t[:, 1], x[:, 1]


def spatial_rule_error(kernel, rng, count=1000) -> float:
    t, x, _, y = _random_tuples(rng, count)
    inc = kernel.increment_variance_array(t, x, t, y)
    return float(np.max(np.abs(inc - np.abs(x - y))))


def scaling_error(kernel, rng, scales=(0.5, 1.0, 2.0, 3.0), count=100) -> float:
    worst = 0.0
    for L in scales:
        t, x, s, y = _random_tuples(rng, count)
        base = kernel.increment_variance_array(t, x, s, y)
        big = kernel.increment_variance_array(L**4 * t, L**2 * x, L**4 * s, L**2 * y)
        rel = np.abs(big - L**2 * base) / np.maximum(L**2 * base, 1e-300)
        worst = max(worst, float(np.max(np.where(base > 0, rel, np.abs(big)))))
    return worst


def time_reversal_error(kernel, rng, T=2.0, count=100) -> float:
    """Covariance of ``U_{T-t}(x) - U_T(0)`` against the kernel covariance."""
    t, x, s, y = _random_tuples(rng, count, t_max=T)
    var_p = kernel.increment_variance_array(T - t, x, np.full(count, T), np.zeros(count))
    var_q = kernel.increment_variance_array(T - s, y, np.full(count, T), np.zeros(count))
    inc = kernel.increment_variance_array(T - t, x, T - s, y)
    reversed_cov = 0.5 * (var_p + var_q - inc)
    return float(np.max(np.abs(reversed_cov - kernel.covariance_array(t, x, s, y))))


def translation_error(kernel, rng, count=100) -> float:
    t, x, s, y = _random_tuples(rng, count)
    dt, dx = rng.uniform(0, 5, count), rng.uniform(-5, 5, count)
    base = kernel.increment_variance_array(t, x, s, y)
    moved = kernel.increment_variance_array(t + dt, x + dx, s + dt, y + dx)
    return float(np.max(np.abs(moved - base)))


def worst_gram_eigenvalue(kernel, rng, grids=50, max_points=40) -> float:
    """Smallest eigenvalue relative to the largest diagonal entry over random grids."""
    worst = np.inf
    for _ in range(grids):
        k = int(rng.integers(2, max_points + 1))
        g = SpaceTimeGrid(rng.uniform(0, 2, k), rng.uniform(-2, 2, k))
        gram = kernel.gram_matrix(g)
        worst = min(worst, float(np.linalg.eigvalsh(gram)[0] / np.max(np.diag(gram))))
    return worst


def run_selftest(form: str = "stationary", seed: int = 20240601):
    """Return ``(check, passed, detail)`` rows for the kernel identity suite."""
    kernel = PinnedKernel(form=form)
    rng = np.random.default_rng(seed)
    rows = []

    err = spatial_rule_error(kernel, rng)
    rows.append(("equal_time_increment", err <= 1e-12, f"max error {err:.3g}"))

    f0 = f_value(0.0)
    rows.append(("f_at_zero", abs(f0 - F0_CLOSED_FORM) <= 1e-5,
                 f"F(0)={f0:.9f} closed form {F0_CLOSED_FORM:.9f}"))

    grid = np.round(np.arange(0, 501) * 0.1, 10)
    low = min(f_value(a) for a in grid)
    rows.append(("f_lower_bound", low >= INV_SQRT_2PI - 1e-8, f"min F on [0,50] = {low:.9f}"))
    ratio = f_value(50.0) / 50.0
    rows.append(("f_linear_growth", 0.98 <= ratio <= 1.02, f"F(50)/50 = {ratio:.6f}"))

    c0, ref = plancherel_constant(), independent_plancherel()
    rows.append(("plancherel_constant", abs(c0 - ref) <= 1e-6,
                 f"c0={c0:.9f} (independent {ref:.9f}); the normalization 1 is not reproduced"))

    for name, fn in (("scaling", scaling_error), ("time_reversal", time_reversal_error),
                     ("translation", translation_error)):
        e = fn(kernel, rng)
        rows.append((name, e <= 1e-9, f"max error {e:.3g}"))

    t, x, s, y = _random_tuples(rng, 200)
    ok = all(kernel.check_variance_bounds((a, b), (c, d)) for a, b, c, d in zip(t, x, s, y))
    rows.append(("variance_bounds", ok, "200 random pairs"))

    eig = worst_gram_eigenvalue(kernel, rng)
    rows.append(("gram_psd", eig >= -1e-8, f"form={form} worst eigenvalue/diag {eig:.3g}"))
    return rows
