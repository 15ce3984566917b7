"""Second-order structure of the stationary pinned string.

Each component of the string is a centred Gaussian field whose law is fixed
by its increment variances together with the pin ``U_0(0) = 0``:

* equal times: ``E[(U_t(x) - U_t(y))^2] = |x - y|``
* distinct times: ``E[(U_t(x) - U_s(y))^2] = |t - s|^{1/2} P(|x - y| |t - s|^{-1/2})``

where ``P`` is a scaling profile. Two profiles are provided.

``"stationary"`` (the default)
    ``P(a) = E|a + Z|`` with ``Z`` standard normal. This is the exact
    stationary law of the stochastic heat equation with diffusivity 1/2 started
    from a two-sided Brownian motion, and the only profile here that yields a
    positive semidefinite covariance together with the equal-time rule.

``"mixed"``
    ``P = F`` with ``F(a) = (2 pi)^{-1/2} + 1/2 E[|Z| + |Z'| - |Z - Z'|]``,
    ``Z, Z'`` i.i.d. ``N(a, 2)``. This pairs unit-diffusivity heat smoothing with
    a unit-rate Brownian spatial law. Its pairwise covariances are consistent,
    but Gram matrices on grids spanning several times are in general *not*
    positive semidefinite, so it cannot be sampled exactly. It is kept for the
    analytic formulas that are stated in terms of ``F``.

``f_value`` always evaluates ``F``; ``PinnedKernel.profile`` evaluates the
profile of the kernel's form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, NumericalError
from .quadrature import gauss_kronrod

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
FORMS = ("stationary", "mixed")

# |t - s| below this is treated as equal time when x != y.
TIME_EPS = 1e-14
# Gaussian tails beyond this many standard deviations are dropped.
TAIL_SD = 8.0


class SpaceTimePoint(NamedTuple):
    t: float
    x: float


def _as_point(p) -> SpaceTimePoint:
    t, x = float(p[0]), float(p[1])
    if not (math.isfinite(t) and math.isfinite(x)):
        raise DomainError(f"point coordinates must be finite, got {(t, x)}")
    if t < 0:
        raise DomainError(f"time must be >= 0, got t={t}")
    return SpaceTimePoint(t, x)


def _gauss_pdf(u):
    return np.exp(-0.5 * u * u) * INV_SQRT_2PI


def smoothed_abs(a: float, sd: float, abs_tol: float = 1e-10) -> float:
    """``E|a + sd Z|`` for standard normal ``Z``, by adaptive quadrature.

    The integrand is split at its kink ``u = -a/sd`` and the Gaussian is
    truncated at ``TAIL_SD`` standard deviations.
    """
    kink = min(max(-a / sd, -TAIL_SD), TAIL_SD)
    f = lambda u: math.exp(-0.5 * u * u) * INV_SQRT_2PI * abs(a + sd * u)
    total = 0.0
    for lo, hi in ((-TAIL_SD, kink), (kink, TAIL_SD)):
        if hi > lo:
            val, err = integrate.quad(f, lo, hi, epsabs=abs_tol / 4, epsrel=0.0, limit=200)
            if not err <= abs_tol:
                raise NumericalError(f"quadrature of E|a + sd Z| failed at a={a}, sd={sd}")
            total += val
    return total


def smoothed_abs_array(a, sd: float, abs_tol: float = 1e-11) -> np.ndarray:
    """Vectorized ``smoothed_abs`` over an array of offsets."""
    a = np.asarray(a, dtype=float)
    kink = np.clip(-a / sd, -TAIL_SD, TAIL_SD)

    def integrand(u, owner):
        return _gauss_pdf(u) * np.abs(a.ravel()[owner % a.size][:, None] + sd * u)

    flat = a.ravel()
    lo = np.concatenate([np.full(flat.size, -TAIL_SD), kink.ravel()])
    hi = np.concatenate([kink.ravel(), np.full(flat.size, TAIL_SD)])
    parts = gauss_kronrod(integrand, lo, hi, abs_tol=abs_tol / 2)
    return (parts[: flat.size] + parts[flat.size:]).reshape(a.shape)


def _raw_profile(form: str, a: float, tol: float) -> float:
    if form == "mixed":
        # E|Z - Z'| for Z, Z' i.i.d. N(a, 2) is E|N(0, 4)|.
        return INV_SQRT_2PI + smoothed_abs(a, math.sqrt(2.0), tol / 4) \
            - 0.5 * smoothed_abs(0.0, 2.0, tol / 4)
    if form == "stationary":
        return smoothed_abs(a, 1.0, tol / 2)
    raise DomainError(f"unknown kernel form {form!r}; expected one of {FORMS}")


def _raw_profile_array(form: str, a: np.ndarray) -> np.ndarray:
    if form == "mixed":
        return INV_SQRT_2PI + smoothed_abs_array(a, math.sqrt(2.0)) \
            - 0.5 * smoothed_abs(0.0, 2.0, 1e-12)
    return smoothed_abs_array(a, 1.0)


@lru_cache(maxsize=8)
def _profile_table(form: str, a_cut: float, resolution: float):
    n = int(math.ceil(a_cut / resolution))
    grid = np.linspace(0.0, a_cut, n + 1)
    values = _raw_profile_array(form, grid)
    interp = PchipInterpolator(grid, values, extrapolate=False)
    # spot validation against the scalar quadrature path
    probe = grid[:-1][:: max(1, n // 40)] + 0.5 * (grid[1] - grid[0])
    worst = max(abs(float(interp(p)) - _raw_profile(form, float(p), 1e-10)) for p in probe)
    if worst > 1e-6:
        raise NumericalError(f"profile table for {form!r} failed validation (error {worst:.2e})")
    return interp, float(values[-1]) - a_cut


@dataclass(frozen=True)
class PinnedKernel:
    """Covariance of one component of the pinned string.

    Parameters
    ----------
    form : {"stationary", "mixed"}
        Scaling profile used for increments at distinct times (see module docs).
    quad_abs_tol : float
        Absolute tolerance of the profile quadrature.
    asymptotic_cutoff : float
        Above this argument the profile is ``a + offset`` with the offset
        measured at the cutoff; the neglected term is below ``exp(-cutoff**2/4)``.
    cache_resolution : float or None
        Spacing of the interpolation table used by the array methods. ``None``
        evaluates every profile value by quadrature.
    """

    form: str = "stationary"
    quad_abs_tol: float = 1e-8
    asymptotic_cutoff: float = 50.0
    cache_resolution: float | None = 1e-3
    _offset: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.form not in FORMS:
            raise DomainError(f"unknown kernel form {self.form!r}; expected one of {FORMS}")
        if not self.quad_abs_tol > 0:
            raise DomainError("quad_abs_tol must be positive")
        if not self.asymptotic_cutoff >= 10:
            raise DomainError("asymptotic_cutoff must be >= 10")
        if self.cache_resolution is not None and not 0 < self.cache_resolution <= 0.1:
            raise DomainError("cache_resolution must lie in (0, 0.1]")
        a_cut = self.asymptotic_cutoff
        offset = _raw_profile(self.form, a_cut, self.quad_abs_tol / 10) - a_cut
        object.__setattr__(self, "_offset", offset)

    # ---- scaling profile -------------------------------------------------
    def profile(self, a: float) -> float:
        """Scaling profile of this kernel at ``a >= 0`` (direct quadrature)."""
        a = _check_arg(a)
        if a > self.asymptotic_cutoff:
            return a + self._offset
        return _raw_profile(self.form, a, self.quad_abs_tol)

    def profile_array(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        out = np.empty_like(a)
        far = a > self.asymptotic_cutoff
        out[far] = a[far] + self._offset
        near = ~far
        if near.any():
            if self.cache_resolution is None:
                out[near] = _raw_profile_array(self.form, a[near])
            else:
                interp, _ = _profile_table(self.form, self.asymptotic_cutoff, self.cache_resolution)
                out[near] = interp(a[near])
        return out

    # ---- increments and covariances -------------------------------------
    def increment_variance(self, p, q) -> float:
        """``E[(U_t(x) - U_s(y))^2]`` for one component, ``p = (t, x)``, ``q = (s, y)``."""
        p, q = _as_point(p), _as_point(q)
        tau = abs(p.t - q.t)
        gap = abs(p.x - q.x)
        if tau == 0.0 or (tau < TIME_EPS and gap > 0.0):
            return gap
        r = math.sqrt(tau)
        return r * self.profile(gap / r)

    def point_variance(self, p) -> float:
        return self.increment_variance(p, (0.0, 0.0))

    def covariance(self, p, q) -> float:
        """Covariance by polarization against the pin at ``(0, 0)``."""
        p, q = _as_point(p), _as_point(q)
        return 0.5 * (self.point_variance(p) + self.point_variance(q)
                      - self.increment_variance(p, q))

    def increment_variance_array(self, t1, x1, t2, x2) -> np.ndarray:
        t1, x1, t2, x2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t1, x1, t2, x2)))
        tau = np.abs(t1 - t2)
        gap = np.abs(x1 - x2)
        out = gap.copy()
        timed = (tau >= TIME_EPS) | ((tau > 0.0) & (gap == 0.0))
        if timed.any():
            r = np.sqrt(tau[timed])
            out[timed] = r * self.profile_array(gap[timed] / r)
        return out

    def point_variance_array(self, t, x) -> np.ndarray:
        return self.increment_variance_array(t, x, 0.0, 0.0)

    def covariance_array(self, t1, x1, t2, x2) -> np.ndarray:
        return 0.5 * (self.point_variance_array(t1, x1) + self.point_variance_array(t2, x2)
                      - self.increment_variance_array(t1, x1, t2, x2))

    def gram_matrix(self, grid) -> np.ndarray:
        """Covariance matrix of the field restricted to ``grid``.

        ``grid`` is a ``SpaceTimeGrid`` (points are distinct by construction).
        Returns a dense symmetric array.
        """
        t, x = np.asarray(grid.t), np.asarray(grid.x)
        if t.size == 0:
            raise DomainError("grid is empty")
        var = self.point_variance_array(t, x)
        inc = self.increment_variance_array(t[:, None], x[:, None], t[None, :], x[None, :])
        gram = 0.5 * (var[:, None] + var[None, :] - inc)
        return 0.5 * (gram + gram.T)

    # ---- bounds -----------------------------------------------------------
    def check_variance_bounds(self, p, q, c1: float | None = None) -> bool:
        """True iff ``c1 (|x-y| + |t-s|^{1/2}) <= E[(U_t(x)-U_s(y))^2] <= 2 (|x-y| + |t-s|^{1/2})``."""
        p, q = _as_point(p), _as_point(q)
        if c1 is None:
            c1 = _default_c1()
        v = self.increment_variance(p, q)
        scale = abs(p.x - q.x) + math.sqrt(abs(p.t - q.t))
        slack = 2 * self.quad_abs_tol * max(1.0, math.sqrt(abs(p.t - q.t)))
        return c1 * scale - slack <= v <= 2 * scale + slack


def _check_arg(a) -> float:
    a = float(a)
    if not math.isfinite(a):
        raise DomainError(f"argument must be finite, got {a}")
    if a < 0:
        raise DomainError(f"argument must be >= 0, got {a}")
    return a


DEFAULT_KERNEL = PinnedKernel()


@lru_cache(maxsize=4)
def _f_offset(a_cut: float) -> float:
    return _raw_profile("mixed", a_cut, 1e-10) - a_cut


def f_value(a: float, quad_abs_tol: float = 1e-8, asymptotic_cutoff: float = 50.0) -> float:
    """``F(a) = (2 pi)^{-1/2} + 1/2 E[|Z| + |Z'| - |Z - Z'|]``, ``Z, Z'`` i.i.d. ``N(a, 2)``.

    Bounded below by ``(2 pi)^{-1/2}`` with ``F(a)/a -> 1``. For ``a`` above the
    cutoff the value is ``a + (F(cutoff) - cutoff)``; the dropped term decays
    like ``exp(-a**2/4)``.
    """
    a = _check_arg(a)
    if a > asymptotic_cutoff:
        return a + _f_offset(float(asymptotic_cutoff))
    return _raw_profile("mixed", a, quad_abs_tol)


def plancherel_constant(abs_tol: float = 1e-9) -> float:
    """``(4 pi)^{-1} * integral over R of |exp(i eta) - 1|^2 / eta^2``.

    The integrand is ``2 (1 - cos eta) / eta^2`` (equal to 1 at the origin). The
    oscillatory tail beyond ``|eta| = R`` is handled with the cosine integral:
    ``int_R^inf (1 - cos u)/u^2 du = 1/R - int_R^inf cos(u)/u^2 du``.
    """

    def integrand(eta):
        if abs(eta) < 1e-4:
            return 1.0 - eta * eta / 12.0
        return 2.0 * (1.0 - math.cos(eta)) / (eta * eta)

    cut = 200.0 * math.pi
    core, err = integrate.quad(integrand, 0.0, cut, limit=2000, epsabs=abs_tol / 10, epsrel=0.0)
    osc, err2 = integrate.quad(lambda u: 1.0 / (u * u), cut, np.inf, weight="cos", wvar=1.0)
    if not (err < abs_tol and err2 < abs_tol):
        raise NumericalError("Plancherel integral did not converge")
    half_line = core + 2.0 * (1.0 / cut - osc)
    return 2.0 * half_line / (4.0 * math.pi)


def c1_constant(profile=None, a_cut: float = 50.0, points: int = 400) -> float:
    """``min((8 pi)^{-1/2}, inf_{z >= 1} F(z) / 2z)``.

    The infimum is taken over a geometric grid on ``[1, a_cut]`` and the limit
    of the asymptote ``F(z) ~ z + c`` beyond it. ``profile`` replaces ``F``.
    """
    if profile is None:
        profile = f_value
    zs = np.geomspace(1.0, a_cut, points)
    ratios = [profile(float(z)) / (2.0 * z) for z in zs]
    tail = profile(a_cut) - a_cut
    # z + c over 2z tends to 1/2; it approaches from below only when c < 0
    ratios.append(0.5 if tail < 0 else (a_cut + tail) / (2 * a_cut))
    return min((8.0 * math.pi) ** -0.5, min(ratios))


@lru_cache(maxsize=1)
def _default_c1() -> float:
    return c1_constant()


def conditional_variance(var_x: float, var_y: float, cov_xy: float) -> float:
    """Variance of ``X - E[X | Y]`` for a centred Gaussian pair."""
    if not (var_x > 0 and var_y > 0):
        raise DomainError("variances must be positive")
    if cov_xy * cov_xy > var_x * var_y * (1 + 1e-12):
        raise DomainError(
            f"covariance {cov_xy} violates Cauchy-Schwarz for variances {var_x}, {var_y}"
        )
    return max(var_x - cov_xy * cov_xy / var_y, 0.0)


def increment_variance(p, q, kernel: PinnedKernel | None = None) -> float:
    return (kernel or DEFAULT_KERNEL).increment_variance(p, q)


def point_variance(p, kernel: PinnedKernel | None = None) -> float:
    return (kernel or DEFAULT_KERNEL).point_variance(p)


def covariance(p, q, kernel: PinnedKernel | None = None) -> float:
    return (kernel or DEFAULT_KERNEL).covariance(p, q)


def gram_matrix(grid, kernel: PinnedKernel | None = None) -> np.ndarray:
    return (kernel or DEFAULT_KERNEL).gram_matrix(grid)


def check_variance_bounds(p, q, kernel: PinnedKernel | None = None) -> bool:
    return (kernel or DEFAULT_KERNEL).check_variance_bounds(p, q)
