"""Probabilities that centered Gaussians fall in the box ``(-delta, delta)``."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf, ndtr

from .errors import DomainError
from .quadrature import gauss_kronrod

# beyond this many standard deviations the marginal density is below 1e-18
TRUNC_SD = 9.0
# s^2 below this fraction of var2 is treated as perfect correlation
DEGENERATE_REL = 1e-14
CS_SLACK = 1e-12


def interval_mass(var, delta):
    """``P(|X| < delta)`` for ``X ~ N(0, var)``; a zero variance gives 1."""
    var = np.asarray(var, dtype=float)
    with np.errstate(divide="ignore"):
        out = erf(delta / np.sqrt(2.0 * np.where(var > 0, var, 1.0)))
    return np.where(var > 0, out, 1.0)


def _band(hi, lo):
    """``Phi(hi) - Phi(lo)`` for ``hi >= lo``, accurate in both tails."""
    upper = lo > 0
    return np.where(upper, ndtr(-lo) - ndtr(-hi), ndtr(hi) - ndtr(lo))


def bivariate_box_prob_array(var1, var2, cov, delta, abs_tol: float = 1e-11) -> np.ndarray:
    """Vectorized ``P(|X| < delta, |Y| < delta)`` for centered bivariate normals.

    Integrates the marginal density of ``X`` against the conditional band
    probability of ``Y``. Inputs broadcast together; tiny Cauchy-Schwarz
    violations from rounding are clipped.
    """
    v1, v2, c = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (var1, var2, cov)))
    shape = v1.shape
    v1, v2, c = v1.ravel(), v2.ravel(), c.ravel()
    if np.any(v1 < 0) or np.any(v2 < 0):
        raise DomainError("variances must be nonnegative")
    if not delta > 0:
        raise DomainError("delta must be positive")
    if np.any(c * c > v1 * v2 * (1 + CS_SLACK) + 1e-300):
        raise DomainError("covariance violates Cauchy-Schwarz")

    out = np.empty(v1.size)
    # a zero-variance coordinate is always inside the box
    zero1 = v1 <= 0
    zero2 = (v2 <= 0) & ~zero1
    out[zero1] = interval_mass(v2[zero1], delta)
    out[zero2] = interval_mass(v1[zero2], delta)

    live = ~(zero1 | zero2)
    idx = np.flatnonzero(live)
    if idx.size:
        a, b, cc = v1[idx], v2[idx], c[idx]
        beta = cc / a
        s2 = np.maximum(b - cc * cc / a, 0.0)
        degenerate = s2 <= DEGENERATE_REL * b
        # |beta| x < delta bounds the band where Y can still fall in the box
        with np.errstate(divide="ignore", over="ignore"):
            reach = np.where(np.abs(beta) > 0, delta / np.abs(beta), np.inf)
        cap = np.minimum(delta, TRUNC_SD * np.sqrt(a))

        deg = idx[degenerate]
        out[deg] = interval_mass(a[degenerate], np.minimum(delta, reach[degenerate]))

        keep = ~degenerate
        if np.any(keep):
            a, beta, s, cap, reach = a[keep], beta[keep], np.sqrt(s2[keep]), cap[keep], reach[keep]
            split = np.minimum(cap, reach)
            sd1 = np.sqrt(a)
            m = a.size

            def integrand(x, owner):
                k = owner % m
                bx = beta[k][:, None] * x
                sk = s[k][:, None]
                dens = np.exp(-0.5 * (x / sd1[k][:, None]) ** 2) / (sd1[k][:, None] * math.sqrt(2 * math.pi))
                return dens * _band((delta - bx) / sk, (-delta - bx) / sk)

            lo = np.concatenate([np.zeros(m), split])
            hi = np.concatenate([split, cap])
            parts = gauss_kronrod(integrand, lo, hi, abs_tol=abs_tol / 4)
            out[idx[keep]] = 2.0 * (parts[:m] + parts[m:])
    return np.clip(out, 0.0, 1.0).reshape(shape)


def bivariate_box_prob(var1: float, var2: float, cov: float, delta: float) -> float:
    """``P(|X| < delta, |Y| < delta)`` for a centered bivariate normal.

    Examples
    --------
    >>> round(bivariate_box_prob(1.0, 1.0, 0.0, 1.0), 7)
    0.4660649
    """
    if not (var1 > 0 and var2 > 0):
        raise DomainError("variances must be positive")
    if cov * cov > var1 * var2 * (1 + CS_SLACK):
        raise DomainError(f"cov^2 = {cov * cov} exceeds var1*var2 = {var1 * var2}")
    if math.isinf(delta):
        return 1.0
    return float(bivariate_box_prob_array(var1, var2, cov, delta, abs_tol=1e-11))
