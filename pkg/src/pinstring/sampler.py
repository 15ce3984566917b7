"""Exact Gaussian sampling of the pinned string on finite grids."""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import DomainError, NumericalError, ValidationError
from .grid import SpaceTimeGrid
from .kernel import DEFAULT_KERNEL, PinnedKernel
from .streams import RngStream, rng_stream

DUMP_VERSION = "pinstring-field v1"
JITTER_STEPS = (0.0, 1e-12, 1e-10, 1e-8, 1e-6)


@dataclass
class FieldSample:
    """Values of a ``dim``-component field at the points of ``grid``.

    ``values`` has shape ``(len(grid), dim)`` in canonical grid order.
    """

    grid: SpaceTimeGrid
    dim: int
    values: np.ndarray
    source: str
    seed: int
    replica: int
    kappa: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")
        if self.values.shape != (len(self.grid), self.dim):
            raise ValidationError(
                f"values shape {self.values.shape} does not match grid size {len(self.grid)} x dim {self.dim}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("field values must be finite")
        if self.source not in ("exact", "spde"):
            raise ValidationError(f"unknown sample source {self.source!r}")

    def header(self) -> str:
        kappa = "none" if self.kappa is None else repr(float(self.kappa))
        return (f"# {DUMP_VERSION}, source={self.source}, d={self.dim}, seed={self.seed}, "
                f"replica={self.replica}, kappa={kappa}")

    def write_csv(self, stream) -> None:
        """Write the trajectory dump (header comment, column row, one row per point)."""
        stream.write(self.header() + "\n")
        stream.write(",".join(["t", "x"] + [f"c{k}" for k in range(self.dim)]) + "\n")
        for t, x, row in zip(self.grid.t.tolist(), self.grid.x.tolist(), self.values.tolist()):
            stream.write(",".join(repr(v) for v in (t, x, *row)) + "\n")

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


_HEADER = re.compile(
    r"^# pinstring-field v1, source=(?P<source>\w+), d=(?P<d>\d+), seed=(?P<seed>\d+), "
    r"replica=(?P<replica>\d+), kappa=(?P<kappa>\S+)$"
)


def read_field_csv(text: str) -> FieldSample:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    # metadata comments may precede the field header
    while lines and lines[0].startswith("#") and not lines[0].startswith("# pinstring-field"):
        lines.pop(0)
    m = _HEADER.match(lines[0]) if lines else None
    if m is None:
        raise ValidationError("missing or malformed pinstring-field header")
    d = int(m["d"])
    rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]], dtype=float)
    rows = rows.reshape(-1, d + 2)
    kappa = None if m["kappa"] == "none" else float(m["kappa"])
    grid = SpaceTimeGrid(rows[:, 0], rows[:, 1])
    return FieldSample(grid, d, rows[:, 2:], m["source"], int(m["seed"]), int(m["replica"]), kappa)


def heat_kernel(t: float, x, kappa: float = 1.0, domain: str = "line"):
    """Fundamental solution ``(4 pi kappa t)^{-1/2} exp(-x^2 / 4 kappa t)``.

    On the circle ``R mod 1`` the kernel is the sum over integer images,
    truncated once the image terms fall below 1e-16.
    """
    if not t > 0:
        raise DomainError(f"heat kernel needs t > 0, got {t}")
    if not kappa > 0:
        raise DomainError(f"diffusivity must be positive, got {kappa}")
    x = np.asarray(x, dtype=float)
    s = 4.0 * kappa * t
    norm = 1.0 / math.sqrt(math.pi * s)
    if domain == "line":
        return norm * np.exp(-x * x / s)
    if domain != "circle":
        raise DomainError(f"unknown domain {domain!r}")
    r = x - np.floor(x + 0.5)
    # images with |r + k| >= K - 1/2 contribute below 1e-16 each
    reach = math.sqrt(s * max(math.log(norm / 1e-16), 0.0)) + 1.0
    kmax = int(math.ceil(reach))
    total = np.zeros_like(r)
    for k in range(-kmax, kmax + 1):
        total += np.exp(-(r + k) ** 2 / s)
    return norm * total


def sample_pinned_initial(positions, dim: int, rng: RngStream, scale: float = 1.0) -> np.ndarray:
    """Two-sided Brownian motion pinned to zero at position 0.

    Increments between consecutive positions are independent ``N(0, scale * gap)``
    in every component. Returns an array of shape ``(len(positions), dim)``.
    """
    pos = np.asarray(positions, dtype=float)
    if pos.ndim != 1 or pos.size == 0:
        raise ValidationError("positions must be a non-empty 1-d sequence")
    if np.any(np.diff(pos) <= 0):
        raise ValidationError("positions must be strictly increasing")
    zero = np.flatnonzero(pos == 0.0)
    if zero.size != 1:
        raise ValidationError("positions must contain 0")
    k0 = int(zero[0])
    steps = rng.standard_normal((dim, pos.size - 1)).T * np.sqrt(scale * np.diff(pos))[:, None]
    out = np.zeros((pos.size, dim))
    out[k0 + 1:] = np.cumsum(steps[k0:], axis=0)
    out[:k0] = -np.cumsum(steps[:k0][::-1], axis=0)[::-1]
    return out


def factorize(gram: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor with escalating diagonal jitter.

    Returns the factor and the relative jitter that was needed.
    """
    if gram.size == 0:
        return np.zeros((0, 0)), 0.0
    scale = float(np.mean(np.diag(gram)))
    info = 0
    for eps in JITTER_STEPS:
        a = gram + np.eye(gram.shape[0]) * (eps * scale)
        factor, info = lapack.dpotrf(a, lower=1, clean=1)
        if info == 0:
            return factor, eps
    raise NumericalError(
        f"covariance not positive definite: leading minor of order {info} fails "
        f"even with jitter {JITTER_STEPS[-1]:g} x mean diagonal"
    )


class ExactSampler:
    """Factorized Gram matrix of a grid, reusable across replicas.

    Points with zero variance (the pin at ``(0, 0)``) are excluded from the
    factorization and always sampled as zero.
    """

    def __init__(self, grid: SpaceTimeGrid, kernel: PinnedKernel | None = None):
        self.grid = grid
        self.kernel = kernel or DEFAULT_KERNEL
        gram = self.kernel.gram_matrix(grid)
        self.free = np.flatnonzero(np.diag(gram) > 0.0)
        self.gram = gram
        self.factor, self.jitter = factorize(gram[np.ix_(self.free, self.free)])

    @property
    def kappa(self):
        return 0.5 if self.kernel.form == "stationary" else None

    def draw_components(self, dim: int, rng: RngStream) -> np.ndarray:
        """One replica as an array of shape ``(dim, len(grid))``.

        Components are drawn one after another, so the first ``k`` components
        of a draw do not depend on ``dim``.
        """
        z = rng.standard_normal((dim, self.free.size))
        out = np.zeros((dim, len(self.grid)))
        out[:, self.free] = z @ self.factor.T
        return out

    def sample(self, dim: int, rng: RngStream) -> FieldSample:
        values = self.draw_components(dim, rng).T
        return FieldSample(self.grid, dim, values, "exact", rng.seed, rng.stream_id, self.kappa)


def draw_replicas(sampler: ExactSampler, dim: int, seed: int, first: int, stop: int) -> np.ndarray:
    """Replicas ``first .. stop - 1`` as an array of shape ``(replicas, dim, len(grid))``.

    Replica ``r`` uses ``rng_stream(seed, r)`` exactly as ``draw_components`` does.
    """
    free = sampler.free
    z = np.stack([rng_stream(seed, r).standard_normal((dim, free.size)) for r in range(first, stop)])
    out = np.zeros((stop - first, dim, len(sampler.grid)))
    out[:, :, free] = z @ sampler.factor.T
    return out


def sample_exact(grid: SpaceTimeGrid, dim: int, rng: RngStream,
                 kernel: PinnedKernel | None = None) -> FieldSample:
    """Draw the field on ``grid`` from its exact Gaussian law."""
    if dim < 1:
        raise DomainError("dim must be >= 1")
    return ExactSampler(grid, kernel).sample(dim, rng)
