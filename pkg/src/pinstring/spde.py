"""Explicit finite-difference integration of the stochastic heat equation.

The scheme on a lattice of spacing ``dx`` is

    u[m+1, j] = u[m, j] + kappa dt/dx^2 (u[m, j+1] - 2 u[m, j] + u[m, j-1])
                + sqrt(dt/dx) xi[m, j]

with ``xi`` i.i.d. standard normal per cell, step and component, and periodic
closure. The line is represented by a periodic window wide enough that the
wrap does not reach the region of interest within the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .grid import SpaceTimeGrid
from .sampler import FieldSample, sample_pinned_initial
from .streams import RngStream, rng_stream

INITIAL_KINDS = ("zero", "pinned-brownian", "explicit")
# steps of noise drawn per generator call; draws do not depend on it
NOISE_CHUNK = 32
WINDOW_MARGIN_SD = 6.0


@dataclass(frozen=True)
class SpdeConfig:
    """Discretization and domain of one integration.

    ``extent`` is the half-width of the region of interest on the line; the
    periodic window must cover it plus ``6 sqrt(kappa T)``. ``initial_scale``
    multiplies the variance of the pinned Brownian initial data (``1/(2 kappa)``
    makes it stationary for the chosen diffusivity).
    """

    dx: float
    dt: float
    horizon: float
    dim: int = 1
    kappa: float = 0.5
    domain: str = "line"
    initial: str = "pinned-brownian"
    extent: float = 1.0
    half_width: float | None = None
    initial_scale: float = 1.0
    initial_values: np.ndarray | None = field(default=None, compare=False, repr=False)
    save_every: int = 1

    def __post_init__(self):
        if not (self.dx > 0 and self.dt > 0 and self.horizon > 0):
            raise ConfigError("dx, dt and horizon must be positive")
        if not self.kappa > 0:
            raise ConfigError("kappa must be positive")
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.save_every < 1:
            raise ConfigError("save_every must be >= 1")
        if self.kappa * self.dt / self.dx**2 > 0.5:
            raise ConfigError(
                f"unstable scheme: kappa*dt/dx^2 = {self.kappa * self.dt / self.dx**2:.4g} > 1/2"
            )
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError("horizon must be an integer number of time steps")
        if self.domain == "circle":
            cells = 1.0 / self.dx
            if abs(cells - round(cells)) > 1e-9 * cells:
                raise ConfigError("on the circle, 1/dx must be an integer")
        elif self.domain == "line":
            need = self.extent + WINDOW_MARGIN_SD * math.sqrt(self.kappa * self.horizon)
            if self.half_width is not None and self.half_width < need:
                raise ConfigError(
                    f"line window half-width {self.half_width} is below extent + 6 sqrt(kappa T) = {need:.4g}"
                )
        else:
            raise ConfigError(f"unknown domain {self.domain!r}")
        if self.initial not in INITIAL_KINDS:
            raise ConfigError(f"unknown initial condition {self.initial!r}")
        if self.initial == "explicit":
            if self.initial_values is None:
                raise ConfigError("explicit initial condition needs initial_values")
            if np.shape(self.initial_values) != (self.nodes.size, self.dim):
                raise ConfigError(
                    f"initial_values must have shape {(self.nodes.size, self.dim)}"
                )

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def nodes(self) -> np.ndarray:
        if self.domain == "circle":
            return np.arange(int(round(1.0 / self.dx))) * self.dx
        hw = self.half_width
        if hw is None:
            hw = self.extent + WINDOW_MARGIN_SD * math.sqrt(self.kappa * self.horizon)
        m = int(math.ceil(hw / self.dx - 1e-9))
        return np.arange(-m, m) * self.dx

    @property
    def save_steps(self) -> np.ndarray:
        saved = np.arange(0, self.steps + 1, self.save_every)
        if saved[-1] != self.steps:
            saved = np.append(saved, self.steps)
        return saved


def _initial_state(config: SpdeConfig, rng: RngStream) -> np.ndarray:
    nodes = config.nodes
    if config.initial == "zero":
        u0 = np.zeros((nodes.size, config.dim))
    elif config.initial == "pinned-brownian":
        u0 = sample_pinned_initial(nodes, config.dim, rng, scale=config.initial_scale)
    else:
        u0 = np.array(config.initial_values, dtype=float)
    return np.ascontiguousarray(u0.T)


def _step(u, lam, sigma, xi):
    lap = np.roll(u, 1, axis=-1) + np.roll(u, -1, axis=-1) - 2.0 * u
    if xi is None:
        return u + lam * lap
    return u + lam * lap + sigma * xi


def _run(u, config: SpdeConfig, draw, noise: bool, record=None):
    """Advance ``u`` (shape ``(..., dim, cells)``) through all steps.

    ``draw(k)`` returns ``k`` steps of noise with shape ``(..., k, dim, cells)``.
    ``record(step, u)`` is called at the configured save steps.
    """
    lam = config.kappa * config.dt / config.dx**2
    sigma = math.sqrt(config.dt / config.dx)
    saves = set(config.save_steps.tolist())
    if record is not None and 0 in saves:
        record(0, u)
    m = 0
    while m < config.steps:
        k = min(NOISE_CHUNK, config.steps - m)
        block = draw(k) if noise else None
        for s in range(k):
            xi = None if block is None else block[..., s, :, :]
            u = _step(u, lam, sigma, xi)
            m += 1
            if record is not None and m in saves:
                record(m, u)
    return u


def integrate_spde(config: SpdeConfig, rng: RngStream, noise: bool = True) -> FieldSample:
    """Integrate one replica and return the saved trajectory.

    The result lives on the product grid of saved times and lattice nodes.
    ``noise=False`` integrates the deterministic heat equation (test hook).
    """
    u = _initial_state(config, rng)
    frames = []
    _run(u, config, lambda k: rng.standard_normal((k, config.dim, u.shape[-1])), noise,
         record=lambda m, v: frames.append(v.T.copy()))
    times = config.save_steps * config.dt
    grid = SpaceTimeGrid.product(times, config.nodes)
    values = np.concatenate(frames, axis=0)
    return FieldSample(grid, config.dim, values, "spde", rng.seed, rng.stream_id, config.kappa)


def integrate_spde_ensemble(config: SpdeConfig, seed: int, replicas: int, first: int = 0,
                            block: int = 128, noise: bool = True) -> np.ndarray:
    """Final-time fields of replicas ``first .. first + replicas - 1``.

    Returns an array of shape ``(replicas, cells, dim)``. Replica ``r`` uses
    ``rng_stream(seed, r)`` and matches ``integrate_spde`` bit for bit.
    """
    cells = config.nodes.size
    out = np.empty((replicas, cells, config.dim))
    for b0 in range(0, replicas, block):
        ids = range(first + b0, first + min(b0 + block, replicas))
        rngs = [rng_stream(seed, r) for r in ids]
        u = np.stack([_initial_state(config, g) for g in rngs])

        def draw(k):
            return np.stack([g.standard_normal((k, config.dim, cells)) for g in rngs])

        u = _run(u, config, draw, noise)
        out[b0:b0 + len(rngs)] = np.swapaxes(u, 1, 2)
    return out
