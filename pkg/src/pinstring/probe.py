"""Hitting, double-point and recurrence experiments on the pinned string.

Monte Carlo estimators draw the field exactly at the event points, one Philox
stream per replica, in fixed-size replica chunks. Chunk counts are integers, so
the totals do not depend on how chunks are spread over worker processes.
Analytic lower bounds use the second-moment inequality

    P(A_1 or ... or A_n) >= (sum p_i)^2 / (sum p_i + 2 sum_{i<j} P(A_i and A_j))

with single and joint box probabilities computed from the kernel.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .boxprob import bivariate_box_prob_array, interval_mass
from .errors import ConfigError, DomainError, ValidationError
from .grid import SpaceTimeGrid, dyadic_grid
from .kernel import DEFAULT_KERNEL, PinnedKernel
from .sampler import ExactSampler, FieldSample, draw_replicas

CHUNK = 500
PAIR_BLOCK = 250_000
MAX_RECURRENCE_POINTS = 2000
CSV_FIELDS = ("experiment", "dim", "n_or_N", "delta", "trials", "successes", "estimate",
              "ci_low", "ci_high", "analytic_bound", "seed")


# --------------------------------------------------------------------------
# second-moment inequality

def lemma1_bound(p, pair_sum: float) -> float:
    """Second-moment lower bound ``(sum p)^2 / (sum p + 2 pair_sum)``."""
    p = np.asarray(p, dtype=float).ravel()
    if np.any(p < 0) or np.any(p > 1):
        raise DomainError("event probabilities must lie in [0, 1]")
    if pair_sum < 0:
        raise DomainError("pair_sum must be >= 0")
    total = math.fsum(p.tolist())
    if total == 0.0:
        return 0.0
    return total * total / (total + 2.0 * pair_sum)


def lemma1_oracle_check(joint) -> bool:
    """Check the second-moment bound against an enumerated event system.

    ``joint[m]`` is the probability of the outcome atom whose bit ``i`` tells
    whether event ``i`` occurs; ``len(joint)`` must be ``2**k`` with ``k <= 4``.
    """
    joint = np.asarray(joint, dtype=float).ravel()
    k = int(round(math.log2(joint.size))) if joint.size else -1
    if k < 1 or k > 4 or joint.size != 2**k:
        raise ValidationError("joint must list 2**k atoms with 1 <= k <= 4")
    if np.any(joint < 0) or abs(math.fsum(joint.tolist()) - 1.0) > 1e-12:
        raise ValidationError("joint distribution must be nonnegative and sum to 1")
    bits = (np.arange(joint.size)[:, None] >> np.arange(k)[None, :]) & 1
    p = bits.T.astype(float) @ joint
    pair_sum = math.fsum(float(joint @ (bits[:, i] * bits[:, j]))
                         for i in range(k) for j in range(i + 1, k))
    union = math.fsum(joint[1:].tolist())
    return lemma1_bound(p, pair_sum) <= union + 1e-12


def lemma1_from_covariance(variances, cov, delta: float, dim: int, block: int = PAIR_BLOCK) -> float:
    """Second-moment bound for the events ``{Y_i in B_delta(0)}``.

    ``Y_i`` are centered Gaussian vectors with ``dim`` i.i.d. components whose
    per-component covariance is ``cov[i, j]`` (``variances`` is its diagonal).
    Joint probabilities are accumulated with exact (compensated) summation.
    """
    var = np.asarray(variances, dtype=float)
    p = interval_mass(var, delta) ** dim
    iu, ju = np.triu_indices(var.size, k=1)
    partial = []
    for s in range(0, iu.size, block):
        i, j = iu[s:s + block], ju[s:s + block]
        joint = bivariate_box_prob_array(var[i], var[j], cov[i, j], delta) ** dim
        partial.append(math.fsum(joint.tolist()))
    return lemma1_bound(p, math.fsum(partial))


# --------------------------------------------------------------------------
# event grids

@dataclass
class EventGrid:
    """Index set of box events and the space-time points they involve.

    For ``hit`` and ``recurrence`` each event is ``{U(point) in B_delta(0)}``.
    For ``double`` event ``e`` is ``{U(first[e]) - U(second[e]) in B_delta(0)}``
    with ``first``/``second`` indexing ``grid``.
    """

    kind: str
    level: int
    delta: float
    dim: int
    grid: SpaceTimeGrid
    first: np.ndarray | None = field(default=None, repr=False)
    second: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("hit", "double", "recurrence"):
            raise ValidationError(f"unknown event kind {self.kind!r}")
        if self.dim < 1:
            raise DomainError("dim must be >= 1")
        if not self.delta > 0:
            raise DomainError("delta must be positive")

    @property
    def size(self) -> int:
        return len(self.grid) if self.first is None else self.first.size


def hit_delta(n: int, delta0: float = 1.0) -> float:
    """Box half-width ``delta0 2^{-6n/5}`` that keeps ``2^{6n} delta^5`` fixed."""
    return delta0 * 2.0 ** (-6.0 * n / 5.0)


def hit_events(n: int, dim: int, delta: float | None = None, delta0: float = 1.0) -> EventGrid:
    """Events at ``(1 + i 2^{-4n}, j 2^{-2n})``, ``1 <= i <= 2^{4n}``, ``1 <= j <= 2^{2n}``."""
    if delta is None:
        delta = hit_delta(n, delta0)
    grid = dyadic_grid(n, 2 ** (4 * n), 2 ** (2 * n), t_offset=1.0)
    return EventGrid("hit", n, delta, dim, grid)


def double_events(n: int, dim: int) -> EventGrid:
    """Differences ``U(i 2^{-4n}, j 2^{-2n}) - U(3 + k 2^{-4n}, l 2^{-2n})``, ``delta = 2^{-12n/11}``."""
    a = dyadic_grid(n, 2 ** (4 * n), 2 ** (2 * n))
    b = dyadic_grid(n, 2 ** (4 * n), 2 ** (2 * n), t_offset=3.0)
    grid = SpaceTimeGrid(np.concatenate([a.t, b.t]), np.concatenate([a.x, b.x]))
    m = len(a)
    first, second = np.meshgrid(np.arange(m), m + np.arange(m), indexing="ij")
    return EventGrid("double", n, 2.0 ** (-12.0 * n / 11.0), dim, grid,
                     first.ravel(), second.ravel())


def recurrence_points(N: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(N, N * N + 1) for j in range(math.isqrt(i) + 1)]


def recurrence_events(N: int, delta: float, dim: int,
                      max_points: int = MAX_RECURRENCE_POINTS) -> EventGrid:
    """Events at the integer points ``N <= i <= N^2``, ``0 <= j <= sqrt(i)``."""
    if N < 2:
        raise ConfigError("N must be >= 2")
    # the point count grows like N^3, so check it before building the list
    count = sum(math.isqrt(i) + 1 for i in range(N, N * N + 1))
    if count > max_points:
        raise ConfigError(f"recurrence grid for N={N} has {count} points (limit {max_points})")
    grid = SpaceTimeGrid.from_points(recurrence_points(N))
    return EventGrid("recurrence", N, delta, dim, grid)


# --------------------------------------------------------------------------
# Monte Carlo

@dataclass
class McEstimate:
    """Bernoulli Monte Carlo result with a 95% Wilson interval."""

    experiment: str
    dim: int
    n_or_N: int
    delta: float
    trials: int
    successes: int
    seed: int
    analytic_bound: float | None = None

    def __post_init__(self):
        if self.trials < 1 or not 0 <= self.successes <= self.trials:
            raise ValidationError("need trials >= 1 and 0 <= successes <= trials")
        ci = binomtest(self.successes, self.trials).proportion_ci(0.95, method="wilson")
        self.ci_low = min(float(ci.low), self.estimate)
        self.ci_high = max(float(ci.high), self.estimate)

    @property
    def estimate(self) -> float:
        return self.successes / self.trials

    @property
    def replicas(self) -> range:
        return range(self.trials)

    def to_row(self) -> str:
        bound = "" if self.analytic_bound is None else repr(float(self.analytic_bound))
        vals = (self.experiment, self.dim, self.n_or_N, repr(float(self.delta)), self.trials,
                self.successes, repr(self.estimate), repr(self.ci_low), repr(self.ci_high),
                bound, self.seed)
        return ",".join(str(v) for v in vals)


def _count_chunk(args) -> int:
    sampler, dim, target, delta, seed, r0, r1 = args
    vals = draw_replicas(sampler, dim, seed, r0, r1)
    inside = np.all(np.abs(vals - target[None, :, None]) < delta, axis=1)
    return int(np.count_nonzero(inside.any(axis=1)))


def count_box_hits(sampler: ExactSampler, dim: int, target, delta: float, trials: int,
                   seed: int, workers: int = 1) -> int:
    """Number of replicas in which some grid point lands in ``B_delta(target)``."""
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    target = np.broadcast_to(np.asarray(target, dtype=float), (dim,)).copy()
    jobs = [(sampler, dim, target, delta, seed, r0, min(r0 + CHUNK, trials))
            for r0 in range(0, trials, CHUNK)]
    if workers == 1 or len(jobs) == 1:
        return sum(_count_chunk(j) for j in jobs)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(_count_chunk, jobs))


def hit_probability(events: EventGrid, trials: int, seed: int, target=None, workers: int = 1,
                    kernel: PinnedKernel | None = None, with_bound: bool = True) -> McEstimate:
    """Estimate ``P(U(p) in B_delta(target) for some event point p)``.

    The analytic second-moment bound is attached when the target is the origin.
    """
    if events.kind == "double":
        raise ValidationError("hit_probability needs a hit or recurrence event grid")
    if math.isinf(events.delta):
        return McEstimate(events.kind, events.dim, events.level, events.delta, trials, trials, seed)
    kernel = kernel or DEFAULT_KERNEL
    sampler = ExactSampler(events.grid, kernel)
    z = np.zeros(events.dim) if target is None else np.asarray(target, dtype=float)
    hits = count_box_hits(sampler, events.dim, z, events.delta, trials, seed, workers)
    bound = None
    if with_bound and not np.any(z):
        bound = lemma1_from_covariance(np.diag(sampler.gram), sampler.gram, events.delta, events.dim)
    return McEstimate(events.kind, events.dim, events.level, events.delta, trials, hits, seed, bound)


def recurrence_experiment(N: int, delta: float, dim: int, trials: int, seed: int,
                          workers: int = 1, kernel: PinnedKernel | None = None) -> McEstimate:
    """Monte Carlo estimate of the probability of returning to ``B_delta(0)``
    at some integer point ``N <= i <= N^2``, ``0 <= j <= sqrt(i)``, with the
    analytic second-moment lower bound attached."""
    return hit_probability(recurrence_events(N, delta, dim), trials, seed,
                           workers=workers, kernel=kernel)


# --------------------------------------------------------------------------
# analytic bounds

def second_moment_hit_bound(n: int, dim: int, delta0: float = 1.0,
                            kernel: PinnedKernel | None = None) -> float:
    """Lower bound on ``P(some event of hit_events(n) occurs)`` from exact box probabilities."""
    if n >= 3:
        raise ConfigError(f"level n={n} has {2 ** (6 * n)} events; only n <= 2 is supported")
    if n < 0:
        raise DomainError("level must be >= 0")
    events = hit_events(n, dim, delta0=delta0)
    gram = (kernel or DEFAULT_KERNEL).gram_matrix(events.grid)
    return lemma1_from_covariance(np.diag(gram), gram, events.delta, dim)


def double_point_covariance(events: EventGrid, kernel: PinnedKernel | None = None) -> np.ndarray:
    """Per-component covariance matrix of the differences of a double-point event grid."""
    gram = (kernel or DEFAULT_KERNEL).gram_matrix(events.grid)
    a, b = events.first, events.second
    return gram[np.ix_(a, a)] - gram[np.ix_(a, b)] - gram[np.ix_(b, a)] + gram[np.ix_(b, b)]


def double_point_grid_bound(n: int, dim: int, kernel: PinnedKernel | None = None) -> float:
    """Second-moment lower bound on a double point between the blocks
    ``[0,1]^2`` and ``[3,4] x [0,1]`` at level ``n``."""
    if n != 1:
        raise ConfigError("only level n=1 (4096 events) is supported")
    events = double_events(n, dim)
    cov = double_point_covariance(events, kernel)
    return lemma1_from_covariance(np.diag(cov), cov, events.delta, dim)


# --------------------------------------------------------------------------
# double-point detection

DOUBLE_MODES = ("fixed-time", "simultaneous", "range")


@dataclass
class DoublePointReport:
    """Pairs of grid points whose values are within ``tolerance`` in sup norm.

    ``pairs`` holds ``(a, b, gap)`` with grid indices ``a < b``, sorted.
    """

    mode: str
    tolerance: float
    min_separation: int
    pairs: list = field(default_factory=list)

    def __len__(self):
        return len(self.pairs)

    def index_pairs(self):
        return [(a, b) for a, b, _ in self.pairs]


def _admissible(sample: FieldSample, mode: str, a, b, min_sep: int):
    ti, xi = sample.grid.lattice_indices()
    sep = np.maximum(np.abs(ti[a] - ti[b]), np.abs(xi[a] - xi[b]))
    ok = sep >= min_sep
    if mode != "range":
        ok &= ti[a] == ti[b]
    return ok


def _check_mode(sample: FieldSample, mode: str):
    if mode not in DOUBLE_MODES:
        raise ValidationError(f"unknown double-point mode {mode!r}")
    if mode == "fixed-time" and np.unique(sample.grid.t).size != 1:
        raise ValidationError("fixed-time mode needs a sample on a single time slice")


def _report(sample, mode, tol, min_sep, a, b):
    gap = np.max(np.abs(sample.values[a] - sample.values[b]), axis=1)
    keep = (gap < tol) & _admissible(sample, mode, a, b, min_sep)
    a, b, gap = a[keep], b[keep], gap[keep]
    order = np.lexsort((b, a))
    pairs = [(int(i), int(j), float(g)) for i, j, g in zip(a[order], b[order], gap[order])]
    return DoublePointReport(mode, tol, min_sep, pairs)


def double_points(sample: FieldSample, mode: str = "range", tolerance: float = 1e-2,
                  min_separation: int = 2) -> DoublePointReport:
    """Find near-coincident values of a sampled field.

    A pair qualifies when the sup-norm gap of its values is below ``tolerance``
    and its lattice separation (the larger of the time-rank and position-rank
    differences) is at least ``min_separation``. ``simultaneous`` and
    ``fixed-time`` only compare points at the same time. Candidates come from
    a sort on the first component, so the cost is near-linear when few pairs
    are close.
    """
    _check_mode(sample, mode)
    if not tolerance > 0:
        raise DomainError("tolerance must be positive")
    v0 = sample.values[:, 0]
    order = np.argsort(v0, kind="stable")
    s = v0[order]
    # window padded so rounding in s + tol never drops a candidate
    ends = np.searchsorted(s, s + 2.0 * tolerance, side="left")
    starts = np.arange(s.size) + 1
    counts = np.maximum(ends - starts, 0)
    left = np.repeat(np.arange(s.size), counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    right = np.repeat(starts, counts) + offsets
    a, b = order[left], order[right]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    return _report(sample, mode, tolerance, min_separation, lo, hi)


def double_points_bruteforce(sample: FieldSample, mode: str = "range", tolerance: float = 1e-2,
                             min_separation: int = 2) -> DoublePointReport:
    """Quadratic all-pairs scan; reference for ``double_points``."""
    _check_mode(sample, mode)
    a, b = np.triu_indices(len(sample.grid), k=1)
    return _report(sample, mode, tolerance, min_separation, a, b)
