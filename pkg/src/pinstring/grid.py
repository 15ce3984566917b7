"""Finite sets of space-time points in canonical (t, then x) order."""

from __future__ import annotations

import numpy as np

from .errors import DomainError, ValidationError
from .kernel import SpaceTimePoint


class SpaceTimeGrid:
    """Distinct space-time points, sorted lexicographically by ``(t, x)``.

    Parameters
    ----------
    t, x : array_like
        Coordinates of the points; sorted into canonical order on construction.
    kind : str
        Provenance tag: ``"dyadic"``, ``"product"`` or ``"explicit"``.
    level : int, optional
        Dyadic level ``n`` for dyadic grids.
    index_ranges : tuple, optional
        ``(i_values, j_values)`` for dyadic grids.
    """

    def __init__(self, t, x, kind="explicit", level=None, index_ranges=None, _sorted=False):
        t = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        if t.shape != x.shape:
            raise ValidationError("t and x must have the same length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(x))):
            raise DomainError("grid coordinates must be finite")
        if np.any(t < 0):
            raise DomainError("grid times must be >= 0")
        if not _sorted:
            order = np.lexsort((x, t))
            t, x = t[order], x[order]
            if t.size > 1:
                same = (t[1:] == t[:-1]) & (x[1:] == x[:-1])
                if same.any():
                    k = int(np.argmax(same))
                    raise ValidationError(f"duplicate grid point {(t[k], x[k])}")
        self.t = t
        self.x = x
        self.kind = kind
        self.level = level
        self.index_ranges = index_ranges

    @classmethod
    def from_points(cls, points, kind="explicit"):
        pts = [tuple(p) for p in points]
        if not pts:
            return cls([], [], kind=kind)
        t, x = zip(*pts)
        return cls(t, x, kind=kind)

    @classmethod
    def product(cls, times, xs, kind="product", level=None, index_ranges=None):
        """All pairs ``(t, x)`` for ``t`` in ``times`` and ``x`` in ``xs``."""
        times = np.unique(np.asarray(times, dtype=float))
        xs = np.unique(np.asarray(xs, dtype=float))
        tt, xx = np.meshgrid(times, xs, indexing="ij")
        grid = cls(tt.ravel(), xx.ravel(), kind=kind, level=level,
                   index_ranges=index_ranges, _sorted=True)
        if np.any(grid.t < 0) or not np.all(np.isfinite(grid.x)):
            raise DomainError("grid coordinates must be finite with t >= 0")
        return grid

    def __len__(self):
        return self.t.size

    def __iter__(self):
        for t, x in zip(self.t.tolist(), self.x.tolist()):
            yield SpaceTimePoint(t, x)

    def __getitem__(self, k):
        return SpaceTimePoint(float(self.t[k]), float(self.x[k]))

    @property
    def points(self):
        return list(self)

    def contains(self, t, x) -> bool:
        return bool(np.any((self.t == t) & (self.x == x)))

    def lattice_indices(self):
        """Rank of each point's time and position among the grid's distinct values."""
        _, ti = np.unique(self.t, return_inverse=True)
        _, xi = np.unique(self.x, return_inverse=True)
        return ti, xi

    def scaled(self, factor):
        """The grid ``(L^4 t, L^2 x)`` used by the scaling invariance."""
        return SpaceTimeGrid(self.t * factor**4, self.x * factor**2, kind=self.kind)

    def __repr__(self):
        return f"SpaceTimeGrid(kind={self.kind!r}, size={len(self)}, level={self.level})"


def _index_values(spec):
    if isinstance(spec, (int, np.integer)):
        return np.arange(1, int(spec) + 1)
    return np.asarray(list(spec), dtype=np.int64)


def dyadic_grid(n: int, t_count, x_count, t_offset: float = 0.0) -> SpaceTimeGrid:
    """Parabolic dyadic lattice ``(t_offset + i 2^{-4n}, j 2^{-2n})``.

    ``t_count`` and ``x_count`` are either a count ``k`` (indices ``1..k``) or an
    explicit iterable of integer indices.
    """
    if n < 0:
        raise DomainError("dyadic level must be >= 0")
    i = _index_values(t_count)
    j = _index_values(x_count)
    times = t_offset + i * 2.0 ** (-4 * n)
    xs = j * 2.0 ** (-2 * n)
    return SpaceTimeGrid.product(times, xs, kind="dyadic", level=n, index_ranges=(i, j))
