"""Uniform time grids and functions sampled on them.

Sampled functions are interpolated cell by cell with power laws
``v_j (t / t_j)**p_j`` whenever both end values are positive, which is exact
for the ``t**(b-1)`` kernels that dominate this package, and linearly
otherwise.  A function flagged ``singular`` blows up at ``t = 0``; its first
cell is modelled by a single power law fitted to the next samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import exprel


@dataclass(frozen=True)
class TimeGrid:
    """Nodes ``t_i = i * t_end / n_steps`` for ``i = 0..n_steps``."""

    t_end: float
    n_steps: int

    def __post_init__(self):
        t_end = float(self.t_end)
        if not (np.isfinite(t_end) and t_end > 0.0):
            raise ValueError(f"t_end must be positive, got {self.t_end!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise ValueError(f"n_steps must be an integer >= 2, got {self.n_steps!r}")
        object.__setattr__(self, "t_end", t_end)
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    def __len__(self):
        return self.n_steps + 1

    def index_of(self, t: float) -> int:
        """Index of the node closest to ``t``."""
        i = int(round(float(t) / self.dt))
        if i < 0 or i > self.n_steps:
            raise ValueError(f"t={t} lies outside [0, {self.t_end}]")
        return i

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t_end, self.n_steps * factor)


@dataclass(frozen=True, eq=False)
class SampledFn:
    """Values of a function on the nodes of a :class:`TimeGrid`.

    ``fn`` optionally carries the continuous function (an object with
    ``value``, ``int1`` and ``int2`` methods) so that quadratures can use
    exact values and primitives instead of interpolated samples.  ``power``
    is the leading exponent ``p`` in ``f(t) ~ c t**p`` as ``t -> 0``, used
    for singular first cells.
    """

    grid: TimeGrid
    values: np.ndarray
    singular: bool = False
    fn: Optional[object] = None
    power: Optional[float] = None
    residual: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size != len(self.grid):
            raise ValueError(
                f"expected {len(self.grid)} samples, got shape {v.shape}")
        if self.singular:
            v = v.copy()
            v[0] = np.inf
        elif not np.all(np.isfinite(v)):
            raise ValueError("non-singular samples must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, fn, grid: TimeGrid) -> "SampledFn":
        """Sample a kernel function object on ``grid``."""
        t = grid.nodes
        vals = np.empty(t.size)
        vals[1:] = fn.value(t[1:])
        singular = bool(getattr(fn, "singular", False))
        vals[0] = np.inf if singular else fn.value(np.array([0.0]))[0]
        return cls(grid, vals, singular=singular, fn=fn,
                   power=getattr(fn, "power", None))

    @classmethod
    def constant(cls, grid: TimeGrid, c: float = 1.0) -> "SampledFn":
        return cls(grid, np.full(len(grid), float(c)), power=0.0)

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:]

    def leading_power(self) -> float:
        """Exponent of the first cell model, declared or estimated."""
        if self.power is not None:
            return float(self.power)
        v1, v2 = self.values[1], self.values[2]
        if v1 > 0 and v2 > 0:
            return float(np.log(v2 / v1) / np.log(2.0))
        return 0.0

    def __call__(self, t) -> np.ndarray:
        """Evaluate at arbitrary ``t`` in ``(0, t_end]``."""
        t = np.asarray(t, dtype=float)
        if self.fn is not None:
            return np.asarray(self.fn.value(t), dtype=float)
        return interpolate(self.grid, self.values, t, self.singular,
                           self.leading_power())

    def cumulative(self) -> "SampledFn":
        """``(1 * f)(t_i)`` from exact integration of the cell models."""
        if self.fn is not None:
            t = self.grid.nodes
            vals = np.zeros(t.size)
            vals[1:] = self.fn.int1(t[1:])
            return SampledFn(self.grid, vals)
        cells = cell_integrals(self.grid, self.values, self.singular,
                               self.leading_power())
        return SampledFn(self.grid, np.concatenate([[0.0], np.cumsum(cells)]))


def _cell_exponents(t: np.ndarray, v: np.ndarray):
    """Power-law exponents for cells ``[t_j, t_j+1]``, ``j >= 1``; NaN marks linear cells."""
    a, b = v[1:-1], v[2:]
    p = np.full(a.shape, np.nan)
    ok = (a > 0) & (b > 0)
    p[ok] = np.log(b[ok] / a[ok]) / np.log(t[2:][ok] / t[1:-1][ok])
    return p


def interpolate(grid: TimeGrid, values, t, singular: bool = False,
                power: float = 0.0) -> np.ndarray:
    """Cellwise power-law (or linear) interpolation of nodal samples."""
    v = np.asarray(values, dtype=float)
    t = np.asarray(t, dtype=float)
    h = grid.dt
    nodes = grid.nodes
    j = np.clip(np.floor(t / h).astype(int), 0, grid.n_steps - 1)
    out = np.empty(t.shape)
    first = j == 0
    if np.any(first):
        tt = t[first]
        if singular:
            out[first] = v[1] * (tt / h) ** power
        else:
            out[first] = v[0] + (v[1] - v[0]) * tt / h
    rest = ~first
    if np.any(rest):
        jj = j[rest]
        tt = t[rest]
        p = _cell_exponents(nodes, v)[jj - 1]
        va, vb = v[jj], v[jj + 1]
        lin = va + (vb - va) * (tt - nodes[jj]) / h
        with np.errstate(invalid="ignore", divide="ignore"):
            pw = va * (tt / nodes[jj]) ** p
        out[rest] = np.where(np.isnan(p), lin, pw)
    return out


def cell_integrals(grid: TimeGrid, values, singular: bool = False,
                   power: float = 0.0) -> np.ndarray:
    """Exact integrals of the cell models over every cell."""
    v = np.asarray(values, dtype=float)
    h = grid.dt
    t = grid.nodes
    out = np.empty(grid.n_steps)
    if singular:
        out[0] = v[1] * h / (power + 1.0)
    else:
        out[0] = 0.5 * h * (v[0] + v[1])
    p = _cell_exponents(t, v)
    lin = 0.5 * h * (v[1:-1] + v[2:])
    logr = np.log(t[2:] / t[1:-1])
    with np.errstate(invalid="ignore"):
        pw = v[1:-1] * t[1:-1] * logr * exprel((p + 1.0) * logr)
    out[1:] = np.where(np.isnan(p), lin, pw)
    return out


def gauss_legendre01(n: int):
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w
