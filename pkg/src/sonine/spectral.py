"""Mild solutions on a periodic grid through per-mode relaxation functions.

In Fourier variables the equation decouples into scalar Volterra equations,
one per mode, with symbol ``mu = |xi|**rho``:

    u_hat(t, xi) = s(t, mu) u0_hat(xi) + (r(., mu) * f_hat(., xi))(t).

The whole space is replaced by the torus ``[-L, L)**dim`` with ``M`` points
per dimension.  Symbols are rounded to 12 significant digits and deduplicated
before the relaxation solves, which are the expensive part.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy.signal import fftconvolve

from . import _contour
from .grid import SampledFn, TimeGrid
from .kernels import KernelSpec, PowerSum, ell_function, ell_hat
from .volterra import build_relaxation_table, convolve, solve_with_rhs

__all__ = [
    "SpectralGrid", "Field", "MildSolutionRun", "SeparableForcing",
    "fractional_symbol", "unique_symbols", "geometric_checkpoints",
    "evolve_homogeneous", "evolve_forced", "fundamental_solution_field",
    "lr_norm", "gradient_field",
]

SYMBOL_DIGITS = 12
DEFAULT_PRUNE = 1e-18
REALNESS_TOL = 1e-10


@dataclass(frozen=True)
class SpectralGrid:
    """Torus ``[-L, L)**dim`` with ``M`` points per dimension.

    Frequencies are ``xi_k = pi k / L`` for ``k = -M/2 .. M/2 - 1``, stored in
    FFT order.
    """

    dim: int
    half_width: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim!r}")
        L = float(self.half_width)
        if not (np.isfinite(L) and L > 0):
            raise ValueError(f"half_width must be positive, got {self.half_width!r}")
        M = int(self.points)
        if M != self.points or M < 2 or M & (M - 1):
            raise ValueError(f"points must be a power of two >= 2, got {self.points!r}")
        object.__setattr__(self, "half_width", L)
        object.__setattr__(self, "points", M)

    @property
    def shape(self):
        return (self.points,) * self.dim

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.points

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dim

    @property
    def measure(self) -> float:
        return (2.0 * self.half_width) ** self.dim

    @property
    def x(self) -> np.ndarray:
        """Coordinates along one axis; ``x[M/2] = 0``."""
        return -self.half_width + self.dx * np.arange(self.points)

    @property
    def coords(self):
        return np.meshgrid(*([self.x] * self.dim), indexing="ij")

    @property
    def xi_axis(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.dx)

    @property
    def xi(self):
        return np.meshgrid(*([self.xi_axis] * self.dim), indexing="ij")

    @property
    def xi_norm(self) -> np.ndarray:
        return np.sqrt(sum(k ** 2 for k in self.xi))

    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c ** 2 for c in self.coords))


@dataclass(frozen=True, eq=False)
class Field:
    """Real grid function.

    ``spectral`` holds the coefficients of the Fourier series normalised so
    that ``spectral[0]`` is the integral of the field over the torus, i.e. the
    discrete analogue of ``u_hat(0)``.
    """

    grid: SpectralGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"expected shape {self.grid.shape}, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @cached_property
    def spectral(self) -> np.ndarray:
        # sample 0 sits at x = -L; shift so the transform refers to x = 0
        c = np.fft.fftn(np.fft.ifftshift(self.values)) * self.grid.cell_volume
        c.setflags(write=False)
        return c

    @classmethod
    def from_spectral(cls, grid: SpectralGrid, coeffs) -> "Field":
        """Inverse of :attr:`spectral`; rejects non-Hermitian input."""
        z = np.fft.fftshift(np.fft.ifftn(coeffs)) / grid.cell_volume
        scale = max(float(np.max(np.abs(z.real))), 1e-300)
        if float(np.max(np.abs(z.imag))) > REALNESS_TOL * scale:
            raise ValueError("spectral coefficients do not describe a real field")
        return cls(grid, z.real)

    @classmethod
    def from_function(cls, grid: SpectralGrid, f: Callable) -> "Field":
        return cls(grid, f(*grid.coords))

    @classmethod
    def gaussian(cls, grid: SpectralGrid, std: float = 1.0, mass: float = 1.0) -> "Field":
        """Isotropic Gaussian with total integral ``mass``."""
        if not std > 0:
            raise ValueError("std must be positive")
        r2 = grid.radius() ** 2
        norm = (2.0 * np.pi * std ** 2) ** (grid.dim / 2.0)
        return cls(grid, mass * np.exp(-0.5 * r2 / std ** 2) / norm)

    @classmethod
    def cosine(cls, grid: SpectralGrid, mode: int = 1, amplitude: float = 1.0) -> "Field":
        """``amplitude * cos(pi mode x / L)`` along the first axis."""
        x0 = grid.coords[0]
        return cls(grid, amplitude * np.cos(np.pi * mode * x0 / grid.half_width))

    @property
    def mass(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_volume)

    def centered(self) -> "Field":
        """The field minus its mean over the torus."""
        return Field(self.grid, self.values - self.values.mean())

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values + other.values)

    def scaled(self, c: float) -> "Field":
        return Field(self.grid, c * self.values)


def fractional_symbol(grid: SpectralGrid, rho: float) -> np.ndarray:
    """``|xi|**rho`` on every mode, zero at the zero mode."""
    rho = float(rho)
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho!r}")
    k = grid.xi_norm
    out = np.zeros(k.shape)
    nz = k > 0
    out[nz] = k[nz] ** rho
    return out


def unique_symbols(mu: np.ndarray, digits: int = SYMBOL_DIGITS):
    """Round to ``digits`` significant digits and deduplicate.

    Returns ``(values, inverse)`` with ``values[inverse]`` reproducing the
    rounded input.
    """
    mu = np.asarray(mu, dtype=float)
    r = np.zeros(mu.shape)
    nz = mu > 0
    e = np.floor(np.log10(mu[nz]))
    scale = 10.0 ** (digits - 1 - e)
    r[nz] = np.round(mu[nz] * scale) / scale
    vals, inv = np.unique(r.ravel(), return_inverse=True)
    return vals, inv.reshape(mu.shape)


def geometric_checkpoints(timegrid: TimeGrid, t_first: Optional[float] = None,
                          per_decade: int = 16, include_zero: bool = False) -> np.ndarray:
    """Node times close to ``t_first * q**j`` with ``per_decade`` points per decade.

    Duplicates after snapping to the grid are removed; ``t_end`` is always
    included.
    """
    dt, T = timegrid.dt, timegrid.t_end
    t_first = dt if t_first is None else max(float(t_first), dt)
    n = max(int(np.ceil(np.log10(T / t_first) * per_decade)), 0) + 1
    raw = np.geomspace(t_first, T, n) if n > 1 else np.array([T])
    idx = np.unique(np.clip(np.round(raw / dt).astype(int), 1, timegrid.n_steps))
    times = idx * dt
    if include_zero:
        times = np.concatenate([[0.0], times])
    return times


@dataclass(frozen=True)
class SeparableForcing:
    """``f(t, x) = g_gamma(t) * profile(x)``; ``gamma = 1`` is time-constant."""

    gamma: float
    profile: Field

    def __post_init__(self):
        g = float(self.gamma)
        if not (0.0 < g <= 1.0):
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma!r}")
        object.__setattr__(self, "gamma", g)

    def time_factor(self):
        return PowerSum([(1.0, self.gamma)])

    def __call__(self, t: float) -> Field:
        return self.profile.scaled(float(self.time_factor().value(np.array([t]))[0]))


@dataclass(frozen=True, eq=False)
class MildSolutionRun:
    """Snapshots of a mild solution at checkpoint times."""

    spec: KernelSpec
    rho: float
    grid: SpectralGrid
    timegrid: TimeGrid
    u0: Optional[Field]
    forcing: Optional[object]
    snapshots: Dict[float, Field]
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array(sorted(self.snapshots))

    def norms(self, r: float, centered: bool = False) -> np.ndarray:
        return np.array([lr_norm(self.snapshots[t].centered() if centered else self.snapshots[t], r)
                         for t in self.times])

    def gradient_norms(self, r: float) -> np.ndarray:
        out = []
        for t in self.times:
            comps = gradient_field(self.snapshots[t])
            mag = np.sqrt(sum(c.values ** 2 for c in comps))
            out.append(lr_norm(Field(self.grid, mag), r))
        return np.array(out)


def _check_times(timegrid: TimeGrid, checkpoints) -> np.ndarray:
    t = np.atleast_1d(np.asarray(checkpoints, dtype=float))
    idx = np.round(t / timegrid.dt).astype(int)
    if np.any(idx < 0) or np.any(idx > timegrid.n_steps) or \
            np.any(np.abs(idx * timegrid.dt - t) > 1e-9 * max(timegrid.t_end, 1.0)):
        raise ValueError("checkpoints must be nodes of the time grid")
    return idx


def _mode_symbols(grid, rho, coeffs, prune):
    """Symbols of the modes whose coefficients are above ``prune`` relative."""
    mu = fractional_symbol(grid, rho)
    mag = np.abs(coeffs)
    keep = mag > prune * mag.max() if mag.max() > 0 else np.zeros(mu.shape, bool)
    vals, inv = unique_symbols(mu[keep])
    return keep, vals, inv


def evolve_homogeneous(spec: KernelSpec, rho: float, u0: Field, timegrid: TimeGrid,
                       checkpoints, *, prune: float = DEFAULT_PRUNE, eps=None,
                       workers: int = 1, chunk: int = 0) -> MildSolutionRun:
    """``u_hat(t) = s(t, |xi|**rho) u0_hat`` at each checkpoint.

    Modes with ``|u0_hat| <= prune * max |u0_hat|`` are dropped.
    """
    idx = _check_times(timegrid, checkpoints)
    c0 = u0.spectral
    keep, mus, inv = _mode_symbols(u0.grid, rho, c0, prune)
    table = build_relaxation_table(spec, mus, timegrid, eps=eps, want_r=False,
                                   workers=workers, chunk=chunk)
    snaps = {}
    for i in idx:
        t = float(i * timegrid.dt)
        if i == 0:
            snaps[t] = u0
            continue
        c = np.zeros(c0.shape, dtype=complex)
        c[keep] = c0[keep] * table.s_values[i, inv]
        snaps[t] = Field.from_spectral(u0.grid, c)
    return MildSolutionRun(spec, float(rho), u0.grid, timegrid, u0, None, snaps,
                           meta={"n_symbols": int(mus.size)})


def _forced_rhs(spec: KernelSpec, gamma: float, t_max: float):
    """``l * g_gamma`` as a function of time, with its leading exponent."""
    ell = ell_function(spec, t_max)

    def F(t):
        return _contour.invert(lambda lam: ell_hat(spec, lam) * lam ** (-gamma), t)

    return F, float(ell.power) + gamma


def _duhamel_separable(spec, mus, timegrid, gamma, eps):
    table = build_relaxation_table(spec, mus, timegrid, eps=eps, keep_mesh=True)
    g = SampledFn.from_function(PowerSum([(1.0, gamma)]), timegrid)
    out = np.empty((timegrid.n_steps + 1, mus.size))
    for j, m in enumerate(mus):
        out[:, j] = convolve(table.r(m), g).values
    return out


def _duhamel_sampled(spec, grid, rho, forcing, timegrid, prune, eps):
    """Product integration with exact moments of ``r`` and ``f`` linear in time."""
    t = timegrid.nodes
    h = timegrid.dt
    N = timegrid.n_steps
    fh = np.stack([forcing(float(ti)).spectral for ti in t])   # (N+1, *shape)
    scale = np.abs(fh).max(axis=0)
    keep, mus, inv = _mode_symbols(grid, rho, scale, prune)
    table = build_relaxation_table(spec, mus, timegrid, eps=eps)
    R1, R2 = table.r_int1, table.r_int2
    dR2 = np.diff(R2, axis=0) / h                        # lag cells m = 1..N
    wa = R1[1:] - dR2                                    # multiplies f at t_i - m h
    wb = dR2 - R1[:-1]                                   # multiplies f at t_i - (m-1) h
    F = fh[:, keep]                                      # (N+1, n_modes)
    Wa = np.zeros((N + 1, mus.size))
    Wb = np.zeros((N + 1, mus.size))
    Wa[1:], Wb[1:] = wa, wb
    Wa, Wb = Wa[:, inv], Wb[:, inv]
    # u(t_i) = sum_m Wa[m] F[i-m] + Wb[m] F[i-m+1]
    def conv(part):
        return fftconvolve(Wa, part, axes=0)[:N + 1] + fftconvolve(Wb, part, axes=0)[1:N + 2]

    return keep, conv(F.real) + 1j * conv(F.imag)


def evolve_forced(spec: KernelSpec, rho: float, forcing, timegrid: TimeGrid,
                  checkpoints, *, path: str = "volterra", prune: float = DEFAULT_PRUNE,
                  eps=None, grid: Optional[SpectralGrid] = None) -> MildSolutionRun:
    """Mild solution with zero initial data and forcing ``f``.

    ``path="duhamel"`` sums ``r(t - s, mu) f_hat(s)`` by product integration;
    ``path="volterra"`` solves ``u + mu (l * u) = l * f`` mode by mode.  For
    a :class:`SeparableForcing` both paths reduce to one scalar function per
    symbol; a generic callable ``t -> Field`` is accepted by the Duhamel path
    only (it must be finite at ``t = 0``).
    """
    if path not in ("volterra", "duhamel"):
        raise ValueError(f"unknown path {path!r}")
    idx = _check_times(timegrid, checkpoints)
    if isinstance(forcing, SeparableForcing):
        grid = forcing.profile.grid
        c = forcing.profile.spectral
        keep, mus, inv = _mode_symbols(grid, rho, c, prune)
        if path == "duhamel":
            v = _duhamel_separable(spec, mus, timegrid, forcing.gamma, eps)
        else:
            F, p = _forced_rhs(spec, forcing.gamma, timegrid.t_end)
            v = solve_with_rhs(spec, mus, timegrid, F, p, eps=eps)
        coeff = lambda i: c[keep] * v[i, inv]
    else:
        if path != "duhamel":
            raise ValueError("generic forcing suppliers need path='duhamel'")
        if grid is None:
            grid = forcing(0.0).grid
        keep, u = _duhamel_sampled(spec, grid, rho, forcing, timegrid, prune, eps)
        coeff = lambda i: u[i]
    snaps = {}
    for i in idx:
        t = float(i * timegrid.dt)
        cc = np.zeros(grid.shape, dtype=complex)
        if i > 0:
            cc[keep] = coeff(i)
        snaps[t] = Field.from_spectral(grid, cc)
    return MildSolutionRun(spec, float(rho), grid, timegrid, None, forcing, snaps,
                           meta={"path": path})


def fundamental_solution_field(spec: KernelSpec, rho: float, t: float, grid: SpectralGrid, *,
                               n_steps: int = 1000, eps=None, prune: float = 0.0) -> Field:
    """``Z(t, .)`` on the torus from its symbol ``s(t, |xi|**rho)``.

    The relaxation functions are computed on ``TimeGrid(t, n_steps)``.
    Symbols with ``exp``-small weight are not pruned by default.
    """
    t = float(t)
    if not t > 0:
        raise ValueError("t must be positive")
    mu = fractional_symbol(grid, rho)
    mus, inv = unique_symbols(mu)
    tg = TimeGrid(t, n_steps)
    table = build_relaxation_table(spec, mus, tg, eps=eps, want_r=False)
    c = table.s_values[-1, inv]
    if prune > 0:
        c = np.where(np.abs(c) > prune, c, 0.0)
    return Field.from_spectral(grid, c.astype(complex))


def lr_norm(f: Field, r: float) -> float:
    """``(sum |u|**r dx)**(1/r)``; ``r = inf`` gives the maximum."""
    r = float(r)
    if np.isinf(r):
        return float(np.max(np.abs(f.values)))
    if not r >= 1:
        raise ValueError(f"r must be >= 1, got {r!r}")
    return float((np.sum(np.abs(f.values) ** r) * f.grid.cell_volume) ** (1.0 / r))


def gradient_field(f: Field) -> Sequence[Field]:
    """Components ``i xi_j u_hat`` transformed back; the Nyquist mode is dropped."""
    grid = f.grid
    c = f.spectral
    M = grid.points
    out = []
    for j, k in enumerate(grid.xi):
        kk = k.copy()
        nyq = np.zeros(grid.shape, dtype=bool)
        sl = [slice(None)] * grid.dim
        sl[j] = M // 2
        nyq[tuple(sl)] = True
        kk[nyq] = 0.0
        out.append(Field.from_spectral(grid, 1j * kk * c))
    return out
