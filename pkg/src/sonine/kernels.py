"""Sonine kernel pairs ``(k, l)`` with ``k * l = 1`` on the half line.

Five families are supported:

``Classical``
    ``l = 1`` and ``k`` the Dirac limit; only useful as an oracle.
``FractionalRL(alpha)``
    ``k = g_{1-alpha}``, ``l = g_alpha``.
``SumFractional(alpha, beta)``
    ``k = g_{1-alpha} + g_{1-beta}``; ``l`` has Laplace transform
    ``1 / (lam**alpha + lam**beta)``.
``MLWeighted(alpha, beta, omega)``
    ``k = t**(beta-1) E_{alpha,beta}(-omega t**alpha)`` and
    ``l = g_{1-beta} + omega g_{1+alpha-beta}``.
``DistributedOrder(n)``
    ``k = int_0^1 a**n g_a da``, giving logarithmic (ultraslow) laws.

Here ``g_b(t) = t**(b-1) / Gamma(b)``.  Each kernel is represented by a small
object exposing ``value``, ``int1`` (``1 * f``) and ``int2`` (``1 * 1 * f``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gammaln, rgamma

from . import _contour
from .grid import SampledFn, TimeGrid, gauss_legendre01
from .mlf import MLParams, mittag_leffler

VARIANTS = ("Classical", "FractionalRL", "SumFractional", "MLWeighted",
            "DistributedOrder")


class DeconvolutionError(RuntimeError):
    """Raised when ``k * l = 1`` cannot be met to the requested tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class UnsupportedVariantError(ValueError):
    pass


def _check_unit(name, x, lo=0.0, hi=1.0):
    x = float(x)
    if not (np.isfinite(x) and lo < x < hi):
        raise ValueError(f"{name} must lie in ({lo}, {hi}), got {x!r}")
    return x


@dataclass(frozen=True)
class KernelSpec:
    """Declarative description of one kernel pair.

    Use the constructors :meth:`classical`, :meth:`fractional_rl`,
    :meth:`sum_fractional`, :meth:`ml_weighted` and
    :meth:`distributed_order`, or :meth:`from_dict`.
    """

    variant: str
    alpha: Optional[float] = None
    beta: Optional[float] = None
    omega: Optional[float] = None
    n: Optional[int] = None

    def __post_init__(self):
        v = self.variant
        if v not in VARIANTS:
            raise ValueError(f"unknown kernel variant {v!r}; expected one of {VARIANTS}")
        set_ = lambda k, x: object.__setattr__(self, k, x)
        if v == "FractionalRL":
            set_("alpha", _check_unit("alpha", self.alpha))
        elif v in ("SumFractional", "MLWeighted"):
            a = _check_unit("alpha", self.alpha)
            b = _check_unit("beta", self.beta)
            if not a < b:
                raise ValueError(f"need alpha < beta, got alpha={a}, beta={b}")
            set_("alpha", a)
            set_("beta", b)
            if v == "MLWeighted":
                w = float(self.omega) if self.omega is not None else np.nan
                if not (np.isfinite(w) and w > 0):
                    raise ValueError(f"omega must be positive, got {self.omega!r}")
                set_("omega", w)
        elif v == "DistributedOrder":
            n = self.n
            if n is None or int(n) != n or n < 0:
                raise ValueError(f"n must be a nonnegative integer, got {n!r}")
            set_("n", int(n))
        for name, needed in (("alpha", v in ("FractionalRL", "SumFractional", "MLWeighted")),
                             ("beta", v in ("SumFractional", "MLWeighted")),
                             ("omega", v == "MLWeighted"),
                             ("n", v == "DistributedOrder")):
            if not needed and getattr(self, name) is not None:
                raise ValueError(f"{v} takes no parameter {name!r}")

    @classmethod
    def classical(cls):
        return cls("Classical")

    @classmethod
    def fractional_rl(cls, alpha):
        return cls("FractionalRL", alpha=alpha)

    @classmethod
    def sum_fractional(cls, alpha, beta):
        return cls("SumFractional", alpha=alpha, beta=beta)

    @classmethod
    def ml_weighted(cls, alpha, beta, omega):
        return cls("MLWeighted", alpha=alpha, beta=beta, omega=omega)

    @classmethod
    def distributed_order(cls, n):
        return cls("DistributedOrder", n=n)

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        d = dict(d)
        variant = d.pop("variant", None) or d.pop("kind", None)
        if variant is None:
            raise ValueError("kernel description needs a 'variant' field")
        unknown = set(d) - {"alpha", "beta", "omega", "n"}
        if unknown:
            raise ValueError(f"unknown kernel fields: {sorted(unknown)}")
        return cls(variant, **d)

    def to_dict(self) -> dict:
        out = {"variant": self.variant}
        for k in ("alpha", "beta", "omega", "n"):
            if getattr(self, k) is not None:
                out[k] = getattr(self, k)
        return out

    @property
    def is_oracle_only(self) -> bool:
        """Classical pairs have no genuine kernel ``k``."""
        return self.variant == "Classical"

    def __str__(self):
        args = ", ".join(f"{k}={v:g}" for k, v in self.to_dict().items() if k != "variant")
        return f"{self.variant}({args})"


# kernel function objects


class PowerSum:
    """``sum_j c_j g_{b_j}(t)``."""

    def __init__(self, terms):
        self.terms = tuple((float(c), float(b)) for c, b in terms)
        self.power = min(b for _, b in self.terms) - 1.0
        self.singular = self.power < 0.0

    def _eval(self, t, shift):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        pos = t > 0
        lt = np.log(t[pos])
        acc = np.zeros(lt.shape)
        for c, b in self.terms:
            bb = b + shift
            acc += c * np.exp((bb - 1.0) * lt - gammaln(bb))
        out[pos] = acc
        if shift == 0 and np.any(~pos):
            out[~pos] = np.inf if self.singular else sum(
                c for c, b in self.terms if b == 1.0)
        return out

    def value(self, t):
        return self._eval(t, 0)

    def int1(self, t):
        return self._eval(t, 1)

    def int2(self, t):
        return self._eval(t, 2)


class MLKernel:
    """``t**(b-1) E_{a,b}(-omega t**a)`` and its primitives."""

    def __init__(self, a, b, omega=1.0):
        self.a, self.b, self.omega = float(a), float(b), float(omega)
        self.power = self.b - 1.0
        self.singular = self.power < 0.0
        self._p = [MLParams(self.a, self.b + j) for j in range(3)]

    def _eval(self, t, j):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        pos = t > 0
        tt = t[pos]
        out[pos] = tt ** (self.b + j - 1.0) * mittag_leffler(
            self._p[j], -self.omega * tt ** self.a)
        if j == 0 and np.any(~pos):
            out[~pos] = np.inf if self.singular else rgamma(self.b)
        return out

    def value(self, t):
        return self._eval(t, 0)

    def int1(self, t):
        return self._eval(t, 1)

    def int2(self, t):
        return self._eval(t, 2)


class AlphaMixture:
    """``int_0^1 a**n g_a(t) da`` by Gauss-Legendre in ``a``.

    The rule starts with 64 nodes and doubles until the relative change drops
    below ``tol``.
    """

    def __init__(self, n, tol=1e-10, max_nodes=4096):
        self.n = int(n)
        self.tol = tol
        self.max_nodes = max_nodes
        self.power = -1.0
        self.singular = True

    def _eval(self, t, shift):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        pos = t > 0
        lt = np.log(t[pos])[:, None]

        def rule(m):
            x, w = gauss_legendre01(m)
            b = x + shift
            f = np.exp(self.n * np.log(x) + (b - 1.0) * lt - gammaln(b))
            return f @ w

        m = 64
        prev = rule(m)
        while m < self.max_nodes:
            m *= 2
            cur = rule(m)
            err = np.max(np.abs(cur - prev) / np.maximum(np.abs(cur), 1e-300)) if cur.size else 0.0
            prev = cur
            if err < self.tol:
                break
        out[pos] = prev
        if shift == 0 and np.any(~pos):
            out[~pos] = np.inf
        return out

    def value(self, t):
        return self._eval(t, 0)

    def int1(self, t):
        return self._eval(t, 1)

    def int2(self, t):
        return self._eval(t, 2)


class LaplaceInverted:
    """Kernel known only through its Laplace transform ``F``.

    ``F`` must accept complex arguments.  Primitives are inverted from
    ``F / lam`` and ``F / lam**2``.
    """

    def __init__(self, transform, power=0.0, singular=True):
        self.transform = transform
        self.power = power
        self.singular = singular

    def _eval(self, t, j):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        pos = t > 0
        F = self.transform
        out[pos] = _contour.invert(lambda lam: F(lam) / lam ** j, t[pos])
        if j == 0 and np.any(~pos):
            out[~pos] = np.inf
        return out

    def value(self, t):
        return self._eval(t, 0)

    def int1(self, t):
        return self._eval(t, 1)

    def int2(self, t):
        return self._eval(t, 2)


class Tabulated:
    """Cubic-spline tables of ``log f`` against ``log t`` for an expensive kernel.

    Outside ``[t_lo, t_hi]`` the table is continued by the power law matching
    the edge slope.
    """

    def __init__(self, base, t_lo=1e-40, t_hi=1e6, du=0.01):
        self.base = base
        self.power = getattr(base, "power", 0.0)
        self.singular = getattr(base, "singular", False)
        self.t_lo, self.t_hi = float(t_lo), float(t_hi)
        u = np.arange(np.log(t_lo), np.log(t_hi) + du, du)
        t = np.exp(u)
        self._u = u
        self._splines = []
        for f in (base.value, base.int1, base.int2):
            y = f(t)
            if np.any(y <= 0) or not np.all(np.isfinite(y)):
                raise ValueError("tabulated kernels must be positive and finite")
            self._splines.append(CubicSpline(u, np.log(y)))

    def _eval(self, t, j):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        pos = t > 0
        u = np.log(t[pos])
        sp = self._splines[j]
        uc = np.clip(u, self._u[0], self._u[-1])
        y = sp(uc) + sp(uc, 1) * (u - uc)
        out[pos] = np.exp(y)
        if j == 0 and np.any(~pos):
            out[~pos] = np.inf if self.singular else np.exp(sp(self._u[0]))
        return out

    def value(self, t):
        return self._eval(t, 0)

    def int1(self, t):
        return self._eval(t, 1)

    def int2(self, t):
        return self._eval(t, 2)


# Laplace transforms


def _dist_k_hat(n: int, lam):
    """``int_0^1 a**n lam**-a da`` for complex ``lam`` off the negative axis."""
    lam = np.asarray(lam, dtype=complex)
    w = np.log(lam)
    out = np.empty(lam.shape, dtype=complex)
    small = np.abs(w) < 0.5
    big = ~small
    if np.any(big):
        wb = w[big]
        partial = np.zeros(wb.shape, dtype=complex)
        term = np.ones(wb.shape, dtype=complex)
        for m in range(n + 1):
            if m:
                term = term * wb / m
            partial += term
        out[big] = factorial(n) / wb ** (n + 1) * (1.0 - partial / lam[big])
    if np.any(small):
        x, wt = gauss_legendre01(32)
        out[small] = (x ** n * np.exp(-np.outer(w[small], x))) @ wt
    return out


def k_hat(spec: KernelSpec, lam):
    """Laplace transform of ``k``; accepts complex ``lam``."""
    lam = np.asarray(lam)
    v = spec.variant
    if v == "Classical":
        return np.ones(lam.shape, dtype=lam.dtype)
    if v == "FractionalRL":
        return lam ** (spec.alpha - 1.0)
    if v == "SumFractional":
        return lam ** (spec.alpha - 1.0) + lam ** (spec.beta - 1.0)
    if v == "MLWeighted":
        a, b, w = spec.alpha, spec.beta, spec.omega
        return lam ** (a - b) / (lam ** a + w)
    return _dist_k_hat(spec.n, lam)


def ell_hat(spec: KernelSpec, lam):
    """Laplace transform of ``l`` as ``1 / (lam k_hat(lam))``; accepts complex ``lam``."""
    lam = np.asarray(lam)
    v = spec.variant
    if v == "Classical":
        return 1.0 / lam
    if v == "FractionalRL":
        return lam ** (-spec.alpha)
    if v == "SumFractional":
        return 1.0 / (lam ** spec.alpha + lam ** spec.beta)
    if v == "MLWeighted":
        a, b, w = spec.alpha, spec.beta, spec.omega
        return lam ** (b - 1.0) + w * lam ** (b - a - 1.0)
    return 1.0 / (lam * _dist_k_hat(spec.n, lam))


def laplace_ell_hat(spec: KernelSpec, lam):
    """Real Laplace transform ``l_hat(lam)`` for ``lam > 0``."""
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(~(lam_arr > 0)):
        raise ValueError("lam must be positive")
    out = np.real(ell_hat(spec, lam_arr.astype(complex)))
    return float(out) if out.ndim == 0 else out


# pointwise evaluation


def eval_g(beta, t):
    """``g_beta(t) = t**(beta-1) / Gamma(beta)``."""
    beta = float(beta)
    t_arr = np.asarray(t, dtype=float)
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    if np.any(~(t_arr > 0)):
        raise ValueError("t must be positive")
    out = np.exp((beta - 1.0) * np.log(t_arr) - gammaln(beta))
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=64)
def k_function(spec: KernelSpec):
    """Kernel object for ``k``."""
    v = spec.variant
    if v == "Classical":
        raise UnsupportedVariantError("the Classical pair has no pointwise kernel k")
    if v == "FractionalRL":
        return PowerSum([(1.0, 1.0 - spec.alpha)])
    if v == "SumFractional":
        return PowerSum([(1.0, 1.0 - spec.alpha), (1.0, 1.0 - spec.beta)])
    if v == "MLWeighted":
        return MLKernel(spec.alpha, spec.beta, spec.omega)
    return AlphaMixture(spec.n)


def _dist_ell_power(n):
    # l ~ log(1/t)**(n+1) / n! near zero; no algebraic singularity
    return 0.0


@lru_cache(maxsize=64)
def ell_function(spec: KernelSpec, t_max: float = 1e6):
    """Continuous representation of ``l`` used by the solvers.

    Closed forms where they exist; ``SumFractional`` goes through the
    Mittag-Leffler representation and ``DistributedOrder`` through Laplace
    inversion of ``l_hat``.  Both expensive cases are tabulated.
    """
    v = spec.variant
    if v == "Classical":
        return PowerSum([(1.0, 1.0)])
    if v == "FractionalRL":
        return PowerSum([(1.0, spec.alpha)])
    if v == "MLWeighted":
        a, b, w = spec.alpha, spec.beta, spec.omega
        return PowerSum([(1.0, 1.0 - b), (w, 1.0 + a - b)])
    if v == "SumFractional":
        a, b = spec.alpha, spec.beta
        return Tabulated(MLKernel(b - a, b, 1.0), t_hi=max(t_max, 10.0))
    base = LaplaceInverted(lambda lam: ell_hat(spec, lam),
                           power=_dist_ell_power(spec.n))
    return Tabulated(base, t_hi=max(t_max, 10.0))


def eval_k(spec: KernelSpec, t):
    """Pointwise value of ``k`` for ``t > 0``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr > 0)):
        raise ValueError("t must be positive")
    out = k_function(spec).value(t_arr)
    return float(out) if out.ndim == 0 else out


def eval_ell(spec: KernelSpec, t):
    """Pointwise value of ``l`` for ``t > 0``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr > 0)):
        raise ValueError("t must be positive")
    out = ell_function(spec).value(t_arr)
    return float(out) if out.ndim == 0 else out


def k_samples(spec: KernelSpec, grid: TimeGrid) -> SampledFn:
    return SampledFn.from_function(k_function(spec), grid)


def ell_samples(spec: KernelSpec, grid: TimeGrid) -> SampledFn:
    """``l`` on the grid from its continuous representation."""
    return SampledFn.from_function(ell_function(spec, _t_max(grid)), grid)


def _t_max(grid):
    # round up to a power of ten so tables are shared between nearby grids
    return float(10.0 ** np.ceil(np.log10(grid.t_end * 1.01)))


# tables from the first-kind equation


def ell_table(spec: KernelSpec, grid: TimeGrid, tol: float = 1e-6) -> SampledFn:
    """Samples of ``l`` on ``grid``.

    ``FractionalRL`` and ``Classical`` use closed forms.  The other variants
    solve ``k * l = 1`` by product integration (see
    :func:`sonine.volterra.deconvolve_first_kind`); the returned object
    carries the residual.

    Raises
    ------
    DeconvolutionError
        If the relative residual exceeds ``tol``.
    """
    v = spec.variant
    if v in ("Classical", "FractionalRL"):
        out = SampledFn.from_function(ell_function(spec), grid)
        return SampledFn(grid, out.values, singular=out.singular, fn=out.fn,
                         power=out.power, residual=0.0)
    from .volterra import deconvolve_first_kind

    first = None
    if v == "DistributedOrder":
        first = _dist_first_power(spec, grid)
    return deconvolve_first_kind(k_samples(spec, grid), SampledFn.constant(grid),
                                 tol=tol, first_power=first)


def _dist_first_power(spec, grid):
    # l grows like a power of log(1/t) at the origin, which no constant first
    # cell captures.  Use the power law t**p carrying the right mass on the
    # first cell: h l(h) / (1 * l)(h) = p + 1.
    h = np.array([grid.dt])
    f = ell_function(spec, _t_max(grid))
    p = float(h[0] * f.value(h)[0] / f.int1(h)[0]) - 1.0
    return min(max(p, -0.99), 0.0)


def integrated_ell(spec: KernelSpec, grid: TimeGrid, tol: float = 1e-6) -> SampledFn:
    """``(1 * l)(t_i)`` by exact integration of the tabulated representation."""
    table = ell_table(spec, grid, tol=tol)
    out = table.cumulative()
    return SampledFn(grid, out.values, residual=table.residual)
