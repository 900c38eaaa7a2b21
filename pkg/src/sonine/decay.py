"""Decay-rate targets, log-log slope fits and pass/fail verdicts.

Targets are laws of the form ``t**p``, ``log(t)**q`` or ``t**p log(t)**q``.
Most of them are a power of the growth law of ``(1 * l)`` for the kernel at
hand, so the constructors below compose :func:`theoretical_exponent_ell` with
an exponent that depends only on ``rho``, ``d`` and the norm index ``p``.

Target identifiers (``"Theo:Up:L2"`` and so on) are opaque labels used by the
command line and the reports.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, stats

from .grid import TimeGrid
from .kernels import (DeconvolutionError, KernelSpec, UnsupportedVariantError,
                      integrated_ell, k_hat, laplace_ell_hat)

__all__ = [
    "HypothesisError",
    "RateTarget",
    "DecayFit",
    "Verdict",
    "KaramataReport",
    "TARGETS",
    "sigma1",
    "sigma2",
    "theoretical_exponent_ell",
    "k_decay_law",
    "l2_rate_targets",
    "lr_rate_target_homogeneous",
    "gradient_rate_target",
    "forced_rate_target",
    "fit_loglog",
    "fit_for_target",
    "verdict",
    "laplace_check",
    "karamata_check",
]

KINDS = ("power", "log_power", "log_times_power")
MIN_POINTS = 6


class HypothesisError(ValueError):
    """The parameters fall outside the range where a rate is known."""


# Hypotheses shown by ``sonine list-targets``.
TARGETS = {
    "Karamata": "growth of (1*l) from the kernel law; t_end >= 1e3",
    "Laplace:k1": "DistributedOrder only; lam*l_hat(lam)*k_hat(lam) = 1 for lam > 0",
    "Theo:Ex:decay": "forced, u0 = 0, |f|_q <~ g_gamma, 0 < gamma < 1, 1 <= p <= sigma1; "
                     "FractionalRL, SumFractional or MLWeighted",
    "Theo:Ex:decay:2": "forced, u0 = 0, DistributedOrder, |f|_q <~ g_gamma, 0 < gamma < 1",
    "Theo:Ex:decay:3": "forced gradient, u0 = 0, 0 < gamma < 1, 1 <= p <= sigma2; "
                       "FractionalRL, SumFractional or MLWeighted",
    "Theo:Grad:Sol": "homogeneous gradient, rho >= 1, 1 <= p < sigma2",
    "Theo:Low:L2": "homogeneous L2, requires d != 2 rho and mean(u0) != 0",
    "Theo:Lr:Est:u0": "homogeneous Lr, 1 < p < sigma1 (or the sigma1 endpoint case)",
    "Theo:Up:L2": "homogeneous L2, requires d != 2 rho",
}


@dataclass(frozen=True)
class RateTarget:
    """A law ``t**exponent * log(t)**log_exponent`` (or ``log(t)**exponent``).

    ``kind`` is ``"power"`` (``t**exponent``), ``"log_power"``
    (``log(t)**exponent``) or ``"log_times_power"`` (``t**exponent *
    log(t)**log_exponent``).
    """

    kind: str
    exponent: float
    provenance: str
    log_exponent: float = 0.0
    hypothesis: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.provenance:
            raise ValueError("a rate target needs a provenance identifier")
        if not np.isfinite(self.exponent) or not np.isfinite(self.log_exponent):
            raise ValueError("exponents must be finite")
        object.__setattr__(self, "exponent", float(self.exponent))
        object.__setattr__(self, "log_exponent", float(self.log_exponent))

    @property
    def basis(self) -> str:
        """Fit basis that turns this law into a straight line."""
        return {"power": "log", "log_power": "loglog",
                "log_times_power": "corrected"}[self.kind]

    @property
    def value(self) -> float:
        """Slope a fit in :attr:`basis` should reproduce."""
        return self.exponent

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            return t ** self.exponent
        if self.kind == "log_power":
            return np.log(t) ** self.exponent
        return t ** self.exponent * np.log(t) ** self.log_exponent

    def power_of(self, c: float, provenance: str, hypothesis: str = "") -> "RateTarget":
        """The law raised to the power ``c``."""
        return RateTarget(self.kind, c * self.exponent, provenance,
                          log_exponent=c * self.log_exponent, hypothesis=hypothesis)

    def describe(self) -> str:
        if self.kind == "power":
            return f"t^{self.exponent:.6g}"
        if self.kind == "log_power":
            return f"log(t)^{self.exponent:.6g}"
        return f"t^{self.exponent:.6g} log(t)^{self.log_exponent:.6g}"


def sigma1(rho: float, d: int) -> float:
    """``d / (d - rho)`` if ``d > rho``, else ``inf``."""
    return d / (d - rho) if d > rho else np.inf


def sigma2(rho: float, d: int) -> float:
    """``d / (d - rho + 1)`` if ``d > rho - 1``, else ``inf``."""
    return d / (d - rho + 1.0) if d > rho - 1.0 else np.inf


def _check_rho_d(rho, d):
    if not (np.isfinite(rho) and rho > 0):
        raise ValueError(f"rho must be positive, got {rho!r}")
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d!r}")


def theoretical_exponent_ell(spec: KernelSpec) -> RateTarget:
    """Large-time growth law of ``(1 * l)``."""
    v = spec.variant
    if v == "Classical":
        return RateTarget("power", 1.0, "Karamata")
    if v in ("FractionalRL", "SumFractional"):
        return RateTarget("power", spec.alpha, "Karamata")
    if v == "MLWeighted":
        return RateTarget("power", 1.0 + spec.alpha - spec.beta, "Karamata")
    return RateTarget("log_power", 1.0, "Karamata")


def k_decay_law(spec: KernelSpec) -> RateTarget:
    """Large-time law of ``k`` itself."""
    v = spec.variant
    if v == "Classical":
        raise UnsupportedVariantError("the Classical pair has no kernel k")
    if v in ("FractionalRL", "SumFractional"):
        return RateTarget("power", -spec.alpha, "Theo:Low:L2")
    if v == "MLWeighted":
        return RateTarget("power", spec.beta - spec.alpha - 1.0, "Theo:Low:L2")
    return RateTarget("log_power", -1.0, "Theo:Low:L2")


def l2_rate_targets(spec: KernelSpec, rho: float, d: int):
    """Upper and lower L2 decay laws for the homogeneous problem.

    Returns
    -------
    upper, lower : RateTarget
    optimal : bool
        Whether the two laws coincide, so that the rate is sharp.
    """
    _check_rho_d(rho, d)
    if np.isclose(d, 2.0 * rho, rtol=0, atol=1e-12):
        raise HypothesisError("no L2 rate is known for d = 2 rho")
    c = min(1.0, d / (2.0 * rho))
    hyp = TARGETS["Theo:Up:L2"]
    upper = theoretical_exponent_ell(spec).power_of(-c, "Theo:Up:L2", hyp)
    if spec.variant == "Classical":
        return upper, None, False
    lower = k_decay_law(spec).power_of(c, "Theo:Low:L2", TARGETS["Theo:Low:L2"])
    optimal = (upper.kind == lower.kind
               and np.isclose(upper.exponent, lower.exponent, rtol=0, atol=1e-12))
    return upper, lower, bool(optimal)


def lr_rate_target_homogeneous(spec: KernelSpec, rho: float, d: int, p: float,
                               endpoint: bool = False) -> RateTarget:
    """Lr decay law with data in Lp; ``endpoint`` selects the ``sigma1`` case."""
    _check_rho_d(rho, d)
    hyp = TARGETS["Theo:Lr:Est:u0"]
    if endpoint:
        if not d > rho:
            raise HypothesisError("the endpoint case needs d > rho")
        c = 1.0
    else:
        if not 1.0 < p < sigma1(rho, d):
            raise HypothesisError(f"need 1 < p < sigma1 = {sigma1(rho, d):g}, got p={p}")
        c = (d / rho) * (1.0 - 1.0 / p)
    return theoretical_exponent_ell(spec).power_of(-c, "Theo:Lr:Est:u0", hyp)


def gradient_rate_target(spec: KernelSpec, rho: float, d: int, p: float = 1.0) -> RateTarget:
    """Decay law of the gradient with data in Lp; ``p = 1`` is the L1 case."""
    _check_rho_d(rho, d)
    if rho < 1.0:
        raise HypothesisError(f"gradient estimates need rho >= 1, got {rho}")
    if not 1.0 <= p < sigma2(rho, d):
        raise HypothesisError(f"need 1 <= p < sigma2 = {sigma2(rho, d):g}, got p={p}")
    c = 1.0 / rho + (d / rho) * (1.0 - 1.0 / p)
    return theoretical_exponent_ell(spec).power_of(-c, "Theo:Grad:Sol",
                                                   TARGETS["Theo:Grad:Sol"])


def forced_rate_target(spec: KernelSpec, rho: float, d: int, p: float, gamma: float,
                       gradient: bool = False) -> RateTarget:
    """Decay law for zero data and forcing bounded by ``g_gamma(t)``."""
    _check_rho_d(rho, d)
    if not 0.0 < gamma < 1.0:
        raise HypothesisError(f"gamma must lie in (0, 1), got {gamma}")
    v = spec.variant
    if v == "DistributedOrder":
        if gradient:
            raise HypothesisError("no gradient rate is known for DistributedOrder")
        return RateTarget("log_times_power", gamma - 1.0, "Theo:Ex:decay:2",
                          log_exponent=1.0, hypothesis=TARGETS["Theo:Ex:decay:2"])
    if v == "Classical":
        raise UnsupportedVariantError("forced rates are stated for fractional kernels only")
    bound = sigma2(rho, d) if gradient else sigma1(rho, d)
    if not 1.0 <= p <= bound or not np.isfinite(p):
        raise HypothesisError(f"need 1 <= p <= {bound:g}, got p={p}")
    delta = (d / rho) * (1.0 - 1.0 / p)
    g = 1.0 / rho if gradient else 0.0
    if v in ("FractionalRL", "SumFractional"):
        a = spec.alpha
        exponent = gamma - 1.0 + a - a * g - a * delta
    else:
        exponent = gamma - 1.0 + (spec.beta - spec.alpha - 1.0) * (1.0 - g - delta)
    tid = "Theo:Ex:decay:3" if gradient else "Theo:Ex:decay"
    return RateTarget("power", exponent, tid, hypothesis=TARGETS[tid])


# fitting


@dataclass(frozen=True, eq=False)
class DecayFit:
    """Least-squares line through a norm series in a chosen basis.

    ``basis`` is ``"log"`` (log norm against log t), ``"loglog"`` (log norm
    against log log t) or ``"corrected"`` (log norm minus
    ``log_exponent * log log t`` against log t).  ``residual`` is the largest
    absolute deviation of the transformed data from the line.
    """

    times: np.ndarray
    norms: np.ndarray
    window: tuple
    slope: float
    intercept: float
    residual: float
    basis: str = "log"
    log_exponent: float = 0.0

    @property
    def n_points(self) -> int:
        return int(self.times.size)


def fit_loglog(times, norms, window=None, basis: str = "log",
               log_exponent: float = 0.0) -> DecayFit:
    """Fit a straight line to the decay series over ``window``.

    Parameters
    ----------
    times, norms : array_like
        Checkpoint times (strictly increasing) and positive norm values.
    window : (t_lo, t_hi), optional
        Inclusive fit window; defaults to the last decade of ``times``.
    basis : {"log", "loglog", "corrected"}
    log_exponent : float
        Power of ``log t`` removed before fitting in the ``"corrected"`` basis.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("times and norms must be 1-d arrays of equal length")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    if window is None:
        window = (t[-1] / 10.0, t[-1])
    lo, hi = float(window[0]), float(window[1])
    sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    t, y = t[sel], y[sel]
    if t.size < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} checkpoints in [{lo:g}, {hi:g}], "
                         f"found {t.size}")
    if np.any(~(y > 0)) or np.any(~np.isfinite(y)):
        raise ValueError("norms must be positive and finite")
    if basis in ("loglog", "corrected") and t[0] <= 1.0:
        raise ValueError("log bases need t > 1 throughout the window")
    ly = np.log(y)
    if basis == "log":
        x = np.log(t)
    elif basis == "loglog":
        x = np.log(np.log(t))
    elif basis == "corrected":
        x = np.log(t)
        ly = ly - log_exponent * np.log(np.log(t))
    else:
        raise ValueError(f"unknown basis {basis!r}")
    res = stats.linregress(x, ly)
    resid = float(np.max(np.abs(ly - (res.intercept + res.slope * x))))
    if not np.isfinite(res.slope):
        raise ValueError("fitted slope is not finite")
    return DecayFit(t, y, (lo, hi), float(res.slope), float(res.intercept), resid,
                    basis, float(log_exponent))


def fit_for_target(times, norms, target: RateTarget, window=None) -> DecayFit:
    """:func:`fit_loglog` in the basis matching ``target``."""
    return fit_loglog(times, norms, window, basis=target.basis,
                      log_exponent=target.log_exponent)


@dataclass
class Verdict:
    scenario: str
    target_id: str
    law_kind: str
    target_value: float
    fitted_value: Optional[float]
    tolerance: float
    passed: bool
    residual: Optional[float] = None
    mode: str = "match"
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


OPTIMAL_BAND = 0.08


def verdict(scenario: str, target: RateTarget, fitted: float, tolerance: float,
            mode: str = "match", residual: Optional[float] = None,
            note: str = "", optimal: bool = False) -> Verdict:
    """Compare a fitted slope with a target slope.

    ``mode="match"`` requires ``|fitted - target| <= tolerance``;
    ``mode="upper"`` only requires ``fitted <= target + tolerance``;
    ``mode="faster"`` requires ``fitted < target - tolerance``;
    ``mode="bound"`` reads the target as an upper estimate: ``upper``, plus
    ``|fitted - target| <= OPTIMAL_BAND`` when ``optimal`` says the rate is sharp.
    """
    tv = target.value
    if fitted is None or not np.isfinite(fitted):
        ok = False
    elif mode == "match":
        ok = abs(fitted - tv) <= tolerance
    elif mode == "upper":
        ok = fitted <= tv + tolerance
    elif mode == "faster":
        ok = fitted < tv - tolerance
    elif mode == "bound":
        ok = fitted <= tv + tolerance and (not optimal or abs(fitted - tv) <= OPTIMAL_BAND)
    else:
        raise ValueError(f"unknown verdict mode {mode!r}")
    return Verdict(scenario, target.provenance, target.kind, tv,
                   None if fitted is None else float(fitted), float(tolerance),
                   bool(ok), residual, mode, note)


# Karamata checks


def _k_hat_quad(n: int, lam: float) -> float:
    val, _ = integrate.quad(lambda a: a ** n * lam ** (-a), 0.0, 1.0,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def laplace_check(spec: KernelSpec, lams=(1e-3, 1e-2, 1e-1)) -> dict:
    """Deviation of ``lam * l_hat(lam) * k_hat(lam)`` from one.

    ``k_hat`` is recomputed by adaptive quadrature of its defining integral,
    so the check is independent of the closed form used elsewhere.  For the
    DistributedOrder family ``l_hat`` is also compared with
    ``log(lam)**(n+1) / (n! (lam - sum_m log(lam)**m / m!))``.
    """
    lams = np.asarray(lams, dtype=float)
    lh = np.asarray(laplace_ell_hat(spec, lams))
    if spec.variant == "DistributedOrder":
        n = spec.n
        kq = np.array([_k_hat_quad(n, float(x)) for x in lams])
        w = np.log(lams)
        fact = np.cumprod(np.r_[1.0, np.arange(1, n + 1)])
        series = sum(w ** m / fact[m] for m in range(n + 1))
        closed = w ** (n + 1) / (fact[n] * (lams - series))
        closed_err = np.abs(lh / closed - 1.0)
    else:
        kq = np.real(k_hat(spec, lams.astype(complex)))
        closed_err = np.zeros(lams.size)
    err = np.abs(lams * lh * kq - 1.0)
    return {"lambda": lams.tolist(), "error": err.tolist(),
            "closed_form_error": closed_err.tolist(),
            "max_error": float(max(err.max(), closed_err.max()))}


@dataclass
class KaramataReport:
    spec: KernelSpec
    target: RateTarget
    fit: Optional[DecayFit]
    tolerance: float
    passed: Optional[bool]
    deconvolution_residual: Optional[float] = None
    laplace: Optional[dict] = None
    note: str = ""
    values: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def inconclusive(self) -> bool:
        return self.passed is None


def karamata_check(spec: KernelSpec, grid: TimeGrid, window=None,
                   tolerance: float = 0.05, laplace_tol: float = 1e-8,
                   table_tol: float = 1e-6) -> KaramataReport:
    """Compare the computed ``(1 * l)`` with its theoretical growth law.

    The slope is fitted over ``window`` (default: the last decade of the
    grid) in the basis of the growth law.  A deconvolution failure makes the
    verdict inconclusive (``passed is None``).  For DistributedOrder the
    Laplace-domain check of :func:`laplace_check` must also pass.
    """
    target = theoretical_exponent_ell(spec)
    if grid.t_end < 1e3:
        raise ValueError("Karamata checks need t_end >= 1e3")
    lap = laplace_check(spec) if spec.variant == "DistributedOrder" else None
    try:
        cum = integrated_ell(spec, grid, tol=table_tol)
    except DeconvolutionError as exc:
        return KaramataReport(spec, target, None, tolerance, None,
                              deconvolution_residual=exc.residual, laplace=lap,
                              note=f"inconclusive: {exc}")
    t = grid.nodes[1:]
    fit = fit_for_target(t, cum.values[1:], target, window)
    ok = abs(fit.slope - target.value) <= tolerance
    if lap is not None:
        ok = ok and lap["max_error"] <= laplace_tol
    return KaramataReport(spec, target, fit, tolerance, bool(ok),
                          deconvolution_residual=cum.residual, laplace=lap,
                          values=cum.values)
