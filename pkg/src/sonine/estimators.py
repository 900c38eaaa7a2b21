"""scikit-learn style wrapper around :func:`sonine.decay.fit_loglog`."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .decay import fit_loglog

__all__ = ["DecayRateEstimator"]


def _times(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature (time), got shape {X.shape}")
        X = X[:, 0]
    if X.ndim != 1:
        raise ValueError(f"expected 1-d times, got shape {X.shape}")
    return X


class DecayRateEstimator(RegressorMixin, BaseEstimator):
    """Fit ``norm ~ C * t**slope`` (or a log-corrected law) to a decay series.

    Parameters
    ----------
    basis : {"log", "loglog", "corrected"}
        See :func:`sonine.decay.fit_loglog`.
    window : tuple or None
        Fit window ``(t_lo, t_hi)``; ``None`` uses the last decade.
    log_exponent : float
        Log power removed in the ``"corrected"`` basis.

    Attributes
    ----------
    slope_, intercept_, residual_ : float
    fit_ : DecayFit
    """

    def __init__(self, basis="log", window=None, log_exponent=0.0):
        self.basis = basis
        self.window = window
        self.log_exponent = log_exponent

    def fit(self, X, y):
        t = _times(X)
        y = np.asarray(y, dtype=float)
        order = np.argsort(t)
        self.fit_ = fit_loglog(t[order], y[order], self.window, basis=self.basis,
                               log_exponent=self.log_exponent)
        self.slope_ = self.fit_.slope
        self.intercept_ = self.fit_.intercept
        self.residual_ = self.fit_.residual
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        t = _times(X)
        if self.basis == "log":
            x = np.log(t)
            extra = 0.0
        elif self.basis == "loglog":
            x = np.log(np.log(t))
            extra = 0.0
        else:
            x = np.log(t)
            extra = self.log_exponent * np.log(np.log(t))
        return np.exp(self.intercept_ + self.slope_ * x + extra)
