"""Numerical inversion of Laplace transforms along a parabolic contour.

The trapezoidal rule on the parabola ``lam(u) = m * (1 + i u)**2`` converges
geometrically for transforms that are analytic off the closed negative real
axis.  With 32 nodes per half line the error is close to 1e-13 relative to the
size of the transform on the contour; adding nodes makes things worse because
the largest contour weight grows like ``exp(m)``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

N_NODES = 32


def _nodes(n: int = N_NODES):
    h = 3.0 / n
    m = np.pi * n / 12.0
    u = h * np.arange(0, n + 1)
    lam = m * (1.0 + 1j * u) ** 2
    dlam = 2j * m * (1.0 + 1j * u)
    w = np.full(u.shape, h / np.pi)
    w[0] *= 0.5
    return lam, dlam, w


_LAM, _DLAM, _W = _nodes()


def invert(transform: Callable[[np.ndarray], np.ndarray], t, chunk: int = 4096) -> np.ndarray:
    """Evaluate ``f(t)`` from its Laplace transform ``F`` for ``t > 0``.

    ``transform`` must accept a complex array and be conjugate symmetric, so
    only the upper half of the contour is summed.
    """
    t = np.asarray(t, dtype=float)
    flat = t.ravel()
    out = np.empty(flat.shape)
    for start in range(0, flat.size, chunk):
        tt = flat[start:start + chunk, None]
        lam = _LAM[None, :] / tt
        vals = transform(lam) * np.exp(_LAM)[None, :] * (_DLAM[None, :] / tt)
        out[start:start + chunk] = np.imag(vals) @ _W
    return out.reshape(t.shape)
