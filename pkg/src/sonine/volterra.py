"""Scalar Volterra equations for the relaxation functions.

For ``mu >= 0`` the relaxation functions solve

    s + mu (l * s) = 1,        r + mu (l * r) = l,

and are returned on the nodes of a uniform :class:`TimeGrid`.  Internally
the equations are solved on a graded mesh that contains every uniform node:
near ``t = 0`` the cells shrink geometrically, and the first few uniform
cells are subdivided so that the local relative step stays below ``eps``.
Cells next to the lag singularity integrate ``l`` exactly against the linear
interpolant of the unknown through the primitives ``1 * l`` and ``1 * 1 * l``
(product trapezoid rule).  Cells far from it use a Gauss rule on the
power-law interpolant, which is exact for the ``t**p`` behaviour of the
solutions near the origin.  Once the mesh becomes uniform the weights depend
only on the lag and the history sums are done blockwise as matrix products.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import exprel

from .grid import SampledFn, TimeGrid, gauss_legendre01
from .kernels import DeconvolutionError, KernelSpec, ell_function, k_function

__all__ = [
    "TimeGrid", "SampledFn", "RelaxationTable", "GradedMesh", "graded_mesh",
    "convolve", "solve_relaxation_s", "solve_relaxation_r",
    "build_relaxation_table", "deconvolve_first_kind", "solve_second_kind",
    "default_grading", "solve_with_rhs", "MeshFunction",
]

FAR_RATIO = 16.0
_GL4 = gauss_legendre01(4)
_THETA_START = 1e-14
LINEAR_TAIL = 4.0


def default_grading(n_steps: int) -> float:
    """Relative mesh step used when none is given.

    Tied to ``n_steps`` so that refining the public grid also refines the
    internal grading near the origin.
    """
    return min(0.05, 2.0 / np.sqrt(n_steps))


@dataclass(frozen=True, eq=False)
class GradedMesh:
    tau: np.ndarray          # all mesh points, tau[0] = 0
    node_index: np.ndarray   # positions of the uniform nodes inside tau
    head: int                # index in tau where uniform spacing starts
    h: float


def graded_mesh(grid: TimeGrid, ell, mu_max: float, eps: Optional[float] = None) -> GradedMesh:
    """Mesh refined where ``mu_max * (1 * l)(t)`` is of order one or larger."""
    if eps is None:
        eps = default_grading(grid.n_steps)
    h, N = grid.dt, grid.n_steps
    mu_max = float(mu_max)

    def delta(t):
        theta = mu_max * ell.int1(np.atleast_1d(t))
        with np.errstate(divide="ignore"):
            d = eps * np.maximum(1.0, theta ** -0.5)
        return np.minimum(d, 1.0)

    # geometric cells inside [0, h]
    if mu_max > 0:
        lo, hi = -700.0, np.log(h)
        if mu_max * ell.int1(np.array([h]))[0] <= _THETA_START:
            t_min = 0.5 * h
        else:
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mu_max * ell.int1(np.array([np.exp(mid)]))[0] > _THETA_START:
                    hi = mid
                else:
                    lo = mid
            t_min = min(np.exp(lo), 0.5 * h)
    else:
        t_min = 0.5 * h
    g = [t_min]
    while True:
        d = float(delta(g[-1])[0])
        nxt = g[-1] * (1.0 + d)
        if nxt >= h * (1.0 - 0.5 * d):
            break
        g.append(nxt)
    pts = [np.array([0.0]), np.array(g), np.array([h])]

    # subdivided uniform cells
    j = np.arange(2, N + 1)
    a = (j - 1) * h
    p = np.ceil(h / (delta(a) * a)).astype(int)
    p = np.maximum(p, 1)
    last_refined = np.nonzero(p > 1)[0]
    n_ref = int(last_refined[-1]) + 1 if last_refined.size else 0
    # uniform node index where the Toeplitz tail starts; before it the cells
    # are still coarse relative to t and keep the power-law treatment
    tail_start = min(max(n_ref + 1, int(np.ceil(LINEAR_TAIL / eps))), N)
    node_index = np.empty(N + 1, dtype=int)
    node_index[0] = 0
    node_index[1] = len(g) + 1
    off = node_index[1]
    for k in range(tail_start - 1):
        pts.append(a[k] + h * np.arange(1, p[k] + 1) / p[k])
        off += p[k]
        node_index[k + 2] = off
    tau_head = np.concatenate(pts)
    tail = h * np.arange(tail_start + 1, N + 1)
    tau = np.concatenate([tau_head, tail])
    head = tau_head.size - 1
    node_index[tail_start:] = head + np.arange(N + 1 - tail_start)
    return GradedMesh(tau, node_index, head, h)


def _cell_weights(ell, lo, hi, d=None):
    """Product-trapezoid weights of ``int_lo^hi l(x) y dx`` for ``y`` linear in ``t - x``.

    Returns ``(wa, wb)``: coefficients of ``y`` at the cell end with lag ``hi``
    and at the end with lag ``lo``.  Far cells (``lo >= 16 (hi - lo)``) use a
    four-point Gauss rule, which avoids cancellation between primitives.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = hi - lo if d is None else np.asarray(d, dtype=float)
    wa = np.empty(lo.shape)
    wb = np.empty(lo.shape)
    far = lo >= FAR_RATIO * d
    near = ~far
    if np.any(near):
        l_, h_, d_ = lo[near], hi[near], d[near]
        a2 = (ell.int2(h_) - ell.int2(l_)) / d_
        wa[near] = ell.int1(h_) - a2
        wb[near] = a2 - ell.int1(l_)
    if np.any(far):
        x, w = _GL4
        l_, d_ = lo[far], d[far]
        vals = ell.value(l_[:, None] + d_[:, None] * x[None, :])
        wa[far] = d_ * (vals @ (w * x))
        wb[far] = d_ * (vals @ (w * (1.0 - x)))
    return wa, wb


def _cell_rows(ell, lo, hi, d):
    """Weights for a block of cells.

    Near cells get product-trapezoid weights ``(wa, wb)``.  Every cell also
    gets Gauss weights ``G[..., q] = d w_q l(lo + d x_q)``; on far cells they
    act on the power-law interpolant of the unknown, on near cells on the
    difference between the power-law and the linear interpolant.  ``far`` is
    returned so callers can tell the two apart.  Cell widths ``d`` are passed
    separately because ``hi - lo`` loses tiny cells to rounding.
    """
    far = lo >= FAR_RATIO * d
    wa = np.zeros(lo.shape)
    wb = np.zeros(lo.shape)
    near = ~far
    if np.any(near):
        wa[near], wb[near] = _cell_weights(ell, lo[near], hi[near], d[near])
    x, w = _GL4
    pos = lo > 0
    G = np.zeros(lo.shape + (x.size,))
    if np.any(pos):
        l_, d_ = lo[pos], d[pos]
        G[pos] = d_[:, None] * w[None, :] * ell.value(l_[:, None] + d_[:, None] * x[None, :])
    return wa, wb, G, far


def _cell_interpolant(tau, y, m):
    """Power-law interpolant of ``y`` at the Gauss points of cells ``m``.

    The points sit at ``tau[m+1] - d x_q``, matching :func:`_cell_rows`.
    Returns the interpolant and its excess over the linear interpolant; cells
    whose end values differ in sign are linear (zero excess).
    """
    x, _ = _GL4
    u = 1.0 - x
    ya, yb = y[m], y[m + 1]
    ta, tb = tau[m], tau[m + 1]
    ratio = 1.0 + (tb / ta - 1.0)[:, None] * u[None, :]           # (c, q)
    lin = ya[:, None, :] + (yb - ya)[:, None, :] * u[None, :, None]
    ok = ya * yb > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.log(np.where(ok, yb / np.where(ok, ya, 1.0), 1.0)) / np.log(tb / ta)[:, None]
        pw = ya[:, None, :] * ratio[:, :, None] ** p[:, None, :]
    pw = np.where(ok[:, None, :], pw, lin)
    return pw, pw - lin


def _first_cell_coupling(ell, tau, rows, i1f, f1):
    """Approximate ``int_0^tau1 l(t_i - x) F(x) dx / F(tau1)``.

    These terms are scaled by ``mu (1 * l)(tau1)``, which the mesh keeps below
    1e-14, so a one-point rule suffices.
    """
    t1 = tau[1]
    ti = tau[rows]
    lv = ell.value(np.maximum(ti - 0.5 * t1, 0.5 * t1))
    lv = np.where(rows == 1, ell.int1(np.array([t1]))[0] / t1, lv)
    return lv[:, None] * (i1f / f1)[None, :]


def solve_second_kind(ell, mesh: GradedMesh, mus, F, f_power: float = 0.0,
                      block: int = 128):
    """Solve ``y + mu (l * y) = F`` on a graded mesh for every ``mu``.

    On ``[0, tau_1]`` the solution is taken proportional to ``F``.  Cells
    adjacent to the lag singularity use the product trapezoid rule; far cells
    in the graded head integrate a power-law interpolant of the (already known)
    solution, which is exact for the ``t**p`` behaviour near the origin.  On the
    uniform tail the weights are Toeplitz.

    Parameters
    ----------
    ell : kernel object
        Provides ``value``, ``int1`` and ``int2``.
    mesh : GradedMesh
    mus : array_like, shape (m,)
    F : ndarray, shape (n+1,) or (n+1, m)
        Right-hand side at the mesh points; ``F[0]`` is not used.
    f_power : float
        Leading exponent of ``F`` at zero, for the first cell.

    Returns
    -------
    ndarray, shape (n+1, m)
        ``y[0]`` holds ``F[0]`` (the value as ``t -> 0``).
    """
    mus = np.atleast_1d(np.asarray(mus, dtype=float))
    tau = mesh.tau
    n = tau.size - 1
    m = mus.size
    F = np.asarray(F, dtype=float)
    Fm = F if F.ndim == 2 else F[:, None] * np.ones((1, m))
    y = np.zeros((n + 1, m))
    y[0] = Fm[0]
    f1 = Fm[1]
    f1_safe = np.where(f1 == 0.0, 1.0, f1)
    i1f = f1 * tau[1] / (1.0 + f_power)
    nq = _GL4[0].size
    dtau = np.diff(tau)

    H = mesh.head
    Yq = np.zeros((H, nq, m))   # power-law interpolant on head cells 1..H-1
    Yd = np.zeros((H, nq, m))   # its excess over the linear interpolant
    c1 = _first_cell_coupling(ell, tau, np.array([1]), i1f, f1_safe)[0]
    y[1] = Fm[1] / (1.0 + mus * c1)

    def history(rows, n_cells):
        """Contribution of head cells ``1..n_cells`` (all known) to ``rows``."""
        ti = tau[rows][:, None]
        lo = ti - tau[None, 2:n_cells + 2]
        hi = ti - tau[None, 1:n_cells + 1]
        wa, wb, G, far = _cell_rows(ell, lo, hi,
                                    np.broadcast_to(dtau[1:n_cells + 1], lo.shape))
        coef = np.zeros((rows.size, n_cells + 2))
        coef[:, 1:n_cells + 1] += wa
        coef[:, 2:n_cells + 2] += wb
        acc = coef[:, 1:] @ y[1:n_cells + 2]
        acc += G.reshape(rows.size, -1) @ Yq[1:n_cells + 1].reshape(-1, m)
        near = ~far
        cols = np.nonzero(np.any(near, axis=0))[0]
        if cols.size:
            Gn = G[:, cols] * near[:, cols, None]
            D = Yd[1 + cols] - Yq[1 + cols]
            acc += Gn.reshape(rows.size, -1) @ D.reshape(-1, m)
        return acc

    for b0 in range(2, H + 1, block):
        b1 = min(b0 + block, H + 1)
        rows = np.arange(b0, b1)
        nh = b0 - 2
        hist = history(rows, nh) if nh >= 1 else np.zeros((rows.size, m))
        for r, i in enumerate(rows):
            c1 = _first_cell_coupling(ell, tau, np.array([i]), i1f, f1_safe)[0]
            # cells nh+1 .. i-1; the last one holds the new value
            lo = tau[i] - tau[nh + 2:i + 1]
            hi = tau[i] - tau[nh + 1:i]
            wa, wb, G, far = _cell_rows(ell, lo, hi, dtau[nh + 1:i])
            coef = np.zeros(i - nh)
            coef[:-1] += wa
            coef[1:] += wb
            acc = hist[r] + coef[:-1] @ y[nh + 1:i] + c1 * y[1]
            if i - nh > 2:
                Yuse = np.where(far[:-1, None, None], Yq[nh + 1:i - 1], Yd[nh + 1:i - 1])
                acc = acc + G[:-1].reshape(-1) @ Yuse.reshape(-1, m)
            y[i] = (Fm[i] - mus * acc) / (1.0 + mus * coef[-1])
            pw, ex = _cell_interpolant(tau, y, np.array([i - 1]))
            Yq[i - 1], Yd[i - 1] = pw[0], ex[0]
    if H == n:
        return y

    # contribution of the head cells to each tail row
    rows = np.arange(H + 1, n + 1)
    head_acc = np.empty((rows.size, m))
    for s in range(0, rows.size, block):
        rr = rows[s:s + block]
        c1 = _first_cell_coupling(ell, tau, rr, i1f, f1_safe)
        head_acc[s:s + block] = history(rr, H - 1) + c1 * y[1]

    # Toeplitz weights on the uniform tail
    h = mesh.h
    n_tail = n - H
    k = np.arange(1, n_tail + 2)
    WA, WB = _cell_weights(ell, (k - 1) * h, k * h)
    WA = np.concatenate([[0.0], WA])
    WB = np.concatenate([[0.0], WB])
    cc = WA[1:n_tail + 1] + WB[2:n_tail + 2]   # cc[k-1] multiplies y_{i-k}
    yt = y[H:]
    denom = 1.0 + mus * WB[1]
    for b0 in range(1, n_tail + 1, block):
        b1 = min(b0 + block, n_tail + 1)
        kk = np.arange(b0, b1)
        acc_blk = head_acc[kk - 1] + WA[kk][:, None] * yt[0]
        if b0 > 1:
            # history from earlier blocks in one matrix product
            j = np.arange(1, b0)
            acc_blk += cc[kk[:, None] - j[None, :] - 1] @ yt[1:b0]
        for r, k_ in enumerate(kk):
            acc = acc_blk[r]
            if k_ > b0:
                acc = acc + cc[k_ - b0 - 1::-1][:k_ - b0] @ yt[b0:k_]
            yt[k_] = (Fm[H + k_] - mus * acc) / denom
    return y


def _mesh_cumulative(tau, y, first_integral):
    """Running integral of nodal values with power-law cells where possible."""
    y = np.asarray(y, dtype=float)
    a, b = y[1:-1], y[2:]
    ta, tb = tau[1:-1], tau[2:]
    tshape = (slice(None),) + (None,) * (y.ndim - 1)
    ta_, tb_ = ta[tshape], tb[tshape]
    lin = 0.5 * (tb_ - ta_) * (a + b)
    ok = (a > 0) & (b > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = np.log(tb_ / ta_)
        p = np.log(np.where(ok, b, 1.0) / np.where(ok, a, 1.0)) / logr
        pw = a * ta_ * logr * exprel((p + 1.0) * logr)
    cells = np.where(ok & np.isfinite(pw), pw, lin)
    out = np.zeros(y.shape)
    out[1] = first_integral
    out[2:] = first_integral + np.cumsum(cells, axis=0)
    return out


class MeshFunction:
    """Continuous interpolant of a solution on a :class:`GradedMesh`.

    Cells are power laws where both end values are positive and linear
    otherwise.  On the first cell the function is ``scale * base`` when a
    ``base`` kernel is given (used for ``r``, which inherits the singularity
    of ``l``), and linear otherwise.
    """

    def __init__(self, tau, y, base=None, scale=None):
        self.tau = np.asarray(tau, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.base = base
        self.scale = scale
        self.singular = bool(base is not None and base.singular)
        self.power = float(base.power) if self.singular else 0.0
        first = scale * base.int1(self.tau[1:2])[0] if base is not None else \
            0.5 * self.tau[1] * (self.y[0] + self.y[1])
        self._cum = _mesh_cumulative(self.tau, self.y, first)
        a, b = self.y[1:-1], self.y[2:]
        ok = (a > 0) & (b > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            self._p = np.where(ok, np.log(np.where(ok, b / np.where(ok, a, 1.0), 1.0))
                               / np.log(self.tau[2:] / self.tau[1:-1]), np.nan)

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        j = np.clip(np.searchsorted(self.tau, t, side="right") - 1, 0, self.tau.size - 2)
        return t, j

    def value(self, t):
        t, j = self._locate(t)
        out = np.empty(t.shape)
        first = j == 0
        if np.any(first):
            tt = t[first]
            if self.base is not None:
                out[first] = self.scale * self.base.value(tt)
            else:
                out[first] = self.y[0] + (self.y[1] - self.y[0]) * tt / self.tau[1]
        rest = ~first
        if np.any(rest):
            jj, tt = j[rest], t[rest]
            ta, tb = self.tau[jj], self.tau[jj + 1]
            ya, yb = self.y[jj], self.y[jj + 1]
            p = self._p[jj - 1]
            lin = ya + (yb - ya) * (tt - ta) / (tb - ta)
            with np.errstate(invalid="ignore", divide="ignore"):
                pw = ya * (tt / ta) ** p
            out[rest] = np.where(np.isnan(p), lin, pw)
        return out

    def int1(self, t):
        t, j = self._locate(t)
        out = np.empty(t.shape)
        first = j == 0
        if np.any(first):
            tt = t[first]
            if self.base is not None:
                out[first] = self.scale * self.base.int1(tt)
            else:
                y0, y1 = self.y[0], self.y[1]
                out[first] = y0 * tt + 0.5 * (y1 - y0) * tt ** 2 / self.tau[1]
        rest = ~first
        if np.any(rest):
            jj, tt = j[rest], t[rest]
            ta, tb = self.tau[jj], self.tau[jj + 1]
            ya, yb = self.y[jj], self.y[jj + 1]
            p = self._p[jj - 1]
            x = tt - ta
            lin = ya * x + 0.5 * (yb - ya) * x ** 2 / (tb - ta)
            with np.errstate(invalid="ignore", divide="ignore"):
                logr = np.log(tt / ta)
                pw = ya * ta * logr * exprel((p + 1.0) * logr)
            out[rest] = self._cum[jj] + np.where(np.isnan(p), lin, pw)
        return out


@dataclass(frozen=True, eq=False)
class RelaxationTable:
    """``s(t_i, mu_j)`` and ``r(t_i, mu_j)`` on a uniform grid.

    ``r_int1`` and ``r_int2`` hold ``1 * r`` and ``1 * 1 * r``; ``r_values[0]``
    is ``inf`` when ``l`` is singular at the origin.
    """

    spec: KernelSpec
    grid: TimeGrid
    mus: np.ndarray
    s_values: np.ndarray
    r_values: np.ndarray
    r_int1: Optional[np.ndarray] = None
    r_int2: Optional[np.ndarray] = None
    r_singular: bool = False
    meta: dict = field(default_factory=dict)
    s_functions: Optional[dict] = None
    r_functions: Optional[dict] = None

    def column(self, mu) -> int:
        idx = np.nonzero(self.mus == mu)[0]
        if idx.size == 0:
            raise KeyError(f"mu={mu} not in table")
        return int(idx[0])

    def s(self, mu) -> SampledFn:
        """Column of ``s``; carries the mesh interpolant when one was kept."""
        j = self.column(mu)
        fn = self.s_functions.get(float(self.mus[j])) if self.s_functions else None
        return SampledFn(self.grid, self.s_values[:, j], fn=fn, power=0.0)

    def r(self, mu) -> SampledFn:
        j = self.column(mu)
        power = self.meta.get("r_power")
        fn = self.r_functions.get(float(self.mus[j])) if self.r_functions else None
        return SampledFn(self.grid, self.r_values[:, j], singular=self.r_singular,
                         fn=fn, power=power)


def _solve_block(spec, mus, grid, eps, want_r, keep_mesh=False):
    ell = ell_function(spec, _t_max(grid))
    mus = np.asarray(mus, dtype=float)
    N = grid.n_steps
    t = grid.nodes
    m = mus.size
    s = np.ones((N + 1, m))
    r = np.empty((N + 1, m))
    ri1 = np.zeros((N + 1, m))
    ri2 = np.zeros((N + 1, m))
    ell_nodes = np.empty(N + 1)
    ell_nodes[1:] = ell.value(t[1:])
    ell_nodes[0] = np.inf if ell.singular else ell.value(np.array([0.0]))[0]
    r[:] = ell_nodes[:, None]
    ri1[1:] = ell.int1(t[1:])[:, None]
    ri2[1:] = ell.int2(t[1:])[:, None]
    fs, fr = {}, {}
    live = mus > 0
    if np.any(live):
        mu_l = mus[live]
        mesh = graded_mesh(grid, ell, mu_l.max(), eps)
        tau = mesh.tau
        ys = solve_second_kind(ell, mesh, mu_l, np.ones(tau.size), 0.0)
        s[:, live] = ys[mesh.node_index]
        if keep_mesh:
            fs = {float(m): MeshFunction(tau, ys[:, c]) for c, m in enumerate(mu_l)}
        if want_r:
            Fl = np.empty(tau.size)
            Fl[1:] = ell.value(tau[1:])
            Fl[0] = ell_nodes[0]
            yr = solve_second_kind(ell, mesh, mu_l, Fl, ell.power if ell.singular else 0.0)
            r[:, live] = yr[mesh.node_index]
            first = yr[1] / Fl[1] * ell.int1(tau[1:2])[0]
            c1 = _mesh_cumulative(tau, yr, first)
            c2 = _mesh_cumulative(tau, c1, c1[1] * tau[1] / (2.0 + ell.power))
            ri1[:, live] = c1[mesh.node_index]
            ri2[:, live] = c2[mesh.node_index]
            if keep_mesh:
                fr = {float(m): MeshFunction(tau, yr[:, c], ell, yr[1, c] / Fl[1])
                      for c, m in enumerate(mu_l)}
    if keep_mesh:
        for m in mus[~live]:
            fr[float(m)] = ell
    return s, r, ri1, ri2, fs, fr


def _t_max(grid):
    return float(10.0 ** np.ceil(np.log10(grid.t_end * 1.01)))


def build_relaxation_table(spec: KernelSpec, mus, grid: TimeGrid, *,
                           eps: Optional[float] = None, want_r: bool = True,
                           workers: int = 1, chunk: int = 0,
                           keep_mesh: bool = False) -> RelaxationTable:
    """Solve for ``s`` and ``r`` at every ``mu`` in ``mus``.

    Columns are independent.  ``chunk`` splits ``mus`` into groups solved on
    separate meshes (each graded for its own largest ``mu``), optionally in
    ``workers`` threads; by default all columns share one mesh.  With
    ``keep_mesh`` the columns returned by :meth:`RelaxationTable.s` and
    :meth:`RelaxationTable.r` carry the continuous interpolant of the
    internal solution, which resolves ``r`` inside the first grid cell.
    """
    mus = np.asarray(mus, dtype=float).ravel()
    if np.any(~np.isfinite(mus)) or np.any(mus < 0):
        raise ValueError("mus must be finite and nonnegative")
    if np.unique(mus).size != mus.size:
        raise ValueError("mus must be deduplicated")
    order = np.argsort(mus)
    groups = [order] if chunk <= 0 else [order[i:i + chunk] for i in range(0, mus.size, chunk)]

    def run(idx):
        return idx, _solve_block(spec, mus[idx], grid, eps, want_r, keep_mesh)

    if workers > 1 and len(groups) > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, groups))
    else:
        results = [run(g) for g in groups]
    N = grid.n_steps
    s = np.empty((N + 1, mus.size))
    r = np.empty_like(s)
    ri1 = np.empty_like(s)
    ri2 = np.empty_like(s)
    fs, fr = {}, {}
    for idx, (a, b, c, d, e, f) in results:
        s[:, idx], r[:, idx], ri1[:, idx], ri2[:, idx] = a, b, c, d
        fs.update(e)
        fr.update(f)
    ell = ell_function(spec, _t_max(grid))
    return RelaxationTable(spec, grid, mus, s, r, ri1, ri2,
                           r_singular=bool(ell.singular),
                           meta={"r_power": float(ell.power) if ell.singular else 0.0,
                                 "eps": float(eps if eps is not None else default_grading(N))},
                           s_functions=fs if keep_mesh else None,
                           r_functions=fr if keep_mesh else None)


def solve_relaxation_s(spec: KernelSpec, mu: float, grid: TimeGrid, *,
                       eps: Optional[float] = None) -> SampledFn:
    """Solution of ``s + mu (l * s) = 1`` on ``grid``."""
    mu = float(mu)
    if not (np.isfinite(mu) and mu >= 0):
        raise ValueError("mu must be nonnegative")
    table = build_relaxation_table(spec, [mu], grid, eps=eps, want_r=False,
                                   keep_mesh=True)
    return table.s(mu)


def solve_relaxation_r(spec: KernelSpec, mu: float, grid: TimeGrid, *,
                       eps: Optional[float] = None) -> SampledFn:
    """Solution of ``r + mu (l * r) = l`` on ``grid``; node 0 is singular when ``l`` is."""
    mu = float(mu)
    if not (np.isfinite(mu) and mu >= 0):
        raise ValueError("mu must be nonnegative")
    table = build_relaxation_table(spec, [mu], grid, eps=eps, keep_mesh=True)
    return table.r(mu)


def solve_with_rhs(spec: KernelSpec, mus, grid: TimeGrid, rhs, rhs_power: float, *,
                   eps: Optional[float] = None, block: int = 128) -> np.ndarray:
    """Solve ``y + mu (l * y) = F`` for every ``mu``; values at the grid nodes.

    ``rhs`` is a callable giving ``F`` at arbitrary positive times (it is
    evaluated on the internal graded mesh) and ``rhs_power`` its leading
    exponent at the origin.  Columns with ``mu = 0`` return ``F`` itself.

    Returns
    -------
    ndarray, shape (n_steps + 1, len(mus))
        Row 0 holds ``F(0)`` when ``rhs_power >= 0`` and ``inf`` otherwise.
    """
    mus = np.atleast_1d(np.asarray(mus, dtype=float))
    if np.any(~np.isfinite(mus)) or np.any(mus < 0):
        raise ValueError("mus must be finite and nonnegative")
    ell = ell_function(spec, _t_max(grid))
    t = grid.nodes
    out = np.empty((t.size, mus.size))
    if rhs_power < 0:
        f0 = np.inf
    elif rhs_power > 0:
        f0 = 0.0
    else:
        # finite nonzero limit at the origin; sample just to the right of it
        f0 = float(rhs(np.array([1e-12 * grid.dt]))[0])
    out[0] = f0
    out[1:] = np.asarray(rhs(t[1:]), dtype=float)[:, None]
    live = mus > 0
    if np.any(live):
        mesh = graded_mesh(grid, ell, mus[live].max(), eps)
        F = np.empty(mesh.tau.size)
        F[1:] = rhs(mesh.tau[1:])
        F[0] = f0
        y = solve_second_kind(ell, mesh, mus[live], F, rhs_power, block=block)
        out[:, live] = y[mesh.node_index]
        out[0, live] = f0
    return out


# convolution of sampled functions

_NQ = 8


_DYADIC_LEVELS = 50


def _primitive_small(f: SampledFn, u):
    """``int_0^u f`` for ``0 < u <= dt``."""
    if f.fn is not None:
        return f.fn.int1(u)
    p = f.leading_power()
    h = f.grid.dt
    return f.values[1] * h * (u / h) ** (p + 1.0) / (p + 1.0)


def _dyadic(f_sing: SampledFn, other, t_ref, span, n_quad):
    """``int_0^span f_sing(u) other(t_ref - u) du`` for every ``t_ref``.

    ``f_sing`` may blow up at ``u = 0``; ``[0, span]`` is split into dyadic
    pieces, each integrated by Gauss-Legendre, and the innermost piece uses
    the primitive of ``f_sing`` with ``other`` frozen.
    """
    x, w = gauss_legendre01(n_quad)
    t_ref = np.asarray(t_ref, dtype=float)
    out = np.zeros(t_ref.shape)
    hi = span
    for _ in range(_DYADIC_LEVELS):
        lo = 0.5 * hi
        u = lo + (hi - lo) * x
        fu = f_sing(u)
        ov = other((t_ref[:, None] - u[None, :]).ravel()).reshape(t_ref.size, n_quad)
        out += (hi - lo) * (ov @ (w * fu))
        hi = lo
    out += _primitive_small(f_sing, np.array([hi]))[0] * other(t_ref)
    return out


def convolve(a: SampledFn, b: SampledFn, n_quad: int = _NQ) -> SampledFn:
    """``(a * b)(t_i)`` by product integration on the uniform grid.

    Both operands are represented by their continuous form when they carry
    one, otherwise by their cellwise power-law interpolants.  Ordinary cells
    use Gauss-Legendre rules.  Cells touching a singular endpoint are split
    dyadically towards the singularity, with the primitive of the singular
    operand covering the innermost piece.
    """
    if a.grid != b.grid:
        raise ValueError("operands live on different grids")
    grid = a.grid
    h, N = grid.dt, grid.n_steps
    x, w = gauss_legendre01(n_quad)
    lags = (np.arange(1, N + 1)[:, None] - x[None, :]) * h   # lag cell m = 1..N
    A = np.zeros((N + 1, n_quad))
    A[1:] = a(lags.ravel()).reshape(lags.shape)
    taus = (np.arange(N)[:, None] + x[None, :]) * h
    B = b(taus.ravel()).reshape(taus.shape)
    out = np.zeros(N + 1)
    for q in range(n_quad):
        out += w[q] * np.convolve(A[:, q], B[:, q])[:N + 1]
    out *= h

    t = grid.nodes
    both = a.singular and b.singular
    first = 2 if both else 1
    if a.singular:
        # lag cell [0, h] at node i, i.e. tau in [t_i - h, t_i]
        i = np.arange(first, N + 1)
        gl = h * np.einsum("q,q,iq->i", w, A[1], B[i - 1])
        out[i] += _dyadic(a, b, t[i], h, n_quad) - gl
    if b.singular:
        i = np.arange(first, N + 1)
        gl = h * (A[i] * w) @ B[0]
        out[i] += _dyadic(b, a, t[i], h, n_quad) - gl
    if both:
        half = 0.5 * h
        out[1] = (_dyadic(a, b, t[1:2], half, n_quad)[0]
                  + _dyadic(b, a, t[1:2], half, n_quad)[0])
    return SampledFn(grid, out)


# first-kind equations


def _lag_rule(k: SampledFn, h: float, n_quad: int):
    """Nodes ``u`` and weights for ``int_0^h k(u) y(u) du`` with ``k`` singular at 0.

    Dyadic Gauss-Legendre pieces; the innermost piece contributes the
    primitive of ``k`` times ``y(0)``.
    """
    x, w = gauss_legendre01(n_quad)
    us, ws = [], []
    hi = h
    for _ in range(_DYADIC_LEVELS):
        lo = 0.5 * hi
        u = lo + (hi - lo) * x
        us.append(u)
        ws.append((hi - lo) * w * k(u))
        hi = lo
    us.append(np.zeros(1))
    ws.append(_primitive_small(k, np.array([hi])))
    return np.concatenate(us), np.concatenate(ws)


def _first_kind_solve(k: SampledFn, rhs: np.ndarray, p0: float, singular: bool,
                      n_quad: int = _NQ) -> np.ndarray:
    grid = k.grid
    h, N = grid.dt, grid.n_steps
    t = grid.nodes
    x, w = gauss_legendre01(n_quad)
    # k at Gauss lags of cells m = 2..N (row m)
    A = np.zeros((N + 1, n_quad))
    A[2:] = k(((np.arange(2, N + 1)[:, None] - x[None, :]) * h).ravel()).reshape(N - 1, n_quad)
    # first cell model x_1 (s/h)**p0
    shape = np.empty(N + 1)
    shape[1:] = (t[1:] / h) ** p0
    shape[0] = np.inf if singular else 1.0
    first = SampledFn(grid, shape, singular=singular, power=p0)
    Q = np.empty(N + 1)
    Q[2:] = _dyadic(first, k, t[2:], h, n_quad)
    half = 0.5 * h
    Q[1] = (_dyadic(first, k, t[1:2], half, n_quad)[0]
            + _dyadic(k, first, t[1:2], half, n_quad)[0])
    if not Q[1] > 0:
        raise DeconvolutionError("leading weight vanishes; the system is singular", np.inf)
    u, W = _lag_rule(k, h, n_quad)
    lin_b = W @ (1.0 - u / h)   # weight of the new node for a linear last cell
    lin_a = W @ (u / h)

    X = np.zeros(N + 1)
    Xq = np.zeros((N + 1, n_quad))   # interpolant at Gauss points of cell j
    X[1] = rhs[1] / Q[1]
    X[0] = np.inf if singular else X[1]
    wA = h * A * w[None, :]
    for i in range(2, N + 1):
        known = X[1] * Q[i]
        if i > 2:
            # cells j = 1..i-2 sit at lags m = i-j = i-1..2
            known += np.sum(wA[i - 1:1:-1] * Xq[1:i - 1])
        R = rhs[i] - known
        xa = X[i - 1]
        ta, tb = t[i - 1], t[i]
        xi = (R - xa * lin_a) / lin_b
        if xa > 0 and xi > 0:
            L = np.log((tb - u) / ta)
            p = np.log(xi / xa) / np.log(tb / ta)
            target = R / xa
            for _ in range(30):
                e = W * np.exp(p * L)
                g = e.sum() - target
                step = g / (e @ L)
                p -= step
                if abs(step) < 1e-14 * max(1.0, abs(p)):
                    break
            X[i] = xa * (tb / ta) ** p
            Xq[i - 1] = xa * (1.0 + x * h / ta) ** p
        else:
            X[i] = xi
            Xq[i - 1] = xa + (xi - xa) * x
    return X


def deconvolve_first_kind(k: SampledFn, target: SampledFn, tol: Optional[float] = None,
                          first_power: Optional[float] = None) -> SampledFn:
    """Solve ``(k * x)(t) = target(t)`` for ``x``.

    ``x`` is represented exactly as :func:`convolve` sees a sampled function:
    power laws between positive nodal values and a single power law
    ``x_1 (t / dt)**p`` on the first cell, with ``p = -1 - q`` when ``k``
    behaves like ``t**q`` at the origin (Abel pairs) and ``p = 0`` otherwise.
    ``first_power`` overrides that choice, e.g. with an effective exponent
    for solutions that blow up logarithmically.
    Collocation at the nodes gives one scalar equation per step for the
    exponent of the newest cell, solved by Newton's method.  The returned
    ``residual`` is ``max |(k * x)(t_i) - target(t_i)|`` over interior nodes,
    relative to ``max |target|``, recomputed independently by
    :func:`convolve`.

    Raises
    ------
    DeconvolutionError
        On a vanishing leading weight or if ``residual > tol``.
    """
    if k.grid != target.grid:
        raise ValueError("operands live on different grids")
    grid = k.grid
    singular = bool(k.singular)
    p0 = 0.0
    if singular and k.power is not None and -1.0 < k.power < 0.0:
        p0 = -1.0 - float(k.power)
    if first_power is not None:
        if not -1.0 < first_power <= 0.0:
            raise ValueError(f"first_power must lie in (-1, 0], got {first_power}")
        p0 = float(first_power)
    rhs = np.asarray(target.values, dtype=float)
    vals = _first_kind_solve(k, rhs, p0, singular)
    if not np.all(np.isfinite(vals[1:])):
        raise DeconvolutionError("deconvolution produced non-finite values", np.inf)
    x = SampledFn(grid, vals, singular=singular, power=p0)
    check = convolve(k, x)
    scale = max(float(np.max(np.abs(rhs[1:]))), 1e-300)
    resid = float(np.max(np.abs(check.values[1:] - rhs[1:]))) / scale
    x = SampledFn(grid, vals, singular=singular, power=p0, residual=resid)
    if tol is not None and resid > tol:
        raise DeconvolutionError(
            f"deconvolution residual {resid:.3e} exceeds tolerance {tol:.1e}", resid)
    return x
