import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.special import gamma

from sonine.grid import TimeGrid
from sonine.kernels import (DeconvolutionError, KernelSpec, UnsupportedVariantError,
                            ell_table, eval_ell, eval_g, eval_k, integrated_ell,
                            k_function, k_hat, laplace_ell_hat)

SUM = KernelSpec.sum_fractional(0.3, 0.7)
MLW = KernelSpec.ml_weighted(0.2, 0.6, 1.0)
DIST = KernelSpec.distributed_order(1)
RL = KernelSpec.fractional_rl(0.5)
NONTRIVIAL = [SUM, MLW, DIST]

# Gamma(b) from mpmath at 30 digits
GAMMA_TABLE = [
    (0.05, 19.470085311255511756),
    (0.3, 2.9915689876875907446),
    (0.5, 1.7724538509055160273),
    (0.7, 1.298055332647557856),
    (1.3, 0.89747069630627718175),
    (2.5, 1.3293403881791370205),
    (7.2, 1050.3178166626829528),
    (13.7, 2861595499.066014607),
    (20.0, 121645100408832000.0),
]


@pytest.fixture(scope="module")
def sum_table():
    return ell_table(SUM, TimeGrid(4.096, 4096))


# eval_g


def test_g_one_is_one():
    assert eval_g(1.0, 7.3) == pytest.approx(1.0, rel=1e-15)


def test_g_half():
    assert eval_g(0.5, 1.0) == pytest.approx(0.5641895835, abs=1e-10)


def test_g_three_halves():
    assert eval_g(1.5, 4.0) == pytest.approx(2.2567583342, abs=1e-10)


@pytest.mark.parametrize("b,g", GAMMA_TABLE)
def test_gamma_accuracy(b, g):
    assert eval_g(b, 1.0) * g == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("b,t", [(0.5, 0.0), (0.5, -1.0), (0.0, 1.0), (-0.5, 1.0)])
def test_g_domain(b, t):
    with pytest.raises(ValueError):
        eval_g(b, t)


# KernelSpec


@pytest.mark.parametrize("kw", [
    dict(variant="FractionalRL", alpha=1.5),
    dict(variant="FractionalRL", alpha=0.0),
    dict(variant="SumFractional", alpha=0.7, beta=0.3),
    dict(variant="MLWeighted", alpha=0.2, beta=0.6, omega=0.0),
    dict(variant="DistributedOrder", n=-1),
    dict(variant="DistributedOrder", n=1.5),
    dict(variant="Classical", alpha=0.5),
    dict(variant="Caputo", alpha=0.5),
])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        KernelSpec(**kw)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.98), st.floats(0.01, 0.98), st.floats(0.1, 10.0))
def test_spec_round_trip(a, b, w):
    a, b = min(a, b), max(a, b)
    if b - a < 1e-6:
        b = a + 0.01
    spec = KernelSpec.ml_weighted(a, b, w)
    assert KernelSpec.from_dict(spec.to_dict()) == spec


def test_classical_is_oracle_only():
    assert KernelSpec.classical().is_oracle_only
    assert not RL.is_oracle_only


# eval_k


def test_k_rl():
    assert eval_k(RL, 1.0) == pytest.approx(0.5641895835, abs=1e-10)


def test_k_sum():
    assert eval_k(SUM, 1.0) == pytest.approx(1 / gamma(0.7) + 1 / gamma(0.3), rel=1e-13)


def test_k_distributed_simpson_oracle():
    a = np.linspace(0.0, 1.0, 10001)
    f = np.where(a > 0, a / gamma(np.where(a > 0, a, 1.0)), 0.0)
    ref = integrate.simpson(f, x=a)
    assert eval_k(DIST, 1.0) == pytest.approx(ref, abs=1e-8)


def test_k_classical_unsupported():
    with pytest.raises(UnsupportedVariantError):
        eval_k(KernelSpec.classical(), 1.0)


@pytest.mark.parametrize("spec", [RL, SUM, MLW, DIST])
def test_k_nonincreasing(spec):
    t = np.geomspace(1e-6, 1e4, 400)
    k = eval_k(spec, t)
    assert np.all(k > 0)
    assert np.all(np.diff(k) <= 1e-12 * k[:-1])


# Laplace transforms


def test_lhat_sum_at_one():
    assert laplace_ell_hat(SUM, 1.0) == pytest.approx(0.5, rel=1e-14)


def test_lhat_rl():
    assert laplace_ell_hat(RL, 4.0) == pytest.approx(0.5, rel=1e-14)


def test_lhat_dist_zero_at_one():
    assert laplace_ell_hat(KernelSpec.distributed_order(0), 1.0) == pytest.approx(1.0, rel=1e-12)


def test_lhat_mlw_algebra():
    lam = np.array([0.1, 1.0, 7.0])
    a, b, w = MLW.alpha, MLW.beta, MLW.omega
    np.testing.assert_allclose(laplace_ell_hat(MLW, lam),
                               (lam ** a + w) * lam ** (b - a - 1.0), rtol=1e-13)


def test_lhat_classical():
    assert laplace_ell_hat(KernelSpec.classical(), 3.0) == pytest.approx(1 / 3, rel=1e-14)


@pytest.mark.parametrize("lam", [0.0, -1.0])
def test_lhat_domain(lam):
    with pytest.raises(ValueError):
        laplace_ell_hat(SUM, lam)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([RL, SUM, MLW, DIST]), st.floats(1e-3, 1e3))
def test_sonine_identity_in_laplace_domain(spec, lam):
    # k * l = 1  <=>  lam k_hat l_hat = 1
    prod = lam * np.real(k_hat(spec, np.array(lam, dtype=complex))) * laplace_ell_hat(spec, lam)
    assert prod == pytest.approx(1.0, rel=1e-11)


# ell tables


def test_table_rl_closed_form():
    g = TimeGrid(2.0, 50)
    tab = ell_table(RL, g)
    np.testing.assert_allclose(tab.values[1:], eval_g(0.5, g.nodes[1:]), rtol=1e-14)


def test_table_classical_ones():
    g = TimeGrid(3.0, 30)
    np.testing.assert_array_equal(ell_table(KernelSpec.classical(), g).values, 1.0)


def _conv_oracle(kfun, kpower, table, i, n_gl=20):
    """int_0^{t_i} k(t_i - s) table(s) ds with scipy quadrature near the endpoints."""
    g = table.grid
    h, t = g.dt, g.nodes[i]
    p0 = table.leading_power()
    x1 = table.values[1]
    first = lambda s: kfun(t - s) * x1 * h ** (-p0)      # times s**p0

    def kreg(u):                                         # k(u) / u**kpower
        u = max(u, 1e-200)
        return kfun(u) * u ** (-kpower)

    last = lambda s: kreg(t - s) * table(np.array([s]))[0]
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=200)
    if i == 1:
        a, _ = integrate.quad(first, 0, h / 2, weight="alg", wvar=(p0, 0.0), **opts)
        b, _ = integrate.quad(lambda s: x1 * (s / h) ** p0 * kreg(t - s),
                              h / 2, h, weight="alg", wvar=(0.0, kpower), **opts)
        return a + b
    total, _ = integrate.quad(first, 0, h, weight="alg", wvar=(p0, 0.0), **opts)
    c, _ = integrate.quad(last, t - h, t, weight="alg", wvar=(0.0, kpower), **opts)
    total += c
    if i > 2:
        x, w = np.polynomial.legendre.leggauss(n_gl)
        x, w = 0.5 * (x + 1.0), 0.5 * w
        lo = g.nodes[1:i - 1]
        s = lo[:, None] + h * x[None, :]
        total += h * np.sum(w * kfun(t - s) * table(s.ravel()).reshape(s.shape))
    return total


@pytest.mark.parametrize("i", [1, 2, 10, 500, 4096])
def test_sum_table_residual_independent(sum_table, i):
    kf = k_function(SUM).value
    val = _conv_oracle(lambda u: kf(np.asarray(u, float)), -0.7, sum_table, i)
    assert abs(val - 1.0) <= 1e-4


def test_sum_table_reported_residual(sum_table):
    assert sum_table.residual is not None and sum_table.residual <= 1e-4


@pytest.mark.parametrize("i", [1, 3, 1000])
def test_mlw_table_residual_independent(i):
    g = TimeGrid(2.0, 2000)
    tab = ell_table(MLW, g)
    kf = k_function(MLW).value
    val = _conv_oracle(lambda u: kf(np.asarray(u, float)), MLW.beta - 1.0, tab, i)
    assert abs(val - 1.0) <= 1e-4


@pytest.mark.parametrize("spec", NONTRIVIAL)
def test_table_positive_nonincreasing(spec):
    tab = ell_table(spec, TimeGrid(20.0, 2000))
    v = tab.values[1:]
    assert np.all(v > 0)
    assert np.all(np.diff(v) <= 1e-12 * v[:-1])


@pytest.mark.parametrize("spec", NONTRIVIAL)
def test_table_laplace_agreement(spec):
    g = TimeGrid(60.0, 4096)
    tab = ell_table(spec, g)
    h = g.dt
    p0 = tab.leading_power()
    x, w = np.polynomial.legendre.leggauss(16)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    s = g.nodes[1:-1, None] + h * x[None, :]
    vals = tab(s.ravel()).reshape(s.shape)
    for lam in (0.5, 1.0, 2.0, 5.0):
        head, _ = integrate.quad(lambda u: np.exp(-lam * u) * tab.values[1] * h ** (-p0), 0, h,
                                 weight="alg", wvar=(p0, 0.0))
        body = h * np.sum(w * np.exp(-lam * s) * vals)
        assert head + body == pytest.approx(laplace_ell_hat(spec, lam), rel=0.01)


def test_table_failure_carries_residual():
    # a tolerance no scheme can meet
    with pytest.raises(DeconvolutionError) as exc:
        ell_table(SUM, TimeGrid(1.0, 50), tol=1e-30)
    assert exc.value.residual > 0


# integrated l


def test_integrated_rl():
    g = TimeGrid(2.0, 20)
    assert integrated_ell(RL, g).values[10] == pytest.approx(2 / np.sqrt(np.pi), rel=1e-13)


def test_integrated_classical():
    g = TimeGrid(5.0, 10)
    assert integrated_ell(KernelSpec.classical(), g).values[5] == pytest.approx(2.5, rel=1e-14)


def test_integrated_sum_karamata():
    g = TimeGrid(100.0, 2000)
    assert integrated_ell(SUM, g).values[-1] == pytest.approx(100 ** 0.3, rel=0.15)


@pytest.mark.parametrize("spec", NONTRIVIAL + [RL])
def test_integrated_monotone_and_increment_bound(spec):
    g = TimeGrid(10.0, 1000)
    tab = ell_table(spec, g)
    cum = integrated_ell(spec, g).values
    assert cum[0] == 0.0
    inc = np.diff(cum)
    assert np.all(inc >= 0)
    assert np.all(inc[1:] <= tab.values[1:-1] * g.dt * (1 + 1e-12))


def test_pointwise_ell_matches_table_far_from_origin():
    g = TimeGrid(10.0, 4000)
    tab = ell_table(SUM, g)
    t = g.nodes[400::400]
    np.testing.assert_allclose(tab(t), eval_ell(SUM, t), rtol=2e-3)
