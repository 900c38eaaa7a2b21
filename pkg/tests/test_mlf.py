import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erfcx, gamma

from sonine import mlf
from sonine.mlf import MLParams, mittag_leffler

# E_{a,b}(z) from Talbot inversion of s**(a-b) / (s**a - z) in mpmath at 40 digits
FROZEN = [
    (0.3, 1.0, -0.5, 0.63264900594359902246),
    (0.3, 1.0, -3.0, 0.21180263319643578203),
    (0.3, 1.0, -8.0, 0.089493095818620724136),
    (0.3, 1.0, -40.0, 0.018979521266478697338),
    (0.5, 1.0, -20.0, 0.028174348741051319319),
    (0.5, 0.5, -7.0, 0.005589203243685752519),
    (0.8, 1.0, -2.0, 0.18979669236370564843),
    (0.8, 0.8, -6.0, 0.00758508165856241128),
    (0.8, 1.0, -15.0, 0.01584380074779079787),
    (0.9, 1.2, -30.0, 0.011459863498484073967),
    (0.2, 0.6, -100.0, 0.0044864611948055352076),
    (1.0, 1.0, -30.0, 9.3576229688401746049e-14),
    (0.6, 1.6, -12.0, 0.0801130767633855401),
    (0.4, 0.7, -50.0, 0.0067206455138891227116),
    (0.5, 1.5, -3.5, 0.24134466982603020074),
]


def test_exp_at_minus_one():
    assert mittag_leffler(MLParams(1.0, 1.0), -1.0) == pytest.approx(np.exp(-1.0), abs=1e-12)


def test_half_order_at_minus_one():
    # E_{1/2}(-x) = exp(x**2) erfc(x)
    assert mittag_leffler(MLParams(0.5, 1.0), -1.0) == pytest.approx(0.4275835762, abs=1e-10)
    assert mittag_leffler(MLParams(0.5, 1.0), -1.0) == pytest.approx(erfcx(1.0), abs=1e-12)


def test_value_at_zero():
    assert mittag_leffler(MLParams(0.7, 0.7), 0.0) == pytest.approx(1.0 / gamma(0.7), rel=1e-14)


@pytest.mark.parametrize("a,b,z,ref", FROZEN)
def test_frozen_table(a, b, z, ref):
    assert abs(mittag_leffler(MLParams(a, b), z) - ref) <= 1e-10


def test_array_shape_preserved():
    z = -np.linspace(0, 50, 12).reshape(3, 4)
    out = mittag_leffler(MLParams(0.5, 1.0), z)
    assert out.shape == (3, 4)
    np.testing.assert_allclose(out, erfcx(-z), atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 30.0))
def test_exp_branch(x):
    assert abs(mittag_leffler(MLParams(1.0, 1.0), -x) - np.exp(-x)) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 200.0))
def test_half_order_erfcx(x):
    assert abs(mittag_leffler(MLParams(0.5, 1.0), -x) - erfcx(x)) <= 1e-10


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_complete_monotonicity_proxy(alpha):
    t = np.linspace(0.0, 40.0, 801)
    e = mittag_leffler(MLParams(alpha, 1.0), -t)
    assert np.all(e > 0)
    assert np.all(np.diff(e) < 0)
    assert np.all(np.diff(e, 2) > -1e-12)


@pytest.mark.parametrize("a,b", [(0.3, 1.0), (0.5, 0.5), (0.8, 1.2), (0.95, 1.0), (0.6, 1.6)])
def test_branches_agree_on_overlaps(a, b):
    x_series = np.linspace(0.5, mlf.SERIES_RADIUS, 7)
    if not mlf._series_ok(a, b, float(x_series.max())):
        x_series = x_series[x_series <= 2.0]
    z = -x_series
    np.testing.assert_allclose(mlf._series(a, b, z), mlf._contour_eval(a, b, z), atol=1e-8)
    x0 = max(10.0, 5.0 ** (1.0 / a))
    xs = np.array([x0, 1.5 * x0, 3.0 * x0])
    for x in xs:
        n, mag = mlf._asymptotic_terms(a, b, float(x))
        if mag < 1e-9:
            zz = np.array([-x])
            assert abs(mlf._asymptotic(a, b, zz, n)[0] - mlf._contour_eval(a, b, zz)[0]) <= 1e-8


def test_positive_argument_rejected():
    with pytest.raises(ValueError):
        mittag_leffler(MLParams(0.5, 1.0), 0.1)


@pytest.mark.parametrize("a,b", [(0.0, 1.0), (1.2, 1.0), (0.5, 0.0), (0.5, -1.0), (np.nan, 1.0)])
def test_parameter_range(a, b):
    with pytest.raises(ValueError):
        MLParams(a, b)
