import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from puavg.errors import DataError
from puavg.links import link_c, link_derivs, link_g, link_h, log1pexp, sigmoid

from conftest import rel_err

ts = st.floats(min_value=-30.0, max_value=30.0)
bs = st.floats(min_value=0.0, max_value=100.0)


def test_h_at_zero():
    assert link_h(0.0) == pytest.approx(-math.log(2.0), abs=1e-12)


def test_h_large_positive_is_not_minus_inf():
    v = link_h(50.0)
    assert v == pytest.approx(-1.9287498479639178e-22, rel=1e-9)
    assert v < 0.0


def test_h_large_negative_dominated_by_t():
    assert link_h(-50.0) == pytest.approx(-50.0, abs=1e-12)


def test_g_examples():
    assert link_g(0.0, 1.0) == pytest.approx(math.log(3) - math.log(2), abs=1e-12)
    assert link_g(80.0, 3.0) == pytest.approx(math.log(4.0), abs=1e-12)


def test_g_zero_b_collapses_exactly():
    for t in (-200.0, -3.0, 0.0, 1.7, 45.0, 300.0):
        assert link_g(t, 0.0) == 0.0


def test_c_examples():
    assert link_c(0, 0.5) == 0.0
    assert link_c(1, math.e) == pytest.approx(1.0, abs=1e-12)
    assert link_c(1, 2.0 / 3.0) == pytest.approx(-0.4054651081081645, abs=1e-7)


def test_c_degenerate():
    with pytest.raises(DataError):
        link_c(1, 0.0)
    assert link_c(0, 0.0) == 0.0


def test_derivs_at_zero_b_zero():
    h1, h2, g1, g2 = link_derivs(0.0, 0.0)
    assert (h1, h2, g1, g2) == (0.5, -0.25, 0.0, 0.0)


def test_derivs_at_zero_b_one():
    _, _, g1, _ = link_derivs(0.0, 1.0)
    assert g1 == pytest.approx(2.0 / 3.0 - 0.5, abs=1e-12)


def test_derivs_match_finite_differences_at_spec_point():
    t, b, step = 0.3, 0.7, 1e-5
    h1, h2, g1, g2 = link_derivs(t, b)
    fd_h1 = (link_h(t + step) - link_h(t - step)) / (2 * step)
    fd_g1 = (link_g(t + step, b) - link_g(t - step, b)) / (2 * step)
    fd_h2 = (link_h(t + step) - 2 * link_h(t) + link_h(t - step)) / step**2
    fd_g2 = (link_g(t + step, b) - 2 * link_g(t, b) + link_g(t - step, b)) / step**2
    assert rel_err(h1, fd_h1) < 1e-6
    assert rel_err(g1, fd_g1) < 1e-6
    assert rel_err(h2, fd_h2) < 1e-4
    assert rel_err(g2, fd_g2) < 1e-4


@pytest.mark.parametrize("b", [0.0, 0.5, 1.0, 3.0])
def test_all_derivs_match_finite_differences_on_grid(b):
    """Central differences with step 1e-5, evaluated in 50-digit arithmetic:
    in float64 the difference quotient itself loses more than 1e-6 of
    relative accuracy where g saturates, so the oracle runs in mpmath."""
    import mpmath as mp
    mp.mp.dps = 50
    step = mp.mpf("1e-5")
    bb = mp.mpf(b)

    def h_mp(t):
        return t - mp.log(1 + mp.e**t)

    def g_mp(t):
        return mp.log(1 + (1 + bb) * mp.e**t) - mp.log(1 + mp.e**t)

    for t in np.arange(-10.0, 10.5, 1.0):
        h1, h2, g1, g2 = link_derivs(float(t), b)
        tm = mp.mpf(float(t))
        fd_h1 = float((h_mp(tm + step) - h_mp(tm - step)) / (2 * step))
        fd_h2 = float((h_mp(tm + step) - 2 * h_mp(tm) + h_mp(tm - step)) / step**2)
        assert rel_err(h1, fd_h1) < 1e-6
        assert rel_err(h2, fd_h2) < 1e-6
        if b > 0:
            fd_g1 = float((g_mp(tm + step) - g_mp(tm - step)) / (2 * step))
            fd_g2 = float((g_mp(tm + step) - 2 * g_mp(tm) + g_mp(tm - step))
                          / step**2)
            assert rel_err(g1, fd_g1) < 1e-6
            assert rel_err(g2, fd_g2) < 1e-6
        else:
            assert g1 == 0.0 and g2 == 0.0


@given(ts)
def test_h_nonpositive_and_increasing(t):
    assert link_h(t) <= 0.0
    assert link_h(t + 0.5) > link_h(t)
    h1, _, _, _ = link_derivs(t, 1.0)
    assert h1 > 0.0


@given(ts, bs)
@settings(max_examples=200)
def test_g_bounds_sharp(t, b):
    v = link_g(t, b)
    assert -1e-15 <= v <= math.log1p(b) + 1e-12


@given(ts, st.floats(min_value=1e-3, max_value=50.0))
def test_g_increasing_for_positive_b(t, b):
    assert link_g(t + 0.5, b) > link_g(t, b)


@given(ts, st.floats(min_value=1e-3, max_value=100.0),
       st.sampled_from([0, 1]))
@settings(max_examples=300)
def test_pu_summand_matches_two_branch_probability(t, b, z):
    """z h(t) - g(t) + c(z, b) is exactly the log of the two-branch PU
    observation probability."""
    lhs = z * link_h(t) - link_g(t, b) + link_c(z, b)
    et = math.exp(t) if t < 700 else math.inf
    denom = 1.0 + (1.0 + b) * et
    branch = b * et / denom if z == 1 else (1.0 + et) / denom
    assert lhs == pytest.approx(math.log(branch), rel=1e-12, abs=1e-12)


@given(st.floats(min_value=-700, max_value=700))
def test_sigmoid_in_unit_interval(t):
    s = sigmoid(t)
    assert 0.0 <= s <= 1.0
    assert sigmoid(-t) == pytest.approx(1.0 - s, abs=1e-15)


@given(st.floats(min_value=-700, max_value=700))
def test_log1pexp_identity(t):
    # log1pexp(t) - log1pexp(-t) == t
    assert log1pexp(t) - log1pexp(-t) == pytest.approx(t, rel=1e-12, abs=1e-9)


def test_vector_inputs_match_scalar():
    t = np.array([-5.0, 0.0, 2.5])
    np.testing.assert_allclose(link_h(t), [link_h(v) for v in t], rtol=1e-15)
    np.testing.assert_allclose(link_g(t, 0.7), [link_g(v, 0.7) for v in t],
                               rtol=1e-15)
