import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from nlsubdiff.errors import DomainError
from nlsubdiff.fracops import (
    GridFunction,
    assemble_propagator,
    caputo_l1,
    graded_rule,
    rl_integral,
    singular_double_weight_quad,
)
from nlsubdiff.specfun import MLIndices, beta_fn, mittag_leffler
from reference import spectral_propagator


def grid(fn, n, t=1.0):
    return GridFunction.sample(fn, n, t)


def test_grid_function_checks():
    with pytest.raises(DomainError):
        GridFunction(np.array([0.0, 0.1, 0.3]), np.zeros(3))
    with pytest.raises(DomainError):
        GridFunction(np.linspace(0, 1, 4), np.zeros(3))
    assert grid(np.sin, 10).step == pytest.approx(0.1)


@given(st.floats(0.05, 3.0))
def test_rl_integral_constant_exact(sigma):
    h = grid(np.ones_like, 20, 2.0)
    got = rl_integral(h, sigma).values
    want = h.nodes**sigma / math.gamma(sigma + 1)
    assert np.max(np.abs(got - want)) <= 1e-12 * np.max(want)


def test_rl_integral_linear_exact():
    h = grid(lambda t: t, 16)
    got = rl_integral(h, 0.5).values
    assert np.max(np.abs(got - h.nodes**1.5 / math.gamma(2.5))) < 1e-14


def test_rl_integral_sine_reference():
    h = grid(np.sin, 400)
    got = rl_integral(h, 0.3).values[-1]
    ref, _ = quad(np.sin, 0, 1, weight="alg", wvar=(0.0, -0.7), epsrel=1e-13)
    assert got == pytest.approx(ref / math.gamma(0.3), abs=1e-6)


def test_rl_integral_order_one_is_trapezoid():
    h = grid(np.exp, 50)
    got = rl_integral(h, 1.0).values
    trap = np.concatenate([[0.0], np.cumsum((h.values[1:] + h.values[:-1]) / 2 * h.step)])
    assert np.max(np.abs(got - trap)) < 1e-13


def test_rl_integral_semigroup():
    # h(0) = h'(0) = 0 keeps the inner integral smooth enough for second order
    errs = []
    for n in (32, 64, 128):
        h = grid(lambda t: t**2 * np.cos(t), n)
        two = rl_integral(rl_integral(h, 0.4), 0.3).values
        one = rl_integral(h, 0.7).values
        errs.append(np.max(np.abs(two - one)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.7)


def test_rl_integral_rejects_order():
    with pytest.raises(DomainError):
        rl_integral(grid(np.sin, 4), 0.0)


@given(st.floats(0.05, 0.95))
def test_caputo_linear_exact(alpha):
    h = grid(lambda t: 3 * t + 1, 20)
    got = caputo_l1(h, alpha).values
    assert np.max(np.abs(got - 3 * h.nodes ** (1 - alpha) / math.gamma(2 - alpha))) < 1e-11


def test_caputo_constant_is_zero():
    assert np.all(caputo_l1(grid(lambda t: 0 * t + 7.0, 10), 0.4).values == 0)


def test_caputo_square_rate():
    alpha = 0.5
    errs = []
    for n in (32, 64, 128):
        h = grid(lambda t: t**2, n)
        got = caputo_l1(h, alpha).values
        errs.append(np.max(np.abs(got - 2 * h.nodes**1.5 / math.gamma(2.5))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - (2 - alpha)) < 0.3)


def test_caputo_then_integral_recovers():
    alpha = 0.6
    errs = []
    for n in (32, 64, 128):
        h = grid(lambda t: t**2 * (1 + t), n)
        back = rl_integral(caputo_l1(h, alpha), alpha).values
        errs.append(np.max(np.abs(back - (h.values - h.values[0]))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - (2 - alpha)) < 0.3)


def test_caputo_rejects_alpha():
    with pytest.raises(DomainError):
        caputo_l1(grid(np.sin, 4), 1.0)


def test_caputo_along_time_axis():
    t = np.linspace(0, 1, 11)
    vals = np.outer(t, [1.0, 2.0])
    out = caputo_l1(GridFunction(t, vals), 0.5).values
    assert out.shape == vals.shape
    assert np.allclose(out[:, 1], 2 * out[:, 0])


def test_double_weight_beta_identity():
    got = singular_double_weight_quad(-0.5, -0.75, lambda e: np.ones_like(e), 1.0)
    assert got == pytest.approx(5.2441151, rel=1e-7)
    assert got == pytest.approx(beta_fn(0.25, 0.5), rel=1e-13)


@given(st.floats(0.05, 0.95), st.floats(0.1, 5.0))
def test_double_weight_scaling(alpha, T):
    got = singular_double_weight_quad(-alpha, alpha / 2 - 1, lambda e: np.ones_like(e), T)
    want = T ** (-alpha / 2) * beta_fn(alpha / 2, 1 - alpha)
    assert got == pytest.approx(want, rel=1e-12)


def test_double_weight_linear_reference():
    got = singular_double_weight_quad(-0.3, -0.6, lambda e: e, 2.0)
    ref, _ = quad(lambda e: e, 0, 2, weight="alg", wvar=(-0.6, -0.3), epsrel=1e-13)
    assert got == pytest.approx(ref, rel=1e-8)


def test_double_weight_rejects_divergent():
    with pytest.raises(DomainError):
        singular_double_weight_quad(-1.0, 0.0, np.cos, 1.0)


@given(st.floats(-0.9, 0.5), st.floats(-0.9, 0.5), st.floats(1e-4, 0.1))
def test_graded_rule_resolves_layer(a, b, width):
    # a boundary layer exp(-eta/width) next to the eta^b weight
    nodes, w = graded_rule(a, b, 1.0)
    got = np.dot(w, np.exp(-nodes / width))
    # split at the layer so each piece carries one algebraic endpoint
    c = min(0.5, 60 * width)
    lo, _ = quad(lambda e: (1 - e) ** a * np.exp(-e / width), 0, c, weight="alg",
                 wvar=(b, 0.0), epsabs=0, epsrel=1e-13, limit=200)
    hi, _ = quad(lambda e: e**b * np.exp(-e / width), c, 1, weight="alg",
                 wvar=(0.0, a), epsabs=0, epsrel=1e-13, limit=200)
    ref = lo + hi
    assert got == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("t", [0.1, 0.5, 1.0])
def test_propagator_spectral_identity(alpha, t):
    P = assemble_propagator(t, alpha, 16)
    ref = spectral_propagator(P.nodes, P.nodes, t, alpha)
    assert np.max(np.abs(P.matrix - ref)) <= 1e-4 * np.max(np.abs(ref))


def test_propagator_first_mode():
    alpha, t = 0.4, 0.7
    P = assemble_propagator(t, alpha, 64)
    x = P.nodes
    want = float(mittag_leffler(MLIndices(alpha, 1.0), -np.pi**2 * t**alpha)) * np.sin(np.pi * x)
    # the trapezoidal xi-rule meets the diagonal kink: second order in h
    assert np.max(np.abs(P.apply(np.sin(np.pi * x)) - want)) < 5e-4


def test_propagator_boundary_rows_and_mass():
    P = assemble_propagator(1.0, 0.5, 16)
    assert np.max(np.abs(P.matrix[0])) < 1e-14 and np.max(np.abs(P.matrix[-1])) < 1e-14
    assert 0 < P.mass <= 1.0


def test_propagator_rejects_t0():
    with pytest.raises(DomainError):
        assemble_propagator(0.0, 0.5, 8)
