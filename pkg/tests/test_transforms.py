from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from brokenfpt.greens import INF, GreenKernel, PiecewiseExpPayoff
from brokenfpt.inversion import transition_density
from brokenfpt.spectral import DriftSpec
from brokenfpt.transforms import (
    BoundarySpec,
    MVariant,
    PoleError,
    TransformQuery,
    g_functions,
    joint_lt,
    killed_expectation,
    phi_closed_form,
    phi_quadruple,
    phi_tilde_quadruple,
    reflected_hit_lt,
    two_sided_exit_lt,
    variant_labels,
)
from conftest import time_domain_transform, upper_probability

drift_st = st.builds(DriftSpec, st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(0.3, 1.7))
boundary_st = st.builds(BoundarySpec.fixed_jump, st.floats(1.8, 3.0), st.floats(0.2, 3.0),
                        st.floats(0.1, 2.0))
theta_st = st.floats(0.05, 3.0)
alpha_st = st.floats(0.0, 1.2)


def _quad(system):
    return phi_quadruple if system == "free" else phi_tilde_quadruple


# -- exit transforms ----------------------------------------------------------

def test_driftless_two_sided_exit_is_a_sinh_ratio():
    w1, w2 = two_sided_exit_lt(DriftSpec(0, 0, 1), 0.5, 2.0, 1.0)
    assert abs(w1 - math.sinh(1) / math.sinh(2)) < 1e-12
    assert abs(w2 - math.sinh(1) / math.sinh(2)) < 1e-12
    assert abs(w1 - 0.324027) < 1e-6


def test_driftless_reflected_hit_is_a_cosh_ratio():
    v = reflected_hit_lt(DriftSpec(0, 0, 1), 0.5, 2.0, 1.0)
    assert abs(v - math.cosh(1) / math.cosh(2)) < 1e-12
    assert abs(v - 0.410154) < 1e-6


@given(drift_st, theta_st, st.floats(0.5, 3.0), st.floats(0.0, 1.0))
def test_exit_transform_bounds(drift, theta, b, frac):
    x = frac * b
    w1, w2 = two_sided_exit_lt(drift, theta, b, x)
    assert -1e-14 <= w1 <= 1 + 1e-14 and -1e-14 <= w2 <= 1 + 1e-14
    if 0.01 <= frac <= 0.99:
        assert w1 + w2 < 1
    h = reflected_hit_lt(drift, theta, b, x)
    assert 0 < h <= 1 + 1e-14
    assert reflected_hit_lt(drift, theta * 1.5, b, x) <= h + 1e-15


def test_exit_transforms_at_the_barriers():
    d = DriftSpec(0.4, -0.3, 1.0)
    assert np.allclose(two_sided_exit_lt(d, 1.0, 2.0, 0.0), (1.0, 0.0), atol=1e-14)
    assert np.allclose(two_sided_exit_lt(d, 1.0, 2.0, 2.0), (0.0, 1.0), atol=1e-14)
    assert abs(reflected_hit_lt(d, 1.0, 2.0, 2.0) - 1.0) < 1e-14
    with pytest.raises(ValueError):
        two_sided_exit_lt(d, 1.0, 2.0, 2.5)
    with pytest.raises(ValueError):
        reflected_hit_lt(d, 0.0, 2.0, 1.0)


# -- jump-time transforms ----------------------------------------------------

@given(drift_st, boundary_st, theta_st, st.floats(0.05, 1.0), st.sampled_from(["free", "reflected"]))
def test_alpha_zero_sum_rule(drift, boundary, theta, frac, system):
    q = _quad(system)(drift, boundary, 0.0, theta, frac * boundary.b)
    lam = boundary.lam
    assert abs(q[0] + q[1] - lam / (lam + theta)) < 1e-12


@given(drift_st, boundary_st, theta_st, alpha_st, st.floats(0.05, 1.0),
       st.sampled_from(["free", "reflected"]))
def test_dominance_and_bounds(drift, boundary, theta, alpha, frac, system):
    q = _quad(system)(drift, boundary, alpha, theta, frac * boundary.b)
    assert q[2] <= q[0] + 1e-12 and q[3] <= q[1] + 1e-12
    assert min(q) >= -1e-12
    # values on {X >= c} or for the reflected process involve exp(-alpha X) <= 1
    assert q[1] <= 1 and q[3] <= 1
    if system == "reflected":
        assert max(q) <= 1


@given(drift_st, boundary_st, theta_st, alpha_st, st.floats(0.05, 0.95),
       st.sampled_from(["free", "reflected"]))
def test_closed_form_matches_killed_route(drift, boundary, theta, alpha, frac, system):
    s = boundary.lam + theta
    assume(alpha < drift.mu1 + math.sqrt(drift.mu1 ** 2 + 2 * s) - 0.05)
    x = frac * boundary.b
    q = _quad(system)(drift, boundary, alpha, theta, x)
    lo = -INF if system == "free" else 0.0
    below = PiecewiseExpPayoff.exponential(-alpha, lo, drift.c)
    above = PiecewiseExpPayoff.exponential(-alpha, drift.c, INF)
    k1 = killed_expectation(system, drift, boundary, theta, x, below)
    k2 = killed_expectation(system, drift, boundary, theta, x, above)
    assert abs((q[0] - q[2]) - k1) <= 1e-9 * max(1.0, abs(k1))
    assert abs((q[1] - q[3]) - k2) <= 1e-9 * max(1.0, abs(k2))


@given(drift_st, theta_st, alpha_st, st.floats(0.0, 2.5), st.sampled_from(["free", "reflected"]))
def test_closed_form_matches_resolvent_integral(drift, theta, alpha, z, system):
    lam = 0.8
    s = lam + theta
    assume(alpha < drift.mu1 + math.sqrt(drift.mu1 ** 2 + 2 * s) - 0.05)
    k = GreenKernel(system, drift, s)
    lo = -INF if system == "free" else 0.0
    r1 = lam * k.integrate(z, PiecewiseExpPayoff.exponential(-alpha, lo, drift.c)).real
    r2 = lam * k.integrate(z, PiecewiseExpPayoff.exponential(-alpha, drift.c, INF)).real
    p1, p2 = phi_closed_form(system, drift, lam, theta, alpha, z)
    assert abs(p1 - r1) <= 1e-9 * max(1.0, abs(r1))
    assert abs(p2 - r2) <= 1e-9 * max(1.0, abs(r2))


def test_uncorrected_form_misses_the_threshold_term():
    d = DriftSpec(0.4, -0.2, 1.0)
    k = GreenKernel("free", d, 1.7)
    exact = 1.0 * k.integrate(0.5, PiecewiseExpPayoff.exponential(-0.6, -INF, 1.0)).real
    lit, _ = phi_closed_form("free", d, 1.0, 0.7, 0.6, 0.5, form="uncorrected")
    fixed, _ = phi_closed_form("free", d, 1.0, 0.7, 0.6, 0.5)
    assert abs(fixed - exact) < 1e-12
    assert abs(lit - exact) > 1e-3


@pytest.mark.parametrize("system", ["free", "reflected"])
def test_uniform_drift_collapses_to_single_regime_formula(system):
    mu, lam, theta = 0.3, 1.2, 0.6
    s = lam + theta
    d = DriftSpec(mu, mu, 1.0)
    B = BoundarySpec.fixed_jump(2.0, lam, 1.0)
    lm = -mu - math.sqrt(mu * mu + 2 * s)
    for alpha in (0.2, 0.7, 1.1):
        den = s + alpha * mu - 0.5 * alpha * alpha
        for x in (0.3, 1.0, 1.6):
            q = _quad(system)(d, B, alpha, theta, x)
            if system == "free":
                want = lam * math.exp(-alpha * x) / den
            else:
                # reflection adds the local-time term alpha * G~_s(x, 0) / 2
                want = lam * (math.exp(-alpha * x) + alpha * math.exp(lm * x) / lm) / den
            assert abs(q[0] + q[1] - want) < 1e-10


def test_start_on_the_barrier_restarts_immediately():
    d, B = DriftSpec(0.4, -0.2, 1.0), BoundarySpec.fixed_jump(2.0, 1.0, 1.0)
    q = phi_tilde_quadruple(d, B, 0.6, 0.7, 2.0)
    assert abs(q[2] - q[0]) < 1e-14 and abs(q[3] - q[1]) < 1e-14


@pytest.mark.parametrize("system", ["free", "reflected"])
def test_removable_pole_is_extrapolated(system):
    d, B = DriftSpec(0.4, -0.2, 1.0), BoundarySpec.fixed_jump(2.0, 1.0, 1.0)
    theta = 0.7
    s = B.lam + theta
    alpha = d.mu2 + math.sqrt(d.mu2 ** 2 + 2 * s)  # zero of s + alpha mu2 - alpha^2 / 2
    f = _quad(system)
    at = np.array(f(d, B, alpha, theta, 1.0))
    near = 0.5 * (np.array(f(d, B, alpha + 1e-3, theta, 1.0)) + np.array(f(d, B, alpha - 1e-3, theta, 1.0)))
    assert np.all(np.isfinite(at))
    assert np.max(np.abs(at - near)) < 1e-5


def test_pole_error_is_a_arithmetic_error():
    assert issubclass(PoleError, ArithmeticError)


# -- g functions against a time-domain oracle ---------------------------------

@pytest.mark.parametrize("system", ["free", "reflected"])
@pytest.mark.parametrize("x", [0.4, 1.6])
def test_occupation_term_matches_time_domain_oracle(system, x):
    d, B = DriftSpec(0.4, -0.2, 1.0), BoundarySpec.fixed_jump(2.0, 1.0, 1.0)
    theta = 0.5
    s = B.lam + theta
    g = g_functions(system, d, B, theta, x)
    g = g if system == "free" else g[0]
    oracle = B.lam * time_domain_transform(lambda t: upper_probability(system, d, t, x, d.c), s)
    assert abs(g - oracle) < 1e-4
    assert 0 <= g <= B.lam / s


@pytest.mark.parametrize("x", [0.3, 1.2])
def test_local_time_term_matches_time_domain_oracle(x):
    d, B = DriftSpec(0.4, -0.2, 1.0), BoundarySpec.fixed_jump(2.0, 1.0, 1.0)
    theta = 0.5
    s = B.lam + theta
    _, g1 = g_functions("reflected", d, B, theta, x)
    # E[e^{-theta T1} p~(T1; x, 0)] = lam * int e^{-s t} p~(t; x, 0) dt
    oracle = B.lam * time_domain_transform(lambda t: transition_density("reflected", d, t, x, 0.0), s)
    assert abs(g1 - oracle / (2 * B.lam)) < 1e-4
    assert g1 > 0


# -- killed expectation --------------------------------------------------------

@given(drift_st, boundary_st, theta_st, st.floats(0.05, 0.95), st.sampled_from(["free", "reflected"]))
def test_killed_expectation_of_one(drift, boundary, theta, frac, system):
    x = frac * boundary.b
    lo = -INF if system == "free" else 0.0
    k = killed_expectation(system, drift, boundary, theta, x, PiecewiseExpPayoff.indicator(lo, INF))
    s = boundary.lam + theta
    if system == "free":
        w1, w2 = two_sided_exit_lt(drift, s, boundary.b, x)
        want = boundary.lam / s * (1 - w1 - w2)
    else:
        want = boundary.lam / s * (1 - reflected_hit_lt(drift, s, boundary.b, x))
    assert abs(k - want) < 1e-12


def test_killed_expectation_vanishes_at_the_barriers():
    d, B = DriftSpec(0.4, -0.2, 1.0), BoundarySpec.fixed_jump(2.0, 1.0, 1.0)
    h = PiecewiseExpPayoff.indicator(-INF, INF)
    for x in (1e-9, 2.0 - 1e-9):
        assert abs(killed_expectation("free", d, B, 0.5, x, h)) < 1e-7


# -- joint transform -------------------------------------------------------------

@given(drift_st, boundary_st, theta_st, alpha_st, st.floats(0.05, 0.95),
       st.sampled_from(["free", "reflected"]))
def test_joint_transform_is_a_laplace_transform(drift, boundary, theta, alpha, frac, system):
    x = frac * boundary.b
    for v in variant_labels(system):
        a = joint_lt(system, drift, boundary, TransformQuery(alpha, theta, x), v)
        b = joint_lt(system, drift, boundary, TransformQuery(alpha, theta * 1.3, x), v)
        assert 0 < a <= 1 and b < a


@given(drift_st, boundary_st, theta_st, alpha_st)
def test_reflected_joint_transform_increases_with_start(drift, boundary, theta, alpha):
    xs = np.linspace(0.0, boundary.b, 9)
    vals = [joint_lt("reflected", drift, boundary, TransformQuery(alpha, theta, x)) for x in xs]
    assert np.all(np.diff(vals) > -1e-13)


def test_reflected_process_hits_surely_under_the_post_jump_rate_theta():
    d, B = DriftSpec(0.4, -0.2, 1.0), BoundarySpec.fixed_jump(2.0, 1.0, 1.0)
    q = TransformQuery(0.0, 1e-8, 0.5)
    for v in variant_labels("reflected"):
        val = joint_lt("reflected", d, B, q, v)
        if v.endswith("theta-only"):
            assert abs(val - 1) < 1e-4
        else:
            # discounting the post-jump phase at lam + theta loses mass
            assert val < 0.5


def test_vanishing_jump_reduces_to_constant_boundary():
    d = DriftSpec(0.4, -0.2, 1.0)
    B = BoundarySpec.fixed_jump(2.0, 1.0, 1e-9)
    w1, w2 = two_sided_exit_lt(d, 0.5, 2.0, 1.0)
    v = joint_lt("free", d, B, TransformQuery(0.3, 0.5, 1.0), MVariant.THETA_ONLY)
    assert abs(v - (w1 + math.exp(-0.6) * w2)) < 1e-8
    want = math.exp(-0.6) * reflected_hit_lt(d, 0.5, 2.0, 1.0)
    v = joint_lt("reflected", d, B, TransformQuery(0.3, 0.5, 1.0), "post-jump/theta-only")
    assert abs(v - want) < 1e-8
    # restarting from the initial point instead of the position at the jump
    # does not reduce to the constant-boundary transform
    v = joint_lt("reflected", d, B, TransformQuery(0.3, 0.5, 1.0), "start-point/theta-only")
    assert abs(v - want) > 1e-3


def test_degenerate_starts_are_flagged():
    d, B = DriftSpec(0.4, -0.2, 1.0), BoundarySpec.fixed_jump(2.0, 1.0, 1.0)
    v = joint_lt("reflected", d, B, TransformQuery(0.3, 0.5, 2.0))
    assert v.degenerate and abs(v - math.exp(-0.6)) < 1e-15
    v = joint_lt("free", d, B, TransformQuery(0.3, 0.5, 0.0))
    assert v.degenerate and v == 1.0
    assert not joint_lt("free", d, B, TransformQuery(0.3, 0.5, 1.0)).degenerate


def test_continuous_jump_law_converges_to_atoms_average():
    d = DriftSpec(0.4, -0.2, 1.0)
    u = BoundarySpec(2.0, 1.0, density=lambda y: np.full_like(y, 0.5), support=(0.5, 2.5))
    q = TransformQuery(0.3, 0.5, 1.0)
    v = joint_lt("free", d, u, q, "theta-only")
    ys, ws = np.polynomial.legendre.leggauss(200)
    atoms = tuple(zip(1.5 + ys, ws / 2))
    ref = joint_lt("free", d, BoundarySpec(2.0, 1.0, atoms=atoms), q, "theta-only")
    assert abs(v - ref) < 1e-8


def test_boundary_validation():
    with pytest.raises(ValueError):
        BoundarySpec.fixed_jump(2.0, 1.0, -0.5)
    with pytest.raises(ValueError):
        BoundarySpec(2.0, 1.0, atoms=((1.0, 0.5), (2.0, 0.4)))
    with pytest.raises(ValueError):
        BoundarySpec(-1.0, 1.0, atoms=((1.0, 1.0),))
    with pytest.raises(ValueError):
        BoundarySpec(2.0, 1.0, density=lambda y: np.ones_like(y), support=(0.0, 2.0))
    with pytest.raises(ValueError):
        TransformQuery(-0.1, 1.0, 1.0)
    with pytest.raises(ValueError):
        TransformQuery(0.1, 0.0, 1.0)


def test_unknown_variant_is_rejected():
    d, B = DriftSpec(0.4, -0.2, 1.0), BoundarySpec.fixed_jump(2.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        joint_lt("free", d, B, TransformQuery(0.3, 0.5, 1.0), "start-point/theta-only")
    with pytest.raises(ValueError):
        joint_lt("reflected", d, B, TransformQuery(0.3, 0.5, 1.0), "sideways/theta-only")


def test_default_variant_is_the_post_jump_rate_theta():
    d, B = DriftSpec(0.4, -0.2, 1.0), BoundarySpec.fixed_jump(2.0, 1.0, 1.0)
    q = TransformQuery(0.3, 0.5, 1.0)
    assert joint_lt("free", d, B, q) == joint_lt("free", d, B, q, "theta-only")
    assert joint_lt("reflected", d, B, q) == joint_lt("reflected", d, B, q, "post-jump/theta-only")
