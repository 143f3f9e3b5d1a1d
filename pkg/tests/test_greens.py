from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from brokenfpt.greens import (
    GreenKernel,
    PiecewiseExpPayoff,
    green,
    green_branch,
    resolvent_integral,
    tail_mass,
)
from brokenfpt.spectral import INF, DriftSpec, speed_scale_densities
from conftest import complex_freqs, drifts, real_freqs

SYSTEMS = ("free", "reflected")


def _lo(system):
    return -INF if system == "free" else 0.0


@given(drifts, st.one_of(real_freqs, complex_freqs), st.sampled_from(SYSTEMS),
       st.floats(0.0, 3.0))
def test_resolvent_has_total_mass_one_over_s(drift, s, system, x):
    total = resolvent_integral(system, drift, s, x, PiecewiseExpPayoff.indicator(_lo(system), INF))
    assert abs(total - 1 / s) <= 1e-10 * abs(1 / s)


@given(drifts, st.one_of(real_freqs, complex_freqs), st.sampled_from(SYSTEMS),
       st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_branch_formulas_match_the_assembled_kernel(drift, s, system, x, y):
    a = green(system, drift, s, x, y)
    b = green_branch(system, drift, s, x, y)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(b))


@given(drifts, real_freqs, st.sampled_from(SYSTEMS), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_kernel_is_symmetric_in_speed_measure(drift, s, system, x, y):
    mx, _ = speed_scale_densities(system, drift, x)
    my, _ = speed_scale_densities(system, drift, y)
    lhs = green(system, drift, s, x, y) / my
    rhs = green(system, drift, s, y, x) / mx
    assert abs(lhs - rhs) <= 1e-10 * abs(rhs)


@given(drifts, real_freqs, st.sampled_from(SYSTEMS), st.floats(0.0, 3.0))
def test_kernel_is_positive_for_real_frequencies(drift, s, system, x):
    ys = np.linspace(0.0, 4.0, 21)
    assert np.all(green(system, drift, s, x, ys).real > 0)


@given(drifts, real_freqs, st.sampled_from(SYSTEMS), st.floats(0.0, 2.5),
       st.floats(-1.0, 1.0), st.floats(0.0, 1.5), st.floats(0.1, 2.0))
def test_closed_form_integral_matches_quadrature(drift, s, system, x, rate, lo, width):
    h = PiecewiseExpPayoff.exponential(rate, lo, lo + width)
    exact = resolvent_integral(system, drift, s, x, h)
    cuts = sorted({lo, lo + width} | {p for p in (x, drift.c) if lo < p < lo + width})
    g, w = np.polynomial.legendre.leggauss(40)
    approx = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        ys = 0.5 * (b - a) * g + 0.5 * (a + b)
        approx += 0.5 * (b - a) * np.sum(w * green(system, drift, s, x, ys) * np.exp(rate * ys))
    assert abs(exact - approx) <= 1e-9 * max(1.0, abs(exact))


@given(drifts, real_freqs, st.sampled_from(SYSTEMS), st.floats(0.0, 3.0))
def test_tail_mass_splits_total_mass(drift, s, system, x):
    k = GreenKernel(system, drift, s)
    below = k.integrate(x, PiecewiseExpPayoff.indicator(_lo(system), drift.c))
    above = tail_mass(system, drift, s, x)
    assert abs(below + above - 1 / s) < 1e-12 * max(1.0, 1 / s)
    assert 0 < above.real < 1 / s


def test_driftless_free_kernel_is_the_exponential_kernel():
    d = DriftSpec(0.0, 0.0, 0.5)
    s = 1.3
    r = math.sqrt(2 * s)
    for x, y in ((0.0, 0.0), (0.2, 1.7), (2.0, -1.0)):
        assert abs(green("free", d, s, x, y) - math.exp(-r * abs(x - y)) / r) < 1e-14


def test_driftless_reflected_kernel_is_the_image_sum():
    d = DriftSpec(0.0, 0.0, 0.5)
    s = 0.8
    r = math.sqrt(2 * s)
    for x, y in ((0.0, 0.0), (0.3, 1.1), (2.0, 0.4)):
        want = (math.exp(-r * abs(x - y)) + math.exp(-r * (x + y))) / r
        assert abs(green("reflected", d, s, x, y) - want) < 1e-14


def test_payoff_restriction():
    h = PiecewiseExpPayoff.exponential(-0.5, 0.0, 3.0).restricted(1.0, 2.0)
    assert h.support == (1.0, 2.0)
    d = DriftSpec(0.2, -0.1, 1.5)
    full = resolvent_integral("free", d, 1.0, 0.5, PiecewiseExpPayoff.exponential(-0.5, 1.0, 2.0))
    assert abs(resolvent_integral("free", d, 1.0, 0.5, h) - full) < 1e-15


def test_reflected_rejects_negative_points():
    with pytest.raises(ValueError):
        green("reflected", DriftSpec(0, 0, 1), 1.0, -0.1, 0.5)
    with pytest.raises(ValueError):
        green_branch("reflected", DriftSpec(0, 0, 1), 1.0, 0.5, -0.1)


def test_non_decaying_tail_is_rejected():
    h = PiecewiseExpPayoff.exponential(5.0, 0.0, INF)
    with pytest.raises(ValueError):
        resolvent_integral("free", DriftSpec(0, 0, 1), 0.5, 0.0, h)
