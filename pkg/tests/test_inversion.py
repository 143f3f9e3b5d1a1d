from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brokenfpt.inversion import (
    InversionError,
    InversionParams,
    chapman_kolmogorov_gap,
    gaver_stehfest_density,
    invert_laplace,
    probability_mass,
    stehfest_weights,
    transition_density,
)
from brokenfpt.spectral import DriftSpec
from conftest import heat_kernel

KNOWN_PAIRS = [
    ("constant", lambda s: 1 / s, lambda t: 1.0),
    ("exponential", lambda s: 1 / (s + 1), lambda t: math.exp(-t)),
    ("inverse-sqrt", lambda s: 1 / np.sqrt(s), lambda t: 1 / math.sqrt(math.pi * t)),
    ("ramp", lambda s: 1 / s ** 2, lambda t: t),
    ("sine", lambda s: 1 / (s * s + 1), lambda t: math.sin(t)),
    ("heat-kernel", lambda s: np.exp(-np.sqrt(s)) / np.sqrt(s),
     lambda t: math.exp(-1 / (4 * t)) / math.sqrt(math.pi * t)),
]


@pytest.mark.parametrize("name,F,f", KNOWN_PAIRS, ids=[p[0] for p in KNOWN_PAIRS])
@pytest.mark.parametrize("t", [0.3, 1.0, 2.5])
def test_euler_inverts_known_pairs(name, F, f, t):
    assert abs(invert_laplace(F, t) - f(t)) < 1e-9


@pytest.mark.parametrize("name,F,f", KNOWN_PAIRS[:4], ids=[p[0] for p in KNOWN_PAIRS[:4]])
def test_extended_precision_stehfest_inverts_known_pairs(name, F, f):
    import mpmath

    params = InversionParams(method="gaver-stehfest", terms=32, precision=50)
    G = {"constant": lambda s: 1 / s, "exponential": lambda s: 1 / (s + 1),
         "inverse-sqrt": lambda s: 1 / mpmath.sqrt(s), "ramp": lambda s: 1 / s ** 2}[name]
    assert abs(invert_laplace(G, 1.3, params) - f(1.3)) < 1e-9


def test_stehfest_weights_sum_to_zero_and_are_exact():
    for n in (8, 12, 16):
        w = stehfest_weights(n)
        assert len(w) == n
        assert abs(sum(Fraction(x) for x in w)) < Fraction(1, 10 ** 6)


def test_parameter_validation():
    with pytest.raises(ValueError):
        InversionParams(method="talbot")
    with pytest.raises(ValueError):
        InversionParams(method="gaver-stehfest", terms=31, precision=50)
    with pytest.raises(ValueError):
        InversionParams(method="gaver-stehfest", terms=24)  # too many for float64
    with pytest.raises(ValueError):
        InversionParams(terms=4)


def test_cross_validation_flags_disagreement():
    # a transform with a singularity right of the Bromwich line is inverted
    # inconsistently by the two methods
    bad = lambda s: 1 / (s - 40.0)
    with pytest.raises(InversionError):
        invert_laplace(bad, 1.0, InversionParams(cross_validate=True))


drift_st = st.builds(DriftSpec, st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(0.3, 1.5))


@settings(max_examples=6)
@given(drift_st, st.sampled_from(["free", "reflected"]), st.floats(0.3, 1.5), st.floats(0.0, 2.0))
def test_densities_integrate_to_one(drift, system, t, x):
    total, _, _ = probability_mass(system, drift, t, x)
    assert abs(total - 1.0) < 1e-8


@settings(max_examples=6)
@given(drift_st, st.sampled_from(["free", "reflected"]), st.floats(0.3, 1.5),
       st.floats(0.0, 2.0), st.floats(0.0, 2.5))
def test_euler_and_extended_stehfest_agree(drift, system, t, x, y):
    e = transition_density(system, drift, t, x, y)
    g = gaver_stehfest_density(system, drift, t, x, y)
    assert abs(e - g) < 1e-7


def test_driftless_densities_collapse_to_heat_kernels():
    d = DriftSpec(0.0, 0.0, 1.0)
    for x, y in ((0.0, 0.0), (0.5, 1.5), (1.0, 0.2)):
        free = transition_density("free", d, 1.0, x, y)
        refl = transition_density("reflected", d, 1.0, x, y)
        assert abs(free - heat_kernel(1.0, x, y)) < 1e-9
        assert abs(refl - heat_kernel(1.0, x, y) - heat_kernel(1.0, -x, y)) < 1e-9


def test_uniform_drift_density_is_a_shifted_gaussian():
    d = DriftSpec(0.7, 0.7, 1.0)
    for t, x, y in ((0.5, 0.0, 0.5), (1.0, 1.0, 2.2), (2.0, -1.0, 0.0)):
        want = heat_kernel(t, x + 0.7 * t, y)
        assert abs(transition_density("free", d, t, x, y) - want) < 1e-9


def test_chapman_kolmogorov():
    d = DriftSpec(0.4, -0.2, 1.0)
    assert chapman_kolmogorov_gap("free", d, 0.4, 0.6, 0.7, 1.2) < 1e-8
    assert chapman_kolmogorov_gap("reflected", d, 0.5, 0.5, 0.3, 1.0) < 1e-8


def test_broken_drift_density_has_a_kink_not_a_jump_at_the_threshold():
    d = DriftSpec(1.0, -1.0, 1.0)
    row = transition_density("free", d, 1.0, 0.3, np.array([1 - 1e-7, 1 + 1e-7]))
    assert abs(row[0] - row[1]) < 1e-6


def test_vectorized_evaluation_matches_scalar():
    d = DriftSpec(0.4, -0.2, 1.0)
    ys = np.linspace(-1, 3, 7)
    vec = transition_density("free", d, 0.8, 0.5, ys)
    for y, v in zip(ys, vec):
        assert abs(transition_density("free", d, 0.8, 0.5, float(y)) - v) < 1e-14
