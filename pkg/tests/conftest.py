from __future__ import annotations

import math

import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from brokenfpt.inversion import transition_density
from brokenfpt.spectral import DriftSpec, ExpTerms

settings.register_profile(
    "repo", derandomize=True, deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

drifts = st.builds(
    DriftSpec,
    mu1=st.floats(-1.5, 1.5),
    mu2=st.floats(-1.5, 1.5),
    c=st.floats(0.2, 2.0),
)
real_freqs = st.floats(0.05, 8.0)
complex_freqs = st.builds(complex, st.floats(0.1, 5.0), st.floats(-30.0, 30.0))


def second_derivative(terms: ExpTerms, x: float) -> complex:
    return complex(ExpTerms(terms.pre * terms.rate ** 2, terms.shift, terms.rate)(x))


def first_derivative(terms: ExpTerms, x: float) -> complex:
    return complex(ExpTerms(terms.pre * terms.rate, terms.shift, terms.rate)(x))


def ode_residual(pieces, drift: DriftSpec, s, x: float) -> float:
    """Relative residual of ``f''/2 + mu f' - s f`` on the piece containing ``x``."""
    for p in pieces:
        if p.lo <= x < p.hi:
            t = p.terms
            break
    f = complex(t(x))
    d1 = first_derivative(t, x)
    d2 = second_derivative(t, x)
    mu = drift.mu1 if x < drift.c else drift.mu2
    res = 0.5 * d2 + mu * d1 - s * f
    scale = abs(0.5 * d2) + abs(mu * d1) + abs(s * f)
    return abs(res) / scale if scale > 0 else 0.0


def heat_kernel(t, x, y):
    return math.exp(-(y - x) ** 2 / (2 * t)) / math.sqrt(2 * math.pi * t)


def time_domain_transform(f, s, nodes=48, horizon=None):
    """``int_0^inf exp(-s t) f(t) dt`` with ``t = u^2`` and Gauss-Legendre in ``u``."""
    horizon = horizon or math.sqrt(40.0 / s)
    g, w = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * horizon * (g + 1)
    return sum(0.5 * horizon * wi * 2 * ui * math.exp(-s * ui * ui) * f(ui * ui)
               for ui, wi in zip(u, w))


def upper_probability(system, drift, t, x, level):
    hi = max(level, x) + 10 * math.sqrt(t) + 2 * t
    cuts = sorted({level, hi} | ({x} if level < x < hi else set()))
    g, w = np.polynomial.legendre.leggauss(60)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        ys = 0.5 * (b - a) * g + 0.5 * (a + b)
        total += 0.5 * (b - a) * np.dot(w, transition_density(system, drift, t, x, ys))
    return total
