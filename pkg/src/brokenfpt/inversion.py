"""
Numerical Laplace inversion
===========================

Two methods are available:

``euler``
    Trapezoidal discretization of the Bromwich integral on a fixed line
    ``Re(s) = A / (2t)`` with Euler (binomial) averaging of the alternating
    tail [Abate & Whitt, Queueing Systems 10 (1992)].  Only frequencies with
    ``Re(s) > 0`` are touched, so principal-branch square roots are safe.

``gaver-stehfest``
    Real-axis Gaver functionals with Salzer summation.  In float64 it is
    limited to 18 terms and roughly 1e-5 accuracy; with ``precision`` set it
    runs in mpmath and the transform must accept mpmath numbers.

The transform ``F`` may return an array; the inversion is then applied
element-wise, which is how density rows over many ``y`` are tabulated with a
single set of spectral evaluations.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import mpmath
import numpy as np

from .greens import GreenKernel, PiecewiseExpPayoff, green_branch
from .spectral import INF, DriftSpec, check_system

__all__ = [
    "InversionParams",
    "InversionError",
    "invert_laplace",
    "stehfest_weights",
    "transition_density",
    "DensityRow",
    "probability_mass",
    "chapman_kolmogorov_gap",
    "gaver_stehfest_density",
]

log = logging.getLogger(__name__)

METHODS = ("euler", "gaver-stehfest")

#: Densities in [-CLAMP_LIMIT, 0) are clamped to 0; below that the inversion failed.
CLAMP_LIMIT = 1e-6


class InversionError(RuntimeError):
    """Inversion failed or the two methods disagree."""


@dataclass(frozen=True)
class InversionParams:
    """Settings for :func:`invert_laplace`.

    Parameters
    ----------
    method : {"euler", "gaver-stehfest"}
    terms : int
        Series length: the alternating-series length for ``euler`` (>= 10),
        the number of Stehfest weights for ``gaver-stehfest`` (even; <= 18
        in float64).
    abscissa_shift : float or None
        Real part of the Bromwich line (1/time).  ``None`` selects
        ``A / (2t)`` with ``A = ln(10) * digits`` and ``digits = -log10(target_tol)``.
    target_tol : float
        Discretization error target used for the default abscissa.
    averaging : int
        Number of binomial averaging terms in the Euler acceleration.
    precision : int or None
        Decimal digits for an mpmath Gaver-Stehfest run; ``None`` is float64.
    cross_validate : bool
        Also run the other method and raise :class:`InversionError` if they
        disagree by more than ``max(1e-6, 1e-6 |f|)``.
    stehfest_terms, stehfest_precision : int
        Gaver-Stehfest settings used by the cross-check.
    """

    method: str = "euler"
    terms: int = 40
    abscissa_shift: float | None = None
    target_tol: float = 1e-11
    averaging: int = 11
    precision: int | None = None
    cross_validate: bool = False
    stehfest_terms: int = 32
    stehfest_precision: int | None = 50

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.method == "euler" and self.terms < 10:
            raise ValueError("euler summation needs terms >= 10")
        if self.method == "gaver-stehfest":
            _check_stehfest(self.terms, self.precision)
        _check_stehfest(self.stehfest_terms, self.stehfest_precision)
        if self.abscissa_shift is not None and not self.abscissa_shift > 0:
            raise ValueError("abscissa_shift must be positive")
        if not 0 < self.target_tol < 1:
            raise ValueError("target_tol must lie in (0, 1)")
        if self.averaging < 0:
            raise ValueError("averaging must be >= 0")


def _check_stehfest(n: int, precision: int | None) -> None:
    if n % 2 or n < 2:
        raise ValueError("gaver-stehfest terms must be even and >= 2")
    if precision is None and n > 18:
        raise ValueError("float64 gaver-stehfest is ill-conditioned beyond 18 terms")
    if precision is not None and precision < 1.5 * n:
        raise ValueError(f"{n} gaver-stehfest terms need precision >= {1.5 * n:g} digits")


@lru_cache(maxsize=None)
def _stehfest_fractions(n: int) -> tuple[Fraction, ...]:
    half = n // 2
    fact = math.factorial
    out = []
    for k in range(1, n + 1):
        acc = Fraction(0)
        for j in range((k + 1) // 2, min(k, half) + 1):
            num = j ** half * fact(2 * j)
            den = fact(half - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k)
            acc += Fraction(num, den)
        out.append((-1) ** (k + half) * acc)
    return tuple(out)


def stehfest_weights(n: int) -> tuple[float, ...]:
    """Salzer weights ``V_k`` for ``k = 1..n`` rounded to float64."""
    return tuple(float(v) for v in _stehfest_fractions(n))


def _euler_nodes(t: float, params: InversionParams):
    if params.abscissa_shift is None:
        a = math.log(10.0) * (-math.log10(params.target_tol))
        gamma = a / (2.0 * t)
    else:
        gamma = params.abscissa_shift
    n, m = params.terms, params.averaging
    k = np.arange(n + m + 1)
    nodes = gamma + 1j * np.pi * k / t
    signs = np.where(k % 2 == 0, 1.0, -1.0)
    signs[0] = 0.5
    # binomial average of partial sums s_n..s_{n+m}: term k enters every s_j with j >= k
    binom = np.array([math.comb(m, j) for j in range(m + 1)], dtype=float) / 2.0 ** m
    tail = np.cumsum(binom[::-1])[::-1]
    w = np.ones(n + m + 1)
    w[n + 1:] = tail[1:]
    return nodes, signs * w * math.exp(gamma * t) / t


def _stehfest_nodes(t: float, n: int):
    ln2t = math.log(2.0) / t
    k = np.arange(1, n + 1)
    return k * ln2t + 0j, np.asarray(stehfest_weights(n)) * ln2t


def _apply(F: Callable, nodes, weights):
    acc = None
    for s, w in zip(nodes, weights):
        v = np.real(np.asarray(F(complex(s)), dtype=complex)) * w
        acc = v if acc is None else acc + v
    return acc


def _stehfest_mp(F: Callable, t: float, n: int, precision: int) -> float:
    with mpmath.workdps(precision):
        ln2t = mpmath.log(2) / mpmath.mpf(t)
        acc = mpmath.mpf(0)
        for k, v in enumerate(_stehfest_fractions(n), start=1):
            acc += mpmath.mpf(v.numerator) / v.denominator * mpmath.re(F(k * ln2t))
        return float(acc * ln2t)


def _run(F: Callable, t: float, method: str, terms: int, precision: int | None,
         params: InversionParams):
    if method == "euler":
        return _apply(F, *_euler_nodes(t, params))
    if precision is None:
        return _apply(F, *_stehfest_nodes(t, terms))
    return _stehfest_mp(F, t, terms, precision)


def invert_laplace(F: Callable, t: float, params: InversionParams | None = None,
                   F_check: Callable | None = None):
    """Time-domain value ``f(t)`` of the transform ``F``.

    ``F`` receives one frequency at a time and may return a scalar or an
    array.  With ``params.cross_validate`` the other method is also run (on
    ``F_check`` if given, e.g. an mpmath-capable version of ``F``) and an
    :class:`InversionError` is raised on disagreement; the returned value is
    always the primary method's.
    """
    params = params or InversionParams()
    t = float(t)
    if not t > 0:
        raise ValueError("inversion time must be positive")
    out = _run(F, t, params.method, params.terms, params.precision, params)
    if params.cross_validate:
        G = F_check or F
        if params.method == "euler":
            other = _run(G, t, "gaver-stehfest", params.stehfest_terms,
                         params.stehfest_precision, params)
        else:
            other = _run(G, t, "euler", 40, None, InversionParams())
        gap = np.abs(out - other)
        if np.any(gap > np.maximum(1e-6, 1e-6 * np.abs(out))):
            raise InversionError(
                f"euler and gaver-stehfest disagree at t={t}: max gap {np.max(gap):.3e}"
            )
    if np.ndim(out) == 0:
        return float(out)
    return out


@lru_cache(maxsize=64)
def _node_kernels(system: str, drift: DriftSpec, t: float, params: InversionParams):
    if params.method == "euler":
        nodes, weights = _euler_nodes(t, params)
    else:
        nodes, weights = _stehfest_nodes(t, params.terms)
    return tuple(GreenKernel(system, drift, s) for s in nodes), weights


class DensityRow:
    """``y -> p(t; x, y)`` for fixed ``(system, drift, t, x)``.

    Spectral data for every inversion node is built once and shared through
    a module cache, so repeated calls over different ``y`` are cheap.
    """

    def __init__(self, system: str, drift: DriftSpec, t: float, x,
                 params: InversionParams | None = None):
        self.system = check_system(system)
        self.drift = drift
        self.t = float(t)
        if not self.t > 0:
            raise ValueError("t must be positive")
        self.x = x
        self.params = params or InversionParams()
        if self.params.method == "gaver-stehfest" and self.params.precision is not None:
            raise ValueError("density rows need a float64 method; use invert_laplace "
                             "with green_branch for mpmath gaver-stehfest")
        self.kernels, self.weights = _node_kernels(system, drift, self.t, self.params)
        #: largest negative value clamped to zero so far
        self.clamped = 0.0

    def raw(self, y):
        """Unclamped inversion."""
        acc = None
        for k, w in zip(self.kernels, self.weights):
            v = np.real(k(self.x, y)) * w
            acc = v if acc is None else acc + v
        return acc

    def __call__(self, y):
        p = np.asarray(self.raw(y), dtype=float)
        if self.params.cross_validate:
            self._cross_check(y, p)
        neg = p < 0
        if neg.any():
            worst = float(-p[neg].min())
            if worst > CLAMP_LIMIT:
                raise InversionError(f"inverted density is negative ({-worst:.3e})")
            self.clamped = max(self.clamped, worst)
            log.info("clamped %d negative density values (max %.2e)", int(neg.sum()), worst)
            p = np.where(neg, 0.0, p)
        return float(p) if p.ndim == 0 else p

    def _cross_check(self, y, p) -> None:
        xs, ys = np.broadcast_arrays(np.asarray(self.x, dtype=float), np.asarray(y, dtype=float))
        pp = np.broadcast_to(p, xs.shape)
        for xi, yi, pi in zip(xs.ravel(), ys.ravel(), pp.ravel()):
            other = gaver_stehfest_density(self.system, self.drift, self.t, xi, yi, self.params)
            if abs(other - pi) > max(1e-6, 1e-6 * abs(pi)):
                raise InversionError(
                    f"euler and gaver-stehfest disagree at (t={self.t}, x={xi}, y={yi}): "
                    f"{pi!r} vs {other!r}"
                )


def gaver_stehfest_density(system: str, drift: DriftSpec, t: float, x: float, y: float,
                           params: InversionParams | None = None) -> float:
    """Real-axis inversion of the explicit branch formulas (independent route)."""
    params = params or InversionParams()
    n, prec = params.stehfest_terms, params.stehfest_precision
    if prec is None:
        return float(_apply(lambda s: green_branch(system, drift, s, x, y),
                            *_stehfest_nodes(t, n)))
    return _stehfest_mp(lambda s: green_branch(system, drift, s, x, y, lib=mpmath), t, n, prec)


def transition_density(system: str, drift: DriftSpec, t: float, x, y,
                       params: InversionParams | None = None):
    """Transition density ``p(t; x, y)`` by inverting ``G_s(x, y)``.

    ``x`` and ``y`` may be arrays (broadcast).  Small negative values from
    inversion round-off are clamped to zero; see :data:`CLAMP_LIMIT`.
    """
    return DensityRow(system, drift, t, x, params)(y)


def _gauss_grid(edges, nodes_per_unit: float, min_nodes: int = 16):
    gx, gw = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(min_nodes, int(math.ceil((b - a) * nodes_per_unit)))
        u, w = np.polynomial.legendre.leggauss(n)
        gx.append(0.5 * (b - a) * u + 0.5 * (a + b))
        gw.append(0.5 * (b - a) * w)
    return np.concatenate(gx), np.concatenate(gw)


def probability_mass(system: str, drift: DriftSpec, t: float, x: float,
                     params: InversionParams | None = None, half_width: float | None = None):
    """``int p(t; x, y) dy`` as Gauss-Legendre quadrature plus inverted tails.

    The body ``[x - half_width, x + half_width]`` is split at ``x`` and ``c``;
    the mass beyond it comes from inverting the closed-form tail transforms.
    Returns ``(total, body, tails)``.
    """
    params = params or InversionParams()
    mu = max(abs(drift.mu1), abs(drift.mu2))
    if half_width is None:
        half_width = 6.0 * math.sqrt(t) + mu * t
    lo = x - half_width
    hi = x + half_width
    if system == "reflected":
        lo = max(lo, 0.0)
    cuts = sorted({lo, hi, x} | ({drift.c} if lo < drift.c < hi else set()))
    yq, wq = _gauss_grid(cuts, nodes_per_unit=48.0 / math.sqrt(t))
    body = float(np.dot(wq, DensityRow(system, drift, t, x, params).raw(yq)))
    upper = PiecewiseExpPayoff.indicator(hi, INF)
    tail_fns = [lambda s: GreenKernel(system, drift, s).integrate(x, upper)]
    if system == "free":
        lower = PiecewiseExpPayoff.indicator(-INF, lo)
        tail_fns.append(lambda s: GreenKernel(system, drift, s).integrate(x, lower))
    tails = sum(invert_laplace(f, t, params) for f in tail_fns)
    return body + tails, body, tails


def chapman_kolmogorov_gap(system: str, drift: DriftSpec, t1: float, t2: float,
                           x: float, y: float, params: InversionParams | None = None) -> float:
    """``|int p(t1; x, z) p(t2; z, y) dz - p(t1 + t2; x, y)|`` by quadrature in ``z``."""
    params = params or InversionParams()
    tt = t1 + t2
    half = 9.0 * math.sqrt(tt) + max(abs(drift.mu1), abs(drift.mu2)) * tt
    lo = min(x, y) - half
    hi = max(x, y) + half
    if system == "reflected":
        lo = 0.0
    cuts = sorted({lo, hi, x, y} | ({drift.c} if lo < drift.c < hi else set()))
    z, w = _gauss_grid(cuts, nodes_per_unit=48.0 / math.sqrt(min(t1, t2)))
    left = DensityRow(system, drift, t1, x, params)(z)
    right = DensityRow(system, drift, t2, z, params)(y)
    lhs = float(np.dot(w, left * right))
    rhs = float(DensityRow(system, drift, tt, x, params)(y))
    return abs(lhs - rhs)
