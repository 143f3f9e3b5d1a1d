"""Resolvent (Green) functions of the free and reflected broken-drift diffusions.

``G_s(x, y) = m(y) psi_s(min(x, y)) phi_s(max(x, y)) / w_s`` is the Laplace
transform in time of the transition density.  Integrals of ``G_s(x, .)``
against piecewise-exponential payoffs are done in closed form.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .spectral import (
    INF,
    DriftSpec,
    ExpTerms,
    Piece,
    check_frequency,
    check_system,
    piece_at,
    solution_pieces,
    speed_pieces,
    wronskian_terms,
)

__all__ = [
    "PiecewiseExpPayoff",
    "GreenKernel",
    "green",
    "green_branch",
    "resolvent_integral",
    "tail_mass",
]


def _lower_bound(system: str) -> float:
    return 0.0 if system == "reflected" else -INF


@dataclass(frozen=True)
class PiecewiseExpPayoff:
    """``h(y) = sum coeff * exp(rate * y)`` on disjoint ordered segments.

    ``segments`` holds ``(lower, upper, ExpTerms)``; outside all segments ``h``
    is zero.  Build with :meth:`from_terms`, :meth:`indicator` or
    :meth:`exponential` rather than by hand.
    """

    segments: tuple = field(default_factory=tuple)

    def __post_init__(self) -> None:
        prev = -INF
        for lo, hi, terms in self.segments:
            if not lo < hi:
                raise ValueError(f"empty or reversed segment [{lo}, {hi})")
            if lo < prev:
                raise ValueError("segments must be ordered and disjoint")
            if not isinstance(terms, ExpTerms):
                raise TypeError("segment terms must be ExpTerms")
            prev = hi

    @classmethod
    def from_terms(cls, segments: Iterable) -> "PiecewiseExpPayoff":
        """From ``(lower, upper, [(coeff, rate), ...])`` tuples."""
        segs = []
        for lo, hi, terms in segments:
            terms = list(terms)
            coeff = [complex(a) for a, _ in terms]
            rate = [complex(r) for _, r in terms]
            segs.append((float(lo), float(hi), ExpTerms(coeff, np.zeros(len(coeff)), rate)))
        return cls(tuple(segs))

    @classmethod
    def indicator(cls, lo: float = -INF, hi: float = INF) -> "PiecewiseExpPayoff":
        return cls(((float(lo), float(hi), ExpTerms.constant(1.0)),))

    @classmethod
    def exponential(cls, rate: complex, lo: float = -INF, hi: float = INF,
                    coeff: complex = 1.0) -> "PiecewiseExpPayoff":
        return cls(((float(lo), float(hi), ExpTerms([coeff], [0.0], [rate])),))

    @classmethod
    def from_pieces(cls, pieces: Sequence[Piece], lo: float = -INF,
                    hi: float = INF) -> "PiecewiseExpPayoff":
        """Restrict a piecewise solution to ``[lo, hi)``."""
        segs = []
        for p in pieces:
            a, b = max(p.lo, lo), min(p.hi, hi)
            if a < b:
                segs.append((a, b, p.terms))
        return cls(tuple(segs))

    def restricted(self, lo: float, hi: float) -> "PiecewiseExpPayoff":
        """``h * 1[lo, hi)``."""
        segs = []
        for a, b, t in self.segments:
            a, b = max(a, lo), min(b, hi)
            if a < b:
                segs.append((a, b, t))
        return PiecewiseExpPayoff(tuple(segs))

    def scaled(self, factor) -> "PiecewiseExpPayoff":
        """Multiply by a number or by a constant :class:`ExpTerms`."""
        return PiecewiseExpPayoff(tuple((lo, hi, t * factor) for lo, hi, t in self.segments))

    def __add__(self, other: "PiecewiseExpPayoff") -> "PiecewiseExpPayoff":
        cuts = sorted({e for lo, hi, _ in self.segments + other.segments for e in (lo, hi)})
        segs = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            mid = _midpoint(a, b)
            terms = ExpTerms.empty()
            for pay in (self, other):
                for lo, hi, t in pay.segments:
                    if lo <= mid < hi:
                        terms = terms + t
            if len(terms):
                segs.append((a, b, terms))
        return PiecewiseExpPayoff(tuple(segs))

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape, dtype=complex)
        last = len(self.segments) - 1
        for i, (lo, hi, t) in enumerate(self.segments):
            mask = (y >= lo) & (y < hi)
            if i == last:
                mask |= y == hi
            if mask.any():
                out[mask] = t(y[mask])
        return out[()] if out.ndim == 0 else out

    @property
    def support(self) -> tuple[float, float]:
        if not self.segments:
            return (0.0, 0.0)
        return (self.segments[0][0], self.segments[-1][1])


def _midpoint(a: float, b: float) -> float:
    if a == -INF and b == INF:
        return 0.0
    if a == -INF:
        return b - 1.0
    if b == INF:
        return a + 1.0
    return 0.5 * (a + b)


class GreenKernel:
    """Spectral pieces for one ``(system, drift, s)``; evaluates ``G_s`` quickly.

    ``green`` rebuilds this on every call; keep an instance around when many
    ``(x, y)`` pairs share one frequency.
    """

    def __init__(self, system: str, drift: DriftSpec, s):
        self.system = check_system(system)
        self.drift = drift
        self.s = check_frequency(s)
        self.psi = solution_pieces(system, "increasing", drift, self.s)
        self.phi = solution_pieces(system, "decreasing", drift, self.s)
        self.speed = speed_pieces(system, drift)
        self.inv_w = wronskian_terms(system, drift, self.s).reciprocal()
        self.lower = _lower_bound(system)

    def _check(self, *pts) -> None:
        if self.system == "reflected":
            for p in pts:
                if np.any(np.asarray(p) < 0):
                    raise ValueError("reflected Green function needs x, y >= 0")

    def __call__(self, x, y):
        self._check(x, y)
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        lo = np.minimum(x, y)
        hi = np.maximum(x, y)
        out = np.zeros(x.shape, dtype=complex)
        iw = self.inv_w
        # one product of terms per (psi-piece, phi-piece, speed-piece) combination
        for pp in self.psi:
            m_lo = (lo >= pp.lo) & ((lo < pp.hi) | (pp.hi == INF))
            if not m_lo.any():
                continue
            for fp in self.phi:
                m_hi = (hi >= fp.lo) & ((hi < fp.hi) | (fp.hi == INF))
                m = m_lo & m_hi
                if not m.any():
                    continue
                for sp in self.speed:
                    mm = m & (y >= sp.lo) & ((y < sp.hi) | (sp.hi == INF))
                    if not mm.any():
                        continue
                    a, b, yy = lo[mm], hi[mm], y[mm]
                    pre = (pp.terms.pre[:, None, None] * fp.terms.pre[None, :, None]
                           * sp.terms.pre[None, None, :]) * iw.pre[0]
                    sh = (pp.terms.shift[:, None, None] + fp.terms.shift[None, :, None]
                          + sp.terms.shift[None, None, :]) + iw.shift[0]
                    ex = (sh[None]
                          + np.multiply.outer(a, pp.terms.rate)[:, :, None, None]
                          + np.multiply.outer(b, fp.terms.rate)[:, None, :, None]
                          + np.multiply.outer(yy, sp.terms.rate)[:, None, None, :])
                    out[mm] = np.sum(pre[None] * np.exp(ex), axis=(1, 2, 3))
        return out[()] if out.ndim == 0 else out

    def kernel_terms(self, x: float, y_mid: float) -> ExpTerms:
        """``G_s(x, y)`` as an exponential sum in ``y`` on the piece holding ``y_mid``.

        The piece is determined by which side of ``x`` and of ``c`` the point
        ``y_mid`` falls.
        """
        if y_mid < x:
            const = piece_at(self.phi, x).terms.frozen_at(x)
            varying = piece_at(self.psi, y_mid).terms
        else:
            const = piece_at(self.psi, x).terms.frozen_at(x)
            varying = piece_at(self.phi, y_mid).terms
        return piece_at(self.speed, y_mid).terms * varying * const * self.inv_w

    def integrate(self, x: float, h: PiecewiseExpPayoff) -> complex:
        """Closed-form ``int G_s(x, y) h(y) dy``."""
        x = float(x)
        self._check(x)
        lower = self.lower
        cuts_inner = [x, self.drift.c]
        total = 0j
        for lo, hi, terms in h.segments:
            lo = max(lo, lower)
            if not lo < hi:
                continue
            edges = [lo] + sorted(e for e in cuts_inner if lo < e < hi) + [hi]
            for a, b in zip(edges[:-1], edges[1:]):
                kt = self.kernel_terms(x, _midpoint(a, b)) * terms
                total += kt.integral(a, b)
        return complex(total)


def green(system: str, drift: DriftSpec, s, x, y):
    """Resolvent density ``G_s(x, y)`` (vectorized over ``x`` and ``y``)."""
    return GreenKernel(system, drift, s)(x, y)


def green_branch(system: str, drift: DriftSpec, s, x: float, y: float, lib=cmath):
    """``G_s(x, y)`` written out case by case from the explicit branch formulas.

    Deliberately independent of :class:`GreenKernel`: plain coefficient values
    and the closed-form Wronskian, so it is only suitable for moderate
    ``|s| * c``.  ``lib`` supplies ``exp`` and ``sqrt``; pass :mod:`mpmath`
    (with ``s`` an mpmath number) for extended precision.
    """
    check_system(system)
    if lib is cmath:
        check_frequency(s)
        mu1, mu2, c = drift.mu1, drift.mu2, drift.c
    else:
        mu1, mu2, c = lib.mpf(drift.mu1), lib.mpf(drift.mu2), lib.mpf(drift.c)
        x, y = lib.mpf(x), lib.mpf(y)
    e = lib.exp
    r1 = lib.sqrt(mu1 ** 2 + 2 * s)
    r2 = lib.sqrt(mu2 ** 2 + 2 * s)
    l1p, l1m, l2p, l2m = -mu1 + r1, -mu1 - r1, -mu2 + r2, -mu2 - r2
    d1, d2 = l1p - l1m, l2p - l2m
    b1 = (l1p - l2m) / d1 * e((l2m - l1m) * c)
    b2 = (l2m - l1m) / d1 * e((l2m - l1p) * c)
    m_lo = 2 * e(2 * mu1 * y)
    m_hi = 2 * e(2 * (mu1 - mu2) * c) * e(2 * mu2 * y)
    if system == "free":
        a1 = (l2p - l1p) / d2 * e((l1p - l2m) * c)
        a2 = (l1p - l2m) / d2 * e((l1p - l2p) * c)
        w = (l1p - l2m) * e((l2m - l1m) * c)

        def low_psi(z):
            return e(l1p * z)
    else:
        if x < 0 or y < 0:
            raise ValueError("reflected Green function needs x, y >= 0")
        a1 = (l1p * (l2p - l1m) / d2 * e((l1m - l2m) * c)
              - l1m * (l2p - l1p) / d2 * e((l1p - l2m) * c))
        a2 = (l1p * (l1m - l2m) / d2 * e((l1m - l2p) * c)
              - l1m * (l1p - l2m) / d2 * e((l1p - l2p) * c))
        w = (-l1p * (l2m - l1m) * e((l2m - l1p) * c)
             - l1m * (l1p - l2m) * e((l2m - l1m) * c))

        def low_psi(z):
            return l1p * e(l1m * z) - l1m * e(l1p * z)

    def b_phi(z):
        return b1 * e(l1m * z) + b2 * e(l1p * z)

    def a_psi(z):
        return a1 * e(l2m * z) + a2 * e(l2p * z)

    if x < c:
        if y <= x:
            return m_lo / w * b_phi(x) * low_psi(y)
        if y < c:
            return m_lo / w * b_phi(y) * low_psi(x)
        return m_hi / w * low_psi(x) * e(l2m * y)
    if y < c:
        return m_lo / w * low_psi(y) * e(l2m * x)
    if y <= x:
        return m_hi / w * a_psi(y) * e(l2m * x)
    return m_hi / w * a_psi(x) * e(l2m * y)


def resolvent_integral(system: str, drift: DriftSpec, s, x: float,
                       h: PiecewiseExpPayoff) -> complex:
    """``int G_s(x, y) h(y) dy`` in closed form.

    Segments are split at ``x`` and ``c``; every sub-piece is an exponential
    sum whose antiderivative is explicit.  Unbounded segments whose terms do
    not decay raise ``ValueError``.
    """
    return GreenKernel(system, drift, s).integrate(x, h)


def tail_mass(system: str, drift: DriftSpec, s, x: float, level: float | None = None) -> complex:
    """``int_level^inf G_s(x, y) dy``; ``level`` defaults to the threshold ``c``."""
    if level is None:
        level = drift.c
    return resolvent_integral(system, drift, s, x, PiecewiseExpPayoff.indicator(level, INF))
