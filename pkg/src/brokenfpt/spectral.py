"""
Fundamental solutions of the broken-drift generator
===================================================

For the unit-variance diffusion with drift ``mu1`` below a threshold ``c`` and
``mu2`` at or above it, the eigenproblem ``f''/2 + mu(x) f' = s f`` has
piecewise-exponential solutions.  This module evaluates them for the free
process on the real line and for the process reflected at 0, together with
their Wronskians and the speed / scale densities.

Every solution is stored as a list of :class:`Piece` objects whose terms are
``pre * exp(shift + rate * x)``.  Keeping the ``shift`` separate means factors
such as ``exp((l1p - l2m) * c)`` are never formed on their own; the exponent is
only materialized once it has been combined with ``rate * x``.  This keeps
evaluations finite for the large complex frequencies met on a Bromwich line.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

__all__ = [
    "DriftSpec",
    "SpectralData",
    "ExpTerms",
    "Piece",
    "System",
    "Direction",
    "check_frequency",
    "check_system",
    "spectral_roots",
    "solution_pieces",
    "speed_pieces",
    "wronskian_terms",
    "fundamental_solution",
    "wronskian",
    "speed_scale_densities",
    "evaluate_pieces",
    "piece_at",
]

System = Literal["free", "reflected"]
Direction = Literal["increasing", "decreasing"]

INF = float("inf")


@dataclass(frozen=True)
class DriftSpec:
    """Broken drift ``mu1 * 1{x < c} + mu2 * 1{x >= c}`` with unit diffusion."""

    mu1: float
    mu2: float
    c: float

    def __post_init__(self) -> None:
        for name in ("mu1", "mu2", "c"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")

    def drift(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < self.c, self.mu1, self.mu2)


def check_frequency(s) -> complex:
    s = complex(s)
    if not (s.real > 0.0) or not cmath.isfinite(s):
        raise ValueError(f"Laplace frequency must satisfy Re(s) > 0, got {s!r}")
    return s


def check_system(system: str) -> str:
    if system not in ("free", "reflected"):
        raise ValueError(f"system must be 'free' or 'reflected', got {system!r}")
    return system


class ExpTerms:
    """Finite sum ``sum_k pre[k] * exp(shift[k] + rate[k] * x)``."""

    __slots__ = ("pre", "shift", "rate")

    def __init__(self, pre, shift, rate):
        self.pre = np.atleast_1d(np.asarray(pre, dtype=complex))
        self.shift = np.atleast_1d(np.asarray(shift, dtype=complex))
        self.rate = np.atleast_1d(np.asarray(rate, dtype=complex))
        if not (self.pre.shape == self.shift.shape == self.rate.shape):
            raise ValueError("pre, shift and rate must have equal lengths")

    @classmethod
    def constant(cls, value: complex = 1.0, shift: complex = 0.0) -> "ExpTerms":
        return cls([value], [shift], [0.0])

    @classmethod
    def empty(cls) -> "ExpTerms":
        return cls(np.zeros(0), np.zeros(0), np.zeros(0))

    def __len__(self) -> int:
        return self.pre.size

    def __repr__(self) -> str:
        return f"ExpTerms(n={len(self)})"

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        if len(self) == 0:
            return np.zeros(x.shape, dtype=complex)
        e = self.shift + np.multiply.outer(x, self.rate)
        return np.sum(self.pre * np.exp(e), axis=-1)

    def deriv(self, x):
        x = np.asarray(x, dtype=complex)
        if len(self) == 0:
            return np.zeros(x.shape, dtype=complex)
        e = self.shift + np.multiply.outer(x, self.rate)
        return np.sum(self.pre * self.rate * np.exp(e), axis=-1)

    def __add__(self, other: "ExpTerms") -> "ExpTerms":
        return ExpTerms(
            np.concatenate([self.pre, other.pre]),
            np.concatenate([self.shift, other.shift]),
            np.concatenate([self.rate, other.rate]),
        )

    def __neg__(self) -> "ExpTerms":
        return ExpTerms(-self.pre, self.shift, self.rate)

    def __sub__(self, other: "ExpTerms") -> "ExpTerms":
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, ExpTerms):
            return ExpTerms(self.pre * complex(other), self.shift, self.rate)
        return ExpTerms(
            np.multiply.outer(self.pre, other.pre).ravel(),
            np.add.outer(self.shift, other.shift).ravel(),
            np.add.outer(self.rate, other.rate).ravel(),
        )

    __rmul__ = __mul__

    def frozen_at(self, x: float) -> "ExpTerms":
        """The value at ``x`` as a constant, still in shifted form."""
        return ExpTerms(self.pre, self.shift + self.rate * x, np.zeros_like(self.rate))

    def log_scale(self) -> float:
        """Largest ``log|pre| + Re(shift)`` (a stable factoring exponent)."""
        mag = np.abs(self.pre)
        ok = mag > 0
        if not ok.any():
            return 0.0
        return float(np.max(np.log(mag[ok]) + self.shift.real[ok]))

    def reciprocal(self) -> "ExpTerms":
        """One-term ``1 / self`` for a constant (rate-free) sum."""
        if np.any(self.rate != 0):
            raise ValueError("only constant sums can be inverted")
        k = self.log_scale()
        v = np.sum(self.pre * np.exp(self.shift - k))
        if v == 0:
            raise ZeroDivisionError("sum vanishes")
        return ExpTerms([1.0 / v], [-k], [0.0])

    def value(self) -> complex:
        """Value of a constant sum."""
        return complex(self(0.0))

    def integral(self, lo: float, hi: float) -> complex:
        """Closed-form integral over ``[lo, hi]``; either end may be infinite."""
        if len(self) == 0 or lo == hi:
            return 0j
        if lo > hi:
            return -self.integral(hi, lo)
        tol = 1e-12
        total = 0j
        for p, sh, r in zip(self.pre, self.shift, self.rate):
            if lo == -INF and hi == INF:
                raise ValueError("two-sided unbounded integral of an exponential diverges")
            if hi == INF:
                if not r.real < -tol:
                    raise ValueError(
                        f"divergent integral on [{lo}, inf): rate {r} has Re >= 0"
                    )
                total += -p * cmath.exp(sh + r * lo) / r
            elif lo == -INF:
                if not r.real > tol:
                    raise ValueError(
                        f"divergent integral on (-inf, {hi}]: rate {r} has Re <= 0"
                    )
                total += p * cmath.exp(sh + r * hi) / r
            else:
                length = hi - lo
                if abs(r) < 1e-8:
                    total += p * length * cmath.exp(sh + r * 0.5 * (lo + hi))
                else:
                    # expm1 keeps rate * length near 0 accurate
                    total += p * cmath.exp(sh + r * lo) * np.expm1(r * length) / r
        return complex(total)


@dataclass(frozen=True)
class Piece:
    """``terms`` valid on ``lo <= x < hi``."""

    lo: float
    hi: float
    terms: ExpTerms


@dataclass(frozen=True)
class SpectralData:
    """Roots, coefficients and Wronskians at one frequency ``s``.

    The coefficient fields hold plain (unshifted) values; they
    may overflow for very large ``|s| * c``, in which case use the shifted
    representations from :func:`solution_pieces`.
    """

    s: complex
    l1p: complex
    l1m: complex
    l2p: complex
    l2m: complex
    a1: complex
    a2: complex
    b1: complex
    b2: complex
    at1: complex
    at2: complex
    bt1: complex
    bt2: complex
    w_free: complex
    w_refl: complex


def _roots(drift: DriftSpec, s: complex):
    r1 = cmath.sqrt(drift.mu1 ** 2 + 2 * s)
    r2 = cmath.sqrt(drift.mu2 ** 2 + 2 * s)
    return -drift.mu1 + r1, -drift.mu1 - r1, -drift.mu2 + r2, -drift.mu2 - r2


def spectral_roots(drift: DriftSpec, s) -> SpectralData:
    """Roots of ``lam**2/2 + mu_i*lam - s = 0`` and the matching coefficients."""
    s = check_frequency(s)
    l1p, l1m, l2p, l2m = _roots(drift, s)
    c = drift.c
    e = cmath.exp
    d2 = l2p - l2m
    d1 = l1p - l1m
    a1 = (l2p - l1p) / d2 * e((l1p - l2m) * c)
    a2 = (l1p - l2m) / d2 * e((l1p - l2p) * c)
    b1 = (l1p - l2m) / d1 * e((l2m - l1m) * c)
    b2 = (l2m - l1m) / d1 * e((l2m - l1p) * c)
    at1 = (l1p * (l2p - l1m) / d2 * e((l1m - l2m) * c)
           - l1m * (l2p - l1p) / d2 * e((l1p - l2m) * c))
    at2 = (l1p * (l1m - l2m) / d2 * e((l1m - l2p) * c)
           - l1m * (l1p - l2m) / d2 * e((l1p - l2p) * c))
    w_free = (l1p - l2m) * e((l2m - l1m) * c)
    w_refl = (-l1p * (l2m - l1m) * e((l2m - l1p) * c)
              - l1m * (l1p - l2m) * e((l2m - l1m) * c))
    return SpectralData(s, l1p, l1m, l2p, l2m, a1, a2, b1, b2, at1, at2, b1, b2,
                        w_free, w_refl)


def solution_pieces(system: System, direction: Direction, drift: DriftSpec, s) -> list[Piece]:
    """Piecewise representation of psi (increasing) or phi (decreasing)."""
    check_system(system)
    s = check_frequency(s)
    l1p, l1m, l2p, l2m = _roots(drift, s)
    c = drift.c
    d1 = l1p - l1m
    d2 = l2p - l2m
    lo = 0.0 if system == "reflected" else -INF
    if system == "reflected" and c <= 0:
        raise ValueError("the reflected system needs a threshold c > 0")
    if direction == "increasing":
        if system == "free":
            below = ExpTerms([1.0], [0.0], [l1p])
            above = ExpTerms(
                [(l2p - l1p) / d2, (l1p - l2m) / d2],
                [(l1p - l2m) * c, (l1p - l2p) * c],
                [l2m, l2p],
            )
        else:
            below = ExpTerms([l1p, -l1m], [0.0, 0.0], [l1m, l1p])
            above = ExpTerms(
                [l1p * (l2p - l1m) / d2, -l1m * (l2p - l1p) / d2,
                 l1p * (l1m - l2m) / d2, -l1m * (l1p - l2m) / d2],
                [(l1m - l2m) * c, (l1p - l2m) * c,
                 (l1m - l2p) * c, (l1p - l2p) * c],
                [l2m, l2m, l2p, l2p],
            )
    elif direction == "decreasing":
        below = ExpTerms(
            [(l1p - l2m) / d1, (l2m - l1m) / d1],
            [(l2m - l1m) * c, (l2m - l1p) * c],
            [l1m, l1p],
        )
        above = ExpTerms([1.0], [0.0], [l2m])
    else:
        raise ValueError(f"direction must be 'increasing' or 'decreasing', got {direction!r}")
    if c <= lo:
        return [Piece(lo, INF, above)]
    return [Piece(lo, c, below), Piece(c, INF, above)]


def speed_pieces(system: System, drift: DriftSpec) -> list[Piece]:
    """Speed density ``m`` as pieces (rates ``2*mu_i``)."""
    check_system(system)
    c = drift.c
    lo = 0.0 if system == "reflected" else -INF
    below = ExpTerms([2.0], [0.0], [2 * drift.mu1])
    above = ExpTerms([2.0], [2 * (drift.mu1 - drift.mu2) * c], [2 * drift.mu2])
    if c <= lo:
        return [Piece(lo, INF, above)]
    return [Piece(lo, c, below), Piece(c, INF, above)]


def wronskian_terms(system: System, drift: DriftSpec, s) -> ExpTerms:
    check_system(system)
    s = check_frequency(s)
    l1p, l1m, l2p, l2m = _roots(drift, s)
    c = drift.c
    if system == "free":
        return ExpTerms([l1p - l2m], [(l2m - l1m) * c], [0.0])
    return ExpTerms(
        [-l1p * (l2m - l1m), -l1m * (l1p - l2m)],
        [(l2m - l1p) * c, (l2m - l1m) * c],
        [0.0, 0.0],
    )


def piece_at(pieces: Sequence[Piece], x: float) -> Piece:
    for p in pieces:
        if p.lo <= x < p.hi:
            return p
    if x == pieces[-1].hi:
        return pieces[-1]
    raise ValueError(f"x={x} lies outside the domain [{pieces[0].lo}, {pieces[-1].hi}]")


def evaluate_pieces(pieces: Sequence[Piece], x, derivative: bool = False):
    """Evaluate a piecewise sum at scalar or array ``x`` (complex result)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape, dtype=complex)
    covered = np.zeros(x.shape, dtype=bool)
    for i, p in enumerate(pieces):
        mask = (x >= p.lo) & (x < p.hi)
        if i == len(pieces) - 1:
            mask |= x == p.hi
        if mask.any():
            f = p.terms.deriv if derivative else p.terms
            out[mask] = f(x[mask])
            covered |= mask
    if not covered.all():
        raise ValueError("evaluation point outside the domain")
    return out[()] if out.ndim == 0 else out


def fundamental_solution(system: System, direction: Direction, drift: DriftSpec, s, x,
                         derivative: bool = False):
    """Value (or first derivative) of psi / phi at ``x``.

    At ``x == c`` the ``x >= c`` branch is used.  Reflected evaluation below 0
    is rejected.
    """
    xa = np.asarray(x, dtype=float)
    if system == "reflected" and np.any(xa < 0):
        raise ValueError("reflected solutions are defined for x >= 0 only")
    return evaluate_pieces(solution_pieces(system, direction, drift, s), xa, derivative)


def wronskian(system: System, drift: DriftSpec, s) -> complex:
    return wronskian_terms(system, drift, s).value()


def speed_scale_densities(system: System, drift: DriftSpec, x):
    """Return ``(m(x), s(x))``; their product is 2 away from ``c``."""
    check_system(system)
    xa = np.asarray(x, dtype=float)
    if system == "reflected" and np.any(xa < 0):
        raise ValueError("reflected densities are defined for x >= 0 only")
    mu1, mu2, c = drift.mu1, drift.mu2, drift.c
    below = xa < c
    speed = np.where(below, 2 * np.exp(2 * mu1 * xa),
                     2 * np.exp(2 * (mu1 - mu2) * c + 2 * mu2 * xa))
    scale = np.where(below, np.exp(-2 * mu1 * xa),
                     np.exp(2 * (mu2 - mu1) * c - 2 * mu2 * xa))
    if speed.ndim == 0:
        return float(speed), float(scale)
    return speed, scale
