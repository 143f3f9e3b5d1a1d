"""
Hitting-time Laplace transforms against a single-jump random boundary
=====================================================================

The boundary is ``C(t) = b + Y 1{T1 <= t}`` with ``T1 ~ Exp(lam)`` and an
independent jump ``Y > 0``.  The free process is stopped at
``tau = inf{t : X_t = 0 or X_t = C(t)}``, the reflected one at
``inf{t : X_t = C(t)}``.

Everything is assembled from resolvent integrals at the randomized frequency
``s = lam + theta`` (exponential randomization: for ``T1 ~ Exp(lam)``,
``E[exp(-theta T1) f(T1)] = lam * (Laplace transform of f)(lam + theta)``).

The joint transforms :func:`joint_lt` go through :func:`killed_expectation`,
which has no denominators.  The closed forms in :func:`phi_quadruple` and
:func:`phi_tilde_quadruple` divide by ``lam + theta + alpha*mu_i - alpha**2/2``
and are kept as an independent cross-check.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .greens import GreenKernel, PiecewiseExpPayoff, tail_mass
from .spectral import DriftSpec, ExpTerms, check_system, piece_at, solution_pieces

__all__ = [
    "BoundarySpec",
    "TransformQuery",
    "MVariant",
    "ReflectedReading",
    "TransformValue",
    "PoleError",
    "exit_payoffs",
    "hit_payoff",
    "two_sided_exit_lt",
    "reflected_hit_lt",
    "g_functions",
    "phi_closed_form",
    "phi_quadruple",
    "phi_tilde_quadruple",
    "killed_expectation",
    "joint_lt",
    "variant_labels",
    "DEFAULT_RATE",
]

log = logging.getLogger(__name__)

POLE_TOL = 1e-8
RICHARDSON_STEPS = (1e-4, 5e-5, 2.5e-5)
RICHARDSON_SPREAD = 1e-6


class MVariant(str, enum.Enum):
    """Rate used for the hitting transforms after the boundary has jumped."""

    THETA_PLUS_LAMBDA = "theta-plus-lambda"
    THETA_ONLY = "theta-only"


class ReflectedReading(str, enum.Enum):
    """Argument of the post-jump reflected hitting ratio.

    ``POST_JUMP`` uses the position at the jump time, ``START_POINT`` the
    initial position ``x``.  Only ``POST_JUMP`` reduces to the constant
    boundary transform as the jump size vanishes.
    """

    POST_JUMP = "post-jump"
    START_POINT = "start-point"


#: the boundary is constant after the jump, so later hitting is discounted at
#: ``theta``; Monte Carlo rejects ``lam + theta`` by hundreds of standard errors
DEFAULT_RATE = MVariant.THETA_ONLY


def variant_labels(system: str) -> list[str]:
    """Every variant label :func:`joint_lt` accepts for ``system``."""
    if check_system(system) == "free":
        return [v.value for v in MVariant]
    return [f"{r.value}/{v.value}" for r in ReflectedReading for v in MVariant]


def _parse_variant(system: str, variant) -> tuple[MVariant, ReflectedReading]:
    if variant is None:
        return DEFAULT_RATE, ReflectedReading.POST_JUMP
    if isinstance(variant, MVariant):
        return variant, ReflectedReading.POST_JUMP
    if isinstance(variant, tuple):
        return MVariant(variant[0]), ReflectedReading(variant[1])
    text = str(variant)
    if "/" in text:
        reading, rate = text.split("/", 1)
        if system == "free":
            raise ValueError(f"free-system variant takes no reading: {text!r}")
        return MVariant(rate), ReflectedReading(reading)
    return MVariant(text), ReflectedReading.POST_JUMP


@dataclass(frozen=True)
class BoundarySpec:
    """Initial level ``b``, jump rate ``lam`` and the law of the jump ``Y``.

    Give either ``atoms`` as ``((y, weight), ...)`` or a ``density`` on the
    bounded ``support``.  Continuous laws are integrated with ``nodes``
    Gauss-Legendre points (doubled by :func:`joint_lt` until converged).
    """

    b: float
    lam: float
    atoms: tuple = ()
    density: Callable | None = field(default=None, compare=False)
    support: tuple | None = None
    nodes: int = 32
    label: str = ""

    def __post_init__(self) -> None:
        if not (math.isfinite(self.b) and self.b > 0):
            raise ValueError("boundary level b must be positive")
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise ValueError("jump rate lambda must be positive")
        if (self.density is None) == (not self.atoms):
            raise ValueError("give exactly one of atoms or density")
        if self.atoms:
            atoms = tuple((float(y), float(w)) for y, w in self.atoms)
            object.__setattr__(self, "atoms", atoms)
            if any(not (math.isfinite(y) and y > 0) for y, _ in atoms):
                raise ValueError("jump atoms must be strictly positive")
            if any(w < 0 for _, w in atoms):
                raise ValueError("jump weights must be nonnegative")
            if abs(sum(w for _, w in atoms) - 1.0) > 1e-12:
                raise ValueError("jump weights must sum to 1")
        else:
            if self.support is None or len(self.support) != 2:
                raise ValueError("a jump density needs a bounded support (lo, hi)")
            lo, hi = map(float, self.support)
            if not (0 <= lo < hi < math.inf):
                raise ValueError("jump support must satisfy 0 <= lo < hi < inf")
            object.__setattr__(self, "support", (lo, hi))
            if self.nodes < 2:
                raise ValueError("need at least 2 quadrature nodes")
            ys, ws = self.jump_nodes(256)
            if abs(ws.sum() - 1.0) > 1e-6:
                raise ValueError(f"jump density integrates to {ws.sum():.8g}, not 1")

    @classmethod
    def fixed_jump(cls, b: float, lam: float, y: float) -> "BoundarySpec":
        return cls(b, lam, atoms=((y, 1.0),))

    @property
    def continuous(self) -> bool:
        return self.density is not None

    def jump_nodes(self, nodes: int | None = None):
        """Jump values and weights; quadrature nodes for a continuous law."""
        if not self.continuous:
            ys = np.array([y for y, _ in self.atoms])
            ws = np.array([w for _, w in self.atoms])
            return ys, ws
        n = nodes or self.nodes
        lo, hi = self.support
        u, w = np.polynomial.legendre.leggauss(n)
        ys = 0.5 * (hi - lo) * u + 0.5 * (hi + lo)
        ws = 0.5 * (hi - lo) * w * np.asarray(self.density(ys), dtype=float)
        return ys, ws

    def sampling_table(self, size: int = 4097):
        """``(values, cdf)`` for inverse-CDF sampling of ``Y``.

        Atoms give a step CDF; a density is tabulated by the trapezoid rule
        on an even grid and normalized.
        """
        if not self.continuous:
            ys, ws = self.jump_nodes()
            order = np.argsort(ys)
            cdf = np.cumsum(ws[order])
            cdf[-1] = 1.0
            return ys[order], cdf
        lo, hi = self.support
        grid = np.linspace(lo, hi, size)
        dens = np.asarray(self.density(grid), dtype=float)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
        return grid, cdf / cdf[-1]


@dataclass(frozen=True)
class TransformQuery:
    """Evaluation point ``(alpha, theta, x)`` of a joint Laplace transform."""

    alpha: float
    theta: float
    x: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError("alpha must be finite and >= 0")
        if not (math.isfinite(self.theta) and self.theta > 0):
            raise ValueError("theta must be finite and > 0")
        if not math.isfinite(self.x):
            raise ValueError("x must be finite")


class TransformValue(float):
    """A float carrying ``degenerate=True`` when the start was on or past a barrier."""

    degenerate: bool

    def __new__(cls, value: float, degenerate: bool = False):
        obj = super().__new__(cls, value)
        obj.degenerate = degenerate
        return obj


class PoleError(ArithmeticError):
    """Richardson extrapolation at a removable pole did not settle."""


# ---------------------------------------------------------------------------
# hitting transforms for a constant level


def _cuts(drift: DriftSpec, lo: float, hi: float) -> list[float]:
    return [lo] + ([drift.c] if lo < drift.c < hi else []) + [hi]


def _const_at(pieces, z: float) -> ExpTerms:
    return piece_at(pieces, z).terms.frozen_at(z)


def exit_payoffs(drift: DriftSpec, r: float, level: float, hi: float | None = None):
    """``omega1(r; level, .)`` and ``omega2(r; level, .)`` as payoffs on ``[0, hi]``.

    ``omega1`` is the transform of the exit time through 0, ``omega2`` through
    ``level``.  Both are combinations of the free fundamental solutions with
    constant coefficients, so they stay piecewise exponential.
    """
    hi = level if hi is None else min(hi, level)
    psi = solution_pieces("free", "increasing", drift, r)
    phi = solution_pieces("free", "decreasing", drift, r)
    psi0, phi0 = _const_at(psi, 0.0), _const_at(phi, 0.0)
    psiB, phiB = _const_at(psi, level), _const_at(phi, level)
    inv = (phi0 * psiB - psi0 * phiB).reciprocal()
    seg1, seg2 = [], []
    cuts = _cuts(drift, 0.0, hi)
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        ps, ph = piece_at(psi, mid).terms, piece_at(phi, mid).terms
        seg1.append((a, b, (ph * psiB - ps * phiB) * inv))
        seg2.append((a, b, (ps * phi0 - ph * psi0) * inv))
    return PiecewiseExpPayoff(tuple(seg1)), PiecewiseExpPayoff(tuple(seg2))


def hit_payoff(drift: DriftSpec, r: float, level: float, hi: float | None = None):
    """``psi~_r(.) / psi~_r(level)`` (reflected upward hitting) as a payoff on ``[0, hi]``."""
    hi = level if hi is None else min(hi, level)
    psi = solution_pieces("reflected", "increasing", drift, r)
    inv = _const_at(psi, level).reciprocal()
    segs = []
    cuts = _cuts(drift, 0.0, hi)
    for a, b in zip(cuts[:-1], cuts[1:]):
        segs.append((a, b, piece_at(psi, 0.5 * (a + b)).terms * inv))
    return PiecewiseExpPayoff(tuple(segs))


def _real(v) -> float:
    return float(np.real(v))


def two_sided_exit_lt(drift: DriftSpec, theta: float, b: float, x: float) -> tuple[float, float]:
    """``(E_x[e^{-theta R0}; R0 < Rb], E_x[e^{-theta Rb}; Rb < R0])`` for the free process.

    ``R0`` and ``Rb`` are the hitting times of 0 and ``b``.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    if not (b > 0 and 0 <= x <= b):
        raise ValueError(f"need 0 <= x <= b, got x={x}, b={b}")
    w1, w2 = exit_payoffs(drift, theta, b)
    return _real(w1(x)), _real(w2(x))


def reflected_hit_lt(drift: DriftSpec, theta: float, b: float, x: float) -> float:
    """``E_x[e^{-theta R_b}]`` for the process reflected at 0."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    if not (b > 0 and 0 <= x <= b):
        raise ValueError(f"need 0 <= x <= b, got x={x}, b={b}")
    return _real(hit_payoff(drift, theta, b)(x))


# ---------------------------------------------------------------------------
# transforms at the jump time


def g_functions(system: str, drift: DriftSpec, boundary: BoundarySpec, theta: float, x: float):
    """Jump-time occupation terms.

    Returns ``g = E_x[e^{-theta T1} 1{X_{T1} >= c}]`` for the free system and
    ``(g0, g1)`` for the reflected one, where ``g0`` is the same probability
    and ``g1 = E_x[e^{-theta T1} p~(T1; x, 0)] / (2 lam)``.
    """
    check_system(system)
    if not theta > 0:
        raise ValueError("theta must be positive")
    lam = boundary.lam
    s = lam + theta
    g = lam * _real(tail_mass(system, drift, s, x, drift.c))
    if system == "free":
        return g
    g1 = 0.5 * _real(GreenKernel("reflected", drift, s)(x, 0.0))
    return g, g1


def _check_form(form: str) -> None:
    if form not in ("corrected", "uncorrected"):
        raise ValueError(f"form must be 'corrected' or 'uncorrected', got {form!r}")


def _phi12_terms(system: str, drift: DriftSpec, lam: float, theta: float, alpha: float,
                 z: float, form: str):
    """Numerators and denominators of the two jump-time transforms at start ``z``."""
    s = lam + theta
    c = drift.c
    ec = math.exp(-alpha * c)
    ez = math.exp(-alpha * z)
    kern = GreenKernel(system, drift, s)
    occ = lam * _real(kern.integrate(z, PiecewiseExpPayoff.indicator(c, math.inf)))
    num1 = lam * (ez if z < c else ec) - s * ec * occ
    total = lam * ez
    if system == "reflected":
        g1 = 0.5 * _real(kern(z, 0.0))
        num1 -= lam * alpha * g1
        total -= lam * alpha * g1
    if form == "corrected":
        # kink of exp(-alpha * min(y, c)) at c
        num1 += 0.5 * lam * alpha * ec * _real(kern(z, c))
    den1 = s + alpha * drift.mu1 - 0.5 * alpha * alpha
    den2 = s + alpha * drift.mu2 - 0.5 * alpha * alpha
    return num1, total - num1, den1, den2


def phi_closed_form(system: str, drift: DriftSpec, lam: float, theta: float, alpha: float,
                    z: float, form: str = "corrected") -> tuple[float, float]:
    """``(E_z[e^{-alpha X_{T1} - theta T1}; X_{T1} < c], same on X_{T1} >= c)``.

    Closed form in ``g``, ``g1`` and ``G_s(z, c)`` with ``s = lam + theta``.
    ``form="uncorrected"`` omits the ``G_s(z, c)`` term, i.e. drops the local-time
    contribution of the kink of ``exp(-alpha * min(y, c))``; that version does
    not match the resolvent integral and is kept only for comparison.

    For the free system the first transform is finite only for ``alpha``
    below ``mu1 + sqrt(mu1**2 + 2 s)``; past that the analytic continuation
    is returned.  No pole handling is done here; see :func:`phi_quadruple`.
    """
    check_system(system)
    _check_form(form)
    n1, n2, d1, d2 = _phi12_terms(system, drift, lam, theta, alpha, z, form)
    return n1 / d1, n2 / d2


def _near_pole(drift: DriftSpec, s: float, alpha: float) -> bool:
    dens = [s + alpha * mu - 0.5 * alpha * alpha for mu in (drift.mu1, drift.mu2)]
    return min(abs(d) for d in dens) < POLE_TOL * max(1.0, s)


def _richardson(f: Callable[[float], np.ndarray], alpha: float) -> np.ndarray:
    """Limit of ``f`` at a removable singularity from symmetric offsets."""
    sym = [0.5 * (f(alpha + e) + f(alpha - e)) for e in RICHARDSON_STEPS]
    # symmetric averages carry even powers of the offset; steps halve
    r1 = [(4 * sym[k + 1] - sym[k]) / 3 for k in range(len(sym) - 1)]
    spread = float(np.max(np.abs(r1[1] - r1[0])))
    if spread > RICHARDSON_SPREAD:
        raise PoleError(f"pole extrapolation at alpha={alpha} spread {spread:.2e}")
    return (16 * r1[1] - r1[0]) / 15


def _quadruple(system: str, drift: DriftSpec, boundary: BoundarySpec, alpha: float,
               theta: float, x: float, form: str) -> np.ndarray:
    lam, b = boundary.lam, boundary.b
    s = lam + theta

    def at(a: float) -> np.ndarray:
        p1, p2 = phi_closed_form(system, drift, lam, theta, a, x, form)
        if system == "free":
            w1, w2 = two_sided_exit_lt(drift, s, b, x)
            q10, q20 = phi_closed_form(system, drift, lam, theta, a, 0.0, form)
            q1b, q2b = phi_closed_form(system, drift, lam, theta, a, b, form)
            p3 = q10 * w1 + q1b * w2
            p4 = q20 * w1 + q2b * w2
        else:
            ratio = reflected_hit_lt(drift, s, b, x)
            q1b, q2b = phi_closed_form(system, drift, lam, theta, a, b, form)
            p3, p4 = q1b * ratio, q2b * ratio
        return np.array([p1, p2, p3, p4])

    if _near_pole(drift, s, alpha):
        log.info("alpha=%g is within %g of a pole; extrapolating", alpha, POLE_TOL)
        return _richardson(at, alpha)
    return at(alpha)


def _check_quadruple_args(alpha: float, theta: float, x: float, b: float, system: str) -> None:
    if not (math.isfinite(alpha) and alpha >= 0):
        raise ValueError("alpha must be >= 0")
    if not theta > 0:
        raise ValueError("theta must be positive")
    lo_ok = x > 0 if system == "free" else x >= 0
    if not (lo_ok and x <= b):
        raise ValueError(f"start x={x} outside the {system} domain for b={b}")


def phi_quadruple(drift: DriftSpec, boundary: BoundarySpec, alpha: float, theta: float,
                  x: float, form: str = "corrected") -> tuple[float, float, float, float]:
    """Jump-time transforms of the free process, split by ``X_{T1} < c`` and ``tau < T1``.

    Returns ``(P1, P2, P3, P4)`` with ``P1``, ``P2`` the transforms of
    ``exp(-alpha X_{T1} - theta T1)`` on ``{X_{T1} < c}`` and ``{X_{T1} >= c}``
    and ``P3``, ``P4`` the same restricted to ``{tau < T1}`` (restarted from 0
    or ``b`` via the exit transforms at rate ``lam + theta``).

    Near a zero of ``lam + theta + alpha*mu_i - alpha**2/2`` the value is
    Richardson-extrapolated from ``alpha +- eps``; :class:`PoleError` is
    raised if that does not settle.
    """
    _check_form(form)
    _check_quadruple_args(alpha, theta, x, boundary.b, "free")
    return tuple(float(v) for v in _quadruple("free", drift, boundary, alpha, theta, x, form))


def phi_tilde_quadruple(drift: DriftSpec, boundary: BoundarySpec, alpha: float, theta: float,
                        x: float, form: str = "corrected") -> tuple[float, float, float, float]:
    """Reflected counterpart of :func:`phi_quadruple`.

    The local time at 0 adds ``-lam * alpha * g1`` to the first numerator and
    the restart after hitting ``b`` uses ``psi~_s(x) / psi~_s(b)``.
    """
    _check_form(form)
    _check_quadruple_args(alpha, theta, x, boundary.b, "reflected")
    return tuple(float(v) for v in _quadruple("reflected", drift, boundary, alpha, theta, x, form))


# ---------------------------------------------------------------------------
# killed expectations and the joint transform


def killed_expectation(system: str, drift: DriftSpec, boundary: BoundarySpec, theta: float,
                       x: float, h: PiecewiseExpPayoff) -> float:
    """``E_x[e^{-theta T1} h(X_{T1}); tau >= T1]``.

    The unkilled transform ``Phi_h(z) = lam * int G_s(z, y) h(y) dy`` at
    ``s = lam + theta`` is corrected by the restarts at the barriers.  Only
    ``h`` on ``[0, b]`` matters, so it is truncated there first, which also
    keeps every integral finite.
    """
    check_system(system)
    if not theta > 0:
        raise ValueError("theta must be positive")
    lam, b = boundary.lam, boundary.b
    if system == "free" and (x <= 0 or x >= b):
        return 0.0
    if system == "reflected":
        if x < 0:
            raise ValueError("reflected start must be >= 0")
        if x >= b:
            return 0.0
    s = lam + theta
    hb = h.restricted(0.0, b)
    kern = GreenKernel(system, drift, s)

    def phi_h(z: float) -> float:
        return lam * _real(kern.integrate(z, hb))

    if system == "free":
        w1, w2 = two_sided_exit_lt(drift, s, b, x)
        return phi_h(x) - phi_h(0.0) * w1 - phi_h(b) * w2
    return phi_h(x) - phi_h(b) * reflected_hit_lt(drift, s, b, x)


def _post_jump_payoff(system: str, drift: DriftSpec, boundary: BoundarySpec, alpha: float,
                      r: float, ys, ws) -> PiecewiseExpPayoff:
    b = boundary.b
    total = PiecewiseExpPayoff()
    for y, w in zip(ys, ws):
        level = b + y
        if system == "free":
            w1, w2 = exit_payoffs(drift, r, level, hi=b)
            h = w1 + w2.scaled(math.exp(-alpha * level))
        else:
            h = hit_payoff(drift, r, level, hi=b).scaled(math.exp(-alpha * level))
        total = total + h.scaled(w)
    return total


def _joint_lt_nodes(system: str, drift: DriftSpec, boundary: BoundarySpec,
                    q: TransformQuery, rate: MVariant, reading: ReflectedReading,
                    ys, ws) -> float:
    lam, b = boundary.lam, boundary.b
    s = lam + q.theta
    r = q.theta if rate is MVariant.THETA_ONLY else s
    if system == "free":
        w1, w2 = two_sided_exit_lt(drift, s, b, q.x)
        direct = w1 + math.exp(-q.alpha * b) * w2
    else:
        direct = math.exp(-q.alpha * b) * reflected_hit_lt(drift, s, b, q.x)
    if system == "reflected" and reading is ReflectedReading.START_POINT:
        survive = killed_expectation(system, drift, boundary, q.theta, q.x,
                                     PiecewiseExpPayoff.indicator(0.0, b))
        later = sum(w * math.exp(-q.alpha * (b + y)) * reflected_hit_lt(drift, r, b + y, q.x)
                    for y, w in zip(ys, ws))
        return direct + survive * later
    h = _post_jump_payoff(system, drift, boundary, q.alpha, r, ys, ws)
    return direct + killed_expectation(system, drift, boundary, q.theta, q.x, h)


def joint_lt(system: str, drift: DriftSpec, boundary: BoundarySpec, query: TransformQuery,
             variant=None, max_nodes: int = 1024) -> TransformValue:
    """``E_x[exp(-alpha X_tau - theta tau)]`` against the jumping boundary.

    ``variant`` selects the post-jump hitting transform: an :class:`MVariant`
    (the rate, ``lam + theta`` or ``theta``) or for the reflected system a
    label ``"<reading>/<rate>"`` from :func:`variant_labels`.  ``None`` selects
    ``theta-only`` (free) and ``post-jump/theta-only`` (reflected), the
    variants that agree with simulation.

    Starts on or beyond a barrier (``x <= 0`` or ``x >= b`` for the free
    system, ``x >= b`` for the reflected one) return ``exp(-alpha x)`` with
    ``degenerate=True``.
    """
    check_system(system)
    rate, reading = _parse_variant(system, variant)
    x, b = query.x, boundary.b
    if system == "reflected" and x < 0:
        raise ValueError("reflected start must be >= 0")
    if x >= b or (system == "free" and x <= 0):
        return TransformValue(math.exp(-query.alpha * x), degenerate=True)
    if not boundary.continuous:
        ys, ws = boundary.jump_nodes()
        return TransformValue(_joint_lt_nodes(system, drift, boundary, query, rate, reading,
                                              ys, ws))
    n = boundary.nodes
    prev = _joint_lt_nodes(system, drift, boundary, query, rate, reading,
                           *boundary.jump_nodes(n))
    while True:
        n *= 2
        if n > max_nodes:
            raise ArithmeticError(f"jump-law quadrature did not converge by {max_nodes} nodes")
        cur = _joint_lt_nodes(system, drift, boundary, query, rate, reading,
                              *boundary.jump_nodes(n))
        if abs(cur - prev) < 1e-8:
            return TransformValue(cur)
        prev = cur
