"""
Monte Carlo oracle
==================

Euler-Maruyama paths of the broken-drift diffusion, free or reflected at 0,
stopped at 0 (free only) or at the jumping boundary ``b + Y 1{T1 <= t}``.

Scheme, per step of length ``h`` (``dt``, or shorter where the jump time
``T1`` or an observation time splits a step):

* drift evaluated at the left endpoint;
* reflected paths are projected, ``max(0, x)``, or with
  ``reflection="skorokhod"`` reflected by the Skorokhod map of the Gaussian
  step (subtract the sampled bridge minimum when it is negative), which is
  exact for the frozen-drift step;
* with ``bridge_correction`` a barrier ``L`` not reached at either endpoint is
  still declared crossed with probability ``exp(-2 (L - x0)(L - x1) / h)``;
  the lower barrier is checked first, so ties go to it;
* hitting times inside a step are placed at the step midpoint.

``block_stepping`` merges consecutive steps while the path is so far from
the barriers and from the threshold ``c`` that, under the frozen drift, the
chance of meeting any of them within the block is below ``BLOCK_EPS``.  On
that event the merged Gaussian step has exactly the law of the individual
steps, so the scheme is unchanged up to a total-variation error of
``BLOCK_EPS`` per block.

Random numbers come from xoshiro256** streams seeded by splitmix64 from
``(seed, path index)``; each path's output depends on nothing else, and all
reductions are numpy sums in index order, so results are bit-identical for
any thread count.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field
from typing import Iterator, NamedTuple, Sequence

# numba fixes its pool size at import; let FPT_THREADS raise it beyond the
# detected core count so thread-count independence can be exercised anywhere
if os.environ.get("FPT_THREADS", "").isdigit() and "NUMBA_NUM_THREADS" not in os.environ:
    os.environ["NUMBA_NUM_THREADS"] = str(max(1, int(os.environ["FPT_THREADS"])))

import numba  # noqa: E402
import numpy as np
from numba import njit, prange  # noqa: E402

from .spectral import DriftSpec, check_system
from .transforms import BoundarySpec, TransformQuery

__all__ = [
    "SimConfig",
    "HitSample",
    "HitSamples",
    "JumpSamples",
    "MCEstimate",
    "DensityHistogram",
    "simulate_hitting",
    "simulate_jump_time",
    "simulate_marginals",
    "estimate_joint_lt",
    "estimate_phi_quadruple",
    "density_histogram",
    "set_threads",
]

#: two-sided normal tail at which a merged block is treated as event-free
BLOCK_EPS = 1e-10
_BLOCK_Z = 6.4674  # 2 * P(N > z) = BLOCK_EPS
#: bridge probabilities with a smaller exponent are skipped as zero
_BRIDGE_CUT = -40.0

KIND_LOWER, KIND_UPPER, KIND_JUMPED_UPPER, KIND_CENSORED = 0, 1, 2, 3
KIND_NAMES = ("lower", "upper", "boundary-jump", "censored")


def set_threads(n: int | None) -> int:
    """Cap numba worker threads; returns the count in use."""
    if n is not None:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
    return numba.get_num_threads()


def _threads_from_env() -> None:
    v = os.environ.get("FPT_THREADS")
    if v:
        set_threads(int(v))


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    Parameters
    ----------
    dt : float
        Euler step (<= 1e-2).
    n_paths : int
    seed : int
        64-bit seed; path ``i`` uses the stream derived from ``(seed, i)``.
    bridge_correction : bool
    t_max : float
        Horizon; paths still running are censored.
    reflection : {"projection", "skorokhod"}
    block_stepping : bool
    """

    dt: float = 1e-4
    n_paths: int = 100_000
    seed: int = 12345
    bridge_correction: bool = True
    t_max: float = 1e3
    reflection: str = "projection"
    block_stepping: bool = True

    def __post_init__(self) -> None:
        if not (0 < self.dt <= 1e-2):
            raise ValueError("dt must lie in (0, 1e-2]")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not (math.isfinite(self.t_max) and self.t_max > 0):
            raise ValueError("t_max must be finite and positive")
        if self.reflection not in ("projection", "skorokhod"):
            raise ValueError("reflection must be 'projection' or 'skorokhod'")

    def to_dict(self) -> dict:
        return asdict(self)


class HitSample(NamedTuple):
    tau: float
    x_tau: float
    hit_kind: str
    jumped: bool


@dataclass(frozen=True)
class MCEstimate:
    """Sample mean with standard error ``std / sqrt(n)``.

    ``bias_bound`` bounds the error from censored paths, which enter with
    the midpoint of their possible range.
    """

    mean: float
    std_err: float
    n: int
    censored_fraction: float = 0.0
    bias_bound: float = 0.0
    scheme: dict = field(default_factory=dict, compare=False)

    def z_score(self, value: float) -> float:
        diff = value - self.mean
        if self.std_err == 0:
            return 0.0 if abs(diff) < 1e-12 else math.copysign(math.inf, diff)
        return diff / self.std_err


def _estimate(values: np.ndarray, censored_fraction: float = 0.0, bias: float = 0.0,
              scheme: dict | None = None) -> MCEstimate:
    n = values.size
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return MCEstimate(mean, se, n, censored_fraction, bias, scheme or {})


# ---------------------------------------------------------------------------
# random numbers

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


@njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit
def _seed_stream(s, seed, index):
    z = _mix64(seed ^ _mix64(np.uint64(index) + _GOLDEN))
    for j in range(4):
        z = z + _GOLDEN
        s[j] = _mix64(z)


@njit(inline="always")
def _next(s):
    out = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return out


@njit(inline="always")
def _uniform(s):
    """Uniform on the open interval (0, 1)."""
    return (float(_next(s) >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)


def _ziggurat_tables(layers: int = 256):
    # Marsaglia-Tsang layers of equal area v under exp(-x^2/2)
    r = 3.6541528853610088
    v = 0.00492867323399
    f = lambda z: math.exp(-0.5 * z * z)
    x = np.empty(layers + 1)
    x[0] = v / f(r)
    x[1] = r
    for i in range(1, layers - 1):
        x[i + 1] = math.sqrt(-2.0 * math.log(v / x[i] + f(x[i])))
    x[layers] = 0.0
    return x, x[1:] / x[:-1], np.exp(-0.5 * x * x)


_ZX, _ZRATIO, _ZF = _ziggurat_tables()
_ZR = float(_ZX[1])


@njit(inline="always")
def _normal(s, spare):
    """Standard normal by the ziggurat method (``spare`` is unused scratch)."""
    while True:
        bits = _next(s)
        i = int(bits & np.uint64(255))
        u = 2.0 * (float(bits >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0) - 1.0
        if abs(u) < _ZRATIO[i]:
            return u * _ZX[i]
        if i == 0:
            # tail beyond r
            while True:
                a = -math.log(_uniform(s)) / _ZR
                bb = -math.log(_uniform(s))
                if 2.0 * bb > a * a:
                    return _ZR + a if u > 0.0 else -(_ZR + a)
        xx = u * _ZX[i]
        f0 = _ZF[i]
        f1 = _ZF[i + 1]
        if f1 + _uniform(s) * (f0 - f1) < math.exp(-0.5 * xx * xx):
            return xx


@njit
def _draw_jump(s, values, cdf, discrete):
    u = _uniform(s)
    k = np.searchsorted(cdf, u)
    if k >= cdf.size:
        k = cdf.size - 1
    if discrete:
        return values[k]
    if k == 0:
        return values[0]
    lo = cdf[k - 1]
    w = (u - lo) / (cdf[k] - lo) if cdf[k] > lo else 0.0
    return values[k - 1] + w * (values[k] - values[k - 1])


# ---------------------------------------------------------------------------
# path segments

_BUCKETS_PER_DMIN = 64


def _block_tables(drift: DriftSpec, dt: float, max_dist: float):
    """Merged-step counts by distance bucket, one row per drift regime.

    Bucket ``j`` covers distances ``[j w, (j+1) w)`` and uses the lower edge,
    so a count never exceeds what the exact distance allows.  For a barrier
    the whole path of the block matters: ``n`` steps are merged only if
    ``(d - |mu| n dt) / sqrt(n dt) >= z`` with ``2 P(N > z) = BLOCK_EPS``.
    The threshold ``c`` only acts through the drift at the grid points
    strictly inside the block, so there the same bound is applied to the
    ``n - 1`` inner steps.  Returns ``(barrier_n, barrier_sqrt, threshold_n,
    threshold_sqrt, 1 / w)`` where ``*_sqrt`` holds ``sqrt(n dt)``.
    """
    d_min = _BLOCK_Z * math.sqrt(dt)
    w = d_min / _BUCKETS_PER_DMIN
    n_b = int(max_dist / w) + 2
    d = np.arange(n_b) * w
    bar = np.zeros((2, n_b), dtype=np.int64)
    thr = np.zeros((2, n_b), dtype=np.int64)
    for row, mu in enumerate((abs(drift.mu1), abs(drift.mu2))):
        if mu > 0:
            r = (-_BLOCK_Z + np.sqrt(_BLOCK_Z ** 2 + 4.0 * mu * d)) / (2.0 * mu)
        else:
            r = d / _BLOCK_Z
        n = np.floor(r * r / dt * (1.0 - 1e-12)).astype(np.int64)
        bar[row] = np.where(n >= 2, n, 0)
        thr[row] = np.where(n >= 1, n + 1, 0)
    return bar, np.sqrt(bar * dt), thr, np.sqrt(thr * dt), 1.0 / w


@njit(inline="always")
def _reflect(s, x, xf, h, ih, skorokhod):
    if not skorokhod:
        return xf if xf > 0.0 else 0.0
    # the bridge minimum is negative with probability exp(-2 x xf / h)
    if xf > 0.0 and -2.0 * x * xf * ih < _BRIDGE_CUT:
        return xf
    d = xf - x
    m = 0.5 * (x + xf - math.sqrt(d * d - 2.0 * h * math.log(_uniform(s))))
    return xf - m if m < 0.0 else xf


@njit
def _segment(s, spare, x, k, t, t_end, p, lower_on, upper, bn, bs, tn, ts):
    """Advance from ``(x, t)`` to ``t_end`` or the first barrier event.

    ``k`` indexes the last grid point ``k*dt <= t``.  ``p`` packs
    ``(mu1, mu2, c, dt, reflected, skorokhod, bridge, blocks, 1/w)``;
    ``upper = inf`` disables the upper barrier.  ``bn, bs`` (barriers) and
    ``tn, ts`` (threshold) hold merged-step counts and ``sqrt(n dt)`` per
    distance bucket of width ``w`` (see :func:`_block_tables`).  Returns
    ``(x, k, t, kind, hit_time)`` with ``kind = -1`` when no barrier was met.
    """
    mu1, mu2, c, dt = p[0], p[1], p[2], p[3]
    inv_w = p[8]
    last = bn.shape[1] - 1
    reflected = p[4] != 0.0
    skorokhod = p[5] != 0.0
    bridge = p[6] != 0.0
    blocks = p[7] != 0.0
    sqdt = math.sqrt(dt)
    inv_dt = 1.0 / dt
    broken = mu1 != mu2
    # exact per-step reflection composes, so merged blocks may touch 0
    watch_zero = lower_on or (reflected and not skorokhod)
    k_end = int(t_end * inv_dt)
    while k_end > 0 and k_end * dt > t_end:
        k_end -= 1
    on_grid = t == k * dt
    while True:
        below = x < c
        mu = mu1 if below else mu2
        if k < k_end:
            if on_grid:
                if blocks:
                    row = 0 if below else 1
                    dist = upper - x
                    if watch_zero and x < dist:
                        dist = x
                    q = dist * inv_w
                    j = int(q) if q < last else last
                    nb = bn[row, j]
                    if nb >= 2:
                        sqb = bs[row, j]
                        if broken:
                            q = abs(x - c) * inv_w
                            jc = int(q) if q < last else last
                            if tn[row, jc] < nb:
                                nb = tn[row, jc]
                                sqb = ts[row, jc]
                        if nb > k_end - k:
                            nb = k_end - k
                            sqb = math.sqrt(nb * dt)
                        if nb >= 2:
                            hb = nb * dt
                            xf = x + mu * hb + sqb * _normal(s, spare)
                            if reflected:
                                xf = _reflect(s, x, xf, hb, 1.0 / hb, skorokhod)
                            x = xf
                            k += nb
                            t = k * dt
                            continue
                h = dt
                sq = sqdt
                ih = inv_dt
            else:
                # off-grid start after a split at the jump time
                h = (k + 1) * dt - t
                sq = math.sqrt(h)
                ih = 1.0 / h
            new_k = k + 1
            new_t = new_k * dt
        elif t < t_end:
            h = t_end - t
            sq = math.sqrt(h)
            ih = 1.0 / h
            new_k = k
            new_t = t_end
        else:
            break
        xn = x + mu * h + sq * _normal(s, spare)
        if reflected:
            xn = _reflect(s, x, xn, h, ih, skorokhod)
        if lower_on:
            if xn <= 0.0:
                return 0.0, new_k, new_t, 0, t + 0.5 * h
            if bridge:
                e = -2.0 * x * xn * ih
                if e > _BRIDGE_CUT and _uniform(s) < math.exp(e):
                    return 0.0, new_k, new_t, 0, t + 0.5 * h
        if xn >= upper:
            return upper, new_k, new_t, 1, t + 0.5 * h
        if bridge:
            e = -2.0 * (upper - x) * (upper - xn) * ih
            if e > _BRIDGE_CUT and _uniform(s) < math.exp(e):
                return upper, new_k, new_t, 1, t + 0.5 * h
        x = xn
        k = new_k
        t = new_t
        on_grid = True
    return x, k, t, -1, t


@njit(parallel=True)
def _hit_kernel(x0, p, bn, bs, tn, ts, b, lam, jv, jc, discrete, t_max, seed, n,
                tau, xt, kind, jumped):
    reflected = p[4] != 0.0
    for i in prange(n):
        s = np.empty(4, dtype=np.uint64)
        spare = np.zeros(2)
        _seed_stream(s, seed, i)
        t1 = -math.log(_uniform(s)) / lam
        y = _draw_jump(s, jv, jc, discrete)
        if x0 >= b or ((not reflected) and x0 <= 0.0):
            tau[i] = 0.0
            xt[i] = x0
            kind[i] = KIND_LOWER if x0 <= 0.0 else KIND_UPPER
            jumped[i] = False
            continue
        first_end = t1 if t1 < t_max else t_max
        x, k, t, kd, th = _segment(s, spare, x0, 0, 0.0, first_end, p, not reflected, b, bn, bs, tn, ts)
        if kd >= 0:
            tau[i] = th
            xt[i] = x
            kind[i] = kd
            jumped[i] = False
            continue
        if t1 < t_max:
            x, k, t, kd, th = _segment(s, spare, x, k, t, t_max, p, not reflected, b + y, bn, bs, tn, ts)
            jumped[i] = True
            if kd >= 0:
                tau[i] = th
                xt[i] = x
                kind[i] = KIND_LOWER if kd == 0 else KIND_JUMPED_UPPER
                continue
        else:
            jumped[i] = False
        tau[i] = t_max
        xt[i] = x
        kind[i] = KIND_CENSORED


@njit(parallel=True)
def _jump_time_kernel(x0, p, bn, bs, tn, ts, b, lam, t_max, seed, n, t1_out, x_out, hit_out, cens_out):
    reflected = p[4] != 0.0
    for i in prange(n):
        s = np.empty(4, dtype=np.uint64)
        spare = np.zeros(2)
        _seed_stream(s, seed, i)
        t1 = -math.log(_uniform(s)) / lam
        end = t1 if t1 < t_max else t_max
        x, k, t, kd, th = _segment(s, spare, x0, 0, 0.0, end, p, not reflected, b, bn, bs, tn, ts)
        hit = kd >= 0
        if hit:
            # continue the unkilled path from the barrier
            x, k, t, kd, th = _segment(s, spare, x, k, t, end, p, False, math.inf, bn, bs, tn, ts)
        t1_out[i] = end
        x_out[i] = x
        hit_out[i] = hit or x0 >= b or ((not reflected) and x0 <= 0.0)
        cens_out[i] = t1 >= t_max


@njit(parallel=True)
def _marginal_kernel(x0, p, bn, bs, tn, ts, times, seed, n, out):
    m = times.size
    for i in prange(n):
        s = np.empty(4, dtype=np.uint64)
        spare = np.zeros(2)
        _seed_stream(s, seed, i)
        x = x0
        k = 0
        t = 0.0
        for j in range(m):
            x, k, t, kd, th = _segment(s, spare, x, k, t, times[j], p, False, math.inf, bn, bs, tn, ts)
            out[i, j] = x


def _pack(system: str, drift: DriftSpec, config: SimConfig, reach: float):
    """Scalar parameters plus block tables covering distances up to ``reach``."""
    # farther distances share the last bucket, which only costs speed
    bn, bs, tn, ts, inv_w = _block_tables(drift, config.dt, min(reach, 50.0))
    p = np.array([
        drift.mu1, drift.mu2, drift.c, config.dt,
        1.0 if system == "reflected" else 0.0,
        1.0 if config.reflection == "skorokhod" else 0.0,
        1.0 if config.bridge_correction else 0.0,
        1.0 if config.block_stepping else 0.0,
        inv_w,
    ])
    return p, bn, bs, tn, ts


def _scheme(system: str, config: SimConfig) -> dict:
    d = config.to_dict()
    d["system"] = system
    return d


# ---------------------------------------------------------------------------
# samples and estimators

@dataclass(frozen=True)
class HitSamples:
    """Per-path hitting data (struct of arrays); iterate for :class:`HitSample`."""

    tau: np.ndarray
    x_tau: np.ndarray
    kind: np.ndarray
    jumped: np.ndarray
    system: str
    config: SimConfig

    def __len__(self) -> int:
        return self.tau.size

    def __iter__(self) -> Iterator[HitSample]:
        for t, x, k, j in zip(self.tau, self.x_tau, self.kind, self.jumped):
            yield HitSample(float(t), float(x), KIND_NAMES[k], bool(j))

    @property
    def censored(self) -> np.ndarray:
        return self.kind == KIND_CENSORED

    @property
    def censored_fraction(self) -> float:
        return float(np.mean(self.censored))

    def joint_lt(self, alpha: float, theta: float) -> MCEstimate:
        """Estimate ``E[exp(-alpha X_tau - theta tau)]``.

        A censored path's value lies in ``[0, exp(-theta t_max)]``; it enters
        at the midpoint and the half-width times the censored fraction is
        reported as ``bias_bound``.
        """
        cens = self.censored
        vals = np.exp(-alpha * self.x_tau - theta * self.tau)
        half = 0.5 * math.exp(-theta * self.config.t_max)
        vals = np.where(cens, half, vals)
        frac = float(np.mean(cens))
        return _estimate(vals, frac, frac * half, _scheme(self.system, self.config))

    def exit_lt(self, theta: float) -> tuple[MCEstimate, MCEstimate]:
        """``E[e^{-theta tau}; lower]`` and ``E[e^{-theta tau}; upper]``, before any jump."""
        disc = np.exp(-theta * self.tau)
        lower = np.where(self.kind == KIND_LOWER, disc, 0.0)
        upper = np.where(self.kind == KIND_UPPER, disc, 0.0)
        frac = self.censored_fraction
        sch = _scheme(self.system, self.config)
        return _estimate(lower, frac, scheme=sch), _estimate(upper, frac, scheme=sch)


@dataclass(frozen=True)
class JumpSamples:
    """``T1``, ``X_{T1}`` and whether the barriers were met before ``T1``."""

    t1: np.ndarray
    x_t1: np.ndarray
    hit_before: np.ndarray
    censored: np.ndarray
    system: str
    config: SimConfig

    def phi_quadruple(self, alpha: float, theta: float, c: float) -> tuple[MCEstimate, ...]:
        base = np.where(self.censored, 0.0, np.exp(-alpha * self.x_t1 - theta * self.t1))
        below = self.x_t1 < c
        frac = float(np.mean(self.censored))
        bias = frac * math.exp(-theta * self.config.t_max)
        sch = _scheme(self.system, self.config)
        parts = (below, ~below, below & self.hit_before, ~below & self.hit_before)
        return tuple(_estimate(np.where(m, base, 0.0), frac, bias, sch) for m in parts)


def simulate_hitting(system: str, drift: DriftSpec, boundary: BoundarySpec, x: float,
                     config: SimConfig) -> HitSamples:
    """Simulate ``config.n_paths`` paths from ``x`` until the first barrier event."""
    check_system(system)
    _threads_from_env()
    jv, jc = boundary.sampling_table()
    n = config.n_paths
    tau = np.empty(n)
    xt = np.empty(n)
    kind = np.empty(n, dtype=np.int8)
    jumped = np.empty(n, dtype=np.bool_)
    reach = boundary.b + float(np.max(jv)) + abs(drift.c) + abs(x)
    _hit_kernel(float(x), *_pack(system, drift, config, reach), float(boundary.b),
                float(boundary.lam),
                np.ascontiguousarray(jv, dtype=float), np.ascontiguousarray(jc, dtype=float),
                not boundary.continuous, float(config.t_max), np.uint64(config.seed), n,
                tau, xt, kind, jumped)
    return HitSamples(tau, xt, kind, jumped, system, config)


def simulate_jump_time(system: str, drift: DriftSpec, boundary: BoundarySpec, x: float,
                       config: SimConfig) -> JumpSamples:
    """Simulate the unkilled path to ``T1``, flagging barrier contact on the way."""
    check_system(system)
    _threads_from_env()
    n = config.n_paths
    t1 = np.empty(n)
    xs = np.empty(n)
    hit = np.empty(n, dtype=np.bool_)
    cens = np.empty(n, dtype=np.bool_)
    reach = boundary.b + abs(drift.c) + abs(x)
    _jump_time_kernel(float(x), *_pack(system, drift, config, reach), float(boundary.b),
                      float(boundary.lam), float(config.t_max), np.uint64(config.seed), n,
                      t1, xs, hit, cens)
    return JumpSamples(t1, xs, hit, cens, system, config)


def simulate_marginals(system: str, drift: DriftSpec, times: Sequence[float], x: float,
                       config: SimConfig) -> np.ndarray:
    """Positions at the given times, shape ``(n_paths, len(times))``."""
    check_system(system)
    _threads_from_env()
    ts = np.asarray(times, dtype=float)
    if ts.ndim != 1 or ts.size == 0 or np.any(ts <= 0) or np.any(np.diff(ts) <= 0):
        raise ValueError("times must be positive and strictly increasing")
    if system == "reflected" and x < 0:
        raise ValueError("reflected start must be >= 0")
    out = np.empty((config.n_paths, ts.size))
    reach = abs(drift.c) + abs(x) + 10.0 * math.sqrt(ts[-1])
    _marginal_kernel(float(x), *_pack(system, drift, config, reach), ts, np.uint64(config.seed),
                     config.n_paths, out)
    return out


def estimate_joint_lt(system: str, drift: DriftSpec, boundary: BoundarySpec,
                      query: TransformQuery, config: SimConfig) -> MCEstimate:
    """Monte Carlo ``E_x[exp(-alpha X_tau - theta tau)]``."""
    return simulate_hitting(system, drift, boundary, query.x, config).joint_lt(
        query.alpha, query.theta)


def estimate_phi_quadruple(system: str, drift: DriftSpec, boundary: BoundarySpec,
                           alpha: float, theta: float, x: float,
                           config: SimConfig) -> tuple[MCEstimate, ...]:
    """Monte Carlo counterparts of the four jump-time transforms."""
    return simulate_jump_time(system, drift, boundary, x, config).phi_quadruple(
        alpha, theta, drift.c)


@dataclass(frozen=True)
class DensityHistogram:
    """Normalized histogram with per-bin standard errors (binomial)."""

    t: float
    edges: np.ndarray
    density: np.ndarray
    std_err: np.ndarray
    n: int

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])


def _histogram(samples: np.ndarray, t: float, bins: int, value_range) -> DensityHistogram:
    if value_range is None:
        lo, hi = np.quantile(samples, [0.0005, 0.9995])
        if samples.min() >= 0.0 and lo < 0.05 * (hi - lo):
            lo = 0.0
        value_range = (float(lo), float(hi))
    counts, edges = np.histogram(samples, bins=bins, range=value_range)
    n = samples.size
    width = np.diff(edges)
    prob = counts / n
    dens = prob / width
    se = np.sqrt(prob * (1.0 - prob) / n) / width
    return DensityHistogram(float(t), edges, dens, se, n)


def density_histogram(system: str, drift: DriftSpec, t, x: float, config: SimConfig,
                      bins: int = 50, value_range: tuple[float, float] | None = None):
    """Histogram estimate of ``p(t; x, .)``.

    ``t`` may be a sequence, in which case one set of paths serves every
    time and a list is returned.  The default range is the central 99.9% of
    the samples (from 0 when the mass sits against the reflecting barrier).
    """
    times = np.atleast_1d(np.asarray(t, dtype=float))
    pos = simulate_marginals(system, drift, times, x, config)
    out = [_histogram(pos[:, j], times[j], bins, value_range) for j in range(times.size)]
    return out[0] if np.ndim(t) == 0 else out
