"""Galerkin time stepping for the approximating Cahn-Hilliard dynamics.

The truncated system on modes ``0..M`` reads, mode by mode,

    du_k = -1/2 mu_k (mu_k u_k + p_n(u)_k - lam u_k) dt + sigma_k dW_k,

with ``mu_k = (k pi)^2`` and ``p_n(u)_k`` the cosine coefficient of the
pointwise polynomial.  The stiff linear part ``L_k = mu_k (mu_k - lam) / 2``
is integrated exactly (exponential Euler with the exact Ornstein-Uhlenbeck
noise covariance); the polynomial is explicit and evaluated on a midpoint
grid.  A semi-implicit (``"imex"``) variant with the denominator
``1 + dt L_k`` is kept for comparison.

Coupled runs advance a base path and a partner that carries an additional
drift ``g``.  Both consume the same Gaussian draws.  The Girsanov log
weight is the exact likelihood ratio of the shifted Gaussian increment,
which reduces to ``<xi, dW> - |xi|^2 dt / 2`` with ``xi = -B^{-1} g`` for the
semi-implicit scheme, so the weight is a martingale at the discrete level.
"""
from __future__ import annotations

import csv
import functools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DivergenceError,
    ScheduleError,
    ShapeError,
    StabilityError,
    ValidationError,
)
from .noise import NoiseSpec, amplitudes, validate_a1, validate_a2
from .spectral import SpectralField, analyze, coefficients, mu_array, seminorm, synthesize

__all__ = [
    "ModelParams",
    "GammaSchedule",
    "CoupledPath",
    "EnsembleResult",
    "CouplingResult",
    "Integrator",
    "integrator",
    "drift_spectral",
    "step",
    "step_coupled_degenerate",
    "step_coupled_white",
    "gamma_value",
    "gamma_limit",
    "simulate_ensemble",
    "moments_observable",
    "white_step_sizes",
    "step_imex",
    "couple_degenerate",
    "couple_white",
    "mix64",
    "path_seed",
    "write_trajectory_csv",
    "write_endpoints_csv",
]

BLOCK_SIZE = 256
SCHEMES = ("expo", "imex")


class DivergenceTally:
    """Running count of diverged and simulated paths across ensemble runs."""

    def __init__(self):
        self.reset()

    def reset(self):
        self.failed = 0
        self.total = 0

    def record(self, failed_step):
        self.failed += int(np.sum(np.asarray(failed_step) >= 0))
        self.total += int(np.size(failed_step))

    @property
    def rate(self):
        return self.failed / self.total if self.total else 0.0


tally = DivergenceTally()


@dataclass(frozen=True)
class ModelParams:
    lam: float
    n_poly: int = 2
    M: int = 32
    dt: float = 1e-4
    mass_c: float = 0.0
    noise: NoiseSpec = field(default_factory=NoiseSpec.white)
    Q: int | None = None
    taming_threshold: float = 1e6
    nonlinear: bool = True
    scheme: str = "expo"
    guard: float = 1e6

    def __post_init__(self):
        if self.Q is None:
            object.__setattr__(self, "Q", 4 * self.M)
        if self.M < 1:
            raise ValidationError("truncation M must be >= 1")
        if not -1 < self.mass_c < 1:
            raise ValidationError(f"mass c={self.mass_c} must lie in (-1, 1)")
        if self.lam < 0:
            raise ValidationError("lambda must be non-negative")
        if self.n_poly < 0:
            raise ValidationError("polynomial index must be non-negative")
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if self.Q < self.M + 1:
            raise ValidationError(f"grid size Q={self.Q} must exceed M={self.M}")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        if self.dt * 0.5 * self.lam * (self.M * np.pi) ** 2 > 1:
            raise ValidationError(
                f"dt={self.dt:g} violates dt * lam * mu_M / 2 <= 1 for M={self.M}, lam={self.lam:g}"
            )
        if not validate_a1(self.noise):
            raise ValidationError("(A1) fails: the noise acts on the mean mode")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class GammaSchedule:
    """Vanishing time change ``gamma(t)`` of the white-noise coupling."""

    T: float
    a: float
    lam: float

    def __post_init__(self):
        if not np.pi**2 > self.lam:
            raise ValidationError(f"coupling needs pi^2 > lambda, got lambda={self.lam:g}")
        if not 0 < self.a < 2:
            raise ValidationError("schedule parameter a must lie in (0, 2)")
        if not self.T > 0:
            raise ValidationError("horizon T must be positive")

    @property
    def rate(self):
        """``(pi^2 - lam) pi^2``."""
        return (np.pi**2 - self.lam) * np.pi**2

    def value(self, t):
        r = self.rate
        return (2 - self.a) / r * math.expm1(r * (self.T - t))

    @property
    def gamma0(self):
        return self.value(0.0)


def gamma_value(sched, t):
    if not 0 <= t < sched.T:
        raise ScheduleError(f"gamma evaluated at t={t} outside [0, T={sched.T})")
    return sched.value(t)


def gamma_limit(sched):
    """``gamma(T)``; the schedule vanishes at the horizon."""
    return 0.0


@dataclass(frozen=True, eq=False)
class CoupledPath:
    """Base path ``u``, partner, and the quantities accumulated along them.

    Arrays may carry a leading batch axis; scalars then become arrays.
    ``cost`` is the accumulated ``1/2 int |xi|^2``.
    """

    u: np.ndarray
    partner: np.ndarray
    t: float = 0.0
    log_weight: np.ndarray | float = 0.0
    ledger_integral: np.ndarray | float = 0.0
    xi_sup: np.ndarray | float = 0.0
    cost: np.ndarray | float = 0.0

    @classmethod
    def start(cls, x, y, batch=None):
        cx, cy = coefficients(x), coefficients(y)
        if cx.shape != cy.shape:
            raise ShapeError("coupled initial data must share the truncation")
        if np.any(cx[..., 0] != cy[..., 0]):
            raise ValidationError("coupled initial data must carry the same mass")
        if batch is None:
            return cls(cx.copy(), cy.copy())
        zeros = np.zeros(batch)
        return cls(
            np.tile(cx, (batch, 1)), np.tile(cy, (batch, 1)),
            0.0, zeros, zeros.copy(), zeros.copy(), zeros.copy(),
        )

    @property
    def difference(self):
        return self.u - self.partner

    @property
    def weight(self):
        return np.exp(self.log_weight)


class Integrator:
    """Precomputed mode-wise factors for one :class:`ModelParams`."""

    def __init__(self, params):
        self.params = params
        M = params.M
        self.mu = mu_array(M)
        self.L = 0.5 * self.mu * (self.mu - params.lam)
        self.sigma = amplitudes(params.noise, M)
        self.active = np.flatnonzero(self.sigma > 0)
        self.inactive = np.flatnonzero(self.sigma == 0)
        self.n_active = self.active.size
        self._base = self._factors(params.dt)
        self._synth = synthesize(np.eye(M + 1), params.Q)
        self._analyze = analyze(np.eye(params.Q), M)
        self._half_mu = -0.5 * self.mu

    def _factors(self, h):
        L, sigma = self.L, self.sigma
        if self.params.scheme == "imex":
            denom = 1.0 + h * L
            if np.any(denom <= 0):
                k = int(np.argmax(denom <= 0))
                raise StabilityError(f"implicit denominator {denom[k]:.3g} <= 0 on mode {k}")
            return 1.0 / denom, h / denom, sigma * math.sqrt(h) / denom
        small = np.abs(L * h) < 1e-12
        Ls = np.where(small, 1.0, L)
        E = np.exp(-L * h)
        ph = np.where(small, h, -np.expm1(-L * h) / Ls)
        var = np.where(small, h, -np.expm1(-2 * L * h) / (2 * Ls))
        return E, ph, sigma * np.sqrt(var)

    def factors(self, h=None):
        if h is None or h == self.params.dt:
            return self._base
        return self._factors(h)

    def nonlinear(self, u):
        """``-1/2 mu_k p_n(u)_k`` with the pointwise values tamed.

        The transforms are applied as dense matrices, which beats the DCT
        at these sizes and agrees with it to rounding.
        """
        p = self.params
        if not p.nonlinear:
            return np.zeros_like(u)
        v = u @ self._synth
        u2 = v * v
        s = np.full_like(v, 1.0 / (2 * p.n_poly + 1))
        for i in range(p.n_poly - 1, -1, -1):
            s *= u2
            s += 1.0 / (2 * i + 1)
        s *= v
        s *= 2.0
        np.clip(s, -p.taming_threshold, p.taming_threshold, out=s)
        return (s @ self._analyze) * self._half_mu

    def advance(self, u, z, extra=None, h=None):
        E, ph, s = self.factors(h)
        drift = self.nonlinear(u)
        if extra is not None:
            drift = drift + extra
        out = E * u + ph * drift
        out[..., self.active] += s[self.active] * z
        return out

    def girsanov(self, extra, z, h=None):
        """Log-likelihood increment and cost ``|theta|^2 / 2`` of a drift shift.

        ``theta_k = ph_k g_k / s_k`` is the shift measured in units of the
        noise standard deviation; the shift must stay inside the noise range.
        """
        _, ph, s = self.factors(h)
        if self.inactive.size and np.any(extra[..., self.inactive] != 0):
            raise ShapeError("extra drift has energy outside the range of B")
        theta = ph[self.active] * extra[..., self.active] / s[self.active]
        cost = 0.5 * np.sum(theta * theta, axis=-1)
        return -np.sum(theta * z, axis=-1) - cost, cost

    def b_inverse_norm(self, extra):
        """``|B^{-1} g|`` for a drift inside the noise range."""
        r = extra[..., self.active] / self.sigma[self.active]
        return np.sqrt(np.sum(r * r, axis=-1))


@functools.lru_cache(maxsize=32)
def integrator(params):
    return Integrator(params)


def _check_state(u, params, step_index=None):
    c = coefficients(u)
    if not np.all(np.isfinite(c)):
        raise DivergenceError("state became non-finite", step_index)
    if np.any(seminorm(c, -1) > params.guard):
        raise DivergenceError(f"|u|_-1 exceeded the guard {params.guard:g}", step_index)


def drift_spectral(u, params):
    """Mode-wise drift ``-1/2 mu_k (mu_k u_k + p_n(u)_k - lam u_k)``."""
    c = coefficients(u)
    integ = integrator(params)
    d = -integ.L * c + integ.nonlinear(c)
    if not np.all(np.isfinite(d)):
        from .errors import NumericsError

        raise NumericsError("non-finite drift")
    return SpectralField(d) if isinstance(u, SpectralField) else d


def step(state, params, z, extra_drift=None, h=None):
    """Advance one step of length ``h`` (default ``params.dt``).

    ``z`` holds one standard normal per noisy mode (modes with non-zero
    amplitude, in increasing order); the integrator scales it by the exact
    one-step noise standard deviation.
    """
    integ = integrator(params)
    c = coefficients(state)
    extra = None if extra_drift is None else coefficients(extra_drift)
    out = integ.advance(c, np.asarray(z, dtype=float), extra, h)
    _check_state(out, params)
    return SpectralField(out) if isinstance(state, SpectralField) else out


def step_imex(state, params, dW, extra_drift=None):
    """Semi-implicit step driven by pre-scaled increments.

    ``dW`` has one entry per mode (length ``M + 1``), already multiplied by
    ``sqrt(dt)`` and the noise amplitude; entries on noiseless modes must be
    zero.  The update is

        u_k+ = (u_k + dt (N(u) + g)_k + dW_k) / (1 + dt mu_k (mu_k - lam) / 2).
    """
    p = params if params.scheme == "imex" else replace(params, scheme="imex")
    integ = integrator(p)
    dW = np.asarray(dW, dtype=float)
    if dW.shape[-1] != p.M + 1:
        raise ShapeError(f"dW needs {p.M + 1} entries per path, got {dW.shape[-1]}")
    if integ.inactive.size and np.any(dW[..., integ.inactive] != 0):
        raise ShapeError("dW has energy on modes without noise")
    z = dW[..., integ.active] / (integ.sigma[integ.active] * math.sqrt(p.dt))
    return step(state, p, z, extra_drift)


def step_coupled_degenerate(pair, params, N=None, z=None, h=None):
    """One synchronous step of the base path and the low-mode-corrected partner.

    The partner replaces ``lam v`` by ``lam Pi_h v + lam Pi_l u`` in the drift.
    """
    noise = params.noise
    if noise.is_white:
        from .errors import VariantError

        raise VariantError("degenerate coupling needs degenerate noise")
    N = noise.N if N is None else N
    if not validate_a2(noise, params.lam):
        raise ValidationError("(A2) fails for this noise and lambda")
    integ = integrator(params)
    X = pair.u - pair.partner
    g = np.zeros_like(X)
    g[..., 1 : N + 1] = 0.5 * params.lam * integ.mu[1 : N + 1] * X[..., 1 : N + 1]
    z = np.asarray(z, dtype=float)
    inc, cost = integ.girsanov(g, z, h)
    xi = integ.b_inverse_norm(g)
    hh = params.dt if h is None else h
    return replace(
        pair,
        u=integ.advance(pair.u, z, None, h),
        partner=integ.advance(pair.partner, z, g, h),
        t=pair.t + hh,
        log_weight=pair.log_weight + inc,
        cost=pair.cost + cost,
        xi_sup=np.maximum(pair.xi_sup, xi),
    )


def step_coupled_white(pair, params, sched, z, h=None):
    """One step of the white-noise coupling with partner pull ``aleph(u - w) / gamma``."""
    if not params.noise.is_white:
        from .errors import VariantError

        raise VariantError("white coupling needs the white noise")
    hh = params.dt if h is None else h
    if pair.t + hh > sched.T:
        raise ScheduleError("step would cross the coupling horizon")
    gam = gamma_value(sched, pair.t)
    if gam <= 0:
        raise ScheduleError(f"gamma({pair.t}) = {gam} is not positive")
    integ = integrator(params)
    Y = pair.u - pair.partner
    g = Y / gam
    g[..., 0] = 0.0
    z = np.asarray(z, dtype=float)
    inc, cost = integ.girsanov(g, z, h)
    ynorm2 = seminorm(Y, -1) ** 2
    return replace(
        pair,
        u=integ.advance(pair.u, z, None, h),
        partner=integ.advance(pair.partner, z, g, h),
        t=pair.t + hh,
        log_weight=pair.log_weight + inc,
        cost=pair.cost + cost,
        ledger_integral=pair.ledger_integral + hh * ynorm2 / gam**2,
        xi_sup=np.maximum(pair.xi_sup, integ.b_inverse_norm(g)),
    )


# ---------------------------------------------------------------- seeding


_MASK64 = (1 << 64) - 1


def mix64(seed, index):
    """SplitMix64 finaliser applied to ``seed + (index + 1) * golden``."""
    z = (int(seed) + (int(index) + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def path_seed(seed, path_index):
    return mix64(seed, path_index)


class NoiseStream:
    """Per-path Gaussian streams, drawn in blocks of steps."""

    def __init__(self, seed, start, stop, width, block_steps=None):
        self.rngs = [np.random.Generator(np.random.PCG64(path_seed(seed, i))) for i in range(start, stop)]
        self.width = width
        P = stop - start
        self.block = block_steps or max(1, min(128, 2_000_000 // max(1, P * max(width, 1))))
        self._buf = None
        self._pos = self.block

    def next(self):
        if self._pos == self.block:
            self._buf = np.stack(
                [rng.standard_normal((self.block, self.width)) for rng in self.rngs], axis=1
            )
            self._pos = 0
        z = self._buf[self._pos]
        self._pos += 1
        return z


def _blocks(paths):
    return [(s, min(s + BLOCK_SIZE, paths)) for s in range(0, paths, BLOCK_SIZE)]


def _run_blocks(fn, tasks, workers):
    if workers is None or workers <= 1 or len(tasks) == 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*tasks)))


def _step_grid(t_final, dt):
    n = int(math.floor(t_final / dt + 1e-9))
    hs = [dt] * n
    rest = t_final - n * dt
    if rest > 1e-12 * max(t_final, 1.0):
        hs.append(rest)
    return hs


def _nearest_steps(times, hs):
    clock = np.concatenate([[0.0], np.cumsum(hs)])
    return [int(np.argmin(np.abs(clock - t))) for t in times]


def _record_indices(times, hs):
    clock = np.concatenate([[0.0], np.cumsum(hs)])
    idx = []
    for t in times:
        k = int(np.argmin(np.abs(clock - t)))
        if abs(clock[k] - t) > 1e-9 * max(1.0, t):
            raise ValidationError(f"record time {t} is not on the step grid")
        idx.append(k)
    return idx


# ---------------------------------------------------------------- ensembles


@dataclass
class EnsembleResult:
    times: np.ndarray
    endpoints: np.ndarray
    snapshots: np.ndarray | None
    failed_step: np.ndarray
    seed: int
    window_means: np.ndarray | None = None

    @property
    def ok(self):
        return self.failed_step < 0

    @property
    def divergence_rate(self):
        return float(np.mean(~self.ok))


def moments_observable(u):
    """Coefficients and their squares, side by side."""
    return np.concatenate([u, u * u], axis=-1)


def _simulate_block(params, x, hs, rec_idx, windows, observable, stride, seed, start, stop):
    integ = integrator(params)
    P = stop - start
    u = np.tile(x, (P, 1))
    stream = NoiseStream(seed, start, stop, integ.n_active)
    failed = np.full(P, -1)
    snaps = np.empty((len(rec_idx), P, x.size)) if rec_idx else None
    where = {k: j for j, k in enumerate(rec_idx)}
    sums = counts = None
    if windows:
        width = observable(u[:1]).shape[-1]
        sums = np.zeros((len(windows), P, width))
        counts = np.zeros(len(windows))
    with np.errstate(over="ignore", invalid="ignore"):
        if 0 in where:
            snaps[where[0]] = u
        for k, h in enumerate(hs, start=1):
            u = integ.advance(u, stream.next(), None, None if h == params.dt else h)
            bad = ~np.isfinite(u).all(axis=-1) | (seminorm(u, -1) > params.guard)
            if bad.any():
                fresh = bad & (failed < 0)
                failed[fresh] = k
                u[bad] = x
            if k in where:
                snaps[where[k]] = u
            if windows and k % stride == 0:
                obs = None
                for j, (k0, k1) in enumerate(windows):
                    if k0 < k <= k1:
                        obs = observable(u) if obs is None else obs
                        sums[j] += obs
                        counts[j] += 1
    endpoints = u
    dead = failed >= 0
    if dead.any():
        endpoints = endpoints.copy()
        endpoints[dead] = np.nan
        if snaps is not None:
            for j, k in enumerate(rec_idx):
                snaps[j, dead & (failed <= k)] = np.nan
    means = None
    if windows:
        means = sums / np.maximum(counts, 1)[:, None, None]
        means[:, dead] = np.nan
    return endpoints, snaps, failed, means


def simulate_ensemble(
    params, x, t_final, paths, seed, record_times=None, workers=1,
    windows=None, observable=moments_observable, stride=1,
):
    """Independent paths of the base dynamics from a common initial field.

    Path ``i`` draws its noise from ``PCG64(mix64(seed, i))``, so results do
    not depend on ``workers``.  Diverged paths are flagged in ``failed_step``
    and their outputs set to NaN.

    Parameters
    ----------
    record_times : sequence of float, optional
        Times (on the step grid) at which full snapshots are kept.
    windows : sequence of (t0, t1), optional
        Per-path time averages of ``observable`` over the steps in
        ``(t0, t1]`` whose index is a multiple of ``stride``; returned as
        ``window_means`` with shape ``(len(windows), paths, width)``.
    observable : callable
        Maps a batch ``(P, M + 1)`` to ``(P, width)``; must be picklable
        when ``workers > 1``.
    """
    x = coefficients(x).astype(float)
    if x.size != params.M + 1:
        raise ShapeError("initial field truncation differs from params.M")
    if abs(x[0] - params.mass_c) > 1e-12:
        raise ValidationError(f"initial mass {x[0]} differs from mass_c={params.mass_c}")
    if paths < 1:
        raise ValidationError("need at least one path")
    hs = _step_grid(t_final, params.dt)
    times = [] if record_times is None else list(record_times)
    rec_idx = _record_indices(times, hs) if times else []
    win_idx = []
    for t0, t1 in windows or ():
        if not 0 <= t0 < t1 <= t_final * (1 + 1e-12):
            raise ValidationError(f"window ({t0}, {t1}) outside [0, {t_final}]")
        win_idx.append(tuple(_nearest_steps([t0, t1], hs)))
    tasks = [(params, x, hs, rec_idx, win_idx, observable, stride, seed, s, e) for s, e in _blocks(paths)]
    parts = _run_blocks(_simulate_block, tasks, workers)
    endpoints = np.concatenate([p[0] for p in parts])
    snaps = np.concatenate([p[1] for p in parts], axis=1) if rec_idx else None
    failed = np.concatenate([p[2] for p in parts])
    means = np.concatenate([p[3] for p in parts], axis=1) if win_idx else None
    tally.record(failed)
    return EnsembleResult(np.asarray(times, dtype=float), endpoints, snaps, failed, seed, means)


@dataclass
class CouplingResult:
    final: CoupledPath
    failed_step: np.ndarray
    times: np.ndarray
    diff_norm: np.ndarray | None = None
    ledger: np.ndarray | None = None
    seed: int = 0
    schedule: GammaSchedule | None = None
    initial_distance: float = 0.0

    @property
    def ok(self):
        return self.failed_step < 0

    @property
    def weights(self):
        return np.exp(self.final.log_weight[self.ok])


def _mark_bad(pair, failed, k, guard, x, y):
    bad = (
        ~np.isfinite(pair.u).all(axis=-1)
        | ~np.isfinite(pair.partner).all(axis=-1)
        | (seminorm(pair.u, -1) > guard)
        | (seminorm(pair.partner, -1) > guard)
    )
    if bad.any():
        failed[bad & (failed < 0)] = k
        pair.u[bad] = x
        pair.partner[bad] = y


def _degenerate_block(params, x, y, hs, record, seed, start, stop):
    integ = integrator(params)
    P = stop - start
    pair = CoupledPath.start(x, y, batch=P)
    stream = NoiseStream(seed, start, stop, integ.n_active)
    failed = np.full(P, -1)
    norms = [seminorm(pair.difference, -1)] if record else None
    with np.errstate(over="ignore", invalid="ignore"):
        for k, h in enumerate(hs, start=1):
            pair = step_coupled_degenerate(pair, params, None, stream.next(), None if h == params.dt else h)
            _mark_bad(pair, failed, k, params.guard, x, y)
            if record:
                norms.append(seminorm(pair.difference, -1))
    return pair, failed, (np.array(norms) if record else None)


def _concat_pairs(parts, t):
    def cat(attr):
        return np.concatenate([getattr(p, attr) for p in parts])

    return CoupledPath(
        cat("u"), cat("partner"), t, cat("log_weight"), cat("ledger_integral"), cat("xi_sup"), cat("cost")
    )


def couple_degenerate(params, x, y, t_final, paths, seed, record=False, workers=1):
    """Run the low-mode coupling for ``paths`` synchronous pairs up to ``t_final``."""
    x, y = coefficients(x).astype(float), coefficients(y).astype(float)
    if x[0] != y[0]:
        raise ValidationError("x and y must carry the same mass")
    hs = _step_grid(t_final, params.dt)
    tasks = [(params, x, y, hs, record, seed, s, e) for s, e in _blocks(paths)]
    parts = _run_blocks(_degenerate_block, tasks, workers)
    final = _concat_pairs([p[0] for p in parts], float(np.sum(hs)))
    failed = np.concatenate([p[1] for p in parts])
    times = np.concatenate([[0.0], np.cumsum(hs)])
    norms = np.concatenate([p[2] for p in parts], axis=1) if record else None
    tally.record(failed)
    return CouplingResult(final, failed, times, norms, None, seed, None, float(seminorm(x - y, -1)))


def white_step_sizes(params, sched, kappa=0.5, eps=None):
    """Step lengths up to ``T - eps``: ``dt`` away from the horizon, ``kappa gamma(t)`` near it."""
    eps = 1e-6 * sched.T if eps is None else eps
    stop = sched.T - eps
    hs, t = [], 0.0
    while stop - t > 1e-15 * sched.T:
        h = min(params.dt, kappa * sched.value(t), stop - t)
        hs.append(h)
        t += h
    return hs


def _white_block(params, sched, x, y, hs, record, seed, start, stop):
    integ = integrator(params)
    P = stop - start
    pair = CoupledPath.start(x, y, batch=P)
    stream = NoiseStream(seed, start, stop, integ.n_active)
    failed = np.full(P, -1)
    norms, ledgers = None, None
    if record:
        y2 = seminorm(pair.difference, -1) ** 2
        norms = [np.sqrt(y2)]
        ledgers = [y2 / (sched.a * sched.gamma0)]
    with np.errstate(over="ignore", invalid="ignore"):
        t = 0.0
        for k, h in enumerate(hs, start=1):
            pair = step_coupled_white(pair, params, sched, stream.next(), None if h == params.dt else h)
            _mark_bad(pair, failed, k, params.guard, x, y)
            t += h
            if record:
                y2 = seminorm(pair.difference, -1) ** 2
                norms.append(np.sqrt(y2))
                ledgers.append(pair.ledger_integral + y2 / (sched.a * sched.value(t)))
    if record:
        return pair, failed, np.array(norms), np.array(ledgers)
    return pair, failed, None, None


def couple_white(params, sched, x, y, paths, seed, kappa=0.5, eps=None, record=False, workers=1):
    """Run the white-noise coupling up to ``T - eps`` (default ``eps = 1e-6 T``)."""
    x, y = coefficients(x).astype(float), coefficients(y).astype(float)
    if x[0] != y[0]:
        raise ValidationError("x and y must carry the same mass")
    hs = white_step_sizes(params, sched, kappa, eps)
    tasks = [(params, sched, x, y, hs, record, seed, s, e) for s, e in _blocks(paths)]
    parts = _run_blocks(_white_block, tasks, workers)
    final = _concat_pairs([p[0] for p in parts], float(np.sum(hs)))
    failed = np.concatenate([p[1] for p in parts])
    times = np.concatenate([[0.0], np.cumsum(hs)])
    norms = np.concatenate([p[2] for p in parts], axis=1) if record else None
    ledgers = np.concatenate([p[3] for p in parts], axis=1) if record else None
    tally.record(failed)
    return CouplingResult(final, failed, times, norms, ledgers, seed, sched, float(seminorm(x - y, -1)))


# ---------------------------------------------------------------- dumps


def _fmt(v):
    return repr(float(v))


def write_trajectory_csv(path, times, coeffs, reduced=False):
    """``t,mode_0..mode_M`` rows, or ``t,seminorm_m1,mass`` when ``reduced``."""
    coeffs = np.asarray(coeffs)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if reduced:
            w.writerow(["t", "seminorm_m1", "mass"])
            for t, c in zip(times, coeffs):
                w.writerow([_fmt(t), _fmt(seminorm(c, -1)), _fmt(c[0])])
        else:
            w.writerow(["t"] + [f"mode_{k}" for k in range(coeffs.shape[-1])])
            for t, c in zip(times, coeffs):
                w.writerow([_fmt(t)] + [_fmt(v) for v in c])


def write_endpoints_csv(path, endpoints):
    endpoints = np.asarray(endpoints)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path"] + [f"mode_{k}" for k in range(endpoints.shape[-1])])
        for i, c in enumerate(endpoints):
            w.writerow([i] + [_fmt(v) for v in c])
