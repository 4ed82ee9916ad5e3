"""Monte Carlo checks of Harnack-type inequalities for the Galerkin semigroup.

Every check returns a :class:`CheckReport` comparing a left-hand side with a
right-hand side, both estimated from seeded ensembles, and passes when the
slack ``rhs - lhs`` is no worse than ``-3`` combined standard errors.
Budgets are closed-form; gradients of the test functionals are analytic.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import (
    GammaSchedule,
    couple_degenerate,
    couple_white,
    simulate_ensemble,
)
from .errors import EstimatorError, ValidationError, VariantError
from .noise import alpha_rate, bstar_norm, op_norm_binv_a_pil, validate_a2
from .spectral import coefficients, seminorm

__all__ = [
    "TestFunctional",
    "HarnackBudget",
    "CheckReport",
    "Z_SCORE",
    "asymptotic_budget",
    "power_factor",
    "log_harnack_budget",
    "white_entropy_budget",
    "degenerate_entropy_budget",
    "q_moment_budget",
    "gradient_prefactor",
    "coupling_run",
    "estimate_semigroup",
    "check_asymptotic_log_harnack",
    "check_power_harnack",
    "check_log_harnack_white",
    "check_entropy_bound",
    "check_weight_normalization",
    "check_q_moment",
    "check_exponential_moment",
    "check_ergodic_decay",
    "check_gradient_estimate",
    "write_jsonl",
]

Z_SCORE = 3.0
ADVISORY = " [advisory]"


@dataclass(frozen=True)
class TestFunctional:
    """Bounded positive functional of the coefficient ``<u, e_k>``.

    ``exp_sin_mode``: ``exp(sin(s))``.  ``bounded_affine``: ``2 + clip(s, -1, 1)``.
    ``user_table``: piecewise-linear interpolation of ``table`` (pairs
    ``(s, value)`` with positive values, constant outside the table).
    """

    __test__ = False  # not a pytest class

    kind: str
    mode_index: int = 1
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in ("exp_sin_mode", "bounded_affine", "user_table"):
            raise ValidationError(f"unknown test functional {self.kind!r}")
        if self.mode_index < 1:
            raise ValidationError("test functionals act on a non-constant mode")
        if self.kind == "user_table":
            tab = tuple((float(s), float(v)) for s, v in self.table)
            if len(tab) < 2 or any(b[0] <= a[0] for a, b in zip(tab, tab[1:])):
                raise ValidationError("table needs >= 2 points with increasing abscissae")
            if min(v for _, v in tab) <= 0:
                raise ValidationError("table values must be positive")
            object.__setattr__(self, "table", tab)

    @classmethod
    def exp_sin(cls, k=1):
        return cls("exp_sin_mode", k)

    def _s(self, u):
        return coefficients(u)[..., self.mode_index]

    def __call__(self, u):
        s = self._s(u)
        if self.kind == "exp_sin_mode":
            return np.exp(np.sin(s))
        if self.kind == "bounded_affine":
            return 2.0 + np.clip(s, -1.0, 1.0)
        xs, vs = zip(*self.table)
        return np.interp(s, xs, vs)

    def log(self, u):
        if self.kind == "exp_sin_mode":
            return np.sin(self._s(u))
        return np.log(self(u))

    @property
    def bounds(self):
        if self.kind == "exp_sin_mode":
            return math.exp(-1.0), math.e
        if self.kind == "bounded_affine":
            return 1.0, 3.0
        vs = [v for _, v in self.table]
        return min(vs), max(vs)

    @property
    def _kpi(self):
        return self.mode_index * math.pi

    @property
    def grad_norm(self):
        """Lipschitz constant with respect to ``|.|_{-1}``."""
        if self.kind == "exp_sin_mode":
            return math.e * self._kpi
        if self.kind == "bounded_affine":
            return self._kpi
        return self._kpi * max(abs(b[1] - a[1]) / (b[0] - a[0]) for a, b in zip(self.table, self.table[1:]))

    @property
    def grad_log_norm(self):
        """Lipschitz constant of ``log phi`` with respect to ``|.|_{-1}``."""
        if self.kind == "exp_sin_mode":
            return self._kpi
        if self.kind == "bounded_affine":
            return self._kpi
        return self._kpi * max(
            abs(b[1] - a[1]) / (b[0] - a[0]) / min(a[1], b[1]) for a, b in zip(self.table, self.table[1:])
        )


@dataclass(frozen=True)
class HarnackBudget:
    Phi: float
    Psi: float
    power_factor: float = 1.0


@dataclass(frozen=True)
class CheckReport:
    name: str
    lhs: float
    rhs: float
    stderr_lhs: float
    stderr_rhs: float
    slack: float
    passed: bool
    ensemble: int
    seed: int

    @classmethod
    def build(cls, name, lhs, rhs, stderr_lhs, stderr_rhs, ensemble, seed, z=Z_SCORE):
        lhs, rhs = float(lhs), float(rhs)
        sl, sr = float(stderr_lhs), float(stderr_rhs)
        slack = rhs - lhs
        ok = bool(np.isfinite(slack) and slack >= -z * (sl + sr))
        return cls(name, lhs, rhs, sl, sr, slack, ok, int(ensemble), int(seed))

    @property
    def advisory(self):
        return "[advisory" in self.name

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return {k: d[k] for k in ("name", "lhs", "rhs", "stderr_lhs", "stderr_rhs", "slack", "pass", "ensemble", "seed")}

    def to_json(self):
        return json.dumps(self.to_dict())

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: lhs={self.lhs:.6g} rhs={self.rhs:.6g} slack={self.slack:.3g}"


def write_jsonl(reports, path):
    with open(path, "w") as fh:
        for r in reports:
            fh.write(r.to_json() + "\n")


# ---------------------------------------------------------------- budgets


def _dist(x, y):
    return float(seminorm(coefficients(x) - coefficients(y), -1))


def asymptotic_budget(noise, lam, t, dist):
    """``Phi`` and ``Psi`` of the asymptotic log-Harnack inequality.

    ``Phi = lam / (8 alpha) (1 - e^{-2 alpha t}) ||B^{-1} A Pi_l||^2 d^2`` and
    ``Psi = e^{-alpha t} d``.
    """
    alpha = alpha_rate(noise.N, lam)
    op = op_norm_binv_a_pil(noise)
    phi = lam / (8 * alpha) * -math.expm1(-2 * alpha * t) * op**2 * dist**2
    return HarnackBudget(phi, math.exp(-alpha * t) * dist)


def degenerate_entropy_budget(noise, lam, t, dist, form="stated"):
    """Bound on ``E[M log M]`` for the low-mode coupling.

    ``form="stated"`` gives ``Phi`` of :func:`asymptotic_budget`;
    ``form="derived"`` integrates ``1/2 |xi|^2`` with the pathwise bound
    ``|xi| <= lam/2 ||B^{-1} A Pi_l|| e^{-alpha s} d``, which yields
    ``lam^2 / (16 alpha)`` in place of ``lam / (8 alpha)``.
    """
    base = asymptotic_budget(noise, lam, t, dist).Phi
    if form == "stated":
        return base
    if form == "derived":
        return base * lam / 2
    raise ValidationError(f"unknown budget form {form!r}")


def _r(lam):
    if not math.pi**2 > lam:
        raise ValidationError(f"needs pi^2 > lambda, got {lam:g}")
    return (math.pi**2 - lam) * math.pi**2


def power_factor(lam, power_p, t, dist):
    if not power_p > 1:
        raise ValidationError("power p must exceed 1")
    r = _r(lam)
    return math.exp(power_p * r * dist**2 / (2 * (power_p - 1) * math.expm1(r * t)))


def log_harnack_budget(lam, t, dist):
    r = _r(lam)
    return r * dist**2 / (2 * math.expm1(r * t))


def white_entropy_budget(sched, dist):
    """``d^2 / (2 a gamma(0))``."""
    return dist**2 / (2 * sched.a * sched.gamma0)


def q_moment_budget(sched, q, dist):
    if not q > 1:
        raise ValidationError("q must exceed 1")
    return math.exp((q - 1) * q * dist**2 / (2 * sched.a * sched.gamma0))


def gradient_prefactor(noise, lam):
    """``(lam / (4 alpha))^{1/2} ||B^{-1} A Pi_l||``."""
    return math.sqrt(lam / (4 * alpha_rate(noise.N, lam))) * op_norm_binv_a_pil(noise)


# ---------------------------------------------------------------- estimators


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        raise EstimatorError("no surviving paths")
    se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(np.mean(v)), se


def _endpoints(p, x, t, paths, seed, workers=1):
    return _endpoints_at(p, x, [t], paths, seed, workers)[0]


def _endpoints_at(p, x, times, paths, seed, workers=1):
    """Surviving states at each of ``times`` from one seeded ensemble."""
    if max(times) == 0:
        return [np.tile(coefficients(x), (paths, 1)) for _ in times]
    res = simulate_ensemble(p, x, max(times), paths, seed, record_times=sorted(set(times)), workers=workers)
    if not res.ok.any():
        raise EstimatorError("all paths diverged")
    where = {t: j for j, t in enumerate(sorted(set(times)))}
    return [res.snapshots[where[t], res.ok] for t in times]


def _as_times(t):
    scalar = np.ndim(t) == 0
    return scalar, [float(t)] if scalar else [float(v) for v in t]


def estimate_semigroup(phi, x, t, paths, seed, p, workers=1):
    """``(mean, stderr)`` of ``phi(u(t; x))`` over ``paths`` seeded paths."""
    return _mean_se(phi(_endpoints(p, x, t, paths, seed, workers)))


def _same_mass(x, y):
    if abs(coefficients(x)[0] - coefficients(y)[0]) > 1e-13:
        raise ValidationError("x and y must carry the same mass")


def _delta_log(mean, se):
    return math.log(mean), se / mean


def check_asymptotic_log_harnack(x, y, t, phi, p, N=None, paths=1000, seed=0, workers=1):
    """``P_t log phi(y) <= log P_t phi(x) + Phi + Psi ||grad log phi||``.

    ``t`` may be a sequence; one ensemble per starting point then serves
    every time and a list of reports is returned.
    """
    noise = p.noise
    if noise.is_white:
        raise VariantError("the asymptotic log-Harnack check needs degenerate noise")
    if N is not None and N != noise.N:
        noise = type(noise).degenerate(noise.b, N)
    if not validate_a2(noise, p.lam):
        raise ValidationError(f"(A2) fails for N={noise.N}, lambda={p.lam:g}")
    _same_mass(x, y)
    scalar, times = _as_times(t)
    d = _dist(x, y)
    eys = _endpoints_at(p, y, times, paths, seed, workers)
    exs = _endpoints_at(p, x, times, paths, seed, workers)
    reports = []
    for tt, ey, ex in zip(times, eys, exs):
        budget = asymptotic_budget(noise, p.lam, tt, d)
        lhs, se_l = _mean_se(phi.log(ey))
        log_m, se_r = _delta_log(*_mean_se(phi(ex)))
        rhs = log_m + budget.Phi + budget.Psi * phi.grad_log_norm
        reports.append(CheckReport.build(f"asymptotic_log_harnack t={tt:g}", lhs, rhs, se_l, se_r, paths, seed))
    return reports[0] if scalar else reports


def _require_white(p):
    if not p.noise.is_white:
        raise VariantError("this check needs the white noise B = (-A)^{1/2}")
    _r(p.lam)


def check_power_harnack(x, y, t, phi, power_p, p, paths=1000, seed=0, workers=1):
    """``(P_t phi)^p(y) <= P_t phi^p(x) * power_factor``; ``t`` may be a sequence."""
    _require_white(p)
    _same_mass(x, y)
    scalar, times = _as_times(t)
    d = _dist(x, y)
    eys = _endpoints_at(p, y, times, paths, seed, workers)
    exs = _endpoints_at(p, x, times, paths, seed, workers)
    reports = []
    for tt, ey, ex in zip(times, eys, exs):
        factor = power_factor(p.lam, power_p, tt, d)
        m, se = _mean_se(phi(ey))
        lhs = m**power_p
        se_l = power_p * m ** (power_p - 1) * se
        mp, se_p = _mean_se(phi(ex) ** power_p)
        reports.append(CheckReport.build(
            f"power_harnack p={power_p:g} t={tt:g}", lhs, mp * factor, se_l, se_p * factor, paths, seed
        ))
    return reports[0] if scalar else reports


def check_log_harnack_white(x, y, t, phi, p, paths=1000, seed=0, workers=1):
    """``P_t log phi(y) <= log P_t phi(x) + r d^2 / (2 (e^{rt} - 1))``; ``t`` may be a sequence."""
    _require_white(p)
    _same_mass(x, y)
    scalar, times = _as_times(t)
    d = _dist(x, y)
    eys = _endpoints_at(p, y, times, paths, seed, workers)
    exs = _endpoints_at(p, x, times, paths, seed, workers)
    reports = []
    for tt, ey, ex in zip(times, eys, exs):
        lhs, se_l = _mean_se(phi.log(ey))
        log_m, se_r = _delta_log(*_mean_se(phi(ex)))
        rhs = log_m + log_harnack_budget(p.lam, tt, d)
        reports.append(CheckReport.build(f"log_harnack t={tt:g}", lhs, rhs, se_l, se_r, paths, seed))
    return reports[0] if scalar else reports


# ---------------------------------------------------------------- weights


def coupling_run(x, y, T, a, p, paths, seed, workers=1, record=False):
    """Coupled ensemble for the weight checks: white coupling with schedule
    ``(T, a)`` for white noise, low-mode coupling up to ``T`` otherwise."""
    _same_mass(x, y)
    if p.noise.is_white:
        return couple_white(p, GammaSchedule(T, a, p.lam), x, y, paths, seed, record=record, workers=workers)
    if not validate_a2(p.noise, p.lam):
        raise ValidationError("(A2) fails for this noise and lambda")
    return couple_degenerate(p, x, y, T, paths, seed, record=record, workers=workers)


def _weights(run):
    lw = run.final.log_weight[run.ok]
    if lw.size == 0:
        raise EstimatorError("all coupled paths diverged")
    if not np.all(np.isfinite(lw)):
        raise EstimatorError("non-finite Girsanov weights")
    return np.exp(lw), lw


def _entropy_budget(run, x, y, T, a, p, form):
    d = _dist(x, y)
    if p.noise.is_white:
        return white_entropy_budget(GammaSchedule(T, a, p.lam), d)
    return degenerate_entropy_budget(p.noise, p.lam, T, d, form)


def check_entropy_bound(x, y, T, a, p, paths=2000, seed=0, run=None, workers=1, form="stated"):
    """``E[W log W]`` against the closed-form entropy budget."""
    run = coupling_run(x, y, T, a, p, paths, seed, workers) if run is None else run
    w, lw = _weights(run)
    lhs, se = _mean_se(w * lw)
    rhs = _entropy_budget(run, x, y, T, a, p, form)
    return CheckReport.build(f"entropy_bound T={T:g}", lhs, rhs, se, 0.0, w.size, run.seed)


def check_weight_normalization(run):
    """``E[W] = 1``: reported as ``|mean - 1|`` against zero."""
    w, _ = _weights(run)
    m, se = _mean_se(w)
    return CheckReport.build("weight_normalization", abs(m - 1.0), 0.0, se, 0.0, w.size, run.seed)


def check_q_moment(x, y, T, a, q, p, paths=2000, seed=0, run=None, workers=1):
    """``E[W^q] <= exp((q - 1) q d^2 / (2 a gamma(0)))`` for the white coupling."""
    _require_white(p)
    run = coupling_run(x, y, T, a, p, paths, seed, workers) if run is None else run
    _, lw = _weights(run)
    lhs, se = _mean_se(np.exp(q * lw))
    rhs = q_moment_budget(GammaSchedule(T, a, p.lam), q, _dist(x, y))
    return CheckReport.build(f"q_moment q={q:g} T={T:g}", lhs, rhs, se, 0.0, lw.size, run.seed)


# ---------------------------------------------------------------- long-time


def _exp_observable(varsigma):
    return _ExpMoment(varsigma)


class _ExpMoment:
    def __init__(self, varsigma):
        self.varsigma = varsigma

    def __call__(self, u):
        return np.exp(self.varsigma * seminorm(u, -1) ** 2)[..., None]


def check_exponential_moment(x, varsigma, p, T, paths=256, seed=0, workers=1, stride=10):
    """Stationarity of the time average of ``exp(varsigma |u|_{-1}^2)``.

    One run of length ``2T``; the averages over ``[T/2, T]`` and ``[T, 2T]``
    must be non-increasing within noise, and equal within noise.
    """
    if not math.pi**4 > 2 * varsigma * bstar_norm(p.noise, p.M) ** 2:
        raise ValidationError(
            f"exponential moment needs pi^4 > 2 varsigma ||B*||^2 (varsigma={varsigma:g})"
        )
    res = simulate_ensemble(
        p, x, 2 * T, paths, seed, windows=[(T / 2, T), (T, 2 * T)],
        observable=_exp_observable(varsigma), stride=stride, workers=workers,
    )
    ok = res.ok
    if not ok.any():
        raise EstimatorError("all paths diverged")
    first, se1 = _mean_se(res.window_means[0, ok, 0])
    second, se2 = _mean_se(res.window_means[1, ok, 0])
    n = int(ok.sum())
    return [
        CheckReport.build(f"exponential_moment T={T:g}->2T", second, first, se2, se1, n, seed),
        CheckReport.build(
            f"exponential_moment_stationarity T={T:g}", abs(second - first), 0.0, se1, se2, n, seed
        ),
    ]


def check_ergodic_decay(x, y, phi, p, times, paths=256, seed=0, rate=None, workers=1):
    """``|P_t phi(x) - P_t phi(y)| <= ||grad phi|| e^{-rate t} |x - y|_{-1}``.

    Pairs share their noise, so the difference is estimated path by path.
    The default rate ``(pi^2 - lam) pi^2 / 2`` is what the mode-wise energy
    estimate gives for ``|u - v|_{-1}`` (the full ``(pi^2 - lam) pi^2`` is the
    rate of its square).
    """
    r = _r(p.lam)
    rate = r / 2 if rate is None else rate
    _same_mass(x, y)
    d = _dist(x, y)
    times = sorted(float(t) for t in times)
    reports = []
    if times and times[0] == 0.0:
        reports.append(
            CheckReport.build("ergodic_decay t=0", abs(float(phi(x)) - float(phi(y))), phi.grad_norm * d, 0, 0, paths, seed)
        )
        times = times[1:]
    if not times:
        return reports
    t_final = times[-1]
    rx = simulate_ensemble(p, x, t_final, paths, seed, record_times=times, workers=workers)
    ry = simulate_ensemble(p, y, t_final, paths, seed, record_times=times, workers=workers)
    ok = rx.ok & ry.ok
    for j, t in enumerate(times):
        diff, se = _mean_se(phi(rx.snapshots[j, ok]) - phi(ry.snapshots[j, ok]))
        rhs = phi.grad_norm * math.exp(-rate * t) * d
        reports.append(CheckReport.build(f"ergodic_decay t={t:g}", abs(diff), rhs, se, 0.0, int(ok.sum()), seed))
    return reports


def check_gradient_estimate(x, h, t, phi, p, N=None, paths=1000, seed=0, eps=1e-3, workers=1):
    """Centered-difference gradient of ``P_t phi`` against the variance bound (advisory)."""
    noise = p.noise
    if noise.is_white:
        raise VariantError("the gradient estimate needs degenerate noise")
    if N is not None and N != noise.N:
        noise = type(noise).degenerate(noise.b, N)
    if not validate_a2(noise, p.lam):
        raise ValidationError("(A2) fails for this noise and lambda")
    h = coefficients(h).astype(float).copy()
    h[0] = 0.0
    hn = float(seminorm(h, -1))
    if hn == 0:
        raise ValidationError("direction must have a non-constant part")
    h /= hn
    x = coefficients(x).astype(float)
    ep = _endpoints(p, x + eps * h, t, paths, seed, workers)
    em = _endpoints(p, x - eps * h, t, paths, seed, workers)
    n = min(len(ep), len(em))
    g, se_g = _mean_se((phi(ep[:n]) - phi(em[:n])) / (2 * eps))
    e0 = _endpoints(p, x, t, paths, seed, workers)
    vals = phi(e0)
    var = float(np.var(vals, ddof=1)) if vals.size > 1 else 0.0
    alpha = alpha_rate(noise.N, p.lam)
    rhs = gradient_prefactor(noise, p.lam) * math.sqrt(var) + phi.grad_norm * math.exp(-alpha * t)
    # delta-method error of the standard deviation
    se_r = gradient_prefactor(noise, p.lam) * math.sqrt(var / (2 * max(vals.size - 1, 1)))
    return CheckReport.build(f"gradient_estimate t={t:g}{ADVISORY}", abs(g), rhs, se_g, se_r, n, seed)
