"""Acceptance suite: one test per criterion at its stated tolerance.

Every test records a PASS/FAIL line that is repeated in the terminal
summary.  Runtimes are reported, not enforced.
"""
import math
import time
import warnings

import numpy as np
import pytest

from spinodal.dynamics import (
    GammaSchedule,
    ModelParams,
    couple_degenerate,
    couple_white,
    integrator,
    simulate_ensemble,
)
from spinodal.gibbs import GibbsTarget, compare_invariant, sample_mu_c
from spinodal.harnack import (
    TestFunctional,
    asymptotic_budget,
    check_asymptotic_log_harnack,
    check_entropy_bound,
    check_exponential_moment,
    check_log_harnack_white,
    check_power_harnack,
    check_q_moment,
    check_weight_normalization,
    log_harnack_budget,
    power_factor,
    q_moment_budget,
    white_entropy_budget,
)
from spinodal.noise import NoiseSpec, alpha_rate, amplitudes, apply_b_inverse, op_norm_binv_a_pil
from spinodal.spectral import analyze, mu_array, seminorm, synthesize

pytestmark = pytest.mark.slow

M = 32
DEG = NoiseSpec.degenerate([1.0, 1.0], 2)
PHI = TestFunctional.exp_sin(1)
R_LAM1 = (math.pi**2 - 1.0) * math.pi**2  # 87.5397...


def white_pair(d=0.1):
    x = np.zeros(M + 1)
    x[1] = 0.05
    y = x.copy()
    y[1] += d * math.pi  # |x - y|_{-1} = d
    return x, y


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def test_criterion_01_degenerate_contraction(acceptance_log):
    p = ModelParams(lam=10.0, M=M, dt=1e-5, noise=DEG)
    alpha = alpha_rate(2, 10.0)
    assert alpha == pytest.approx(48.7045, rel=1e-5)
    x = np.zeros(M + 1)
    x[1], x[2] = 0.1, -0.05
    d = np.zeros(M + 1)
    d[1:9] = 1.0 / np.arange(1, 9)
    d *= 0.01 / seminorm(d, -1)
    with Timer() as tm:
        run = couple_degenerate(p, x, x - d, 0.1, 1, 5, record=True)
    ratio = float(np.max(run.diff_norm[:, 0] * np.exp(alpha * run.times) / 0.01))
    ok = ratio <= 1.05 and run.times[-1] == pytest.approx(0.1)
    acceptance_log(1, ok, f"sup |X|e^(at)/|x-y| = {ratio:.6f} <= 1.05  ({tm.seconds:.1f}s)")
    assert ok


@pytest.fixture(scope="module")
def white_runs():
    x, y = white_pair()
    p = ModelParams(lam=1.0, M=M, dt=1e-4)
    out = {}
    for T in (0.01, 0.02):
        with Timer() as tm:
            run = couple_white(p, GammaSchedule(T, 1.0, 1.0), x, y, 2000, 9, record=True)
        out[T] = (run, tm.seconds)
    return p, x, y, out


def test_criterion_02_white_ledger(acceptance_log, white_runs):
    p, x, y, runs = white_runs
    run, secs = runs[0.02]
    sched = GammaSchedule(0.02, 1.0, 1.0)
    budget = 0.1**2 / sched.gamma0
    ledger = float(np.max(run.ledger[:, run.ok]) / budget)
    success = float(np.max(seminorm(run.final.difference[run.ok], -1)) / 0.1)
    ok = ledger <= 1.02 and success <= 1e-4
    acceptance_log(
        2, ok, f"ledger/budget = {ledger:.6f} <= 1.02, |Y(T-eps)|/|x-y| = {success:.3g} <= 1e-4  ({secs:.1f}s)"
    )
    assert ok


def test_criterion_03_entropy_bound(acceptance_log, white_runs):
    p, x, y, runs = white_runs
    assert white_entropy_budget(GammaSchedule(0.01, 1.0, 1.0), 0.1) == pytest.approx(0.312662, rel=1e-3)
    lines, ok = [], True
    for T in (0.01, 0.02):
        run, _ = runs[T]
        ent = check_entropy_bound(x, y, T, 1.0, p, run=run)
        norm = check_weight_normalization(run)
        ok &= ent.passed and norm.passed
        lines.append(f"T={T:g}: E[W log W]={ent.lhs:.4f} (se {ent.stderr_lhs:.2g}) <= {ent.rhs:.6f}, |E[W]-1|={norm.lhs:.3g} (se {norm.stderr_lhs:.2g})")
    acceptance_log(3, ok, "; ".join(lines))
    assert ok


def test_criterion_04_q_moment(acceptance_log, white_runs):
    p, x, y, runs = white_runs
    frozen = q_moment_budget(GammaSchedule(0.01, 1.0, 1.0), 2.0, 0.1)
    assert frozen == pytest.approx(1.86885, rel=1e-3)
    lines, ok = [], True
    for T in (0.01, 0.02):
        rep = check_q_moment(x, y, T, 1.0, 2.0, p, run=runs[T][0])
        ok &= rep.passed
        lines.append(f"T={T:g}: E[W^2]={rep.lhs:.4f} (se {rep.stderr_lhs:.2g}) <= {rep.rhs:.5f}")
    acceptance_log(4, ok, "; ".join(lines))
    assert ok


def test_criterion_05_asymptotic_log_harnack(acceptance_log):
    p = ModelParams(lam=10.0, M=M, dt=1e-5, noise=DEG)
    x = np.zeros(M + 1)
    x[1] = 0.1
    y = x.copy()
    y[1] += 0.01 * math.pi
    b = asymptotic_budget(DEG, 10.0, 0.1, 0.01)
    assert b.Phi == pytest.approx(0.15791, rel=1e-3)
    assert b.Psi == pytest.approx(7.66e-5, rel=2e-3)
    with Timer() as tm:
        reps = check_asymptotic_log_harnack(x, y, [0.05, 0.1], PHI, p, 2, 4000, 21)
    ok = all(r.passed for r in reps)
    detail = ", ".join(f"t={r.name.split('t=')[1]}: slack {r.slack:.4f} (3se {3 * (r.stderr_lhs + r.stderr_rhs):.4f})" for r in reps)
    acceptance_log(5, ok, f"{detail}  ({tm.seconds:.1f}s)")
    assert ok


def test_criterion_06_power_and_log_harnack(acceptance_log):
    p = ModelParams(lam=1.0, M=M, dt=1e-4)
    x, y = white_pair()
    assert power_factor(1.0, 2.0, 0.01, 0.1) == pytest.approx(1.86886, rel=1e-3)
    assert log_harnack_budget(1.0, 0.01, 0.1) == pytest.approx(0.312662, rel=1e-3)
    with Timer() as tm:
        pw = check_power_harnack(x, y, 0.01, PHI, 2.0, p, 4000, 3)
        lg = check_log_harnack_white(x, y, 0.01, PHI, p, 4000, 3)
    ok = pw.passed and lg.passed
    acceptance_log(
        6, ok, f"power slack {pw.slack:.4f}, log slack {lg.slack:.4f}  ({tm.seconds:.1f}s)"
    )
    assert ok


def test_criterion_07_synchronous_decay_rate(acceptance_log):
    """Fitted decay rate of |u(t;x) - u(t;y)|_{-1} against 0.95 (pi^2 - 1) pi^2.

    The energy estimate only proves half this rate for the norm itself, so
    this is expected to fail; the squared-norm rate is printed alongside.
    """
    p = ModelParams(lam=1.0, M=M, dt=1e-4)
    x = np.zeros(M + 1)
    x[1] = 0.05
    y = x.copy()
    y[1] += 0.01 * math.pi
    y[3] += 0.01
    ts = np.round(np.arange(0, 0.1 + 1e-12, 0.005), 6)
    with Timer() as tm:
        rx = simulate_ensemble(p, x, 0.1, 4, 3, record_times=ts)
        ry = simulate_ensemble(p, y, 0.1, 4, 3, record_times=ts)
    dist = seminorm(rx.snapshots - ry.snapshots, -1)
    rates = np.array([-np.polyfit(ts, np.log(dist[:, j]), 1)[0] for j in range(dist.shape[1])])
    target = 0.95 * R_LAM1
    ok = bool(rates.min() >= target)
    acceptance_log(
        7, ok,
        f"min fitted rate {rates.min():.2f} vs required {target:.2f} "
        f"(squared-norm rate {2 * rates.min():.2f}; provable norm rate {R_LAM1 / 2:.2f})  ({tm.seconds:.1f}s)",
    )
    assert ok


def test_criterion_08_linear_invariant_law(acceptance_log):
    p = ModelParams(lam=0.0, M=M, dt=1e-4, nonlinear=False)
    with Timer() as tm:
        res = simulate_ensemble(p, np.zeros(M + 1), 5.0, 256, 4, windows=[(1.0, 5.0)], stride=10)
    wm = res.window_means[0][res.ok]
    K = 5
    first, second = wm[:, 1 : K + 1], wm[:, M + 2 : M + 2 + K]
    mean = first.mean(axis=0)
    var = second.mean(axis=0) - mean**2
    se_var = (second - 2 * mean * first).std(axis=0, ddof=1) / math.sqrt(len(wm))
    mu = mu_array(K)[1:]
    rel = np.abs(var * mu - 1.0)
    assert 1 / mu[0] == pytest.approx(0.101321, rel=1e-5)
    draws = sample_mu_c(0.0, M, np.random.default_rng(4), 100000)[:, 1 : K + 1]
    ref = draws.var(axis=0, ddof=1)
    se_ref = ref * math.sqrt(2 / (len(draws) - 1))
    within = np.abs(var - ref) <= 3 * (se_var + se_ref)
    ok = bool(np.all(rel <= 0.05) and np.all(within))
    acceptance_log(
        8, ok,
        f"max |var mu_k - 1| = {rel.max():.4f} <= 0.05, sample_mu_c agreement {int(within.sum())}/{K}  ({tm.seconds:.1f}s)",
    )
    assert ok


def test_criterion_09_machine_precision_identities(acceptance_log):
    with Timer() as tm:
        p = ModelParams(lam=1.0, M=4, dt=1e-4, mass_c=0.3)
        x = np.zeros(5)
        x[0], x[1] = 0.3, 0.05
        integ = integrator(p)
        rng = np.random.default_rng(0)
        mass = 0.0
        for block in range(10):
            for z in rng.standard_normal((10**5, integ.n_active)):
                x = integ.advance(x, z)
            mass = max(mass, abs(x[0] - 0.3))
        finite = bool(np.all(np.isfinite(x)))
        Y = rng.standard_normal((1000, M + 1))
        Y[:, 0] = 0.0
        identity = float(np.max(np.abs(
            np.linalg.norm(apply_b_inverse(NoiseSpec.white(), Y), axis=-1) - seminorm(Y, -1)
        ) / seminorm(Y, -1)))
        c = rng.standard_normal((1000, M + 1))
        trip = float(np.max(np.abs(analyze(synthesize(c, 4 * M), M) - c)))
        worst = 0.0
        for b in ([1.0, 1.0], [0.5, 3.0], [2.0, 0.1, 1.0]):
            spec = NoiseSpec.degenerate(b)
            sigma = amplitudes(spec, 12)
            mat = np.zeros((13, 12))
            for k in range(1, 13):
                if k <= spec.N:
                    mat[k, k - 1] = mu_array(12)[k] * k * math.pi / sigma[k]
            brute = np.linalg.norm(mat, 2)
            worst = max(worst, abs(op_norm_binv_a_pil(spec) / brute - 1))
    ok = finite and mass <= 1e-13 and identity <= 1e-12 and trip <= 1e-12 and worst <= 1e-6
    acceptance_log(
        9, ok,
        f"mass drift {mass:.1e} over 10^6 steps, identity {identity:.1e}, round trip {trip:.1e}, operator norm {worst:.1e}  ({tm.seconds:.1f}s)",
    )
    assert ok


def test_criterion_10_exponential_moment(acceptance_log):
    p = ModelParams(lam=1.0, M=M, dt=1e-4, noise=DEG)
    assert math.pi**4 / 2 > 10.0
    with Timer() as tm:
        reps = check_exponential_moment(np.zeros(M + 1), 10.0, p, 0.5, 256, 5)
    ok = all(r.passed for r in reps)
    mono, stat = reps
    acceptance_log(
        10, ok,
        f"[T/2,T] avg {mono.rhs:.5f}, [T,2T] avg {mono.lhs:.5f}, |diff| {stat.lhs:.2g} "
        f"(3se {3 * (stat.stderr_lhs + stat.stderr_rhs):.2g})  ({tm.seconds:.1f}s)",
    )
    assert ok


def test_criterion_11_gibbs_cross_check(acceptance_log):
    p = ModelParams(lam=1.0, M=M, dt=1e-4)
    with Timer() as tm:
        reps, chain = compare_invariant(
            p, GibbsTarget.for_params(p, "finite_n"), 2.0, 0.3, 256, 20000, 17, chains=64, beta=0.5, modes=3
        )
    variances = [r for r in reps if r.name.startswith("gibbs var")]
    ok = all(r.passed for r in variances)
    failed = [r.name for r in reps if not r.passed]
    acceptance_log(
        11, ok,
        f"{sum(r.passed for r in variances)}/{len(variances)} variance bands, acceptance {chain.acceptance:.2f}"
        + (f", flagged: {failed}" if failed else "") + f"  ({tm.seconds:.1f}s)",
    )
    if not ok:
        # heuristic oracle: reported as a finding, not a test failure
        warnings.warn(f"Gibbs cross-check outside 3 sigma: {failed}")
