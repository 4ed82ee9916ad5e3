"""Command line entry point: ``spinodal <experiment> --config FILE``.

Each run writes ``manifest.txt`` (a loadable config carrying the resolved
seed and code version), ``reports.jsonl`` and any dumps into ``--out``.
Exit status: 0 when every non-advisory check passes, 1 otherwise, 2 on an
invalid configuration (JSON message on stderr), 3 when more than 1% of the
simulated paths diverged.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .config import load_config, parse_phi
from .dynamics import (
    GammaSchedule,
    couple_degenerate,
    couple_white,
    simulate_ensemble,
    tally,
    write_endpoints_csv,
    write_trajectory_csv,
)
from .errors import SpinodalError, ValidationError
from .gibbs import GibbsTarget, compare_invariant, write_samples_csv
from .harnack import (
    CheckReport,
    check_asymptotic_log_harnack,
    check_entropy_bound,
    check_ergodic_decay,
    check_exponential_moment,
    check_gradient_estimate,
    check_log_harnack_white,
    check_power_harnack,
    check_q_moment,
    check_weight_normalization,
    write_jsonl,
)
from .noise import alpha_rate, validate_a1, validate_a2
from .spectral import seminorm

__all__ = ["main", "run", "EXPERIMENTS"]

EXPERIMENTS = ("simulate", "couple-degenerate", "couple-white", "harnack", "gibbs", "moments", "validate")
HARNACK_KINDS = ("asymptotic", "power", "log", "ergodic", "gradient")
MAX_DIVERGENCE = 0.01


def _validate(cfg, experiment, kind):
    """Run the assumption checks that apply to ``experiment`` before any compute."""
    p = cfg.params
    noise = p.noise
    if not validate_a1(noise):
        raise ValidationError("(A1) fails: the noise moves the mass")
    needs_degenerate = experiment == "couple-degenerate" or (experiment == "harnack" and kind in ("asymptotic", "gradient"))
    needs_white = experiment in ("couple-white", "gibbs") or (experiment == "harnack" and kind in ("power", "log"))
    if needs_degenerate and noise.is_white:
        raise ValidationError(f"{experiment} {kind or ''} needs degenerate noise".strip())
    if needs_white and not noise.is_white:
        raise ValidationError(f"{experiment} {kind or ''} needs white noise".strip())
    if not noise.is_white and not validate_a2(noise, p.lam):
        raise ValidationError(
            f"(A2) fails: need b_1..b_N > 0 and (N+1)^2 pi^2 > lambda; "
            f"N={noise.N}, (N+1)^2 pi^2={(noise.N + 1) ** 2 * math.pi ** 2:.6g}, lambda={p.lam:g}"
        )
    if (needs_white or (experiment == "harnack" and kind == "ergodic")) and not math.pi**2 > p.lam:
        raise ValidationError(f"pi^2 > lambda fails: lambda={p.lam:g}")


def _simulate(cfg, seed, workers, out):
    p = cfg.params
    x = cfg.field_of("x", [p.mass_c])
    T = cfg.get("T")
    paths = cfg.get("paths", 100, int)
    times = cfg.get("t", [0.0, T], "list") if "t" in cfg.experiment else [0.0, T]
    res = simulate_ensemble(p, x, T, paths, seed, record_times=times, workers=workers)
    write_trajectory_csv(os.path.join(out, "trajectory.csv"), res.times, res.snapshots[:, 0])
    write_endpoints_csv(os.path.join(out, "endpoints.csv"), res.endpoints)
    drift = np.nanmax(np.abs(res.snapshots[..., 0] - p.mass_c)) if res.ok.any() else np.inf
    return [CheckReport.build("mass_conservation", drift, 1e-13, 0, 0, paths, seed)]


def _couple_degenerate(cfg, seed, workers, out):
    p = cfg.params
    x, y = cfg.field_of("x"), cfg.field_of("y")
    T = cfg.get("T")
    paths = cfg.get("paths", 100, int)
    tol = cfg.get("contraction_tol", 1.05)
    run = couple_degenerate(p, x, y, T, paths, seed, record=True, workers=workers)
    d = run.initial_distance
    alpha = alpha_rate(p.noise.N, p.lam)
    ratio = run.diff_norm[:, run.ok] * np.exp(alpha * run.times)[:, None] / d if d > 0 else np.zeros(1)
    reports = [
        CheckReport.build(f"degenerate_contraction T={T:g}", float(np.max(ratio)), tol, 0, 0, paths, seed),
        check_weight_normalization(run),
        check_entropy_bound(x, y, T, None, p, run=run),
    ]
    return reports


def _couple_white(cfg, seed, workers, out):
    p = cfg.params
    x, y = cfg.field_of("x"), cfg.field_of("y")
    T, a = cfg.get("T"), cfg.get("a", 1.0)
    paths = cfg.get("paths", 100, int)
    q = cfg.get("q", 2.0)
    sched = GammaSchedule(T, a, p.lam)
    eps = cfg.get("eps", 1e-6 * T)
    run = couple_white(p, sched, x, y, paths, seed, kappa=cfg.get("kappa", 0.5), eps=eps, record=True, workers=workers)
    d = run.initial_distance
    ok = run.ok
    budget0 = d**2 / (a * sched.gamma0)
    ledger = float(np.max(run.ledger[:, ok])) if d > 0 else 0.0
    final = float(np.max(seminorm(run.final.difference[ok], -1)))
    return [
        CheckReport.build(f"white_ledger T={T:g}", ledger, cfg.get("ledger_tol", 1.02) * budget0, 0, 0, paths, seed),
        CheckReport.build(f"coupling_success T={T:g}", final, cfg.get("coupling_tol", 1e-4) * d, 0, 0, paths, seed),
        check_weight_normalization(run),
        check_entropy_bound(x, y, T, a, p, run=run),
        check_q_moment(x, y, T, a, q, p, run=run),
    ]


def _harnack(cfg, seed, workers, out, kind):
    p = cfg.params
    x, y = cfg.field_of("x"), cfg.field_of("y", cfg.get("x", kind="list"))
    times = cfg.get("t", kind="list")
    paths = cfg.get("paths", 1000, int)
    phi = parse_phi(cfg.experiment.get("phi", "exp_sin_mode:1"))
    if kind == "ergodic":
        rate = cfg.get("rate") if "rate" in cfg.experiment else None
        return check_ergodic_decay(x, y, phi, p, times, paths, seed, rate=rate, workers=workers)
    if kind == "asymptotic":
        return check_asymptotic_log_harnack(x, y, times, phi, p, None, paths, seed, workers)
    if kind == "power":
        return check_power_harnack(x, y, times, phi, cfg.get("p", 2.0), p, paths, seed, workers)
    if kind == "log":
        return check_log_harnack_white(x, y, times, phi, p, paths, seed, workers)
    h = cfg.field_of("h", [0.0, 1.0])
    return [check_gradient_estimate(x, h, t, phi, p, None, paths, seed, cfg.get("eps", 1e-3), workers) for t in times]


def _gibbs(cfg, seed, workers, out):
    p = cfg.params
    target = GibbsTarget.for_params(p, cfg.experiment.get("variant", "finite_n").strip())
    T_long = cfg.get("T_long")
    reports, chain = compare_invariant(
        p, target, T_long, cfg.get("burn_in", T_long / 5), cfg.get("paths", 64, int),
        cfg.get("chain_steps", 10000, int), seed, chains=cfg.get("chains", 32, int),
        beta=cfg.get("beta", 0.2), modes=cfg.get("modes", 5, int), workers=workers,
    )
    write_samples_csv(os.path.join(out, "samples.csv"), chain.samples)
    return reports


def _moments(cfg, seed, workers, out):
    p = cfg.params
    x = cfg.field_of("x", [p.mass_c])
    return check_exponential_moment(
        x, cfg.get("varsigma"), p, cfg.get("T"), cfg.get("paths", 256, int), seed, workers, cfg.get("stride", 10, int)
    )


def run(experiment, config_path, seed=None, out=".", workers=1, kind=None):
    """Run one experiment; returns the exit code."""
    try:
        cfg = load_config(config_path)
        if experiment not in EXPERIMENTS:
            raise ValidationError(f"unknown experiment {experiment!r}")
        if experiment == "harnack":
            kind = kind or cfg.experiment.get("kind", "asymptotic").strip()
            if kind not in HARNACK_KINDS:
                raise ValidationError(f"unknown harnack kind {kind!r}")
        seed = cfg.seed if seed is None else seed
        if not 0 <= seed < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        _validate(cfg, experiment, kind)
    except ValidationError as exc:
        print(json.dumps({"error": "ValidationError", "message": str(exc)}), file=sys.stderr)
        return 2
    os.makedirs(out, exist_ok=True)
    extra = {"code_version": __version__}
    if kind:
        extra["kind"] = kind
    with open(os.path.join(out, "manifest.txt"), "w") as fh:
        fh.write(cfg.manifest_text(experiment, seed, extra))
    tally.reset()
    try:
        if experiment == "validate":
            reports = [CheckReport.build("validate", 0.0, 0.0, 0, 0, 0, seed)]
        elif experiment == "simulate":
            reports = _simulate(cfg, seed, workers, out)
        elif experiment == "couple-degenerate":
            reports = _couple_degenerate(cfg, seed, workers, out)
        elif experiment == "couple-white":
            reports = _couple_white(cfg, seed, workers, out)
        elif experiment == "harnack":
            reports = _harnack(cfg, seed, workers, out, kind)
        elif experiment == "gibbs":
            reports = _gibbs(cfg, seed, workers, out)
        else:
            reports = _moments(cfg, seed, workers, out)
    except ValidationError as exc:
        print(json.dumps({"error": "ValidationError", "message": str(exc)}), file=sys.stderr)
        return 2
    except SpinodalError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    write_jsonl(reports, os.path.join(out, "reports.jsonl"))
    for r in reports:
        print(r.line())
    if tally.rate > MAX_DIVERGENCE:
        print(json.dumps({"error": "DivergenceRate", "rate": tally.rate}), file=sys.stderr)
        return 3
    return 0 if all(r.passed for r in reports if not r.advisory) else 1


def main(argv=None):
    ap = argparse.ArgumentParser(prog="spinodal", description=__doc__.splitlines()[0])
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default=".")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--kind", choices=HARNACK_KINDS, default=None)
    args = ap.parse_args(argv)
    return run(args.experiment, args.config, args.seed, args.out, args.workers, args.kind)


if __name__ == "__main__":
    sys.exit(main())
