"""Gaussian reference sampling, pCN chains for Gibbs-type targets, and the
comparison of their moments with long-run dynamics.

The reference measure ``mu^c`` is ``N(c e_0, (-A)^{-1})`` on the mass-``c``
slice: mode ``k >= 1`` is centered Gaussian with variance ``(k pi)^{-2}``.
Targets are densities ``exp(-E(u))`` with respect to ``mu^c`` where ``E`` is
a midpoint-grid quadrature of the potential.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .dynamics import NoiseStream, path_seed, simulate_ensemble
from .errors import EstimatorError, SamplerWarning, ValidationError, VariantError
from .harnack import CheckReport
from .potential import F_big, F_n
from .spectral import SpectralField, coefficients, synthesize

__all__ = [
    "GibbsTarget",
    "sample_mu_c",
    "energy",
    "pcn_step",
    "PCNResult",
    "run_pcn",
    "compare_invariant",
    "write_samples_csv",
    "HEURISTIC",
]

VARIANTS = ("limit_F", "finite_n", "gaussian")
HEURISTIC = " [advisory: heuristic oracle]"


@dataclass(frozen=True)
class GibbsTarget:
    """Density ``exp(-mean_Q F(u))`` with respect to ``mu^c``.

    ``limit_F`` uses the logarithmic potential and vanishes off
    ``K = {|u| <= 1}`` (checked on the grid); ``finite_n`` uses the
    polynomial approximation ``F_n`` and is unconstrained; ``gaussian`` is
    ``mu^c`` itself.
    """

    lam: float
    mass_c: float = 0.0
    M: int = 32
    Q: int | None = None
    variant: str = "finite_n"
    n_poly: int = 2

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise VariantError(f"unknown Gibbs variant {self.variant!r}")
        if self.Q is None:
            object.__setattr__(self, "Q", 4 * self.M)
        if self.Q < self.M + 1:
            raise ValidationError("quadrature grid must exceed the truncation")
        if not -1 < self.mass_c < 1:
            raise ValidationError("mass must lie in (-1, 1)")

    @classmethod
    def for_params(cls, p, variant="finite_n"):
        return cls(p.lam, p.mass_c, p.M, p.Q, variant, p.n_poly)


def sample_mu_c(mass_c, M, rng, size=None):
    """Draw from ``N(c e_0, (-A)^{-1})`` truncated at ``M``.

    Returns a :class:`SpectralField` when ``size`` is None, otherwise an
    array of shape ``(size, M + 1)``.
    """
    shape = (M,) if size is None else (size, M)
    c = np.empty(shape[:-1] + (M + 1,))
    c[..., 0] = mass_c
    c[..., 1:] = rng.standard_normal(shape) / (np.arange(1, M + 1) * np.pi)
    return SpectralField(c) if size is None else c


def energy(target, u):
    """Grid quadrature of the potential; ``+inf`` off ``K`` for ``limit_F``."""
    c = coefficients(u)
    if target.variant == "gaussian":
        out = np.zeros(c.shape[:-1])
        return out[()] if out.ndim == 0 else out
    grid = synthesize(c, target.Q)
    if target.variant == "finite_n":
        out = np.mean(F_n(grid, target.n_poly, target.lam), axis=-1)
    else:
        inside = np.all(np.abs(grid) <= 1.0, axis=-1)
        safe = np.clip(grid, -1.0, 1.0)
        out = np.where(inside, np.mean(F_big(safe, target.lam), axis=-1), np.inf)
    out = np.asarray(out, dtype=float)
    return out[()] if out.ndim == 0 else out


def _propose(state, xi, beta, c):
    y = c + math.sqrt(1.0 - beta * beta) * (state - c) + beta * xi
    y[..., 0] = state[..., 0]
    return y


def pcn_step(target, state, beta, rng):
    """One pCN move.

    Proposal ``y = c + sqrt(1 - beta^2)(x - c) + beta xi`` with ``xi`` a
    zero-mean ``mu^c`` draw; accepted with probability
    ``min(1, exp(E(x) - E(y)))``.  Works on a single field or a batch.
    """
    if not 0 < beta <= 1:
        raise ValidationError("beta must lie in (0, 1]")
    x = coefficients(state)
    M = x.shape[-1] - 1
    size = None if x.ndim == 1 else x.shape[0]
    xi = coefficients(sample_mu_c(0.0, M, rng, size))
    y = _propose(x, xi, beta, target.mass_c)
    log_u = np.log(rng.random(x.shape[:-1]))
    with np.errstate(invalid="ignore"):
        accept = log_u < energy(target, x) - energy(target, y)
    out = np.where(np.asarray(accept)[..., None], y, x)
    if isinstance(state, SpectralField):
        return SpectralField(out), bool(accept)
    return out, accept


@dataclass
class PCNResult:
    samples: np.ndarray
    chain_means: np.ndarray | None
    acceptance: float
    beta: float
    seed: int


class _Statistics:
    """Observable ``[u_1..u_K, u_1^2..u_K^2, E(u)]`` for moment comparisons."""

    def __init__(self, target, K):
        self.target, self.K = target, K

    def __call__(self, u):
        m = u[..., 1 : self.K + 1]
        return np.concatenate([m, m * m, energy(self.target, u)[..., None]], axis=-1)


def run_pcn(target, chains, steps, seed, beta=0.2, burn_in=None, thin=10, stats_modes=5, probe=200):
    """Run ``chains`` independent pCN chains started at ``c e_0``.

    Chain ``i`` uses the stream ``PCG64(mix64(seed, i))``.  A probe segment
    checks the acceptance rate; below 1% a :class:`SamplerWarning` is issued
    and ``beta`` halved (up to 6 times).  Returns thinned post-burn-in
    samples and per-chain averages of the moment statistics.
    """
    M, c = target.M, target.mass_c
    stats_modes = min(stats_modes, M)
    burn_in = steps // 5 if burn_in is None else burn_in
    stats = _Statistics(target, stats_modes)
    if target.variant == "gaussian":
        rng = np.random.Generator(np.random.PCG64(path_seed(seed, 0)))
        n = max(1, (steps - burn_in) // thin)
        draws = sample_mu_c(c, M, rng, chains * n)
        per_chain = stats(draws).reshape(chains, n, -1).mean(axis=1)
        return PCNResult(draws, per_chain, 1.0, 1.0, seed)
    inv_k = 1.0 / (np.arange(1, M + 1) * np.pi)
    for _ in range(7):
        stream = NoiseStream(seed, 0, chains, M + 1)
        x = np.zeros((chains, M + 1))
        x[:, 0] = c
        e_x = energy(target, x)
        accepted = 0
        sums = np.zeros((chains, 2 * stats_modes + 1))
        kept = []
        n_avg = 0
        for step_i in range(steps):
            z = stream.next()
            xi = np.zeros_like(x)
            xi[:, 1:] = z[:, :M] * inv_k
            y = _propose(x, xi, beta, c)
            e_y = energy(target, y)
            with np.errstate(invalid="ignore"):
                acc = np.log(ndtr(z[:, M])) < e_x - e_y
            x = np.where(acc[:, None], y, x)
            e_x = np.where(acc, e_y, e_x)
            accepted += int(acc.sum())
            if step_i + 1 == probe and accepted < 0.01 * probe * chains:
                break
            if step_i >= burn_in:
                sums += stats(x)
                n_avg += 1
                if (step_i - burn_in) % thin == 0:
                    kept.append(x.copy())
        else:
            rate = accepted / (steps * chains)
            if rate < 0.01:
                warnings.warn(f"pCN acceptance {rate:.2%} below 1% at beta={beta:g}", SamplerWarning)
            samples = np.concatenate(kept) if kept else np.empty((0, M + 1))
            return PCNResult(samples, sums / max(n_avg, 1), rate, beta, seed)
        warnings.warn(f"pCN acceptance below 1% at beta={beta:g}; halving", SamplerWarning)
        beta /= 2
    raise EstimatorError("pCN chain does not mix even after halving beta")


def _mean_se(v):
    v = np.asarray(v, dtype=float)
    v = v[np.isfinite(v)] if v.ndim == 1 else v
    if len(v) < 2:
        raise EstimatorError("need at least two independent replicas")
    return float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(len(v)))


def _moment_summary(per_replica, K):
    """Means, variances and energy with standard errors across replicas."""
    out = {}
    for k in range(1, K + 1):
        m = per_replica[:, k - 1]
        s = per_replica[:, K + k - 1]
        mean, se_mean = _mean_se(m)
        # delta method: var = mean(s) - mean(m)^2 linearizes to s - 2 mean m
        _, se_var = _mean_se(s - 2 * mean * m)
        out[f"mean k={k}"] = (mean, se_mean)
        out[f"var k={k}"] = (float(np.mean(s)) - mean**2, se_var)
    out["energy"] = _mean_se(per_replica[:, 2 * K])
    return out, per_replica.shape[0]


def compare_invariant(
    p, target, T_long, burn_in, paths, chain_steps, seed,
    chains=64, beta=0.2, modes=5, stride=10, workers=1,
):
    """Compare long-run dynamics with pCN samples of ``target``.

    The dynamics is started at ``c e_0`` and time-averaged over
    ``(burn_in, T_long]``; each path is one replica.  The chains are the
    replicas on the sampler side.  One report per statistic compares
    ``|dynamics - sampler|`` with zero at three combined standard errors.
    Reports for a non-Gaussian target carry the heuristic-oracle tag.
    """
    if not p.noise.is_white:
        raise VariantError("the invariant-measure comparison needs the white noise")
    if (target.M, target.mass_c) != (p.M, p.mass_c):
        raise ValidationError("target and dynamics must share M and the mass")
    modes = min(modes, p.M)
    stats = _Statistics(target, modes)
    x0 = np.zeros(p.M + 1)
    x0[0] = p.mass_c
    res = simulate_ensemble(
        p, x0, T_long, paths, seed, windows=[(burn_in, T_long)], observable=stats, stride=stride, workers=workers,
    )
    dyn = res.window_means[0][res.ok]
    chain = run_pcn(target, chains, chain_steps, seed, beta=beta, stats_modes=modes)
    a, n = _moment_summary(dyn, modes)
    b, _ = _moment_summary(chain.chain_means, modes)
    tag = "" if target.variant == "gaussian" else HEURISTIC
    reports = []
    for key in a:
        (va, sa), (vb, sb) = a[key], b[key]
        reports.append(
            CheckReport.build(f"gibbs {key}{tag}", abs(va - vb), 0.0, sa, sb, n, seed)
        )
    return reports, chain


def write_samples_csv(path, samples):
    samples = np.asarray(samples)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_index"] + [f"mode_{k}" for k in range(samples.shape[-1])])
        for i, c in enumerate(samples):
            w.writerow([i] + [repr(float(v)) for v in c])
