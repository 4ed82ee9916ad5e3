"""Logarithmic free energy and its odd-polynomial approximations.

The singular nonlinearity is ``f(u) = log((1 - u)/(1 + u)) + lam * u`` on
(-1, 1) with primitive ``F`` of ``-f``.  The dynamics never sees ``f``
itself; it uses the truncated arctanh series

    p_n(u) = 2 * sum_{i=0}^{n} u^(2i+1) / (2i+1),

so that ``-p_n(u) + lam * u -> f(u)`` on (-1, 1).  ``F_n`` is the primitive
of ``p_n(u) - lam * u`` and plays the role of ``F`` at finite ``n``.
All functions are vectorised over ``u``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import DomainError, ValidationError

__all__ = ["PotentialParams", "f_log", "F_big", "p_n", "F_n"]


def f_log(u, lam):
    """``f`` with the sentinels ``+inf`` for ``u <= -1`` and ``-inf`` for ``u >= 1``."""
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) < 1
    safe = np.where(inside, u, 0.0)
    val = np.log1p(-safe) - np.log1p(safe) + lam * safe
    out = np.where(inside, val, np.where(u <= -1, np.inf, -np.inf))
    return out[()] if out.ndim == 0 else out


def F_big(u, lam):
    """``(1+u)log(1+u) + (1-u)log(1-u) - lam u^2 / 2`` on ``[-1, 1]``.

    The endpoints take the continuous limit ``2 log 2 - lam / 2``.
    """
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > 1) or np.any(np.isnan(u)):
        raise DomainError("F is only defined on [-1, 1]")
    out = xlogy(1 + u, 1 + u) + xlogy(1 - u, 1 - u) - 0.5 * lam * u * u
    return out[()] if out.ndim == 0 else out


def p_n(u, n):
    """Odd polynomial ``2 sum_{i<=n} u^(2i+1)/(2i+1)``, Horner in ``u^2``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    u = np.asarray(u, dtype=float)
    u2 = u * u
    s = np.full_like(u, 1.0 / (2 * n + 1))
    for i in range(n - 1, -1, -1):
        s = s * u2 + 1.0 / (2 * i + 1)
    out = 2.0 * u * s
    return out[()] if out.ndim == 0 else out


def F_n(u, n, lam):
    """Primitive of ``p_n(u) - lam u`` vanishing at 0."""
    if n < 0:
        raise ValueError("n must be non-negative")
    u = np.asarray(u, dtype=float)
    u2 = u * u
    s = np.full_like(u, 1.0 / ((2 * n + 1) * (2 * n + 2)))
    for i in range(n - 1, -1, -1):
        s = s * u2 + 1.0 / ((2 * i + 1) * (2 * i + 2))
    out = 2.0 * u2 * s - 0.5 * lam * u2
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class PotentialParams:
    lam: float
    n_poly: int = 2

    def __post_init__(self):
        if not self.lam > 0:
            raise ValidationError("lambda must be positive")
        if self.n_poly < 0:
            raise ValidationError("polynomial index must be non-negative")

    def f(self, u):
        return f_log(u, self.lam)

    def F(self, u):
        return F_big(u, self.lam)

    def p(self, u):
        return p_n(u, self.n_poly)

    def Fn(self, u):
        return F_n(u, self.n_poly, self.lam)
