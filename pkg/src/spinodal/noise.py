"""Noise operators ``B`` and the constants the Harnack budgets are built from.

Two regimes are supported, both diagonal in the cosine basis:

* ``degenerate``: ``B u = sum_i b_i <u, e_i> e_i`` with ``b_i > 0`` on the
  first ``N`` modes (essentially elliptic colored noise);
* ``white``: ``B = (-A)^{1/2}``, i.e. amplitude ``k pi`` on mode ``k``,
  Galerkin-truncated at the field truncation ``M``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ShapeError, ValidationError, VariantError
from .spectral import coefficients, mu_array

__all__ = [
    "NoiseSpec",
    "RateConstants",
    "TraceValue",
    "validate_a1",
    "validate_a2",
    "alpha_rate",
    "op_norm_binv_a_pil",
    "bstar_norm",
    "trace_minus1",
    "rate_constants",
    "amplitudes",
    "apply_b_inverse",
]

DEGENERATE = "degenerate"
WHITE = "white"


@dataclass(frozen=True)
class NoiseSpec:
    """Diagonal noise operator.

    ``b`` holds ``b_1, b_2, ...``; ``b0`` is the (normally zero) amplitude on
    the constant mode and only exists so that validators can be exercised
    against a noise model that breaks mass conservation.
    """

    variant: str
    b: tuple = ()
    N: int = 0
    b0: float = 0.0

    def __post_init__(self):
        if self.variant not in (DEGENERATE, WHITE):
            raise VariantError(f"unknown noise variant {self.variant!r}")
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        if any(v < 0 for v in self.b):
            raise ValidationError("noise amplitudes must be non-negative")
        if self.variant == DEGENERATE and self.N < 1:
            raise ValidationError("degenerate noise needs N >= 1")

    @classmethod
    def degenerate(cls, b, N=None, b0=0.0):
        b = tuple(b)
        return cls(DEGENERATE, b, len(b) if N is None else int(N), b0)

    @classmethod
    def white(cls):
        return cls(WHITE)

    @property
    def is_white(self):
        return self.variant == WHITE


class TraceValue(NamedTuple):
    value: float
    divergent: bool


@dataclass(frozen=True)
class RateConstants:
    alpha: float
    op_norm_binv_a_pil: float
    bstar_norm: float
    trace_minus1: float


def amplitudes(spec, M):
    """Diagonal of ``B`` on ``e_0..e_M``."""
    sigma = np.zeros(M + 1)
    sigma[0] = spec.b0
    if spec.is_white:
        sigma[1:] = np.arange(1, M + 1) * np.pi
    else:
        m = min(len(spec.b), M)
        sigma[1 : m + 1] = spec.b[:m]
    return sigma


def validate_a1(spec):
    """``B^* e_0 = 0``: the noise must not move the mass."""
    return spec.b0 == 0.0


def validate_a2(spec, lam):
    if spec.is_white:
        raise VariantError("(A2) concerns the degenerate colored noise only")
    if len(spec.b) < spec.N or any(b <= 0 for b in spec.b[: spec.N]):
        return False
    return (spec.N + 1) ** 2 * np.pi**2 > lam


def alpha_rate(N, lam):
    """Contraction rate ``1/2 min{pi^4, ((N+1)^2 pi^2 - lam)(N+1)^2 pi^2}``."""
    top = (N + 1) ** 2 * np.pi**2
    if top <= lam:
        raise ValidationError(f"(A2) fails: (N+1)^2 pi^2 = {top:.6g} <= lambda = {lam:.6g}")
    return 0.5 * min(np.pi**4, (top - lam) * top)


def _require_degenerate(spec, what):
    if spec.is_white:
        raise VariantError(f"{what} is defined for the degenerate noise only")
    if len(spec.b) < spec.N or any(b <= 0 for b in spec.b[: spec.N]):
        raise ValidationError("B is not invertible on span{e_1..e_N}")


def op_norm_binv_a_pil(spec):
    """Norm of ``B^{-1} A Pi_l`` from ``(H, |.|_{-1})`` into ``L^2``.

    On mode ``i`` the operator multiplies by ``(i pi)^2 / b_i`` while the
    source norm weighs the mode by ``1 / (i pi)``, so the norm is the
    largest ratio ``(i pi)^3 / b_i`` over ``i <= N``.
    """
    _require_degenerate(spec, "B^{-1} A Pi_l")
    i = np.arange(1, spec.N + 1)
    return float(np.max((i * np.pi) ** 3 / np.asarray(spec.b[: spec.N])))


def bstar_norm(spec, M):
    if spec.is_white:
        return M * np.pi
    return float(np.max(amplitudes(spec, M)))


def trace_minus1(spec, M):
    """``Tr(B (-A)^{-1} B^*)`` over the retained modes."""
    sigma = amplitudes(spec, M)
    val = float(np.sum(sigma[1:] ** 2 / mu_array(M)[1:]))
    return TraceValue(val, spec.is_white)


def rate_constants(spec, lam, M):
    _require_degenerate(spec, "rate constants")
    return RateConstants(
        alpha=alpha_rate(spec.N, lam),
        op_norm_binv_a_pil=op_norm_binv_a_pil(spec),
        bstar_norm=bstar_norm(spec, M),
        trace_minus1=trace_minus1(spec, M).value,
    )


def apply_b_inverse(spec, z):
    """``B^{-1} z`` for ``z`` in the range where ``B`` is invertible.

    Degenerate noise: ``z`` must live in ``span{e_1..e_N}``; white noise: ``z``
    must have zero mean.  Anything else raises :class:`ShapeError`.
    """
    c = coefficients(z)
    M = c.shape[-1] - 1
    sigma = amplitudes(spec, M)
    if spec.is_white:
        active = np.arange(M + 1) >= 1
    else:
        active = (np.arange(M + 1) >= 1) & (np.arange(M + 1) <= spec.N) & (sigma > 0)
    if np.any(c[..., ~active] != 0):
        raise ShapeError("argument has energy outside the range of B")
    out = np.zeros_like(c)
    out[..., active] = c[..., active] / sigma[active]
    return out
