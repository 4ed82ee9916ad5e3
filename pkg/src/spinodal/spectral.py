"""Neumann cosine basis on (0, 1) and the spectral calculus built on it.

A field is stored by its coefficients in the orthonormal basis

    e_0 = 1,   e_k(theta) = sqrt(2) cos(k pi theta),   k >= 1,

so that ``A e_k = -(k pi)^2 e_k`` for the Neumann Laplacian ``A``.  Every
routine below accepts either a :class:`SpectralField` or a raw coefficient
array whose last axis has length ``M + 1``; batched arrays of shape
``(..., M + 1)`` are handled transparently, which is what the ensemble
integrators rely on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft

from .errors import NumericsError, ShapeError

__all__ = [
    "SpectralField",
    "GridField",
    "eigen_mu",
    "mu_array",
    "seminorm",
    "norm_gamma",
    "semiscalar",
    "project_low",
    "project_high",
    "project_nonconstant",
    "synthesize",
    "analyze",
    "grid_nodes",
    "coefficients",
]


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Mean mode plus cosine modes ``1..M`` of a function on (0, 1)."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size < 2:
            raise ShapeError("coeffs must be a 1-d array of length M + 1 >= 2")
        if not np.all(np.isfinite(c)):
            raise NumericsError("SpectralField entries must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_parts(cls, mean, modes):
        return cls(np.concatenate([[float(mean)], np.asarray(modes, dtype=float)]))

    @classmethod
    def zeros(cls, M, mean=0.0):
        c = np.zeros(M + 1)
        c[0] = mean
        return cls(c)

    @classmethod
    def basis(cls, k, M):
        """The field ``e_k`` truncated at ``M``."""
        if not 0 <= k <= M:
            raise ShapeError(f"basis index {k} outside 0..{M}")
        c = np.zeros(M + 1)
        c[k] = 1.0
        return cls(c)

    @classmethod
    def from_list(cls, values, M, mean=None):
        """Pad a short coefficient list ``[c0, c1, ...]`` with zeros to ``M``."""
        values = [float(v) for v in values]
        if len(values) > M + 1:
            raise ShapeError(f"{len(values)} coefficients given for truncation {M}")
        c = np.zeros(M + 1)
        c[: len(values)] = values
        if mean is not None:
            c[0] = mean
        return cls(c)

    @property
    def mean(self):
        return float(self.coeffs[0])

    @property
    def modes(self):
        return self.coeffs[1:]

    @property
    def truncation(self):
        return self.coeffs.size - 1

    def __add__(self, other):
        return SpectralField(self.coeffs + _same_shape(self, other))

    def __sub__(self, other):
        return SpectralField(self.coeffs - _same_shape(self, other))

    def __mul__(self, scalar):
        return SpectralField(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(-self.coeffs)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coeffs, dtype=dtype)

    def __repr__(self):
        return f"SpectralField(mean={self.mean:.6g}, M={self.truncation})"


@dataclass(frozen=True, eq=False)
class GridField:
    """Point values at the midpoint nodes ``(j + 1/2) / Q``."""

    values: np.ndarray

    @property
    def grid_size(self):
        return self.values.shape[-1]

    @property
    def nodes(self):
        return grid_nodes(self.grid_size)


def _same_shape(a, b):
    cb = coefficients(b)
    if cb.shape != a.coeffs.shape:
        raise ShapeError(f"truncation mismatch: {a.truncation} vs {cb.shape[-1] - 1}")
    return cb


def coefficients(u):
    """Coefficient array of a field (no copy when already an array)."""
    if isinstance(u, SpectralField):
        return u.coeffs
    return np.asarray(u, dtype=float)


def grid_nodes(Q):
    return (np.arange(Q) + 0.5) / Q


def eigen_mu(k):
    """Negated eigenvalue ``(k pi)^2`` of ``A`` on ``e_k``."""
    if np.any(np.asarray(k) < 0):
        raise ShapeError("mode index must be non-negative")
    if np.ndim(k):
        return (np.asarray(k, dtype=float) * np.pi) ** 2
    return float((k * np.pi) ** 2)


def mu_array(M):
    """``[(k pi)^2 for k in 0..M]``."""
    return (np.arange(M + 1) * np.pi) ** 2


def _weights(M, gamma):
    w = np.zeros(M + 1)
    w[1:] = mu_array(M)[1:] ** gamma
    return w


def seminorm(u, gamma):
    """``|u|_gamma``; the mean mode is excluded."""
    c = coefficients(u)
    w = _weights(c.shape[-1] - 1, gamma)
    return np.sqrt(np.sum(w * c * c, axis=-1))


def norm_gamma(u, gamma):
    """``(|u|_gamma^2 + mean^2)^(1/2)``."""
    c = coefficients(u)
    return np.sqrt(seminorm(c, gamma) ** 2 + c[..., 0] ** 2)


def semiscalar(u, v, gamma):
    cu, cv = coefficients(u), coefficients(v)
    if cu.shape[-1] != cv.shape[-1]:
        raise ShapeError(f"truncation mismatch: {cu.shape[-1] - 1} vs {cv.shape[-1] - 1}")
    w = _weights(cu.shape[-1] - 1, gamma)
    return np.sum(w * cu * cv, axis=-1)


def _wrap(template, c):
    return SpectralField(c) if isinstance(template, SpectralField) else c


def project_low(u, N):
    """Projection onto ``span{e_0, ..., e_N}``."""
    c = coefficients(u)
    if not 0 <= N < c.shape[-1] - 1:
        raise ShapeError(f"projection index N={N} needs N < truncation {c.shape[-1] - 1}")
    out = np.zeros_like(c)
    out[..., : N + 1] = c[..., : N + 1]
    return _wrap(u, out)


def project_high(u, N):
    """``I - project_low``."""
    c = coefficients(u)
    if not 0 <= N < c.shape[-1] - 1:
        raise ShapeError(f"projection index N={N} needs N < truncation {c.shape[-1] - 1}")
    out = c.copy()
    out[..., : N + 1] = 0.0
    return _wrap(u, out)


def project_nonconstant(u):
    """Drop the mean mode."""
    out = coefficients(u).copy()
    out[..., 0] = 0.0
    return _wrap(u, out)


def synthesize(u, Q):
    """Evaluate a field at the ``Q`` midpoint nodes.

    Coefficients of index ``>= Q`` vanish identically on the grid and are
    dropped.  Returns a :class:`GridField` for a :class:`SpectralField`
    argument and a bare array otherwise.
    """
    c = coefficients(u)
    M = c.shape[-1] - 1
    if Q < M:
        raise ShapeError(f"grid size Q={Q} smaller than truncation M={M}")
    padded = np.zeros(c.shape[:-1] + (Q,))
    k = min(M + 1, Q)
    padded[..., :k] = c[..., :k]
    values = fft.idct(padded, type=2, norm="ortho", axis=-1) * np.sqrt(Q)
    return GridField(values) if isinstance(u, SpectralField) else values


def analyze(g, M):
    """Midpoint-quadrature coefficients ``<g, e_k>`` for ``k = 0..M``."""
    values = g.values if isinstance(g, GridField) else np.asarray(g, dtype=float)
    if not np.all(np.isfinite(values)):
        raise NumericsError("non-finite grid values")
    Q = values.shape[-1]
    c = fft.dct(values, type=2, norm="ortho", axis=-1) / np.sqrt(Q)
    out = np.zeros(values.shape[:-1] + (M + 1,))
    k = min(M + 1, Q)
    out[..., :k] = c[..., :k]
    return SpectralField(out) if isinstance(g, GridField) and out.ndim == 1 else out
