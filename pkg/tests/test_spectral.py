import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spinodal.errors import NumericsError, ShapeError
from spinodal.spectral import (
    GridField,
    SpectralField,
    analyze,
    eigen_mu,
    grid_nodes,
    mu_array,
    norm_gamma,
    project_high,
    project_low,
    project_nonconstant,
    semiscalar,
    seminorm,
    synthesize,
)

finite = st.integers(-10**6, 10**6).map(lambda i: i * 1e-5)


def coeff_arrays(min_M=1, max_M=24):
    return st.integers(min_M, max_M).flatmap(lambda M: arrays(float, M + 1, elements=finite))


def direct_synthesis(c, Q):
    """Brute-force cosine sum at the midpoint nodes."""
    theta = grid_nodes(Q)
    out = np.full(Q, c[0])
    for k in range(1, len(c)):
        out += c[k] * np.sqrt(2) * np.cos(k * np.pi * theta)
    return out


def test_eigenvalues():
    assert eigen_mu(0) == 0.0
    assert eigen_mu(3) == pytest.approx(9 * np.pi**2)
    np.testing.assert_allclose(eigen_mu(np.array([1, 2])), [np.pi**2, 4 * np.pi**2])
    np.testing.assert_allclose(mu_array(3), [0, np.pi**2, 4 * np.pi**2, 9 * np.pi**2])
    with pytest.raises(ShapeError):
        eigen_mu(-1)


def test_seminorm_of_basis_vectors():
    M = 8
    for k in range(1, M + 1):
        ek = SpectralField.basis(k, M)
        assert seminorm(ek, -1) == pytest.approx(1 / (k * np.pi))
        assert seminorm(ek, 1) == pytest.approx(k * np.pi)
        assert seminorm(ek, 0) == pytest.approx(1.0)
    e0 = SpectralField.basis(0, M)
    assert seminorm(e0, -1) == 0.0
    assert norm_gamma(e0, -1) == 1.0


def test_field_construction_and_arithmetic():
    u = SpectralField.from_list([0.2, 1.0], 4)
    v = SpectralField.from_parts(0.2, [0, 1.0, 0, 0])
    assert u.truncation == 4 and u.mean == 0.2
    np.testing.assert_array_equal((u + v).coeffs, [0.4, 1, 1, 0, 0])
    np.testing.assert_array_equal((2 * u - v).coeffs, [0.2, 2, -1, 0, 0])
    with pytest.raises(ShapeError):
        u + SpectralField.zeros(3)
    with pytest.raises(NumericsError):
        SpectralField([0.0, np.nan])
    with pytest.raises(ValueError):
        u.coeffs[0] = 1.0


def test_projections():
    u = SpectralField(np.arange(6.0))
    np.testing.assert_array_equal(project_low(u, 2).coeffs, [0, 1, 2, 0, 0, 0])
    np.testing.assert_array_equal(project_high(u, 2).coeffs, [0, 0, 0, 3, 4, 5])
    np.testing.assert_array_equal(project_nonconstant(u).coeffs, [0, 1, 2, 3, 4, 5])
    with pytest.raises(ShapeError):
        project_low(u, 5)
    with pytest.raises(ShapeError):
        project_high(u, -1)


def test_semiscalar_mismatch():
    with pytest.raises(ShapeError):
        semiscalar(np.zeros(4), np.zeros(5), -1)


def test_synthesis_matches_direct_sum():
    rng = np.random.default_rng(0)
    c = rng.standard_normal(17)
    np.testing.assert_allclose(synthesize(c, 64), direct_synthesis(c, 64), atol=1e-12)
    g = synthesize(SpectralField(c), 64)
    assert isinstance(g, GridField) and g.grid_size == 64
    np.testing.assert_allclose(g.nodes, (np.arange(64) + 0.5) / 64)


def test_synthesis_requires_grid():
    with pytest.raises(ShapeError):
        synthesize(np.zeros(9), 4)
    with pytest.raises(NumericsError):
        analyze(np.array([0.0, np.inf]), 1)


@settings(max_examples=60, deadline=None)
@given(coeff_arrays())
def test_transform_round_trip(c):
    M = len(c) - 1
    for Q in (M + 1, 4 * M):
        back = analyze(synthesize(c, Q), M)
        np.testing.assert_allclose(back, c, atol=1e-12 * max(1.0, np.abs(c).max()))


@settings(max_examples=40, deadline=None)
@given(coeff_arrays(), coeff_arrays())
def test_seminorm_scalar_consistency(a, b):
    M = min(len(a), len(b)) - 1
    a, b = a[: M + 1], b[: M + 1]
    for gamma in (-1, 0, 1):
        assert semiscalar(a, a, gamma) == pytest.approx(seminorm(a, gamma) ** 2, rel=1e-12, abs=1e-300)
        # Cauchy-Schwarz
        assert abs(semiscalar(a, b, gamma)) <= seminorm(a, gamma) * seminorm(b, gamma) * (1 + 1e-12) + 1e-300


@settings(max_examples=40, deadline=None)
@given(coeff_arrays())
def test_poincare_chain(c):
    # |u|_{-1} <= |u|_0 / pi <= |u|_1 / pi^2 on mean-free fields
    assert seminorm(c, -1) <= seminorm(c, 0) / np.pi * (1 + 1e-12) + 1e-300
    assert seminorm(c, 0) <= seminorm(c, 1) / np.pi * (1 + 1e-12) + 1e-300


def test_batched_arrays():
    rng = np.random.default_rng(1)
    c = rng.standard_normal((5, 9))
    np.testing.assert_allclose(seminorm(c, -1), [seminorm(row, -1) for row in c])
    np.testing.assert_allclose(analyze(synthesize(c, 32), 8), c, atol=1e-12)


def test_quadrature_is_exact_for_products():
    # the midpoint grid integrates cos(j pi x) cos(k pi x) exactly when j + k < 2Q
    Q = 16
    theta = grid_nodes(Q)
    e = lambda k: np.sqrt(2) * np.cos(k * np.pi * theta)
    for j in range(1, 10):
        for k in range(1, 10):
            assert np.mean(e(j) * e(k)) == pytest.approx(float(j == k), abs=1e-13)
