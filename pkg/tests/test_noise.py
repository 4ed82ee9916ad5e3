import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinodal.errors import ShapeError, ValidationError, VariantError
from spinodal.noise import (
    NoiseSpec,
    alpha_rate,
    amplitudes,
    apply_b_inverse,
    bstar_norm,
    op_norm_binv_a_pil,
    rate_constants,
    trace_minus1,
    validate_a1,
    validate_a2,
)
from spinodal.spectral import mu_array, seminorm

ALPHA_N2_LAM10 = 48.70454551700121
ALPHA_N1_LAM39 = 9.443584987049476


def brute_op_norm(spec, M=12):
    """Largest singular value of B^{-1} A Pi_l between |.|_{-1} and L^2.

    Columns are images of the |.|_{-1}-orthonormal vectors k pi e_k.
    """
    sigma = amplitudes(spec, M)
    mat = np.zeros((M + 1, M))
    for k in range(1, M + 1):
        z = np.zeros(M + 1)
        z[k] = k * np.pi
        img = np.zeros(M + 1)
        img[1 : spec.N + 1] = mu_array(M)[1 : spec.N + 1] * z[1 : spec.N + 1] / sigma[1 : spec.N + 1]
        mat[:, k - 1] = img
    return np.linalg.norm(mat, 2)


def test_alpha_values():
    assert alpha_rate(2, 10.0) == pytest.approx(ALPHA_N2_LAM10, rel=1e-14)
    assert alpha_rate(2, 10.0) == pytest.approx(48.7045, rel=1e-5)
    assert alpha_rate(1, 39.0) == pytest.approx(ALPHA_N1_LAM39, rel=1e-13)
    with pytest.raises(ValidationError):
        alpha_rate(1, 40.0)


def test_assumption_validators():
    assert validate_a1(NoiseSpec.white())
    assert not validate_a1(NoiseSpec.degenerate([1.0], b0=0.3))
    assert validate_a2(NoiseSpec.degenerate([1, 1]), 10.0)
    assert not validate_a2(NoiseSpec.degenerate([1]), 40.0)
    assert not validate_a2(NoiseSpec.degenerate([1, 0]), 1.0)
    with pytest.raises(VariantError):
        validate_a2(NoiseSpec.white(), 1.0)
    with pytest.raises(VariantError):
        NoiseSpec("pink")
    with pytest.raises(ValidationError):
        NoiseSpec.degenerate([-1.0])


def test_amplitudes():
    np.testing.assert_allclose(amplitudes(NoiseSpec.white(), 3), [0, np.pi, 2 * np.pi, 3 * np.pi])
    np.testing.assert_array_equal(amplitudes(NoiseSpec.degenerate([2, 3]), 4), [0, 2, 3, 0, 0])


def test_operator_norm_matches_brute_force():
    for b in ([1, 1], [0.5, 3.0], [2.0, 0.1, 1.0]):
        spec = NoiseSpec.degenerate(b)
        got = op_norm_binv_a_pil(spec)
        assert got == pytest.approx(brute_op_norm(spec), rel=1e-6)
    assert op_norm_binv_a_pil(NoiseSpec.degenerate([1, 1])) == pytest.approx(8 * np.pi**3, rel=1e-14)
    with pytest.raises(VariantError):
        op_norm_binv_a_pil(NoiseSpec.white())


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.05, 20), min_size=1, max_size=5))
def test_operator_norm_property(b):
    spec = NoiseSpec.degenerate(b)
    assert op_norm_binv_a_pil(spec) == pytest.approx(brute_op_norm(spec), rel=1e-6)


def test_trace_and_bstar():
    tv = trace_minus1(NoiseSpec.degenerate([1, 1]), 32)
    assert tv.value == pytest.approx(1 / np.pi**2 + 1 / (4 * np.pi**2))
    assert not tv.divergent
    tw = trace_minus1(NoiseSpec.white(), 32)
    assert tw.divergent and tw.value == pytest.approx(32.0)
    assert bstar_norm(NoiseSpec.degenerate([1, 2]), 8) == 2
    assert bstar_norm(NoiseSpec.white(), 8) == pytest.approx(8 * np.pi)
    rc = rate_constants(NoiseSpec.degenerate([1, 1]), 10.0, 32)
    assert rc.alpha == pytest.approx(ALPHA_N2_LAM10)


def test_white_b_inverse_identity():
    # |B^{-1} z| = |z|_{-1} on mean-free fields
    rng = np.random.default_rng(3)
    z = rng.standard_normal((1000, 33))
    z[:, 0] = 0.0
    lhs = np.linalg.norm(apply_b_inverse(NoiseSpec.white(), z), axis=-1)
    np.testing.assert_allclose(lhs, seminorm(z, -1), rtol=1e-12)
    eps = 0.3
    z1 = np.zeros(9)
    z1[1] = eps
    assert np.linalg.norm(apply_b_inverse(NoiseSpec.white(), z1)) == pytest.approx(eps / math.pi)


def test_b_inverse_range():
    spec = NoiseSpec.degenerate([1, 2])
    z = np.zeros(6)
    z[2] = 4.0
    np.testing.assert_allclose(apply_b_inverse(spec, z), [0, 0, 2, 0, 0, 0])
    z[3] = 1.0
    with pytest.raises(ShapeError):
        apply_b_inverse(spec, z)
    with pytest.raises(ShapeError):
        apply_b_inverse(NoiseSpec.white(), np.array([1.0, 0.0]))
