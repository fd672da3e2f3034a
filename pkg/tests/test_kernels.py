import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from pointdos.errors import AccuracyLoss, BranchCut, ZeroDistance
from pointdos.kernels import (SpectralPoint, bessel_k0, bessel_k1, dz_free_kernel,
                              dz_kernel_sup, free_kernel, hop_kernel, regime_disagreement,
                              renorm_diag, renorm_diag_dz, sqrt_neg)

off_axis = st.complex_numbers(min_magnitude=1e-2, max_magnitude=100, allow_nan=False,
                              allow_infinity=False).filter(
    lambda z: not (z.imag == 0 and z.real >= 0))


def test_sqrt_neg_principal_branch():
    assert sqrt_neg(-4.0) == pytest.approx(2.0)
    assert sqrt_neg(-1 + 1e-12j).real > 0
    np.testing.assert_allclose(sqrt_neg(np.array([-1.0, -9.0])), [1.0, 3.0])


@pytest.mark.parametrize("z", [0.0, 1.0, 3.5])
def test_sqrt_neg_rejects_positive_axis(z):
    with pytest.raises(BranchCut):
        sqrt_neg(z)


@given(off_axis)
def test_kappa_has_positive_real_part(z):
    assert sqrt_neg(z).real > 0


@given(off_axis, st.sampled_from([1, 2, 3]), st.floats(0.5, 6.0))
@settings(max_examples=60, deadline=None)
def test_kernel_conjugation_symmetry(z, d, r):
    p = SpectralPoint(z, d)
    assert free_kernel(p.conj(), r) == pytest.approx(np.conj(free_kernel(p, r)), rel=1e-12,
                                                     abs=1e-300)
    assert renorm_diag(p.conj()) == pytest.approx(np.conj(renorm_diag(p)), rel=1e-12, abs=1e-300)


def test_closed_forms_real_energy():
    r, k = 1.7, 1.3
    z = -k * k
    assert free_kernel(SpectralPoint(z, 1), r) == pytest.approx(np.exp(-k * r) / (2 * k))
    assert free_kernel(SpectralPoint(z, 3), r) == pytest.approx(np.exp(-k * r) / (4 * np.pi * r))
    assert free_kernel(SpectralPoint(z, 2), r) == pytest.approx(special.k0(k * r) / (2 * np.pi),
                                                                rel=1e-13)
    assert renorm_diag(SpectralPoint(z, 1)) == pytest.approx(1 / (2 * k))
    assert renorm_diag(SpectralPoint(z, 2, kappa0=0.5)) == pytest.approx(np.log(k / 0.5) / (2 * np.pi))
    assert renorm_diag(SpectralPoint(z, 3)) == pytest.approx(-k / (4 * np.pi))


def test_zero_distance_rejected():
    with pytest.raises(ZeroDistance):
        free_kernel(SpectralPoint(-1.0, 3), 0.0)


def test_sign_flip_only_in_d1():
    assert SpectralPoint(-1.0, 1, d1_sign_flip=True).sign == -1
    assert SpectralPoint(-1.0, 3, d1_sign_flip=True).sign == 1
    p = SpectralPoint(-1.0, 1, d1_sign_flip=True)
    assert hop_kernel(p, 1.0) == pytest.approx(-free_kernel(p, 1.0))
    assert renorm_diag(p) == pytest.approx(-0.5)


def test_bessel_known_values():
    assert bessel_k0(1.0).real == pytest.approx(0.42102443824070834, rel=1e-14)
    assert bessel_k1(1.0).real == pytest.approx(0.6019072301972346, rel=1e-13)


@given(st.floats(0.05, 50.0), st.floats(-1.5, 1.5))
@settings(max_examples=80, deadline=None)
def test_bessel_against_mpmath(mod, arg):
    w = mod * np.exp(1j * arg)
    ref0 = complex(mpmath.besselk(0, w))
    ref1 = complex(mpmath.besselk(1, w))
    assert abs(bessel_k0(w) - ref0) <= 1e-11 * abs(ref0)
    assert abs(bessel_k1(w) - ref1) <= 1e-11 * abs(ref1)


@pytest.mark.parametrize("w", [2.0, 2.0 * np.exp(0.7j), 25.0, 25.0 * np.exp(-1.2j)])
def test_regimes_agree_at_switchover(w):
    assert regime_disagreement(w) < 1e-10
    with warnings.catch_warnings():
        warnings.simplefilter("error", AccuracyLoss)
        bessel_k0(w, check=True)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("z", [-1.0, -2.5 + 0.7j])
def test_dz_kernel_matches_finite_difference(d, z):
    h = 1e-5
    for r in (0.8, 2.0):
        fd = (free_kernel(SpectralPoint(z + h, d), r) - free_kernel(SpectralPoint(z - h, d), r)) / (2 * h)
        assert dz_free_kernel(SpectralPoint(z, d), r) == pytest.approx(fd, rel=1e-7)


def test_dz_diagonal_values():
    k = 1.4
    assert dz_free_kernel(SpectralPoint(-k * k, 1), 0.0) == pytest.approx(1 / (4 * k ** 3))
    assert dz_free_kernel(SpectralPoint(-k * k, 3), 0.0) == pytest.approx(1 / (8 * np.pi * k))
    z = -k * k + 0.3j
    assert dz_free_kernel(SpectralPoint(z, 2), 0.0) == pytest.approx(-1 / (4 * np.pi * z))
    # d=3 renormalized diagonal derivative coincides with the integral of G0^2
    assert renorm_diag_dz(SpectralPoint(-k * k, 3)) == pytest.approx(1 / (8 * np.pi * k))


def test_dz_kernel_sup_dominates():
    p = SpectralPoint(-2.0 + 0.5j, 3)
    sup = dz_kernel_sup(p)
    assert all(abs(dz_free_kernel(p, r)) <= sup * (1 + 1e-12) for r in np.linspace(0.5, 10, 40))
