import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pointdos.dos import (Truncation, analyticity_probe, averaged_green_diff, cauchy_probe,
                          conductivity_probe, dos_density, ids_crosscheck, richardson,
                          two_point_F2)
from pointdos.errors import DomainError, NonConvergent, RegimeViolation
from pointdos.kernels import SpectralPoint, dz_free_kernel, hop_kernel, renorm_diag
from pointdos.sites import SingleSiteLaw

LAW = SingleSiteLaw.uniform(-2.0, -1.0)
THETA = np.linspace(-np.pi, np.pi, 4097)[:-1]
K = np.arange(1, 300)


def symbol(q, p):
    hop = np.asarray(hop_kernel(p, K.astype(float)))
    return 1 / q - renorm_diag(p) - 2 * (hop[None, :] * np.cos(np.outer(THETA, K))).sum(axis=1)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=30, deadline=None)
def test_richardson_exact_on_quadratics(a, b, c):
    eps = 0.1 * 2.0 ** -np.arange(6)
    est, err = richardson(a + b * eps + c * eps ** 2, eps)
    assert est == pytest.approx(a, abs=1e-10)


def test_richardson_flags_divergence():
    eps = 0.1 * 2.0 ** -np.arange(6)
    with pytest.raises(NonConvergent):
        richardson(np.array([0, 0, 0, 0, 0, 1.0]), eps)


def test_green_diff_conjugation():
    p = SpectralPoint(-1.0 + 0.07j, 1)
    a = averaged_green_diff(p, LAW, Truncation(6, 2)).value
    b = averaged_green_diff(p.conj(), LAW, Truncation(6, 2)).value
    assert b == pytest.approx(np.conj(a), rel=1e-12)


def test_green_diff_point_mass_against_fourier():
    q = -1.5
    law = SingleSiteLaw.point_mass(q)
    p = SpectralPoint(-1.0 + 0.1j, 1)
    res = averaged_green_diff(p, law, Truncation(10, 3))
    dz = np.asarray(dz_free_kernel(p, K.astype(float)))
    dz_hat = dz_free_kernel(p, 0.0) + 2 * (dz[None, :] * np.cos(np.outer(THETA, K))).sum(axis=1)
    oracle = p.sign * np.mean(dz_hat / symbol(q, p))
    assert abs(res.value - oracle) <= res.tail_bound


def test_dos_vanishes_in_certified_region():
    pt = dos_density(-1.0, LAW, 1, truncation=Truncation(6, 2))
    assert abs(pt.n) <= max(pt.extrapolation_error, 1e-9) + pt.tail_bound
    assert abs(pt.n) < 1e-8


def test_dos_rejects_bad_schedule():
    with pytest.raises(DomainError):
        dos_density(-1.0, LAW, 1, eps_schedule=(0.01, 0.02, 0.04))


def test_cauchy_probe_harness():
    pole = -1.0 + 0.4j
    pr = cauchy_probe(lambda z: 1 / (z - pole), -1.0, 0.1)
    assert pr.taylor_radius_estimate == pytest.approx(0.4, rel=0.1)
    assert pr.cauchy_residual < 1e-13
    assert np.isinf(cauchy_probe(lambda z: 3.0 + 0 * z, 0.0, 0.1).taylor_radius_estimate)
    with pytest.raises(DomainError):
        cauchy_probe(np.exp, 0.0, 0.1, N=8)


def test_analyticity_probe_d1():
    pr = analyticity_probe(-1.0, 0.05, LAW, 1, Truncation(6, 2))
    assert pr.cauchy_residual <= 1e-7 * abs(pr.value_at_center)
    assert pr.taylor_radius_estimate >= 0.05


def test_analyticity_probe_refuses_large_disk():
    law = SingleSiteLaw.uniform(-2.0, -1.0, delta=0.2, delta_prime=0.1)
    with pytest.raises(RegimeViolation):
        analyticity_probe(-1.0, 0.3, law, 1, Truncation(4, 1), I=(-1.2, -0.8))


def test_two_point_point_mass_against_fourier():
    q = -1.5
    law = SingleSiteLaw.point_mass(q)
    p1 = SpectralPoint(-1.0 + 0.1j, 1)
    p2 = SpectralPoint(-1.05 + 0.1j, 1)
    val, tail = two_point_F2(law, p1, p2, 3, 1)
    oracle = np.mean(1 / (symbol(q, p1) * symbol(q, p2)))
    assert abs(val - oracle) <= tail


def test_conductivity_probe_smooth():
    pr = conductivity_probe(-1.0, np.linspace(-0.02, 0.02, 9), 0.05, LAW, 1, 2, 1)
    assert pr.fit_residual <= 1e-6 * pr.scale
    assert len(pr.F2) == 9 and np.all(pr.tail_bound > 0)


def test_ids_crosscheck_counts_are_monotone():
    rep = ids_crosscheck(LAW, 3, [-200.0, -50.0, -1.0], [0, 1], samples=2, seed=0)
    for curve in rep["curves"].values():
        assert np.all(np.diff(curve) >= 0)
        assert curve[-1] == pytest.approx(1.0)
    assert len(rep["successive_sup"]) == 1
