import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from pointdos.errors import ConfigError, PoleHit
from pointdos.io import read_csv
from pointdos.kernels import SpectralPoint, renorm_diag
from pointdos.sites import (GapCertificate, SingleSiteLaw, contour_constant, gap_at,
                            joint_moment_J, joint_moment_table, moment_bound, moment_I,
                            moments_up_to, pole_gap, pole_location, regime_map, w_weight)

LAW = SingleSiteLaw.uniform(-2.0, -1.0)


@pytest.mark.parametrize("kw", [
    dict(kind="gaussian", alpha=-2, beta=-1),
    dict(kind="uniform", alpha=-1, beta=-2),
    dict(kind="uniform", alpha=-1, beta=0.5),
    dict(kind="point_mass", alpha=-1, beta=-2),
    dict(kind="uniform", alpha=-2, beta=-1, delta=0.1, delta_prime=0.2),
])
def test_law_validation(kw):
    with pytest.raises(ConfigError):
        SingleSiteLaw(**kw)


def test_sampling_stays_in_support():
    q = LAW.sample(np.random.default_rng(0), 1000)
    assert q.min() >= -2.0 and q.max() <= -1.0


def scipy_moment(m, law, p):
    rho = renorm_diag(p)
    f = lambda q, part: part((q / (1 - rho * q)) ** (m + 1))
    re = integrate.quad(f, law.alpha, law.beta, args=(np.real,), epsabs=0, epsrel=1e-13)[0]
    im = integrate.quad(f, law.alpha, law.beta, args=(np.imag,), epsabs=0, epsrel=1e-13)[0]
    return (re + 1j * im) / law.width


def test_reference_moments_d1():
    p = SpectralPoint(-1.0, 1)
    assert moment_I(0, LAW, p).real == pytest.approx(-0.8492717101928766, rel=1e-13)
    assert moment_I(1, LAW, p).real == pytest.approx(0.73042017, rel=1e-8)
    # logarithmic closed form with rho = 1/2
    rho = 0.5
    exact = (-(1 / rho) + np.log((1 + 2 * rho) / (1 + rho)) / rho ** 2)
    assert moment_I(0, LAW, p).real == pytest.approx(exact, rel=1e-13)


@pytest.mark.parametrize("method", ["closed_form", "quadrature", "contour"])
@pytest.mark.parametrize("d,z", [(1, -1.0), (1, -0.3 + 0.4j), (3, -4.0 + 1j), (2, -2.0 + 0.5j)])
def test_moment_methods_agree_with_scipy(method, d, z):
    p = SpectralPoint(z, d)
    for m in (0, 1, 4, 8):
        ref = scipy_moment(m, LAW, p)
        assert moment_I(m, LAW, p, method=method) == pytest.approx(ref, rel=1e-9, abs=1e-13)


def test_moments_up_to_matches_single_calls():
    p = SpectralPoint(-2.0 + 0.3j, 3)
    table = moments_up_to(6, LAW, p)
    for m in range(7):
        assert table[m] == pytest.approx(moment_I(m, LAW, p), rel=1e-12)


def test_point_mass_moments():
    law = SingleSiteLaw.point_mass(-1.5)
    p = SpectralPoint(-1.0, 1)
    assert moment_I(3, law, p) == pytest.approx(w_weight(-1.5, p) ** 4)


def test_pole_on_support():
    # d=3: pole at q = -4 pi / kappa, inside [-2, -1] for kappa = 8
    p = SpectralPoint(-(4 * np.pi / 1.5) ** 2, 3)
    assert pole_location(p).real == pytest.approx(-1.5)
    assert gap_at(LAW, p) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(PoleHit):
        moment_I(0, LAW, p)
    with pytest.raises(PoleHit):
        w_weight(-1.5, p)


@given(st.integers(0, 20), st.floats(-12.0, -0.2), st.floats(-1.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_moment_bound_holds(m, E, eta):
    p = SpectralPoint(complex(E, eta), 1)
    assert abs(moment_I(m, LAW, p)) <= moment_bound(m, LAW, p) * (1 + 1e-10)


def test_moment_bound_reference_value():
    # delta_star bound 1 beats the geometric (4/3)^(m+1)
    assert moment_bound(3, LAW, SpectralPoint(-1.0, 1)) == pytest.approx(1.0)


def test_exact_gap_certificates():
    c3 = pole_gap(LAW, 3, I=(-9.0, -4.0))
    assert c3.method == "exact"
    assert c3.delta_star == pytest.approx(0.261267585362157, rel=1e-10)
    c1 = pole_gap(LAW, 1, I=(-1.0, -1.0))
    assert c1.delta_star == pytest.approx(1.0)
    assert c1.small_hopping_ok
    assert GapCertificate.from_json(c3.to_json()) == c3


def test_grid_gap_is_a_lower_bound():
    law = SingleSiteLaw.uniform(-2.0, -1.0, delta=0.2, delta_prime=0.1)
    cert = pole_gap(law, 1, I=(-1.5, -0.8), grid=41)
    assert cert.method == "grid"
    # dense resample of the complex neighbourhoods never goes below the certificate
    rng = np.random.default_rng(2)
    for _ in range(300):
        q = rng.uniform(-2.2, -0.8) + 1j * rng.uniform(-0.2, 0.2)
        z = rng.uniform(-1.6, -0.7) + 1j * rng.uniform(-0.1, 0.1)
        assert abs(1 / q - renorm_diag(SpectralPoint(z, 1))) >= cert.delta_star


def test_contour_constant_positive():
    assert contour_constant(LAW) > 1.0


def test_joint_moments_reduce_to_single_moments():
    p = SpectralPoint(-1.0 + 0.2j, 1)
    J = joint_moment_table(4, LAW, p, p)
    for m1 in range(5):
        for m2 in range(5):
            if m1 + m2 >= 1:
                assert J[m1, m2] == pytest.approx(moment_I(m1 + m2 - 1, LAW, p), rel=1e-11)
    p2 = SpectralPoint(-1.3 - 0.1j, 1)
    assert joint_moment_J([2, 3], LAW, [p, p2]) == pytest.approx(
        joint_moment_table(3, LAW, p, p2)[2, 3], rel=1e-12)


def test_regime_map_csv(tmp_path):
    path = tmp_path / "map.csv"
    rows = regime_map(LAW, 3, [-9.0, -4.0, -0.5], path=path, metadata={"run": "test"})
    meta, table = read_csv(path)
    assert meta["run"] == "test" and meta["d"] == 3
    assert [r["certified"] for r in rows] == [True, True, False]
    assert table[0]["certified"] == "true"
