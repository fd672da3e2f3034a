from collections import Counter
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pointdos.errors import Explosion, RegimeViolation
from pointdos.expansion import (LatticePath, averaged_kernel_F, averaged_kernel_table,
                                count_nodes, enumerate_paths, finite_volume_bound, mc_average,
                                path_catalog, step_set)
from pointdos.kernels import SpectralPoint, hop_kernel, renorm_diag
from pointdos.sites import SingleSiteLaw, moment_I

LAW = SingleSiteLaw.uniform(-2.0, -1.0)


def test_lattice_path_profile():
    path = LatticePath(((0,), (1,), (0,), (2,)))
    assert path.length == 3
    assert path.visit_profile() == {(0,): 2, (1,): 1, (2,): 1}
    assert path.steps() == [(1,), (-1,), (2,)]


@given(st.integers(0, 8), st.integers(-8, 8))
@settings(max_examples=40, deadline=None)
def test_nearest_neighbour_path_counts(n, b):
    count = sum(1 for _ in enumerate_paths(0, b, n, 1))
    expected = comb(n, (n + b) // 2) if (n + b) % 2 == 0 and abs(b) <= n else 0
    assert count == expected


def test_paths_are_lexicographic():
    paths = [p.steps() for p in enumerate_paths((0, 0), (1, 0), 3, 1)]
    assert paths == sorted(paths)


def test_explosion_guard():
    with pytest.raises(Explosion):
        next(enumerate_paths((0, 0, 0), (0, 0, 0), 10, 2, budget=1e6))


def test_count_nodes_matches_brute_force():
    steps = [tuple(s) for s in step_set(2, 1.5)]
    total, frontier = 0, [(0, 0)]
    for _ in range(4):
        frontier = [(u[0] + s[0], u[1] + s[1]) for u in frontier for s in steps]
        total += len(frontier)
    assert count_nodes(2, 4, 1.5) == total
    assert path_catalog(2, 4, 1.5).nodes == total


def brute_F(n, law, p, n_max, r_hop):
    """Path-by-path sum with moments evaluated per visit profile."""
    d = p.d
    I = [moment_I(m, law, p) for m in range(n_max + 1)]
    total = 0j
    for length in range(n_max + 1):
        for path in enumerate_paths((0,) * d, n, length, r_hop):
            w = np.prod([I[r - 1] for r in Counter(path.vertices).values()])
            for s in path.steps():
                w = w * hop_kernel(p, float(np.linalg.norm(s)))
            total += w
    return total


@pytest.mark.parametrize("d,n,n_max,r_hop", [(1, (0,), 5, 2), (1, (2,), 4, 2), (2, (1, 0), 4, 1),
                                             (3, (0, 0, 0), 3, 1)])
def test_catalog_equals_path_sum(d, n, n_max, r_hop):
    # d=2 needs a deeper energy to stay in the small-hopping regime
    E = -40.0 + 0.4j if d == 2 else -6.0 + 0.4j
    p = SpectralPoint(E, d)
    fast = averaged_kernel_F(n, LAW, p, n_max, r_hop)
    assert fast.value == pytest.approx(brute_F(n, LAW, p, n_max, r_hop), rel=1e-12)


def test_table_agrees_with_single_entries():
    p = SpectralPoint(-1.0, 1)
    table, res = averaged_kernel_table(LAW, p, 6, 2)
    for n in (0, 1, 3):
        assert table[(n,)] == pytest.approx(averaged_kernel_F(n, LAW, p, 6, 2).value, rel=1e-12)
    assert table[(1,)] == pytest.approx(table[(-1,)])


def test_hand_value_two_steps():
    p = SpectralPoint(-1.0, 1)
    I0, I1 = moment_I(0, LAW, p), moment_I(1, LAW, p)
    g = np.exp(-1.0) / 2
    assert averaged_kernel_F(0, LAW, p, 2, 1).value == pytest.approx(I0 + 2 * I1 * I0 * g * g,
                                                                     rel=1e-13)


def periodic_oracle(q, p, n=0):
    """``Gamma^{-1}(0, n)`` of the constant-coupling d=1 operator by Fourier quadrature."""
    theta = np.linspace(-np.pi, np.pi, 4097)[:-1]
    k = np.arange(1, 300)
    hop = np.asarray(hop_kernel(p, k.astype(float)))
    symbol = 1 / q - renorm_diag(p) - 2 * (hop[None, :] * np.cos(np.outer(theta, k))).sum(axis=1)
    return np.mean(np.exp(1j * n * theta) / symbol)


@pytest.mark.parametrize("n", [0, 1, 2])
def test_point_mass_against_periodic_operator(n):
    law = SingleSiteLaw.point_mass(-1.5)
    p = SpectralPoint(-1.0 + 0.2j, 1)
    res = averaged_kernel_F(n, law, p, 10, 3)
    assert abs(res.value - periodic_oracle(-1.5, p, n)) <= res.tail_bound


def test_truncation_error_shrinks_with_order():
    p = SpectralPoint(-2.0, 1)
    exact = periodic_oracle(-1.5, p)
    law = SingleSiteLaw.point_mass(-1.5)
    errs = [abs(averaged_kernel_F(0, law, p, m, 3).value - exact) for m in (2, 5, 8)]
    assert errs[0] > errs[1] > errs[2]


def test_regime_violation_outside_certified_region():
    with pytest.raises(RegimeViolation):
        averaged_kernel_F((0, 0, 0), LAW, SpectralPoint(-0.5, 3), 2, 1)


def test_mc_point_mass_has_zero_variance():
    law = SingleSiteLaw.point_mass(-1.5)
    m = mc_average(law, SpectralPoint(-1.0, 1), 6, 20, seed=0)
    assert m.stderr[0] == 0.0
    assert m.samples == 20


def test_mc_independent_of_chunking():
    p = SpectralPoint(-1.0, 1)
    a = mc_average(LAW, p, 4, 50, seed=9, chunk=7)
    b = mc_average(LAW, p, 4, 50, seed=9, chunk=50)
    np.testing.assert_array_equal(a.mean, b.mean)


def test_mc_offsets_and_edge_bound_decay():
    p = SpectralPoint(-1.0, 1)
    m = mc_average(LAW, p, 6, 200, seed=1, offsets=[[0], [1]])
    assert m.mean.shape == (2,)
    assert finite_volume_bound(p, 1.0, 12, (0,), (0,)) < finite_volume_bound(p, 1.0, 4, (0,), (0,))
