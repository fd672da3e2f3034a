r"""Averaged Green function difference, density of states and analyticity probes.

The free part of the averaged unit-cell trace diverges in ``d >= 2``, so the
module works with the difference

.. math:: \Delta G(z) = s \sum_{n} F(n)\, \partial_z G_0(z; n),

which follows from ``d/dz R_0 = R_0^2`` and summing the cell integral over
all lattice translates.  ``s`` is the convention sign and ``F`` the
averaged inverse principal matrix from :mod:`pointdos.expansion`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, asdict, field

import numpy as np

from .errors import DomainError, NonConvergent, RegimeViolation
from .expansion import (ExpansionResult, averaged_kernel_table, enumerate_paths,
                        hop_values, step_set, truncation_bounds)
from .kernels import SpectralPoint, dz_free_kernel, dz_kernel_sup
from .principal import SiteConfiguration, count_eigenvalues
from .sites import SingleSiteLaw, gap_at, joint_moment_table

DEFAULT_EPS = tuple(0.1 * 2.0 ** -k for k in range(9))


@dataclass(frozen=True)
class Truncation:
    """Expansion truncation knobs shared by the dos routines."""

    n_max: int = 8
    r_hop: float = 2
    budget: float = 1e8

    def to_dict(self):
        return asdict(self)


# --------------------------------------------------------------------------
# Averaged Green function difference
# --------------------------------------------------------------------------

def averaged_green_diff(p: SpectralPoint, law: SingleSiteLaw,
                        truncation: Truncation = Truncation(),
                        delta_star=None) -> ExpansionResult:
    """``Delta G(z) = s sum_n F(n) dG0/dz(z; n)`` with a certified bound.

    The bound is ``sup_n |dG0/dz(z; n)|`` times the row-sum bound of the
    truncated expansion.

    Raises
    ------
    RegimeViolation
        If ``z`` is not in the small-hopping regime.
    """
    table, res = averaged_kernel_table(law, p, truncation.n_max, truncation.r_hop,
                                       delta_star, truncation.budget)
    keys = np.array(list(table.keys()), dtype=float)
    vals = np.array(list(table.values()))
    r = np.sqrt((keys * keys).sum(axis=1))
    dz = np.atleast_1d(dz_free_kernel(p, r))
    value = p.sign * complex(np.dot(vals, dz))
    tail = dz_kernel_sup(p) * res.tail_bound
    return ExpansionResult(value, tail, res.n_max, res.r_hop, res.hop_tail,
                           res.geometric_tail, res.hop_correction, res.delta_star,
                           res.S, res.groups)


# --------------------------------------------------------------------------
# Stieltjes inversion
# --------------------------------------------------------------------------

@dataclass
class DosPoint:
    E: float
    n: float
    extrapolation_error: float
    re: float
    im: float
    tail_bound: float
    eps: tuple = DEFAULT_EPS

    def to_dict(self):
        return asdict(self)


def richardson(values, eps, order: int = 2):
    """Repeated Richardson extrapolation of ``values(eps) -> eps = 0``.

    ``order`` is the number of elimination sweeps, assuming an expansion
    in integer powers of ``eps``.  Returns the final table column and the
    last-two differences.

    Raises
    ------
    NonConvergent
        If the last two extrapolants differ by more than ten times the
        penultimate difference.
    """
    T = np.asarray(values, dtype=float)
    h = np.asarray(eps, dtype=float)
    scale = max(1.0, float(np.abs(T).max()))
    for k in range(1, order + 1):
        T = (h[:-k] * T[1:] - h[k:] * T[:-1]) / (h[:-k] - h[k:])
    if len(T) < 3:
        return float(T[-1]), float(abs(T[-1] - T[-2])) if len(T) > 1 else 0.0
    last, prev = abs(T[-1] - T[-2]), abs(T[-2] - T[-3])
    if last > 10.0 * prev and last > 1e-12 * scale:
        raise NonConvergent(f"extrapolants diverge ({last:.3g} vs {prev:.3g})")
    return float(T[-1]), float(last)


def dos_density(E: float, law: SingleSiteLaw, d: int, eps_schedule=DEFAULT_EPS,
                truncation: Truncation = Truncation(), kappa0: float = 1.0,
                d1_sign_flip: bool = False, delta_star=None) -> DosPoint:
    """``n(E) = lim (1/pi) Im Delta G(E + i eps)`` by Richardson extrapolation.

    Raises
    ------
    RegimeViolation
        If some ``E + i eps`` is outside the small-hopping regime.
    NonConvergent
        If the extrapolation diverges.
    """
    if not E < 0:
        raise DomainError("E must be negative")
    eps = np.asarray(eps_schedule, dtype=float)
    if np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
        raise DomainError("eps schedule must be positive and decreasing")
    vals, tails = [], []
    for e in eps:
        res = averaged_green_diff(SpectralPoint(complex(E, e), d, kappa0, d1_sign_flip),
                                  law, truncation, delta_star)
        vals.append(res.value.imag / np.pi)
        tails.append(res.tail_bound / np.pi)
    n, err = richardson(vals, eps)
    real = averaged_green_diff(SpectralPoint(E, d, kappa0, d1_sign_flip), law, truncation,
                               delta_star)
    return DosPoint(float(E), n, err, real.value.real, real.value.imag, max(tails),
                    tuple(float(x) for x in eps))


def dos_curve(E_grid, law, d, **kw):
    return [dos_density(float(E), law, d, **kw) for E in E_grid]


# --------------------------------------------------------------------------
# Analyticity probes
# --------------------------------------------------------------------------

@dataclass
class CauchyProbe:
    center: complex
    radius: float
    value_at_center: complex
    cauchy_residual: float
    taylor_radius_estimate: float
    coefficients: np.ndarray = field(repr=False, default=None)

    def to_dict(self):
        return {"center": complex(self.center), "radius": self.radius,
                "value_at_center": complex(self.value_at_center),
                "cauchy_residual": self.cauchy_residual,
                "taylor_radius_estimate": self.taylor_radius_estimate}


def cauchy_probe(f, center: complex, r: float, N: int = 64, noise: float = 1e-13) -> CauchyProbe:
    """Mean-value residual and Taylor-radius estimate of ``f`` on a circle.

    The trapezoidal rule on ``N`` equispaced points gives the Taylor
    coefficients ``a_k r^k`` by FFT.  Their decay ``|a_k| r^k ~ (r/R)^k`` is
    fitted log-linearly over the coefficients above the noise floor; the
    estimate is ``R``.  An entire-looking (no decay above noise) function
    returns ``inf``.
    """
    if N < 32:
        raise DomainError("use at least 32 circle points")
    t = 2.0 * np.pi * np.arange(N) / N
    vals = np.array([f(center + r * np.exp(1j * s)) for s in t], dtype=complex)
    f0 = complex(f(center))
    coef = np.fft.fft(vals) / N
    resid = abs(f0 - coef[0])
    mags = np.abs(coef[: N // 2])
    scale = max(mags.max(), 1e-300)
    ks = np.arange(1, N // 2)
    keep = mags[1:] > noise * scale * 10 + 1e-300
    ks, m = ks[keep], mags[1:][keep]
    if len(ks) < 3:
        radius = np.inf
    else:
        slope = np.polyfit(ks, np.log(m), 1)[0]
        radius = r * np.exp(-slope) if slope < 0 else r
    return CauchyProbe(center, r, f0, float(resid), float(radius), coef)


def analyticity_probe(E0: float, r: float, law: SingleSiteLaw, d: int,
                      truncation: Truncation = Truncation(), N: int = 64,
                      kappa0: float = 1.0, d1_sign_flip: bool = False,
                      I=None) -> CauchyProbe:
    """Cauchy probe of ``Delta G`` on the circle ``|z - E0| = r``.

    Every circle point is checked to be in the small-hopping regime (and,
    if ``I`` is given, the disk to lie in ``Omega_delta'(I)``) before use.

    Raises
    ------
    RegimeViolation
        If the disk leaves the certified region.
    """
    if I is not None and law.delta_prime > 0:
        if (E0 - r < I[0] - law.delta_prime or E0 + r > I[1] + law.delta_prime
                or r > law.delta_prime):
            raise RegimeViolation("disk leaves the certified energy neighbourhood")

    def f(z):
        p = SpectralPoint(z, d, kappa0, d1_sign_flip)
        return averaged_green_diff(p, law, truncation).value

    return cauchy_probe(f, complex(E0), r, N)


# --------------------------------------------------------------------------
# Two-point kernel
# --------------------------------------------------------------------------

def _site_paths(d, n_max, r_hop, budget):
    out = []
    for L in range(n_max + 1):
        for b in _endpoints(d, L * r_hop):
            for path in enumerate_paths((0,) * d, b, L, r_hop, budget):
                out.append(path)
    return out


def _endpoints(d, R):
    R = int(np.floor(R))
    return list(itertools.product(range(-R, R + 1), repeat=d))


@dataclass
class ConductivityProbe:
    E: float
    eps: float
    nu: np.ndarray
    F2: np.ndarray
    tail_bound: np.ndarray
    fit_residual: float
    scale: float
    fit_coefficients: np.ndarray

    def to_dict(self):
        return {"E": self.E, "eps": self.eps, "nu": self.nu.tolist(),
                "F2": [complex(x) for x in self.F2], "tail_bound": self.tail_bound.tolist(),
                "fit_residual": self.fit_residual, "scale": self.scale,
                "fit_coefficients": [complex(x) for x in self.fit_coefficients]}


def two_point_F2(law: SingleSiteLaw, p1: SpectralPoint, p2: SpectralPoint,
                 n_max: int = 3, r_hop: float = 1, budget: float = 1e6):
    """Averaged ``sum_n E[Gamma^{-1}(z1)(0, n) Gamma^{-1}(z2)(n, 0)]``.

    Pairs of paths ``0 -> n`` (at ``z1``) and ``n -> 0`` (at ``z2``) are
    averaged with joint moments: a site visited ``m1`` and ``m2`` times
    contributes ``J_{m1, m2}``.  Returns ``(value, tail)`` where the tail
    is ``O1 A2 + A1 O2`` with ``A`` the full and ``O`` the omitted absolute
    path-sum bounds of each factor.
    """
    d = p1.d
    J = joint_moment_table(n_max + 1, law, p1, p2)
    paths = _site_paths(d, n_max, r_hop, budget)
    by_end = {}
    for path in paths:
        by_end.setdefault(path.vertices[-1], []).append(path)
    steps = step_set(d, r_hop)
    radii = np.unique(np.sqrt((steps * steps).sum(axis=1)))
    h1 = dict(zip(np.round(radii, 12), hop_values(p1, radii)))
    h2 = dict(zip(np.round(radii, 12), hop_values(p2, radii)))

    def edge_weight(path, table):
        w = 1.0 + 0j
        for s in path.steps():
            w *= table[round(float(np.sqrt(np.dot(s, s))), 12)]
        return w

    total = 0.0 + 0j
    for end, group in by_end.items():
        for g1 in group:
            e1 = edge_weight(g1, h1)
            v1 = g1.visit_profile()
            for g2 in group:
                # second path is the reversal of a path 0 -> n, i.e. n -> 0
                v2 = g2.visit_profile()
                sites = set(v1) | set(v2)
                prod = 1.0 + 0j
                for s in sites:
                    prod *= J[v1.get(s, 0), v2.get(s, 0)]
                total += prod * e1 * edge_weight(g2, h2)

    bounds = []
    for p in (p1, p2):
        delta = gap_at(law, p)
        geo, corr, S, _, _ = truncation_bounds(p, delta, n_max, r_hop)
        full = 1.0 / (delta * (1.0 - S / delta))
        bounds.append((full, geo + corr))
    (A1, O1), (A2, O2) = bounds
    return complex(total), float(O1 * A2 + A1 * O2)


def conductivity_probe(E: float, nu_grid, eps: float, law: SingleSiteLaw, d: int,
                       n_max: int = 3, r_hop: float = 1, kappa0: float = 1.0,
                       d1_sign_flip: bool = False, degree: int = 4) -> ConductivityProbe:
    """``F2(z1, z2)`` with ``z1 = E + i eps``, ``z2 = E + nu + i eps`` on ``nu_grid``.

    The smoothness diagnostic is the max residual of a degree-``degree``
    polynomial least-squares fit in ``nu``.
    """
    nu = np.asarray(nu_grid, dtype=float)
    p1 = SpectralPoint(complex(E, eps), d, kappa0, d1_sign_flip)
    vals, tails = [], []
    for v in nu:
        p2 = SpectralPoint(complex(E + v, eps), d, kappa0, d1_sign_flip)
        val, tail = two_point_F2(law, p1, p2, n_max, r_hop)
        vals.append(val)
        tails.append(tail)
    vals = np.array(vals)
    x = nu / max(np.abs(nu).max(), 1e-300)
    coef_re = np.polyfit(x, vals.real, degree)
    coef_im = np.polyfit(x, vals.imag, degree)
    fit = np.polyval(coef_re, x) + 1j * np.polyval(coef_im, x)
    scale = float(np.abs(vals).max())
    resid = float(np.abs(vals - fit).max())
    return ConductivityProbe(float(E), float(eps), nu, vals, np.array(tails), resid, scale,
                             coef_re + 1j * coef_im)


# --------------------------------------------------------------------------
# Counting cross-check
# --------------------------------------------------------------------------

def ids_crosscheck(law: SingleSiteLaw, d: int, E_grid, L_list, samples: int, seed: int = 0,
                   kappa0: float = 1.0, d1_sign_flip: bool = False, dos_reference=None):
    """Per-site eigenvalue counting curves for each box size.

    Returns a dict with the mean curve for every ``L``, the sup-distance
    between successive curves and, if ``dos_reference`` (values of the
    integrated ``n(E)`` on ``E_grid``) is given, the sup-distance to it.
    """
    E_grid = np.asarray(E_grid, dtype=float)
    report = {"E": E_grid.tolist(), "curves": {}, "successive_sup": [], "reference_sup": None}
    if E_grid.size == 0:
        return report
    prev = None
    for L in L_list:
        acc = np.zeros_like(E_grid)
        for i in range(samples):
            cfg = SiteConfiguration.from_law(law, d, L, seed, i)
            acc += count_eigenvalues(cfg, E_grid, kappa0, d1_sign_flip, per_site=True)
        curve = acc / samples
        report["curves"][int(L)] = curve.tolist()
        if prev is not None:
            report["successive_sup"].append(float(np.abs(curve - prev).max()))
        prev = curve
    if dos_reference is not None:
        report["reference_sup"] = float(np.abs(prev - np.asarray(dos_reference)).max())
    return report
