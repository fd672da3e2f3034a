r"""Single-site coupling laws, the weight ``w(q, z)`` and its moments.

For a coupling ``q`` and energy ``z`` the weight is

.. math::  w(q, z) = \frac{1}{q^{-1} - \rho(z)}, \qquad \rho(z) = G_0^{ren}(z; 0).

The randomness of the lattice expansion enters only through the moments
``I_m(z) = E[w(q, z)^(m+1)]`` and, for two energies, the joint moments
``J_{m1, m2}``.  Both stay analytic while the pole ``q* = 1/rho`` is kept a
positive distance away from the (complexified) coupling support; that
distance is certified by :func:`pole_gap`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

from .errors import (BranchError, ConfigError, DomainError, GapViolation,
                     NoRoot, NumericalError, PoleHit)
from .kernels import SpectralPoint, renorm_diag
from .lattice import band_window, lattice_sum_S

POLE_EPS = 1e-13


@dataclass(frozen=True)
class SingleSiteLaw:
    """Coupling distribution: uniform on ``[alpha, beta]`` or a point mass.

    ``delta`` is the width of the complex neighbourhood of the support on
    which the density is continued and ``delta_prime`` the width of the
    complex neighbourhood of the energy interval.
    """

    kind: str
    alpha: float
    beta: float
    delta: float = 0.0
    delta_prime: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "point_mass"):
            raise ConfigError(f"unknown law kind {self.kind!r}")
        if not self.beta < 0:
            raise ConfigError("support must lie in (-inf, 0)")
        if self.kind == "uniform" and not self.alpha < self.beta:
            raise ConfigError("uniform law needs alpha < beta")
        if self.kind == "point_mass" and self.alpha != self.beta:
            raise ConfigError("point mass needs alpha == beta")
        if self.delta < 0 or self.delta_prime < 0:
            raise ConfigError("margins must be nonnegative")
        if self.delta > 0 and not self.delta_prime < self.delta:
            raise ConfigError("need delta_prime < delta")
        if self.delta == 0 and self.delta_prime != 0:
            raise ConfigError("delta_prime > 0 requires delta > 0")
        if not self.delta < abs(self.beta):
            raise ConfigError("delta must stay below |beta|")

    @classmethod
    def uniform(cls, alpha, beta, delta=0.0, delta_prime=0.0):
        return cls("uniform", float(alpha), float(beta), float(delta), float(delta_prime))

    @classmethod
    def point_mass(cls, q0, delta=0.0, delta_prime=0.0):
        return cls("point_mass", float(q0), float(q0), float(delta), float(delta_prime))

    @property
    def width(self) -> float:
        return self.beta - self.alpha

    def density(self, q):
        """Density ``g(q)``; constant on the support for the uniform law."""
        if self.kind == "point_mass":
            raise DomainError("point mass has no density")
        return np.full(np.shape(q), 1.0 / self.width)

    def sample(self, rng, size):
        if self.kind == "point_mass":
            return np.full(size, self.alpha)
        return rng.uniform(self.alpha, self.beta, size)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class GapCertificate:
    """Certified lower bound on ``|1/q - rho(z)|`` over both neighbourhoods."""

    delta_star: float
    z_region: tuple
    q_region: tuple
    grid_resolution: int
    small_hopping_ok: bool
    grid_min: float = 0.0
    margin: float = 0.0
    schur_ratio: float = float("inf")
    S_sup: float = float("inf")
    d: int = 1
    kappa0: float = 1.0
    d1_sign_flip: bool = False
    method: str = "grid"

    def to_dict(self):
        out = asdict(self)
        out["z_region"] = list(self.z_region)
        out["q_region"] = list(self.q_region)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        data["z_region"] = tuple(data["z_region"])
        data["q_region"] = tuple(data["q_region"])
        return cls(**data)


# --------------------------------------------------------------------------
# Weight and pole
# --------------------------------------------------------------------------

def w_denominator(q, p: SpectralPoint):
    return 1.0 / np.asarray(q, dtype=complex) - renorm_diag(p)


def w_weight(q, p: SpectralPoint, return_denominator=False):
    """Weight ``w(q, z) = 1 / (1/q - rho(z))``.

    Parameters
    ----------
    q : complex or array_like
        Coupling(s), nonzero.
    p : SpectralPoint
    return_denominator : bool
        Also return ``1/q - rho``.

    Raises
    ------
    PoleHit
        If ``|1/q - rho| < 1e-13``.
    """
    if np.any(np.asarray(q) == 0):
        raise DomainError("q must be nonzero")
    den = w_denominator(q, p)
    if np.any(np.abs(den) < POLE_EPS):
        raise PoleHit(f"|1/q - rho| < {POLE_EPS:g} at z={p.z}")
    w = 1.0 / den
    if np.ndim(q) == 0:
        w, den = complex(w), complex(den)
    return (w, den) if return_denominator else w


def pole_location(p: SpectralPoint):
    """Coupling ``q* = 1/rho(z)`` at which the weight blows up, or None."""
    rho = renorm_diag(p)
    if rho == 0:
        return None
    return 1.0 / rho


def _segment_distance(x, a, b):
    """Distance from complex ``x`` to the real segment ``[a, b]``."""
    xr = np.clip(np.real(x), a, b)
    return np.abs(x - xr)


def gap_at(law: SingleSiteLaw, p: SpectralPoint) -> float:
    """Exact ``min_{q in [alpha, beta]} |1/q - rho(z)|`` at a single energy."""
    return float(_segment_distance(renorm_diag(p), 1.0 / law.beta, 1.0 / law.alpha))


# --------------------------------------------------------------------------
# Pole-gap certificate
# --------------------------------------------------------------------------

def _rect_grid(lo, hi, half_height, n):
    xs = np.linspace(lo, hi, n)
    if half_height > 0:
        ys = np.linspace(-half_height, half_height, n)
        pts = (xs[:, None] + 1j * ys[None, :]).ravel()
        dx = (hi - lo) / (n - 1) if n > 1 else 0.0
        dy = 2 * half_height / (n - 1)
        return pts, 0.5 * np.hypot(dx, dy)
    dx = (hi - lo) / (n - 1) if n > 1 else 0.0
    return xs.astype(complex), 0.5 * dx


def _rect_min_abs(lo, hi, half_height):
    """Distance from 0 to the rectangle ``[lo, hi] x [-h, h]`` (``hi < 0``)."""
    return float(abs(hi)) if hi < 0 else 0.0


def _rho_lipschitz(d, zmin, sign=1):
    if d == 1:
        return 1.0 / (4.0 * zmin ** 1.5)
    if d == 2:
        return 1.0 / (4.0 * np.pi * zmin)
    return 1.0 / (8.0 * np.pi * np.sqrt(zmin))


def _sup_S(d, I_max, delta_prime, kappa0, flip):
    # |G0(z; n)| <= G0(-k^2; n) with k = Re kappa >= sqrt(-(I_max + delta'))
    kmin = np.sqrt(-(I_max + delta_prime))
    return lattice_sum_S(SpectralPoint(-kmin * kmin, d, kappa0, flip)).upper


def pole_gap(law: SingleSiteLaw, d: int, kappa0: float = 1.0, I=(-1.0, -1.0),
             grid: int = 201, d1_sign_flip: bool = False) -> GapCertificate:
    """Certified uniform pole gap over ``Omega_delta(Q) x Omega_delta'(I)``.

    With ``delta = delta' = 0`` both images ``{1/q}`` and ``{rho(E)}`` are
    real segments (``rho`` is monotone on the negative axis) and the gap is
    their exact distance.  Otherwise both rectangles are gridded, the
    minimum of ``|1/q - rho(z)|`` over grid pairs is found with a k-d tree,
    and a Lipschitz margin (half cell diagonal times the sup of
    ``|d(1/q)/dq|`` and ``|d rho/dz|``) is subtracted.

    Raises
    ------
    GapViolation
        If the certified minimum is not positive.
    """
    I_min, I_max = float(I[0]), float(I[1])
    if not (I_min <= I_max < 0):
        raise DomainError("I must be a compact interval in (-inf, 0)")
    dp, dq = law.delta_prime, law.delta
    if I_max + dp >= 0:
        raise DomainError("energy neighbourhood reaches the cut")
    q_region = (law.alpha - dq, law.beta + dq, dq)
    z_region = (I_min - dp, I_max + dp, dp)
    mk = lambda z: SpectralPoint(z, d, kappa0, d1_sign_flip)

    if dq == 0 and dp == 0:
        rho_a, rho_b = renorm_diag(mk(I_min)).real, renorm_diag(mk(I_max)).real
        r_lo, r_hi = min(rho_a, rho_b), max(rho_a, rho_b)
        u_lo, u_hi = 1.0 / law.beta, 1.0 / law.alpha
        gmin = max(r_lo - u_hi, u_lo - r_hi, 0.0)
        margin, method, res = 0.0, "exact", 1
    else:
        qs, rq = _rect_grid(q_region[0], q_region[1], dq, grid)
        zs, rz = _rect_grid(z_region[0], z_region[1], dp, grid)
        u = 1.0 / qs
        v = np.array([renorm_diag(mk(z)) for z in zs])
        tree = cKDTree(np.column_stack([v.real, v.imag]))
        dist, _ = tree.query(np.column_stack([u.real, u.imag]))
        gmin = float(dist.min())
        L_u = 1.0 / _rect_min_abs(*q_region) ** 2
        L_v = _rho_lipschitz(d, _rect_min_abs(*z_region))
        margin = L_u * rq + L_v * rz
        method, res = "grid", grid

    delta_star = gmin - margin
    if not delta_star > 0:
        raise GapViolation(f"certified pole gap {delta_star:.3g} <= 0")
    S_sup = _sup_S(d, I_max, dp, kappa0, d1_sign_flip)
    ratio = S_sup / delta_star
    return GapCertificate(float(delta_star), z_region, q_region, int(res),
                          bool(ratio < 1.0), float(gmin), float(margin), float(ratio),
                          float(S_sup), d, float(kappa0), bool(d1_sign_flip), method)


# --------------------------------------------------------------------------
# Moments
# --------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _gauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _adaptive(fn, lo, hi, tol, n0=16, n_max=2048):
    """Gauss-Legendre with node doubling; ``fn`` maps nodes to an array of values."""
    prev = None
    n = n0
    while n <= n_max:
        x, wts = _gauss(n)
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        vals = fn(mid + half * x)
        est = half * np.tensordot(wts, vals, axes=(0, 0))
        if prev is not None:
            err = np.max(np.abs(est - prev))
            if err <= tol * max(1.0, float(np.max(np.abs(est)))):
                return est
        prev = est
        n *= 2
    raise NumericalError("Gauss-Legendre did not converge")


def _check_pole_off_support(law, p):
    if gap_at(law, p) < POLE_EPS:
        raise PoleHit(f"pole 1/rho lies on the coupling support at z={p.z}")


def _moment_closed_form(m, law, p):
    a, b = law.alpha, law.beta
    rho = renorm_diag(p)
    if rho == 0:
        return complex((b ** (m + 2) - a ** (m + 2)) / ((m + 2) * (b - a)))
    if abs(rho) * max(abs(a), abs(b)) < 0.5:
        return _moment_series(m, law, rho)
    ua, ub = 1.0 - rho * a, 1.0 - rho * b
    if min(abs(ua), abs(ub)) < POLE_EPS:
        raise PoleHit("1 - rho q vanishes at an endpoint")
    ratio = ua / ub
    if ratio.real < 0 and abs(ratio.imag) <= 1e-12 * abs(ratio):
        raise BranchError("segment 1 - rho q passes through the branch point")
    F = -1.0 / rho * (b - a) + np.log(ratio) / rho ** 2
    for k in range(1, m + 1):
        boundary = b ** (k + 1) / ub ** k - a ** (k + 1) / ua ** k
        F = boundary / (k * rho) - (k + 1) / (k * rho) * F
    return complex(F / (b - a))


def _moment_series(m, law, rho):
    """Termwise integral of ``q^(m+1) sum_k C(m+k, k) (rho q)^k`` for small ``|rho q|``.

    The downward recurrence divides by ``rho`` at every order and loses
    about ``log10(1/|rho q|)`` digits per step, so it is avoided here.
    """
    a, b = law.alpha, law.beta
    total, coef, k = 0j, 1.0, 0
    while True:
        e = m + 2 + k
        term = coef * rho ** k * (b ** e - a ** e) / e
        total += term
        if abs(term) <= 1e-17 * abs(total) or k > 400:
            break
        k += 1
        coef *= (m + k) / k
    return complex(total / (b - a))


def _moment_quadrature(m, law, p, tol):
    rho = renorm_diag(p)
    fn = lambda q: (q / (1.0 - rho * q)) ** (m + 1)
    return complex(_adaptive(fn, law.alpha, law.beta, tol)) / law.width


def arc_points(law, depth, t):
    """Lower elliptical arc from ``alpha`` (t = pi) to ``beta`` (t = 0)."""
    c, h = 0.5 * (law.alpha + law.beta), 0.5 * law.width
    q = c + h * np.cos(t) - 1j * depth * np.sin(t)
    dq = -h * np.sin(t) - 1j * depth * np.cos(t)
    return q, dq


def pole_enclosed(law, p, depth) -> bool:
    """Whether ``q* = 1/rho`` lies between the support and the lower arc."""
    qs = pole_location(p)
    if qs is None:
        return False
    c, h = 0.5 * (law.alpha + law.beta), 0.5 * law.width
    return bool(qs.imag <= 0 and ((qs.real - c) / h) ** 2 + (qs.imag / depth) ** 2 < 1.0)


def contour_integral(m, law, p, depth, tol=1e-13):
    """``int_arc g(q) w(q, z)^(m+1) dq`` along the lower arc, pole or not."""
    rho = renorm_diag(p)

    def fn(t):
        q, dq = arc_points(law, depth, t)
        return (q / (1.0 - rho * q)) ** (m + 1) * dq

    # t runs from pi to 0 so the arc goes from alpha to beta
    return -complex(_adaptive(fn, 0.0, np.pi, tol, n0=32, n_max=8192)) / law.width


def residue_uniform(m, law, p):
    """Residue of ``g(q) w(q, z)^(m+1)`` at ``q* = 1/rho`` for the uniform density."""
    rho = renorm_diag(p)
    return (m + 1) * (1.0 / rho) * (-rho) ** (-(m + 1)) / law.width


def default_depth(law):
    return law.delta if law.delta > 0 else 0.5 * law.width


def moment_I(m: int, law: SingleSiteLaw, p: SpectralPoint, method: str = "quadrature",
             tol: float = 1e-13, depth=None) -> complex:
    """Single-site moment ``I_m(z) = int w(q, z)^(m+1) dmu(q)``.

    Parameters
    ----------
    m : int
        Order, ``m >= 0``.
    law : SingleSiteLaw
    p : SpectralPoint
    method : {'closed_form', 'quadrature', 'contour'}
        ``closed_form`` uses the logarithmic base case and the downward
        recurrence in ``m`` (accurate for moderate ``m``); ``contour``
        integrates along the lower arc of depth ``depth`` (default
        ``law.delta``).
    tol : float
        Relative tolerance of the adaptive quadratures.

    Raises
    ------
    PoleHit
        If the pole touches the support, or is enclosed by the contour.
    BranchError
        If the closed-form logarithm cannot be continued along the support.
    """
    if m < 0:
        raise DomainError("m must be nonnegative")
    if law.kind == "point_mass":
        return w_weight(law.alpha, p) ** (m + 1)
    _check_pole_off_support(law, p)
    if method == "closed_form":
        return _moment_closed_form(m, law, p)
    if method == "quadrature":
        return _moment_quadrature(m, law, p, tol)
    if method == "contour":
        depth = default_depth(law) if depth is None else depth
        if pole_enclosed(law, p, depth):
            raise PoleHit("pole enclosed by the integration contour")
        return contour_integral(m, law, p, depth, tol)
    raise ConfigError(f"unknown method {method!r}")


def moments_up_to(M: int, law: SingleSiteLaw, p: SpectralPoint, tol: float = 1e-13) -> np.ndarray:
    """Array ``[I_0, ..., I_M]`` by one shared adaptive quadrature."""
    if law.kind == "point_mass":
        return w_weight(law.alpha, p) ** np.arange(1, M + 2)
    _check_pole_off_support(law, p)
    rho = renorm_diag(p)
    powers = np.arange(1, M + 2)
    fn = lambda q: (q / (1.0 - rho * q))[:, None] ** powers[None, :]
    return np.asarray(_adaptive(fn, law.alpha, law.beta, tol)) / law.width


def moment_bound(m: int, law: SingleSiteLaw, p: SpectralPoint, delta_star=None) -> float:
    r"""Smaller of the two a priori bounds on ``|I_m(z)|``.

    ``delta_star^-(m+1)`` (pole gap) and
    ``(max|q| / (|rho| dist([alpha, beta], 1/rho)))^(m+1)``.
    """
    if delta_star is None:
        delta_star = gap_at(law, p)
    b1 = float(delta_star) ** (-(m + 1))
    rho = renorm_diag(p)
    if rho == 0:
        return min(b1, max(abs(law.alpha), abs(law.beta)) ** (m + 1))
    dist = float(_segment_distance(1.0 / rho, law.alpha, law.beta))
    b2 = (max(abs(law.alpha), abs(law.beta)) / (abs(rho) * dist)) ** (m + 1) if dist > 0 else np.inf
    return float(min(b1, b2))


def contour_constant(law: SingleSiteLaw, depth=None) -> float:
    """``sup |g| * length(arc)``, the concrete constant of the contour estimate."""
    if law.kind == "point_mass":
        return 1.0
    depth = default_depth(law) if depth is None else depth
    x, wts = _gauss(256)
    t = 0.5 * np.pi * (x + 1.0)
    _, dq = arc_points(law, depth, t)
    length = 0.5 * np.pi * float(np.dot(wts, np.abs(dq)))
    return length / law.width


def joint_moment_J(m_list, law: SingleSiteLaw, p_list, tol: float = 1e-13) -> complex:
    """Joint moment ``int prod_j w(q, z_j)^(m_j) dmu(q)``."""
    if len(m_list) != len(p_list):
        raise DomainError("m_list and p_list differ in length")
    if any(m < 0 for m in m_list):
        raise DomainError("orders must be nonnegative")
    if law.kind == "point_mass":
        out = 1.0 + 0j
        for m, p in zip(m_list, p_list):
            out *= w_weight(law.alpha, p) ** m
        return out
    for p in p_list:
        _check_pole_off_support(law, p)
    rhos = [renorm_diag(p) for p in p_list]

    def fn(q):
        out = np.ones_like(q, dtype=complex)
        for m, rho in zip(m_list, rhos):
            out = out * (q / (1.0 - rho * q)) ** m
        return out

    return complex(_adaptive(fn, law.alpha, law.beta, tol)) / law.width


def joint_moment_table(M: int, law: SingleSiteLaw, p1: SpectralPoint, p2: SpectralPoint,
                       tol: float = 1e-13) -> np.ndarray:
    """``J[m1, m2]`` for ``0 <= m1, m2 <= M`` by one shared quadrature."""
    if law.kind == "point_mass":
        a = w_weight(law.alpha, p1) ** np.arange(M + 1)
        b = w_weight(law.alpha, p2) ** np.arange(M + 1)
        return np.outer(a, b)
    for p in (p1, p2):
        _check_pole_off_support(law, p)
    r1, r2 = renorm_diag(p1), renorm_diag(p2)
    k = np.arange(M + 1)

    def fn(q):
        a = (q / (1.0 - r1 * q))[:, None] ** k[None, :]
        b = (q / (1.0 - r2 * q))[:, None] ** k[None, :]
        return a[:, :, None] * b[:, None, :]

    return np.asarray(_adaptive(fn, law.alpha, law.beta, tol)) / law.width


# --------------------------------------------------------------------------
# Regime map
# --------------------------------------------------------------------------

REGIME_COLUMNS = ("E", "S_upper", "gap", "ratio", "certified", "band_q0", "in_band")


def regime_map(law: SingleSiteLaw, d: int, E_grid, q0=None, kappa0: float = 1.0,
               d1_sign_flip: bool = False, theta_samples: int = 9, path=None,
               metadata=None):
    """Tabulate the small-hopping ratio and the periodic band on an energy grid.

    Each row holds the certified ``S(E)``, the exact real-axis gap
    ``min_q |1/q - rho(E)|``, their ratio, whether the point is certified
    (ratio below one) and whether ``E`` lies in the band of the constant
    coupling ``q0`` (default: midpoint of the support).
    """
    from .io import write_csv

    q0 = 0.5 * (law.alpha + law.beta) if q0 is None else float(q0)
    try:
        bw = band_window(d, q0, kappa0, theta_samples, d1_sign_flip)
        band = (bw.E_minus, bw.E_plus)
    except NoRoot:
        band = None
    rows = []
    for E in np.asarray(E_grid, dtype=float):
        p = SpectralPoint(E, d, kappa0, d1_sign_flip)
        S = lattice_sum_S(p).upper
        gap = gap_at(law, p)
        ratio = S / gap if gap > 0 else np.inf
        rows.append({"E": float(E), "S_upper": S, "gap": gap, "ratio": float(ratio),
                     "certified": bool(ratio < 1.0), "band_q0": q0,
                     "in_band": bool(band is not None and band[0] <= E <= band[1])})
    if path is not None:
        meta = dict(metadata or {})
        meta.update({"law": law.to_dict(), "d": d, "kappa0": kappa0,
                     "d1_sign_flip": d1_sign_flip,
                     "band": None if band is None else list(band)})
        write_csv(path, rows, REGIME_COLUMNS, meta)
    return rows
