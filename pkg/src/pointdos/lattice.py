"""Lattice sums of the free kernel over Z^d and the periodic dispersion relation.

The sum ``S(z) = sum_{n != 0} |G0(z; n)|`` controls the Schur bound of the
hopping matrix.  It is evaluated shell by shell (integer squared radii with
exact multiplicities) and closed with a certified integral-comparison tail.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NoRoot, SlowDecay
from .kernels import SpectralPoint, free_kernel, hop_kernel, renorm_diag

#: Largest truncation radius used by :func:`lattice_sum_S`.
R_CAP = 600
#: Largest radius used inside the d >= 2 dispersion symbol.
R_BAND_CAP = {1: 10 ** 6, 2: 120, 3: 40}
#: Default energy search window of :func:`dispersion_root`.
BAND_WINDOW = (-1e4, -1e-4)


@dataclass(frozen=True)
class LatticeSumResult:
    """Truncated lattice sum together with its certified remainder."""

    value: float
    truncation_radius: int
    tail_bound: float
    shells_used: int

    @property
    def upper(self) -> float:
        return self.value + self.tail_bound


@dataclass(frozen=True)
class SchurCertificate:
    ratio: float
    small_hopping: bool
    S: float
    tail_bound: float
    delta_star: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class BandWindow:
    """Extent of the periodic band of constant coupling ``q``."""

    q: float
    E_minus: float
    E_plus: float
    theta_samples: int

    def to_dict(self):
        return asdict(self)


# --------------------------------------------------------------------------
# Shells
# --------------------------------------------------------------------------

@lru_cache(maxsize=16)
def shell_counts(d: int, R: int) -> np.ndarray:
    """Number of points of Z^d with ``|n|^2 == s`` for ``s = 0..R^2``."""
    size = R * R + 1
    one = np.zeros(size, dtype=np.int64)
    k = np.arange(R + 1)
    one[k * k] = 2
    one[0] = 1
    out = one
    for _ in range(d - 1):
        out = np.convolve(out, one)[:size]
    out.setflags(write=False)
    return out


def _shell_radii(d, R):
    counts = shell_counts(d, R)
    s = np.nonzero(counts)[0]
    s = s[s > 0]
    return np.sqrt(s.astype(float)), counts[s]


@lru_cache(maxsize=16)
def lattice_vectors(d: int, R: float) -> np.ndarray:
    """All nonzero ``n`` in Z^d with ``|n| <= R``, lexicographically ordered."""
    m = int(np.floor(R))
    axis = np.arange(-m, m + 1)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    norm2 = (grid * grid).sum(axis=1)
    keep = (norm2 > 0) & (norm2 <= R * R + 1e-9)
    out = grid[keep]
    out.setflags(write=False)
    return out


# --------------------------------------------------------------------------
# Tails
# --------------------------------------------------------------------------

def _tail(d, kappa, R):
    """Certified bound of ``sum_{|n| > R} |G0(z; n)|``."""
    k = kappa.real
    if d == 1:
        return float(np.exp(-k * (R + 1)) / ((1.0 - np.exp(-k)) * abs(kappa)))
    h = np.sqrt(d) / 2.0
    a = R - 2.0 * h
    if a <= 0:
        return np.inf
    if d == 3:
        return float(np.exp(-k * a) * (a / k + 1.0 / k ** 2 + (2.0 * h + h * h / a) / k))
    # |K0(kappa r)| <= K0(k r) <= sqrt(pi / (2 k r)) e^{-k r}
    return float(np.sqrt(np.pi / (2.0 * k * a)) * np.exp(-k * a)
                 * (a / k + 1.0 / k ** 2 + h / k))


def _radius_for(d, kappa, tol, cap):
    R = 1
    while _tail(d, kappa, R) >= tol:
        R = R + 1 if R < 64 else int(R * 1.25)
        if R > cap:
            raise SlowDecay(f"radius above cap {cap} needed for tol={tol:g} "
                            f"(Re kappa = {kappa.real:.3g})")
    return R


def _shell_sum(p, R, r_min=0.0):
    radii, mult = _shell_radii(p.d, R)
    keep = radii > r_min
    vals = np.abs(np.atleast_1d(free_kernel(p, radii[keep])))
    return float(np.dot(mult[keep], vals)), int(keep.sum())


def lattice_sum_S(p: SpectralPoint, tol: float = 1e-12, R_cap: int = R_CAP,
                  kappa_min: float = 1e-3) -> LatticeSumResult:
    """Shell summation of ``S(z) = sum_{n != 0} |G0(z; n)|``.

    Parameters
    ----------
    p : SpectralPoint
    tol : float
        Target for the certified tail bound.
    R_cap : int
        Largest admissible truncation radius.
    kappa_min : float
        Smallest admissible ``Re kappa``.

    Returns
    -------
    LatticeSumResult

    Raises
    ------
    SlowDecay
        If ``Re kappa < kappa_min`` or the radius would exceed ``R_cap``.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    kappa = p.kappa
    if kappa.real < kappa_min:
        raise SlowDecay(f"Re kappa = {kappa.real:.3g} below kappa_min")
    R = _radius_for(p.d, kappa, tol, R_cap)
    value, shells = _shell_sum(p, R)
    return LatticeSumResult(value, R, _tail(p.d, kappa, R), shells)


def hop_tail(p: SpectralPoint, r_hop: float, tol: float = 1e-14) -> float:
    """Certified bound of ``sum_{|n| > r_hop} |G0(z; n)|``."""
    if r_hop < 1:
        raise DomainError("r_hop must be at least 1")
    full = lattice_sum_S(p, tol=tol)
    if r_hop >= full.truncation_radius:
        return _tail(p.d, p.kappa, int(np.floor(r_hop)))
    return max(full.value - _short_sum(p, r_hop), 0.0) + full.tail_bound


def _short_sum(p, r_hop):
    radii, mult = _shell_radii(p.d, int(np.ceil(r_hop)))
    keep = radii <= r_hop + 1e-12
    return float(np.dot(mult[keep], np.abs(np.atleast_1d(free_kernel(p, radii[keep])))))


# --------------------------------------------------------------------------
# Power-law majorant
# --------------------------------------------------------------------------

_ALPHA = {2: 0.5, 3: 1.0}
CALIBRATION_KAPPA = (1.0, 20.0)


@lru_cache(maxsize=None)
def calibration_constant(d: int) -> float:
    """``C_d = max S(E) kappa^(d - alpha)`` over a log grid of ``kappa``."""
    if d not in _ALPHA:
        raise DomainError("calibration constant only for d = 2, 3")
    kappas = np.geomspace(*CALIBRATION_KAPPA, 80)
    expo = d - _ALPHA[d]
    vals = [lattice_sum_S(SpectralPoint(-k * k, d)).upper * k ** expo for k in kappas]
    return float(max(vals))


def qbound_S(d: int, E: float) -> float:
    """Power-law majorant of ``S(E)``.

    ``d = 1`` uses the closed geometric sum.  For ``d = 2, 3`` the constant
    is calibrated on ``kappa`` in ``CALIBRATION_KAPPA``; below that range the
    certified lattice sum itself is returned when it is larger.
    """
    if not E < 0:
        raise DomainError("qbound_S needs E < 0")
    kappa = np.sqrt(-E)
    if d == 1:
        return float(np.exp(-kappa) / (kappa * (1.0 - np.exp(-kappa))))
    bound = calibration_constant(d) * kappa ** (-(d - _ALPHA[d]))
    if kappa < CALIBRATION_KAPPA[0]:
        bound = max(bound, lattice_sum_S(SpectralPoint(E, d)).upper)
    return float(bound)


def schur_certificate(p: SpectralPoint, delta_star: float, tol: float = 1e-12) -> SchurCertificate:
    """Certified bound ``(S + tail) / delta_star`` of the hopping operator norm."""
    if not (delta_star > 0 and np.isfinite(delta_star)):
        raise DomainError("delta_star must be positive and finite")
    res = lattice_sum_S(p, tol=tol)
    ratio = res.upper / delta_star
    return SchurCertificate(ratio, bool(ratio < 1.0), res.value, res.tail_bound, delta_star)


# --------------------------------------------------------------------------
# Periodic dispersion
# --------------------------------------------------------------------------

def _symbol_d1(q, theta, kappa, sign):
    u = np.exp(-kappa + 1j * theta)
    hop = (u / (1.0 - u)).real / kappa
    return 1.0 / q - sign * (1.0 / (2.0 * kappa) + hop)


def dispersion_symbol(d, q, theta, E, kappa0=1.0, d1_sign_flip=False, R=None):
    """Symbol ``1/q - M(E, theta)`` of the periodic principal matrix.

    Returns ``(value, tail)`` where ``tail`` bounds the truncation error for
    ``d >= 2`` (zero in ``d = 1``, which is summed in closed form).
    """
    p = SpectralPoint(E, d, kappa0, d1_sign_flip)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if d == 1:
        return float(_symbol_d1(q, theta[0], p.kappa.real, p.sign)), 0.0
    if R is None:
        R = _radius_for(d, p.kappa, 1e-12, R_BAND_CAP[d])
    vecs = lattice_vectors(d, float(R))
    r = np.sqrt((vecs * vecs).sum(axis=1))
    g = np.asarray(hop_kernel(p, r)).real
    val = 1.0 / q - renorm_diag(p).real - float(np.dot(g, np.cos(vecs @ theta)))
    return val, _tail(d, p.kappa, R)


def dispersion_root(d, q, theta, kappa0=1.0, d1_sign_flip=False,
                    window=BAND_WINDOW, xtol=1e-12, n_scan=400):
    """Energy ``E < 0`` at which the periodic symbol vanishes.

    The window is scanned on a logarithmic grid of ``kappa`` from the deep
    end upwards in energy; the first certified sign change is refined with
    Brent's method.  For ``d >= 2`` the scan stops where the symbol would
    need a truncation radius above ``R_BAND_CAP``.

    Raises
    ------
    NoRoot
        If no sign change is found.
    """
    E_lo, E_hi = window
    if not (E_lo < E_hi < 0):
        raise DomainError("window must satisfy E_lo < E_hi < 0")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.size != d:
        raise DomainError(f"theta must have {d} components")
    kappas = np.geomspace(np.sqrt(-E_lo), np.sqrt(-E_hi), n_scan)

    def f(k, R=None):
        return dispersion_symbol(d, q, theta, -k * k, kappa0, d1_sign_flip, R)

    prev_k, (prev_v, prev_t) = None, (None, None)
    for k in kappas:
        try:
            v, t = f(k)
        except SlowDecay:
            break
        if prev_k is not None and np.sign(v) != np.sign(prev_v):
            if abs(v) > t and abs(prev_v) > prev_t:
                R = None
                if d > 1:
                    R = _radius_for(d, SpectralPoint(-k * k, d).kappa, 1e-12, R_BAND_CAP[d])
                kroot = brentq(lambda x: f(x, R)[0], k, prev_k, xtol=xtol * max(k, 1.0),
                               rtol=1e-15, maxiter=200)
                return float(-kroot * kroot)
        prev_k, prev_v, prev_t = k, v, t
    raise NoRoot(f"no sign change of the symbol for q={q}, theta={theta.tolist()}")


def theta_grid(d: int, theta_samples: int) -> np.ndarray:
    """Uniform grid on ``[0, pi]^d``; a single sample means ``theta = 0``."""
    if theta_samples < 1:
        raise DomainError("theta_samples must be positive")
    axis = np.array([0.0]) if theta_samples == 1 else np.linspace(0.0, np.pi, theta_samples)
    return np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)


def band_window(d, q, kappa0=1.0, theta_samples=9, d1_sign_flip=False,
                window=BAND_WINDOW) -> BandWindow:
    """Minimum and maximum of the dispersion root over a uniform theta grid."""
    roots = [dispersion_root(d, q, th, kappa0, d1_sign_flip, window)
             for th in theta_grid(d, theta_samples)]
    return BandWindow(float(q), float(min(roots)), float(max(roots)), int(theta_samples))
