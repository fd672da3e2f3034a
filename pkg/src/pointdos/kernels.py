r"""Free resolvent kernels of :math:`-\Delta - z` in one, two and three dimensions.

All kernels are evaluated at a :class:`SpectralPoint`, which caches the
branch :math:`\kappa = \sqrt{-z}` with :math:`\operatorname{Re}\kappa > 0`.

.. math::

   G_0(z; r) = \begin{cases}
       e^{-\kappa r} / (2\kappa),       & d = 1 \\
       K_0(\kappa r) / (2\pi),          & d = 2 \\
       e^{-\kappa r} / (4\pi r),        & d = 3
   \end{cases}

The on-site value is replaced by the renormalized diagonal
:func:`renorm_diag`.  The modified Bessel functions :math:`K_0, K_1` of
complex argument are implemented here (ascending series for
:math:`|w| \le 2`, Temme's continued fraction up to :math:`|w| = 25`, and the
Hankel asymptotic expansion beyond).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AccuracyLoss, BranchCut, DomainError, ZeroDistance

EULER_GAMMA = 0.57721566490153286061

#: |w| at which the ascending series hands over to the continued fraction.
SERIES_SWITCH = 2.0
#: |w| at which the continued fraction hands over to the asymptotic series.
ASYMPTOTIC_SWITCH = 25.0

_SERIES_TERMS = 28
_ASYMPTOTIC_TERMS = 30
_CF_MAXITER = 600


def sqrt_neg(z):
    """Principal branch of ``sqrt(-z)`` with positive real part.

    Parameters
    ----------
    z : complex or array_like
        Energy, not on the half line ``[0, inf)``.

    Returns
    -------
    complex or ndarray
        ``w`` with ``w**2 == -z`` and ``w.real > 0``.

    Raises
    ------
    BranchCut
        If any ``z`` is real and nonnegative.
    """
    za = np.asarray(z, dtype=complex)
    on_cut = (za.imag == 0) & (za.real >= 0)
    if np.any(on_cut):
        raise BranchCut(f"z={z!r} lies on the cut [0, inf)")
    w = np.sqrt(-za)
    if w.ndim == 0:
        return complex(w)
    return w


@dataclass(frozen=True)
class SpectralPoint:
    """Complex energy together with dimension and renormalization data.

    ``d1_sign_flip`` selects, in ``d = 1`` only, the convention in which the
    lattice Weyl function enters with the opposite sign, so that the
    on-site entry of the principal matrix reads ``1/q + 1/(2 kappa)``.
    That convention reproduces the textbook attractive delta potential.
    """

    z: complex
    d: int
    kappa0: float = 1.0
    d1_sign_flip: bool = False
    kappa: complex = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise DomainError(f"dimension must be 1, 2 or 3, got {self.d}")
        if not self.kappa0 > 0:
            raise DomainError("kappa0 must be positive")
        object.__setattr__(self, "z", complex(self.z))
        object.__setattr__(self, "kappa", sqrt_neg(self.z))

    @property
    def sign(self) -> int:
        """Sign with which the free kernel enters the principal matrix."""
        return -1 if (self.d == 1 and self.d1_sign_flip) else 1

    def at(self, z) -> "SpectralPoint":
        """Same dimension and conventions at another energy."""
        return replace(self, z=z)

    def conj(self) -> "SpectralPoint":
        return self.at(np.conj(self.z))


# --------------------------------------------------------------------------
# Modified Bessel functions K0, K1
# --------------------------------------------------------------------------

def _k01_series(w):
    t = w * w / 4.0
    term0 = np.ones_like(w)
    term1 = np.ones_like(w)
    i0 = np.ones_like(w)
    i1 = np.ones_like(w)
    harmonic = 0.0
    psi1, psi2 = -EULER_GAMMA, 1.0 - EULER_GAMMA
    s0 = np.zeros_like(w)
    s1 = (psi1 + psi2) * term1
    for k in range(1, _SERIES_TERMS):
        term0 = term0 * t / (k * k)
        term1 = term1 * t / (k * (k + 1))
        harmonic += 1.0 / k
        psi1 += 1.0 / k
        psi2 += 1.0 / (k + 1)
        i0 = i0 + term0
        i1 = i1 + term1
        s0 = s0 + harmonic * term0
        s1 = s1 + (psi1 + psi2) * term1
    log_half = np.log(w / 2.0)
    k0 = -(log_half + EULER_GAMMA) * i0 + s0
    k1 = 1.0 / w + (w / 2.0) * i1 * log_half - (w / 4.0) * s1
    return k0, k1


def _k01_continued_fraction(x):
    # Temme (1975) / Steed's algorithm for order zero, valid for Re x > 0.
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _CF_MAXITER):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels) <= 1e-17 * np.abs(s)):
            break
    h = a1 * h
    k0 = np.sqrt(np.pi / (2.0 * x)) * np.exp(-x) / s
    k1 = k0 * (x + 0.5 - h) / x
    return k0, k1


def _k01_asymptotic(w):
    pref = np.sqrt(np.pi / (2.0 * w)) * np.exp(-w)
    sum0 = np.ones_like(w)
    sum1 = np.ones_like(w)
    t0 = np.ones_like(w)
    t1 = np.ones_like(w)
    for k in range(1, _ASYMPTOTIC_TERMS):
        odd = (2 * k - 1) ** 2
        t0 = t0 * (0.0 - odd) / (8.0 * k * w)
        t1 = t1 * (4.0 - odd) / (8.0 * k * w)
        sum0 = sum0 + t0
        sum1 = sum1 + t1
    return pref * sum0, pref * sum1


def _k01(w):
    w = np.asarray(w, dtype=complex)
    if np.any(w.real <= 0):
        raise DomainError("K0/K1 need Re w > 0")
    flat = w.ravel()
    k0 = np.empty_like(flat)
    k1 = np.empty_like(flat)
    mod = np.abs(flat)
    small = mod <= SERIES_SWITCH
    large = mod >= ASYMPTOTIC_SWITCH
    mid = ~(small | large)
    for mask, fn in ((small, _k01_series), (mid, _k01_continued_fraction),
                     (large, _k01_asymptotic)):
        if np.any(mask):
            k0[mask], k1[mask] = fn(flat[mask])
    return k0.reshape(w.shape), k1.reshape(w.shape)


def regime_disagreement(w):
    """Relative disagreement of the two regimes adjacent to ``|w|``.

    Near ``SERIES_SWITCH`` the series and the continued fraction are
    compared; near ``ASYMPTOTIC_SWITCH`` the continued fraction and the
    asymptotic expansion.  Returns an array of relative differences of K0.
    """
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    cf0, _ = _k01_continued_fraction(w)
    near_small = np.abs(w) < 0.5 * (SERIES_SWITCH + ASYMPTOTIC_SWITCH)
    other = np.where(near_small, _k01_series(w)[0], _k01_asymptotic(w)[0])
    return np.abs(other - cf0) / np.abs(cf0)


def _maybe_check(w):
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    mod = np.abs(w)
    band = ((mod > 0.75 * SERIES_SWITCH) & (mod < 1.25 * SERIES_SWITCH)) | (
        (mod > 0.8 * ASYMPTOTIC_SWITCH) & (mod < 1.2 * ASYMPTOTIC_SWITCH))
    if np.any(band):
        worst = regime_disagreement(w[band]).max()
        if worst > 1e-8:
            warnings.warn(f"K0 regimes disagree by {worst:.2e} near switchover",
                          AccuracyLoss, stacklevel=3)


def _scalarize(x, like):
    return complex(x) if np.ndim(like) == 0 else x


def bessel_k0(w, check=False):
    """Modified Bessel function of the second kind, order zero.

    Parameters
    ----------
    w : complex or array_like
        Argument with ``Re w > 0``.
    check : bool
        If true, arguments close to a regime switchover are also evaluated
        by the neighbouring regime and :class:`~pointdos.errors.AccuracyLoss`
        is warned when the two disagree beyond 1e-8.
    """
    if check:
        _maybe_check(w)
    return _scalarize(_k01(w)[0], w)


def bessel_k1(w):
    """Modified Bessel function of the second kind, order one (``Re w > 0``)."""
    return _scalarize(_k01(w)[1], w)


# --------------------------------------------------------------------------
# Kernels
# --------------------------------------------------------------------------

def free_kernel(p: SpectralPoint, r):
    """Free resolvent kernel ``G0(z; r)`` at distance ``r > 0``.

    Raises
    ------
    ZeroDistance
        If any ``r`` is zero; the diagonal is :func:`renorm_diag`.
    """
    ra = np.asarray(r, dtype=float)
    if np.any(ra <= 0):
        raise ZeroDistance("free kernel is singular at r = 0; use renorm_diag")
    kappa = p.kappa
    if p.d == 1:
        out = np.exp(-kappa * ra) / (2.0 * kappa)
    elif p.d == 2:
        out = np.asarray(bessel_k0(kappa * ra)) / (2.0 * np.pi)
    else:
        out = np.exp(-kappa * ra) / (4.0 * np.pi * ra)
    return _scalarize(out, r)


def renorm_diag(p: SpectralPoint) -> complex:
    """Renormalized on-site value ``G0ren(z; 0)`` entering the principal matrix."""
    kappa = p.kappa
    if p.d == 1:
        return p.sign / (2.0 * kappa)
    if p.d == 2:
        return complex(np.log(kappa / p.kappa0) / (2.0 * np.pi))
    return -kappa / (4.0 * np.pi)


def renorm_diag_dz(p: SpectralPoint) -> complex:
    """Derivative of :func:`renorm_diag` with respect to ``z``."""
    kappa = p.kappa
    if p.d == 1:
        return p.sign / (4.0 * kappa ** 3)
    if p.d == 2:
        return 1.0 / (4.0 * np.pi * p.z)
    return 1.0 / (8.0 * np.pi * kappa)


def hop_kernel(p: SpectralPoint, r):
    """Off-diagonal lattice kernel: ``G0(z; r)`` times the convention sign."""
    out = free_kernel(p, r)
    return p.sign * out


def dz_free_kernel(p: SpectralPoint, r):
    r"""Derivative :math:`\partial_z G_0(z; r)` for ``r >= 0``.

    Uses :math:`\partial_z\kappa = -1/(2\kappa)`.  At ``r = 0`` the value is
    the finite diagonal of :math:`R_0(z)^2`, i.e.
    :math:`\int G_0(z; y)^2\,dy`: ``1/(4 kappa^3)`` (d=1),
    ``-1/(4 pi z)`` (d=2) and ``1/(8 pi kappa)`` (d=3).
    """
    ra = np.asarray(r, dtype=float)
    if np.any(ra < 0):
        raise DomainError("distance must be nonnegative")
    kappa = p.kappa
    if p.d == 1:
        out = np.exp(-kappa * ra) * (ra / (4.0 * kappa ** 2) + 1.0 / (4.0 * kappa ** 3))
    elif p.d == 3:
        out = np.exp(-kappa * ra) / (8.0 * np.pi * kappa) + 0j * ra
    else:
        out = np.empty(ra.shape, dtype=complex)
        pos = ra > 0
        if np.any(pos):
            rp = ra[pos]
            out[pos] = rp * np.asarray(bessel_k1(kappa * rp)) / (4.0 * np.pi * kappa)
        out[~pos] = -1.0 / (4.0 * np.pi * p.z)
    return _scalarize(out, r)


def dz_kernel_sup(p: SpectralPoint) -> float:
    r"""Upper bound of :math:`\sup_{r \ge 0} |\partial_z G_0(z; r)|`."""
    kappa = p.kappa
    k, mod = kappa.real, abs(kappa)
    if p.d == 3:
        return 1.0 / (8.0 * np.pi * mod)
    if p.d == 1:
        # e^{-kr} (r/(4|k|^2) + 1/(4|k|^3)) peaks at r* = (1 - k/|kappa|)/k
        rstar = max(0.0, (1.0 - k / mod) / k)
        return float(np.exp(-k * rstar) * (rstar / (4 * mod ** 2) + 1 / (4 * mod ** 3)))
    # |r K1(kappa r)| <= r K1(k r) <= 1/k
    return max(1.0 / (4.0 * np.pi * mod * k), 1.0 / (4.0 * np.pi * abs(p.z)))
