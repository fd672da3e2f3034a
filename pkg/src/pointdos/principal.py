"""Principal matrices of finitely many point interactions.

For a configuration of couplings ``q(a)`` on the sites ``a`` of the box
``[-L, L]^d`` the principal matrix at energy ``z`` is

    Gamma(a, b) = (1/q(a) - rho(z)) delta_ab - (1 - delta_ab) G0(z; a - b)

(with the convention sign applied to the kernel, see
:class:`~pointdos.kernels.SpectralPoint`).  It splits as ``Gamma = D - T``
with ``D`` diagonal; ``Gamma(z)`` is singular exactly at the point
eigenvalues of the finite-site Hamiltonian.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (DomainError, GridTooCoarse, PoleHit, RegimeViolation,
                     Singular)
from .kernels import SpectralPoint, free_kernel, hop_kernel, renorm_diag
from .lattice import lattice_sum_S
from .sites import POLE_EPS, SingleSiteLaw

COND_MAX = 1e12


def box_sites(d: int, L: int) -> np.ndarray:
    """Sites of ``Z^d`` in ``[-L, L]^d``, lexicographically ordered."""
    axis = np.arange(-L, L + 1)
    return np.array(list(itertools.product(axis, repeat=d)), dtype=np.int64).reshape(-1, d)


def sample_rng(seed: int, sample_index: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, sample_index)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, sample_index])))


@dataclass
class SiteConfiguration:
    """Couplings on the box ``[-L, L]^d``.

    Site ``i`` of ``sites`` carries ``couplings[i]``; sampled configurations
    draw the couplings in site order from :func:`sample_rng`.
    """

    d: int
    L: int
    couplings: np.ndarray
    seed: int | None = None
    sample_index: int = 0
    law: SingleSiteLaw | None = None
    sites: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.sites = box_sites(self.d, self.L)
        self.couplings = np.asarray(self.couplings, dtype=float).ravel()
        if self.couplings.size != len(self.sites):
            raise DomainError(f"need {len(self.sites)} couplings, got {self.couplings.size}")
        if np.any(self.couplings == 0):
            raise DomainError("couplings must be nonzero")

    @classmethod
    def from_law(cls, law: SingleSiteLaw, d: int, L: int, seed: int, sample_index: int = 0):
        n = (2 * L + 1) ** d
        q = law.sample(sample_rng(seed, sample_index), n)
        return cls(d, L, q, seed, sample_index, law)

    @classmethod
    def constant(cls, d, L, q):
        return cls(d, L, np.full((2 * L + 1) ** d, float(q)))

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    def index_of(self, site) -> int:
        site = np.asarray(site).reshape(-1)
        return int(np.ravel_multi_index(tuple(site + self.L), (2 * self.L + 1,) * self.d))

    def to_dict(self):
        out = {"d": self.d, "L": self.L, "seed": self.seed, "sample_index": self.sample_index,
               "law": None if self.law is None else self.law.to_dict()}
        if self.law is None:
            out["couplings"] = [float(x) for x in self.couplings]
        return out

    @classmethod
    def from_dict(cls, data):
        if data.get("law") is not None:
            return cls.from_law(SingleSiteLaw(**data["law"]), data["d"], data["L"],
                                data["seed"], data.get("sample_index", 0))
        return cls(data["d"], data["L"], data["couplings"])


@dataclass
class PrincipalMatrix:
    config: SiteConfiguration
    z: SpectralPoint
    dense: np.ndarray
    diag: np.ndarray
    hop: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return 1.0 / self.diag


def _pair_distances(sites):
    diff = sites[:, None, :] - sites[None, :, :]
    return (diff * diff).sum(axis=-1)


def _hop_matrix(p, sites):
    r2 = _pair_distances(sites)
    uniq, inv = np.unique(r2, return_inverse=True)
    vals = np.zeros(uniq.shape, dtype=complex)
    pos = uniq > 0
    vals[pos] = hop_kernel(p, np.sqrt(uniq[pos].astype(float)))
    return vals[inv].reshape(r2.shape)


def assemble_gamma(config: SiteConfiguration, p: SpectralPoint) -> PrincipalMatrix:
    """Principal matrix ``Gamma = D - T`` of a configuration at ``p``.

    Raises
    ------
    PoleHit
        If some diagonal entry ``1/q(a) - rho`` is below 1e-13 in modulus.
    """
    if p.d != config.d:
        raise DomainError("dimension mismatch between configuration and energy")
    diag = 1.0 / config.couplings - renorm_diag(p)
    bad = np.abs(diag) < POLE_EPS
    if np.any(bad):
        raise PoleHit(f"site {config.sites[np.argmax(bad)].tolist()} sits on the pole")
    hop = _hop_matrix(p, config.sites)
    dense = np.diag(diag) - hop
    return PrincipalMatrix(config, p, dense, diag, hop)


def theta_minus_M_check(config: SiteConfiguration, p: SpectralPoint) -> float:
    """Max deviation between ``Gamma`` and an independently assembled ``Theta - M``."""
    pm = assemble_gamma(config, p)
    n = config.n_sites
    theta = np.diag(1.0 / config.couplings).astype(complex)
    M = np.empty((n, n), dtype=complex)
    rho = renorm_diag(p)
    for a in range(n):
        for b in range(n):
            if a == b:
                M[a, b] = rho
            else:
                r = float(np.linalg.norm(config.sites[a] - config.sites[b]))
                M[a, b] = p.sign * free_kernel(p, r)
    return float(np.max(np.abs(pm.dense - (theta - M))))


@dataclass
class NeumannResult:
    matrix: np.ndarray
    tail_bound: float
    ratio: float
    n_max: int


def neumann_inverse(pm: PrincipalMatrix, n_max: int, S_bound=None) -> NeumannResult:
    """Truncated Neumann series ``sum_{k <= n_max} (D^-1 T)^k D^-1``.

    The ratio ``r = sup|w| * S`` uses the realized couplings and the
    certified infinite-lattice row sum; the tail bound
    ``sup|w| r^(n_max+1) / (1 - r)`` bounds every omitted entry.

    Raises
    ------
    RegimeViolation
        If ``r >= 1``.
    """
    w = pm.weights
    sup_w = float(np.max(np.abs(w)))
    if pm.config.n_sites == 1:
        return NeumannResult(np.diag(w).astype(complex), 0.0, 0.0, n_max)
    if S_bound is None:
        S_bound = lattice_sum_S(pm.z).upper
    r = sup_w * S_bound
    if r >= 1.0:
        raise RegimeViolation(f"Schur ratio {r:.4g} >= 1")
    A = w[:, None] * pm.hop
    term = np.diag(w).astype(complex)
    total = term.copy()
    for _ in range(n_max):
        term = A @ term
        total += term
    return NeumannResult(total, sup_w * r ** (n_max + 1) / (1.0 - r), r, n_max)


def dense_inverse(pm: PrincipalMatrix, cond_max: float = COND_MAX) -> np.ndarray:
    """Dense inverse of ``Gamma`` with a 1-norm condition check.

    Raises
    ------
    Singular
        If the condition number exceeds ``cond_max``.
    """
    try:
        inv = np.linalg.inv(pm.dense)
    except np.linalg.LinAlgError as exc:
        raise Singular(str(exc)) from None
    cond = np.linalg.norm(pm.dense, 1) * np.linalg.norm(inv, 1)
    if not np.isfinite(cond) or cond > cond_max:
        raise Singular(f"condition number {cond:.3g} above {cond_max:g}")
    return inv


def herglotz_check(pm: PrincipalMatrix) -> float:
    """Smallest eigenvalue of ``Im(s Gamma^-1) = (s Gamma^-1 - (s Gamma^-1)^*) / 2i``.

    ``s`` is the convention sign, so that the quantity is the imaginary part
    of the operator entering the resolvent correction.
    """
    if not pm.z.z.imag > 0:
        raise DomainError("Herglotz check needs Im z > 0")
    G = pm.z.sign * dense_inverse(pm)
    im = (G - G.conj().T) / 2j
    return float(np.linalg.eigvalsh(im).min())


# --------------------------------------------------------------------------
# Eigenvalues of the finite-site operator
# --------------------------------------------------------------------------

def _gamma_real(config, kappa, kappa0, flip):
    # no pole check: branches are evaluated right at their zeros
    p = SpectralPoint(-kappa * kappa, config.d, kappa0, flip)
    G = -_hop_matrix(p, config.sites).real
    G[np.diag_indices_from(G)] = 1.0 / config.couplings - renorm_diag(p).real
    return G


def _branches(config, kappa, kappa0, flip):
    return np.linalg.eigvalsh(_gamma_real(config, kappa, kappa0, flip))


def _diag_root_kappa(q, d, kappa0, sign):
    """``kappa`` at which ``1/q = rho(-kappa^2)`` for one site, or 0 if none."""
    if d == 3:
        return 4.0 * np.pi / abs(q) if q < 0 else 0.0
    if d == 2:
        return kappa0 * np.exp(2.0 * np.pi / q)
    return abs(q) / 2.0 if sign * q > 0 else 0.0


def _diag_floor(q, d, kappa, kappa0, sign):
    """``inf_{k >= kappa} |1/q - rho(-k^2)|`` once ``kappa`` is past the root."""
    val = abs(1.0 / q - renorm_diag(SpectralPoint(-kappa * kappa, d, kappa0, sign < 0)).real)
    return min(val, 1.0 / abs(q)) if d == 1 else val


def _box_row_sum(config, kappa, kappa0, flip):
    # sum of |G0(n)| over all differences n != 0 of two box sites
    p = SpectralPoint(-kappa * kappa, config.d, kappa0, flip)
    diffs = box_sites(config.d, 2 * config.L)
    r = np.sqrt((diffs * diffs).sum(axis=1).astype(float))
    r = r[r > 0]
    return float(np.abs(np.atleast_1d(free_kernel(p, r))).sum()) if r.size else 0.0


def _floor_kappa(config, kappa0, flip, start):
    """``kappa`` beyond which every ``Gamma(-k^2)`` is strictly diagonally dominant.

    Past the largest single-site root each diagonal entry keeps its sign
    and its modulus is bounded below by :func:`_diag_floor`, while every
    off-diagonal row sum is bounded by the decreasing sum of ``|G0|`` over
    all differences of two box sites.
    """
    sign = -1 if (config.d == 1 and flip) else 1
    qs = np.unique(config.couplings)
    roots = [_diag_root_kappa(q, config.d, kappa0, sign) for q in qs]
    kappa = max(start, 1.01 * max(roots), 1e-3)
    for _ in range(200):
        S = _box_row_sum(config, kappa, kappa0, flip)
        if min(_diag_floor(q, config.d, kappa, kappa0, sign) for q in qs) > S:
            return kappa
        kappa *= 1.25
    raise GridTooCoarse("no diagonally dominant floor found")


def _crossings(vals):
    s = np.sign(vals)
    return (s[:-1] * s[1:]) < 0


def locate_eigenvalues(config: SiteConfiguration, E_max: float, kappa0: float = 1.0,
                       d1_sign_flip: bool = False, n_grid: int = 200, refine: int = 4,
                       xtol: float = 1e-13) -> np.ndarray:
    """Point eigenvalues ``E <= E_max < 0`` of the finite-site operator.

    Below a Gershgorin floor ``Gamma(E)`` is diagonally dominant, hence
    nonsingular.  Between the floor and ``E_max`` the sorted eigenvalues of
    the real symmetric ``Gamma(E)`` are tracked on a ``kappa`` grid and on a
    ``refine``-times finer grid; every sign change of a branch is an
    eigenvalue and is polished with Brent's method.

    Raises
    ------
    GridTooCoarse
        If the two grids disagree on the crossings of some interval.
    """
    if not E_max < 0:
        raise DomainError("E_max must be negative")
    k_top = np.sqrt(-E_max)
    k_floor = _floor_kappa(config, kappa0, d1_sign_flip, k_top)
    if k_floor <= k_top:
        return np.zeros(0)
    coarse = np.geomspace(k_floor, k_top, n_grid)
    lam = np.array([_branches(config, k, kappa0, d1_sign_flip) for k in coarse])
    roots = []
    for j in range(n_grid - 1):
        ka, kb = coarse[j], coarse[j + 1]
        hits = np.nonzero(_crossings(lam[j:j + 2])[0])[0]
        fine = np.geomspace(ka, kb, refine + 1)
        lf = np.array([lam[j]] + [_branches(config, k, kappa0, d1_sign_flip)
                                  for k in fine[1:-1]] + [lam[j + 1]])
        fine_hits = _crossings(lf).sum(axis=0)
        if np.any(fine_hits > 1) or not np.array_equal(np.nonzero(fine_hits)[0], hits):
            raise GridTooCoarse(f"branch crossings disagree on kappa in [{kb:.6g}, {ka:.6g}]")
        for i in hits:
            m = int(np.nonzero(_crossings(lf[:, i]))[0][0])
            f = lambda k, i=i: _branches(config, k, kappa0, d1_sign_flip)[i]
            k_root = brentq(f, fine[m], fine[m + 1], xtol=xtol, rtol=1e-15)
            roots.append(-k_root * k_root)
    return np.sort(np.array(roots))


def count_eigenvalues(config: SiteConfiguration, E_grid, kappa0: float = 1.0,
                      d1_sign_flip: bool = False, per_site: bool = False,
                      n_grid: int = 200, refine: int = 4) -> np.ndarray:
    """Counting function ``N(E)`` of the point eigenvalues on ``E_grid``."""
    E_grid = np.asarray(E_grid, dtype=float)
    if E_grid.size == 0:
        return np.zeros(0)
    if np.any(np.diff(E_grid) < 0) or not E_grid[-1] < 0:
        raise DomainError("E_grid must be increasing and negative")
    ev = locate_eigenvalues(config, float(E_grid[-1]), kappa0, d1_sign_flip, n_grid, refine)
    counts = np.searchsorted(ev, E_grid, side="right").astype(float)
    return counts / config.n_sites if per_site else counts
