r"""Disorder-averaged random-walk expansion of the inverse principal matrix.

On the infinite lattice ``Gamma^{-1} = sum_k (D^{-1} T)^k D^{-1}``, so the
entry ``(0, n)`` is a sum over lattice paths ``0 = a_0, ..., a_k = n`` with
vertex weights ``w(q(a_j), z)`` and edge weights ``T(a_j, a_{j+1})``.  By
independence of the couplings the average of a path weight factorizes over
the distinct visited sites,

.. math:: E \prod_j w(q(a_j)) = \prod_\alpha I_{r(\alpha) - 1}(z),

where ``r(alpha)`` is the number of visits to ``alpha``.  Paths are
therefore grouped by endpoint, visit histogram and step-length counts
(:class:`PathCatalog`) and each group is evaluated once per energy.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, asdict
from functools import lru_cache

import numpy as np

from .errors import DomainError, Explosion, RegimeViolation, Singular
from .kernels import SpectralPoint, hop_kernel, renorm_diag
from .lattice import lattice_sum_S, hop_tail as _hop_tail, _tail, lattice_vectors
from .principal import box_sites, sample_rng
from .sites import SingleSiteLaw, gap_at, moments_up_to

DEFAULT_BUDGET = 10 ** 8
MAX_N = 24


# --------------------------------------------------------------------------
# Paths
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticePath:
    """A path ``(a_0, ..., a_n)`` in ``Z^d`` with distinct consecutive vertices."""

    vertices: tuple

    def __post_init__(self):
        for u, v in zip(self.vertices, self.vertices[1:]):
            if u == v:
                raise DomainError("consecutive vertices must differ")

    @property
    def length(self) -> int:
        return len(self.vertices) - 1

    def visit_profile(self) -> dict:
        """Site -> number of visits (sums to ``length + 1``)."""
        return dict(Counter(self.vertices))

    def steps(self):
        return [tuple(np.subtract(v, u)) for u, v in zip(self.vertices, self.vertices[1:])]


def step_set(d: int, r_hop: float) -> np.ndarray:
    """Nonzero steps with ``|s| <= r_hop`` in lexicographic order."""
    if r_hop < 1:
        raise DomainError("r_hop must be at least 1")
    return np.asarray(lattice_vectors(d, float(r_hop)), dtype=np.int64)


def enumerate_paths(a, b, n: int, r_hop: float, budget: float = DEFAULT_BUDGET):
    """Yield every path of length ``n`` from ``a`` to ``b`` with steps ``<= r_hop``.

    Paths come out in lexicographic order of their step sequences.  The
    stream is lazy; a prefix is abandoned as soon as ``b`` is out of reach.

    Raises
    ------
    Explosion
        If ``(#steps)^n`` exceeds ``budget``.
    """
    a = tuple(int(x) for x in np.atleast_1d(a))
    b = tuple(int(x) for x in np.atleast_1d(b))
    if len(a) != len(b):
        raise DomainError("endpoints differ in dimension")
    if n < 0:
        raise DomainError("n must be nonnegative")
    steps = [tuple(int(x) for x in s) for s in step_set(len(a), r_hop)]
    if float(len(steps)) ** n > budget:
        raise Explosion(f"{len(steps)}^{n} paths exceed budget {budget:g}")
    reach = max(max(abs(c) for c in s) for s in steps)

    def rec(prefix, remaining):
        cur = prefix[-1]
        if remaining == 0:
            if cur == b:
                yield LatticePath(tuple(prefix))
            return
        for s in steps:
            nxt = tuple(c + e for c, e in zip(cur, s))
            if max(abs(x - y) for x, y in zip(nxt, b)) > reach * (remaining - 1):
                continue
            prefix.append(nxt)
            yield from rec(prefix, remaining - 1)
            prefix.pop()

    yield from rec([a], n)


# --------------------------------------------------------------------------
# Catalog
# --------------------------------------------------------------------------

def _step_classes(steps):
    r2 = (steps * steps).sum(axis=1)
    uniq, cls = np.unique(r2, return_inverse=True)
    return cls.astype(np.int64), np.sqrt(uniq.astype(float))


def count_nodes(d: int, n_max: int, r_hop: float, target=None) -> int:
    """Exact number of search nodes of the catalog enumeration."""
    steps = step_set(d, r_hop)
    reach = int(np.abs(steps).max())
    box = n_max * reach
    side = 2 * box + 1
    cur = np.zeros((side,) * d)
    cur[(box,) * d] = 1.0
    if target is not None:
        grid = np.indices((side,) * d) - box
        dist = np.max(np.abs(grid - np.asarray(target).reshape((d,) + (1,) * d)), axis=0)
    total = 0.0
    for j in range(1, n_max + 1):
        nxt = np.zeros_like(cur)
        for s in steps:
            src = tuple(slice(max(0, -k), side - max(0, k)) for k in s)
            dst = tuple(slice(max(0, k), side - max(0, -k)) for k in s)
            nxt[dst] += cur[src]
        if target is not None:
            nxt[dist > reach * (n_max - j)] = 0.0
        total += nxt.sum()
        cur = nxt
    return int(total)


@dataclass
class PathCatalog:
    """Path groups sharing endpoint, visit histogram and step-length counts.

    ``hist[g, j]`` is the number of sites visited ``j + 1`` times and
    ``edges[g, c]`` the number of steps of length ``class_radii[c]``.
    """

    d: int
    n_max: int
    r_hop: float
    target: tuple | None
    endpoints: np.ndarray
    hist: np.ndarray
    edges: np.ndarray
    mult: np.ndarray
    class_radii: np.ndarray
    nodes: int

    @property
    def lengths(self) -> np.ndarray:
        return self.edges.sum(axis=1)

    def group_weights(self, moments, hops):
        """Averaged weight of each group: ``mult * prod I^h * prod t^e``."""
        I = np.asarray(moments)[: self.n_max + 1]
        vertex = np.prod(I[None, :] ** self.hist, axis=1)
        edge = np.prod(np.asarray(hops)[None, :] ** self.edges, axis=1)
        return self.mult * vertex * edge

    def value(self, moments, hops) -> complex:
        return complex(self.group_weights(moments, hops).sum())

    def by_endpoint(self, moments, hops) -> dict:
        vals = self.group_weights(moments, hops)
        keys, inv = np.unique(self.endpoints, axis=0, return_inverse=True)
        sums = np.zeros(len(keys), dtype=complex)
        np.add.at(sums, inv.ravel(), vals)
        return {tuple(int(x) for x in k): complex(v) for k, v in zip(keys, sums)}


def _build_catalog(d, n_max, r_hop, target, budget):
    from ._pathdfs import catalog_dfs

    if not 0 <= n_max <= MAX_N:
        raise DomainError(f"n_max must lie in [0, {MAX_N}]")
    steps = step_set(d, r_hop)
    cls, radii = _step_classes(steps)
    n_cls = len(radii)
    if (n_max + 1.0) ** n_cls >= 2.0 ** 62:
        raise Explosion("edge code does not fit into 64 bits")
    nodes = count_nodes(d, n_max, r_hop, target)
    if nodes > budget:
        raise Explosion(f"{nodes:.3g} search nodes exceed budget {budget:g}")
    reach = int(np.abs(steps).max())
    box = max(n_max * reach, 1)
    split = (n_max + 2) // 2
    tgt = np.zeros(0, np.int64) if target is None else np.asarray(target, np.int64)
    out, visited = catalog_dfs(steps, cls, n_cls, n_max, box, tgt,
                               reach if target is not None else 0, split)
    keys = np.array(list(out.keys()), dtype=np.int64).reshape(-1, 4)
    mult = np.array(list(out.values()), dtype=np.int64)
    order = np.lexsort(keys.T[::-1])
    keys, mult = keys[order], mult[order]

    side = 2 * box + 1
    endpoints = np.stack(np.unravel_index(keys[:, 0], (side,) * d), axis=1) - box
    base_p, base_e = n_max + 2, n_max + 1
    hist = np.zeros((len(keys), n_max + 1), dtype=np.int64)
    lo, hi = keys[:, 1].copy(), keys[:, 2].copy()
    for j in range(n_max + 1):
        if j < split:
            hist[:, j], lo = lo % base_p, lo // base_p
        else:
            hist[:, j], hi = hi % base_p, hi // base_p
    edges = np.zeros((len(keys), n_cls), dtype=np.int64)
    ec = keys[:, 3].copy()
    for c in range(n_cls):
        edges[:, c], ec = ec % base_e, ec // base_e
    return PathCatalog(d, n_max, float(r_hop), None if target is None else tuple(target),
                       endpoints, hist, edges, mult, radii, int(visited))


@lru_cache(maxsize=32)
def _cached_catalog(d, n_max, r_hop, target, budget):
    return _build_catalog(d, n_max, r_hop, target, budget)


def path_catalog(d: int, n_max: int, r_hop: float, target=None,
                 budget: float = DEFAULT_BUDGET) -> PathCatalog:
    """Grouped catalog of all walks from the origin (to ``target`` if given).

    Raises
    ------
    Explosion
        If the exact number of search nodes exceeds ``budget``.
    """
    if target is not None:
        target = tuple(int(x) for x in np.atleast_1d(target))
        if len(target) != d:
            raise DomainError("target dimension mismatch")
    return _cached_catalog(int(d), int(n_max), float(r_hop), target, float(budget))


# --------------------------------------------------------------------------
# Averaged kernel
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpansionResult:
    """Truncated expansion value with its certified error bound."""

    value: complex
    tail_bound: float
    n_max: int
    r_hop: float
    hop_tail: float
    geometric_tail: float = 0.0
    hop_correction: float = 0.0
    delta_star: float = 0.0
    S: float = 0.0
    groups: int = 0

    def to_dict(self):
        out = asdict(self)
        out["value"] = {"re": self.value.real, "im": self.value.imag}
        return out


def hop_tail(p: SpectralPoint, r_hop: float) -> float:
    """Certified ``S_{>r_hop}(z) = sum_{|n| > r_hop} |G0(z; n)|``."""
    return _hop_tail(p, r_hop)


def hop_values(p: SpectralPoint, radii) -> np.ndarray:
    """Edge weights ``T`` (convention sign times ``G0``) at the class radii."""
    return np.atleast_1d(np.asarray(hop_kernel(p, np.asarray(radii, dtype=float)), dtype=complex))


def truncation_bounds(p: SpectralPoint, delta: float, n_max: int, r_hop: float):
    """``(geometric, hop_correction, S, S_short, S_far)`` for a given gap.

    ``geometric = delta^-1 (S/delta)^(n_max+1) / (1 - S/delta)`` bounds all
    paths longer than ``n_max``; ``hop_correction = sum_{m=1}^{n_max}
    delta^-(m+1) (S^m - S_short^m)`` bounds the omitted long hops.
    """
    S = lattice_sum_S(p).upper
    rho = S / delta
    if rho >= 1.0:
        raise RegimeViolation(f"S / gap = {rho:.4g} >= 1")
    far = hop_tail(p, r_hop)
    short = max(S - far, 0.0)
    geo = rho ** (n_max + 1) / (delta * (1.0 - rho))
    m = np.arange(1, n_max + 1)
    corr = float(np.sum(delta ** (-(m + 1.0)) * (S ** m - short ** m)))
    return geo, corr, S, short, far


def _delta_for(law, p, delta_star):
    gap = gap_at(law, p)
    if delta_star is None:
        return gap
    if delta_star > gap * (1 + 1e-12):
        raise DomainError("delta_star exceeds the exact gap at this energy")
    return float(delta_star)


def averaged_kernel_F(n, law: SingleSiteLaw, p: SpectralPoint, n_max: int = 12,
                      r_hop: float = 3, delta_star=None,
                      budget: float = DEFAULT_BUDGET) -> ExpansionResult:
    """Averaged entry ``F(n) = E[Gamma^{-1}(0, n)]`` by the path expansion.

    Parameters
    ----------
    n : array_like of int
        Lattice vector.
    law : SingleSiteLaw
    p : SpectralPoint
    n_max : int
        Longest path kept.
    r_hop : float
        Longest step kept (Euclidean).
    delta_star : float, optional
        Pole gap used in the bounds; defaults to the exact gap at ``z``.
    budget : float
        Largest admissible number of enumeration nodes.

    Raises
    ------
    RegimeViolation
        If ``S(z) / delta_star >= 1``.
    Explosion
        If the enumeration exceeds ``budget``.
    """
    n = tuple(int(x) for x in np.atleast_1d(n))
    if len(n) != p.d:
        raise DomainError("lattice vector dimension mismatch")
    delta = _delta_for(law, p, delta_star)
    geo, corr, S, _, far = truncation_bounds(p, delta, n_max, r_hop)
    cat = path_catalog(p.d, n_max, r_hop, n, budget)
    I = moments_up_to(n_max, law, p)
    val = cat.value(I, hop_values(p, cat.class_radii))
    return ExpansionResult(val, geo + corr, n_max, float(r_hop), far, geo, corr,
                           delta, S, len(cat.mult))


def averaged_kernel_table(law: SingleSiteLaw, p: SpectralPoint, n_max: int = 8,
                          r_hop: float = 2, delta_star=None,
                          budget: float = DEFAULT_BUDGET):
    """``F(n)`` for every reachable ``n`` and the common certified bound.

    The bound controls both each entry and ``sum_n |F(n) - F_trunc(n)|``
    because the path estimates already sum over all endpoints.
    """
    delta = _delta_for(law, p, delta_star)
    geo, corr, S, _, far = truncation_bounds(p, delta, n_max, r_hop)
    cat = path_catalog(p.d, n_max, r_hop, None, budget)
    I = moments_up_to(n_max, law, p)
    table = cat.by_endpoint(I, hop_values(p, cat.class_radii))
    return table, ExpansionResult(complex(table[(0,) * p.d]), geo + corr, n_max,
                                  float(r_hop), far, geo, corr, delta, S, len(cat.mult))


# --------------------------------------------------------------------------
# Monte Carlo oracle
# --------------------------------------------------------------------------

@dataclass
class MCResult:
    """Ensemble average of selected entries of the inverse principal matrix."""

    mean: np.ndarray
    stderr: np.ndarray
    samples: int
    singular: int
    offsets: np.ndarray
    base: tuple
    L: int
    edge_bound: np.ndarray | None = None

    def to_dict(self):
        return {"mean": [complex(x) for x in self.mean], "stderr": self.stderr.tolist(),
                "samples": self.samples, "singular": self.singular,
                "offsets": self.offsets.tolist(), "base": list(self.base), "L": self.L,
                "edge_bound": None if self.edge_bound is None else self.edge_bound.tolist()}


_WEIGHTED_R_CAP = {1: 100000, 2: 300, 3: 40}


def weighted_lattice_sum(p: SpectralPoint, eta: float, tol: float = 1e-12, R_cap=None):
    """Certified bound of ``sum_{n != 0} |G0(z; n)| exp(eta |n|)``, ``0 <= eta < Re kappa``.

    Returns ``inf`` when the shifted decay rate would need a radius beyond
    ``R_cap`` (dimension-dependent by default).
    """
    k_eff = p.kappa.real - eta
    if k_eff <= 0:
        return np.inf
    R_cap = _WEIGHTED_R_CAP[p.d] if R_cap is None else R_cap
    shifted = complex(k_eff, p.kappa.imag)
    R = 1
    while _tail(p.d, shifted, R) >= tol:
        R += 1
        if R > R_cap:
            return np.inf
    vecs = lattice_vectors(p.d, float(R))
    r = np.sqrt((vecs * vecs).sum(axis=1))
    ru, cnt = np.unique(r, return_counts=True)
    g = np.abs(np.atleast_1d(hop_kernel(p, ru)))
    with np.errstate(divide="ignore"):
        terms = np.exp(np.log(g) + eta * ru)
    return float(np.dot(cnt, terms)) + _tail(p.d, shifted, R)


def finite_volume_bound(p: SpectralPoint, delta: float, L: int, base, n) -> float:
    """Bound on ``|E Gamma_box^{-1}(a, a+n) - F(n)|`` for the box ``[-L, L]^d``.

    A path from ``a`` to ``a+n`` that leaves the box covers max-norm distance
    at least ``D = dist(a) + dist(a+n)`` to the outside; weighting each step
    by ``exp(eta |s|)`` gives ``exp(-eta D) / (delta (1 - S_eta / delta))``,
    minimized over a grid of ``eta``.
    """
    a = np.asarray(base)
    b = a + np.asarray(n)
    D = (L + 1 - np.abs(a).max()) + (L + 1 - np.abs(b).max())
    if D <= 0:
        return np.inf
    best = np.inf
    for eta in np.linspace(0.0, 0.98 * p.kappa.real, 50):
        S_eta = weighted_lattice_sum(p, eta)
        if S_eta < delta:
            best = min(best, np.exp(-eta * D) / (delta * (1.0 - S_eta / delta)))
    return float(best)


def mc_average(law: SingleSiteLaw, p: SpectralPoint, L: int, samples: int, seed: int,
               offsets=None, base=None, chunk: int = 512, allow_uncertified: bool = False,
               cond_max: float = 1e12) -> MCResult:
    """Monte Carlo average of ``Gamma^{-1}(base, base + n)`` over sampled boxes.

    Sample ``i`` draws its couplings from the counter-based stream keyed by
    ``(seed, i)``, so the result does not depend on chunking.

    Raises
    ------
    RegimeViolation
        If the energy is not certified and ``allow_uncertified`` is false.
    Singular
        If more than 0.1% of the samples are numerically singular.
    """
    d = p.d
    base = (0,) * d if base is None else tuple(int(x) for x in base)
    offsets = np.zeros((1, d), dtype=np.int64) if offsets is None else \
        np.asarray(offsets, dtype=np.int64).reshape(-1, d)
    delta = gap_at(law, p)
    if not allow_uncertified:
        S = lattice_sum_S(p).upper
        if not (delta > 0 and S / delta < 1.0):
            raise RegimeViolation("energy outside the certified small-hopping regime")
    sites = box_sites(d, L)
    N = len(sites)
    idx = lambda v: int(np.ravel_multi_index(tuple(np.asarray(v) + L), (2 * L + 1,) * d))
    rows = np.array([idx(base)] * len(offsets))
    cols = np.array([idx(np.asarray(base) + o) for o in offsets])
    diff = sites[:, None, :] - sites[None, :, :]
    r2 = (diff * diff).sum(-1)
    hop = np.zeros((N, N), dtype=complex)
    off = r2 > 0
    hop[off] = hop_kernel(p, np.sqrt(r2[off].astype(float)))
    rho = renorm_diag(p)
    # keep the batched inverse (plus temporaries) near 400 MB
    chunk = max(1, min(chunk, int(4e8 // (64 * N * N))))

    vals = np.empty((samples, len(offsets)), dtype=complex)
    good = np.ones(samples, dtype=bool)
    for start in range(0, samples, chunk):
        stop = min(samples, start + chunk)
        q = np.stack([law.sample(sample_rng(seed, i), N) for i in range(start, stop)])
        G = -np.broadcast_to(hop, (stop - start, N, N)).copy()
        G[:, np.arange(N), np.arange(N)] = 1.0 / q - rho
        try:
            inv = np.linalg.inv(G)
        except np.linalg.LinAlgError:
            inv = np.full_like(G, np.nan)
            for j in range(stop - start):
                try:
                    inv[j] = np.linalg.inv(G[j])
                except np.linalg.LinAlgError:
                    pass
        cond = np.abs(G).sum(axis=1).max(axis=1) * np.abs(inv).sum(axis=1).max(axis=1)
        bad = ~np.isfinite(cond) | (cond > cond_max)
        good[start:stop] = ~bad
        vals[start:stop] = inv[:, rows, cols]
    singular = int((~good).sum())
    if singular > 1e-3 * samples:
        raise Singular(f"{singular} of {samples} samples singular")
    v = vals[good]
    mean = v.mean(axis=0)
    m = len(v)
    stderr = np.sqrt(np.sum(np.abs(v - mean) ** 2, axis=0) / max(m - 1, 1) / m)
    edge = np.array([finite_volume_bound(p, delta, L, base, o) for o in offsets]) \
        if delta > 0 else None
    return MCResult(mean, stderr, m, singular, offsets, base, L, edge)
