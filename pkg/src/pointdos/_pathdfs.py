"""Compiled depth-first enumeration of lattice paths grouped by averaged weight.

A path from the origin contributes to the averaged kernel only through its
endpoint, its visit histogram ``h_r = #{sites visited r times}`` and the
number of steps in each distance class.  The search keeps an occupancy
array and updates both codes incrementally, so every node costs O(d).
"""
import numpy as np
from numba import njit, types
from numba.typed import Dict

KEY_T = types.UniTuple(types.int64, 4)


@njit(cache=True)
def catalog_dfs(steps, step_cls, n_cls, n_max, box, target, prune_r, split):
    """Enumerate all walks of length ``<= n_max`` from the origin.

    Parameters
    ----------
    steps : (S, d) int64
        Allowed step vectors, in lexicographic order.
    step_cls : (S,) int64
        Distance class of every step.
    n_cls : int
        Number of classes.
    n_max : int
    box : int
        Half side of the coordinate box holding every reachable site.
    target : (d,) int64 or empty
        Endpoint to keep, or an empty array to keep all endpoints.
    prune_r : int
        If positive, drop prefixes whose max-norm distance to ``target``
        exceeds ``prune_r`` times the remaining number of steps.
    split : int
        Histogram digits ``< split`` go to the first profile code.

    Returns
    -------
    out : typed dict
        ``(cell, profile_lo, profile_hi, edge_code) -> multiplicity``.
    nodes : int
        Number of visited search nodes.
    """
    d = steps.shape[1]
    side = 2 * box + 1
    n_steps = steps.shape[0]
    has_target = target.shape[0] == d
    occ = np.zeros(side ** d, np.int64)
    base_p = n_max + 2
    base_e = n_max + 1
    powp = np.ones(n_max + 2, np.int64)
    for i in range(1, n_max + 2):
        if i == split:
            powp[i] = 1
        else:
            powp[i] = powp[i - 1] * base_p
    powe = np.ones(n_cls, np.int64)
    for i in range(1, n_cls):
        powe[i] = powe[i - 1] * base_e
    out = Dict.empty(key_type=KEY_T, value_type=types.int64)

    pos = np.zeros((n_max + 1, d), np.int64)
    choice = np.zeros(n_max + 1, np.int64)
    cell = np.zeros(n_max + 1, np.int64)
    plo = np.zeros(n_max + 1, np.int64)
    phi = np.zeros(n_max + 1, np.int64)
    ecode = np.zeros(n_max + 1, np.int64)

    c0 = 0
    for k in range(d):
        c0 = c0 * side + box
    cell[0] = c0
    occ[c0] = 1
    plo[0] = 1
    at_target = True
    if has_target:
        for k in range(d):
            if target[k] != 0:
                at_target = False
    if at_target:
        out[(c0, plo[0], phi[0], 0)] = 1

    depth = 0
    nodes = 0
    choice[0] = -1
    while depth >= 0:
        choice[depth] += 1
        if depth == n_max or choice[depth] >= n_steps:
            if depth > 0:
                occ[cell[depth]] -= 1
            depth -= 1
            continue
        s = choice[depth]
        for k in range(d):
            pos[depth + 1, k] = pos[depth, k] + steps[s, k]
        if prune_r > 0 and has_target:
            dist = 0
            for k in range(d):
                dist = max(dist, abs(pos[depth + 1, k] - target[k]))
            if dist > prune_r * (n_max - depth - 1):
                continue
        c = 0
        for k in range(d):
            c = c * side + pos[depth + 1, k] + box
        r = occ[c]
        occ[c] = r + 1
        lo = plo[depth]
        hi = phi[depth]
        if r > 0:
            if r - 1 < split:
                lo -= powp[r - 1]
            else:
                hi -= powp[r - 1]
        if r < split:
            lo += powp[r]
        else:
            hi += powp[r]
        plo[depth + 1] = lo
        phi[depth + 1] = hi
        ecode[depth + 1] = ecode[depth] + powe[step_cls[s]]
        cell[depth + 1] = c
        depth += 1
        choice[depth] = -1
        nodes += 1
        keep = True
        if has_target:
            for k in range(d):
                if pos[depth, k] != target[k]:
                    keep = False
        if keep:
            key = (c, lo, hi, ecode[depth])
            out[key] = out.get(key, 0) + 1
    return out, nodes
