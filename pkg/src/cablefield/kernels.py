"""Hot inner loops: lazy-coin cluster growth and box Green assembly.

Two interchangeable backends:

  * numba @njit kernels (default when numba imports cleanly), and
  * pure numpy/python fallbacks, selected by CABLEFIELD_NO_NUMBA=1.

Both flip identical edge coins (same splitmix64 arithmetic as rng.py), so
cluster output is backend-independent.  kernels.BACKEND reports which one
is active; the fallbacks stay importable under their _py names for tests
and for benchmarks/bench_kernels.py.
"""

from __future__ import annotations

import math
import os
from collections import deque

import numpy as np

from .rng import edge_uniforms

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_want_numba = os.environ.get("CABLEFIELD_NO_NUMBA", "0") not in ("1", "true", "yes")
if _want_numba:
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:
        HAVE_NUMBA = False
else:
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# pure numpy/python fallbacks
# ---------------------------------------------------------------------------

def _concat_ranges(starts, counts):
    """Concatenate [s, s+c) index ranges into one flat array."""
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    ends = np.cumsum(counts)
    offsets = np.repeat(ends - counts, counts)
    return np.repeat(starts, counts) + (np.arange(total, dtype=np.int64) - offsets)


def _open_mask(weights, pu, pv, coins):
    # coin < 1 - exp(-2*w*(phi_u - a)*(phi_v - a)), both excesses positive
    return coins < -np.expm1(-2.0 * weights * pu * pv)


def _cluster_members_py(indptr, indices, eids, weights, phi, level, key, start):
    if phi[start] < level:
        return np.empty(0, dtype=np.int32)
    n = indptr.shape[0] - 1
    visited = np.zeros(n, dtype=bool)
    visited[start] = True
    members = [np.array([start], dtype=np.int32)]
    frontier = np.array([start], dtype=np.int64)
    while frontier.size:
        s = indptr[frontier]
        c = indptr[frontier + 1] - s
        slots = _concat_ranges(s, c)
        nbrs = indices[slots].astype(np.int64)
        keep = (phi[nbrs] > level) & ~visited[nbrs]
        if np.any(keep):
            slots = slots[keep]
            nbrs = nbrs[keep]
            pu = np.repeat(phi[frontier] - level, c)[keep]
            pv = phi[nbrs] - level
            coins = edge_uniforms(key, eids[slots])
            opened = nbrs[_open_mask(weights[slots], pu, pv, coins)]
            frontier = np.unique(opened)
            visited[frontier] = True
            if frontier.size:
                members.append(frontier.astype(np.int32))
        else:
            frontier = np.empty(0, dtype=np.int64)
    return np.concatenate(members)


def _cluster_reach_py(indptr, indices, eids, weights, phi, level, key, start,
                      dist, stop):
    members = _cluster_members_py(indptr, indices, eids, weights, phi, level,
                                  key, start)
    if members.size == 0:
        return -1
    reach = int(dist[members].max())
    return min(reach, int(stop)) if stop >= 0 else reach


def _cluster_from_open_py(indptr, indices, eids, open_mask, phi, level, start):
    if phi[start] < level:
        return np.empty(0, dtype=np.int32)
    n = indptr.shape[0] - 1
    visited = np.zeros(n, dtype=bool)
    visited[start] = True
    out = [int(start)]
    q = deque([int(start)])
    while q:
        v = q.popleft()
        for slot in range(indptr[v], indptr[v + 1]):
            u = int(indices[slot])
            if not visited[u] and open_mask[eids[slot]]:
                visited[u] = True
                out.append(u)
                q.append(u)
    return np.array(out, dtype=np.int32)


def _assemble_box_green_py(table, basis, ax0, rest):
    b = ax0.shape[0]
    out = np.empty((b, b), dtype=np.float64)
    step = max(1, (1 << 22) // max(1, b * table.shape[2]))
    bas = basis[ax0]
    for i0 in range(0, b, step):
        i1 = min(b, i0 + step)
        block = table[np.ix_(rest[i0:i1], rest)].astype(np.float64)
        out[i0:i1] = np.einsum("pm,qm,pqm->pq", bas[i0:i1], bas, block,
                               optimize=True)
    return out


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True, inline="always")
    def _edge_u01(key, eid):
        z = (np.uint64(eid) + np.uint64(1)) * np.uint64(_GAMMA)
        z += np.uint64(key)
        z ^= z >> np.uint64(30)
        z *= np.uint64(_MIX1)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_MIX2)
        z ^= z >> np.uint64(31)
        return np.float64(z >> np.uint64(11)) * (2.0 ** -53)

    @njit(cache=True)
    def _cluster_members_nb(indptr, indices, eids, weights, phi, level, key,
                            start):
        n = indptr.shape[0] - 1
        if phi[start] < level:
            return np.empty(0, dtype=np.int32)
        visited = np.zeros(n, dtype=np.uint8)
        queue = np.empty(n, dtype=np.int32)
        queue[0] = start
        visited[start] = 1
        head, tail = 0, 1
        while head < tail:
            v = queue[head]
            head += 1
            pu = phi[v] - level
            for slot in range(indptr[v], indptr[v + 1]):
                u = indices[slot]
                if visited[u]:
                    continue
                pv = phi[u] - level
                if pv <= 0.0:
                    continue
                coin = _edge_u01(key, eids[slot])
                if coin < -math.expm1(-2.0 * weights[slot] * pu * pv):
                    visited[u] = 1
                    queue[tail] = u
                    tail += 1
        return queue[:tail].copy()

    @njit(cache=True)
    def _cluster_reach_nb(indptr, indices, eids, weights, phi, level, key,
                          start, dist, stop):
        n = indptr.shape[0] - 1
        if phi[start] < level:
            return -1
        reach = np.int64(dist[start])
        if stop >= 0 and reach >= stop:
            return int(stop)
        visited = np.zeros(n, dtype=np.uint8)
        queue = np.empty(n, dtype=np.int32)
        queue[0] = start
        visited[start] = 1
        head, tail = 0, 1
        while head < tail:
            v = queue[head]
            head += 1
            pu = phi[v] - level
            for slot in range(indptr[v], indptr[v + 1]):
                u = indices[slot]
                if visited[u]:
                    continue
                pv = phi[u] - level
                if pv <= 0.0:
                    continue
                coin = _edge_u01(key, eids[slot])
                if coin < -math.expm1(-2.0 * weights[slot] * pu * pv):
                    visited[u] = 1
                    if dist[u] > reach:
                        reach = np.int64(dist[u])
                        if stop >= 0 and reach >= stop:
                            return int(stop)
                    queue[tail] = u
                    tail += 1
        return int(reach)

    @njit(cache=True)
    def _cluster_from_open_nb(indptr, indices, eids, open_mask, phi, level,
                              start):
        n = indptr.shape[0] - 1
        if phi[start] < level:
            return np.empty(0, dtype=np.int32)
        visited = np.zeros(n, dtype=np.uint8)
        queue = np.empty(n, dtype=np.int32)
        queue[0] = start
        visited[start] = 1
        head, tail = 0, 1
        while head < tail:
            v = queue[head]
            head += 1
            for slot in range(indptr[v], indptr[v + 1]):
                u = indices[slot]
                if not visited[u] and open_mask[eids[slot]]:
                    visited[u] = 1
                    queue[tail] = u
                    tail += 1
        return queue[:tail].copy()

    @njit(cache=True)
    def _assemble_box_green_nb(table, basis, ax0, rest):
        b = ax0.shape[0]
        nm = table.shape[2]
        out = np.empty((b, b), dtype=np.float64)
        for p in range(b):
            bp = basis[ax0[p]]
            rp = rest[p]
            for q in range(p, b):
                bq = basis[ax0[q]]
                row = table[rp, rest[q]]
                acc = 0.0
                for m in range(nm):
                    acc += bp[m] * bq[m] * np.float64(row[m])
                out[p, q] = acc
                out[q, p] = acc
        return out


# ---------------------------------------------------------------------------
# public bindings (members are returned sorted so that downstream float
# reductions do not depend on traversal order or backend)
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    _members_impl = _cluster_members_nb
    _from_open_impl = _cluster_from_open_nb
    cluster_reach = _cluster_reach_nb
    assemble_box_green = _assemble_box_green_nb
else:
    _members_impl = _cluster_members_py
    _from_open_impl = _cluster_from_open_py
    cluster_reach = _cluster_reach_py
    assemble_box_green = _assemble_box_green_py


def cluster_members(indptr, indices, eids, weights, phi, level, key, start):
    """Sorted vertex ids of the open-edge cluster of `start` at `level`."""
    return np.sort(_members_impl(indptr, indices, eids, weights, phi, level,
                                 key, start))


def cluster_from_open(indptr, indices, eids, open_mask, phi, level, start):
    """Sorted cluster of `start` over a materialized open-edge mask."""
    return np.sort(_from_open_impl(indptr, indices, eids, open_mask, phi,
                                   level, start))
