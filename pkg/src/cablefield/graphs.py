"""Finite weighted graphs with killing, and the transformations on them.

A graph holds symmetric positive edge conductances, a per-vertex killing
mass (conductance to a cemetery state), and the cached total weight
lam[x] = kappa[x] + sum of incident conductances.  Construction rejects
disconnected inputs and graphs with no killing anywhere (those are not
transient).  Instances are immutable; all arrays are frozen after
validation and adjacency is stored in sorted CSR form so iteration order
is reproducible.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class BoxInfo:
    """Marker for graphs built as lattice boxes (enables spectral paths)."""

    dim: int
    side: int
    weight: float

    @property
    def shape(self):
        return (self.side,) * self.dim

    @property
    def strides(self):
        return tuple(self.side ** (self.dim - 1 - a) for a in range(self.dim))

    def vertex_at(self, coords) -> int:
        return int(sum(c * s for c, s in zip(coords, self.strides)))

    def coords_of(self, v: int):
        out = []
        for s in self.strides:
            out.append(v // s)
            v = v % s
        return tuple(int(c) for c in out)


class WeightedGraph:
    def __init__(self, n, edge_u, edge_v, edge_w, kappa, labels=None,
                 box=None):
        edge_u = np.asarray(edge_u, dtype=np.int32)
        edge_v = np.asarray(edge_v, dtype=np.int32)
        edge_w = np.asarray(edge_w, dtype=np.float64)
        kappa = np.asarray(kappa, dtype=np.float64)

        if kappa.shape != (n,):
            raise GraphError(f"killing vector has shape {kappa.shape}, expected ({n},)")
        if np.any(kappa < 0):
            raise GraphError("negative killing mass")
        if edge_u.shape != edge_v.shape or edge_u.shape != edge_w.shape:
            raise GraphError("edge arrays must have matching shapes")
        if edge_u.size and (edge_u.min() < 0 or max(edge_u.max(), edge_v.max()) >= n):
            raise GraphError("edge endpoint out of range")
        if np.any(edge_u == edge_v):
            raise GraphError("self-loops are not allowed")
        if np.any(edge_w <= 0):
            raise GraphError("edge weights must be strictly positive")

        lo = np.minimum(edge_u, edge_v)
        hi = np.maximum(edge_u, edge_v)
        order = np.lexsort((hi, lo))
        if edge_u.size:
            dl, dh = lo[order], hi[order]
            if np.any((dl[1:] == dl[:-1]) & (dh[1:] == dh[:-1])):
                raise GraphError("duplicate edge")

        self.n = int(n)
        self.edge_u = lo[order]
        self.edge_v = hi[order]
        self.edge_w = edge_w[order]
        self.kappa = kappa
        self.labels = tuple(labels) if labels is not None else None
        self.box = box

        # sorted CSR over both edge directions
        deg = np.zeros(n, dtype=np.int64)
        np.add.at(deg, self.edge_u, 1)
        np.add.at(deg, self.edge_v, 1)
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(deg, out=self.indptr[1:])
        src = np.concatenate([self.edge_u, self.edge_v])
        dst = np.concatenate([self.edge_v, self.edge_u])
        eid = np.concatenate([np.arange(self.edge_u.size, dtype=np.int32)] * 2)
        w2 = np.concatenate([self.edge_w, self.edge_w])
        slot = np.lexsort((dst, src))
        self.adj = dst[slot].astype(np.int32)
        self.adj_w = w2[slot]
        self.adj_eid = eid[slot]

        self.lam = kappa.copy()
        np.add.at(self.lam, self.edge_u, self.edge_w)
        np.add.at(self.lam, self.edge_v, self.edge_w)

        self._validate_connected_transient()
        for arr in (self.edge_u, self.edge_v, self.edge_w, self.kappa,
                    self.indptr, self.adj, self.adj_w, self.adj_eid, self.lam):
            arr.flags.writeable = False
        self._cache = {}

    # -- structure ---------------------------------------------------------

    @property
    def n_edges(self) -> int:
        return self.edge_u.size

    def neighbors(self, v: int):
        s, e = self.indptr[v], self.indptr[v + 1]
        return self.adj[s:e], self.adj_w[s:e], self.adj_eid[s:e]

    def _validate_connected_transient(self):
        if self.n == 0:
            raise GraphError("empty graph")
        seen = self.component_of(0)
        if seen.size != self.n:
            raise GraphError("graph is disconnected")
        if not np.any(self.kappa > 0):
            raise GraphError("no killing anywhere: graph is not transient")

    def component_of(self, start: int, forbidden=None) -> np.ndarray:
        """Sorted vertex ids reachable from start, avoiding `forbidden`."""
        blocked = np.zeros(self.n, dtype=bool)
        if forbidden is not None:
            blocked[np.asarray(list(forbidden), dtype=np.int64)] = True
        if blocked[start]:
            raise GraphError("start vertex is excluded")
        seen = np.zeros(self.n, dtype=bool)
        seen[start] = True
        frontier = np.array([start], dtype=np.int64)
        while frontier.size:
            slots = _ranges(self.indptr[frontier], self.indptr[frontier + 1])
            nxt = self.adj[slots]
            nxt = np.unique(nxt[~seen[nxt] & ~blocked[nxt]])
            seen[nxt] = True
            frontier = nxt
        return np.flatnonzero(seen)

    def distances_from(self, start: int) -> np.ndarray:
        """Graph distance from start (-1 where unreachable)."""
        dist = np.full(self.n, -1, dtype=np.int32)
        dist[start] = 0
        frontier = np.array([start], dtype=np.int64)
        d = 0
        while frontier.size:
            d += 1
            slots = _ranges(self.indptr[frontier], self.indptr[frontier + 1])
            nxt = self.adj[slots]
            nxt = np.unique(nxt[dist[nxt] < 0])
            dist[nxt] = d
            frontier = nxt
        return dist

    def laplacian_dense(self) -> np.ndarray:
        L = np.zeros((self.n, self.n))
        L[self.edge_u, self.edge_v] = -self.edge_w
        L[self.edge_v, self.edge_u] = -self.edge_w
        L[np.diag_indices(self.n)] = self.lam
        return L

    def laplacian_sparse(self):
        from scipy import sparse

        i = np.concatenate([self.edge_u, self.edge_v, np.arange(self.n)])
        j = np.concatenate([self.edge_v, self.edge_u, np.arange(self.n)])
        d = np.concatenate([-self.edge_w, -self.edge_w, self.lam])
        return sparse.csc_matrix((d, (i, j)), shape=(self.n, self.n))

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.n).tobytes())
        for arr in (self.edge_u, self.edge_v, self.edge_w, self.kappa):
            h.update(arr.tobytes())
        return h.hexdigest()

    def label_of(self, v: int):
        return self.labels[v] if self.labels is not None else v

    def index_of(self, label) -> int:
        if self.labels is None:
            return int(label)
        return self.labels.index(label)

    def __repr__(self):
        return (f"WeightedGraph(n={self.n}, edges={self.n_edges}, "
                f"killing_mass={float(self.kappa.sum()):g})")


def _ranges(starts, ends):
    counts = ends - starts
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.repeat(np.cumsum(counts) - counts, counts)
    return np.repeat(starts, counts) + np.arange(total, dtype=np.int64) - offsets


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def build_lattice_box(dimension: int, side: int, weight: float = 1.0) -> WeightedGraph:
    """Box {0..side-1}^dimension with nearest-neighbor edges.

    Each vertex carries killing mass weight * (number of lattice neighbors
    outside the box), so the walk is the lattice walk killed on exiting the
    box and the Green function is the Dirichlet Green function of the box.
    """
    if dimension not in (2, 3, 4, 5):
        raise GraphError(f"dimension must be in 2..5, got {dimension}")
    if side < 2:
        raise GraphError(f"side must be >= 2, got {side}")
    if weight <= 0:
        raise GraphError("weight must be positive")

    box = BoxInfo(dimension, side, float(weight))
    n = side**dimension
    ids = np.arange(n, dtype=np.int64)
    coords = [(ids // st) % side for st in box.strides]

    eu, ev = [], []
    for axis, st in enumerate(box.strides):
        keep = coords[axis] < side - 1
        eu.append(ids[keep])
        ev.append(ids[keep] + st)
    eu = np.concatenate(eu)
    ev = np.concatenate(ev)
    ew = np.full(eu.size, float(weight))

    missing = np.zeros(n, dtype=np.int64)
    for c in coords:
        missing += (c == 0).astype(np.int64) + (c == side - 1).astype(np.int64)
    kappa = weight * missing.astype(np.float64)

    return WeightedGraph(n, eu, ev, ew, kappa, labels=None, box=box)


def build_from_edge_list(edges, killing) -> WeightedGraph:
    """Graph from (u, v, weight) triples and (u, kappa) killing entries.

    Vertex labels may be anything hashable; they are sorted to assign dense
    integer ids.  Rejects duplicate edges, nonpositive weights, disconnected
    graphs and graphs with no killing.
    """
    labels = set()
    for u, v, _ in edges:
        labels.add(u)
        labels.add(v)
    for u, _ in killing:
        labels.add(u)
    if not labels:
        raise GraphError("no vertices")
    try:
        labels = sorted(labels)
    except TypeError:
        labels = sorted(labels, key=repr)
    index = {lab: i for i, lab in enumerate(labels)}

    n = len(labels)
    eu = np.array([index[u] for u, _, _ in edges], dtype=np.int32)
    ev = np.array([index[v] for _, v, _ in edges], dtype=np.int32)
    ew = np.array([w for _, _, w in edges], dtype=np.float64)
    kappa = np.zeros(n)
    seen_kill = set()
    for u, k in killing:
        if u in seen_kill:
            raise GraphError(f"duplicate killing entry for vertex {u!r}")
        seen_kill.add(u)
        if k < 0:
            raise GraphError(f"negative killing at vertex {u!r}")
        kappa[index[u]] += k
    return WeightedGraph(n, eu, ev, ew, kappa, labels=labels)


# ---------------------------------------------------------------------------
# transformations
# ---------------------------------------------------------------------------

def refine(g: WeightedGraph, m: int):
    """Replace each edge of weight w by a path of m edges of weight m*w.

    The m-1 new interior vertices carry no killing, so the graph is
    network-equivalent to g between original vertices: their Green values
    are unchanged for every m.  Returns (refined graph, embedding) where
    embedding[original id] = refined id.
    """
    if m < 1:
        raise GraphError(f"refinement must be >= 1, got {m}")
    if m == 1:
        emb = np.arange(g.n, dtype=np.int64)
        return WeightedGraph(g.n, g.edge_u, g.edge_v, g.edge_w, g.kappa,
                             labels=g.labels), emb

    E = g.n_edges
    n_new = g.n + (m - 1) * E
    eu = np.empty(m * E, dtype=np.int64)
    ev = np.empty(m * E, dtype=np.int64)
    ew = np.repeat(g.edge_w * m, m)
    for e in range(E):
        chain = np.empty(m + 1, dtype=np.int64)
        chain[0] = g.edge_u[e]
        chain[-1] = g.edge_v[e]
        chain[1:-1] = g.n + e * (m - 1) + np.arange(m - 1)
        eu[e * m:(e + 1) * m] = chain[:-1]
        ev[e * m:(e + 1) * m] = chain[1:]
    kappa = np.zeros(n_new)
    kappa[:g.n] = g.kappa
    emb = np.arange(g.n, dtype=np.int64)
    return WeightedGraph(n_new, eu, ev, ew, kappa), emb


def expand_killing(g: WeightedGraph, m: int):
    """Discretize each killing cable as a chain of m series segments.

    A killing mass k is network-equivalent to a path of m edges of weight
    m*k whose far endpoint carries killing m*k (the cable toward the
    cemetery, cut into equal steps).  Green values at original vertices
    are unchanged, but the field now extends into the cables, so cluster
    capacities pick up the excursions that dominate the capacity tail.
    Returns (graph, embedding).
    """
    if m < 1:
        raise GraphError(f"expansion must be >= 1, got {m}")
    emb = np.arange(g.n, dtype=np.int64)
    if m == 1:
        return WeightedGraph(g.n, g.edge_u, g.edge_v, g.edge_w, g.kappa,
                             labels=g.labels), emb

    killed = np.flatnonzero(g.kappa > 0)
    eu = [g.edge_u.astype(np.int64)]
    ev = [g.edge_v.astype(np.int64)]
    ew = [g.edge_w]
    kappa = [np.zeros(g.n)]
    nxt = g.n
    for y in killed:
        k = g.kappa[y]
        chain = np.concatenate([[y], nxt + np.arange(m - 1)])
        eu.append(chain[:-1])
        ev.append(chain[1:])
        ew.append(np.full(m - 1, m * k))
        tail = np.zeros(m - 1)
        tail[-1] = m * k
        kappa.append(tail)
        nxt += m - 1
    return WeightedGraph(nxt, np.concatenate(eu), np.concatenate(ev),
                         np.concatenate(ew), np.concatenate(kappa)), emb


def discretize_cables(g: WeightedGraph, step: float, split_killing=True):
    """Subdivide every cable into segments of length at most `step`.

    The cable of an edge with conductance w has length 1/(2w), a killing
    cable length 1/(2k); each is split into equal segments (series
    conductances scale with the segment count), so the result is
    network-equivalent to g while resolving the field at comparable
    spatial resolution on every cable regardless of its weight.  With
    split_killing=False the killing masses stay on their vertices (their
    cables can be handled in closed form instead).  Returns
    (graph, embedding).
    """
    if step <= 0:
        raise GraphError("step must be positive")
    eu, ev, ew = [], [], []
    tails = []  # (vertex, killing mass) at chain ends
    nxt = g.n
    for e in range(g.n_edges):
        w = g.edge_w[e]
        m = max(1, int(np.ceil(1.0 / (2.0 * w) / step)))
        chain = np.concatenate([[g.edge_u[e]], nxt + np.arange(m - 1),
                                [g.edge_v[e]]])
        eu.append(chain[:-1])
        ev.append(chain[1:])
        ew.append(np.full(m, m * w))
        nxt += m - 1
    for y in np.flatnonzero(g.kappa > 0):
        k = g.kappa[y]
        m = max(1, int(np.ceil(1.0 / (2.0 * k) / step)))
        if m == 1 or not split_killing:
            tails.append((int(y), k))
            continue
        chain = np.concatenate([[y], nxt + np.arange(m - 1)])
        eu.append(chain[:-1])
        ev.append(chain[1:])
        ew.append(np.full(m - 1, m * k))
        tails.append((int(chain[-1]), m * k))
        nxt += m - 1
    kappa = np.zeros(nxt)
    for v, val in tails:
        kappa[v] += val
    emb = np.arange(g.n, dtype=np.int64)
    return WeightedGraph(nxt, np.concatenate(eu), np.concatenate(ev),
                         np.concatenate(ew), kappa), emb


def delete_set(g: WeightedGraph, vertices, base: int):
    """Component of `base` after deleting `vertices`, with killing added.

    Every retained vertex adjacent to the deleted set gains the conductance
    of its lost edges as extra killing, which is the walk on g killed on
    hitting the deleted set.  Returns (graph, embedding) with
    embedding[old id] = new id, -1 where removed.
    """
    removed = np.zeros(g.n, dtype=bool)
    idx = np.asarray(sorted(int(v) for v in vertices), dtype=np.int64)
    if idx.size:
        removed[idx] = True
    if removed[base]:
        raise GraphError("base vertex is inside the deleted set")
    if idx.size == 0:
        emb = np.arange(g.n, dtype=np.int64)
        return WeightedGraph(g.n, g.edge_u, g.edge_v, g.edge_w, g.kappa,
                             labels=g.labels), emb

    keep = g.component_of(base, forbidden=idx)
    emb = np.full(g.n, -1, dtype=np.int64)
    emb[keep] = np.arange(keep.size)

    extra = np.zeros(g.n)
    cut = removed[g.edge_u] ^ removed[g.edge_v]
    np.add.at(extra, np.where(removed[g.edge_v], g.edge_u, g.edge_v)[cut],
              g.edge_w[cut])

    emask = (emb[g.edge_u] >= 0) & (emb[g.edge_v] >= 0)
    labels = [g.label_of(int(v)) for v in keep] if g.labels is not None else None
    sub = WeightedGraph(keep.size, emb[g.edge_u[emask]], emb[g.edge_v[emask]],
                        g.edge_w[emask], (g.kappa + extra)[keep],
                        labels=labels)
    return sub, emb


def doob_transform(g: WeightedGraph, x: int, base=None):
    """Condition the walk on hitting x, then remove x.

    With h(y) = P_y(hit x), the new conductances are h(y)h(z)*w(y,z) and the
    only killing is h(y)*w(y,x) on the former neighbors of x: conditioning
    sends the original killing mass to h-value zero, and this is the unique
    choice with total weight h(y)^2 * lam(y).  If removing x disconnects the
    graph, the component of `base` is kept (base is then required).
    Returns (graph, embedding).
    """
    from .potential import hitting_vector

    x = int(x)
    if g.n <= 1:
        raise GraphError("transform would leave an empty graph")
    h = hitting_vector(g, [x]).values

    removed = np.array([x], dtype=np.int64)
    if base is None:
        others = np.setdiff1d(np.arange(g.n), removed)
        keep = g.component_of(int(others[0]), forbidden=removed)
        if keep.size != g.n - 1:
            raise GraphError("x is a cut vertex: pass base to select a component")
    else:
        keep = g.component_of(int(base), forbidden=removed)
    emb = np.full(g.n, -1, dtype=np.int64)
    emb[keep] = np.arange(keep.size)

    emask = (emb[g.edge_u] >= 0) & (emb[g.edge_v] >= 0)
    new_w = h[g.edge_u[emask]] * h[g.edge_v[emask]] * g.edge_w[emask]
    if np.any(new_w <= 0):
        raise GraphError("underflow in transformed weights")

    kappa_h = np.zeros(g.n)
    to_x = g.edge_u == x
    kappa_h[g.edge_v[to_x]] += h[g.edge_v[to_x]] * g.edge_w[to_x]
    from_x = g.edge_v == x
    kappa_h[g.edge_u[from_x]] += h[g.edge_u[from_x]] * g.edge_w[from_x]

    labels = [g.label_of(int(v)) for v in keep] if g.labels is not None else None
    sub = WeightedGraph(keep.size, emb[g.edge_u[emask]], emb[g.edge_v[emask]],
                        new_w, kappa_h[keep], labels=labels)
    return sub, emb
