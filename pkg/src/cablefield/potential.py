"""Killed Green functions, hitting probabilities, equilibrium measures.

Everything here is deterministic linear algebra on the graph Laplacian
L (diagonal lam, off-diagonal -w).  The Green matrix killed on a set U is
the inverse of L restricted to the rows/columns off U; it is computed by a
dense Cholesky below DENSE_LIMIT free vertices and backed by a cached
sparse LU factorization above, with columns solved on demand.  Hitting
probabilities are cross-checked against their reconstruction from the
Green matrix and the equilibrium measure; capacities are cross-checked
against the row sums of the inverse Green submatrix.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse.linalg import splu

from .graphs import WeightedGraph

DENSE_LIMIT = 3000
_cache_lock = threading.Lock()


class PotentialError(ValueError):
    pass


class GreenMatrix:
    """Symmetric killed Green matrix g_U(x, y) over the vertices off U."""

    def __init__(self, graph: WeightedGraph, killing_set, idx, dense=None,
                 factor=None):
        self.graph = graph
        self.killing_set = frozenset(int(v) for v in killing_set)
        self.idx = np.asarray(idx, dtype=np.int64)
        self.pos = {int(v): i for i, v in enumerate(self.idx)}
        self._dense = dense
        self._factor = factor
        self._columns = {}

    @property
    def values(self) -> np.ndarray:
        if self._dense is None:
            raise PotentialError(
                f"{self.idx.size} free vertices: full matrix not materialized; "
                "use entry()/sub()")
        return self._dense

    def _column(self, j: int) -> np.ndarray:
        col = self._columns.get(j)
        if col is None:
            b = np.zeros(self.idx.size)
            b[j] = 1.0
            col = self._factor.solve(b)
            self._columns[j] = col
        return col

    def entry(self, x: int, y: int) -> float:
        if x in self.killing_set or y in self.killing_set:
            return 0.0
        i, j = self.pos[int(x)], self.pos[int(y)]
        if self._dense is not None:
            return float(self._dense[i, j])
        return float(self._column(j)[i])

    def diag(self, x: int) -> float:
        return self.entry(x, x)

    def sub(self, rows, cols) -> np.ndarray:
        """Block g_U[rows, cols] indexed by vertex ids."""
        r = np.array([self.pos[int(v)] for v in rows], dtype=np.int64)
        c = np.array([self.pos[int(v)] for v in cols], dtype=np.int64)
        if self._dense is not None:
            return self._dense[np.ix_(r, c)]
        out = np.empty((r.size, c.size))
        for k, j in enumerate(c):
            out[:, k] = self._column(int(j))[r]
        return out


def green(g: WeightedGraph, killing_set=()) -> GreenMatrix:
    """Green matrix of g killed on `killing_set` (may be empty)."""
    U = frozenset(int(v) for v in killing_set)
    with _cache_lock:
        hit = g._cache.get(("green", U))
    if hit is not None:
        return hit

    free = np.setdiff1d(np.arange(g.n), np.fromiter(U, dtype=np.int64,
                                                    count=len(U)))
    if free.size == 0:
        raise PotentialError("killing set covers every vertex")

    if free.size <= DENSE_LIMIT:
        L = g.laplacian_dense()[np.ix_(free, free)]
        try:
            c, low = cho_factor(L)
        except np.linalg.LinAlgError as err:
            raise PotentialError(f"singular killed Laplacian: {err}") from err
        dense = cho_solve((c, low), np.eye(free.size))
        dense = 0.5 * (dense + dense.T)
        gm = GreenMatrix(g, U, free, dense=dense)
    else:
        L = g.laplacian_sparse().tocsr()[free][:, free].tocsc()
        gm = GreenMatrix(g, U, free, factor=splu(L))

    with _cache_lock:
        g._cache[("green", U)] = gm
    return gm


@dataclass(frozen=True)
class HittingVector:
    """u(y) = P_y(hit K before dying), identically 1 on K."""

    target: frozenset
    values: np.ndarray


def hitting_vector(g: WeightedGraph, target) -> HittingVector:
    K = np.asarray(sorted(int(v) for v in target), dtype=np.int64)
    if K.size == 0:
        raise PotentialError("empty target set")
    in_K = np.zeros(g.n, dtype=bool)
    in_K[K] = True
    free = np.flatnonzero(~in_K)
    u = np.ones(g.n)
    if free.size:
        b = np.zeros(g.n)
        touch = in_K[g.edge_u] ^ in_K[g.edge_v]
        np.add.at(b, np.where(in_K[g.edge_v], g.edge_u, g.edge_v)[touch],
                  g.edge_w[touch])
        if free.size <= DENSE_LIMIT:
            L = g.laplacian_dense()[np.ix_(free, free)]
            u[free] = np.linalg.solve(L, b[free])
        else:
            L = g.laplacian_sparse().tocsr()[free][:, free].tocsc()
            u[free] = splu(L).solve(b[free])
    return HittingVector(frozenset(int(v) for v in K), u)


def hitting_probability(g: WeightedGraph, target, source: int,
                        verify=None) -> float:
    """P_source(hit target), with optional reconstruction cross-check.

    The direct Dirichlet solve is compared with the identity
    P_x(hit K) = sum_y g(x, y) e_K(y) when `verify` is true (default for
    graphs small enough to afford the full Green matrix).
    """
    u = hitting_vector(g, target)
    p = float(u.values[int(source)])
    if verify is None:
        verify = g.n <= 600
    if verify:
        em = equilibrium_measure(g, target, check=False)
        gm = green(g, ())
        p2 = float((gm.sub([source], em.support) @ em.weights)[0])
        if abs(p - p2) > 1e-9:
            raise PotentialError(
                f"hitting reconstruction mismatch: {p} vs {p2}")
    return p


def hitting_before(g: WeightedGraph, target, obstacle, source: int) -> float:
    """P_source(hit target before obstacle)."""
    A = frozenset(int(v) for v in target)
    K = frozenset(int(v) for v in obstacle)
    if not A:
        raise PotentialError("empty target set")
    if A & K:
        raise PotentialError("target and obstacle sets overlap")
    source = int(source)
    if source in A:
        return 1.0
    if source in K:
        return 0.0
    if not K:
        return hitting_probability(g, A, source, verify=False)
    blocked = np.zeros(g.n, dtype=bool)
    blocked[list(A | K)] = True
    in_A = np.zeros(g.n, dtype=bool)
    in_A[list(A)] = True
    free = np.flatnonzero(~blocked)
    b = np.zeros(g.n)
    fwd = in_A[g.edge_v] & ~blocked[g.edge_u]
    np.add.at(b, g.edge_u[fwd], g.edge_w[fwd])
    bwd = in_A[g.edge_u] & ~blocked[g.edge_v]
    np.add.at(b, g.edge_v[bwd], g.edge_w[bwd])
    if free.size <= DENSE_LIMIT:
        sol = np.linalg.solve(g.laplacian_dense()[np.ix_(free, free)], b[free])
    else:
        Ls = g.laplacian_sparse().tocsr()[free][:, free].tocsc()
        sol = splu(Ls).solve(b[free])
    full = np.zeros(g.n)
    full[free] = sol
    full[list(A)] = 1.0
    return float(full[source])


@dataclass(frozen=True)
class EquilibriumMeasure:
    """e_K(x) = lam(x) * P_x(no return to K), supported on K."""

    support: np.ndarray
    weights: np.ndarray
    capacity: float


def equilibrium_measure(g: WeightedGraph, target, check=None) -> EquilibriumMeasure:
    """Equilibrium measure and capacity of a vertex set.

    Uses the one-step decomposition e_K(x) = kappa_x + sum over neighbors
    y outside K of w(x,y) * (1 - u(y)) with u the hitting vector of K.
    When `check` is true the capacity is compared against the row sums of
    inv(g[K, K]).
    """
    K = np.asarray(sorted(int(v) for v in target), dtype=np.int64)
    if K.size == 0:
        raise PotentialError("empty target set")
    u = hitting_vector(g, K).values
    in_K = np.zeros(g.n, dtype=bool)
    in_K[K] = True
    e = np.zeros(g.n)
    e[K] = g.kappa[K]
    fwd = in_K[g.edge_u] & ~in_K[g.edge_v]
    np.add.at(e, g.edge_u[fwd], g.edge_w[fwd] * (1.0 - u[g.edge_v[fwd]]))
    bwd = in_K[g.edge_v] & ~in_K[g.edge_u]
    np.add.at(e, g.edge_v[bwd], g.edge_w[bwd] * (1.0 - u[g.edge_u[bwd]]))
    cap = float(e[K].sum())

    if check is None:
        check = g.n <= 600
    if check:
        gm = green(g, ())
        cap2 = float(np.linalg.solve(gm.sub(K, K), np.ones(K.size)).sum())
        if abs(cap - cap2) > 1e-9 * max(1.0, abs(cap)):
            raise PotentialError(
                f"capacity cross-check failed: {cap} vs {cap2}")
    return EquilibriumMeasure(K, e[K].copy(), cap)


def capacity_from_green(gm: GreenMatrix, vertices) -> float:
    """Capacity of a vertex set from the Green submatrix row sums."""
    K = np.asarray(sorted(int(v) for v in vertices), dtype=np.int64)
    return float(np.linalg.solve(gm.sub(K, K), np.ones(K.size)).sum())


@dataclass(frozen=True)
class IdentityReport:
    base: int
    x: int
    residuals: dict

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    def ok(self, tol: float = 1e-9) -> bool:
        return self.max_residual < tol

    def to_dict(self) -> dict:
        return {"base": self.base, "x": self.x,
                "residuals": dict(self.residuals),
                "max_residual": self.max_residual}


def check_identities(g: WeightedGraph, base: int, x: int) -> IdentityReport:
    """Residuals of the deterministic Green/hitting identities.

    Checks, for 0 = base:  g(0,x) = h(0) g(x,x) with h = P_.(hit x);
    g_{x}(0,0) = g(0,0) - h(0)^2 g(x,x); and the last-exit identity
    g(x,x) - g_{0}(x,x) = g(0,x)^2 / g(0,0).
    """
    base, x = int(base), int(x)
    if base == x:
        raise PotentialError("base and x must differ")
    gm = green(g, ())
    g00 = gm.entry(base, base)
    gxx = gm.entry(x, x)
    g0x = gm.entry(base, x)
    h0 = hitting_probability(g, [x], base, verify=False)
    g0_killed_x = green(g, [x]).entry(base, base)
    gx_killed_0 = green(g, [base]).entry(x, x)

    res = {
        "hitting_scaling": abs(g0x - h0 * gxx),
        "killed_diagonal": abs(g0_killed_x - (g00 - h0 * h0 * gxx)),
        "last_exit": abs(gxx - gx_killed_0 - g0x * g0x / g00),
    }
    return IdentityReport(base, x, res)


def _connected_in(g: WeightedGraph, vertices) -> bool:
    K = set(int(v) for v in vertices)
    start = next(iter(K))
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for u in g.neighbors(v)[0]:
            u = int(u)
            if u in K and u not in seen:
                seen.add(u)
                stack.append(u)
    return seen == K


def doob_capacity_identity(g: WeightedGraph, x: int, target):
    """Capacity of a set on the transform conditioned at x, against
    1/g_K(x,x) - 1/g(x,x).  Returns (lhs, rhs, residual)."""
    from .graphs import doob_transform

    x = int(x)
    K = sorted(int(v) for v in target)
    if x in K:
        raise PotentialError("x must lie outside the target set")
    if not _connected_in(g, K):
        raise PotentialError("target set must be connected")

    gt, emb = doob_transform(g, x, base=K[0])
    lhs = equilibrium_measure(gt, emb[K], check=False).capacity
    g_K_xx = green(g, K).entry(x, x)
    g_xx = green(g, ()).entry(x, x)
    rhs = 1.0 / g_K_xx - 1.0 / g_xx
    return lhs, rhs, abs(lhs - rhs)
