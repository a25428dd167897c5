"""Standard test graphs.

p2k is the two-vertex hand-checked fixture used throughout the test suite:
unit edge a-b with unit killing at both ends, so g = [[2/3,1/3],[1/3,2/3]]
and every identity has a pencil-and-paper value.  grid3x3 is a 3x3 unit
grid with unit killing on the corners.  random_graph draws connected
graphs with n <= 40, weights in [0.5, 2] and at least one killing mass.
"""

from __future__ import annotations

import numpy as np

from .graphs import WeightedGraph, build_from_edge_list


def p2k() -> WeightedGraph:
    return build_from_edge_list([("a", "b", 1.0)], [("a", 1.0), ("b", 1.0)])


def grid3x3() -> WeightedGraph:
    edges = []
    for r in range(3):
        for c in range(3):
            if c < 2:
                edges.append(((r, c), (r, c + 1), 1.0))
            if r < 2:
                edges.append(((r, c), (r + 1, c), 1.0))
    killing = [((r, c), 1.0) for r in (0, 2) for c in (0, 2)]
    return build_from_edge_list(edges, killing)


def random_graph(seed: int, n_max: int = 40) -> WeightedGraph:
    """Seeded random connected weighted graph with killing somewhere."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, n_max + 1))
    edges = {}
    order = rng.permutation(n)
    for i in range(1, n):  # random spanning tree keeps it connected
        u = int(order[i])
        v = int(order[rng.integers(0, i)])
        edges[(min(u, v), max(u, v))] = float(rng.uniform(0.5, 2.0))
    extra = int(rng.integers(0, 2 * n))
    for _ in range(extra):
        u, v = rng.integers(0, n, size=2)
        if u == v:
            continue
        key = (int(min(u, v)), int(max(u, v)))
        if key not in edges:
            edges[key] = float(rng.uniform(0.5, 2.0))
    kappa = np.where(rng.random(n) < 0.3, rng.uniform(0.0, 1.0, n), 0.0)
    kappa[int(rng.integers(0, n))] = float(rng.uniform(0.1, 1.0))
    killing = [(i, float(k)) for i, k in enumerate(kappa) if k > 0]
    return build_from_edge_list([(u, v, w) for (u, v), w in edges.items()],
                                killing)


FIXTURES = {"p2k": p2k, "grid3x3": grid3x3}
