import pytest

from cablefield.fixtures import grid3x3, p2k, random_graph


@pytest.fixture
def g_p2k():
    return p2k()


@pytest.fixture
def g_grid():
    return grid3x3()


@pytest.fixture(scope="session")
def random_graphs():
    # the seeded sweep used by the deterministic invariant tests
    return [random_graph(1000 + k) for k in range(50)]


def adjacency_dict(g):
    """Canonical labeled adjacency for isomorphism-on-labels checks."""
    out = {}
    for e in range(g.n_edges):
        u = g.label_of(int(g.edge_u[e]))
        v = g.label_of(int(g.edge_v[e]))
        out[frozenset((u, v))] = g.edge_w[e]
    kills = {g.label_of(i): float(k) for i, k in enumerate(g.kappa) if k > 0}
    return out, kills
