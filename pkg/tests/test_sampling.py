import numpy as np
import pytest

from cablefield.fixtures import p2k, random_graph
from cablefield.graphs import build_lattice_box, refine
from cablefield.potential import green
from cablefield.rng import SampleStream, normal_generator
from cablefield.sampling import (SamplerError, bridge_stay_positive_freq,
                                 cluster_boundary, cluster_direct, cluster_of,
                                 conditional_sample, crossing_probability,
                                 green_gap, read_sample_dump, sample_field,
                                 sample_phi, sample_phi_from,
                                 write_sample_dump)


def _batch_phi(g, n_samples, seed=0):
    z = normal_generator(seed, 0).standard_normal((n_samples, g.n))
    return np.array([sample_phi_from(g, zi) for zi in z])


@pytest.mark.parametrize("make", [p2k, lambda: random_graph(2024, n_max=12),
                                  lambda: build_lattice_box(2, 4, 1.0)])
def test_field_covariance_matches_green(make):
    g = make()
    n = 100_000
    phi = _batch_phi(g, n)
    G = green(g, ()).values
    emp = phi.T @ phi / n
    sigma = np.sqrt((np.outer(np.diag(G), np.diag(G)) + G**2) / n)
    assert np.max(np.abs(emp - G) / sigma) < 4.0
    assert np.max(np.abs(phi.mean(axis=0)) / np.sqrt(np.diag(G) / n)) < 4.0


def test_per_sample_streams_are_reproducible():
    g = p2k()
    a = sample_phi(g, SampleStream(9, 123))
    b = sample_phi(g, SampleStream(9, 123))
    c = sample_phi(g, SampleStream(9, 124))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_single_vertex_positive_probability():
    # P(phi >= 0) = 1/2 at any single vertex
    g = p2k()
    phi = _batch_phi(g, 50_000)
    frac = np.mean(phi[:, 0] >= 0)
    assert abs(frac - 0.5) < 3 * np.sqrt(0.25 / 50_000)


def test_open_edges_need_both_endpoints_above(g_p2k):
    for i in range(500):
        s = sample_field(g_p2k, 0.0, SampleStream(3, i))
        if s.open_edges[0]:
            assert s.phi[0] > 0 and s.phi[1] > 0


def test_cluster_empty_when_base_below_level(g_p2k):
    for i in range(50):
        s = sample_field(g_p2k, 0.0, SampleStream(4, i))
        cl = cluster_of(s, 0)
        if s.phi[0] < 0:
            assert cl.empty
        else:
            assert 0 in cl.vertices


def test_cluster_all_closed_is_singleton(g_grid):
    s = sample_field(g_grid, 0.0, SampleStream(5, 1))
    forced = type(s)(s.graph, s.level, np.abs(s.phi),
                     np.zeros_like(s.open_edges), s.rng_state)
    cl = cluster_of(forced, 4)
    assert list(cl.vertices) == [4]


def test_very_negative_level_connects_everything(g_grid):
    s = sample_field(g_grid, -50.0, SampleStream(6, 2))
    cl = cluster_of(s, 4)
    assert cl.vertices.size == g_grid.n


def test_crossing_probability_formula():
    assert abs(crossing_probability(1.0, 1.0, 1.0) - (1 - np.exp(-2)))\
        < 1e-15
    assert crossing_probability(1.0, -0.1, 1.0) == 0.0
    assert crossing_probability(1.0, 0.0, 1.0) == 0.0


def test_crossing_rule_against_refined_bridge_oracle():
    # fixed endpoints (1,1), unit weight: closed form 1 - e^{-2}
    target = 1 - np.exp(-2)
    freq = bridge_stay_positive_freq(1.0, 1.0, 1.0, m=64, n_samples=20_000,
                                     seed=77, continuity_correction=True)
    assert abs(freq - target) < 0.01
    # the raw vertex minimum overshoots by ~0.58 * step std and shrinks
    # like 1/sqrt(m)
    raw = [bridge_stay_positive_freq(1.0, 1.0, 1.0, m=m, n_samples=20_000,
                                     seed=78) for m in (16, 64, 256)]
    gaps = [f - target for f in raw]
    assert gaps[0] > gaps[1] > gaps[2] > 0


def test_monotone_coupling_nested_levels(g_grid):
    for i in range(300):
        stream = SampleStream(8, i)
        phi = sample_phi(g_grid, stream)
        prev = None
        for level in (0.8, 0.3, 0.0, -0.4):
            members = set(cluster_direct(g_grid, phi, level, stream, 4)
                          .tolist())
            if prev is not None:
                assert prev <= members
            prev = members


def test_two_point_smoke_vs_arcsin(g_grid):
    from cablefield.formulas import two_point

    G = green(g_grid, ()).values
    base, x = 4, 0
    ref = two_point(G[base, base], G[x, x], G[base, x])
    n = 20_000
    hits = 0
    for i in range(n):
        stream = SampleStream(12, i)
        phi = sample_phi(g_grid, stream)
        hits += x in cluster_direct(g_grid, phi, 0.0, stream, base)
    z = (hits / n - ref) / np.sqrt(ref * (1 - ref) / n)
    assert abs(z) < 3.5


def test_crossing_rule_vs_refined_sign_clusters(g_p2k):
    # connectivity from lazy coins against plain sign adjacency on the
    # 16-fold refined graph
    gr, emb = refine(g_p2k, 16)
    n = 20_000
    hits_rule = hits_ref = 0
    for i in range(n):
        stream = SampleStream(13, i)
        phi = sample_phi(g_p2k, stream)
        hits_rule += 1 in cluster_direct(g_p2k, phi, 0.0, stream, 0)
        stream_r = SampleStream(14, i)
        phi_r = sample_phi(gr, stream_r)
        if phi_r[emb[0]] >= 0:
            members = _sign_cluster(gr, phi_r, emb[0])
            hits_ref += emb[1] in members
    p1, p2 = hits_rule / n, hits_ref / n
    sigma = np.sqrt(p1 * (1 - p1) / n + p2 * (1 - p2) / n)
    # sign adjacency misses the dips between grid points: ~0.19/sqrt(m)
    # of extra connectivity at m=16
    assert p2 > p1 - 3 * sigma
    assert abs(p1 - p2) < 3 * sigma + 0.06


def _sign_cluster(g, phi, base):
    seen = {int(base)}
    stack = [int(base)]
    while stack:
        v = stack.pop()
        for u in g.neighbors(v)[0]:
            u = int(u)
            if u not in seen and phi[u] >= 0:
                seen.add(u)
                stack.append(u)
    return seen


def test_conditional_sample_p2k_mean():
    g = p2k()
    n = 20_000
    vals = np.array([conditional_sample(g, 1, 1.0, SampleStream(15, i))
                     .phi[0] for i in range(n)])
    # mean is h(a) = 1/2, fluctuation variance g_{b}(a,a) = 1/2
    assert abs(vals.mean() - 0.5) < 3 * np.sqrt(0.5 / n)
    assert abs(vals.var() - 0.5) < 0.02


def test_conditional_sample_pins_the_vertex(g_grid):
    s = conditional_sample(g_grid, 4, 1.7, SampleStream(16, 0))
    assert s.phi[4] == pytest.approx(1.7)


def test_conditional_sample_recovers_unconditional_law(g_grid):
    g = g_grid
    G = green(g, ()).values
    x = 4
    n = 60_000
    gen = normal_generator(21, 0)
    vals = gen.standard_normal(n) * np.sqrt(G[x, x])
    phi = np.array([conditional_sample(g, x, vals[i],
                                       SampleStream(22, i)).phi
                    for i in range(n)])
    emp = phi.T @ phi / n
    sigma = np.sqrt((np.outer(np.diag(G), np.diag(G)) + G**2) / n)
    assert np.max(np.abs(emp - G) / sigma) < 4.5


def test_green_gap_conventions(g_p2k):
    empty = None
    full = None
    for i in range(200):
        s = sample_field(g_p2k, 0.0, SampleStream(23, i))
        cl = cluster_of(s, 0)
        if cl.empty and empty is None:
            empty = cl
        if (not cl.empty) and 1 in cl.vertices and full is None:
            full = cl
        if empty is not None and full is not None:
            break
    assert green_gap(empty, 1) == 0.0
    g0kx = green(g_p2k, [0]).entry(1, 1)
    assert abs(green_gap(full, 1) - g0kx) < 1e-9


def test_green_gap_level_restriction(g_p2k):
    s = sample_field(g_p2k, 0.5, SampleStream(24, 0))
    cl = cluster_of(s, 0)
    with pytest.raises(SamplerError):
        green_gap(cl, 1)


def test_green_gap_survival_p2k_refined():
    # survival at the boundary threshold equals the two-point value 1/6
    g = p2k()
    gr, emb = refine(g, 16)
    n = 8000
    t = green(g, [0]).entry(1, 1)  # = 1/2
    hits = 0
    for i in range(n):
        stream = SampleStream(25, i)
        phi = sample_phi(gr, stream)
        members = cluster_direct(gr, phi, 0.0, stream, int(emb[0]))
        if members.size == 0:
            continue
        from cablefield.sampling import ClusterAtLevel

        cl = ClusterAtLevel(gr, int(emb[0]), 0.0, members,
                            np.empty(0, np.int64))
        if green_gap(cl, int(emb[1])) >= t - 1e-9:
            hits += 1
    ref = 1 / 6
    assert abs(hits / n - ref) < 3 * np.sqrt(ref * (1 - ref) / n) + 0.01


def test_cluster_boundary_inside_box():
    g = build_lattice_box(3, 5, 1.0)
    members = np.array([g.box.vertex_at((2, 2, 2)),
                        g.box.vertex_at((2, 2, 3))])
    assert np.array_equal(cluster_boundary(g, members), members)


def test_sample_dump_roundtrip(tmp_path, g_p2k):
    path = tmp_path / "phi.bin"
    write_sample_dump(path, g_p2k, 0.0, 10, seed=31)
    header, phi = read_sample_dump(path)
    assert header["graph_hash"] == g_p2k.content_hash()
    assert header["n_samples"] == 10
    for i in range(10):
        assert np.array_equal(phi[i], sample_phi(g_p2k, SampleStream(31, i)))


def test_sample_dump_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOPE" + b"\0" * 64)
    with pytest.raises(SamplerError):
        read_sample_dump(path)
