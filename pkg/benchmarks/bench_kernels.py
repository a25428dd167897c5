"""Timing comparison of the numba kernels against the numpy fallbacks.

Run as a script:  python benchmarks/bench_kernels.py
Set CABLEFIELD_NO_NUMBA=1 before launching to benchmark only the fallback.
"""

import time

import numpy as np

from cablefield import kernels
from cablefield.boxes import box_operator
from cablefield.graphs import build_lattice_box
from cablefield.rng import SampleStream, edge_uniforms, sample_key
from cablefield.sampling import sample_phi


def timeit(fn, reps=3):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_cluster_growth(side=32, n_samples=100):
    g = build_lattice_box(3, side, 1.0)
    center = g.box.vertex_at((side // 2,) * 3)
    fields = []
    for i in range(n_samples):
        stream = SampleStream(7, i)
        fields.append((sample_phi(g, stream), stream.key))
    variants = [("numba", kernels._cluster_members_nb)] if kernels.HAVE_NUMBA \
        else []
    variants.append(("numpy", kernels._cluster_members_py))
    out = {}
    for name, fn in variants:
        # warm the jit cache outside the timed region
        fn(g.indptr, g.adj, g.adj_eid, g.adj_w, fields[0][0], 0.0,
           fields[0][1], center)

        def run(fn=fn):
            for phi, key in fields:
                fn(g.indptr, g.adj, g.adj_eid, g.adj_w, phi, 0.0, key, center)

        out[name] = timeit(run) / n_samples
    return out


def bench_green_assembly(side=24, b=300):
    g = build_lattice_box(3, side, 1.0)
    op = box_operator(g)
    table = op._build_table()
    rng = np.random.default_rng(0)
    v = np.sort(rng.choice(g.n, size=b, replace=False))
    stride0 = side * side
    ax0 = (v // stride0).astype(np.int32)
    rest = (v % stride0).astype(np.int32)
    variants = [("numba", kernels._assemble_box_green_nb)] if \
        kernels.HAVE_NUMBA else []
    variants.append(("numpy", kernels._assemble_box_green_py))
    out = {}
    for name, fn in variants:
        fn(table, op.basis, ax0[:4], rest[:4])
        out[name] = timeit(lambda fn=fn: fn(table, op.basis, ax0, rest))
    return out


def bench_edge_uniforms(n=1_000_000):
    key = sample_key(1, 2)
    ids = np.arange(n, dtype=np.uint64)
    out = {"numpy": timeit(lambda: edge_uniforms(key, ids))}
    if kernels.HAVE_NUMBA:
        from numba import njit

        @njit(cache=True)
        def loop(key, ids):
            acc = 0.0
            for e in ids:
                acc += kernels._edge_u01(key, e)
            return acc

        loop(np.uint64(key), ids[:16])
        out["numba"] = timeit(lambda: loop(np.uint64(key), ids))
    return out


def main():
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':34s} {'numba':>12s} {'numpy':>12s} {'speedup':>8s}")
    rows = [
        ("cluster growth / sample (32^3 box)", bench_cluster_growth()),
        ("green submatrix assembly (b=300)", bench_green_assembly()),
        ("edge coins (1e6 hashes)", bench_edge_uniforms()),
    ]
    for label, res in rows:
        nb = res.get("numba")
        py = res.get("numpy")
        nb_s = f"{nb * 1e3:9.3f} ms" if nb else "          --"
        ratio = f"{py / nb:7.1f}x" if nb else "      --"
        print(f"{label:34s} {nb_s:>12s} {py * 1e3:9.3f} ms {ratio:>8s}")


if __name__ == "__main__":
    main()
