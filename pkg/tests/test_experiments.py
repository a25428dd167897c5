import numpy as np
import pytest

from cablefield.experiments import (ExperimentConfig, ExperimentError,
                                    build_graph, resolve_vertex,
                                    run_experiment)


def small_cfg(**kw):
    base = dict(kind="two-point", graph={"kind": "p2k"}, n_samples=2000,
                seed=101, base="a")
    base.update(kw)
    return ExperimentConfig(**base)


def test_unknown_graph_kind():
    with pytest.raises(ExperimentError):
        build_graph({"kind": "torus"})


def test_resolve_vertex_center_needs_box(g_p2k):
    with pytest.raises(ExperimentError):
        resolve_vertex(g_p2k, "center")


def test_two_point_rows_schema():
    r = run_experiment(small_cfg())
    assert r.rows[0]["n"] == 2000
    for row in r.rows:
        assert row["lo"] <= row["estimate"] <= row["hi"]
    total = r.csv_bytes().decode().strip().splitlines()
    assert total[0] == "x,count,n,estimate,lo,hi,reference"
    assert len(total) == len(r.rows) + 1


def test_two_point_requires_level_zero():
    with pytest.raises(ExperimentError):
        run_experiment(small_cfg(level=0.3))


def test_rerun_is_bit_identical():
    a = run_experiment(small_cfg())
    b = run_experiment(small_cfg())
    assert a.csv_bytes() == b.csv_bytes()
    assert a.config_hash == b.config_hash


def test_threads_do_not_change_output():
    a = run_experiment(small_cfg(n_samples=5000, threads=1, chunk=256))
    b = run_experiment(small_cfg(n_samples=5000, threads=4, chunk=256))
    c = run_experiment(small_cfg(n_samples=5000, threads=8, chunk=1024))
    assert a.csv_bytes() == b.csv_bytes() == c.csv_bytes()


def test_chunk_must_align():
    with pytest.raises(ExperimentError):
        run_experiment(small_cfg(chunk=100))


def test_green_gap_threshold_validation(g_p2k):
    cfg = ExperimentConfig(kind="green-gap", graph={"kind": "p2k"},
                           n_samples=256, seed=1, base="a", x="b",
                           t_grid=(0.9,))
    with pytest.raises(ExperimentError, match="outside"):
        run_experiment(cfg)


def test_green_gap_p2k_boundary_point():
    cfg = ExperimentConfig(kind="green-gap", graph={"kind": "p2k"},
                           n_samples=20000, seed=3, base="a", x="b",
                           refinement=(1,), t_grid=(0.5,))
    r = run_experiment(cfg)
    assert abs(r.rows[0]["estimate"] - 1 / 6) < 0.01
    assert r.summary["flags"]["finest_within_slack"]


def test_cap_law_qualitative_in_t():
    # the finite-capacity mass decays with the level depth t (clusters go
    # unbounded instead), tracking the Gaussian factor of the density
    finite = []
    for t in (0.0, 1.0):
        cfg = ExperimentConfig(kind="cap-law", graph={"kind": "grid3x3"},
                               n_samples=4000, seed=7, base=4, doob_x=0,
                               step=0.1, cap_t=t, bins=6, cap_hi_factor=20.0)
        r = run_experiment(cfg)
        finite.append(r.summary["finite_count"])
        assert r.summary["flags"]["no_mass_below_support"]
        assert r.summary["flags"]["empty_within_3_sigma"]
        n = cfg.n_samples
        p_inf = r.summary["p_infinite"]
        sigma = max(np.sqrt(p_inf * (1 - p_inf) / n), 1e-9)
        if t > 0:
            assert abs(r.summary["infinite_count"] / n - p_inf) < 4 * sigma
    assert finite[1] < finite[0]


def test_cap_tail_window_guard():
    cfg = ExperimentConfig(kind="cap-tail",
                           graph={"kind": "lattice_box", "dimension": 3,
                                  "side": 10},
                           n_samples=300, seed=2)
    with pytest.raises(ExperimentError, match="100 samples"):
        run_experiment(cfg)


def test_cap_tail_small_box():
    cfg = ExperimentConfig(kind="cap-tail",
                           graph={"kind": "lattice_box", "dimension": 3,
                                  "side": 12},
                           n_samples=4000, seed=2)
    r = run_experiment(cfg)
    assert r.summary["flags"]["survival_monotone"]
    assert r.summary["flags"]["atom_half_within_3_sigma"]
    assert abs(r.summary["slope"] + 0.5) < 0.25  # tiny box, loose check


def test_one_arm_radius_guard():
    cfg = ExperimentConfig(kind="one-arm",
                           graph={"kind": "lattice_box", "dimension": 3,
                                  "side": 16},
                           n_samples=256, seed=2, r_list=(2, 8))
    with pytest.raises(ExperimentError, match="side/4"):
        run_experiment(cfg)


def test_one_arm_small_box():
    cfg = ExperimentConfig(kind="one-arm",
                           graph={"kind": "lattice_box", "dimension": 3,
                                  "side": 24},
                           n_samples=4000, seed=2, r_list=(2, 4, 6))
    r = run_experiment(cfg)
    assert r.summary["flags"]["psi_monotone"]
    assert r.summary["flags"]["atom_half_within_3_sigma"]
    counts = r.summary["counts"]
    assert counts[0] >= counts[1] >= counts[2]


def test_annulus_joint_assertions():
    cfg = ExperimentConfig(kind="annulus-joint",
                           graph={"kind": "lattice_box", "dimension": 3,
                                  "side": 20},
                           n_samples=2000, seed=2, radius=5,
                           fraction_a=0.2, fraction_b=0.45,
                           s_grid=(0.5, 1, 2, 4, 8, 16, 32))
    r = run_experiment(cfg)
    flags = r.summary["flags"]
    assert flags["monotone_in_s"] and flags["dominated_by_arm"]
    assert flags["zero_at_s0"]
    assert r.rows[1]["x"] == 0.0 and r.rows[1]["count"] == 0
    # s -> infinity recovers the arm marginal
    assert r.summary["joint_counts"][-1] <= r.summary["arm_count"]


def test_annulus_too_thin_rejected():
    cfg = ExperimentConfig(kind="annulus-joint",
                           graph={"kind": "lattice_box", "dimension": 3,
                                  "side": 20},
                           n_samples=256, seed=2, radius=3,
                           fraction_a=0.2, fraction_b=0.45, s_grid=(1.0,))
    with pytest.raises(ExperimentError, match="thinner"):
        run_experiment(cfg)
