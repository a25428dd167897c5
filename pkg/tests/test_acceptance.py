"""Acceptance suite: every criterion at its stated size and tolerance.

Each experiment config below is run through the CLI once per thread count
in {1, 4, 8}; criteria assert on the thread=1 results and the
reproducibility criterion byte-compares the CSV payloads across thread
counts.  Run with `pytest tests/test_acceptance.py -v -s` to see the
per-criterion lines.  Total runtime is dominated by the three passes over
the box experiments (about an hour on one core).
"""

import json
import time

import numpy as np
import pytest

from cablefield import cli

SEED = "20240613"
THREADS = (1, 4, 8)

CONFIGS = {
    "two-point-p2k": """
[graph]
kind = p2k
[experiment]
kind = two-point
samples = 1000000
base = a
""",
    "two-point-box": """
[graph]
kind = lattice_box
dimension = 3
side = 24
[experiment]
kind = two-point
samples = 200000
pairs = 10
""",
    "green-gap-p2k": """
[graph]
kind = p2k
[experiment]
kind = green-gap
samples = 1000000
base = a
x = b
refinement = 1
t_grid = 0.5
""",
    "green-gap-grid": """
[graph]
kind = grid3x3
[experiment]
kind = green-gap
samples = 100000
base = 4
x = 0
refinement = 4 16 64
""",
    "cap-law": """
[graph]
kind = grid3x3
[experiment]
kind = cap-law
samples = 100000
base = 4
doob_x = 0
cap_t = 0
step = 0.05
bins = 10
cap_hi_factor = 40
""",
    "cap-tail": """
[graph]
kind = lattice_box
dimension = 3
side = 48
[experiment]
kind = cap-tail
samples = 10000
""",
    "one-arm": """
[graph]
kind = lattice_box
dimension = 3
side = 96
[experiment]
kind = one-arm
samples = 10000
r_list = 4 8 16 24
""",
    "annulus-joint": """
[graph]
kind = lattice_box
dimension = 3
side = 48
[experiment]
kind = annulus-joint
samples = 20000
radius = 12
fraction_a = 0.2
fraction_b = 0.45
s_grid = 0.25 0.5 1 2 4 8 16 32 64
""",
}

VERIFY_CONFIG = """
[verify]
fixtures = p2k
random = 50
"""


def _announce(criterion, ok, detail=""):
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line, flush=True)
    assert ok, line


KIND_OF = {
    "two-point-p2k": "two-point", "two-point-box": "two-point",
    "green-gap-p2k": "green-gap", "green-gap-grid": "green-gap",
    "cap-law": "cap-law", "cap-tail": "cap-tail", "one-arm": "one-arm",
    "annulus-joint": "annulus-joint",
}


@pytest.fixture(scope="session")
def runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    out = {}
    for name, text in CONFIGS.items():
        cfg = root / f"{name}.cfg"
        cfg.write_text(text)
        kind = KIND_OF[name]
        for threads in THREADS:
            dest = root / name / f"t{threads}"
            t0 = time.perf_counter()
            rc = cli.main(["run", "--config", str(cfg), "--seed", SEED,
                           "--threads", str(threads), "--out", str(dest)])
            wall = time.perf_counter() - t0
            if rc == 2:
                raise RuntimeError(
                    f"cmd_run errored for {name} at threads={threads}")
            summary = json.load(open(dest / f"{kind}.json"))
            csv_names = sorted(p.name for p in dest.glob("*.csv"))
            payload = b"".join(open(dest / c, "rb").read()
                               for c in csv_names)
            out[(name, threads)] = {
                "rc": rc, "dir": dest, "kind": kind, "summary": summary,
                "payload": payload, "wall": wall,
            }
    return out


def _rows(run):
    csv = open(run["dir"] / f"{run['kind']}.csv").read().strip().splitlines()
    head = csv[0].split(",")
    return [dict(zip(head, line.split(","))) for line in csv[1:]]


def test_criterion_1_identity_suite(tmp_path, capsys):
    cfg = tmp_path / "verify.cfg"
    cfg.write_text(VERIFY_CONFIG)
    t0 = time.perf_counter()
    rc = cli.main(["verify", "--config", str(cfg), "--seed", SEED,
                   "--out", str(tmp_path / "vout")])
    wall = time.perf_counter() - t0
    capsys.readouterr()
    report = json.load(open(tmp_path / "vout" / "verify.json"))
    worst = max(report["worst_residuals"].values())
    _announce("1 deterministic identities",
              rc == 0 and worst < 1e-9 and wall < 10,
              f"max residual {worst:.2e}, {wall:.1f}s")


def test_criterion_2_crossing_oracle():
    from cablefield.sampling import bridge_stay_positive_freq

    t0 = time.perf_counter()
    freq = bridge_stay_positive_freq(1.0, 1.0, 1.0, m=256, n_samples=100000,
                                     seed=int(SEED),
                                     continuity_correction=True)
    wall = time.perf_counter() - t0
    target = 1 - np.exp(-2.0)
    _announce("2 crossing-rule oracle",
              abs(freq - target) <= 0.01 and wall < 60,
              f"|{freq:.4f} - {target:.4f}| = {abs(freq-target):.4f}, "
              f"{wall:.0f}s")


def test_criterion_3_two_point(runs):
    p2k = runs[("two-point-p2k", 1)]
    box = runs[("two-point-box", 1)]
    z_p2k = max(abs(z) for z in p2k["summary"]["summary"]["z_scores"])
    z_box = box["summary"]["summary"]["max_abs_z"]
    wall = p2k["wall"] + box["wall"]
    _announce("3 two-point law",
              p2k["rc"] == 0 and box["rc"] == 0 and z_p2k <= 3 and
              z_box <= 3 and wall < 300,
              f"z(p2k)={z_p2k:.2f}, z(box)={z_box:.2f}, {wall:.0f}s")


def test_criterion_4_green_gap_cdf(runs):
    p2k = runs[("green-gap-p2k", 1)]
    grid = runs[("green-gap-grid", 1)]
    z_p2k = p2k["summary"]["summary"]["max_abs_z_by_m"]["1"]
    slacks = grid["summary"]["summary"]["slack_by_m"]
    ordered = [slacks[m] for m in ("4", "16", "64")]
    monotone = ordered[0] >= ordered[1] >= ordered[2]
    wall = p2k["wall"] + grid["wall"]
    _announce("4 generalized crossing CDF",
              p2k["rc"] == 0 and grid["rc"] == 0 and z_p2k <= 3 and
              slacks["16"] <= 0.01 and monotone and wall < 600,
              f"z(p2k)={z_p2k:.2f}, slack m4/16/64 = "
              f"{ordered[0]:.4f}/{ordered[1]:.4f}/{ordered[2]:.4f}, "
              f"{wall:.0f}s")


def test_criterion_5_capacity_law(runs):
    from cablefield.formulas import cap_density_mass
    from cablefield.fixtures import grid3x3
    from cablefield.potential import green, hitting_probability

    g = grid3x3()
    h0 = hitting_probability(g, [0], 4, verify=False)
    g0kx = green(g, [0]).entry(4, 4)
    mass = cap_density_mass(0.0, g0kx, h0)
    run = runs[("cap-law", 1)]
    s = run["summary"]["summary"]
    _announce("5 capacity-law density",
              abs(mass - 0.5) <= 1e-6 and run["rc"] == 0 and
              s["p_value"] > 0.01 and s["counts_below_support"] == 0 and
              run["wall"] < 300,
              f"quadrature mass {mass:.8f}, chi2 p={s['p_value']:.3f}, "
              f"below-edge {s['counts_below_support']}, {run['wall']:.0f}s")


def test_criterion_6_capacity_tail(runs):
    run = runs[("cap-tail", 1)]
    s = run["summary"]["summary"]
    _announce("6 capacity tail",
              run["rc"] == 0 and abs(s["slope"] + 0.5) <= 0.1 and
              abs(s["nonempty_z"]) <= 3 and run["wall"] < 900,
              f"slope {s['slope']:.3f}+-{s['stderr']:.3f}, "
              f"atom z={s['nonempty_z']:.2f}, {run['wall']:.0f}s")


def test_criterion_7_one_arm(runs):
    run = runs[("one-arm", 1)]
    s = run["summary"]["summary"]
    _announce("7 one-arm exponent",
              run["rc"] == 0 and abs(s["slope"] + 0.5) <= 0.15 and
              run["wall"] < 3600,
              f"slope {s['slope']:.3f}+-{s['stderr']:.3f}, "
              f"{run['wall']:.0f}s")


def test_criterion_8_annulus_joint(runs):
    run = runs[("annulus-joint", 1)]
    s = run["summary"]["summary"]
    flags = s["flags"]
    rows = _rows(run)
    s0 = next(r for r in rows if float(r["x"]) == 0.0)
    _announce("8 joint arm/annulus-capacity event",
              run["rc"] == 0 and flags["monotone_in_s"] and
              flags["dominated_by_arm"] and int(s0["count"]) == 0,
              f"arm={s['arm_count']}, joint={s['joint_counts']}")


def test_criterion_9_reproducibility(runs):
    mismatched = []
    for name in CONFIGS:
        payloads = {t: runs[(name, t)]["payload"] for t in THREADS}
        if len(set(payloads.values())) != 1:
            mismatched.append(name)
    _announce("9 byte-identical across threads {1,4,8}",
              not mismatched,
              f"checked {len(CONFIGS)} configs" +
              (f", mismatched: {mismatched}" if mismatched else ""))
