"""Command line front end: verify / run / report.

verify runs the deterministic identity suite and exits nonzero when any
residual reaches 1e-9.  run executes one Monte Carlo experiment from a
flat key=value config with [section] headers, writing CSV + JSON + an
atomically-renamed manifest.  report renders result directories as text
tables and gnuplot-ready .dat files.  Exit codes: 0 pass, 1 assertion
failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .experiments import (ExperimentConfig, ExperimentError, EXPERIMENT_KINDS,
                          run_experiment)
from .fixtures import FIXTURES, random_graph
from .graphs import GraphError
from .potential import check_identities, doob_capacity_identity, PotentialError

log = logging.getLogger("cablefield")


class ConfigError(ValueError):
    pass


def _setup_logging():
    level = os.environ.get("CABLEFIELD_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO,
              "debug": logging.DEBUG}
    if level not in levels:
        raise ConfigError(f"CABLEFIELD_LOG must be one of {sorted(levels)}")
    logging.basicConfig(level=levels[level],
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _read_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}")
    except configparser.Error as err:
        raise ConfigError(f"malformed config {path}: {err}")
    return cp


def _parse_seed(text) -> int:
    if text is None:
        raise ConfigError("a --seed is required (64-bit unsigned decimal)")
    try:
        seed = int(text)
    except (TypeError, ValueError):
        raise ConfigError(f"seed must be a decimal integer, got {text!r}")
    if not 0 <= seed < 2**64:
        raise ConfigError(f"seed {seed} outside the 64-bit unsigned range")
    return seed


def _floats(text):
    return tuple(float(v) for v in text.split())


def _ints(text):
    return tuple(int(v) for v in text.split())


def _vertex(text):
    if text is None:
        return None
    try:
        return int(text)
    except ValueError:
        return text


def _experiment_config(cp, kind, seed, threads) -> ExperimentConfig:
    if not cp.has_section("graph"):
        raise ConfigError("config is missing the [graph] section")
    graph = dict(cp.items("graph"))
    exp = dict(cp.items("experiment")) if cp.has_section("experiment") else {}
    kind = kind or exp.get("kind")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"unknown experiment {kind!r}; choose from {EXPERIMENT_KINDS}")
    cfg = ExperimentConfig(
        kind=kind,
        graph=graph,
        n_samples=int(exp.get("samples", 1000)),
        seed=seed,
        threads=threads,
        chunk=int(exp.get("chunk", 1024)),
        level=float(exp.get("level", 0.0)),
        base=_vertex(exp.get("base", "center")),
        x=_vertex(exp.get("x")),
        pairs=int(exp.get("pairs", 10)),
        refinement=_ints(exp.get("refinement", "1")),
        t_grid=_floats(exp.get("t_grid", "")),
        doob_x=_vertex(exp.get("doob_x")),
        cap_t=float(exp.get("cap_t", 0.0)),
        bins=int(exp.get("bins", 12)),
        cap_hi_factor=float(exp.get("cap_hi_factor", 400.0)),
        r_list=_ints(exp.get("r_list", "")),
        s_grid=_floats(exp.get("s_grid", "")),
        fraction_a=float(exp.get("fraction_a", 0.2)),
        fraction_b=float(exp.get("fraction_b", 0.45)),
        radius=int(exp.get("radius", 0)),
        alpha=int(exp.get("alpha", 3)),
        direct_limit=int(exp.get("direct_limit", 1000)),
        subset_size=int(exp.get("subset_size", 800)),
    )
    if cfg.n_samples < 1:
        raise ConfigError("samples must be >= 1")
    return cfg


def _atomic_write(path, data: bytes):
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def identity_suite(g, rng) -> dict:
    """All identity residuals on one graph, for a deterministic rng."""
    from .potential import (equilibrium_measure, green, hitting_vector)

    base = 0
    x = int(rng.integers(1, g.n))
    rep = check_identities(g, base, x)
    res = dict(rep.residuals)

    gm = green(g, ())
    K = _connected_set(g, x, int(rng.integers(1, min(6, g.n))), avoid=base)
    u = hitting_vector(g, K).values
    em = equilibrium_measure(g, K, check=False)
    recon = gm.sub([base], em.support) @ em.weights
    res["hitting_reconstruction"] = abs(float(u[base]) - float(recon[0]))
    cap2 = float(np.linalg.solve(gm.sub(K, K), np.ones(len(K))).sum())
    res["capacity_crosscheck"] = abs(em.capacity - cap2)
    _, _, res["doob_capacity"] = doob_capacity_identity(g, base, K)
    return res


def cmd_verify(args) -> int:
    cp = _read_config(args.config)
    section = dict(cp.items("verify")) if cp.has_section("verify") else {}
    names = section.get("fixtures", "p2k").split()
    n_random = int(section.get("random", 0))
    tol = float(section.get("tolerance", 1e-9))

    graphs = []
    for name in names:
        if name.startswith("random:"):
            n_random += int(name.split(":", 1)[1])
        elif name in FIXTURES:
            graphs.append((name, FIXTURES[name]()))
        else:
            try:
                from .graphio import load_graph

                graphs.append((name, load_graph(name)))
            except GraphError as err:
                raise ConfigError(str(err))
    if n_random:
        seed = _parse_seed(args.seed)
        for k in range(n_random):
            graphs.append((f"random-{k}", random_graph(seed + k)))

    worst = {}
    reports = []
    for idx, (name, g) in enumerate(graphs):
        rng = np.random.default_rng(1000003 + idx)
        try:
            res = identity_suite(g, rng)
        except PotentialError as err:
            print(f"FAIL {name}: {err}")
            return 1
        for key, val in res.items():
            worst[key] = max(worst.get(key, 0.0), val)
        reports.append({"graph": name, "n": g.n, "residuals": res})

    print(f"{'identity':28s} max residual")
    ok = True
    for key in sorted(worst):
        val = worst[key]
        status = "ok" if val < tol else "FAIL"
        ok = ok and val < tol
        print(f"{key:28s} {val:.3e}  {status}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        payload = {"tolerance": tol, "worst_residuals": worst,
                   "reports": reports}
        _atomic_write(os.path.join(args.out, "verify.json"),
                      json.dumps(payload, sort_keys=True, indent=2).encode())
    return 0 if ok else 1


def _connected_set(g, start, size, avoid=None):
    """Connected vertex set grown from start, never touching `avoid`."""
    out = [int(start)]
    seen = {int(start), avoid} if avoid is not None else {int(start)}
    frontier = [int(start)]
    while frontier and len(out) < size:
        v = frontier.pop(0)
        for u in g.neighbors(v)[0]:
            u = int(u)
            if u not in seen and len(out) < size:
                seen.add(u)
                out.append(u)
                frontier.append(u)
    return sorted(out)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    seed = _parse_seed(args.seed)
    cp = _read_config(args.config)
    cfg = _experiment_config(cp, args.experiment, seed, args.threads)
    out_dir = args.out or "."
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as err:
        raise ConfigError(f"cannot create output directory: {err}")

    started = time.time()
    result = run_experiment(cfg)
    finished = time.time()

    base = os.path.join(out_dir, cfg.kind)
    csv_payloads = {}
    if result.artifacts:
        for tag, rows in result.artifacts.items():
            csv_payloads[f"{cfg.kind}.{tag}.csv"] = result.csv_bytes(rows)
    csv_payloads[f"{cfg.kind}.csv"] = result.csv_bytes()

    for name, payload in csv_payloads.items():
        _atomic_write(os.path.join(out_dir, name), payload)
    _atomic_write(base + ".json",
                  json.dumps(result.json_dict(), sort_keys=True,
                             indent=2).encode())

    payload_hash = hashlib.sha256()
    for name in sorted(csv_payloads):
        payload_hash.update(csv_payloads[name])
    with open(args.config, "rb") as fh:
        config_digest = hashlib.sha256(fh.read()).hexdigest()
    manifest = {
        "experiment": cfg.kind,
        "config_path": os.path.abspath(args.config),
        "config_file_sha256": config_digest,
        "config_hash": cfg.config_hash(),
        "seed": seed,
        "threads": cfg.threads,
        "started": started,
        "finished": finished,
        "artifacts": sorted(csv_payloads) + [f"{cfg.kind}.json"],
        "payload_sha256": payload_hash.hexdigest(),
        "version": __version__,
    }
    _atomic_write(os.path.join(out_dir, "manifest.json"),
                  json.dumps(manifest, sort_keys=True, indent=2).encode())

    for flag, value in result.summary.get("flags", {}).items():
        print(f"{cfg.kind}: {flag}: {'pass' if value else 'FAIL'}")
    return 0 if result.passed else 1


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def cmd_report(args) -> int:
    out_dir = args.out or "."
    manifest_path = os.path.join(out_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise ConfigError(f"missing manifest: {manifest_path}")
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"unreadable manifest: {err}")

    kind = manifest["experiment"]
    json_path = os.path.join(out_dir, f"{kind}.json")
    csv_path = os.path.join(out_dir, f"{kind}.csv")
    try:
        with open(json_path, "r", encoding="utf-8") as fh:
            summary = json.load(fh)
        with open(csv_path, "r", encoding="utf-8") as fh:
            lines = fh.read().strip().splitlines()
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"unreadable result: {err}")

    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    widths = [max(len(h), 12) for h in header]
    print(f"== {kind}  (seed {manifest['seed']}, "
          f"config {manifest['config_hash'][:12]}) ==")
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)))

    s = summary["summary"]
    if "slope" in s:
        print(f"fitted slope: {s['slope']:.4f} +- {s['stderr']:.4f} "
              f"(reference {s['target_slope']})")
    for flag, value in s.get("flags", {}).items():
        print(f"{flag}: {'pass' if value else 'FAIL'}")

    dat_path = os.path.join(out_dir, f"{kind}.dat")
    with open(dat_path, "w", encoding="utf-8") as fh:
        if kind in ("one-arm", "cap-tail"):
            fh.write("# log10_x log10_estimate estimate lo hi reference\n")
            for row in rows:
                x, est = float(row[0]), float(row[3])
                if x > 0 and est > 0:
                    fh.write(f"{float(np.log10(x))!r} {float(np.log10(est))!r} "
                             f"{row[3]} {row[4]} {row[5]} {row[6]}\n")
            fh.write(f"# reference slope {s.get('target_slope')}\n")
        elif kind == "annulus-joint":
            nu = 1.0
            fh.write("# s s^(-1/nu) estimate lo hi\n")
            for row in rows:
                x = float(row[0])
                if 0 < x < math.inf:
                    fh.write(f"{row[0]} {x ** (-1.0 / nu)!r} "
                             f"{row[3]} {row[4]} {row[5]}\n")
        else:
            fh.write("# x estimate lo hi reference\n")
            for row in rows:
                fh.write(f"{row[0]} {row[3]} {row[4]} {row[5]} {row[6]}\n")
    print(f"wrote {dat_path}")
    return 0


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cablefield",
        description="Level-set percolation experiments on weighted graphs")
    sub = parser.add_subparsers(dest="command")
    for name in ("verify", "run", "report"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        p.add_argument("--seed", default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", default=None)
        p.add_argument("--experiment", default=None)

    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage()
        return 2
    try:
        _setup_logging()
        if args.command == "verify":
            if not args.config:
                raise ConfigError("verify requires --config")
            return cmd_verify(args)
        if args.command == "run":
            if not args.config:
                raise ConfigError("run requires --config")
            return cmd_run(args)
        return cmd_report(args)
    except (ConfigError, GraphError, ExperimentError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
