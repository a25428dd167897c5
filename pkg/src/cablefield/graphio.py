"""Plain-text graph files.

Format: a header line "vertices N", then one "edge u v weight" line per
edge and one "kill u kappa" line per vertex with killing mass, whitespace
separated with decimal reals.  The loader reports malformed lines with
their line number.
"""

from __future__ import annotations

import numpy as np

from .graphs import GraphError, WeightedGraph


class GraphFileError(GraphError):
    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


def load_graph(path) -> WeightedGraph:
    eu, ev, ew = [], [], []
    kappa = None
    n = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            tag = fields[0]
            if tag == "vertices":
                if n is not None:
                    raise GraphFileError(path, lineno, "duplicate header")
                if len(fields) != 2:
                    raise GraphFileError(path, lineno, "expected 'vertices N'")
                try:
                    n = int(fields[1])
                except ValueError:
                    raise GraphFileError(path, lineno,
                                         f"bad vertex count {fields[1]!r}")
                if n <= 0:
                    raise GraphFileError(path, lineno, "vertex count must be positive")
                kappa = np.zeros(n)
            elif tag == "edge":
                if n is None:
                    raise GraphFileError(path, lineno, "edge before header")
                if len(fields) != 4:
                    raise GraphFileError(path, lineno, "expected 'edge u v weight'")
                try:
                    u, v = int(fields[1]), int(fields[2])
                    w = float(fields[3])
                except ValueError:
                    raise GraphFileError(path, lineno, "malformed edge line")
                if not (0 <= u < n and 0 <= v < n):
                    raise GraphFileError(path, lineno, "edge endpoint out of range")
                if w <= 0:
                    raise GraphFileError(path, lineno,
                                         f"edge weight must be positive, got {w}")
                eu.append(u)
                ev.append(v)
                ew.append(w)
            elif tag == "kill":
                if n is None:
                    raise GraphFileError(path, lineno, "kill before header")
                if len(fields) != 3:
                    raise GraphFileError(path, lineno, "expected 'kill u kappa'")
                try:
                    u, k = int(fields[1]), float(fields[2])
                except ValueError:
                    raise GraphFileError(path, lineno, "malformed kill line")
                if not 0 <= u < n:
                    raise GraphFileError(path, lineno, "vertex out of range")
                if k < 0:
                    raise GraphFileError(path, lineno,
                                         f"killing mass must be nonnegative, got {k}")
                kappa[u] += k
            else:
                raise GraphFileError(path, lineno, f"unknown record {tag!r}")
    if n is None:
        raise GraphFileError(path, 0, "missing 'vertices N' header")
    try:
        return WeightedGraph(n, np.array(eu, dtype=np.int32),
                             np.array(ev, dtype=np.int32),
                             np.array(ew), kappa)
    except GraphError as err:
        raise GraphError(f"{path}: {err}") from err


def save_graph(path, g: WeightedGraph):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"vertices {g.n}\n")
        for u, v, w in zip(g.edge_u, g.edge_v, g.edge_w):
            fh.write(f"edge {u} {v} {float(w)!r}\n")
        for u in np.flatnonzero(g.kappa > 0):
            fh.write(f"kill {u} {float(g.kappa[u])!r}\n")
