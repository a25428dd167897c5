"""Ball, boundary, surrounded-ball and annulus vertex sets.

All regions use the graph distance.  The surrounded ball of radius L is
everything that cannot reach the killing (the "infinity" attachment)
without touching the ball: its complement is flood-filled from every
vertex with positive killing mass, avoiding the ball.  The annulus with
fractions (a, b) at scale R is Ball((1-a)R) minus SurroundedBall((1-b)R).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphs import WeightedGraph, _ranges


class RegionError(ValueError):
    pass


KINDS = ("ball", "boundary", "surrounded-ball", "annulus")


@dataclass(frozen=True)
class Region:
    kind: str
    center: int
    params: dict = field(default_factory=dict)
    members: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))

    def mask(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=bool)
        out[self.members] = True
        return out

    def __contains__(self, v) -> bool:
        return bool(np.isin(int(v), self.members))

    def __len__(self) -> int:
        return self.members.size


def _ball_members(dist, radius):
    return np.flatnonzero((dist >= 0) & (dist <= radius))


def _surrounded_members(g: WeightedGraph, dist, radius):
    ball = (dist >= 0) & (dist <= radius)
    escaped = np.zeros(g.n, dtype=bool)
    seeds = np.flatnonzero((g.kappa > 0) & ~ball)
    escaped[seeds] = True
    frontier = seeds
    while frontier.size:
        slots = _ranges(g.indptr[frontier], g.indptr[frontier + 1])
        nxt = g.adj[slots]
        nxt = np.unique(nxt[~escaped[nxt] & ~ball[nxt]])
        escaped[nxt] = True
        frontier = nxt
    return np.flatnonzero(~escaped)


def resolve_region(g: WeightedGraph, kind: str, center: int, radius=None,
                   a=None, b=None) -> Region:
    """Resolve a region specification to its vertex set."""
    if kind not in KINDS:
        raise RegionError(f"unknown region kind {kind!r}")
    center = int(center)
    dist = g.distances_from(center)

    if kind == "ball":
        members = _ball_members(dist, float(radius))
        params = {"radius": float(radius)}
    elif kind == "boundary":
        ball = np.zeros(g.n, dtype=bool)
        ball[_ball_members(dist, float(radius))] = True
        inside = np.flatnonzero(ball)
        has_out = np.fromiter(
            (bool(np.any(~ball[g.neighbors(int(v))[0]])) for v in inside),
            dtype=bool, count=inside.size)
        members = inside[has_out]
        params = {"radius": float(radius)}
    elif kind == "surrounded-ball":
        members = _surrounded_members(g, dist, float(radius))
        params = {"radius": float(radius)}
    else:  # annulus
        if a is None or b is None or radius is None:
            raise RegionError("annulus needs radius and fractions a, b")
        a, b = float(a), float(b)
        if not (0 < 2 * a <= b <= 1):
            raise RegionError(f"annulus fractions must satisfy 0 < 2a <= b <= 1, got a={a}, b={b}")
        outer = np.zeros(g.n, dtype=bool)
        outer[_ball_members(dist, (1 - a) * radius)] = True
        inner = np.zeros(g.n, dtype=bool)
        inner[_surrounded_members(g, dist, (1 - b) * radius)] = True
        members = np.flatnonzero(outer & ~inner)
        params = {"radius": float(radius), "a": a, "b": b}

    if members.size == 0:
        raise RegionError(f"region {kind!r} at center {center} is empty")
    return Region(kind, center, params, members)
