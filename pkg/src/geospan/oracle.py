"""Exact ground truth at tiny scale.

``contains_spanning_tree`` decides spanning-tree containment by backtracking
over injective, layer-respecting assignments with degree pruning; it is
exponential and capped at 14 vertices.  ``tessellation_depth_scan`` re-derives
the depth constant by a bare linear scan.  Both exist to cross-check the fast
paths, so they rebuild everything from first principles (pairwise distances,
no grids).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geometry import lp_distance

_MAX_ORACLE_N = 14


@dataclass(frozen=True)
class ExplicitTree:
    """Rooted tree as a parent array; vertex 0 is the root."""

    n: int
    parents: tuple[int, ...]
    children: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    order: tuple[int, ...] = field(init=False, repr=False)
    degrees: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.n < 1 or len(self.parents) != self.n:
            raise ValueError("parent array must have one entry per vertex")
        if self.parents[0] != -1:
            raise ValueError("vertex 0 must be the root (parent -1)")
        kids: list[list[int]] = [[] for _ in range(self.n)]
        for v in range(1, self.n):
            parent = self.parents[v]
            if not 0 <= parent < self.n:
                raise ValueError(f"vertex {v} has invalid parent {parent}")
            kids[parent].append(v)
        # BFS order doubles as the acyclicity/connectivity check.
        order = [0]
        seen = 1
        i = 0
        while i < len(order):
            for c in kids[order[i]]:
                order.append(c)
                seen += 1
            i += 1
        if seen != self.n:
            raise ValueError("parent array does not describe a tree rooted at 0")
        degs = [len(k) + (1 if v else 0) for v, k in enumerate(kids)]
        object.__setattr__(self, "children", tuple(tuple(k) for k in kids))
        object.__setattr__(self, "order", tuple(order))
        object.__setattr__(self, "degrees", tuple(degs))

    @staticmethod
    def from_balanced(seq_entries: tuple[int, ...]) -> "ExplicitTree":
        """Explicit form of the balanced tree over a degree sequence."""
        parents = [-1]
        layer = [0]
        for s in seq_entries:
            nxt = []
            for v in layer:
                for _ in range(s):
                    parents.append(v)
                    nxt.append(len(parents) - 1)
            layer = nxt
        return ExplicitTree(n=len(parents), parents=tuple(parents))


def contains_spanning_tree(g, t: ExplicitTree) -> bool:
    """Exact spanning-containment decision for graphs on at most 14 vertices.

    Adjacency is recomputed here from pairwise distances so the answer is
    independent of the graph's grid index.
    """
    n = g.n
    if n != t.n:
        return False
    if n > _MAX_ORACLE_N:
        raise ValueError(f"oracle capped at {_MAX_ORACLE_N} vertices, got {n}")
    pts = [g.points.point(i) for i in range(n)]
    adj = [set() for _ in range(n)]
    for u in range(n):
        for v in range(u + 1, n):
            if lp_distance(pts[u], pts[v], g.p) <= g.radius:
                adj[u].add(v)
                adj[v].add(u)
    gdeg = [len(a) for a in adj]
    order = t.order
    used = [False] * n
    image = [-1] * n

    def place(pos: int) -> bool:
        if pos == n:
            return True
        v = order[pos]
        need = t.degrees[v]
        parent = t.parents[v]
        candidates = range(n) if parent < 0 else sorted(adj[image[parent]])
        for cand in candidates:
            if used[cand] or gdeg[cand] < need:
                continue
            used[cand] = True
            image[v] = cand
            if place(pos + 1):
                return True
            used[cand] = False
            image[v] = -1
        return False

    return place(0)


def tessellation_depth_scan(s: int, d: int, eps: float, r: float, r_threshold: float,
                            relax: float = 1.0, p: float = 2.0) -> int:
    """Reference route for the depth constant: scan k = 1, 2, ... until both
    inequalities hold.  Must agree with the closed-form computation."""
    if s < 2 or d < 1:
        raise ValueError("need s >= 2 and d >= 1")
    if eps <= 0 or r <= 0 or r_threshold <= 0 or relax <= 0:
        raise ValueError("eps, r, r_threshold and relax must be positive")
    diam = 1.0 if p == math.inf else float(d) ** (1.0 / p)
    k = 1
    while not (diam * float(s) ** (1 - k) <= r
               and diam * float(s) ** (-k) < relax * eps * r_threshold / 8.0):
        k += 1
        if k > 10_000:
            raise RuntimeError("depth scan did not converge")
    return k


__all__ = ["ExplicitTree", "contains_spanning_tree", "tessellation_depth_scan", "_MAX_ORACLE_N"]
