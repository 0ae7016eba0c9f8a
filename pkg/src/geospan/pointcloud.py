"""Seeded point samples and radius graphs over the unit cube.

Coordinates come from a counter-based generator keyed on
``(seed, vertex index, axis)``, so the m-point prefix of an n-point sample is
bit-identical to an independent m-point sample with the same seed.  That makes
a single seed model the whole nested graph sequence: the graph on the first m
points is always the induced subgraph of the graph on the first n.

Adjacency is the closed ball ``lp_distance(u, v, p) <= r``.  Neighbor queries
go through a coarse cell grid (cell side >= r) and scan at most 3**d cells, so
edges are never materialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .geometry import CubeId
from .trees import FormatError

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)

# Grid resolution floor: cells never get finer than 1/255 per axis.
_MAX_CELLS_PER_AXIS = 255


def _splitmix64(state: np.ndarray) -> np.ndarray:
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _uniform_stream(seed: int, start: int, count: int) -> np.ndarray:
    """Uniform [0,1) doubles at stream positions start..start+count-1."""
    counters = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    state = (np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + counters * _GOLDEN) & _MASK
    bits = _splitmix64(state)
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class PointSet:
    """Ordered points in [0,1]**d; the row index is the vertex id."""

    dim: int
    coords: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.coords.ndim != 2 or self.coords.shape[1] != self.dim:
            raise ValueError(f"coords must be (n, {self.dim}), got {self.coords.shape}")
        self.coords.setflags(write=False)

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def point(self, i: int) -> tuple[float, ...]:
        return tuple(self.coords[i])

    def prefix(self, m: int) -> "PointSet":
        if not 1 <= m <= self.n:
            raise ValueError(f"prefix length {m} out of range 1..{self.n}")
        return PointSet(dim=self.dim, coords=self.coords[:m], seed=self.seed)


def sample_uniform(n: int, d: int, seed: int) -> PointSet:
    """n independent uniform points in [0,1]**d, deterministic in (seed, d, n).

    Coordinate (i, axis) sits at stream position ``i * d + axis``, which is
    what makes prefixes of a sample coincide with smaller samples.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if d < 1:
        raise ValueError(f"need d >= 1, got {d}")
    flat = _uniform_stream(seed, 0, n * d)
    return PointSet(dim=d, coords=flat.reshape(n, d), seed=seed)


def save_points(ps: PointSet, path: str | Path) -> None:
    """Text format: first line ``d n``, then one point per line, 17 significant digits."""
    with open(path, "w") as fh:
        fh.write(f"{ps.dim} {ps.n}\n")
        for row in ps.coords:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def load_points(path: str | Path) -> PointSet:
    p = str(path)
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError("empty point file", p, 1)
    head = lines[0].split()
    if len(head) != 2:
        raise FormatError("expected header 'd n'", p, 1)
    try:
        d, n = int(head[0]), int(head[1])
    except ValueError:
        raise FormatError("header fields must be integers", p, 1) from None
    if d < 1 or n < 1:
        raise FormatError(f"bad dimensions d={d} n={n}", p, 1)
    if len(lines) < 1 + n:
        raise FormatError(f"expected {n} points, found {len(lines) - 1}", p, len(lines))
    coords = np.empty((n, d), dtype=np.float64)
    for i in range(n):
        parts = lines[1 + i].split()
        if len(parts) != d:
            raise FormatError(f"expected {d} coordinates, found {len(parts)}", p, 2 + i)
        try:
            row = [float(x) for x in parts]
        except ValueError:
            raise FormatError("bad coordinate value", p, 2 + i) from None
        for x in row:
            if not 0.0 <= x <= 1.0:
                raise FormatError(f"coordinate {x} outside [0,1]", p, 2 + i)
        coords[i] = row
    return PointSet(dim=d, coords=coords, seed=None)


def _block_distances(a: np.ndarray, b: np.ndarray, p: float) -> np.ndarray:
    """Pairwise l_p distances between row sets a (m,d) and b (k,d) -> (m,k)."""
    diff = np.abs(a[:, None, :] - b[None, :, :])
    if p == math.inf:
        return diff.max(axis=2)
    if p == 2.0:
        return np.sqrt((diff * diff).sum(axis=2))
    if p == 1.0:
        return diff.sum(axis=2)
    return (diff**p).sum(axis=2) ** (1.0 / p)


class GeometricGraph:
    """Radius graph over a PointSet under an l_p metric, indexed by a cell grid.

    Edge ``uv`` exists iff ``u != v`` and ``lp_distance(u, v, p) <= radius``;
    adjacency is implicit (queried, never stored).
    """

    def __init__(self, points: PointSet, radius: float, p: float = 2.0):
        if radius <= 0:
            raise ValueError(f"radius must be positive, got {radius}")
        if p < 1:
            raise ValueError(f"metric exponent must be >= 1, got {p}")
        self.points = points
        self.radius = float(radius)
        self.p = float(p)
        # Cell side max(r, 1/255): never finer than the radius, never more
        # than 255 cells per axis.
        ncells = max(1, min(int(1.0 / self.radius), _MAX_CELLS_PER_AXIS))
        self._ncells = ncells
        cells = np.minimum((points.coords * ncells).astype(np.int64), ncells - 1)
        np.maximum(cells, 0, out=cells)
        lin = cells[:, 0].copy()
        for axis in range(1, points.dim):
            lin *= ncells
            lin += cells[:, axis]
        self._cell_of = lin
        order = np.argsort(lin, kind="stable")
        self._order = order
        sorted_cells = lin[order]
        uniq, starts = np.unique(sorted_cells, return_index=True)
        self._occupied = uniq
        self._starts = np.append(starts, len(order))

    @property
    def n(self) -> int:
        return self.points.n

    def _cell_members(self, lin: int) -> np.ndarray:
        pos = np.searchsorted(self._occupied, lin)
        if pos >= len(self._occupied) or self._occupied[pos] != lin:
            return np.empty(0, dtype=np.int64)
        return self._order[self._starts[pos] : self._starts[pos + 1]]

    def _neighbor_cells(self, lin: int) -> list[int]:
        d = self.points.dim
        nc = self._ncells
        digits = []
        rem = int(lin)
        for _ in range(d):
            digits.append(rem % nc)
            rem //= nc
        digits.reverse()
        out = []
        for offs in product((-1, 0, 1), repeat=d):
            cand = 0
            ok = True
            for dig, o in zip(digits, offs):
                v = dig + o
                if not 0 <= v < nc:
                    ok = False
                    break
                cand = cand * nc + v
            if ok:
                out.append(cand)
        return out

    def _candidates(self, lin: int) -> np.ndarray:
        parts = [self._cell_members(c) for c in self._neighbor_cells(lin)]
        parts = [pt for pt in parts if len(pt)]
        if not parts:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(parts)

    def neighbors(self, u: int) -> np.ndarray:
        """Sorted vertex ids adjacent to u."""
        cand = self._candidates(int(self._cell_of[u]))
        if len(cand) == 0:
            return cand
        dist = _block_distances(self.points.coords[u : u + 1], self.points.coords[cand], self.p)[0]
        keep = cand[(dist <= self.radius) & (cand != u)]
        keep.sort()
        return keep

    def has_edge(self, u: int, v: int) -> bool:
        if u == v:
            return False
        dist = _block_distances(
            self.points.coords[u : u + 1], self.points.coords[v : v + 1], self.p
        )[0, 0]
        return bool(dist <= self.radius)

    def degrees(self) -> np.ndarray:
        """Degree of every vertex (scans each occupied cell pair once)."""
        out = np.zeros(self.n, dtype=np.int64)
        for pos, lin in enumerate(self._occupied):
            members = self._order[self._starts[pos] : self._starts[pos + 1]]
            cand = self._candidates(int(lin))
            dist = _block_distances(self.points.coords[members], self.points.coords[cand], self.p)
            within = dist <= self.radius
            out[members] = within.sum(axis=1) - 1  # drop self
        return out

    def edge_count(self) -> int:
        return int(self.degrees().sum() // 2)

    def hop_distance(self, u: int, v: int, max_depth: int | None = None) -> int | None:
        """Breadth-first shortest path length in edges; None when unreachable.

        With ``max_depth`` given, returns the exact hop count when it is at
        most ``max_depth`` and None otherwise (the search stops expanding).
        """
        n = self.n
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError("vertex id out of range")
        if u == v:
            return 0
        coords = self.points.coords
        visited = np.zeros(n, dtype=bool)
        visited[u] = True
        frontier = np.array([u], dtype=np.int64)
        depth = 0
        while len(frontier):
            depth += 1
            if max_depth is not None and depth > max_depth:
                return None
            next_ids: list[np.ndarray] = []
            frontier_cells = self._cell_of[frontier]
            order = np.argsort(frontier_cells, kind="stable")
            fsorted = frontier[order]
            csorted = frontier_cells[order]
            uniq, starts = np.unique(csorted, return_index=True)
            bounds = np.append(starts, len(fsorted))
            for ci, lin in enumerate(uniq):
                fpts = fsorted[bounds[ci] : bounds[ci + 1]]
                cand = self._candidates(int(lin))
                if len(cand) == 0:
                    continue
                cand = cand[~visited[cand]]
                if len(cand) == 0:
                    continue
                dist = _block_distances(coords[cand], coords[fpts], self.p)
                reached = cand[(dist <= self.radius).any(axis=1)]
                if len(reached):
                    visited[reached] = True
                    next_ids.append(reached)
            if not next_ids:
                return None
            frontier = np.concatenate(next_ids)
            if visited[v]:
                return depth
        return None


def build_graph(ps: PointSet, r: float, p: float = 2.0) -> GeometricGraph:
    return GeometricGraph(ps, r, p)


@dataclass(frozen=True)
class OccupancyTable:
    """Per-cube vertex counts for the level-k tessellation with base s."""

    level: int
    base: int
    total: int
    counts: dict[CubeId, int] = field(repr=False)

    def count(self, q: CubeId) -> int:
        return self.counts.get(q, 0)


def cell_index(ps: PointSet, k: int, s: int) -> np.ndarray:
    """Linear cube index per point for the level-k base-s grid (row-major)."""
    if s < 2 or k < 0:
        raise ValueError("need s >= 2 and k >= 0")
    n_axis = s**k
    cells = np.minimum((ps.coords * n_axis).astype(np.int64), n_axis - 1)
    np.maximum(cells, 0, out=cells)
    lin = cells[:, 0].copy()
    for axis in range(1, ps.dim):
        lin *= n_axis
        lin += cells[:, axis]
    return lin


def occupancy(ps: PointSet, k: int, s: int) -> OccupancyTable:
    """Exact per-cube counts; cubes with zero points are omitted from the map."""
    lin = cell_index(ps, k, s)
    uniq, counts = np.unique(lin, return_counts=True)
    n_axis = s**k
    table: dict[CubeId, int] = {}
    for linval, cnt in zip(uniq.tolist(), counts.tolist()):
        cell = []
        rem = linval
        for _ in range(ps.dim):
            cell.append(rem % n_axis)
            rem //= n_axis
        cell.reverse()
        table[CubeId(level=k, cell=tuple(cell), base=s)] = cnt
    return OccupancyTable(level=k, base=s, total=ps.n, counts=table)
