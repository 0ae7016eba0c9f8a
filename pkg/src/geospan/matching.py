"""Star partitions of bipartite graphs.

A feasible instance with ``a * |A| == |B|`` splits B into |A| disjoint a-sets,
one per A-vertex, respecting adjacency; it exists iff every S subseteq A has
at least ``a * |S|`` neighbors.  The production path runs an integral max flow
(source -> A at capacity a, A -> B at 1, B -> sink at 1: a partition exists
iff the max flow saturates B).  The a-fold vertex-duplication construction and
an exhaustive Hall check are kept as small-scale cross-validation oracles.

Everything here is plain ids; callers own any geometry.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class BipartiteInstance:
    a_size: int
    b_size: int
    adjacency: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if self.a_size < 1 or self.b_size < 0:
            raise ValueError("need |A| >= 1 and |B| >= 0")
        if len(self.adjacency) != self.a_size:
            raise ValueError(f"expected {self.a_size} adjacency rows")
        for i, row in enumerate(self.adjacency):
            if list(row) != sorted(set(row)):
                raise ValueError(f"row {i} must be sorted without duplicates")
            if row and (row[0] < 0 or row[-1] >= self.b_size):
                raise ValueError(f"row {i} references a vertex outside B")


@dataclass(frozen=True)
class StarPartition:
    """For each A-vertex, the sorted B-vertices of its star."""

    stars: tuple[tuple[int, ...], ...]


class _Dinic:
    """Integral max flow; deterministic given arc insertion order."""

    def __init__(self, n: int):
        self.n = n
        self.head = [-1] * n
        self.to: list[int] = []
        self.nxt: list[int] = []
        self.cap: list[int] = []

    def add(self, u: int, v: int, c: int) -> int:
        idx = len(self.to)
        self.to.append(v)
        self.cap.append(c)
        self.nxt.append(self.head[u])
        self.head[u] = idx
        self.to.append(u)
        self.cap.append(0)
        self.nxt.append(self.head[v])
        self.head[v] = idx + 1
        return idx

    def max_flow(self, s: int, t: int) -> int:
        flow = 0
        INF = 1 << 62
        while True:
            level = [-1] * self.n
            level[s] = 0
            queue = [s]
            qi = 0
            while qi < len(queue):
                u = queue[qi]
                qi += 1
                e = self.head[u]
                while e != -1:
                    v = self.to[e]
                    if self.cap[e] > 0 and level[v] < 0:
                        level[v] = level[u] + 1
                        queue.append(v)
                    e = self.nxt[e]
            if level[t] < 0:
                return flow
            it = list(self.head)

            def dfs(u: int, limit: int) -> int:
                if u == t:
                    return limit
                pushed = 0
                while it[u] != -1 and pushed < limit:
                    e = it[u]
                    v = self.to[e]
                    if self.cap[e] > 0 and level[v] == level[u] + 1:
                        got = dfs(v, min(limit - pushed, self.cap[e]))
                        if got:
                            self.cap[e] -= got
                            self.cap[e ^ 1] += got
                            pushed += got
                            continue
                    it[u] = self.nxt[e]
                return pushed

            flow += dfs(s, INF)


def star_partition(inst: BipartiteInstance, a: int) -> StarPartition | None:
    """Partition B into a-stars with centers in A, or None when infeasible.

    Feasibility is exactly the generalized Hall condition; the flow either
    saturates every B-vertex or proves a deficient set exists.
    """
    if a < 1:
        raise ValueError(f"star size must be >= 1, got {a}")
    if a * inst.a_size != inst.b_size:
        raise ValueError(f"size mismatch: a * |A| = {a * inst.a_size} but |B| = {inst.b_size}")
    n = 2 + inst.a_size + inst.b_size
    src, snk = 0, n - 1
    net = _Dinic(n)
    for i in range(inst.a_size):
        net.add(src, 1 + i, a)
    edge_arcs: list[list[tuple[int, int]]] = []
    for i, row in enumerate(inst.adjacency):
        arcs = []
        for b in row:
            arcs.append((net.add(1 + i, 1 + inst.a_size + b, 1), b))
        edge_arcs.append(arcs)
    for b in range(inst.b_size):
        net.add(1 + inst.a_size + b, snk, 1)
    if net.max_flow(src, snk) != inst.b_size:
        return None
    stars = []
    for arcs in edge_arcs:
        got = sorted(b for idx, b in arcs if net.cap[idx] == 0)
        stars.append(tuple(got))
    return StarPartition(stars=tuple(stars))


def assignment_counts(
    a_size: int,
    group_sizes: list[int],
    adjacency: list[list[int]],
    a: int,
) -> list[list[tuple[int, int]]] | None:
    """Capacity-compressed star partition over groups of interchangeable B-vertices.

    ``group_sizes[g]`` B-vertices share the adjacency signature g; row i of
    ``adjacency`` lists the groups reachable from A-vertex i.  Returns, per
    A-vertex, ``(group, count)`` pairs summing to ``a``, or None when the
    expansion to unit B-vertices would be infeasible.  Requires
    ``a * a_size == sum(group_sizes)``.
    """
    if a < 1:
        raise ValueError(f"star size must be >= 1, got {a}")
    total = sum(group_sizes)
    if a * a_size != total:
        raise ValueError(f"size mismatch: a * |A| = {a * a_size} but |B| = {total}")
    g_count = len(group_sizes)
    n = 2 + a_size + g_count
    src, snk = 0, n - 1
    net = _Dinic(n)
    for i in range(a_size):
        net.add(src, 1 + i, a)
    arc_of: list[list[tuple[int, int]]] = []
    for i, row in enumerate(adjacency):
        arcs = []
        for g in row:
            arcs.append((net.add(1 + i, 1 + a_size + g, a), g))
        arc_of.append(arcs)
    for g, size in enumerate(group_sizes):
        net.add(1 + a_size + g, snk, size)
    if net.max_flow(src, snk) != total:
        return None
    out = []
    for i, arcs in enumerate(arc_of):
        row = []
        for idx, g in arcs:
            used = a - net.cap[idx]
            if used > 0:
                row.append((g, used))
        out.append(row)
    return out


def star_partition_by_duplication(inst: BipartiteInstance, a: int) -> StarPartition | None:
    """Reference construction: a copies of each A-vertex, then a perfect
    matching by augmenting paths, then copies re-identified.

    Kept for cross-validation at small scale; the instance blows up by a
    factor of a.
    """
    if a < 1:
        raise ValueError(f"star size must be >= 1, got {a}")
    if a * inst.a_size != inst.b_size:
        raise ValueError(f"size mismatch: a * |A| = {a * inst.a_size} but |B| = {inst.b_size}")
    left_count = a * inst.a_size
    match_of_b = [-1] * inst.b_size

    def augment(left: int, seen: list[bool]) -> bool:
        orig = left // a
        for b in inst.adjacency[orig]:
            if seen[b]:
                continue
            seen[b] = True
            if match_of_b[b] < 0 or augment(match_of_b[b], seen):
                match_of_b[b] = left
                return True
        return False

    matched = 0
    for left in range(left_count):
        if augment(left, [False] * inst.b_size):
            matched += 1
    if matched != inst.b_size:
        return None
    stars: list[list[int]] = [[] for _ in range(inst.a_size)]
    for b, left in enumerate(match_of_b):
        stars[left // a].append(b)
    return StarPartition(stars=tuple(tuple(sorted(s)) for s in stars))


def find_hall_violation(inst: BipartiteInstance, a: int) -> tuple[int, ...] | None:
    """Exhaustively search for S subseteq A with fewer than ``a * |S|`` neighbors.

    Returns the first violating set in bitmask order, or None when the
    generalized Hall condition holds.  Capped at |A| <= 24 subsets.
    """
    if inst.a_size > 24:
        raise ValueError(f"|A| = {inst.a_size} too large for exhaustive check")
    masks = []
    for row in inst.adjacency:
        m = 0
        for b in row:
            m |= 1 << b
        masks.append(m)
    for subset in range(1, 1 << inst.a_size):
        nbhd = 0
        size = 0
        rest = subset
        while rest:
            low = rest & -rest
            i = low.bit_length() - 1
            nbhd |= masks[i]
            size += 1
            rest ^= low
        if nbhd.bit_count() < a * size:
            return tuple(i for i in range(inst.a_size) if subset >> i & 1)
    return None


def validate_star_partition(inst: BipartiteInstance, a: int, part: StarPartition) -> bool:
    """Independent check: star sizes, disjointness, coverage of B, adjacency."""
    if len(part.stars) != inst.a_size:
        return False
    seen: set[int] = set()
    for i, star in enumerate(part.stars):
        if len(star) != a:
            return False
        row = set(inst.adjacency[i])
        for b in star:
            if b in seen or b not in row:
                return False
            seen.add(b)
    return len(seen) == inst.b_size
