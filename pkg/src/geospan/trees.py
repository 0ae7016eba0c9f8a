"""Implicit balanced trees over bounded degree sequences.

A tree over ``(s_1, ..., s_h)`` has a root layer of size 1 and every vertex of
layer ``i-1`` has exactly ``s_i`` children.  Vertices are addressed as
``(layer, index)`` and all traversal is index arithmetic; nothing is ever
materialized, so queries stay O(1) in memory for trees with millions of
vertices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

_MAX_INT = 2**63 - 1


class FormatError(ValueError):
    """Malformed text input; carries the offending path and line number."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:" + (f"{line}:" if line is not None else "")
            where += " "
        super().__init__(f"{where}{message}")


@dataclass(frozen=True)
class DegreeSequence:
    """Child counts ``(s_1, ..., s_h)`` with every entry in {2, ..., bound}."""

    entries: tuple[int, ...]
    bound: int

    def __post_init__(self) -> None:
        if self.bound < 2:
            raise ValueError(f"degree bound must be >= 2, got {self.bound}")
        if not self.entries:
            raise ValueError("degree sequence must have at least one entry")
        for i, s in enumerate(self.entries):
            if not 2 <= s <= self.bound:
                raise ValueError(f"entry {i + 1} is {s}, outside {{2, ..., {self.bound}}}")

    @property
    def height(self) -> int:
        return len(self.entries)

    @staticmethod
    def uniform(s: int, h: int) -> "DegreeSequence":
        if h < 1:
            raise ValueError(f"height must be >= 1, got {h}")
        return DegreeSequence(entries=(s,) * h, bound=max(2, s))


@dataclass(frozen=True)
class TreeVertex:
    layer: int
    index: int


@dataclass(frozen=True)
class BalancedTree:
    """Layer sizes and prefix totals for the tree over a degree sequence.

    ``layer_sizes[i]`` is ``prod_{j<=i} s_j`` (1 for the root layer) and
    ``layer_offsets[i]`` is the flat position of the first layer-i vertex, so
    position ``layer_offsets[i] + t`` addresses vertex ``(i, t)``.
    """

    seq: DegreeSequence
    layer_sizes: tuple[int, ...] = field(init=False)
    layer_offsets: tuple[int, ...] = field(init=False)
    size: int = field(init=False)

    def __post_init__(self) -> None:
        # Exact arbitrary-precision arithmetic; only tree_size() enforces the
        # machine-integer contract (embeddings never get near that anyway).
        sizes = [1]
        for s in self.seq.entries:
            sizes.append(sizes[-1] * s)
        offsets = [0]
        for ls in sizes:
            offsets.append(offsets[-1] + ls)
        object.__setattr__(self, "layer_sizes", tuple(sizes))
        object.__setattr__(self, "layer_offsets", tuple(offsets[:-1]))
        object.__setattr__(self, "size", offsets[-1])

    @property
    def height(self) -> int:
        return self.seq.height

    @property
    def diameter(self) -> int:
        return 2 * self.seq.height

    def position(self, v: TreeVertex) -> int:
        self._check(v)
        return self.layer_offsets[v.layer] + v.index

    def _check(self, v: TreeVertex) -> None:
        if not 0 <= v.layer <= self.height:
            raise ValueError(f"layer {v.layer} out of range")
        if not 0 <= v.index < self.layer_sizes[v.layer]:
            raise ValueError(f"index {v.index} out of range for layer {v.layer}")


def tree_size(seq: DegreeSequence) -> int:
    """Number of vertices: ``sum_i prod_{j<=i} s_j``; overflow-checked."""
    size = BalancedTree(seq).size
    if size > _MAX_INT:
        raise OverflowError("tree size exceeds the machine-integer range")
    return size


def build_tree(seq: DegreeSequence) -> BalancedTree:
    return BalancedTree(seq)


def parent_of(tree: BalancedTree, v: TreeVertex) -> TreeVertex:
    tree._check(v)
    if v.layer == 0:
        raise ValueError("the root has no parent")
    s = tree.seq.entries[v.layer - 1]
    return TreeVertex(layer=v.layer - 1, index=v.index // s)


def children_of(tree: BalancedTree, v: TreeVertex) -> list[TreeVertex]:
    tree._check(v)
    if v.layer == tree.height:
        return []
    s = tree.seq.entries[v.layer]
    return [TreeVertex(layer=v.layer + 1, index=v.index * s + j) for j in range(s)]


def select_base_degree(seq: DegreeSequence, d: int, depth2: int) -> tuple[int, int]:
    """Pick the tessellation degree from the prefix of length ``d * depth2 * bound``.

    Returns ``(s, prefix_len)`` where ``s`` is the smallest value occurring at
    least ``d * depth2`` times among the first ``prefix_len`` entries; the
    pigeonhole principle guarantees one exists.  Raises when the prefix does
    not fit inside the sequence.
    """
    if d < 1 or depth2 < 1:
        raise ValueError("need d >= 1 and depth2 >= 1")
    prefix_len = d * depth2 * seq.bound
    if prefix_len > seq.height:
        raise ValueError(
            f"prefix length {prefix_len} = d * depth2 * bound exceeds height {seq.height}"
        )
    return _count_and_pick(seq, d * depth2, prefix_len), prefix_len


def select_base_degree_minimal(seq: DegreeSequence, d: int, depth2: int) -> tuple[int, int]:
    """Shortest-prefix variant: the smallest ``prefix_len`` such that some value
    occurs at least ``d * depth2`` times among the first ``prefix_len`` entries.

    Gives the same divisibility guarantee as :func:`select_base_degree` while
    consuming far fewer early layers; used when the full pigeonhole prefix is
    too greedy for the instance at hand.
    """
    if d < 1 or depth2 < 1:
        raise ValueError("need d >= 1 and depth2 >= 1")
    need = d * depth2
    counts: dict[int, int] = {}
    for i, s in enumerate(seq.entries):
        counts[s] = counts.get(s, 0) + 1
        if counts[s] >= need:
            return s, i + 1
    raise ValueError(f"no degree value reaches {need} occurrences within height {seq.height}")


def _count_and_pick(seq: DegreeSequence, need: int, prefix_len: int) -> int:
    counts: dict[int, int] = {}
    for s in seq.entries[:prefix_len]:
        counts[s] = counts.get(s, 0) + 1
    qualifying = sorted(v for v, c in counts.items() if c >= need)
    if not qualifying:
        raise ValueError(f"pigeonhole failed: no value occurs {need} times in prefix {prefix_len}")
    # Ties broken toward the smallest value for reproducibility.
    return qualifying[0]


def height_from_order(n: int, s: int) -> int:
    """The unique h with ``sum_{i<h} s**i < n <= sum_{i<=h} s**i``."""
    if n < 1:
        raise ValueError(f"order must be >= 1, got {n}")
    if s < 2:
        raise ValueError(f"arity must be >= 2, got {s}")
    total = 1
    power = 1
    h = 0
    while total < n:
        power *= s
        total += power
        h += 1
    return h


def regular_tree_threshold(n: int, s: int, d: int) -> float:
    """Asymptotic appearance threshold ``sqrt(d) * log(s - 1) / (2 * log n)``
    for the near-regular bounded-degree tree on n vertices.
    """
    import math

    if s < 3:
        raise ValueError(f"arity must be >= 3, got {s}")
    if n < 2:
        raise ValueError(f"order must be >= 2, got {n}")
    return math.sqrt(d) * math.log(s - 1) / (2.0 * math.log(n))


def save_degree_sequence(seq: DegreeSequence, path: str | Path) -> None:
    """Text format: first line ``h M``, then h entries one per line."""
    lines = [f"{seq.height} {seq.bound}"]
    lines.extend(str(s) for s in seq.entries)
    Path(path).write_text("\n".join(lines) + "\n")


def load_degree_sequence(path: str | Path) -> DegreeSequence:
    p = str(path)
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty degree-sequence file", p, 1)
    head = lines[0].split()
    if len(head) != 2:
        raise FormatError("expected header 'h M'", p, 1)
    try:
        h, bound = int(head[0]), int(head[1])
    except ValueError:
        raise FormatError("header fields must be integers", p, 1) from None
    if len(lines) < 1 + h:
        raise FormatError(f"expected {h} entries, found {len(lines) - 1}", p, len(lines))
    entries = []
    for i in range(h):
        raw = lines[1 + i].strip()
        try:
            entries.append(int(raw))
        except ValueError:
            raise FormatError(f"bad degree entry {raw!r}", p, 2 + i) from None
    try:
        return DegreeSequence(entries=tuple(entries), bound=bound)
    except ValueError as exc:
        raise FormatError(str(exc), p, 1) from None
