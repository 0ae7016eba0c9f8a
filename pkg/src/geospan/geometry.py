"""Axis-parallel cube tessellations of the unit cube and l_p distances.

Level ``l`` splits ``[0,1]**d`` into ``base**(l*d)`` congruent closed cubes of
side ``base**-l``.  All cube bookkeeping is exact integer arithmetic on
``(level, cell, base)``; floating point enters only through centers and
distances, so nested-grid relations (blocks, homothety images, enlargements)
never drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterator, Sequence


@dataclass(frozen=True)
class CubeId:
    """One closed cube of the level-`level` grid with `base` cells per axis unit.

    Identifies ``prod_j [cell_j * base**-level, (cell_j + 1) * base**-level]``.
    """

    level: int
    cell: tuple[int, ...]
    base: int

    def __post_init__(self) -> None:
        if self.base < 2:
            raise ValueError(f"base must be >= 2, got {self.base}")
        if self.level < 0:
            raise ValueError(f"level must be >= 0, got {self.level}")
        n = self.base**self.level
        if not self.cell:
            raise ValueError("cell must have at least one axis")
        for c in self.cell:
            if not 0 <= c < n:
                raise ValueError(f"cell {self.cell} out of range for level {self.level}")

    @property
    def dim(self) -> int:
        return len(self.cell)

    @property
    def side(self) -> float:
        return float(self.base) ** -self.level


@dataclass(frozen=True)
class Region:
    """A set of cubes sharing one level and base, iterated in cell order."""

    cubes: tuple[CubeId, ...]

    def __post_init__(self) -> None:
        if not self.cubes:
            raise ValueError("region must contain at least one cube")
        first = self.cubes[0]
        for q in self.cubes[1:]:
            if q.level != first.level or q.base != first.base or q.dim != first.dim:
                raise ValueError("region cubes must share level, base and dimension")
        ordered = tuple(sorted(self.cubes, key=lambda q: q.cell))
        object.__setattr__(self, "cubes", ordered)

    def __iter__(self) -> Iterator[CubeId]:
        return iter(self.cubes)

    def __len__(self) -> int:
        return len(self.cubes)

    def __contains__(self, q: object) -> bool:
        return q in self.cubes

    @property
    def level(self) -> int:
        return self.cubes[0].level

    @property
    def base(self) -> int:
        return self.cubes[0].base


def lp_distance(a: Sequence[float], b: Sequence[float], p: float = 2.0) -> float:
    """l_p distance between two points of the same dimension.

    ``p`` may be any real >= 1 or ``math.inf``.  ``p=2`` is the Euclidean
    default; membership of y in the closed ball B_x(r) is
    ``lp_distance(x, y, p) <= r``.
    """
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    if p < 1:
        raise ValueError(f"metric exponent must be >= 1, got {p}")
    diffs = [abs(x - y) for x, y in zip(a, b)]
    if p == math.inf:
        return max(diffs)
    if p == 2.0:
        return math.hypot(*diffs)
    if p == 1.0:
        return math.fsum(diffs)
    return math.fsum(dv**p for dv in diffs) ** (1.0 / p)


def diameter_factor(d: int, p: float = 2.0) -> float:
    """l_p diameter of a unit-side axis-parallel cube in dimension d."""
    if p == math.inf:
        return 1.0
    return float(d) ** (1.0 / p)


def cube_of_point(x: Sequence[float], level: int, base: int) -> CubeId:
    """Locate the grid cube holding point ``x``.

    Cells are half-open ``[a, b)`` per axis except the last cell, which is
    closed: a point exactly on a shared face belongs to the upper cell.  This
    tie-break is total, so boundary points never need special casing.
    """
    if base < 2 or level < 0:
        raise ValueError("need base >= 2 and level >= 0")
    n = base**level
    cell = tuple(min(max(int(math.floor(xi * n)), 0), n - 1) for xi in x)
    return CubeId(level=level, cell=cell, base=base)


def cube_center(q: CubeId) -> tuple[float, ...]:
    """Center point of a cube: coordinate j is ``(cell_j + 1/2) * base**-level``."""
    two_n = 2 * q.base**q.level
    return tuple((2 * c + 1) / two_n for c in q.cell)


def _block_anchor(q: CubeId, j: int) -> tuple[int, ...]:
    """Lowest cell of the level-j central block of q (exact integers)."""
    if j <= q.level:
        raise ValueError(f"block level {j} must exceed cube level {q.level}")
    step = q.base ** (j - q.level)
    # step - base = base * (base**(j-level-1) - 1) is always even.
    pad = (step - q.base) // 2
    return tuple(c * step + pad for c in q.cell)


def central_block(q: CubeId, j: int) -> Region:
    """The ``base**d`` level-j cubes forming the cube of side ``base**(1-j)``
    centered at the center of q.

    For ``j == q.level + 1`` this is exactly the tessellation of q into
    ``base**d`` subcubes; deeper levels shrink the block toward the center.
    The block is always grid aligned.
    """
    anchor = _block_anchor(q, j)
    s = q.base
    cubes = tuple(
        CubeId(level=j, cell=tuple(a + o for a, o in zip(anchor, offs)), base=s)
        for offs in product(range(s), repeat=q.dim)
    )
    return Region(cubes)


def homothety_image(q: CubeId, p: CubeId, block_level: int, finest_level: int) -> CubeId:
    """Image of ``p`` under the homothety with center ``center(q)`` and ratio
    ``base**(finest_level - block_level)``.

    Maps the finest central block of q bijectively onto its level-`block_level`
    block: the image is the unique cube of ``central_block(q, block_level)``
    whose center is ``c(q) + ratio * (c(p) - c(q))``.  Computed exactly via the
    cell offset of p inside the finest block.
    """
    if q.base != p.base:
        raise ValueError("cubes must share a base")
    if not 1 <= block_level <= finest_level - 1:
        raise ValueError(f"need 1 <= block level < finest level, got {block_level}, {finest_level}")
    if q.level != block_level - 1:
        raise ValueError(f"cube level {q.level} must equal block level - 1 = {block_level - 1}")
    if p.level != finest_level:
        raise ValueError(f"inner cube level {p.level} must equal finest level {finest_level}")
    anchor = _block_anchor(q, finest_level)
    s = q.base
    offset = tuple(c - a for c, a in zip(p.cell, anchor))
    if any(not 0 <= o < s for o in offset):
        raise ValueError(f"cube {p.cell} is not in the finest central block of {q.cell}")
    cell = tuple(qc * s + o for qc, o in zip(q.cell, offset))
    return CubeId(level=block_level, cell=cell, base=s)


def enlarged_cube(q: CubeId) -> Region:
    """All same-level cubes sharing at least one corner with q, clipped to the
    domain: cell offsets in {-1, 0, 1} per axis.  Between 2**d and 3**d cubes.
    """
    n = q.base**q.level
    ranges = [range(max(0, c - 1), min(n - 1, c + 1) + 1) for c in q.cell]
    cubes = tuple(CubeId(level=q.level, cell=offs, base=q.base) for offs in product(*ranges))
    return Region(cubes)
