"""Embedding balanced trees as spanning trees of unit-cube radius graphs.

The algorithm tessellates the cube into ``s**(k*d)`` cells and embeds the tree
layer by layer in three phases: a seed phase that fills one central cell and
splits the next layer over the central block, a spreading phase that walks
descendants block by block toward an even distribution over all cells (each
hop short enough that parent/child pairs stay within the radius), and a final
phase that hands every cell's remaining points to its active vertices via a
star partition over enlarged cells and fills descendants greedily inside each
clique.

Two modes:

* ``strict`` enforces every constant inequality the analysis needs and then
  runs with the guarantees those constants buy.
* ``practical`` relaxes the cube-diameter constant by a factor ``relax``,
  downgrades the asymptotic budget inequalities to warnings, and compensates
  with runtime capacity checks plus post-hoc verification; the verifier, not
  the constants, certifies any produced embedding.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from pathlib import Path

import numpy as np

from .geometry import CubeId, diameter_factor
from .matching import assignment_counts
from .pointcloud import PointSet, cell_index
from .trees import BalancedTree, DegreeSequence, FormatError
from .trees import select_base_degree, select_base_degree_minimal

MODE_STRICT = "strict"
MODE_PRACTICAL = "practical"

# Dense per-cell bookkeeping caps the tessellation size.
_MAX_CELLS = 1 << 22


class PreconditionError(ValueError):
    """Strict mode rejected the parameter set."""

    def __init__(self, failed: list["PreconditionCheck"]):
        self.failed = failed
        names = ", ".join(c.name for c in failed)
        super().__init__(f"strict-mode preconditions failed: {names}")


class PlanningError(RuntimeError):
    """The step geometry cannot make progress at these parameters."""


def threshold_radius(d: int, h: int, p: float = 2.0) -> float:
    """Sharp-threshold radius ``d**(1/p) / (2h)`` (Euclidean: ``sqrt(d)/2h``)."""
    if d < 1 or h < 1:
        raise ValueError("need d >= 1 and h >= 1")
    return diameter_factor(d, p) / (2.0 * h)


def _depth_ok(k: int, s: int, d: int, eps: float, r: float, r_threshold: float,
              relax: float, p: float) -> bool:
    diam = diameter_factor(d, p)
    return diam * float(s) ** (1 - k) <= r and diam * float(s) ** (-k) < relax * eps * r_threshold / 8.0


def tessellation_depth(s: int, d: int, eps: float, r: float, r_threshold: float,
                       relax: float = 1.0, p: float = 2.0) -> int:
    """Smallest k such that a block of side ``s**(1-k)`` fits inside the radius
    and a single cell of side ``s**-k`` fits inside ``relax * eps * r_threshold / 8``.

    Closed-form start from logarithms, then a local correction so the result
    is exactly the smallest k satisfying both predicates.
    """
    if s < 2 or d < 1:
        raise ValueError("need s >= 2 and d >= 1")
    if eps <= 0 or r <= 0 or r_threshold <= 0 or relax <= 0:
        raise ValueError("eps, r, r_threshold and relax must be positive")
    diam = diameter_factor(d, p)
    logs = math.log(s)
    k1 = 1 + math.log(diam / r) / logs
    k2 = math.log(8.0 * diam / (relax * eps * r_threshold)) / logs
    k = max(1, math.ceil(max(k1, k2)) - 2)
    while not _depth_ok(k, s, d, eps, r, r_threshold, relax, p):
        k += 1
        if k > 10_000:
            raise PlanningError("tessellation depth search did not converge")
    while k > 1 and _depth_ok(k - 1, s, d, eps, r, r_threshold, relax, p):
        k -= 1
    return k


@dataclass(frozen=True)
class EmbedParams:
    """All constants of one embedding run.

    ``r`` defaults to ``(1 + eps) * r_threshold``; ``depth2`` is the depth for
    degree 2 (it fixes the seed prefix), ``depth`` the depth for the selected
    degree ``s``.  ``relax`` >= 1 only takes effect in practical mode.
    """

    d: int
    h: int
    bound: int
    eps: float
    p: float
    r_threshold: float
    r: float
    s: int
    depth: int
    depth2: int
    prefix_layers: int
    mode: str
    relax: float


def build_params(seq: DegreeSequence, d: int, eps: float, p: float = 2.0,
                 mode: str = MODE_PRACTICAL, relax: float = 4.0,
                 r: float | None = None) -> EmbedParams:
    """Assemble EmbedParams for a tree over ``seq`` in dimension d.

    Strict mode uses the full pigeonhole prefix ``d * depth2 * bound`` and an
    unrelaxed cube-diameter constant; practical mode uses the shortest prefix
    with the same divisibility guarantee and ``relax``.
    """
    if mode not in (MODE_STRICT, MODE_PRACTICAL):
        raise ValueError(f"unknown mode {mode!r}")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if relax < 1:
        raise ValueError(f"relax must be >= 1, got {relax}")
    h = seq.height
    r_thr = threshold_radius(d, h, p)
    radius = (1.0 + eps) * r_thr if r is None else float(r)
    if radius < r_thr:
        raise ValueError(f"radius {radius} below the threshold {r_thr}")
    effective_relax = relax if mode == MODE_PRACTICAL else 1.0
    depth2 = tessellation_depth(2, d, eps, radius, r_thr, effective_relax, p)
    if mode == MODE_STRICT:
        s, prefix = select_base_degree(seq, d, depth2)
    else:
        s, prefix = select_base_degree_minimal(seq, d, depth2)
    depth = tessellation_depth(s, d, eps, radius, r_thr, effective_relax, p)
    return EmbedParams(
        d=d, h=h, bound=seq.bound, eps=eps, p=p, r_threshold=r_thr, r=radius,
        s=s, depth=depth, depth2=depth2, prefix_layers=prefix,
        mode=mode, relax=relax,
    )


@dataclass(frozen=True)
class PreconditionCheck:
    name: str
    holds: bool
    margin: float


def check_preconditions(params: EmbedParams, tree: BalancedTree) -> list[PreconditionCheck]:
    """Evaluate every constant inequality of the analysis.

    Strict mode raises :class:`PreconditionError` when any fails; practical
    mode returns the full list so callers can log warnings and rely on
    runtime capacity checks instead.
    """
    d, h = params.d, params.h
    eps, s, k = params.eps, params.s, params.depth
    diam = diameter_factor(d, params.p)
    size = tree.size
    checks: list[PreconditionCheck] = []

    def add(name: str, lhs: float, rhs: float, strict_less: bool = False) -> None:
        holds = lhs < rhs if strict_less else lhs <= rhs
        checks.append(PreconditionCheck(name=name, holds=holds, margin=rhs - lhs))

    add("prefix_within_height", params.prefix_layers, h)
    add("block_diameter", diam * float(s) ** (1 - k), params.r)
    relax = params.relax if params.mode == MODE_PRACTICAL else 1.0
    add("cube_diameter", diam * float(s) ** (-k),
        relax * eps * params.r_threshold / 8.0, strict_less=True)
    if params.mode == MODE_STRICT:
        add("eps_range", eps, 1.0, strict_less=True)
    add("prefix_budget", params.prefix_layers, eps * h / 20.0)
    add("depth_budget", k, eps * h / 12.0)
    # tail_mass: 2**(-eps*h/5) <= s**(-k*d) / 2, compared in log2 space.
    add("tail_mass", 1.0 + k * d * math.log2(s), eps * h / 5.0)
    # fluctuation_margin: size**(2/3) < s**(-2kd) * size / 2, cubed to stay in
    # exact integers: 8 * s**(6kd) < size.
    fluct_holds = 8 * s ** (6 * k * d) < size
    fluct_margin = (math.log2(size) - 3.0 - 6.0 * k * d * math.log2(s)) / 3.0
    checks.append(PreconditionCheck("fluctuation_margin", fluct_holds, fluct_margin))
    if params.mode == MODE_STRICT:
        failed = [c for c in checks if not c.holds]
        if failed:
            raise PreconditionError(failed)
    return checks


@dataclass(frozen=True)
class CubePath:
    """Cell walk of one spreading step: start cube, hops, target-block cube."""

    cubes: tuple[CubeId, ...]


@dataclass(frozen=True)
class PathRecord:
    q_cell: tuple[int, ...]
    start_offset: tuple[int, ...]
    cells: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class BlockRecord:
    block_level: int
    t_target: int
    paths: tuple[PathRecord, ...]


@dataclass(frozen=True)
class StepCaps:
    """Hop geometry: every center hop stays below ``hop_cap`` so that any two
    points of consecutive cubes are within the radius."""

    cube_diam: float
    hop_cap: float
    stop_dist: float
    step_len: float
    min_progress: float


def step_caps(params: EmbedParams) -> StepCaps:
    """Derive the hop caps from the constants.

    With an unrelaxed cube diameter this reproduces the textbook step length
    ``(1 + 3 eps/4) * r_threshold``; under relaxation the caps shrink so the
    worst corner-to-corner edge between consecutive cubes still fits in r.
    """
    g = diameter_factor(params.d, params.p) * float(params.s) ** (-params.depth)
    p3_cap = (1.0 + 7.0 * params.eps / 8.0) * params.r_threshold
    hop_cap = min(p3_cap, params.r - g)
    step_len = min((1.0 + 3.0 * params.eps / 4.0) * params.r_threshold,
                   hop_cap - params.s * g / 2.0)
    stop_dist = hop_cap - (params.s - 1) * g / 2.0
    min_progress = step_len - g / 2.0
    if min_progress <= 0:
        raise PlanningError(
            f"radius {params.r} too small for depth {params.depth}: steps cannot progress"
        )
    return StepCaps(cube_diam=g, hop_cap=hop_cap, stop_dist=stop_dist,
                    step_len=step_len, min_progress=min_progress)


def _lp_units(vec: tuple[float, ...], p: float) -> float:
    if p == math.inf:
        return max(abs(v) for v in vec)
    if p == 2.0:
        return math.hypot(*vec)
    if p == 1.0:
        return math.fsum(abs(v) for v in vec)
    return math.fsum(abs(v) ** p for v in vec) ** (1.0 / p)


@lru_cache(maxsize=512)
def _relative_plan(params: EmbedParams, block_level: int,
                   offset: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    """Plan one walk in the frame of the anchor cube of its block level.

    Returns level-`depth` cells relative to the cube's origin; translating by
    any other cube's anchor gives the identical plan there, which keeps every
    block's walks exactly congruent (no per-cube float drift).
    """
    s, k, d = params.s, params.depth, params.d
    ell = block_level
    caps = step_caps(params)
    scale = float(s) ** k  # cell units per coordinate unit
    hop_cap_u = caps.hop_cap * scale
    stop_u = caps.stop_dist * scale
    step_u = caps.step_len * scale
    prog_u = caps.min_progress * scale

    span = s ** (k - ell + 1)
    pad = (span - s) // 2
    start = tuple(pad + o for o in offset)
    # Homothety image of the start cube has cell == offset at level ell; its
    # central block at level k anchors at offset * s**(k-ell) + smaller pad.
    tpad = (s ** (k - ell) - s) // 2
    t_anchor = tuple(o * s ** (k - ell) + tpad for o in offset)
    target_cells = [tuple(t + u for t, u in zip(t_anchor, offs))
                    for offs in product(range(s), repeat=d)]
    t_center = tuple(o * float(s) ** (k - ell) + float(s) ** (k - ell) / 2.0 for o in offset)

    def center(cell: tuple[int, ...]) -> tuple[float, ...]:
        return tuple(c + 0.5 for c in cell)

    def dist(acell: tuple[int, ...], point: tuple[float, ...]) -> float:
        return _lp_units(tuple(a - b for a, b in zip(center(acell), point)), params.p)

    cur = start
    cells = [cur]
    for _ in range(10_000):
        remaining = dist(cur, t_center)
        if remaining <= stop_u:
            break
        c = center(cur)
        direction = tuple((t - x) / remaining for t, x in zip(t_center, c))
        w = tuple(x + step_u * u for x, u in zip(c, direction))
        base = tuple(min(max(int(math.floor(wi)), 0), span - 1) for wi in w)
        candidates = []
        for offs in product((-1, 0, 1), repeat=d):
            cand = tuple(b + o for b, o in zip(base, offs))
            if all(0 <= v < span for v in cand):
                candidates.append(cand)
        valid = []
        for cand in candidates:
            hop = _lp_units(tuple(a - b for a, b in zip(center(cand), c)), params.p)
            new_d = dist(cand, t_center)
            if hop <= hop_cap_u and new_d <= remaining - prog_u:
                valid.append((new_d, cand))
        if valid:
            cur = min(valid)[1]
        else:
            # Float edge case: fall back to the cube holding w itself.
            cur = base
        cells.append(cur)
    else:
        raise PlanningError("spreading walk did not terminate")
    last_center = center(cur)
    final = min(target_cells,
                key=lambda tc: (_lp_units(tuple(a - b for a, b in zip(center(tc), last_center)),
                                          params.p), tc))
    cells.append(final)
    return tuple(cells)


def plan_path(q: CubeId, start: CubeId, block_level: int, params: EmbedParams,
              t_target: int | None = None) -> CubePath:
    """Cube walk from ``start`` (in the finest central block of q) to the
    central block of the homothety image, padded to ``t_target`` cubes by
    repeating the terminal cube.

    Consecutive centers stay within the hop cap of :func:`step_caps`; any two
    points of consecutive cubes are then within the radius.
    """
    s, k = params.s, params.depth
    if q.level != block_level - 1:
        raise ValueError(f"cube level {q.level} must be block level - 1")
    if start.level != k:
        raise ValueError(f"start level {start.level} must equal depth {k}")
    span = s ** (k - block_level + 1)
    anchor = tuple(c * span for c in q.cell)
    pad = (span - s) // 2
    offset = tuple(c - a - pad for c, a in zip(start.cell, anchor))
    if any(not 0 <= o < s for o in offset):
        raise ValueError(f"start cube {start.cell} not in the central block of {q.cell}")
    rel = _relative_plan(params, block_level, offset)
    if t_target is None:
        t_target = len(rel)
    if t_target < len(rel):
        raise ValueError(f"t_target {t_target} below required length {len(rel)}")
    cells = [tuple(a + c for a, c in zip(anchor, cell)) for cell in rel]
    cells.extend([cells[-1]] * (t_target - len(cells)))
    side = s**k
    for cell in cells:
        if any(not 0 <= c < side for c in cell):
            raise PlanningError(f"walk left the domain at {cell}")
    return CubePath(cubes=tuple(CubeId(level=k, cell=cell, base=s) for cell in cells))


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    max_edge: float
    reason: str | None = None


def _layer_distances(child: np.ndarray, parent: np.ndarray, p: float) -> np.ndarray:
    diff = np.abs(child - parent)
    if p == math.inf:
        return diff.max(axis=1)
    if p == 2.0:
        return np.sqrt((diff * diff).sum(axis=1))
    if p == 1.0:
        return diff.sum(axis=1)
    return (diff**p).sum(axis=1) ** (1.0 / p)


def verify_embedding(tree: BalancedTree, ps: PointSet, embedding: np.ndarray,
                     r: float, p: float = 2.0) -> VerifyResult:
    """Independent certificate: the map is a bijection onto the points and
    every parent/child pair sits within distance r.

    Uses only the tree's layer arithmetic and raw coordinates; no embedder
    state is consulted.
    """
    n = tree.size
    if len(embedding) != n:
        return VerifyResult(False, math.nan, f"embedding has {len(embedding)} entries, tree has {n}")
    if ps.n != n:
        return VerifyResult(False, math.nan, f"point set has {ps.n} points, tree has {n}")
    emb = np.asarray(embedding, dtype=np.int64)
    if emb.min() < 0 or emb.max() >= n:
        return VerifyResult(False, math.nan, "vertex id out of range")
    if len(np.unique(emb)) != n:
        return VerifyResult(False, math.nan, "embedding is not injective")
    coords = ps.coords
    max_edge = 0.0
    ok = True
    for layer in range(1, tree.height + 1):
        mult = tree.seq.entries[layer - 1]
        off = tree.layer_offsets[layer]
        size = tree.layer_sizes[layer]
        child_ids = emb[off : off + size]
        parent_pos = tree.layer_offsets[layer - 1] + np.arange(size, dtype=np.int64) // mult
        parent_ids = emb[parent_pos]
        dists = _layer_distances(coords[child_ids], coords[parent_ids], p)
        layer_max = float(dists.max())
        max_edge = max(max_edge, layer_max)
        if layer_max > r:
            ok = False
    return VerifyResult(ok, max_edge, None if ok else f"edge length {max_edge} exceeds {r}")


@dataclass(frozen=True)
class EmbedReport:
    """Outcome of one embedding run, including enough trace to audit it."""

    success: bool
    n: int
    mode: str
    prefix_layers: int
    depth: int
    m_steps: int
    t_targets: tuple[int, ...]
    blocks: tuple[BlockRecord, ...]
    active_per_cube: int | None
    max_edge: float | None
    verified: bool
    failure_stage: str | None = None
    failure_cube: tuple[int, ...] | None = None
    failure_detail: str | None = None
    warnings: tuple[str, ...] = ()
    timings: dict[str, float] = field(default_factory=dict)


class _Depleted(Exception):
    def __init__(self, cube: tuple[int, ...], needed: int, available: int, where: str):
        self.cube = cube
        self.needed = needed
        self.available = available
        self.where = where
        super().__init__(f"cube {cube} has {available} unseen points, needed {needed} ({where})")


class EmbedState:
    """Mutable run state: per-cube pools of unseen vertex ids and the partial
    embedding.  Pools are drawn in ascending vertex id."""

    def __init__(self, tree: BalancedTree, ps: PointSet, params: EmbedParams):
        self.tree = tree
        self.params = params
        s, k, d = params.s, params.depth, params.d
        self.side = s**k
        self.ncubes = self.side**d
        lin = cell_index(ps, k, s)
        counts = np.bincount(lin, minlength=self.ncubes)
        self.starts = np.zeros(self.ncubes + 1, dtype=np.int64)
        np.cumsum(counts, out=self.starts[1:])
        self.order = np.argsort(lin, kind="stable").astype(np.int64)
        self.next = self.starts[:-1].copy()
        self.embedding = np.full(tree.size, -1, dtype=np.int64)

    def cell_tuple(self, lin: int) -> tuple[int, ...]:
        out = []
        rem = int(lin)
        for _ in range(self.params.d):
            out.append(rem % self.side)
            rem //= self.side
        return tuple(reversed(out))

    def lin_of(self, cell: tuple[int, ...]) -> int:
        lin = 0
        for c in cell:
            lin = lin * self.side + c
        return lin

    def draw(self, cube_lin: int, count: int, where: str) -> np.ndarray:
        available = int(self.starts[cube_lin + 1] - self.next[cube_lin])
        if available < count:
            raise _Depleted(self.cell_tuple(cube_lin), count, available, where)
        lo = self.next[cube_lin]
        self.next[cube_lin] = lo + count
        return self.order[lo : lo + count]

    def remaining(self, cube_lin: int) -> int:
        return int(self.starts[cube_lin + 1] - self.next[cube_lin])


def embed(tree: BalancedTree, ps: PointSet, params: EmbedParams) -> tuple[np.ndarray | None, EmbedReport]:
    """Run the three-phase embedding; returns ``(embedding, report)``.

    Algorithmic failures (pool depletion, infeasible star partition, exhausted
    layers, oversize tessellation) come back as a failure report, not an
    exception; usage errors (size mismatch, strict-mode precondition
    violations) raise.
    """
    if ps.n != tree.size:
        raise ValueError(f"point set has {ps.n} points but the tree needs {tree.size}")
    if ps.dim != params.d:
        raise ValueError(f"point set dimension {ps.dim} != params dimension {params.d}")
    if params.h != tree.height:
        raise ValueError("params were built for a different height")

    checks = check_preconditions(params, tree)  # raises in strict mode
    warnings = tuple(
        f"{c.name} fails (margin {c.margin:.6g})" for c in checks if not c.holds
    )
    timings: dict[str, float] = {}

    def fail(stage: str, detail: str, cube: tuple[int, ...] | None = None,
             m: int = 0, t_targets: tuple[int, ...] = (), blocks: tuple[BlockRecord, ...] = ()
             ) -> tuple[None, EmbedReport]:
        return None, EmbedReport(
            success=False, n=ps.n, mode=params.mode, prefix_layers=params.prefix_layers,
            depth=params.depth, m_steps=m, t_targets=t_targets, blocks=blocks,
            active_per_cube=None, max_edge=None, verified=False,
            failure_stage=stage, failure_cube=cube, failure_detail=detail,
            warnings=warnings, timings=timings,
        )

    s, k, d = params.s, params.depth, params.d
    side = s**k
    ncubes = side**d
    if ncubes > _MAX_CELLS:
        return fail("params", f"tessellation has {ncubes} cells (cap {_MAX_CELLS})")
    try:
        step_caps(params)
    except PlanningError as exc:
        return fail("params", str(exc))

    t0 = time.perf_counter()
    state = EmbedState(tree, ps, params)
    timings["index"] = time.perf_counter() - t0

    entries = tree.seq.entries
    offsets = tree.layer_offsets
    sizes = tree.layer_sizes
    m_prime = params.prefix_layers

    # Seed phase: prefix layers into the first central cell, next layer split
    # evenly over the central block.
    t0 = time.perf_counter()
    pad = (side - s) // 2
    q0_cell = (pad,) * d
    q0 = state.lin_of(q0_cell)
    central = [tuple(pad + o for o in offs) for offs in product(range(s), repeat=d)]
    try:
        for layer in range(m_prime):
            ids = state.draw(q0, sizes[layer], f"seed layer {layer}")
            state.embedding[offsets[layer] : offsets[layer] + sizes[layer]] = ids
        split = sizes[m_prime] // (s**d)
        if split * (s**d) != sizes[m_prime]:
            return fail("subroutine1",
                        f"layer {m_prime} of size {sizes[m_prime]} not divisible by {s**d}")
        cohorts: dict[int, tuple[int, int]] = {}
        for j, cell in enumerate(central):
            lin = state.lin_of(cell)
            ids = state.draw(lin, split, f"seed split into {cell}")
            pos = offsets[m_prime] + j * split
            state.embedding[pos : pos + split] = ids
            cohorts[lin] = (j * split, (j + 1) * split)
    except _Depleted as exc:
        return fail("subroutine1", str(exc), exc.cube)
    timings["subroutine1"] = time.perf_counter() - t0

    # Spreading phase: k-1 blocks of lockstep walks.
    t0 = time.perf_counter()
    layer = m_prime
    m_steps = 0
    t_targets: list[int] = []
    block_records: list[BlockRecord] = []
    offset_list = list(product(range(s), repeat=d))
    try:
        for ell in range(1, k):
            span = s ** (k - ell + 1)
            n_axis = side // span
            rel_plans = {o: _relative_plan(params, ell, o) for o in offset_list}
            t_target = max(len(rp) for rp in rel_plans.values())
            if layer + t_target > tree.height:
                return fail("subroutine2",
                            f"tree height exhausted in block {ell}: "
                            f"layer {layer} + {t_target} steps > {tree.height}",
                            m=m_steps, t_targets=tuple(t_targets),
                            blocks=tuple(block_records))
            paths: list[dict] = []
            records: list[PathRecord] = []
            for q_cell in product(range(n_axis), repeat=d):
                anchor = tuple(c * span for c in q_cell)
                for offset in offset_list:
                    rel = rel_plans[offset]
                    cells = [tuple(a + c for a, c in zip(anchor, cell)) for cell in rel]
                    cells.extend([cells[-1]] * (t_target - len(cells)))
                    start_lin = state.lin_of(cells[0])
                    if start_lin not in cohorts:
                        return fail("subroutine2",
                                    f"no active cohort in cube {cells[0]} at block {ell}",
                                    cells[0], m=m_steps, t_targets=tuple(t_targets),
                                    blocks=tuple(block_records))
                    lo, hi = cohorts.pop(start_lin)
                    paths.append({"cells": cells, "lo": lo, "hi": hi,
                                  "image_offset": offset, "q_cell": q_cell, "anchor": anchor})
                    records.append(PathRecord(q_cell=q_cell, start_offset=offset,
                                              cells=tuple(cells)))
            if cohorts:
                stray = state.cell_tuple(next(iter(cohorts)))
                return fail("subroutine2", f"stray cohort in cube {stray} at block {ell}",
                            stray, m=m_steps, t_targets=tuple(t_targets),
                            blocks=tuple(block_records))
            # Interior hops: children of every walk's cohort move to the next cube.
            for step in range(1, t_target):
                mult = entries[layer]
                for path in paths:
                    lo, hi = path["lo"], path["hi"]
                    dst = state.lin_of(path["cells"][step])
                    ids = state.draw(dst, (hi - lo) * mult, f"block {ell} step {step}")
                    pos = offsets[layer + 1] + lo * mult
                    state.embedding[pos : pos + (hi - lo) * mult] = ids
                    path["lo"], path["hi"] = lo * mult, hi * mult
                layer += 1
                m_steps += 1
            # Block-closing step: children split evenly over the image's
            # central block.
            mult = entries[layer]
            new_cohorts: dict[int, tuple[int, int]] = {}
            for path in paths:
                lo, hi = path["lo"], path["hi"]
                total = (hi - lo) * mult
                chunk = total // (s**d)
                if chunk * (s**d) != total:
                    return fail("subroutine2",
                                f"cohort of {total} children not divisible by {s**d}",
                                m=m_steps, t_targets=tuple(t_targets),
                                blocks=tuple(block_records))
                image_anchor = tuple(
                    a + o * (span // s) + (span // s - s) // 2
                    for a, o in zip(path["anchor"], path["image_offset"])
                )
                for j, offs in enumerate(offset_list):
                    cell = tuple(ia + oo for ia, oo in zip(image_anchor, offs))
                    lin = state.lin_of(cell)
                    ids = state.draw(lin, chunk, f"block {ell} closing split")
                    child_lo = lo * mult + j * chunk
                    pos = offsets[layer + 1] + child_lo
                    state.embedding[pos : pos + chunk] = ids
                    if lin in new_cohorts:
                        return fail("subroutine2", f"cohort collision in cube {cell}",
                                    cell, m=m_steps, t_targets=tuple(t_targets),
                                    blocks=tuple(block_records))
                    new_cohorts[lin] = (child_lo, child_lo + chunk)
            cohorts = new_cohorts
            layer += 1
            m_steps += 1
            t_targets.append(t_target)
            block_records.append(BlockRecord(block_level=ell, t_target=t_target,
                                             paths=tuple(records)))
    except _Depleted as exc:
        return fail("subroutine2", str(exc), exc.cube, m=m_steps,
                    t_targets=tuple(t_targets), blocks=tuple(block_records))
    timings["subroutine2"] = time.perf_counter() - t0

    # Equidistribution: every cell now holds the same number of actives.
    if len(cohorts) != ncubes:
        return fail("subroutine2", f"{len(cohorts)} active cells, expected {ncubes}",
                    m=m_steps, t_targets=tuple(t_targets), blocks=tuple(block_records))
    active = sizes[layer] // ncubes
    if any(hi - lo != active for lo, hi in cohorts.values()):
        return fail("subroutine2", "active vertices not equidistributed",
                    m=m_steps, t_targets=tuple(t_targets), blocks=tuple(block_records))
    if active == 0 and layer < tree.height:
        return fail("subroutine2", "no active vertices left per cell",
                    m=m_steps, t_targets=tuple(t_targets), blocks=tuple(block_records))
    if params.mode == MODE_STRICT:
        consumed = tree.layer_offsets[layer] + sizes[layer]
        if 2 * consumed * ncubes > tree.size:
            return fail("subroutine2",
                        f"seed+spread consumed {consumed} vertices, over the "
                        f"strict bound |T| / (2 s^(kd))",
                        m=m_steps, t_targets=tuple(t_targets), blocks=tuple(block_records))

    # Clique phase: star partition of the remaining points over enlarged
    # cells, then greedy layer-by-layer fill per active vertex.
    t0 = time.perf_counter()
    if layer < tree.height:
        unseen_total = ps.n - tree.layer_offsets[layer] - sizes[layer]
        a = unseen_total // ncubes
        if a * ncubes != unseen_total:
            return fail("subroutine3",
                        f"{unseen_total} unseen points not divisible by {ncubes} cells",
                        m=m_steps, t_targets=tuple(t_targets), blocks=tuple(block_records))
        group_cells = [lin for lin in range(ncubes) if state.remaining(lin) > 0]
        group_index = {lin: g for g, lin in enumerate(group_cells)}
        group_sizes = [state.remaining(lin) for lin in group_cells]
        adjacency: list[list[int]] = []
        for lin in range(ncubes):
            cell = state.cell_tuple(lin)
            row = []
            for offs in product((-1, 0, 1), repeat=d):
                nb = tuple(c + o for c, o in zip(cell, offs))
                if all(0 <= v < side for v in nb):
                    g = group_index.get(state.lin_of(nb))
                    if g is not None:
                        row.append(g)
            adjacency.append(sorted(set(row)))
        assignment = assignment_counts(ncubes, group_sizes, adjacency, a)
        if assignment is None:
            return fail("subroutine3", "star partition infeasible (Hall violation)",
                        m=m_steps, t_targets=tuple(t_targets), blocks=tuple(block_records))
        # Per-active descendant counts per layer.
        per_layer: list[int] = []
        c = 1
        for i in range(layer, tree.height):
            c *= entries[i]
            per_layer.append(c)
        d_per = sum(per_layer)
        if a != active * d_per:
            return fail("subroutine3",
                        f"{a} leaves per cell != {active} actives x {d_per} descendants",
                        m=m_steps, t_targets=tuple(t_targets), blocks=tuple(block_records))
        try:
            for lin in range(ncubes):
                parts = [state.draw(group_cells[g], cnt, "clique fill")
                         for g, cnt in assignment[lin]]
                leaves = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
                lo, hi = cohorts[lin]
                grid = leaves.reshape(hi - lo, d_per)
                col = 0
                for depth_i, cnt in enumerate(per_layer):
                    i = layer + 1 + depth_i
                    block = grid[:, col : col + cnt].reshape(-1)
                    pos = offsets[i] + lo * cnt
                    state.embedding[pos : pos + (hi - lo) * cnt] = block
                    col += cnt
        except _Depleted as exc:
            return fail("subroutine3", str(exc), exc.cube, m=m_steps,
                        t_targets=tuple(t_targets), blocks=tuple(block_records))
    timings["subroutine3"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    result = verify_embedding(tree, ps, state.embedding, params.r, params.p)
    timings["verify"] = time.perf_counter() - t0
    report = EmbedReport(
        success=result.ok, n=ps.n, mode=params.mode, prefix_layers=m_prime,
        depth=k, m_steps=m_steps, t_targets=tuple(t_targets),
        blocks=tuple(block_records), active_per_cube=active,
        max_edge=result.max_edge, verified=result.ok,
        failure_stage=None if result.ok else "verify",
        failure_detail=result.reason, warnings=warnings, timings=timings,
    )
    return (state.embedding if result.ok else None), report


def save_embedding(tree: BalancedTree, embedding: np.ndarray, r: float,
                   path: str | Path) -> None:
    """Text format: header ``h n r``, then one ``layer index vertex_id`` line
    per tree position in layer order."""
    with open(path, "w") as fh:
        fh.write(f"{tree.height} {tree.size} {r:.17g}\n")
        for layer in range(tree.height + 1):
            off = tree.layer_offsets[layer]
            for idx in range(tree.layer_sizes[layer]):
                fh.write(f"{layer} {idx} {embedding[off + idx]}\n")


def load_embedding(path: str | Path, tree: BalancedTree) -> tuple[float, np.ndarray]:
    """Read an embedding file back into flat layer order; returns (r, embedding)."""
    p = str(path)
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError("empty embedding file", p, 1)
    head = lines[0].split()
    if len(head) != 3:
        raise FormatError("expected header 'h n r'", p, 1)
    try:
        h, n, r = int(head[0]), int(head[1]), float(head[2])
    except ValueError:
        raise FormatError("bad header values", p, 1) from None
    if h != tree.height or n != tree.size:
        raise FormatError(f"header ({h}, {n}) does not match the tree "
                          f"({tree.height}, {tree.size})", p, 1)
    if len(lines) < 1 + n:
        raise FormatError(f"expected {n} rows, found {len(lines) - 1}", p, len(lines))
    emb = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        parts = lines[1 + i].split()
        if len(parts) != 3:
            raise FormatError("expected 'layer index vertex_id'", p, 2 + i)
        try:
            layer, idx, vid = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise FormatError("row fields must be integers", p, 2 + i) from None
        if not 0 <= layer <= tree.height or not 0 <= idx < tree.layer_sizes[layer]:
            raise FormatError(f"position ({layer}, {idx}) out of range", p, 2 + i)
        pos = tree.layer_offsets[layer] + idx
        if emb[pos] != -1:
            raise FormatError(f"duplicate position ({layer}, {idx})", p, 2 + i)
        emb[pos] = vid
    return r, emb
