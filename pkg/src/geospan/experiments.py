"""Monte Carlo harness around the embedder and the below-threshold witness.

A sweep probes radius multipliers on both sides of the threshold with shared
seeds: each trial owns one point sample reused across multipliers, so success
curves inherit the monotone coupling of the underlying graph sequence.  Below
the threshold the harness records diameter certificates; at or above it, it
runs the embedder in practical mode and certifies every success with the
independent verifier.

Trial seed = base seed XOR trial index, so any record can be reproduced in
isolation.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass

import numpy as np

from .embedder import EmbedReport, PreconditionError, build_params, embed, threshold_radius
from .pointcloud import GeometricGraph, build_graph, occupancy, sample_uniform
from .trees import DegreeSequence, build_tree


@dataclass(frozen=True)
class WitnessResult:
    """Outcome of the corner-to-corner diameter test.

    ``certified`` means the two corner-nearest points provably need more than
    ``2h`` hops, which rules out every spanning tree of height h (its diameter
    is 2h).  ``required_hops`` is ``ceil(dist/r)`` when the metric bound alone
    decides, else the exact BFS hop count (None when unreachable).
    """

    certified: bool
    u: int
    v: int
    corner_distance: float
    required_hops: int | None
    method: str


def diameter_witness(g: GeometricGraph, h: int, d: int | None = None) -> WitnessResult:
    """Certify that no height-h tree spans g, or report inconclusive.

    u minimizes the distance to the origin corner, v to the all-ones corner.
    Each edge covers at most r, so ``hops(u, v) >= dist(u, v) / r``; when that
    alone exceeds 2h the certificate needs no search, otherwise a BFS bounded
    at depth 2h settles ``hops > 2h`` exactly.
    """
    if d is not None and d != g.points.dim:
        raise ValueError(f"dimension mismatch: graph is {g.points.dim}, got {d}")
    if h < 1:
        raise ValueError("need h >= 1")
    coords = g.points.coords
    dim = g.points.dim
    p = g.p
    diff_lo = np.abs(coords)
    diff_hi = np.abs(1.0 - coords)
    if p == math.inf:
        d_lo, d_hi = diff_lo.max(axis=1), diff_hi.max(axis=1)
    elif p == 2.0:
        d_lo = np.sqrt((diff_lo * diff_lo).sum(axis=1))
        d_hi = np.sqrt((diff_hi * diff_hi).sum(axis=1))
    elif p == 1.0:
        d_lo, d_hi = diff_lo.sum(axis=1), diff_hi.sum(axis=1)
    else:
        d_lo = (diff_lo**p).sum(axis=1) ** (1.0 / p)
        d_hi = (diff_hi**p).sum(axis=1) ** (1.0 / p)
    u = int(np.argmin(d_lo))
    v = int(np.argmin(d_hi))
    dist_uv = float(
        np.abs(coords[u] - coords[v]).max() if p == math.inf
        else np.linalg.norm(coords[u] - coords[v], ord=p)
    )
    bound = 2 * h
    if dist_uv > bound * g.radius:
        return WitnessResult(certified=True, u=u, v=v, corner_distance=dist_uv,
                             required_hops=math.ceil(dist_uv / g.radius), method="metric-bound")
    hops = g.hop_distance(u, v, max_depth=bound)
    if hops is None:
        # Not reached within 2h levels (or disconnected): more than 2h hops.
        return WitnessResult(certified=True, u=u, v=v, corner_distance=dist_uv,
                             required_hops=None, method="bfs")
    return WitnessResult(certified=False, u=u, v=v, corner_distance=dist_uv,
                         required_hops=hops, method="bfs")


@dataclass(frozen=True)
class SweepConfig:
    d: int
    seq: DegreeSequence
    p: float
    multipliers: tuple[float, ...]
    trials: int
    base_seed: int
    mode: str = "practical"
    relax: float = 4.0
    workers: int = 1
    record_timings: bool = False

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if not self.multipliers:
            raise ValueError("need at least one multiplier")
        if any(m <= 0 for m in self.multipliers):
            raise ValueError("multipliers must be positive")
        if list(self.multipliers) != sorted(self.multipliers):
            raise ValueError("multipliers must be sorted ascending")


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    r_mult: float
    outcome: str
    m_steps: int | None
    max_edge: float | None
    runtime_ms: int


@dataclass(frozen=True)
class TrialOutcome:
    """One (trial, multiplier) result with the full embed report when present."""

    record: TrialRecord
    report: EmbedReport | None
    witness: WitnessResult | None


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    r_threshold: float
    records: tuple[TrialRecord, ...]

    def frequency(self, mult: float) -> float:
        hits = [r for r in self.records if r.r_mult == mult]
        succ = sum(1 for r in hits if r.outcome == "success")
        return succ / len(hits) if hits else math.nan

    def frequencies(self) -> list[tuple[float, float]]:
        return [(m, self.frequency(m)) for m in self.config.multipliers]


def trial_seed(base_seed: int, index: int) -> int:
    return (base_seed ^ index) & 0xFFFFFFFFFFFFFFFF


def run_embed_trial(seq: DegreeSequence, d: int, r_mult: float, seed: int,
                    p: float = 2.0, mode: str = "practical",
                    relax: float = 4.0) -> TrialOutcome:
    """Sample |T| points from ``seed`` and attempt one embedding at
    ``r = r_mult * r_threshold`` (so ``eps = r_mult - 1``)."""
    tree = build_tree(seq)
    started = time.perf_counter()
    try:
        params = build_params(seq, d, eps=r_mult - 1.0, p=p, mode=mode, relax=relax)
    except ValueError as exc:
        ms = int((time.perf_counter() - started) * 1000)
        rec = TrialRecord(seed=seed, r_mult=r_mult, outcome="embed_fail_params",
                          m_steps=None, max_edge=None, runtime_ms=ms)
        return TrialOutcome(record=rec, report=None, witness=None)
    ps = sample_uniform(tree.size, d, seed)
    try:
        embedding, report = embed(tree, ps, params)
    except PreconditionError:
        ms = int((time.perf_counter() - started) * 1000)
        rec = TrialRecord(seed=seed, r_mult=r_mult, outcome="embed_fail_preconditions",
                          m_steps=None, max_edge=None, runtime_ms=ms)
        return TrialOutcome(record=rec, report=None, witness=None)
    ms = int((time.perf_counter() - started) * 1000)
    if report.success:
        outcome = "success"
    else:
        outcome = f"embed_fail_{report.failure_stage}"
    rec = TrialRecord(seed=seed, r_mult=r_mult, outcome=outcome,
                      m_steps=report.m_steps, max_edge=report.max_edge, runtime_ms=ms)
    return TrialOutcome(record=rec, report=report, witness=None)


def _run_trial(cfg: SweepConfig, index: int) -> list[TrialRecord]:
    seed = trial_seed(cfg.base_seed, index)
    tree = build_tree(cfg.seq)
    r_thr = threshold_radius(cfg.d, cfg.seq.height, cfg.p)
    ps = sample_uniform(tree.size, cfg.d, seed)
    records = []
    for mult in cfg.multipliers:
        started = time.perf_counter()
        if mult < 1.0:
            g = build_graph(ps, mult * r_thr, cfg.p)
            wit = diameter_witness(g, cfg.seq.height)
            outcome = "witness_absent" if wit.certified else "witness_inconclusive"
            ms = int((time.perf_counter() - started) * 1000)
            records.append(TrialRecord(seed=seed, r_mult=mult, outcome=outcome,
                                       m_steps=None, max_edge=None, runtime_ms=ms))
            continue
        try:
            params = build_params(cfg.seq, cfg.d, eps=mult - 1.0, p=cfg.p,
                                  mode=cfg.mode, relax=cfg.relax)
        except ValueError:
            ms = int((time.perf_counter() - started) * 1000)
            records.append(TrialRecord(seed=seed, r_mult=mult, outcome="embed_fail_params",
                                       m_steps=None, max_edge=None, runtime_ms=ms))
            continue
        try:
            _, report = embed(tree, ps, params)
        except PreconditionError:
            ms = int((time.perf_counter() - started) * 1000)
            records.append(TrialRecord(seed=seed, r_mult=mult,
                                       outcome="embed_fail_preconditions",
                                       m_steps=None, max_edge=None, runtime_ms=ms))
            continue
        ms = int((time.perf_counter() - started) * 1000)
        outcome = "success" if report.success else f"embed_fail_{report.failure_stage}"
        records.append(TrialRecord(seed=seed, r_mult=mult, outcome=outcome,
                                   m_steps=report.m_steps, max_edge=report.max_edge,
                                   runtime_ms=ms))
    return records


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """Run every (trial, multiplier) pair; deterministic given the base seed.

    Trials are independent and may run in worker processes; records are
    aggregated in (trial, multiplier) order regardless of completion order.
    """
    r_thr = threshold_radius(cfg.d, cfg.seq.height, cfg.p)
    if cfg.workers > 1:
        import multiprocessing as mp

        with mp.Pool(cfg.workers) as pool:
            per_trial = pool.starmap(_run_trial, [(cfg, i) for i in range(cfg.trials)])
    else:
        per_trial = [_run_trial(cfg, i) for i in range(cfg.trials)]
    records = [rec for trial in per_trial for rec in trial]
    return SweepResult(config=cfg, r_threshold=r_thr, records=tuple(records))


@dataclass(frozen=True)
class OccupancyTrials:
    """Violation rate of a concentration band over seeded samples."""

    n: int
    expected_per_cube: float
    band_width: float
    violation_rate: float
    union_bound: float
    violating_trials: tuple[int, ...]


def occupancy_trials(n: int, d: int, s: int, k: int, trials: int, base_seed: int,
                     band_width: float | None = None) -> OccupancyTrials:
    """Frequency of trials where some cube leaves ``n * s**(-k*d) +- band``.

    The default band is ``n**(2/3)``; the matching union bound is
    ``2 * s**(k*d) * exp(-n**(1/3) / 3)``.
    """
    cubes = s ** (k * d)
    if cubes > n:
        raise ValueError(f"s**(k*d) = {cubes} exceeds n = {n}")
    mean = n / cubes
    width = float(n) ** (2.0 / 3.0) if band_width is None else float(band_width)
    bad = []
    for t in range(trials):
        ps = sample_uniform(n, d, trial_seed(base_seed, t))
        table = occupancy(ps, k, s)
        counts = np.zeros(cubes, dtype=np.int64)
        for q, c in table.counts.items():
            lin = 0
            for cc in q.cell:
                lin = lin * (s**k) + cc
            counts[lin] = c
        if np.any(np.abs(counts - mean) > width):
            bad.append(t)
    bound = 2.0 * cubes * math.exp(-float(n) ** (1.0 / 3.0) / 3.0)
    return OccupancyTrials(n=n, expected_per_cube=mean, band_width=width,
                           violation_rate=len(bad) / trials, union_bound=bound,
                           violating_trials=tuple(bad))


def empirical_width(sweep: SweepResult, lo: float = 0.1, hi: float = 0.9) -> float:
    """Piecewise-linear estimate of the transition window, in radius units.

    Interpolates the multipliers where the success frequency crosses ``lo``
    and ``hi`` and scales the difference by the threshold radius.  Raises when
    the sweep does not bracket a crossing.
    """
    if not 0 < lo < hi < 1:
        raise ValueError("need 0 < lo < hi < 1")
    pts = sweep.frequencies()
    mults = [m for m, _ in pts]
    freqs = [f for _, f in pts]

    def crossing(level: float) -> float:
        if freqs[0] > level:
            raise ValueError(f"sweep does not bracket the {level} crossing from below")
        for i in range(len(freqs) - 1):
            if freqs[i] <= level <= freqs[i + 1] and freqs[i + 1] > freqs[i]:
                frac = (level - freqs[i]) / (freqs[i + 1] - freqs[i])
                return mults[i] + frac * (mults[i + 1] - mults[i])
        raise ValueError(f"sweep does not bracket the {level} crossing")

    return (crossing(hi) - crossing(lo)) * sweep.r_threshold


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson 95% score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("need at least one trial")
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class MicroSoundness:
    """Cross-check of the fast paths against the exact oracle at tiny scale."""

    trials: int
    embed_successes: int
    witness_certificates: int
    contradictions: tuple[str, ...]


# Balanced degree sequences with at most 12 vertices.
_MICRO_SEQS: tuple[tuple[int, ...], ...] = (
    (2,), (3,), (4,), (5,), (6,), (7,), (8,), (9,), (10,), (11,),
    (2, 2), (2, 3), (3, 2), (2, 4),
)


def micro_soundness(trials: int, base_seed: int) -> MicroSoundness:
    """Random micro instances: every embed success must be confirmed by the
    brute-force oracle, every witness certificate by oracle absence."""
    import random

    from .oracle import ExplicitTree, contains_spanning_tree

    rng = random.Random(base_seed)
    successes = 0
    certificates = 0
    contradictions: list[str] = []
    for t in range(trials):
        entries = rng.choice(_MICRO_SEQS)
        seq = DegreeSequence(entries=entries, bound=max(entries))
        tree = build_tree(seq)
        d = rng.choice((1, 2))
        seed = trial_seed(base_seed, 7919 * t + 1)
        ps = sample_uniform(tree.size, d, seed)
        r_thr = threshold_radius(d, seq.height, 2.0)
        explicit = ExplicitTree.from_balanced(entries)
        if rng.random() < 0.5:
            mult = rng.choice((3.0, 6.0, 8.0, 12.0))
            try:
                params = build_params(seq, d, eps=mult - 1.0, mode="practical", relax=4.0)
            except ValueError:
                continue
            embedding, report = embed(tree, ps, params)
            if report.success:
                successes += 1
                g = build_graph(ps, params.r, params.p)
                if not contains_spanning_tree(g, explicit):
                    contradictions.append(
                        f"trial {t}: embed succeeded but oracle rejects (seq={entries}, "
                        f"d={d}, mult={mult}, seed={seed})")
        else:
            mult = rng.choice((0.2, 0.4, 0.6))
            g = build_graph(ps, mult * r_thr, 2.0)
            wit = diameter_witness(g, seq.height)
            if wit.certified:
                certificates += 1
                if contains_spanning_tree(g, explicit):
                    contradictions.append(
                        f"trial {t}: witness certified absence but oracle embeds "
                        f"(seq={entries}, d={d}, mult={mult}, seed={seed})")
    return MicroSoundness(trials=trials, embed_successes=successes,
                          witness_certificates=certificates,
                          contradictions=tuple(contradictions))


_CSV_COLUMNS = ["seed", "d", "h", "s_spec", "p", "eps", "r_mult", "mode",
                "outcome", "m_steps", "max_edge", "runtime_ms"]


def _seq_spec(seq: DegreeSequence) -> str:
    if len(set(seq.entries)) == 1:
        return str(seq.entries[0])
    return ",".join(str(s) for s in seq.entries)


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.17g}"


def write_sweep_csv(result: SweepResult, path: str, timings: bool = False) -> None:
    """One row per (trial, multiplier).  Timings are zeroed unless requested,
    so identical configurations produce byte-identical files."""
    cfg = result.config
    spec = _seq_spec(cfg.seq)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for rec in result.records:
            # eps only exists for embed attempts (r = (1 + eps) * r*).
            eps = "" if rec.r_mult < 1.0 else _fmt(rec.r_mult - 1.0)
            writer.writerow([
                rec.seed, cfg.d, cfg.seq.height, spec, _fmt(cfg.p),
                eps, _fmt(rec.r_mult), cfg.mode, rec.outcome,
                "" if rec.m_steps is None else rec.m_steps,
                _fmt(rec.max_edge),
                rec.runtime_ms if timings else 0,
            ])


def write_summary_json(result: SweepResult, path: str,
                       width_lo: float = 0.1, width_hi: float = 0.9) -> None:
    """Per-multiplier frequencies with Wilson intervals plus the empirical
    width when the sweep brackets it."""
    cfg = result.config
    per_mult = []
    for mult in cfg.multipliers:
        hits = [r for r in result.records if r.r_mult == mult]
        succ = sum(1 for r in hits if r.outcome == "success")
        low, high = wilson_interval(succ, len(hits))
        per_mult.append({
            "r_mult": mult,
            "trials": len(hits),
            "successes": succ,
            "frequency": succ / len(hits),
            "wilson_low": low,
            "wilson_high": high,
        })
    try:
        width = empirical_width(result, width_lo, width_hi)
    except ValueError:
        width = None
    payload = {
        "d": cfg.d,
        "h": cfg.seq.height,
        "s_spec": _seq_spec(cfg.seq),
        "p": cfg.p if cfg.p != math.inf else "inf",
        "mode": cfg.mode,
        "relax": cfg.relax,
        "trials": cfg.trials,
        "base_seed": cfg.base_seed,
        "r_threshold": result.r_threshold,
        "multipliers": per_mult,
        "empirical_width": width,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
