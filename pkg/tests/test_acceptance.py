"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion
lines.  The embedding criteria run 100 seeded trials at n = 2,097,151 per
dimension and take a few minutes wall-clock on one core.
"""

import math
import random
import time
from dataclasses import dataclass
from itertools import product

import pytest

from checkers import block_violations, step_budget_ok
from geospan.cli import main as cli_main
from geospan.embedder import (
    EmbedParams, build_params, embed, tessellation_depth, threshold_radius,
    verify_embedding,
)
from geospan.experiments import (
    diameter_witness, micro_soundness, occupancy_trials, trial_seed,
)
from geospan.matching import (
    BipartiteInstance, find_hall_violation, star_partition,
    star_partition_by_duplication, validate_star_partition,
)
from geospan.oracle import tessellation_depth_scan
from geospan.pointcloud import build_graph, sample_uniform
from geospan.trees import DegreeSequence, build_tree

TRIALS = 100
HEIGHT = 20
EPS = 7.0          # r = 8 * r_threshold
RELAX = 4.0
TRIAL_BUDGET_S = 120.0


@dataclass(frozen=True)
class EmbedTrial:
    seed: int
    success: bool
    independently_verified: bool
    max_edge: float | None
    m_steps: int
    blocks: tuple
    depth: int
    elapsed: float
    failure: str | None


def _run_embed_batch(d: int, base_seed: int) -> tuple[EmbedParams, list[EmbedTrial]]:
    seq = DegreeSequence.uniform(2, HEIGHT)
    tree = build_tree(seq)
    params = build_params(seq, d, eps=EPS, mode="practical", relax=RELAX)
    trials = []
    for i in range(TRIALS):
        seed = trial_seed(base_seed, i)
        t0 = time.perf_counter()
        ps = sample_uniform(tree.size, d, seed)
        embedding, report = embed(tree, ps, params)
        verified = False
        max_edge = None
        if report.success:
            # Independent certificate, recomputed from the raw coordinates.
            check = verify_embedding(tree, ps, embedding, params.r, params.p)
            verified = check.ok
            max_edge = check.max_edge
        elapsed = time.perf_counter() - t0
        trials.append(EmbedTrial(
            seed=seed, success=report.success, independently_verified=verified,
            max_edge=max_edge, m_steps=report.m_steps, blocks=report.blocks,
            depth=report.depth, elapsed=elapsed,
            failure=report.failure_stage,
        ))
    return params, trials


@pytest.fixture(scope="session")
def embed_batch_d1():
    return _run_embed_batch(1, base_seed=1)


@pytest.fixture(scope="session")
def embed_batch_d2():
    return _run_embed_batch(2, base_seed=2)


def test_criterion_1_above_threshold_embedding(embed_batch_d1, embed_batch_d2):
    """d in {1, 2}, uniform 2-ary, h=20, practical mode, r = 8 r*: at least
    90/100 (d=1) and 80/100 (d=2) verified successes, each trial within
    120 s."""
    results = {}
    for d, (params, trials), floor in ((1, embed_batch_d1, 90), (2, embed_batch_d2, 80)):
        verified = sum(1 for t in trials if t.success and t.independently_verified)
        slowest = max(t.elapsed for t in trials)
        results[d] = (verified, slowest)
        assert all(t.independently_verified for t in trials if t.success), \
            f"d={d}: embedder reported success that the verifier rejected"
        assert all(t.max_edge <= params.r for t in trials if t.success)
        assert verified >= floor, f"d={d}: only {verified}/{TRIALS} verified successes"
        assert slowest <= TRIAL_BUDGET_S, f"d={d}: slowest trial took {slowest:.1f}s"
    print(f"\n[criterion 1] PASS: verified successes d=1: {results[1][0]}/{TRIALS} "
          f"(max {results[1][1]:.1f}s/trial), d=2: {results[2][0]}/{TRIALS} "
          f"(max {results[2][1]:.1f}s/trial)")


def test_criterion_2_below_threshold_witness():
    """d=2, h=20, r = 0.5 r*: the diameter witness certifies non-containment
    in at least 95/100 trials."""
    seq = DegreeSequence.uniform(2, HEIGHT)
    tree = build_tree(seq)
    r = 0.5 * threshold_radius(2, HEIGHT)
    certified = 0
    hops_needed = []
    for i in range(TRIALS):
        ps = sample_uniform(tree.size, 2, trial_seed(3, i))
        wit = diameter_witness(build_graph(ps, r, 2.0), HEIGHT)
        if wit.certified:
            certified += 1
            if wit.required_hops is not None:
                hops_needed.append(wit.required_hops)
    assert certified >= 95, f"only {certified}/{TRIALS} certified"
    assert min(hops_needed) > 2 * HEIGHT
    print(f"[criterion 2] PASS: {certified}/{TRIALS} certified absent "
          f"(hop requirement >= {min(hops_needed)} > {2 * HEIGHT})")


def test_criterion_3_depth_constant_grid():
    """Closed-form depth equals the linear scan on a 1000-point random
    parameter grid, and is non-increasing in the degree on every point."""
    rng = random.Random(20260808)
    checked = 0
    for _ in range(1000):
        d = rng.randint(1, 4)
        h = rng.randint(2, 2000)
        eps = rng.uniform(0.02, 9.0)
        relax = rng.choice([1.0, 2.0, 4.0, 8.0])
        p = rng.choice([1.0, 1.5, 2.0, 3.0, math.inf])
        mult = rng.uniform(1.0 + 1e-9, 12.0)
        r_thr = threshold_radius(d, h, p)
        r = mult * r_thr
        bound = rng.randint(2, 8)
        depths = []
        for s in range(2, bound + 1):
            fast = tessellation_depth(s, d, eps, r, r_thr, relax, p)
            slow = tessellation_depth_scan(s, d, eps, r, r_thr, relax, p)
            assert fast == slow, (s, d, eps, r, r_thr, relax, p)
            depths.append(fast)
        assert depths == sorted(depths, reverse=True), "depth not non-increasing in s"
        checked += 1
    assert checked == 1000
    print(f"[criterion 3] PASS: closed form == scan on {checked} grid points, "
          f"non-increasing in s on every point")


def test_criterion_4_star_partition_cross_validation():
    """Flow, duplication and the exhaustive Hall check agree on feasibility on
    every instance with |A| <= 3, a in {1, 2}, and on 10^4 random instances
    with |A| <= 8; every returned partition passes the validator."""
    t0 = time.perf_counter()
    exhaustive = 0
    for a_size, a in product((1, 2, 3), (1, 2)):
        b_size = a * a_size
        for bits in range(1 << (a_size * b_size)):
            rows = tuple(
                tuple(b for b in range(b_size) if bits >> (i * b_size + b) & 1)
                for i in range(a_size)
            )
            inst = BipartiteInstance(a_size=a_size, b_size=b_size, adjacency=rows)
            flow = star_partition(inst, a)
            dup = star_partition_by_duplication(inst, a)
            hall = find_hall_violation(inst, a)
            assert (flow is None) == (dup is None) == (hall is not None), (a_size, a, bits)
            if flow is not None:
                assert validate_star_partition(inst, a, flow)
                assert validate_star_partition(inst, a, dup)
            exhaustive += 1
    rng = random.Random(4242)
    for _ in range(10_000):
        a_size = rng.randint(1, 8)
        a = rng.randint(1, 3)
        b_size = a * a_size
        density = rng.uniform(0.1, 0.95)
        rows = tuple(
            tuple(b for b in range(b_size) if rng.random() < density)
            for _ in range(a_size)
        )
        inst = BipartiteInstance(a_size=a_size, b_size=b_size, adjacency=rows)
        flow = star_partition(inst, a)
        dup = star_partition_by_duplication(inst, a)
        hall = find_hall_violation(inst, a)
        assert (flow is None) == (dup is None) == (hall is not None)
        if flow is not None:
            assert validate_star_partition(inst, a, flow)
    elapsed = time.perf_counter() - t0
    assert elapsed <= 60.0, f"cross-validation took {elapsed:.1f}s"
    print(f"[criterion 4] PASS: {exhaustive} exhaustive + 10000 random instances "
          f"agree across flow/duplication/Hall in {elapsed:.1f}s")


def test_criterion_5_path_plans(embed_batch_d1, embed_batch_d2):
    """Every recorded walk of every accepted run satisfies its contract
    exactly, and the per-step budget fits inside the radius."""
    paths_checked = 0
    for params, trials in (embed_batch_d1, embed_batch_d2):
        assert step_budget_ok(params)
        for trial in trials:
            if not trial.success:
                continue
            for block in trial.blocks:
                violations = block_violations(block, params)
                assert violations == [], violations
                paths_checked += len(block.paths)
    assert paths_checked > 0
    print(f"[criterion 5] PASS: {paths_checked} recorded walks satisfy the "
          f"start/terminal/hop contract; zero violations")


def test_criterion_6_step_bound(embed_batch_d1, embed_batch_d2):
    """Recorded spreading step counts stay within
    (k-1) + ceil((sqrt(d)/2) / ((1+5eps/8) r*)) + (k-1) on every run."""
    worst = []
    for d, (params, trials) in ((1, embed_batch_d1), (2, embed_batch_d2)):
        bound = ((params.depth - 1)
                 + math.ceil((math.sqrt(d) / 2.0)
                             / ((1.0 + 5.0 * EPS / 8.0) * params.r_threshold))
                 + (params.depth - 1))
        for trial in trials:
            if trial.success:
                assert trial.m_steps <= bound, (d, trial.m_steps, bound)
        worst.append((d, max(t.m_steps for t in trials if t.success), bound))
    print(f"[criterion 6] PASS: step counts within bound: "
          + ", ".join(f"d={d}: m={m} <= {b}" for d, m, b in worst))


def test_criterion_7_occupancy_concentration():
    """n=2^17, d=1, s=2, k=4, 100 trials: no cube ever leaves
    n/16 +- n^(2/3); a band at the per-cube standard-deviation scale is
    violated, so the test has power."""
    n = 2**17
    wide = occupancy_trials(n, 1, 2, 4, trials=TRIALS, base_seed=7)
    assert wide.violation_rate == 0.0, f"violations in trials {wide.violating_trials}"
    # Tightened band: sqrt of the per-cube mean (about one standard
    # deviation), read as the per-cube analogue of the n^(1/2) scale.
    tight = occupancy_trials(n, 1, 2, 4, trials=TRIALS, base_seed=7,
                             band_width=math.sqrt(n / 16))
    assert tight.violation_rate > 0.0, "tightened band shows no violations"
    print(f"[criterion 7] PASS: 0/{TRIALS} violations at +-n^(2/3) "
          f"(union bound {wide.union_bound:.2e}); tightened band violated in "
          f"{tight.violation_rate:.0%} of trials")


def test_criterion_8_micro_scale_soundness():
    """500 random micro instances (n <= 12): embed successes confirmed by the
    exact oracle, witness certificates confirmed by oracle absence."""
    res = micro_soundness(500, base_seed=42)
    assert res.contradictions == (), res.contradictions
    assert res.embed_successes > 0 and res.witness_certificates > 0
    print(f"[criterion 8] PASS: {res.embed_successes} embed successes and "
          f"{res.witness_certificates} witness certificates over {res.trials} "
          f"micro trials; zero contradictions")


def test_criterion_9_cli_determinism(tmp_path, capsys):
    """Any CLI command rerun with identical flags produces byte-identical
    files and stdout."""
    cases = [
        (["sample", "--n", "500", "--d", "2", "--seed", "77", "--out"], "pts.txt"),
        (["embed", "--d", "1", "--sary", "2", "--height", "10", "--eps", "7",
          "--mode", "practical", "--relax", "4", "--seed", "5", "--out"], "emb.txt"),
        (["sweep", "--d", "1", "--sary", "2", "--height", "6",
          "--r-mults", "0.5,8", "--trials", "3", "--seed", "9", "--out"], "sweep"),
        (["witness", "--d", "2", "--sary", "2", "--height", "8",
          "--r-mult", "0.5", "--seed", "4"], None),
    ]
    for argv, out_name in cases:
        outputs = []
        for run_id in ("x", "y"):
            if out_name is None:
                code = cli_main(list(argv))
                stdout = capsys.readouterr().out
                files = b""
            else:
                target = tmp_path / f"{run_id}_{out_name}"
                code = cli_main(list(argv) + [str(target)])
                stdout = capsys.readouterr().out.replace(str(target), "OUT")
                files = b""
                base = target if target.exists() else None
                for suffix in ("", ".csv", ".json"):
                    candidate = tmp_path / f"{run_id}_{out_name}{suffix}"
                    if candidate.exists():
                        files += candidate.read_bytes()
            assert code == 0
            outputs.append((stdout, files))
        assert outputs[0] == outputs[1], f"nondeterministic output for {argv[0]}"
    print("[criterion 9] PASS: sample/embed/sweep/witness byte-identical on reruns")
