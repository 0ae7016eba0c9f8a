import math
import random

import numpy as np
import pytest

from geospan.embedder import tessellation_depth, threshold_radius
from geospan.oracle import ExplicitTree, contains_spanning_tree, tessellation_depth_scan
from geospan.pointcloud import PointSet, build_graph, sample_uniform


def line_graph(xs, r):
    coords = np.array(xs, dtype=np.float64).reshape(-1, 1)
    return build_graph(PointSet(dim=1, coords=coords), r)


class TestExplicitTree:
    def test_from_balanced_binary(self):
        t = ExplicitTree.from_balanced((2, 2))
        assert t.n == 7
        assert t.parents == (-1, 0, 0, 1, 1, 2, 2)

    def test_rejects_cycle(self):
        with pytest.raises(ValueError):
            ExplicitTree(n=3, parents=(-1, 2, 1))

    def test_rejects_non_root(self):
        with pytest.raises(ValueError):
            ExplicitTree(n=2, parents=(0, 0))


class TestContainment:
    def test_complete_graph_contains_everything(self):
        ps = sample_uniform(7, 2, 3)
        g = build_graph(ps, math.sqrt(2), 2.0)
        assert contains_spanning_tree(g, ExplicitTree.from_balanced((2, 2)))
        assert contains_spanning_tree(g, ExplicitTree.from_balanced((6,)))

    def test_empty_graph_contains_nothing(self):
        g = line_graph([0.0, 0.3, 0.6, 0.9], 0.01)
        assert not contains_spanning_tree(g, ExplicitTree.from_balanced((3,)))

    def test_star_needs_a_hub(self):
        # Max degree on this line with r=0.1 is 2; a 3-star cannot embed.
        g = line_graph([0.0, 0.1, 0.2, 0.3], 0.1)
        assert not contains_spanning_tree(g, ExplicitTree.from_balanced((3,)))

    def test_spanning_star_found(self):
        g = line_graph([0.0, 0.1, 0.2, 0.3], 0.2)
        assert contains_spanning_tree(g, ExplicitTree.from_balanced((3,)))

    def test_size_mismatch_is_no(self):
        g = line_graph([0.0, 0.1], 1.0)
        assert not contains_spanning_tree(g, ExplicitTree.from_balanced((2,)))

    def test_cap_enforced(self):
        ps = sample_uniform(15, 1, 0)
        g = build_graph(ps, 1.0)
        big = ExplicitTree(n=15, parents=tuple([-1] + [0] * 14))
        with pytest.raises(ValueError):
            contains_spanning_tree(g, big)

    def test_isomorphism_invariance(self):
        rng = random.Random(5)
        tree = ExplicitTree.from_balanced((2, 2))
        for trial in range(30):
            ps = sample_uniform(7, 2, 100 + trial)
            g = build_graph(ps, 0.45, 2.0)
            base = contains_spanning_tree(g, tree)
            perm = list(range(7))
            rng.shuffle(perm)
            shuffled = PointSet(dim=2, coords=ps.coords[perm])
            assert contains_spanning_tree(build_graph(shuffled, 0.45, 2.0), tree) == base


class TestDepthScan:
    def test_matches_closed_form_on_random_grid(self):
        rng = random.Random(1234)
        for _ in range(200):
            s = rng.randint(2, 6)
            d = rng.randint(1, 3)
            h = rng.randint(2, 500)
            eps = rng.uniform(0.05, 8.0)
            relax = rng.choice([1.0, 2.0, 4.0])
            p = rng.choice([1.0, 2.0, math.inf])
            r_thr = threshold_radius(d, h, p)
            mult = rng.uniform(1.0 + 1e-6, 10.0)
            r = mult * r_thr
            assert tessellation_depth(s, d, eps, r, r_thr, relax, p) == \
                tessellation_depth_scan(s, d, eps, r, r_thr, relax, p)

    def test_nonincreasing_in_degree(self):
        r_thr = threshold_radius(1, 30)
        ks = [tessellation_depth_scan(s, 1, 0.5, 1.5 * r_thr, r_thr) for s in range(2, 8)]
        assert ks == sorted(ks, reverse=True)

    def test_doubling_radius_never_deepens(self):
        r_thr = threshold_radius(2, 25)
        k1 = tessellation_depth_scan(2, 2, 0.5, 1.5 * r_thr, r_thr, 2.0)
        k2 = tessellation_depth_scan(2, 2, 0.5, 3.0 * r_thr, r_thr, 2.0)
        assert k2 <= k1
