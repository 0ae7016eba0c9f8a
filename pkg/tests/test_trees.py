import math

import pytest

from geospan.trees import (
    DegreeSequence, FormatError, TreeVertex, build_tree,
    children_of, height_from_order, load_degree_sequence, parent_of,
    regular_tree_threshold, save_degree_sequence, select_base_degree,
    select_base_degree_minimal, tree_size,
)


class TestTreeSize:
    def test_ternary_height_two(self):
        assert tree_size(DegreeSequence.uniform(3, 2)) == 13

    @pytest.mark.parametrize("h", [1, 3, 5, 10, 20])
    def test_binary_closed_form(self, h):
        assert tree_size(DegreeSequence.uniform(2, h)) == 2 ** (h + 1) - 1

    def test_mixed_sequence(self):
        assert tree_size(DegreeSequence(entries=(2, 3), bound=3)) == 9

    def test_overflow_guard(self):
        with pytest.raises(OverflowError):
            tree_size(DegreeSequence.uniform(2, 64))


class TestLayerArithmetic:
    def test_parent_example(self):
        t = build_tree(DegreeSequence(entries=(2, 3), bound=3))
        assert parent_of(t, TreeVertex(2, 4)) == TreeVertex(1, 1)

    def test_children_of_root(self):
        t = build_tree(DegreeSequence(entries=(2, 3), bound=3))
        assert children_of(t, TreeVertex(0, 0)) == [TreeVertex(1, 0), TreeVertex(1, 1)]

    @pytest.mark.parametrize("entries", [(2, 3, 2), (3, 2, 2)])
    def test_roundtrip_exhaustive(self, entries):
        t = build_tree(DegreeSequence(entries=entries, bound=3))
        for layer in range(t.height):
            for idx in range(t.layer_sizes[layer]):
                v = TreeVertex(layer, idx)
                for child in children_of(t, v):
                    assert parent_of(t, child) == v

    def test_root_has_no_parent(self):
        t = build_tree(DegreeSequence.uniform(2, 2))
        with pytest.raises(ValueError):
            parent_of(t, TreeVertex(0, 0))

    def test_leaves_have_no_children(self):
        t = build_tree(DegreeSequence.uniform(2, 2))
        assert children_of(t, TreeVertex(2, 3)) == []

    def test_layer_recursion_and_total(self):
        import random

        rng = random.Random(7)
        for _ in range(50):
            h = rng.randint(1, 12)
            entries = tuple(rng.randint(2, 4) for _ in range(h))
            t = build_tree(DegreeSequence(entries=entries, bound=4))
            for i in range(h):
                assert t.layer_sizes[i + 1] == t.layer_sizes[i] * entries[i]
            assert sum(t.layer_sizes) == t.size
            # Every balanced tree has logarithmic height.
            assert h <= math.log2(t.size + 1)


class TestSelectBaseDegree:
    def test_tie_breaks_to_smallest(self):
        seq = DegreeSequence(entries=(2, 3, 3, 2, 3, 2), bound=3)
        s, prefix = select_base_degree(seq, d=1, depth2=2)
        assert (s, prefix) == (2, 6)

    def test_uniform_sequence(self):
        seq = DegreeSequence.uniform(3, 12)
        s, prefix = select_base_degree(seq, d=2, depth2=2)
        assert s == 3 and prefix == 2 * 2 * 3

    def test_only_one_value_reaches_threshold(self):
        # Threshold d * depth2 = 2; only the value 3 occurs twice in range.
        seq = DegreeSequence(entries=(3, 3, 3, 2, 3, 3), bound=3)
        s, _ = select_base_degree(seq, d=1, depth2=2)
        assert s == 3

    def test_prefix_too_long(self):
        seq = DegreeSequence.uniform(2, 5)
        with pytest.raises(ValueError):
            select_base_degree(seq, d=2, depth2=3)

    def test_minimal_variant_shorter(self):
        seq = DegreeSequence.uniform(2, 20)
        s_full, p_full = select_base_degree(seq, d=1, depth2=4)
        s_min, p_min = select_base_degree_minimal(seq, d=1, depth2=4)
        assert s_full == s_min == 2
        assert p_min == 4 <= p_full == 8

    @pytest.mark.parametrize("d,depth2", [(1, 2), (2, 2), (1, 4)])
    def test_divisibility_guarantee(self, d, depth2):
        import random

        rng = random.Random(11)
        for _ in range(50):
            h = d * depth2 * 3 + rng.randint(0, 5)
            entries = tuple(rng.randint(2, 3) for _ in range(h))
            seq = DegreeSequence(entries=entries, bound=3)
            for select in (select_base_degree, select_base_degree_minimal):
                s, prefix = select(seq, d, depth2)
                t = build_tree(seq)
                for k in range(1, depth2 + 1):
                    assert t.layer_sizes[prefix] % s ** (k * d) == 0


class TestHeightFromOrder:
    def test_exact_binary(self):
        assert height_from_order(15, 2) == 3

    def test_one_past_exact(self):
        assert height_from_order(16, 2) == 4

    def test_single_vertex(self):
        assert height_from_order(1, 3) == 0

    @pytest.mark.parametrize("s", [2, 3, 5])
    def test_defining_inequality(self, s):
        for n in range(1, 400):
            h = height_from_order(n, s)
            below = sum(s**i for i in range(h))
            upto = below + s**h
            assert below < n <= upto


class TestRegularTreeThreshold:
    def test_formula_value(self):
        n = round(math.e**2)
        got = regular_tree_threshold(n, 3, 1)
        assert got == pytest.approx(math.log(2) / (2 * math.log(n)), rel=1e-12)

    def test_scales_with_sqrt_d(self):
        one = regular_tree_threshold(1000, 4, 1)
        two = regular_tree_threshold(1000, 4, 2)
        assert two / one == pytest.approx(math.sqrt(2), rel=1e-12)

    def test_large_graph_value(self):
        got = regular_tree_threshold(10**6, 4, 4)
        assert got == pytest.approx(2 * math.log(3) / (2 * math.log(10**6)), rel=1e-12)
        assert got == pytest.approx(0.0795, abs=5e-4)

    def test_arity_two_rejected(self):
        with pytest.raises(ValueError):
            regular_tree_threshold(100, 2, 1)


class TestDegreeSequenceIO:
    def test_roundtrip(self, tmp_path):
        seq = DegreeSequence(entries=(2, 3, 2, 4), bound=4)
        path = tmp_path / "seq.txt"
        save_degree_sequence(seq, path)
        assert load_degree_sequence(path) == seq

    def test_bad_header(self, tmp_path):
        path = tmp_path / "seq.txt"
        path.write_text("nonsense\n")
        with pytest.raises(FormatError):
            load_degree_sequence(path)

    def test_truncated_entries(self, tmp_path):
        path = tmp_path / "seq.txt"
        path.write_text("3 2\n2\n2\n")
        with pytest.raises(FormatError) as err:
            load_degree_sequence(path)
        assert "3" in str(err.value)

    def test_entry_out_of_bound(self, tmp_path):
        path = tmp_path / "seq.txt"
        path.write_text("2 2\n2\n5\n")
        with pytest.raises(FormatError):
            load_degree_sequence(path)


def test_degree_sequence_validation():
    with pytest.raises(ValueError):
        DegreeSequence(entries=(1, 2), bound=2)
    with pytest.raises(ValueError):
        DegreeSequence(entries=(), bound=2)
    with pytest.raises(ValueError):
        DegreeSequence(entries=(2,), bound=1)
