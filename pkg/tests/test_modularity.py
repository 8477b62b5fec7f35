import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modcert.graph import component_labels, from_edges, parse_degree_sequence, sample_configuration
from modcert.modularity import (
    block_stats,
    brute_force_qstar,
    component_baseline,
    edges_between,
    merge_delta,
    modularity,
    read_partition,
    relative_modularity,
    report,
    restricted_growth_strings,
    size_window,
    spanning_tree,
    tree_partition,
    write_partition,
)
from modcert.partition import VertexPartition

from strategies import graphs_with_partition, random_trees

TWO_TRIANGLES = from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])


def is_connected_block(g, block):
    sub = g.induced(block)
    return len(set(component_labels(sub)[list(block)].tolist())) == 1


# ---------------------------------------------------------------- basic quantities


def test_block_stats_examples():
    tri = from_edges(3, [(0, 1), (1, 2), (0, 2)])
    assert block_stats(tri, [0, 1, 2]) == (3, 6)
    assert block_stats(from_edges(2, [(0, 1)]), [0]) == (0, 1)
    assert block_stats(from_edges(1, [(0, 0)]), [0]) == (1, 2)


def test_block_stats_out_of_range():
    with pytest.raises(ValueError):
        block_stats(TWO_TRIANGLES, [7])


def test_whole_vertex_set_scores_zero():
    g = sample_configuration(parse_degree_sequence("3:20"), 2)
    assert modularity(g, VertexPartition([range(20)])) == pytest.approx(0.0, abs=1e-15)


def test_edgeless_is_zero():
    g = from_edges(4, [])
    assert modularity(g, VertexPartition([[0, 1], [2], [3]])) == 0.0


def test_two_triangles():
    part = VertexPartition([[0, 1, 2], [3, 4, 5]])
    assert modularity(TWO_TRIANGLES, part) == pytest.approx(0.5, abs=1e-15)
    assert relative_modularity(TWO_TRIANGLES, [0, 1, 2]) == pytest.approx(0.5, abs=1e-15)
    q, best = brute_force_qstar(TWO_TRIANGLES)
    assert q == pytest.approx(0.5) and best == part


def test_relative_modularity_examples():
    g = sample_configuration(parse_degree_sequence("3:30"), 5)
    assert relative_modularity(g, range(30)) == pytest.approx(0.0, abs=1e-14)
    assert relative_modularity(from_edges(2, [(0, 1)]), [0, 1]) == 0.0
    with pytest.raises(ValueError):
        relative_modularity(g, [])


def test_regular_relative_modularity_shortcut():
    g = sample_configuration(parse_degree_sequence("3:40"), 8)
    block = list(range(0, 40, 3))
    e, _ = block_stats(g, block)
    assert relative_modularity(g, block) == pytest.approx(2 * e / (3 * len(block)) - len(block) / 40, abs=1e-14)


def test_partition_must_cover():
    with pytest.raises(ValueError):
        modularity(TWO_TRIANGLES, VertexPartition([[0, 1, 2]]))


@settings(max_examples=200)
@given(graphs_with_partition(min_m=1))
def test_weighted_average_identity(gp):
    g, part = gp
    q = modularity(g, part)
    avg = sum(len(b) / g.order * relative_modularity(g, b) for b in part)
    assert q == pytest.approx(avg, abs=1e-12)
    rep = report(g, part)
    assert rep["q"] == pytest.approx(q, abs=1e-15)
    assert sum(b["size"] for b in rep["blocks"]) == g.order


@settings(max_examples=200)
@given(graphs_with_partition(min_m=1, max_n=9), st.data())
def test_merge_delta_identity(gp, data):
    g, part = gp
    if len(part) < 2:
        return
    i, j = data.draw(st.lists(st.integers(0, len(part) - 1), min_size=2, max_size=2, unique=True))
    a, b = part.blocks[i], part.blocks[j]
    merged = VertexPartition([blk for k, blk in enumerate(part.blocks) if k not in (i, j)] + [a + b])
    assert modularity(g, merged) - modularity(g, part) == pytest.approx(merge_delta(g, a, b), abs=1e-12)


# ---------------------------------------------------------------- brute force


def test_rgs_counts_are_bell_numbers():
    assert [restricted_growth_strings(n).shape[0] for n in range(1, 9)] == [1, 2, 5, 15, 52, 203, 877, 4140]


def test_rgs_lex_order():
    rows = [tuple(r) for r in restricted_growth_strings(4).tolist()]
    assert rows == sorted(rows)
    assert rows[0] == (0, 0, 0, 0) and rows[-1] == (0, 1, 2, 3)


def test_brute_small_examples():
    assert brute_force_qstar(from_edges(2, [(0, 1)]))[0] == 0.0
    q, part = brute_force_qstar(from_edges(3, [(0, 1), (1, 2), (0, 2)]))
    assert q == pytest.approx(0.0, abs=1e-15) and len(part) == 1
    q, part = brute_force_qstar(from_edges(4, [(0, 1), (1, 2), (2, 3)]))
    assert q == pytest.approx(1 / 6)
    assert part == VertexPartition([[0, 1], [2, 3]])


def test_brute_limit():
    with pytest.raises(ValueError):
        brute_force_qstar(from_edges(11, []))


@settings(max_examples=80, deadline=None)
@given(graphs_with_partition(max_n=7))
def test_brute_dominates(gp):
    g, part = gp
    q, best = brute_force_qstar(g)
    assert q >= -1e-12
    assert q >= modularity(g, part) - 1e-12
    assert modularity(g, best) == pytest.approx(q, abs=1e-12)


# ---------------------------------------------------------------- trees


def test_tree_partition_path16():
    path = from_edges(16, [(i, i + 1) for i in range(15)])
    part = tree_partition(path, 16)
    assert all(4 <= s <= 8 for s in part.sizes)
    for b in part:
        assert list(b) == list(range(b[0], b[-1] + 1))


def test_tree_partition_small_tree_single_block():
    star = from_edges(5, [(0, i) for i in range(1, 5)])
    assert tree_partition(star, 4) == VertexPartition([range(5)])


def test_tree_partition_errors():
    with pytest.raises(ValueError):
        tree_partition(from_edges(3, [(0, 1), (1, 2), (2, 0)]), 3)
    with pytest.raises(ValueError):
        tree_partition(from_edges(3, [(0, 1), (1, 2)]), 100)


@settings(max_examples=40, deadline=None)
@given(random_trees(min_n=200, max_n=200), st.integers(0, 3))
def test_tree_partition_window_200(t, _):
    lo, hi = size_window(200, int(t.degree.max()))
    assert (lo, hi) == (14, 15 * int(t.degree.max()))
    part = tree_partition(t, 200)
    assert part.vertices() == list(range(200))
    for b in part:
        assert lo <= len(b) <= hi
        assert is_connected_block(t, b)


@settings(max_examples=60, deadline=None)
@given(random_trees(min_n=20, max_n=300, max_degree=4), st.integers(4, 300))
def test_tree_partition_property(t, ref):
    lo, hi = size_window(ref, int(t.degree.max()))
    if t.order < lo:
        with pytest.raises(ValueError):
            tree_partition(t, ref)
        return
    part = tree_partition(t, ref)
    assert part.vertices() == list(range(t.n))
    for b in part:
        assert is_connected_block(t, b)
        assert len(b) <= hi
        if len(part) > 1:
            assert len(b) >= lo


def test_tree_partition_brute_force_reference():
    """Compare with a direct implementation of the cutting rule on small trees."""

    def reference(n, edges, hi):
        def sides(vs, es):
            out = []
            for idx in es:
                u, v = edges[idx]
                rest = [edges[k] for k in es if k != idx]
                comp = {u}
                changed = True
                while changed:
                    changed = False
                    for a, b in rest:
                        if (a in comp) != (b in comp):
                            comp |= {a, b}
                            changed = True
                out.append((min(len(comp), len(vs) - len(comp)), -idx, idx, comp))
            return out

        work = [(set(range(n)), list(range(len(edges))))]
        blocks = []
        while work:
            vs, es = work.pop()
            if len(vs) <= hi:
                blocks.append(sorted(vs))
                continue
            _, _, idx, comp = max(sides(vs, es))
            other = vs - comp
            work.append((comp, [k for k in es if k != idx and edges[k][0] in comp]))
            work.append((other, [k for k in es if k != idx and edges[k][0] in other]))
        return VertexPartition(blocks)

    rng = np.random.default_rng(3)
    for _ in range(25):
        n = int(rng.integers(10, 40))
        edges = [(int(rng.integers(0, v)), v) for v in range(1, n)]
        order = rng.permutation(len(edges))
        edges = [edges[i] for i in order]
        t = from_edges(n, edges)
        ref = int(rng.integers(4, 30))
        _, hi = size_window(ref, int(t.degree.max()))
        if n < math.isqrt(ref):
            continue
        assert tree_partition(t, ref) == reference(n, edges, hi)


# ---------------------------------------------------------------- baseline


def test_baseline_two_triangles():
    part, q = component_baseline(TWO_TRIANGLES)
    assert part == VertexPartition([[0, 1, 2], [3, 4, 5]])
    assert q == pytest.approx(0.5)


def test_baseline_long_cycle():
    n = 10000
    cyc = from_edges(n, [(i, (i + 1) % n) for i in range(n)])
    part, q = component_baseline(cyc)
    assert all(100 <= s <= 200 for s in part.sizes)
    assert 1 - 5 / math.sqrt(n) < q < 1


def test_baseline_perfect_matching():
    g = from_edges(100, [(2 * i, 2 * i + 1) for i in range(50)])
    part, q = component_baseline(g)
    assert len(part) == 50
    assert q == pytest.approx(0.98, abs=1e-12)


def test_baseline_rejects_isolated():
    with pytest.raises(ValueError):
        component_baseline(from_edges(3, [(0, 1)]))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32), st.sampled_from(["3:400", "1:100,3:300", "2:200,3:200", "1:300,2:100,4:100"]))
def test_baseline_random_graphs(seed, text):
    g = sample_configuration(parse_degree_sequence(text), seed)
    part, q = component_baseline(g)
    lab = component_labels(g)
    for b in part:
        assert is_connected_block(g, b)
        assert len(set(lab[list(b)].tolist())) == 1


def test_spanning_tree_is_bfs_tree():
    g = from_edges(5, [(0, 2), (0, 1), (1, 3), (2, 3), (3, 4)])
    t = spanning_tree(g, range(5))
    assert t.edge_multiset() == [(0, 1), (0, 2), (1, 3), (3, 4)]


def test_edges_between_counts_multiplicity():
    g = from_edges(4, [(0, 2), (0, 2), (1, 3), (0, 1)])
    assert edges_between(g, [0, 1], [2, 3]) == 3


def test_partition_file_round_trip(tmp_path):
    part = VertexPartition([[3, 1], [0], [2, 4, 5]])
    p = tmp_path / "p.txt"
    write_partition(part, p)
    assert read_partition(p) == part
