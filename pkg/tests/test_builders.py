from __future__ import annotations

import networkx as nx
import pytest

from perctree import builders
from perctree.builders import FiniteGraph
from perctree.solver import critical_probability, partition_support
from perctree.structure import validate

from conftest import free_group_ball_graph, grandparent_ball, isomorphic_rooted, unfolded_nx

K2 = FiniteGraph.complete(2)


def _interior_degrees(structure, depth):
    g, origin = unfolded_nx(structure, depth)
    dist = nx.single_source_shortest_path_length(g, origin)
    inner = [v for v, d in dist.items() if d <= 1]
    return {g.degree(v) for v in inner}


def test_finite_graph_validation():
    with pytest.raises(ValueError):
        FiniteGraph(3, [(0, 1)])
    with pytest.raises(ValueError):
        FiniteGraph(2, [(0, 1), (1, 0)])
    with pytest.raises(ValueError):
        FiniteGraph.from_spec("q4")
    assert FiniteGraph.from_spec("C4") == FiniteGraph.cycle(4)
    assert FiniteGraph.from_spec("k1").edges == ()


@pytest.mark.parametrize("n", range(0, 5))
def test_grandparent_unfold_matches_direct(grandparent, n):
    g, go = unfolded_nx(grandparent, n)
    h, ho = grandparent_ball(n)
    assert (g.number_of_nodes(), g.number_of_edges()) == (h.number_of_nodes(), h.number_of_edges())
    assert isomorphic_rooted(g, go, h, ho)


@pytest.mark.parametrize("k, d", [(1, 0), (1, 1), (1, 2), (1, 3), (2, 0), (2, 1), (2, 2), (2, 3)])
def test_free_group_ball_unfold_matches_cayley(k, d):
    g, go = unfolded_nx(builders.free_group_ball(2, k), d)
    h, ho = free_group_ball_graph(k, d + k - 1)
    assert (g.number_of_nodes(), g.number_of_edges()) == (h.number_of_nodes(), h.number_of_edges())
    assert isomorphic_rooted(g, go, h, ho)


@pytest.mark.parametrize(
    "structure, degree",
    [
        (builders.sl2z(), 4),
        (builders.grandparent(), 8),
        (builders.free_group_ball(2, 1), 4),
        (builders.free_group_ball(2, 2), 16),
        (builders.free_product([K2, K2, K2]), 3),
    ],
)
def test_regular_interior(structure, degree):
    assert _interior_degrees(structure, 4) == {degree}


def test_free_group_ball_guards():
    with pytest.raises(ValueError):
        builders.free_group_ball(3, 2)
    with pytest.raises(ValueError):
        builders.free_group_ball(2, 4)


def test_free_product_shape():
    s = builders.free_product([K2, FiniteGraph.cycle(3)])
    assert [m.name for m in s.models] == ["f0", "f1"]
    assert len(s.model("f1").children) == 2
    assert len(s.root.children) == 2
    with pytest.raises(ValueError):
        builders.free_product([K2])


def test_amalgam_with_trivial_subgroup_is_free_product():
    c4 = FiniteGraph.cycle(4)
    a = builders.amalgam(K2, [[0], [1]], c4, [[0], [1], [2], [3]])
    f = builders.free_product([K2, c4])
    for d in range(4):
        g, go = unfolded_nx(a, d)
        h, ho = unfolded_nx(f, d)
        assert isomorphic_rooted(g, go, h, ho)


def test_amalgam_coset_checks():
    c4 = FiniteGraph.cycle(4)
    with pytest.raises(ValueError):
        builders.amalgam(c4, [[0, 2], [1]], c4, [[0, 2], [1, 3]])
    with pytest.raises(ValueError):
        builders.amalgam(c4, [[0, 2], [1, 2]], c4, [[0, 2], [1, 3]])
    with pytest.raises(ValueError):
        builders.amalgam(c4, [[0, 2], [1, 3]], c4, [[0], [1], [2], [3]])


def test_hnn_of_trivial_group_is_a_line():
    s = builders.hnn(FiniteGraph.complete(1), [[0]], [[0]])
    g, go = unfolded_nx(s, 5)
    assert nx.is_isomorphic(g, nx.path_graph(13))
    res = critical_probability(s, grid=32)
    assert res.p_c == 1.0 and "no_subcritical_root" in res.flags


def test_hnn_ladder():
    # Z2 x Z: the base K2, H = K = the whole group
    s = builders.hnn(K2, [[0, 1]], [[0, 1]])
    g, _ = unfolded_nx(s, 4)
    # a ladder whose two end rungs belong to the next, missing generation
    rungs = g.number_of_nodes() // 2
    want = nx.ladder_graph(rungs)
    want.remove_edges_from([(0, rungs), (rungs - 1, 2 * rungs - 1)])
    assert nx.is_isomorphic(g, want)
    assert validate(s).ok
    res = critical_probability(s, grid=32)
    assert res.p_c == 1.0


def test_hnn_twisted_alpha():
    # alpha swaps the two vertices: the Moebius-type ladder is still two-ended
    s = builders.hnn(K2, [[0, 1]], [[0, 1]], alpha=[1, 0])
    g, _ = unfolded_nx(s, 3)
    assert sorted(d for _, d in g.degree())[:5] == [1, 1, 1, 1, 3]
    assert critical_probability(s, grid=32).p_c == 1.0
    with pytest.raises(ValueError):
        builders.hnn(K2, [[0, 1]], [[0, 1]], alpha=[0, 0])


def test_sl2z_supports(sl2z):
    assert {k: len(v) for k, v in partition_support(sl2z).items()} == {"square": 2, "hexagon": 2}
