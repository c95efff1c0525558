from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perctree import builders
from perctree.closedform import chi_polynomial, free_product_polynomial
from perctree.partition import Color
from perctree.solver import (
    ConvergenceError,
    Engine,
    _converged,
    GuardError,
    critical_probability,
    evaluate,
    growth_profile,
    moment_matrix,
    partition_distribution,
    partition_support,
    reachable_colors,
    spectral_radius,
)
from perctree.structure import ChildSlot, ModelPiece, RootPiece, TreeStructure, enlarge

from conftest import bfs_components

K2 = builders.FiniteGraph.complete(2)


@pytest.fixture(scope="module")
def sl2z_engine(sl2z):
    return Engine(sl2z)


# --- descendant partitions


def naive_sl2z_joined(p: float, depth: int) -> tuple[float, float]:
    """P(border pair joined inside the depth-truncated subtree), square and hexagon,
    by explicit enumeration with BFS connectivity."""
    square = (4, [(0, 1), (1, 2), (2, 3), (3, 0)], (0, 2), [(1, 3)])
    hexagon = (6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)], (0, 3), [(1, 4), (2, 5)])

    def level(piece, child_joined):
        n, edges, (b0, b1), slots = piece
        total = 0.0
        for mask in range(1 << len(edges)):
            k = bin(mask).count("1")
            w_edges = p**k * (1 - p) ** (len(edges) - k)
            for states in range(1 << len(slots)):
                w = w_edges
                extra = []
                for s, (u, v) in enumerate(slots):
                    if states >> s & 1:
                        w *= child_joined
                        extra.append((u, v))
                    else:
                        w *= 1 - child_joined
                if w == 0.0:
                    continue
                open_edges = [e for i, e in enumerate(edges) if mask >> i & 1] + extra
                label = bfs_components(n, open_edges)
                if label[b0] == label[b1]:
                    total += w
        return total

    sq = hx = 0.0
    for _ in range(depth):
        sq, hx = level(square, hx), level(hexagon, sq)
    return sq, hx


def test_fixed_point_matches_naive_recursion(sl2z_engine):
    dist = sl2z_engine.fixed_point(0.3)
    sq, hx = naive_sl2z_joined(0.3, 20)
    assert dist.converged
    assert abs(dist.vectors["square"][0] - sq) <= 1e-10
    assert abs(dist.vectors["hexagon"][0] - hx) <= 1e-10


def test_iterates_match_naive_at_each_depth(sl2z_engine):
    it = sl2z_engine.iterates(0.45)
    for depth in range(6):
        x = next(it)
        sq, hx = naive_sl2z_joined(0.45, depth)
        assert abs(x[0][0] - sq) < 1e-14 and abs(x[1][0] - hx) < 1e-14


@pytest.mark.parametrize("structure", ["sl2z", "grandparent"])
def test_extreme_p(structure, request):
    s = request.getfixturevalue(structure)
    d0 = partition_distribution(s, 0.0)
    d1 = partition_distribution(s, 1.0)
    for v in d0.vectors.values():
        assert v[-1] == 1.0  # all singletons is last in rgs order
    for v in d1.vectors.values():
        assert v[0] == 1.0


def test_partition_distribution_rejects_bad_p(sl2z):
    with pytest.raises(ValueError):
        partition_distribution(sl2z, 1.5)


def test_non_convergence_flagged(sl2z_engine):
    dist = sl2z_engine.fixed_point(0.5, max_iter=2)
    assert not dist.converged and dist.iterations == 2
    with pytest.raises(ConvergenceError) as info:
        _converged(sl2z_engine, 0.5, 1e-12, max_iter=2)
    assert info.value.p == 0.5 and info.value.iterations == 2


@pytest.mark.parametrize("p", [0.1, 0.3, 0.43, 0.7, 0.95])
def test_iterates_monotone(sl2z_engine, grandparent, p):
    for engine in (sl2z_engine, Engine(grandparent)):
        it = engine.iterates(p)
        prev = next(it)
        for _ in range(40):
            cur = next(it)
            for a, b in zip(prev, cur):
                assert b[0] >= a[0] - 1e-15  # P(joined) never decreases
            prev = cur


# --- supports and colors


def test_supports(sl2z):
    assert partition_support(sl2z) == {"square": [(0, 0), (0, 1)], "hexagon": [(0, 0), (0, 1)]}
    s = builders.free_product([K2, builders.FiniteGraph.cycle(3)])
    assert all(len(v) == 1 for v in partition_support(s).values())


def test_unsupported_joined_partition():
    # border vertices in different components and no child ever joins them
    m = ModelPiece("m", 4, [(0, 2), (1, 3)], [0, 1], [ChildSlot("m", [2, 3])])
    root = RootPiece("root", 2, [(0, 1)], 0, [ChildSlot("m", [0, 1])])
    s = TreeStructure("split", [m], root)
    assert partition_support(s) == {"m": [(0, 1)]}


def test_color_space_sizes(sl2z, grandparent):
    colors = reachable_colors(sl2z)
    assert len(colors) == 6
    assert {name for name, _ in colors.types} == {"square", "hexagon"}
    assert all(not c.white for _, c in colors.types)
    assert len(reachable_colors(builders.free_product([K2, K2]))) == 2
    assert len(reachable_colors(grandparent)) <= 6


# --- moment matrix


def test_moment_zero_at_p0(sl2z_engine):
    m = sl2z_engine.moment_matrix(0.0, sl2z_engine.fixed_point(0.0))
    assert not m.any()


def test_moment_block_antidiagonal(sl2z_engine):
    m = sl2z_engine.moment_matrix(0.4, sl2z_engine.fixed_point(0.4))
    models = [name for name, _ in sl2z_engine.colors.types]
    for a, ma in enumerate(models):
        for b, mb in enumerate(models):
            if ma == mb:
                assert m[a, b] == 0.0
    assert m.min() >= 0.0 and m.max() > 0.0


def test_moment_square_rows_by_hand(sl2z_engine):
    p = 0.37
    q = 2 * p - p * p  # a child border vertex reaches the joined, marked parent border
    m = sl2z_engine.moment_matrix(p, sl2z_engine.fixed_point(p))
    idx = sl2z_engine.colors.index()
    row = m[idx[("square", Color((0, 0), 0))]]
    assert row[idx[("hexagon", Color((0, 0), 0))]] == pytest.approx(q * q, abs=1e-14)
    assert row[idx[("hexagon", Color((0, 1), 0))]] == pytest.approx(q * (1 - q), abs=1e-14)
    assert row[idx[("hexagon", Color((0, 1), 1))]] == pytest.approx(q * (1 - q), abs=1e-14)


def test_k2_k2_entries_are_p():
    s = builders.free_product([K2, K2])
    for p in (0.2, 0.6):
        m = moment_matrix(s, p)
        assert np.allclose(m, [[0, p], [p, 0]], atol=1e-15)
        assert spectral_radius(m) == pytest.approx(p, abs=1e-12)


def test_moment_dimension_check(sl2z, sl2z_engine):
    other = reachable_colors(builders.free_product([K2, K2]))
    with pytest.raises(ValueError):
        moment_matrix(sl2z, 0.3, colors=other, engine=sl2z_engine)


@pytest.mark.parametrize("p", [0.05, 0.3, 0.5, 0.9])
def test_transition_totals(sl2z_engine, grandparent, p):
    for engine in (sl2z_engine, Engine(grandparent), Engine(builders.free_group_ball(2, 2))):
        dist = engine.fixed_point(p)
        for j, color in [(-1, Color((0,), 0))] + engine.colors.entries():
            piece = engine.root if j < 0 else engine.pieces[j]
            for v in range(len(piece.children)):
                total = sum(engine.slot_transition(j, color, v, p, dist).values())
                assert abs(total - 1.0) <= 1e-12


# --- spectral radius


def test_spectral_examples():
    assert spectral_radius(np.zeros((4, 4))) == 0.0
    assert spectral_radius([[0, 2], [2, 0]]) == pytest.approx(2.0, rel=1e-12)
    assert spectral_radius([[0, 3], [1, 0]]) == pytest.approx(np.sqrt(3), rel=1e-12)
    with pytest.raises(ValueError):
        spectral_radius([[0, -1], [1, 0]])


@settings(max_examples=150, deadline=None)
@given(
    st.integers(1, 7).flatmap(
        lambda n: st.lists(
            st.one_of(st.just(0.0), st.floats(0, 5)), min_size=n * n, max_size=n * n
        ).map(lambda xs: np.array(xs).reshape(n, n))
    )
)
def test_spectral_matches_eigvals(m):
    want = float(np.max(np.abs(np.linalg.eigvals(m)))) if m.size else 0.0
    assert spectral_radius(m) == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_spectral_periodic_and_reducible():
    cyc = np.roll(np.eye(5), 1, axis=1) * 2.0
    assert spectral_radius(cyc) == pytest.approx(2.0, rel=1e-12)
    tri = np.array([[0.5, 1.0, 0.0], [0.0, 0.2, 3.0], [0.0, 0.0, 0.1]])
    assert spectral_radius(tri) == pytest.approx(0.5, rel=1e-12)


# --- critical probability


def test_three_k2_is_half():
    res = critical_probability(builders.free_product([K2, K2, K2]))
    assert abs(res.p_c - 0.5) <= 1e-9
    assert res.bracket[0] <= res.p_c <= res.bracket[1]


def test_scan_properties(sl2z_engine, sl2z):
    res = critical_probability(sl2z, grid=64, engine=sl2z_engine)
    p = np.array([r[0] for r in res.scan])
    rho = np.array([r[1] for r in res.scan])
    det = np.array([r[2] for r in res.scan])
    assert evaluate(sl2z_engine, 0.0)[0] == 0.0
    # no jumps: successive differences stay within a few times the local slope
    steps = np.abs(np.diff(rho))
    assert steps.max() <= 4 * np.median(steps) + 0.05
    crossings = np.flatnonzero(np.diff(np.sign(rho - 1.0)))
    assert len(crossings) == 1
    below, above = p[crossings[0]], p[crossings[0] + 1]
    assert below < res.p_c < above
    assert np.sign(det[crossings[0]]) != np.sign(det[crossings[0] + 1])


def test_degenerate_flags():
    res = critical_probability(builders.free_product([K2, K2]), grid=32)
    assert res.p_c == 1.0 and "no_subcritical_root" in res.flags


def test_enlarge_invariance(sl2z_engine, sl2z, grandparent):
    tol = 1e-10
    for s in (sl2z, grandparent):
        a = critical_probability(s, tol=tol).p_c
        b = critical_probability(enlarge(s), tol=tol).p_c
        assert abs(a - b) <= 2 * tol


def test_thread_count_does_not_change_result(grandparent):
    a = critical_probability(grandparent, grid=32, threads=1)
    b = critical_probability(grandparent, grid=32, threads=3)
    assert a.p_c == b.p_c and a.scan == b.scan


def test_guard_on_edges():
    n = 8
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)][:25]
    m = ModelPiece("big", n, edges, [0], [ChildSlot("big", [1])])
    root = RootPiece("root", 2, [(0, 1)], 0, [ChildSlot("big", [1])])
    with pytest.raises(GuardError, match="enlarge"):
        Engine(TreeStructure("big", [m], root))


def _fan(slots: int, vertices: int):
    path = [(i, i + 1) for i in range(vertices - 1)]
    m = ModelPiece("m", vertices, path, [0, 1], [ChildSlot("m", [0, i]) for i in range(2, 2 + slots)])
    root = RootPiece("root", 2, [(0, 1)], 0, [ChildSlot("m", [0, 1])])
    return TreeStructure("fan", [m], root)


def test_guard_on_child_combinations():
    with pytest.raises(GuardError, match="combinations"):
        Engine(_fan(21, 23))


def test_guard_on_table_size():
    # 2**10 child combinations times 2**17 edge subsets
    with pytest.raises(GuardError, match="table"):
        Engine(_fan(10, 18))


# --- growth profile


def test_growth_profile(sl2z_engine, sl2z):
    zero = growth_profile(sl2z, 0.0, 4, engine=sl2z_engine)
    assert not zero[1:].any()
    prof = growth_profile(sl2z, 0.3, 80, engine=sl2z_engine)
    totals = prof.sum(axis=1)
    rho = evaluate(sl2z_engine, 0.3)[0]
    # period-2 type graph: compare two-step ratios
    assert np.sqrt(totals[-1] / totals[-3]) == pytest.approx(rho, abs=1e-6)
    above = growth_profile(sl2z, 0.45, 40, engine=sl2z_engine).sum(axis=1)
    assert above[-1] > above[-3] > above[1]


# --- free products against the cluster-size formula


@pytest.mark.parametrize(
    "factors",
    [
        ["k2", "k2"],
        ["k2", "k2", "k2"],
        ["k2", "c3"],
        ["c4", "k3"],
        ["k4", "k2", "c3"],
    ],
)
def test_free_product_determinant(factors):
    graphs = [builders.FiniteGraph.from_spec(f) for f in factors]
    s = builders.free_product(graphs)
    engine = Engine(s)
    chis = [chi_polynomial(g) for g in graphs]
    n = len(graphs)
    for p in (0.1, 0.2, 0.3):
        _, det = evaluate(engine, p)
        assert det == pytest.approx((-1) ** n * free_product_polynomial(chis, p), abs=1e-10)
