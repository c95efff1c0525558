"""Shared oracles: independent, deliberately naive reimplementations."""

from __future__ import annotations

from collections import deque

import networkx as nx
import pytest

from perctree import builders
from perctree.montecarlo import unfold


def bfs_components(n: int, edges) -> list[int]:
    """Component label per vertex, by plain BFS."""
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    label = [-1] * n
    for s in range(n):
        if label[s] >= 0:
            continue
        label[s] = s
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if label[y] < 0:
                    label[y] = s
                    queue.append(y)
    return label


def rgs_of(labels) -> tuple:
    seen: dict = {}
    return tuple(seen.setdefault(x, len(seen)) for x in labels)


def blocks_as_edges(attach, rgs):
    """Star edges joining attach vertices that share a block."""
    out = []
    for i, a in enumerate(attach):
        for j in range(i):
            if rgs[j] == rgs[i]:
                out.append((attach[j], a))
                break
    return out


def labelled(g: nx.Graph, origin) -> nx.Graph:
    dist = nx.single_source_shortest_path_length(g, origin)
    for v in g:
        g.nodes[v]["label"] = (dist.get(v, -1), g.degree(v))
    return g


def isomorphic_rooted(g: nx.Graph, g_origin, h: nx.Graph, h_origin) -> bool:
    return nx.vf2pp_is_isomorphic(labelled(g, g_origin), labelled(h, h_origin), node_label="label")


def unfolded_nx(structure, depth):
    u = unfold(structure, depth)
    return u.to_networkx(), u.origin


# ---------------------------------------------------------------------------
# direct graph generators


def grandparent_ball(n: int) -> tuple[nx.Graph, tuple]:
    """Edges of the grandparent graph whose middle vertex is within tree
    distance ``n`` of the origin.

    Vertices are ``(up, path)``: climb ``up`` steps toward the fixed end,
    then descend along ``path`` (0/1 child choices).  The origin is child 0
    of its parent at every level.
    """

    def canon(up, path):
        while up > 0 and path and path[0] == 0:
            up -= 1
            path = path[1:]
        return (up, path)

    def parent(v):
        up, path = v
        return canon(up, path[:-1]) if path else (up + 1, ())

    def children(v):
        up, path = v
        return [canon(up, path + (c,)) for c in (0, 1)]

    middles = set()
    frontier = [(0, ())]
    seen = {(0, ())}
    for _ in range(n):
        nxt = []
        for v in frontier:
            for w in children(v) + [parent(v)]:
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    middles = seen
    g = nx.Graph()
    for v in middles:
        for c in children(v):
            g.add_edge(v, c)
            g.add_edge(parent(v), c)
    return g, (0, ())


def free_group_ball_graph(k: int, radius: int) -> tuple[nx.Graph, str]:
    """Cayley graph of F_2 w.r.t. the word-length ball of radius ``k``,
    induced on reduced words of length <= ``radius``."""
    inverse = {"a": "A", "A": "a", "b": "B", "B": "b"}
    words = [""]
    layer = [""]
    for _ in range(radius):
        layer = [w + x for w in layer for x in "aAbB" if not (w and inverse[w[-1]] == x)]
        words += layer

    def dist(u, v):
        c = 0
        while c < min(len(u), len(v)) and u[c] == v[c]:
            c += 1
        return len(u) + len(v) - 2 * c

    g = nx.Graph()
    g.add_nodes_from(words)
    g.add_edges_from((u, v) for i, u in enumerate(words) for v in words[:i] if dist(u, v) <= k)
    return g, ""


@pytest.fixture(scope="session")
def sl2z():
    return builders.sl2z()


@pytest.fixture(scope="session")
def grandparent():
    return builders.grandparent()


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion at the end of the run

ACCEPTANCE: dict = {}


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (title, ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]")
