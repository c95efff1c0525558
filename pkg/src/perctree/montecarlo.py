"""Monte Carlo oracle: finite unfoldings and coupled bond percolation.

Every trial draws one uniform per edge from a Philox stream keyed by
``(seed, trial)``; an edge is open at ``p`` when its uniform is below ``p``.
One minimax-path sweep per trial then answers the question for every ``p`` at
once, which makes estimates exactly monotone in ``p``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from heapq import heappop, heappush
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .structure import TreeStructure, require_valid

MAX_VERTICES = 10_000_000
Z99 = 2.5758293035489004


class UnfoldGuardError(RuntimeError):
    pass


@dataclass
class UnfoldedGraph:
    vertex_count: int
    edges: np.ndarray  # (E, 2)
    origin: int
    frontier: np.ndarray  # sorted vertex ids
    provenance: list  # per vertex: (instance id, local index) of first appearance
    edge_instance: np.ndarray  # instance owning each edge
    instance_depth: np.ndarray
    instance_model: list  # model name per instance ("" for the root)
    instance_border: list  # global border vertices per instance

    def to_networkx(self):
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(range(self.vertex_count))
        g.add_edges_from(map(tuple, self.edges.tolist()))
        nx.set_node_attributes(g, {self.origin: True}, "origin")
        return g


def unfold(structure: TreeStructure, depth: int) -> UnfoldedGraph:
    """Instantiate the tree of pieces down to ``depth`` generations.

    Instances are created breadth first, so the edges of generations
    ``0..d`` always form a prefix of the edge list.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    require_valid(structure)
    root = structure.root
    edges: list = []
    edge_instance: list = []
    provenance: list = []
    inst_depth: list = []
    inst_model: list = []
    inst_border: list = []
    frontier: set = set()

    def add_instance(piece, gmap: list, level: int, model: str) -> int:
        inst = len(inst_depth)
        inst_depth.append(level)
        inst_model.append(model)
        inst_border.append([gmap[b] for b in piece.border])
        for u, v in piece.edges:
            edges.append((gmap[u], gmap[v]))
            edge_instance.append(inst)
        return inst

    gmap = list(range(root.vertex_count))
    provenance.extend((0, v) for v in range(root.vertex_count))
    add_instance(root, gmap, 0, "")
    level = [(root, gmap)]
    count = root.vertex_count
    for d in range(1, depth + 1):
        nxt = []
        for piece, pmap in level:
            for slot in piece.children:
                child = structure.model(slot.model)
                cmap = [-1] * child.vertex_count
                for b, a in zip(child.border, slot.attach):
                    cmap[b] = pmap[a]
                inst = len(inst_depth)
                for w in range(child.vertex_count):
                    if cmap[w] < 0:
                        cmap[w] = count
                        provenance.append((inst, w))
                        count += 1
                if count > MAX_VERTICES:
                    raise UnfoldGuardError(
                        f"unfolding to depth {depth} exceeds {MAX_VERTICES} vertices"
                    )
                add_instance(child, cmap, d, child.name)
                nxt.append((child, cmap))
        level = nxt
    for piece, pmap in level:
        frontier.update(pmap[b] for b in piece.border)
        for slot in piece.children:
            frontier.update(pmap[a] for a in slot.attach)
    return UnfoldedGraph(
        count,
        np.asarray(edges, dtype=np.int64).reshape(-1, 2),
        root.origin,
        np.array(sorted(frontier), dtype=np.int64),
        provenance,
        np.asarray(edge_instance, dtype=np.int64),
        np.asarray(inst_depth, dtype=np.int64),
        inst_model,
        inst_border,
    )


# ---------------------------------------------------------------------------
# minimax sweep


def _adjacency(n: int, edges: np.ndarray):
    deg = np.zeros(n + 1, dtype=np.int64)
    np.add.at(deg, edges[:, 0] + 1, 1)
    np.add.at(deg, edges[:, 1] + 1, 1)
    start = np.cumsum(deg)
    nbr = np.empty(2 * len(edges), dtype=np.int64)
    eid = np.empty(2 * len(edges), dtype=np.int64)
    fill = start[:-1].copy()
    for k, (u, v) in enumerate(edges):
        nbr[fill[u]] = v
        eid[fill[u]] = k
        fill[u] += 1
        nbr[fill[v]] = u
        eid[fill[v]] = k
        fill[v] += 1
    return start, nbr, eid


@njit(cache=True, nogil=True)
def _bottleneck(n, start, nbr, eid, weights, origin, out):
    """out[v] = min over paths origin -> v of the largest edge weight (origin: -1)."""
    for v in range(n):
        out[v] = np.inf
    done = np.zeros(n, dtype=np.bool_)
    out[origin] = -1.0
    heap = [(-1.0, origin)]
    while heap:
        d, v = heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for k in range(start[v], start[v + 1]):
            w = nbr[k]
            if done[w]:
                continue
            c = weights[eid[k]]
            if c < d:
                c = d
            if c < out[w]:
                out[w] = c
                heappush(heap, (c, w))


def _uniforms(seed: int, trial: int, count: int) -> np.ndarray:
    key = (int(seed) % (1 << 64)) << 64 | (int(trial) % (1 << 64))
    return np.random.Generator(np.random.Philox(key=key)).random(count)


def _chunks(trials: int, threads: int):
    threads = max(1, min(threads, trials))
    bounds = np.linspace(0, trials, threads + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _run_chunks(fn, trials: int, threads: int):
    chunks = _chunks(trials, threads)
    if len(chunks) == 1:
        return [fn(*chunks[0])]
    with ThreadPoolExecutor(len(chunks)) as pool:
        return list(pool.map(lambda c: fn(*c), chunks))


def reach_thresholds(graph: UnfoldedGraph, trials: int, seed: int, threads: int = 1) -> np.ndarray:
    """Per trial, the smallest ``p`` at which the origin reaches the frontier."""
    start, nbr, eid = _adjacency(graph.vertex_count, graph.edges)
    frontier = graph.frontier

    def run(a: int, b: int):
        out = np.empty(b - a)
        dist = np.empty(graph.vertex_count)
        for t in range(a, b):
            w = _uniforms(seed, t, len(graph.edges))
            _bottleneck(graph.vertex_count, start, nbr, eid, w, graph.origin, dist)
            out[t - a] = dist[frontier].min() if len(frontier) else np.inf
        return out

    return np.concatenate(_run_chunks(run, trials, threads))


def wilson(successes: int, trials: int, z: float = Z99) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1.0 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class ReachEstimate:
    p: float
    estimate: float
    ci_lo: float
    ci_hi: float
    trials: int
    successes: int


def estimate_reach(
    graph: UnfoldedGraph,
    p,
    trials: int,
    seed: int,
    threads: int = 1,
):
    """Fraction of trials in which an open path joins the origin to the frontier.

    ``p`` may be a scalar or a sequence; all values share the same uniforms.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    thresholds = reach_thresholds(graph, trials, seed, threads)
    scalar = np.ndim(p) == 0
    out = []
    for q in np.atleast_1d(np.asarray(p, dtype=float)):
        hits = int(np.count_nonzero(thresholds < q))
        lo, hi = wilson(hits, trials)
        out.append(ReachEstimate(float(q), hits / trials, lo, hi, trials, hits))
    return out[0] if scalar else out


# ---------------------------------------------------------------------------
# bracketing the threshold by the growth of the touched-piece counts


@dataclass
class Bracket:
    p_lo: float
    p_hi: float
    depth: int
    trials: int
    seed: int
    generations: tuple
    grid: list  # (p, growth_lo, growth, growth_hi)
    warning: Optional[str] = None


def _piece_thresholds(graph: UnfoldedGraph, generation: int) -> np.ndarray:
    idx = np.flatnonzero(graph.instance_depth == generation)
    return np.array([graph.instance_border[i] for i in idx], dtype=np.int64)


def touched_counts(
    graph: UnfoldedGraph,
    generations: Sequence[int],
    p_grid: np.ndarray,
    trials: int,
    seed: int,
    threads: int = 1,
) -> np.ndarray:
    """counts[t, g, i]: generation ``generations[g]`` pieces whose border meets
    the origin cluster at ``p_grid[i]`` in trial ``t``."""
    start, nbr, eid = _adjacency(graph.vertex_count, graph.edges)
    borders = [_piece_thresholds(graph, g) for g in generations]

    def run(a: int, b: int):
        out = np.zeros((b - a, len(generations), len(p_grid)), dtype=np.int64)
        dist = np.empty(graph.vertex_count)
        for t in range(a, b):
            w = _uniforms(seed, t, len(graph.edges))
            _bottleneck(graph.vertex_count, start, nbr, eid, w, graph.origin, dist)
            for g, bord in enumerate(borders):
                piece_t = np.sort(dist[bord].min(axis=1))
                out[t - a, g] = np.searchsorted(piece_t, p_grid, side="left")
        return out

    return np.concatenate(_run_chunks(run, trials, threads))


def _growth_interval(c1: np.ndarray, c2: np.ndarray, span: int, z: float = Z99):
    """Per-generation growth factor from two count samples, delta-method CI."""
    n = len(c1)
    s1, s2 = c1.mean(), c2.mean()
    if s1 == 0 or s2 == 0:
        return None
    cov = np.cov(np.vstack([c1, c2]).astype(float), ddof=1) if n > 1 else np.zeros((2, 2))
    var = cov[1, 1] / s2**2 + cov[0, 0] / s1**2 - 2 * cov[0, 1] / (s1 * s2)
    se = math.sqrt(max(var, 0.0) / n) / span
    rate = math.log(s2 / s1) / span
    return math.exp(rate - z * se), math.exp(rate), math.exp(rate + z * se)


def bracket_pc(
    structure: TreeStructure,
    depth: int,
    trials: int,
    seed: int,
    grid: int = 200,
    threads: int = 1,
) -> Bracket:
    """Interval that contains ``p_c`` with high confidence.

    Let ``S_d(p)`` be the mean number of generation-``d`` pieces whose border
    meets the origin cluster.  Its growth per generation tends to the Perron
    root of the moment matrix, so ``p`` is subcritical when the 99% interval
    for ``(S_d2 / S_d1) ** (1 / (d2 - d1))`` lies below 1 and supercritical
    when it lies above 1.  ``d2 = depth - 2`` keeps clear of the truncation;
    ``d2 - d1`` is even so period-2 type structures do not bias the ratio.
    """
    if depth < 4:
        raise ValueError("bracketing needs depth >= 4")
    d2 = depth - 2
    d1 = d2 // 2
    if (d2 - d1) % 2:
        d1 -= 1
    graph = unfold(structure, depth)
    p_grid = np.arange(1, grid) / grid
    counts = touched_counts(graph, (d1, d2), p_grid, trials, seed, threads)
    rows = []
    for i, p in enumerate(p_grid):
        ci = _growth_interval(counts[:, 0, i], counts[:, 1, i], d2 - d1)
        rows.append((float(p),) + (ci if ci is not None else (math.nan, math.nan, math.nan)))

    first_super = None
    for k, (p, lo, _, _) in enumerate(rows):
        if lo == lo and lo > 1.0:
            first_super = k
            break
    upto = first_super if first_super is not None else len(rows)
    sub = [k for k in range(upto) if rows[k][3] == rows[k][3] and rows[k][3] < 1.0]
    p_lo = rows[sub[-1]][0] if sub else 0.0
    p_hi = rows[first_super][0] if first_super is not None else 1.0
    warning = None
    if not sub or first_super is None:
        warning = "inconclusive at this depth and trial count; interval widened to the unit boundary"
        warnings.warn(warning, RuntimeWarning, stacklevel=2)
    return Bracket(p_lo, p_hi, depth, trials, seed, (d1, d2), rows, warning)
