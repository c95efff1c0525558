"""Exact critical probability of a tree-like structure.

Pipeline:

1. descendant-partition distributions, the minimal fixed point of the
   piece-by-piece recursion, iterated from the all-singletons start;
2. the reachable nonwhite colors (the types of the reduced branching process);
3. the first-moment matrix ``M(p)`` over those types;
4. ``p_c`` = first ``p`` with spectral radius ``rho(M(p)) = 1``.

Everything that does not depend on ``p`` (edge-subset enumeration, union-find
work) is done once in :class:`Engine`; each ``p`` then costs a few weighted
``bincount`` calls.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels as K
from .partition import (
    Color,
    enumerate_partitions,
    partition_index,
)
from .structure import TreeStructure, require_valid

MAX_EDGES = 24
MAX_CHILD_COMBINATIONS = 1 << 20
MAX_TABLE = 1 << 26
_NOISE_FLOOR = 1e-15


class GuardError(RuntimeError):
    """A piece is too large for exhaustive enumeration."""


class ConvergenceError(RuntimeError):
    def __init__(self, p: float, residual: float, iterations: int):
        super().__init__(
            f"fixed point did not converge at p={p!r}: residual {residual:.3e} after {iterations} iterations"
        )
        self.p = p
        self.residual = residual
        self.iterations = iterations


# ---------------------------------------------------------------------------
# p-independent precomputation


@dataclass
class _ModelTables:
    name: str
    border_size: int
    n_edges: int
    slot_models: list[int]
    support: np.ndarray  # indices into enumerate_partitions(border_size)
    induced: Optional[np.ndarray] = None  # (2^E, K) -> full partition index


@dataclass
class _ColorTables:
    """Per target slot: (2^E, K_without_target) child color codes."""

    codes: list[np.ndarray]


def _edge_array(piece) -> np.ndarray:
    if piece.edges:
        return np.asarray(piece.edges, dtype=np.int64).reshape(-1, 2)
    return np.zeros((0, 2), dtype=np.int64)


def _partition_lookup(n: int):
    parts = enumerate_partitions(n)
    codes = np.array([K.partition_code(r) for r in parts], dtype=np.int64)
    order = np.argsort(codes)
    return codes[order], order


def _codes_to_partition_index(codes: np.ndarray, n: int) -> np.ndarray:
    sorted_codes, order = _partition_lookup(n)
    pos = np.searchsorted(sorted_codes, codes)
    return order[pos]


def decode_color(code: int, n: int) -> Color:
    marked = (code & 15) - 1
    rgs = K.decode_partition(code >> 4, n)
    return Color(rgs, None if marked < 0 else marked)


def _color_sort_key(model_index: int, color: Color):
    # lexicographic rgs order, white first, then by marked block
    return (model_index, color.partition, -1 if color.marked is None else color.marked)


class Engine:
    """Enumeration tables for one structure, reusable across values of ``p``."""

    def __init__(self, structure: TreeStructure):
        require_valid(structure)
        self.structure = structure
        self.pieces = list(structure.models)
        self.root = structure.root
        self.models: list[_ModelTables] = []
        for m in self.pieces:
            if len(m.edges) > MAX_EDGES:
                raise GuardError(
                    f"model {m.name!r} has {len(m.edges)} edges (limit {MAX_EDGES}); "
                    "enlarge was probably over-applied"
                )
            self.models.append(
                _ModelTables(
                    m.name,
                    len(m.border),
                    len(m.edges),
                    [structure.model_index(s.model) for s in m.children],
                    np.array([partition_index(len(m.border))[tuple(range(len(m.border)))]]),
                )
            )
        if len(self.root.edges) > MAX_EDGES:
            raise GuardError(f"root has {len(self.root.edges)} edges (limit {MAX_EDGES})")
        self._supports()
        self._color_cache: dict = {}
        self.colors = self._reachable()

    # -- supports and induced tables

    def _slot_tables(self, slot_models):
        out = []
        for j in slot_models:
            n = self.models[j].border_size
            parts = enumerate_partitions(n)
            out.append([parts[i] for i in self.models[j].support])
        return out

    def _check_size(self, piece, radix) -> None:
        combos = int(np.prod(radix)) if len(radix) else 1
        if combos > MAX_CHILD_COMBINATIONS:
            raise GuardError(
                f"piece {piece.name!r} needs {combos} child-partition combinations "
                f"(limit {MAX_CHILD_COMBINATIONS}); enlarge was probably over-applied"
            )
        if combos << len(piece.edges) > MAX_TABLE:
            raise GuardError(
                f"piece {piece.name!r} needs a table of {combos << len(piece.edges)} entries "
                f"(limit {MAX_TABLE}); enlarge was probably over-applied"
            )

    def _induced(self, j: int) -> np.ndarray:
        piece = self.pieces[j]
        tabs = self._slot_tables(self.models[j].slot_models)
        attach, alen, ptab, radix = K.pack_slots([s.attach for s in piece.children], tabs)
        self._check_size(piece, radix)
        codes = K.induced_codes(
            piece.vertex_count,
            _edge_array(piece),
            np.asarray(piece.border, dtype=np.int64),
            attach,
            alen,
            ptab,
            radix,
        )
        return _codes_to_partition_index(codes, len(piece.border))

    def _supports(self) -> None:
        changed = True
        while changed:
            changed = False
            for j, mt in enumerate(self.models):
                table = self._induced(j)
                support = np.unique(table)
                if not np.array_equal(support, mt.support):
                    mt.support = support
                    changed = True
                mt.induced = table
        # tables must match the final supports of every child
        for j, mt in enumerate(self.models):
            mt.induced = self._induced(j)

    # -- colors

    def _piece(self, j: int):
        return self.root if j < 0 else self.pieces[j]

    def color_table(self, j: int, color: Color) -> _ColorTables:
        """Child color codes for every slot of piece ``j`` (``-1`` = root)."""
        key = (j, color)
        hit = self._color_cache.get(key)
        if hit is not None:
            return hit
        piece = self._piece(j)
        slot_models = [self.structure.model_index(s.model) for s in piece.children]
        tabs = self._slot_tables(slot_models)
        edges = _edge_array(piece)
        border = np.asarray(piece.border, dtype=np.int64)
        rgs = np.asarray(color.partition, dtype=np.int64)
        marked = -1 if color.marked is None else color.marked
        codes = []
        for v, slot in enumerate(piece.children):
            others = [i for i in range(len(piece.children)) if i != v]
            attach, alen, ptab, radix = K.pack_slots(
                [piece.children[i].attach for i in others], [tabs[i] for i in others]
            )
            self._check_size(piece, radix)
            codes.append(
                K.color_codes(
                    piece.vertex_count,
                    edges,
                    border,
                    rgs,
                    marked,
                    attach,
                    alen,
                    ptab,
                    radix,
                    np.asarray(slot.attach, dtype=np.int64),
                )
            )
        out = _ColorTables(codes)
        self._color_cache[key] = out
        return out

    def _children_of(self, j: int, color: Color) -> list[tuple[int, Color]]:
        piece = self._piece(j)
        table = self.color_table(j, color)
        found = []
        for v, slot in enumerate(piece.children):
            child = self.structure.model_index(slot.model)
            n = self.models[child].border_size
            for code in np.unique(table.codes[v]):
                if code & 15:
                    found.append((child, decode_color(int(code), n)))
        return found

    def _reachable(self) -> "ColorSpace":
        start = Color((0,), 0)
        seen: set = set()
        queue = list(self._children_of(-1, start))
        while queue:
            item = queue.pop()
            if item in seen:
                continue
            seen.add(item)
            queue.extend(c for c in self._children_of(*item) if c not in seen)
        ordered = sorted(seen, key=lambda t: _color_sort_key(t[0], t[1]))
        space = ColorSpace(
            tuple((self.models[j].name, c) for j, c in ordered),
            tuple(j for j, _ in ordered),
        )
        # map every table to type indices (white and unreachable -> dummy slot n)
        self._mapped: dict = {}
        lookup = {(j, c): i for i, (j, c) in enumerate(ordered)}
        dummy = len(ordered)
        for j, color in [(-1, start)] + ordered:
            piece = self._piece(j)
            table = self.color_table(j, color)
            per_slot = []
            for v, slot in enumerate(piece.children):
                child = self.structure.model_index(slot.model)
                n = self.models[child].border_size
                codes = table.codes[v]
                uniq, inv = np.unique(codes, return_inverse=True)
                idx = np.array(
                    [
                        lookup.get((child, decode_color(int(c), n)), dummy) if c & 15 else dummy
                        for c in uniq
                    ],
                    dtype=np.int64,
                )
                per_slot.append(idx[inv.reshape(codes.shape)].ravel())
            self._mapped[(j, color)] = per_slot
        return space

    # -- per-p quantities

    def support_sizes(self) -> dict:
        return {mt.name: int(len(mt.support)) for mt in self.models}

    def edge_weights(self, n_edges: int, p: float) -> np.ndarray:
        g = np.arange(1 << n_edges, dtype=np.int64)
        ones = np.zeros(len(g), dtype=np.int64)
        for e in range(n_edges):
            ones += (g >> e) & 1
        if p == 0.0:
            return (ones == 0).astype(float)
        if p == 1.0:
            return (ones == n_edges).astype(float)
        return np.exp(ones * math.log(p) + (n_edges - ones) * math.log1p(-p))

    def _child_product(self, slot_models, vectors) -> np.ndarray:
        prod = np.ones(1)
        for j in slot_models:
            prod = np.multiply.outer(prod, vectors[j][self.models[j].support]).ravel()
        return prod

    def reduced_operator(self, p: float) -> list[np.ndarray]:
        """Per model, ``A[z, k]``: probability that the piece's own edges turn
        child-partition combination ``k`` into border partition ``z``."""
        out = []
        for mt in self.models:
            alpha = self.edge_weights(mt.n_edges, p)
            n_parts = len(enumerate_partitions(mt.border_size))
            combos = mt.induced.shape[1]
            flat = mt.induced * combos + np.arange(combos)
            weight = np.broadcast_to(alpha[:, None], flat.shape)
            out.append(
                np.bincount(flat.ravel(), weights=weight.ravel(), minlength=n_parts * combos).reshape(
                    n_parts, combos
                )
            )
        return out

    def psi(self, p: float, vectors: list[np.ndarray], operator=None) -> list[np.ndarray]:
        """One application of the recursion to all models."""
        operator = operator if operator is not None else self.reduced_operator(p)
        out = []
        for mt, a in zip(self.models, operator):
            v = a @ self._child_product(mt.slot_models, vectors)
            # the mass is 1 exactly; rounding would otherwise compound across children
            out.append(v / v.sum())
        return out

    def diagonal_start(self) -> list[np.ndarray]:
        out = []
        for mt in self.models:
            v = np.zeros(len(enumerate_partitions(mt.border_size)))
            v[partition_index(mt.border_size)[tuple(range(mt.border_size))]] = 1.0
            out.append(v)
        return out

    def iterates(self, p: float) -> Iterator[list[np.ndarray]]:
        """Depth-truncated descendant distributions, depth 0, 1, 2, ..."""
        x = self.diagonal_start()
        operator = self.reduced_operator(p)
        while True:
            yield x
            x = self.psi(p, x, operator)

    def fixed_point(self, p: float, tol: float = 1e-12, max_iter: int = 200_000) -> "PartitionDistribution":
        operator = self.reduced_operator(p)
        x = self.diagonal_start()
        prev_change = None
        change = math.inf
        rate = 0.0
        for it in range(1, max_iter + 1):
            nxt = self.psi(p, x, operator)
            change = max(float(np.max(np.abs(a - b))) for a, b in zip(nxt, x))
            x = nxt
            if prev_change is not None and prev_change > 0:
                rate = min(change / prev_change, 0.999999)
            prev_change = change
            # geometric tail bound: remaining error ~ change * rate / (1 - rate);
            # below the rounding floor the rate estimate is meaningless
            if change <= _NOISE_FLOOR or (it > 2 and change * max(rate, 0.5) / (1.0 - rate) < tol):
                return PartitionDistribution(
                    {mt.name: v for mt, v in zip(self.models, x)}, change, it, True, p
                )
        return PartitionDistribution(
            {mt.name: v for mt, v in zip(self.models, x)}, change, max_iter, False, p
        )

    def _slot_marginals(self, p: float, vectors) -> dict:
        """For each piece, edge-weight x child-partition weights with one slot summed out."""
        out = {}
        for j in [-1] + list(range(len(self.models))):
            piece = self._piece(j)
            slot_models = [self.structure.model_index(s.model) for s in piece.children]
            alpha = self.edge_weights(len(piece.edges), p)
            per_slot = []
            for v in range(len(slot_models)):
                others = slot_models[:v] + slot_models[v + 1 :]
                per_slot.append(np.multiply.outer(alpha, self._child_product(others, vectors)).ravel())
            out[j] = per_slot
        return out

    def _rows(self, p: float, dist: "PartitionDistribution"):
        vectors = [dist.vectors[mt.name] for mt in self.models]
        marg = self._slot_marginals(p, vectors)
        n = len(self.colors)
        rows = {}
        for (j, color), per_slot in self._mapped.items():
            row = np.zeros(n + 1)
            for weights, idx in zip(marg[j], per_slot):
                row += np.bincount(idx, weights=weights, minlength=n + 1)
            rows[(j, color)] = row[:n]
        return rows

    def moment_matrix(self, p: float, dist: "PartitionDistribution") -> np.ndarray:
        if dist.p != p:
            raise ValueError(f"distribution computed at p={dist.p}, requested p={p}")
        rows = self._rows(p, dist)
        n = len(self.colors)
        m = np.zeros((n, n))
        for a, (j, color) in enumerate(self.colors.entries()):
            m[a] = rows[(j, color)]
        return m

    def first_generation(self, p: float, dist: "PartitionDistribution") -> np.ndarray:
        return self._rows(p, dist)[(-1, Color((0,), 0))]

    def slot_transition(self, j: int, color: Color, target: int, p: float, dist) -> dict:
        """Distribution of the child color (white included) in one slot of piece ``j``."""
        vectors = [dist.vectors[mt.name] for mt in self.models]
        weights = self._slot_marginals(p, vectors)[j][target]
        codes = self.color_table(j, color).codes[target].ravel()
        piece = self._piece(j)
        n = self.models[self.structure.model_index(piece.children[target].model)].border_size
        uniq, inv = np.unique(codes, return_inverse=True)
        mass = np.bincount(inv, weights=weights, minlength=len(uniq))
        return {decode_color(int(c), n): float(w) for c, w in zip(uniq, mass)}


# ---------------------------------------------------------------------------
# results


@dataclass
class PartitionDistribution:
    vectors: dict
    residual: float
    iterations: int
    converged: bool
    p: float

    def partitions(self, model: str, n: int):
        return dict(zip(enumerate_partitions(n), self.vectors[model]))


@dataclass(frozen=True)
class ColorSpace:
    types: tuple  # (model name, Color)
    model_indices: tuple

    def __len__(self) -> int:
        return len(self.types)

    def entries(self):
        return [(j, c) for j, (_, c) in zip(self.model_indices, self.types)]

    def index(self) -> dict:
        return {t: i for i, t in enumerate(self.types)}

    def to_json(self) -> list:
        return [{"model": name, **c.to_json()} for name, c in self.types]


@dataclass
class CriticalResult:
    p_c: float
    bracket: tuple
    flags: list = field(default_factory=list)
    scan: list = field(default_factory=list)  # (p, rho, det(M - I))
    det_residual: float = 0.0
    tolerance: float = 1e-10
    grid: int = 256
    color_space_size: int = 0
    support_sizes: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# linear algebra


def _perron_block(b: np.ndarray, rtol: float, max_iter: int) -> float:
    n = b.shape[0]
    if n == 1:
        return float(b[0, 0])
    shifted = b + np.eye(n)
    x = np.ones(n)
    lo = hi = 0.0
    for _ in range(max_iter):
        y = shifted @ x
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = y / x
        if not (np.all(y > 0.0) and np.all(np.isfinite(ratio))):
            break  # underflow on badly scaled blocks
        lo, hi = float(ratio.min()), float(ratio.max())
        if hi - lo <= rtol * hi:
            return 0.5 * (lo + hi) - 1.0
        x = y / hi
    raise ArithmeticError(f"power iteration stalled: bounds [{lo}, {hi}]")


def spectral_radius(m, rtol: float = 1e-13, max_iter: int = 20_000) -> float:
    """Perron root of a nonnegative matrix.

    Irreducible diagonal blocks are found first; on each, power iteration on
    ``B + I`` (aperiodic even when ``B`` is periodic) runs until the
    Collatz-Wielandt bounds agree to ``rtol``.  Blocks where that stalls
    (slow mixing, underflow) fall back to a dense eigenvalue solve.
    """
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 0.0
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ValueError("matrix must be finite and nonnegative")
    n_comp, labels = connected_components(csr_matrix(m > 0), directed=True, connection="strong")
    best = 0.0
    for c in range(n_comp):
        idx = np.flatnonzero(labels == c)
        block = m[np.ix_(idx, idx)]
        if not block.any():
            continue
        try:
            rho = _perron_block(block, rtol, max_iter)
        except ArithmeticError:
            rho = float(np.max(np.abs(np.linalg.eigvals(block))))
        best = max(best, rho)
    return max(best, 0.0)


# ---------------------------------------------------------------------------
# public functions


def partition_distribution(structure, p: float, tol: float = 1e-12, max_iter: int = 200_000, engine=None):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    engine = engine or Engine(structure)
    return engine.fixed_point(p, tol, max_iter)


def partition_support(structure, engine=None) -> dict:
    engine = engine or Engine(structure)
    out = {}
    for mt in engine.models:
        parts = enumerate_partitions(mt.border_size)
        out[mt.name] = [parts[i] for i in mt.support]
    return out


def reachable_colors(structure, engine=None) -> ColorSpace:
    return (engine or Engine(structure)).colors


def moment_matrix(structure, p: float, dist=None, colors=None, engine=None, tol: float = 1e-12) -> np.ndarray:
    engine = engine or Engine(structure)
    if colors is not None and len(colors) != len(engine.colors):
        raise ValueError("color space does not belong to this structure")
    dist = dist or _converged(engine, p, tol)
    return engine.moment_matrix(p, dist)


def _converged(engine: Engine, p: float, tol: float, max_iter: int = 200_000):
    dist = engine.fixed_point(p, tol, max_iter)
    if not dist.converged:
        raise ConvergenceError(p, dist.residual, dist.iterations)
    return dist


def evaluate(engine: Engine, p: float, tol: float = 1e-12):
    """``(rho, det(M - I))`` at ``p``."""
    if len(engine.colors) == 0:
        return 0.0, 1.0
    m = engine.moment_matrix(p, _converged(engine, p, tol))
    return spectral_radius(m), float(np.linalg.det(m - np.eye(len(m))))


def growth_profile(structure, p: float, generations: int, engine=None, tol: float = 1e-12) -> np.ndarray:
    """Expected type counts per generation, rows ``n = 0..generations``."""
    engine = engine or Engine(structure)
    dist = _converged(engine, p, tol)
    m = engine.moment_matrix(p, dist)
    nu = engine.first_generation(p, dist)
    out = [nu]
    for _ in range(generations):
        out.append(out[-1] @ m)
    return np.array(out)


def default_threads() -> int:
    env = os.environ.get("PERCTREE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def critical_probability(
    structure,
    grid: int = 256,
    tol: float = 1e-10,
    fp_tol: float = 1e-12,
    threads: Optional[int] = None,
    engine=None,
) -> CriticalResult:
    """First ``p`` in (0, 1] where the Perron root of ``M(p)`` reaches 1."""
    if grid < 2:
        raise ValueError("grid must be at least 2")
    engine = engine or Engine(structure)
    result = CriticalResult(
        1.0,
        (1.0, 1.0),
        tolerance=tol,
        grid=grid,
        color_space_size=len(engine.colors),
        support_sizes=engine.support_sizes(),
    )
    if len(engine.colors) == 0:
        result.flags.append("no_subcritical_root")
        result.flags.append("empty_color_space")
        return result

    points = [i / grid for i in range(1, grid)]
    threads = threads or default_threads()

    def at(p):
        return evaluate(engine, p, fp_tol)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            values = list(pool.map(at, points))
    else:
        values = [at(p) for p in points]
    result.scan = [(p, rho, det) for p, (rho, det) in zip(points, values)]

    lo, hi = 0.0, None
    for p, (rho, _) in zip(points, values):
        if rho >= 1.0:
            hi = p
            break
        lo = p
    if hi is None:
        result.flags.append("no_subcritical_root")
        result.bracket = (lo, 1.0)
        return result
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if at(mid)[0] >= 1.0:
            hi = mid
        else:
            lo = mid
    result.p_c = 0.5 * (lo + hi)
    result.bracket = (lo, hi)
    result.det_residual = at(result.p_c)[1]
    return result
