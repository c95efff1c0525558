"""Set partitions of ordered border lists and the two connectivity kernels.

Partitions are stored as restricted-growth strings (tuples of ints): position
``i`` holds the block label of border vertex ``i``, labels appear in order of
first occurrence.  Enumeration is lexicographic in that encoding, and this
order is the index space used for every probability vector in the solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

Partition = tuple

MAX_BORDER = 12


class UnionFind:
    """Array-backed disjoint sets with path halving."""

    __slots__ = ("parent",)

    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the smaller root so labels stay deterministic
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb


def canonical(labels: Sequence) -> Partition:
    """Relabel an arbitrary labelling into restricted-growth form."""
    seen: dict = {}
    out = []
    for lab in labels:
        if lab not in seen:
            seen[lab] = len(seen)
        out.append(seen[lab])
    return tuple(out)


def block_count(rgs: Partition) -> int:
    return max(rgs) + 1 if rgs else 0


def blocks(rgs: Partition) -> list[list[int]]:
    out: list[list[int]] = [[] for _ in range(block_count(rgs))]
    for i, b in enumerate(rgs):
        out[b].append(i)
    return out


@lru_cache(maxsize=None)
def enumerate_partitions(n: int) -> tuple[Partition, ...]:
    """All set partitions of ``n`` ordered positions, lexicographic rgs order.

    >>> enumerate_partitions(2)
    ((0, 0), (0, 1))
    """
    if not 1 <= n <= MAX_BORDER:
        raise ValueError(f"border size {n} outside supported range 1..{MAX_BORDER}")
    out: list[Partition] = []

    def extend(prefix: list[int], top: int) -> None:
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        for label in range(top + 2):
            prefix.append(label)
            extend(prefix, max(top, label))
            prefix.pop()

    extend([0], 0)
    return tuple(out)


@lru_cache(maxsize=None)
def partition_index(n: int) -> dict:
    return {rgs: i for i, rgs in enumerate(enumerate_partitions(n))}


def diagonal(n: int) -> Partition:
    return tuple(range(n))


def joined(n: int) -> Partition:
    return (0,) * n


def refines(finer: Partition, coarser: Partition) -> bool:
    """True when every block of ``finer`` sits inside a block of ``coarser``."""
    image: dict = {}
    for a, b in zip(finer, coarser):
        if image.setdefault(a, b) != b:
            return False
    return True


@dataclass(frozen=True)
class Color:
    """Partition of a border list plus the block connected to the origin.

    ``marked`` is ``None`` for a white color.
    """

    partition: Partition
    marked: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "partition", tuple(self.partition))
        if self.marked is not None and not 0 <= self.marked < block_count(self.partition):
            raise ValueError(f"marked block {self.marked} out of range for {self.partition}")

    @property
    def white(self) -> bool:
        return self.marked is None

    def marked_positions(self) -> tuple[int, ...]:
        if self.marked is None:
            return ()
        return tuple(i for i, b in enumerate(self.partition) if b == self.marked)

    def to_json(self) -> dict:
        return {"partition": list(self.partition), "marked": self.marked}


@lru_cache(maxsize=None)
def enumerate_colors(n: int) -> tuple[Color, ...]:
    """Colors of an ``n``-border: partitions in rgs order, white first within each."""
    out = []
    for rgs in enumerate_partitions(n):
        out.append(Color(rgs, None))
        out.extend(Color(rgs, b) for b in range(block_count(rgs)))
    return tuple(out)


@lru_cache(maxsize=None)
def color_index(n: int) -> dict:
    return {c: i for i, c in enumerate(enumerate_colors(n))}


def _check_subset(piece, open_edges: int) -> None:
    if open_edges < 0 or open_edges >> len(piece.edges):
        raise ValueError(f"edge subset {open_edges:#x} wider than {len(piece.edges)} edges")


def _union_open_edges(uf: UnionFind, edges, open_edges: int) -> None:
    k = 0
    while open_edges:
        if open_edges & 1:
            u, v = edges[k]
            uf.union(u, v)
        open_edges >>= 1
        k += 1


def _union_child(uf: UnionFind, attach: Sequence[int], rgs: Partition) -> None:
    first: dict = {}
    for vertex, label in zip(attach, rgs):
        if label in first:
            uf.union(first[label], vertex)
        else:
            first[label] = vertex


def induced_partition(piece, open_edges: int, child_partitions: Sequence[Partition]) -> Partition:
    """Partition of ``piece.border`` induced by the open edges and the children.

    ``open_edges`` is a bitmask over ``piece.edges``; ``child_partitions[k]``
    is the descendant partition carried by ``piece.children[k]``.
    """
    _check_subset(piece, open_edges)
    if len(child_partitions) != len(piece.children):
        raise ValueError(
            f"expected {len(piece.children)} child partitions, got {len(child_partitions)}"
        )
    uf = UnionFind(piece.vertex_count)
    _union_open_edges(uf, piece.edges, open_edges)
    for slot, rgs in zip(piece.children, child_partitions):
        if len(rgs) != len(slot.attach):
            raise ValueError(f"partition {rgs} does not match attach list {slot.attach}")
        _union_child(uf, slot.attach, rgs)
    return canonical([uf.find(v) for v in piece.border])


def child_color(
    piece,
    parent_color: Color,
    open_edges: int,
    sibling_partitions: Sequence[Optional[Partition]],
    target: int,
) -> Color:
    """Color of child ``target`` given the parent's color and local state.

    ``sibling_partitions`` has one entry per child slot; the entry at
    ``target`` is ignored and may be ``None``.  The origin is modelled as an
    extra vertex glued to the parent's marked block.
    """
    _check_subset(piece, open_edges)
    n_slots = len(piece.children)
    if not 0 <= target < n_slots:
        raise ValueError(f"target {target} out of range for {n_slots} child slots")
    if len(sibling_partitions) != n_slots:
        raise ValueError(f"expected {n_slots} sibling partitions, got {len(sibling_partitions)}")
    border = piece.border
    if len(parent_color.partition) != len(border):
        raise ValueError(f"parent color {parent_color} does not match border {border}")

    origin = piece.vertex_count
    uf = UnionFind(origin + 1)
    _union_child(uf, border, parent_color.partition)
    for pos in parent_color.marked_positions():
        uf.union(origin, border[pos])
    _union_open_edges(uf, piece.edges, open_edges)
    for k, (slot, rgs) in enumerate(zip(piece.children, sibling_partitions)):
        if k == target:
            continue
        if rgs is None or len(rgs) != len(slot.attach):
            raise ValueError(f"sibling {k} needs a partition of size {len(slot.attach)}")
        _union_child(uf, slot.attach, rgs)

    roots = [uf.find(v) for v in piece.children[target].attach]
    rgs = canonical(roots)
    origin_root = uf.find(origin)
    marked = None
    for r, label in zip(roots, rgs):
        if r == origin_root:
            marked = label
            break
    return Color(rgs, marked)
