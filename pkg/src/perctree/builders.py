"""Constructors for the standard families of tree-like structures."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .structure import ChildSlot, ModelPiece, RootPiece, TreeStructure, require_valid


@dataclass(frozen=True)
class FiniteGraph:
    """A connected finite graph with a distinguished base vertex."""

    vertex_count: int
    edges: tuple
    base: int = 0
    name: str = "G"

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(u), int(v)) for u, v in self.edges))
        n = self.vertex_count
        if n < 1:
            raise ValueError("a graph needs at least one vertex")
        if not 0 <= self.base < n:
            raise ValueError(f"base {self.base} out of range")
        seen = set()
        for u, v in self.edges:
            if not (0 <= u < n and 0 <= v < n) or u == v:
                raise ValueError(f"bad edge ({u},{v})")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge ({u},{v})")
            seen.add(key)
        if not self.connected():
            raise ValueError(f"graph {self.name!r} is not connected")

    def connected(self) -> bool:
        adj = [[] for _ in range(self.vertex_count)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        seen = {0}
        stack = [0]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.vertex_count

    @classmethod
    def complete(cls, n: int) -> "FiniteGraph":
        return cls(n, [(i, j) for i in range(n) for j in range(i + 1, n)], 0, f"k{n}")

    @classmethod
    def cycle(cls, n: int) -> "FiniteGraph":
        if n < 3:
            raise ValueError("a cycle needs at least 3 vertices")
        return cls(n, [(i, (i + 1) % n) for i in range(n)], 0, f"c{n}")

    @classmethod
    def from_spec(cls, text: str) -> "FiniteGraph":
        """``k<n>`` (complete) or ``c<n>`` (cycle), e.g. ``k2``, ``c4``."""
        text = text.strip().lower()
        if len(text) >= 2 and text[0] in "kc" and text[1:].isdigit():
            n = int(text[1:])
            if text[0] == "k" and n >= 1:
                return cls.complete(n)
            if text[0] == "c":
                return cls.cycle(n)
        raise ValueError(f"unknown graph {text!r}; expected k<n> or c<n>")


def free_product(factors: Sequence[FiniteGraph]) -> TreeStructure:
    """Free product of vertex-transitive factor graphs glued at single vertices.

    Every vertex is a cut vertex shared by one copy of each factor.  A copy of
    factor ``i`` hangs children of every other factor at each of its vertices
    except the one it shares with its parent.
    """
    if len(factors) < 2:
        raise ValueError("a free product needs at least two factors")
    names = [f"f{i}" for i in range(len(factors))]
    models = []
    for i, g in enumerate(factors):
        slots = [
            ChildSlot(names[k], [v])
            for v in range(g.vertex_count)
            if v != g.base
            for k in range(len(factors))
            if k != i
        ]
        models.append(ModelPiece(names[i], g.vertex_count, g.edges, [g.base], slots))
    g0 = factors[0]
    root_slots = [
        ChildSlot(names[k], [v]) for v in range(g0.vertex_count) for k in range(1, len(factors))
    ]
    root = RootPiece("root", g0.vertex_count, g0.edges, g0.base, root_slots)
    label = "*".join(g.name for g in factors)
    return require_valid(TreeStructure(f"free-product({label})", models, root))


def _check_cosets(g: FiniteGraph, cosets) -> None:
    if not cosets:
        raise ValueError("coset list is empty")
    size = len(cosets[0])
    if any(len(c) != size for c in cosets):
        raise ValueError("cosets must all have the same size")
    flat = sorted(v for c in cosets for v in c)
    if flat != list(range(g.vertex_count)):
        raise ValueError("cosets must partition the vertex set")


def amalgam(
    g1: FiniteGraph,
    cosets1: Sequence[Sequence[int]],
    g2: FiniteGraph,
    cosets2: Sequence[Sequence[int]],
    names: tuple = ("A", "B"),
    name: str = "amalgam",
) -> TreeStructure:
    """Amalgamated product along a common subgroup.

    ``cosets[c][i]`` is the vertex ``r_c h_i``: position ``i`` refers to the
    same subgroup element in every coset of both factors, which is what the
    attach order encodes.  Coset 0 is the subgroup itself.
    """
    _check_cosets(g1, cosets1)
    _check_cosets(g2, cosets2)
    if len(cosets1[0]) != len(cosets2[0]):
        raise ValueError("the shared subgroup must have the same size on both sides")
    n1, n2 = names
    m1 = ModelPiece(n1, g1.vertex_count, g1.edges, cosets1[0], [ChildSlot(n2, c) for c in cosets1[1:]])
    m2 = ModelPiece(n2, g2.vertex_count, g2.edges, cosets2[0], [ChildSlot(n1, c) for c in cosets2[1:]])
    root = RootPiece("root", g1.vertex_count, g1.edges, cosets1[0][0], [ChildSlot(n2, c) for c in cosets1])
    return require_valid(TreeStructure(name, [m1, m2], root))


def sl2z() -> TreeStructure:
    """The Cayley graph of SL(2, Z) as Z4 and Z6 amalgamated over Z2."""
    return amalgam(
        FiniteGraph.cycle(4),
        [[0, 2], [1, 3]],
        FiniteGraph.cycle(6),
        [[0, 3], [1, 4], [2, 5]],
        ("square", "hexagon"),
        "sl2z",
    )


def hnn(
    base: FiniteGraph,
    h_cosets: Sequence[Sequence[int]],
    k_cosets: Sequence[Sequence[int]],
    alpha: Optional[Sequence[int]] = None,
    name: str = "hnn",
) -> TreeStructure:
    """HNN extension of a finite group along an isomorphism ``H -> K``.

    The stable letter adds an edge ``x -- x t`` at every vertex.  A piece is
    one copy of the base graph together with the ``t``-edges leaving it,
    except the ones leading back to its parent.  ``x`` in the ``c``-th coset
    of ``H`` reaches the neighbour piece reached through that coset at its
    ``K``-vertex ``alpha(h)``; going backwards, ``K``-cosets lead to
    ``H``-vertices.

    Coset lists are positionally aligned (``cosets[c][i] = r_c h_i``, coset 0
    being the subgroup) and ``alpha[i] = j`` states that the isomorphism
    sends ``H[0][i]`` to ``K[0][j]``.  Model ``"K"`` is a piece entered
    forwards (its border is its copy of ``K``); model ``"H"`` is entered
    backwards.
    """
    _check_cosets(base, h_cosets)
    _check_cosets(base, k_cosets)
    size = len(h_cosets[0])
    if len(k_cosets[0]) != size:
        raise ValueError("H and K must have the same size")
    if alpha is None:
        alpha = list(range(size))
    if sorted(alpha) != list(range(size)):
        raise ValueError("alpha must be a permutation of the subgroup positions")
    alpha_inv = [0] * size
    for i, j in enumerate(alpha):
        alpha_inv[j] = i
    n = base.vertex_count

    def build(skip_forward: bool, skip_backward: bool):
        count = n
        edges = list(base.edges)
        slots = []
        for c, coset in enumerate(h_cosets):
            if skip_forward and c == 0:
                continue
            fresh = list(range(count, count + size))
            edges.extend((x, f) for x, f in zip(coset, fresh))
            count += size
            # border position j of a "K" child is K[0][j] = alpha(H[0][alpha_inv[j]])
            slots.append(ChildSlot("K", [fresh[alpha_inv[j]] for j in range(size)]))
        for c, coset in enumerate(k_cosets):
            if skip_backward and c == 0:
                continue
            fresh = list(range(count, count + size))
            edges.extend((x, f) for x, f in zip(coset, fresh))
            count += size
            slots.append(ChildSlot("H", [fresh[alpha[i]] for i in range(size)]))
        return count, edges, slots

    count, edges, slots = build(False, True)
    model_k = ModelPiece("K", count, edges, k_cosets[0], slots)
    count, edges, slots = build(True, False)
    model_h = ModelPiece("H", count, edges, h_cosets[0], slots)
    count, edges, slots = build(False, False)
    root = RootPiece("root", count, edges, base.base, slots)
    return require_valid(TreeStructure(name, [model_k, model_h], root))


# ---------------------------------------------------------------------------
# free group of rank 2 with the ball of radius k as generating set

_LETTERS = "aAbB"
_INVERSE = {"a": "A", "A": "a", "b": "B", "B": "b"}


def _words(max_len: int) -> list[str]:
    out = [""]
    frontier = [""]
    for _ in range(max_len):
        nxt = []
        for w in frontier:
            for x in _LETTERS:
                if w and _INVERSE[w[-1]] == x:
                    continue
                nxt.append(w + x)
        out.extend(nxt)
        frontier = nxt
    return out


def _distance(u: str, v: str) -> int:
    common = 0
    for x, y in zip(u, v):
        if x != y:
            break
        common += 1
    return len(u) + len(v) - 2 * common


def _letter_map(x: str) -> dict:
    """A signed permutation of the letters sending ``x`` to ``a``."""
    pairs = {"a": ("a", "b"), "A": ("A", "b"), "b": ("b", "a"), "B": ("B", "a")}
    first, second = pairs[x]
    image = {first: "a", _INVERSE[first]: "A", second: "b", _INVERSE[second]: "B"}
    return image


def _apply(image: dict, word: str) -> str:
    return "".join(image[c] for c in word)


def free_group_ball(rank: int = 2, k: int = 2) -> TreeStructure:
    """Cayley graph of F_2 with all elements of length at most ``k`` as generators.

    Vertices are reduced words, joined when their distance in the free
    generators is at most ``k``.  A piece is the subtree through a letter
    ``x``: ``{()} u {words starting with x of length <= k}``, relative to its
    attachment point; its border is the part of length ``< k``.  An edge lives
    in the first piece (closest to the root) containing both endpoints.
    """
    if rank != 2:
        raise ValueError("only rank 2 is supported")
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")

    # model piece for the letter a, with the empty word as its anchor
    border_words = [""] + [w for w in _words(k - 1) if w.startswith("a")]
    inner_words = [w for w in _words(k) if w.startswith("a") and len(w) == k]
    verts = border_words + inner_words
    index = {w: i for i, w in enumerate(verts)}
    border_set = set(border_words)
    edges = [
        (i, j)
        for i, u in enumerate(verts)
        for j, v in enumerate(verts)
        if i < j and _distance(u, v) <= k and not (u in border_set and v in border_set)
    ]

    def shifted(word: str) -> str:
        # the word a.w reduced, for w a border word of a child through letter y
        if word.startswith("A"):
            return word[1:]
        return "a" + word

    slots = []
    for y in "abB":
        # the child through a.y, re-expressed with its own letter mapped to a
        back = {v: c for c, v in _letter_map(y).items()}
        attach = [index[shifted(_apply(back, w))] for w in border_words]
        slots.append(ChildSlot("piece", attach))
    model = ModelPiece("piece", len(verts), edges, list(range(len(border_words))), slots)

    root_words = _words(k - 1)
    root_index = {w: i for i, w in enumerate(root_words)}
    root_edges = [
        (i, j)
        for i, u in enumerate(root_words)
        for j, v in enumerate(root_words)
        if i < j and _distance(u, v) <= k
    ]
    root_slots = []
    for x in _LETTERS:
        back = {v: c for c, v in _letter_map(x).items()}
        attach = [root_index[_apply(back, w)] for w in border_words]
        root_slots.append(ChildSlot("piece", attach))
    root = RootPiece("root", len(root_words), root_edges, root_index[""], root_slots)
    return require_valid(TreeStructure(f"fball(2,{k})", [model], root))


# ---------------------------------------------------------------------------
# grandparent graph


def grandparent() -> TreeStructure:
    """3-regular tree plus an edge from each vertex to its grandparent.

    "Parent" points toward a fixed end.  A piece is a vertex ``u``, its child
    ``v`` and the two children ``c1, c2`` of ``v``, with the tree edges
    ``v-c1, v-c2`` and the grandparent edges ``u-c1, u-c2``; the edge
    ``u-v`` belongs to the piece one level up.  Pieces meet along the pairs
    ``(v, c)``.  Pieces on the ray toward the fixed end are entered from the
    other side and get their own model.
    """
    vertices = 4  # 0 = u, 1 = v, 2 = c1, 3 = c2
    edges = [(1, 2), (1, 3), (0, 2), (0, 3)]
    normal = ModelPiece(
        "normal", vertices, edges, [0, 1], [ChildSlot("normal", [1, 2]), ChildSlot("normal", [1, 3])]
    )
    ray = ModelPiece(
        "ray", vertices, edges, [1, 2], [ChildSlot("ray", [0, 1]), ChildSlot("normal", [1, 3])]
    )
    root = RootPiece(
        "root",
        vertices,
        edges,
        1,
        [ChildSlot("ray", [0, 1]), ChildSlot("normal", [1, 2]), ChildSlot("normal", [1, 3])],
    )
    return require_valid(TreeStructure("grandparent", [normal, ray], root))


FAMILIES = ("free-product", "amalgam", "hnn", "fball", "grandparent", "sl2z")
