"""Tree-like structures: model pieces, child slots, the root piece.

A structure is a finite catalogue of model pieces.  Unfolding it (each child
slot spawns a copy of its model, glued along the slot's attach list) yields
the infinite graph.  Edges never live in child slots, so every edge of the
unfolded graph belongs to exactly one piece instance.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable


class StructureFormatError(ValueError):
    """Raised when a structure file cannot be parsed."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        where = f" (line {line}, column {column})" if line else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


def _pairs(edges) -> tuple[tuple[int, int], ...]:
    return tuple((int(u), int(v)) for u, v in edges)


@dataclass(frozen=True)
class ChildSlot:
    model: str
    attach: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "attach", tuple(int(a) for a in self.attach))


@dataclass(frozen=True)
class ModelPiece:
    name: str
    vertex_count: int
    edges: tuple[tuple[int, int], ...]
    border: tuple[int, ...]
    children: tuple[ChildSlot, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "edges", _pairs(self.edges))
        object.__setattr__(self, "border", tuple(int(b) for b in self.border))
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class RootPiece:
    name: str
    vertex_count: int
    edges: tuple[tuple[int, int], ...]
    origin: int
    children: tuple[ChildSlot, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "edges", _pairs(self.edges))
        object.__setattr__(self, "children", tuple(self.children))

    @property
    def border(self) -> tuple[int, ...]:
        # the root's border set is the origin alone
        return (self.origin,)


@dataclass(frozen=True)
class TreeStructure:
    name: str
    models: tuple[ModelPiece, ...]
    root: RootPiece
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "_index", {m.name: i for i, m in enumerate(self.models)})

    def model(self, name: str) -> ModelPiece:
        return self.models[self._index[name]]

    def model_index(self, name: str) -> int:
        return self._index[name]

    def has_model(self, name: str) -> bool:
        return name in self._index


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def __str__(self) -> str:
        lines = [f"error: {e}" for e in self.errors] + [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) if lines else "ok"


class InvalidStructureError(ValueError):
    def __init__(self, report: ValidationReport):
        super().__init__("invalid structure:\n" + str(report))
        self.report = report


# ---------------------------------------------------------------------------
# validation


def _components(n: int, edges) -> int:
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    count = n
    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            count -= 1
    return count


def _check_piece(label: str, piece, structure: TreeStructure, report: ValidationReport) -> None:
    n = piece.vertex_count
    if not isinstance(n, int) or n < 1:
        report.errors.append(f"{label}: vertex count must be a positive integer, got {n!r}")
        return
    seen = set()
    for k, (u, v) in enumerate(piece.edges):
        if not (0 <= u < n and 0 <= v < n):
            report.errors.append(f"{label}: edge {k} ({u},{v}) out of range")
            continue
        if u == v:
            report.errors.append(f"{label}: edge {k} is a self-loop at {u}")
            continue
        key = (min(u, v), max(u, v))
        if key in seen:
            report.errors.append(f"{label}: duplicate edge ({u},{v})")
        seen.add(key)
    border = piece.border
    if not border:
        report.errors.append(f"{label}: border is empty")
    if len(set(border)) != len(border):
        report.errors.append(f"{label}: border has repeated vertices")
    for b in border:
        if not 0 <= b < n:
            report.errors.append(f"{label}: border vertex {b} out of range")
    for k, slot in enumerate(piece.children):
        where = f"{label}: child {k}"
        if not structure.has_model(slot.model):
            report.errors.append(f"{where}: unresolved model reference {slot.model!r}")
        else:
            need = len(structure.model(slot.model).border)
            if len(slot.attach) != need:
                report.errors.append(
                    f"{where}: attach has {len(slot.attach)} vertices, model "
                    f"{slot.model!r} has border of size {need}"
                )
        if len(set(slot.attach)) != len(slot.attach):
            report.errors.append(f"{where}: attach has repeated vertices")
        for a in slot.attach:
            if not 0 <= a < n:
                report.errors.append(f"{where}: attach out of range ({a} >= {n})")
    if report.errors:
        return
    if _components(n, piece.edges) > 1:
        report.warnings.append(f"{label}: piece is not connected")


def _reachable_models(structure: TreeStructure) -> list[str]:
    order = []
    stack = [s.model for s in structure.root.children]
    seen = set()
    while stack:
        name = stack.pop()
        if name in seen or not structure.has_model(name):
            continue
        seen.add(name)
        order.append(name)
        stack.extend(s.model for s in structure.model(name).children)
    return order


def _has_cycle(structure: TreeStructure, names: Iterable[str]) -> bool:
    names = set(names)
    state: dict[str, int] = {}

    def visit(name: str) -> bool:
        state[name] = 1
        for slot in structure.model(name).children:
            nxt = slot.model
            if nxt not in names:
                continue
            if state.get(nxt) == 1:
                return True
            if nxt not in state and visit(nxt):
                return True
        state[name] = 2
        return False

    return any(name not in state and visit(name) for name in sorted(names))


def validate(structure: TreeStructure) -> ValidationReport:
    """Check the local encoding of a structure; never raises."""
    report = ValidationReport()
    if not structure.models:
        report.errors.append("structure has no model pieces")
    names = [m.name for m in structure.models]
    if len(set(names)) != len(names):
        report.errors.append("model names are not unique")
    for m in structure.models:
        _check_piece(f"model {m.name!r}", m, structure, report)
        if m.vertex_count >= 1 and not m.edges:
            report.errors.append(f"model {m.name!r}: piece has no edges")
    root = structure.root
    _check_piece(f"root {root.name!r}", root, structure, report)
    if report.errors:
        return report
    reachable = _reachable_models(structure)
    for name in names:
        if name not in reachable:
            report.warnings.append(f"model {name!r} is unreachable from the root")
    if not _has_cycle(structure, reachable):
        report.errors.append("finite unfolding: no model is instantiated infinitely often")
    return report


def require_valid(structure: TreeStructure) -> TreeStructure:
    report = validate(structure)
    if not report.ok:
        raise InvalidStructureError(report)
    return structure


# ---------------------------------------------------------------------------
# enlargement


def _merge_with_children(structure: TreeStructure, piece):
    """Glue one fresh copy of every child onto ``piece``.

    Returns the merged vertex count, the edges contributed by the children
    (re-indexed) and, per child slot, the map child-vertex -> merged vertex.
    """
    count = piece.vertex_count
    child_edges = []
    maps = []
    for slot in piece.children:
        child = structure.model(slot.model)
        where = dict(zip(child.border, slot.attach))
        vmap = []
        for w in range(child.vertex_count):
            if w in where:
                vmap.append(where[w])
            else:
                vmap.append(count)
                count += 1
        maps.append(vmap)
        child_edges.extend((vmap[u], vmap[v]) for u, v in child.edges)
    return count, child_edges, maps


def enlarge(structure: TreeStructure) -> TreeStructure:
    """Merge every non-root piece with its children.

    The root is kept as is.  Each model ``j`` becomes ``P_j`` plus one copy of
    every child piece, with the same border; its children are the former
    grandchildren.  One level of the new tree covers two levels of the old one,
    so ``unfold(enlarge(s), d)`` reproduces ``unfold(s, 2 d)``.
    """
    require_valid(structure)
    models = []
    for m in structure.models:
        count, child_edges, maps = _merge_with_children(structure, m)
        slots = []
        for slot, vmap in zip(m.children, maps):
            for grand in structure.model(slot.model).children:
                slots.append(ChildSlot(grand.model, [vmap[a] for a in grand.attach]))
        models.append(ModelPiece(m.name, count, list(m.edges) + child_edges, m.border, slots))
    return TreeStructure(structure.name + "+enlarged", models, structure.root)


def absorb_children(structure: TreeStructure) -> TreeStructure:
    """Enlarge pieces by their children, keeping the tree of pieces.

    The root becomes ``P_0`` together with its children.  Any other piece
    becomes the vertices of ``P_j`` together with its children (their edges
    included, the edges of ``P_j`` itself having moved to the parent) and its
    border becomes the whole vertex set of ``P_j``.
    """
    require_valid(structure)

    def new_slots(piece, maps):
        return [
            ChildSlot(slot.model, vmap)
            for slot, vmap in zip(piece.children, maps)
        ]

    models = []
    for m in structure.models:
        count, child_edges, maps = _merge_with_children(structure, m)
        models.append(
            ModelPiece(m.name, count, child_edges, list(range(m.vertex_count)), new_slots(m, maps))
        )
    r = structure.root
    count, child_edges, maps = _merge_with_children(structure, r)
    root = RootPiece(r.name, count, list(r.edges) + child_edges, r.origin, new_slots(r, maps))
    return TreeStructure(structure.name + "+absorbed", models, root)


# ---------------------------------------------------------------------------
# serialization


def _slot_json(slot: ChildSlot) -> dict:
    return {"model": slot.model, "attach": list(slot.attach)}


def to_dict(structure: TreeStructure) -> dict:
    return {
        "name": structure.name,
        "models": [
            {
                "name": m.name,
                "vertices": m.vertex_count,
                "edges": [list(e) for e in m.edges],
                "border": list(m.border),
                "children": [_slot_json(s) for s in m.children],
            }
            for m in structure.models
        ],
        "root": {
            "name": structure.root.name,
            "vertices": structure.root.vertex_count,
            "edges": [list(e) for e in structure.root.edges],
            "origin": structure.root.origin,
            "children": [_slot_json(s) for s in structure.root.children],
        },
    }


_INT_LIST = re.compile(r"\[\s*(-?\d+(?:,\s*-?\d+)*)\s*\]")


def serialize(structure: TreeStructure) -> bytes:
    """Canonical UTF-8 JSON text; flat integer lists stay on one line."""
    doc = json.dumps(to_dict(structure), indent=2, ensure_ascii=False)
    doc = _INT_LIST.sub(lambda m: "[" + ", ".join(x.strip() for x in m.group(1).split(",")) + "]", doc)
    return (doc + "\n").encode("utf-8")


def _require(obj: dict, key: str, kind, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise StructureFormatError(f"{where}: missing field {key!r}")
    value = obj[key]
    if kind is int and isinstance(value, bool):
        raise StructureFormatError(f"{where}: field {key!r} must be int")
    if not isinstance(value, kind):
        raise StructureFormatError(f"{where}: field {key!r} must be {kind.__name__}")
    return value


def _int_list(values, where: str) -> list[int]:
    if not isinstance(values, list) or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in values
    ):
        raise StructureFormatError(f"{where}: expected a list of integers")
    return values


def _edges(values, where: str) -> list[tuple[int, int]]:
    if not isinstance(values, list):
        raise StructureFormatError(f"{where}: edges must be a list")
    out = []
    for k, e in enumerate(values):
        pair = _int_list(e, f"{where} edge {k}")
        if len(pair) != 2:
            raise StructureFormatError(f"{where} edge {k}: expected two endpoints")
        out.append((pair[0], pair[1]))
    return out


def _slots(values, where: str) -> list[ChildSlot]:
    if not isinstance(values, list):
        raise StructureFormatError(f"{where}: children must be a list")
    out = []
    for k, s in enumerate(values):
        w = f"{where} child {k}"
        out.append(ChildSlot(_require(s, "model", str, w), _int_list(_require(s, "attach", list, w), w)))
    return out


def from_dict(doc: dict) -> TreeStructure:
    if not isinstance(doc, dict):
        raise StructureFormatError("top level must be an object")
    name = _require(doc, "name", str, "structure")
    models = []
    for k, m in enumerate(_require(doc, "models", list, "structure")):
        w = f"model {k}"
        models.append(
            ModelPiece(
                _require(m, "name", str, w),
                _require(m, "vertices", int, w),
                _edges(_require(m, "edges", list, w), w),
                _int_list(_require(m, "border", list, w), w),
                _slots(_require(m, "children", list, w), w),
            )
        )
    r = _require(doc, "root", dict, "structure")
    root = RootPiece(
        _require(r, "name", str, "root"),
        _require(r, "vertices", int, "root"),
        _edges(_require(r, "edges", list, "root"), "root"),
        _require(r, "origin", int, "root"),
        _slots(_require(r, "children", list, "root"), "root"),
    )
    return TreeStructure(name, models, root)


def parse(text) -> TreeStructure:
    """Parse structure JSON (bytes or str).  Semantic checks are left to :func:`validate`."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise StructureFormatError(f"not UTF-8: {exc.reason}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StructureFormatError(f"syntax error: {exc.msg}", exc.lineno, exc.colno) from None
    return from_dict(doc)


def load(path) -> TreeStructure:
    with open(path, "rb") as fh:
        return parse(fh.read())
