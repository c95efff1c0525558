from __future__ import annotations

import json

import pytest

from perctree import builders
from perctree.structure import (
    ChildSlot,
    InvalidStructureError,
    ModelPiece,
    RootPiece,
    StructureFormatError,
    TreeStructure,
    absorb_children,
    enlarge,
    from_dict,
    parse,
    serialize,
    to_dict,
    validate,
)

from conftest import isomorphic_rooted, unfolded_nx

SL2Z_DOC = {
    "name": "sl2z",
    "models": [
        {
            "name": "square",
            "vertices": 4,
            "edges": [[0, 1], [1, 2], [2, 3], [3, 0]],
            "border": [0, 2],
            "children": [{"model": "hexagon", "attach": [1, 3]}],
        },
        {
            "name": "hexagon",
            "vertices": 6,
            "edges": [[0, 1], [1, 2], [2, 3], [3, 4], [4, 5], [5, 0]],
            "border": [0, 3],
            "children": [{"model": "square", "attach": [1, 4]}, {"model": "square", "attach": [2, 5]}],
        },
    ],
    "root": {
        "name": "root",
        "vertices": 4,
        "edges": [[0, 1], [1, 2], [2, 3], [3, 0]],
        "origin": 0,
        "children": [{"model": "hexagon", "attach": [0, 2]}, {"model": "hexagon", "attach": [1, 3]}],
    },
}


def _simple(children=True, **overrides):
    slots = [ChildSlot("m", [1])] if children else []
    model = ModelPiece("m", 2, [(0, 1)], [0], slots)
    root = RootPiece("root", 2, [(0, 1)], 0, [ChildSlot("m", [1])])
    fields = {"models": [model], "root": root}
    fields.update(overrides)
    return TreeStructure("s", fields["models"], fields["root"])


def test_sl2z_file_matches_builder(sl2z):
    assert parse(json.dumps(SL2Z_DOC)) == sl2z
    assert to_dict(sl2z) == SL2Z_DOC


def test_valid_builders_have_no_errors(sl2z, grandparent):
    for s in (sl2z, grandparent, builders.free_group_ball(2, 2)):
        assert validate(s).ok, str(validate(s))


def test_validate_attach_out_of_range():
    bad = ModelPiece("m", 2, [(0, 1)], [0], [ChildSlot("m", [5])])
    report = validate(_simple(models=[bad]))
    assert not report.ok
    assert any("attach out of range" in e for e in report.errors)


def test_validate_finite_unfolding():
    report = validate(_simple(children=False))
    assert any("finite unfolding" in e for e in report.errors)


@pytest.mark.parametrize(
    "model, needle",
    [
        (ModelPiece("m", 2, [(0, 2)], [0], [ChildSlot("m", [1])]), "out of range"),
        (ModelPiece("m", 2, [(1, 1)], [0], [ChildSlot("m", [1])]), "self-loop"),
        (ModelPiece("m", 2, [(0, 1), (1, 0)], [0], [ChildSlot("m", [1])]), "duplicate edge"),
        (ModelPiece("m", 2, [(0, 1)], [], [ChildSlot("m", [1])]), "border is empty"),
        (ModelPiece("m", 2, [(0, 1)], [0], [ChildSlot("m", [0, 1])]), "attach has 2 vertices"),
        (ModelPiece("m", 2, [(0, 1)], [0], [ChildSlot("zz", [1])]), "unresolved model reference"),
        (ModelPiece("m", 2, [], [0], [ChildSlot("m", [1])]), "no edges"),
    ],
)
def test_validate_errors(model, needle):
    report = validate(_simple(models=[model]))
    assert any(needle in e for e in report.errors), report.errors


def test_validate_warnings():
    spare = ModelPiece("spare", 2, [(0, 1)], [0], [])
    split = ModelPiece("m", 4, [(0, 1), (2, 3)], [0], [ChildSlot("m", [1])])
    report = validate(_simple(models=[split, spare]))
    assert report.ok
    assert any("unreachable" in w for w in report.warnings)
    assert any("not connected" in w for w in report.warnings)


def test_round_trip_exact(sl2z, grandparent):
    for s in (sl2z, grandparent, builders.free_group_ball(2, 2), builders.hnn(
        builders.FiniteGraph.complete(2), [[0, 1]], [[0, 1]]
    )):
        text = serialize(s)
        assert parse(text) == s
        assert serialize(parse(text)) == text


def test_parse_accepts_other_whitespace_and_key_order(sl2z):
    text = json.dumps(SL2Z_DOC, sort_keys=True, separators=(",", ":"))
    assert parse(text.encode()) == sl2z


def test_parse_empty_is_syntax_error():
    with pytest.raises(StructureFormatError) as info:
        parse(b"")
    assert "syntax error" in str(info.value)


def test_parse_reports_position():
    with pytest.raises(StructureFormatError) as info:
        parse('{\n  "name": "x",\n  "models": [,]\n}')
    assert info.value.line == 3 and info.value.column > 0


def test_parse_schema_errors():
    doc = json.loads(json.dumps(SL2Z_DOC))
    doc["models"][0]["vertices"] = "four"
    with pytest.raises(StructureFormatError):
        from_dict(doc)
    doc = json.loads(json.dumps(SL2Z_DOC))
    del doc["root"]["origin"]
    with pytest.raises(StructureFormatError):
        from_dict(doc)


def test_unknown_reference_parses_then_fails_validation():
    doc = json.loads(json.dumps(SL2Z_DOC))
    doc["models"][0]["children"][0]["model"] = "octagon"
    s = parse(json.dumps(doc))
    report = validate(s)
    assert any("unresolved" in e for e in report.errors)


# enlargement


def test_enlarge_sizes(sl2z):
    e = enlarge(sl2z)
    square, hexagon = e.model("square"), e.model("hexagon")
    assert (square.vertex_count, len(square.children)) == (8, 2)
    assert (hexagon.vertex_count, len(hexagon.children)) == (10, 2)
    assert len(square.edges) == 4 + 6 and len(hexagon.edges) == 6 + 2 * 4
    assert validate(e).ok


def test_enlarge_rejects_invalid():
    with pytest.raises(InvalidStructureError):
        enlarge(_simple(children=False))


@pytest.mark.parametrize("d", range(0, 5))
def test_enlarge_unfold_isomorphic(sl2z, d):
    g, go = unfolded_nx(enlarge(sl2z), d)
    h, ho = unfolded_nx(sl2z, 2 * d)
    assert g.number_of_nodes() == h.number_of_nodes()
    assert isomorphic_rooted(g, go, h, ho)


@pytest.mark.parametrize("d", range(0, 4))
def test_enlarge_unfold_isomorphic_grandparent(grandparent, d):
    g, go = unfolded_nx(enlarge(grandparent), d)
    h, ho = unfolded_nx(grandparent, 2 * d)
    assert isomorphic_rooted(g, go, h, ho)


def test_absorb_children_shape(sl2z):
    a = absorb_children(sl2z)
    square, hexagon = a.model("square"), a.model("hexagon")
    assert (square.vertex_count, len(square.border), len(square.children)) == (8, 4, 1)
    assert (hexagon.vertex_count, len(hexagon.border), len(hexagon.children)) == (10, 6, 2)
    assert a.root.vertex_count == 12
    assert validate(a).ok


@pytest.mark.parametrize("d", range(0, 4))
def test_absorb_children_unfold(sl2z, d):
    g, go = unfolded_nx(absorb_children(sl2z), d)
    h, ho = unfolded_nx(sl2z, d + 1)
    assert isomorphic_rooted(g, go, h, ho)
