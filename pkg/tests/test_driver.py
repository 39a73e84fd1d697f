import json
from fractions import Fraction

import pytest

from hypnielsen import driver as D
from hypnielsen import nielsen as N
from hypnielsen import words as W

from conftest import SANOV, SL2Z, h2_spec, schottky, tree_spec


def run(spec):
    return D.reduce(D.parse_spec(spec))


def assert_replays(res, spec):
    parsed = D.parse_spec(spec)
    M0 = N.GenTuple(res.tuple.model, N.with_provenance(parsed.generators), res.tuple.basepoint)
    assert N.replay(res.chain, M0).elements == res.tuple.elements


# ---------------------------------------------------------------- parsing


def test_parse_matrix_forms():
    plain = D.parse_spec({"model": {"kind": "H2"}, "generators": [[[1, 2], [0, 1]]]})
    boxed = D.parse_spec(h2_spec([SANOV[0]]))
    assert plain.generators[0].concrete == boxed.generators[0].concrete


@pytest.mark.parametrize("bad", [
    {},
    {"model": {"kind": "H2"}, "generators": []},
    {"model": {"kind": "H2"}, "generators": [[[1, 2], [0, 1]]], "config": {"nope": 1}},
    {"model": {"kind": "H2"}, "generators": [[[1.5, 0], [0, 2]]]},
    {"model": {"kind": "H2"}, "generators": [[[1, 2], [3, 4]]]},
    {"model": {"kind": "tree", "rank": 1}, "generators": ["ab"]},
    {"model": {"kind": "H2"}, "generators": [{"field": "real"}]},
    {"model": {"kind": "H2"}, "generators": [[[1, 2], [0, 1]]], "config": {"shortBound": -1}},
])
def test_parse_rejects(bad):
    with pytest.raises(D.SpecError):
        D.parse_spec(bad)


def test_complex_entries_select_h3():
    pair = {"model": {"kind": "H3"}, "generators": [{"entries": [[[2, 0], [0, 0]], [[0, 0], ["1/2", 0]]]}]}
    text = {"model": {"kind": "H3"}, "generators": [[["2+i", "0"], ["0", "2/5-1/5i"]]]}
    for spec in (pair, text):
        g = D.parse_spec(spec).generators[0]
        assert g.kind == "H3" and g.concrete.mode == "rational"
    with pytest.raises(D.SpecError):
        D.parse_spec({"model": {"kind": "H2"}, "generators": [[["1", "i"], ["0", "1"]]]})


def test_float_mode_allows_decimals():
    spec = {"model": {"kind": "H2"}, "generators": [[[2.5, 0], [0, 0.4]]], "config": {"float": True}}
    assert D.parse_spec(spec).n == 1


# --------------------------------------------------------------- outcomes


def test_sl2z_short_elliptic():
    res = run(h2_spec(SL2Z))
    assert res.outcome == D.SHORT and res.exit_code == 2
    assert len(res.diagnostics["history"]) <= 2
    w = res.witness
    assert w["index"] == 1
    assert abs(Fraction(w["trace"])) < 2
    assert w["translation_length"] == 0
    assert_replays(res, h2_spec(SL2Z))


def test_tree_redundant_trivial_first():
    res = run(tree_spec(["a", "ab", "b"]))
    assert res.outcome == D.SHORT
    assert res.tuple.elements[0].is_identity()
    assert res.witness["achieved"] == 0
    # the provenance word is a relation among the inputs
    images = {1: W.parse("a"), 2: W.parse("ab"), 3: W.parse("b")}
    assert W.substitute(W.parse(res.witness["word"]), images) == ()
    assert_replays(res, tree_spec(["a", "ab", "b"]))


def test_tree_basis_free():
    res = run(tree_spec(["ab", "b"]))
    assert res.outcome == D.FREE and res.exit_code == 0
    assert res.certificate["margin"] > 0


def test_schottky_free():
    res = run(h2_spec(schottky(30)))
    assert res.outcome == D.FREE
    assert res.certificate["probe"]["counterexample_count"] == 0


def test_shorten_a2_a3():
    res = D.epsilon_shorten(D.parse_spec(tree_spec(["aa", "aaa"])), 1)
    assert res.outcome == D.SHORT
    assert res.tuple.elements[0].is_identity()
    assert [len(g.concrete) for g in res.tuple.elements] == [0, 1]
    assert_replays(res, tree_spec(["aa", "aaa"]))


def test_shorten_basis_any_eps():
    for eps in (0.5, 1, 10):
        assert D.epsilon_shorten(D.parse_spec(tree_spec(["a", "b"])), eps).outcome == D.FREE


def test_shorten_rejects():
    with pytest.raises(D.SpecError):
        D.epsilon_shorten(D.parse_spec(tree_spec(["a", "b"])), 0)
    with pytest.raises(D.SpecError):
        D.epsilon_shorten(D.parse_spec(h2_spec(SANOV)), 1e-12)


# --------------------------------------------------------- report properties


def test_report_schema():
    data = json.loads(run(tree_spec(["a", "ab", "b"])).dumps())
    assert {"outcome", "tuple", "chain", "basepoint", "constants", "diagnostics", "timings"} <= set(data)
    assert data["timings"] is None


@pytest.mark.parametrize("spec", [tree_spec(["a", "ab", "b"]), h2_spec(SL2Z), h2_spec(schottky(20))])
def test_byte_identical(spec):
    assert run(spec).dumps() == run(spec).dumps()


@pytest.mark.parametrize("words", [["a", "ab", "b"], ["aab", "bbba"], ["aa", "aaa"]])
def test_scale_equivariance_tree(words):
    a, b = run(tree_spec(words, scale=1)), run(tree_spec(words, scale=7))
    assert a.outcome == b.outcome
    assert a.chain.moves == b.chain.moves
    for ea, eb in zip(a.to_json()["tuple"], b.to_json()["tuple"]):
        assert Fraction(ea["displacement"]) == 7 * Fraction(eb["displacement"])


def test_scale_equivariance_h2():
    a, b = run(h2_spec(SL2Z, scale=1)), run(h2_spec(SL2Z, scale=7))
    assert a.outcome == b.outcome
    assert a.chain.moves == b.chain.moves
    for ea, eb in zip(a.to_json()["tuple"], b.to_json()["tuple"]):
        assert float(ea["displacement"]) == pytest.approx(7 * float(eb["displacement"]), abs=1e-9)


def test_result_roundtrip_from_report():
    res = run(tree_spec(["a", "ab", "b"]))
    back = D.result_from_report(json.loads(res.dumps()))
    assert back.outcome == res.outcome
    assert [g.concrete for g in back.tuple.elements] == [g.concrete for g in res.tuple.elements]
    assert back.chain == res.chain


def test_certify_only():
    assert D.certify_only(D.parse_spec(tree_spec(["a", "b"])))["certified"]
    assert not D.certify_only(D.parse_spec(h2_spec(SL2Z)))["certified"]
