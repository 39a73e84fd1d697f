import pytest

from hypnielsen import driver as D
from hypnielsen import render as R

from conftest import SL2Z, h2_spec, schottky, tree_spec


def run(spec):
    return D.reduce(D.parse_spec(spec))


def orbit_dots(svg: str) -> int:
    # orbit points are dark dots, sigma marks are purple
    return svg.count('fill="#111"') + svg.count('fill="#555"')


@pytest.mark.parametrize("depth", [1, 2, 3])
def test_h2_orbit_ball_and_axes(depth):
    res = run(h2_spec(schottky(20)))
    assert res.outcome == D.FREE
    svg = R.render(res, depth=depth)
    assert svg.startswith("<svg")
    assert orbit_dots(svg) == 1 + 2 * (3 ** depth - 1)
    assert svg.count('stroke-dasharray="4 3"') == 2


def test_h2_free_draws_sigma():
    svg = R.render(run(h2_spec(schottky(20))))
    assert 'stroke="#8e44ad"' in svg


def test_short_result_highlights_move():
    svg = R.render(run(h2_spec(SL2Z)))
    assert 'stroke="#e67e22"' in svg
    assert "ShortElement" in svg


def test_tree_layout():
    svg = R.render(run(tree_spec(["aab", "bbba"])))
    assert 'fill="#c0392b"' in svg
    assert "Free" in svg


def test_deterministic(tmp_path):
    res = run(h2_spec(schottky(20)))
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    R.render(res, a)
    R.render(res, b)
    assert a.read_bytes() == b.read_bytes()


def test_h3_unsupported():
    spec = {"model": {"kind": "H3"},
            "generators": [{"entries": [[[2, 0], [0, 0]], [[0, 0], ["1/2", 0]]], "field": "complex"}]}
    res = D.reduce(D.parse_spec(spec))
    with pytest.raises(R.RenderError):
        R.render(res)
