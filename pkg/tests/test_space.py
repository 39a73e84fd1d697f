import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypnielsen import space as S

from oracles import vertical_length

H2 = S.SpaceModel(S.H2)
TREE2 = S.SpaceModel(S.TREE, rank=2)


def tp(word, off=0):
    from hypnielsen import words as W
    return S.TreePoint(W.parse(word), Fraction(off))


# ---------------------------------------------------------------- dist


def test_dist_vertical_matches_line_integral():
    d = S.dist(H2, S.H2Point(1j), S.H2Point(4j))
    assert d == pytest.approx(math.log(4), abs=1e-12)
    assert d == pytest.approx(vertical_length(1, 4), abs=1e-8)
    assert d == pytest.approx(1.386294, abs=1e-6)


def test_dist_identity_of_indiscernibles():
    p = S.H2Point(0.3 + 2j)
    assert S.dist(H2, p, p) == 0
    assert S.dist(TREE2, tp("aB"), tp("aB")) == 0


def test_tree_single_edge():
    assert S.dist(TREE2, tp(""), tp("a")) == 1


def test_tree_distance_with_offsets_is_exact():
    # halfway along the edge a -> ab, then to the root
    p = S.TreePoint((1, 2), Fraction(1, 2))
    assert S.dist(TREE2, p, tp("")) == Fraction(3, 2)
    assert S.dist(TREE2, p, tp("b")) == Fraction(5, 2)


def test_model_mismatch():
    with pytest.raises(S.ModelMismatch):
        S.dist(H2, S.H2Point(1j), tp("a"))


def test_bad_points_rejected():
    with pytest.raises(ValueError):
        S.H2Point(1 - 1j)
    with pytest.raises(ValueError):
        S.TreePoint((1, -1))
    with pytest.raises(ValueError):
        S.TreePoint((), Fraction(1, 2))


# ------------------------------------------------------------ geodesics


def test_geodesic_midpoint_vertical():
    m = S.geodesic_point(H2, S.H2Point(1j), S.H2Point(4j), 0.5)
    assert m.z == pytest.approx(2j, abs=1e-12)
    assert S.dist(H2, S.H2Point(1j), m) == pytest.approx(math.log(2), abs=1e-12)


def test_geodesic_endpoint():
    p, q = S.H2Point(1 + 1j), S.H2Point(-2 + 0.5j)
    assert S.geodesic_point(H2, p, q, 0).z == pytest.approx(p.z)
    assert S.geodesic_point(TREE2, tp("a"), tp("bb"), 0) == tp("a")


def test_tree_midpoint_of_two_edge_arc():
    assert S.geodesic_point(TREE2, tp(""), tp("ab"), Fraction(1, 2)) == tp("a")


def test_point_at_distance_in_tree():
    p = S.point_at_distance(TREE2, tp("a"), tp("b"), Fraction(3, 2))
    assert S.dist(TREE2, tp("a"), p) == Fraction(3, 2)
    assert S.dist(TREE2, p, tp("b")) == Fraction(1, 2)


def test_gromov_product_examples():
    root = tp("")
    assert S.gromov_product(TREE2, tp("a"), tp("b"), root) == 0
    assert S.gromov_product(TREE2, tp("ab"), tp("a"), root) == 1
    p, q = S.H2Point(2j), S.H2Point(3 + 1j)
    assert S.gromov_product(H2, p, q, p) == pytest.approx(0, abs=1e-12)


def test_dist_to_segment():
    d = S.dist_to_segment(H2, S.H2Point(1 + 1j), S.H2Point(0.5j), S.H2Point(5j))
    # distance from 1+i to the imaginary axis is asinh(1)
    assert d == pytest.approx(math.asinh(1), abs=1e-6)
    assert S.dist_to_segment(TREE2, tp("ab"), tp("B"), tp("aa")) == 1


# ------------------------------------------------------------ thinness


def test_tree_thinness_zero():
    assert S.estimate_thinness(TREE2, 200, 3) == 0


def test_h2_thinness_bounded_and_scales():
    t1 = S.estimate_thinness(H2, 10_000, 11)
    assert 0 < t1 <= 1.0
    t2 = S.estimate_thinness(S.SpaceModel(S.H2, scale=2), 10_000, 11)
    assert t2 == pytest.approx(t1 / 2, rel=1e-9)


def test_json_roundtrip():
    for model, p in ((H2, S.H2Point(0.25 + 3j)), (TREE2, S.TreePoint((1, -2), Fraction(1, 3)))):
        assert S.point_from_json(model, S.point_to_json(p)) == p
    assert S.point_to_json(S.TreePoint((1, -2), Fraction(1, 3))) == {"word": "aB", "offset": "1/3"}


# --------------------------------------------------------- properties

h2_points = st.builds(lambda x, y: S.H2Point(complex(x, y)),
                      st.floats(-3, 3), st.floats(0.05, 5))


@st.composite
def tree_points(draw):
    rng = random.Random(draw(st.integers(0, 10**9)))
    return S.random_point(TREE2, rng, radius=5)


@settings(max_examples=300, deadline=None)
@given(h2_points, h2_points, h2_points)
def test_h2_triangle_inequality(p, q, r):
    assert S.dist(H2, p, r) <= S.dist(H2, p, q) + S.dist(H2, q, r) + 1e-9


@settings(max_examples=300, deadline=None)
@given(tree_points(), tree_points(), tree_points())
def test_tree_triangle_inequality_exact(p, q, r):
    assert S.dist(TREE2, p, r) <= S.dist(TREE2, p, q) + S.dist(TREE2, q, r)


def test_triangle_inequality_bulk():
    rng = random.Random(5)
    for model, tol in ((H2, 1e-9), (TREE2, 0)):
        for _ in range(10_000):
            p, q, r = (S.random_point(model, rng) for _ in range(3))
            assert S.dist(model, p, r) <= S.dist(model, p, q) + S.dist(model, q, r) + tol


@settings(max_examples=150, deadline=None)
@given(h2_points, h2_points, st.floats(0, 1), st.floats(0, 1))
def test_geodesic_arclength(p, q, t, u):
    a, b = S.geodesic_point(H2, p, q, t), S.geodesic_point(H2, p, q, u)
    assert S.dist(H2, a, b) == pytest.approx(abs(t - u) * S.dist(H2, p, q), abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(tree_points(), tree_points(), st.fractions(0, 1, max_denominator=12), st.fractions(0, 1, max_denominator=12))
def test_tree_geodesic_arclength_exact(p, q, t, u):
    a, b = S.geodesic_point(TREE2, p, q, t), S.geodesic_point(TREE2, p, q, u)
    assert S.dist(TREE2, a, b) == abs(t - u) * S.dist(TREE2, p, q)


@settings(max_examples=200, deadline=None)
@given(h2_points, h2_points, h2_points)
def test_gromov_product_bounded(p, q, x):
    g = S.gromov_product(H2, p, q, x)
    assert g <= min(S.dist(H2, x, p), S.dist(H2, x, q)) + 1e-9


@settings(max_examples=100, deadline=None)
@given(h2_points, h2_points, h2_points, st.sampled_from([2, 3, 7, Fraction(1, 2)]))
def test_rescaling(p, q, x, s):
    Hs = H2.rescaled(s)
    assert S.dist(Hs, p, q) == pytest.approx(S.dist(H2, p, q) / s, rel=1e-12, abs=1e-15)
    assert S.gromov_product(Hs, p, q, x) == pytest.approx(S.gromov_product(H2, p, q, x) / s, rel=1e-9, abs=1e-12)


def test_tree_rescaling_exact():
    T7 = TREE2.rescaled(7)
    assert S.dist(T7, tp("ab"), tp("B")) == Fraction(3, 7)
    assert S.gromov_product(T7, tp("ab"), tp("aa"), tp("")) == Fraction(1, 7)
