import random

from hypothesis import given
from hypothesis import strategies as st

from hypnielsen import words as W

import oracles as O

letters = st.sampled_from([1, -1, 2, -2, 3, -3])
raw_words = st.lists(letters, max_size=14)


def test_parse_and_unparse():
    assert W.parse("aB c") == (1, -2, 3)
    assert W.unparse((1, -2, 3)) == "aBc"
    assert W.unparse(()) == ""


def test_reduce_and_inverse():
    assert W.reduce(W.parse("abBA")) == ()
    assert W.inverse(W.parse("aB")) == W.parse("bA")
    assert W.mul(W.parse("ab"), W.parse("Bc")) == W.parse("ac")
    assert W.power(W.parse("ab"), -2) == W.parse("BABA")


def test_cyclic_reduce():
    conj, core = W.cyclic_reduce(W.parse("abA"))
    assert (W.unparse(conj), W.unparse(core)) == ("a", "b")
    assert W.mul(conj, core, W.inverse(conj)) == W.parse("abA")


@given(raw_words)
def test_reduce_matches_oracle(w):
    assert W.unparse(W.reduce(w)) == O.free_reduce(W.unparse(w))


@given(raw_words)
def test_reduced_output_is_reduced(w):
    r = W.reduce(w)
    assert W.is_reduced(r)
    assert W.mul(r, W.inverse(r)) == ()


@given(raw_words)
def test_cyclic_length_matches_oracle(w):
    conj, core = W.cyclic_reduce(W.reduce(w))
    assert len(core) == O.cyclic_length(W.unparse(w))
    assert W.mul(conj, core, W.inverse(conj)) == W.reduce(w)


def test_enumerate_reduced_counts():
    # 2n (2n - 1)^(k - 1) reduced words of length k
    words = list(W.enumerate_reduced(2, 4, min_length=1))
    assert len(words) == 4 + 12 + 36 + 108
    assert len(set(words)) == len(words)
    assert sorted(map(W.unparse, words)) == sorted(O.reduced_words(2, 4))


def test_substitute():
    images = {1: W.parse("ab"), 2: W.parse("B")}
    assert W.substitute(W.parse("aB"), images) == W.parse("abb")
    rng = random.Random(1)
    for _ in range(100):
        w = tuple(rng.choice([1, -1, 2, -2]) for _ in range(8))
        assert W.substitute(W.reduce(w), {1: (1,), 2: (2,)}) == W.reduce(w)
