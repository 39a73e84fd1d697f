"""Free group words as tuples of signed integers.

Letter ``k > 0`` is the k-th generator, ``-k`` its inverse.  Strings use
``a, b, c, ...`` for generators and upper case for inverses, so ``"aB"`` is
``(1, -2)``.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator

Word = tuple[int, ...]

EMPTY: Word = ()


class WordError(ValueError):
    pass


def letter_to_char(e: int) -> str:
    if e > 0:
        return chr(ord("a") + e - 1)
    return chr(ord("A") - e - 1)


def char_to_letter(ch: str) -> int:
    if ch.islower():
        return ord(ch) - ord("a") + 1
    if ch.isupper():
        return -(ord(ch) - ord("A") + 1)
    raise WordError(f"bad letter {ch!r}")


def parse(text: str) -> Word:
    """Parse ``"aB a"`` style text; whitespace is ignored, no reduction."""
    return tuple(char_to_letter(ch) for ch in text if not ch.isspace())


def unparse(word: Iterable[int]) -> str:
    return "".join(letter_to_char(e) for e in word)


def is_reduced(word: Word) -> bool:
    return all(word[k] != -word[k + 1] for k in range(len(word) - 1))


def reduce(word: Iterable[int]) -> Word:
    out: list[int] = []
    for e in word:
        if e == 0:
            raise WordError("letter 0 is not allowed")
        if out and out[-1] == -e:
            out.pop()
        else:
            out.append(e)
    return tuple(out)


def inverse(word: Word) -> Word:
    return tuple(-e for e in reversed(word))


def mul(*words: Word) -> Word:
    out: list[int] = []
    for w in words:
        for e in w:
            if out and out[-1] == -e:
                out.pop()
            else:
                out.append(e)
    return tuple(out)


def power(word: Word, m: int) -> Word:
    if m < 0:
        return power(inverse(word), -m)
    return reduce(word * m)


def cyclic_reduce(word: Word) -> tuple[Word, Word]:
    """Return ``(c, t)`` with ``word = c t c^-1`` and ``t`` cyclically reduced."""
    w = reduce(word)
    k = 0
    while k < len(w) - 1 - k and w[k] == -w[len(w) - 1 - k]:
        k += 1
    return w[:k], w[k:len(w) - k]


def common_prefix_length(u: Word, v: Word) -> int:
    n = 0
    for a, b in zip(u, v):
        if a != b:
            break
        n += 1
    return n


def max_letter(word: Word) -> int:
    return max((abs(e) for e in word), default=0)


def enumerate_reduced(rank: int, max_length: int, min_length: int = 0, letters: Iterable[int] | None = None) -> Iterator[Word]:
    """Yield reduced words by increasing length, lexicographic within a length.

    Letter order is ``a < A < b < B < ...``.  ``letters`` restricts the
    generators used (positive indices).
    """
    gens = sorted(letters) if letters is not None else list(range(1, rank + 1))
    alphabet = [s for g in gens for s in (g, -g)]
    if min_length <= 0:
        yield EMPTY

    def extend(prefix: list[int], remaining: int) -> Iterator[Word]:
        if remaining == 0:
            yield tuple(prefix)
            return
        for e in alphabet:
            if prefix and prefix[-1] == -e:
                continue
            prefix.append(e)
            yield from extend(prefix, remaining - 1)
            prefix.pop()

    for length in range(max(1, min_length), max_length + 1):
        yield from extend([], length)


def letter_key(e: int) -> tuple[int, int]:
    return (abs(e), 0 if e > 0 else 1)


def word_key(word: Word) -> tuple:
    return tuple(letter_key(e) for e in word)


def substitute(word: Word, images: dict[int, Word]) -> Word:
    """Image of ``word`` under the homomorphism sending letter k to images[k]."""
    out: list[Word] = []
    for e in word:
        img = images[abs(e)]
        out.append(img if e > 0 else inverse(img))
    return mul(*out)
