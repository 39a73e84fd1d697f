import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hypnielsen import isometry as I  # noqa: E402
from hypnielsen import nielsen as N  # noqa: E402
from hypnielsen import space as S  # noqa: E402

SANOV = ([[1, 2], [0, 1]], [[1, 0], [2, 1]])
SL2Z = ([[1, 1], [0, 1]], [[1, 0], [1, 1]])


def schottky(k: int):
    return ([[k, k * k - 1], [1, k]], [[k, 1], [k * k - 1, k]])


def tree_tuple(words, rank: int = 2, scale=1, base=()) -> N.GenTuple:
    model = S.SpaceModel(S.TREE, rank=rank, scale=scale)
    gens = N.with_provenance([I.tree_word(w) for w in words])
    return N.GenTuple(model, gens, S.TreePoint(tuple(base)))


def h2_tuple(mats, base=1j, scale=1) -> N.GenTuple:
    model = S.SpaceModel(S.H2, scale=scale)
    gens = N.with_provenance([I.mobius(m) for m in mats])
    return N.GenTuple(model, gens, S.H2Point(base))


def tree_spec(words, rank: int = 2, scale=1, **config) -> dict:
    spec = {"model": {"kind": "tree", "rank": rank, "scale": scale}, "generators": list(words)}
    if config:
        spec["config"] = config
    return spec


def h2_spec(mats, scale=1, **config) -> dict:
    spec = {"model": {"kind": "H2", "scale": scale},
            "generators": [{"entries": [[str(v) for v in row] for row in m]} for m in mats]}
    if config:
        spec["config"] = config
    return spec


@pytest.fixture
def h2():
    return S.SpaceModel(S.H2)


@pytest.fixture
def tree2():
    return S.SpaceModel(S.TREE, rank=2)


# one summary line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
