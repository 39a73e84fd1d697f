"""Nielsen moves, tuple norms, move chains and greedy minimization."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

from . import isometry as I
from . import words as W
from .space import (
    H2,
    H3,
    TREE,
    H2Point,
    H3Point,
    SpaceModel,
    TreePoint,
    check_point,
    dist,
    geodesic_point,
)


class MoveError(ValueError):
    pass


class FingerprintMismatch(MoveError):
    pass


@dataclass
class NielsenConfig:
    epsilon: float = 1e-6
    conj_depth: int = 2
    max_iters: int = 10_000
    top_k: int = 6
    exhaustive_n4: bool = False
    tree_radius: int = 3
    tree_tiebreak: bool = True
    basepoint_iters: int = 60


# ---------------------------------------------------------------- tuples


@dataclass(frozen=True)
class GenTuple:
    model: SpaceModel
    elements: tuple
    basepoint: object

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        check_point(self.model, self.basepoint)
        want = TREE if self.model.kind == TREE else None
        for g in self.elements:
            if want == TREE and g.kind != TREE:
                raise I.ModelMismatch("tree model needs tree isometries")
            if want is None and g.kind == TREE:
                raise I.ModelMismatch("matrix model needs matrix isometries")
            if self.model.kind == H2 and g.kind == H3:
                raise I.ModelMismatch("complex matrix in an H2 tuple")

    @property
    def n(self) -> int:
        return len(self.elements)

    @property
    def norm(self):
        return tuple_norm(self)

    def displacements(self) -> list:
        return [I.displacement(self.model, g, self.basepoint) for g in self.elements]

    def at(self, x) -> "GenTuple":
        return GenTuple(self.model, self.elements, x)

    def with_elements(self, elements) -> "GenTuple":
        return GenTuple(self.model, tuple(elements), self.basepoint)

    def fingerprint(self) -> str:
        data = [[g.kind, g.concrete_json(), W.unparse(g.provenance)] for g in self.elements]
        text = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def same_as(self, other: "GenTuple") -> bool:
        return self.n == other.n and all(
            a.same_concrete(b) and a.provenance == b.provenance for a, b in zip(self.elements, other.elements)
        )


def tuple_norm(M: GenTuple):
    total = 0
    for g in M.elements:
        total = total + I.displacement(M.model, g, M.basepoint)
    return total


def with_provenance(elements) -> list:
    """Tag elements with the generator provenance a_1, ..., a_n."""
    return [g.with_provenance((k + 1,)) for k, g in enumerate(elements)]


# ---------------------------------------------------------------- moves

_KIND_ORDER = {"N1": 0, "N2": 1, "N3": 2, "N4": 3}


@dataclass(frozen=True)
class Move:
    kind: str
    i: int
    j: int = 0
    eps: int = 1
    side: str = "right"
    left: W.Word = ()
    right: W.Word = ()

    def key(self) -> tuple:
        return (
            _KIND_ORDER[self.kind], self.i, self.j, -self.eps, self.side != "right",
            len(self.left) + len(self.right), W.word_key(self.left), W.word_key(self.right),
        )

    def to_json(self) -> dict:
        if self.kind in ("N1",):
            return {"kind": self.kind, "i": self.i}
        if self.kind == "N3":
            return {"kind": "N3", "i": self.i, "j": self.j}
        if self.kind == "N2":
            out = {"kind": "N2", "i": self.i, "j": self.j}
            if self.eps != 1:
                out["eps"] = self.eps
            if self.side != "right":
                out["side"] = self.side
            return out
        return {"kind": "N4", "i": self.i, "eps": self.eps, "left": W.unparse(self.left), "right": W.unparse(self.right)}

    @classmethod
    def from_json(cls, data: dict) -> "Move":
        kind = data["kind"]
        if kind not in _KIND_ORDER:
            raise MoveError(f"unknown move kind {kind!r}")
        return cls(
            kind, int(data["i"]), int(data.get("j", 0)), int(data.get("eps", 1)), data.get("side", "right"),
            W.reduce(W.parse(data.get("left", ""))), W.reduce(W.parse(data.get("right", ""))),
        )

    def describe(self) -> str:
        gi = f"g{self.i}"
        if self.kind == "N1":
            return f"{gi} <- {gi}^-1"
        if self.kind == "N3":
            return f"swap g{self.i}, g{self.j}"
        if self.kind == "N2":
            gj = f"g{self.j}" + ("^-1" if self.eps < 0 else "")
            return f"{gi} <- {gi}{gj}" if self.side == "right" else f"{gi} <- {gj}{gi}"
        core = gi + ("^-1" if self.eps < 0 else "")
        return f"{gi} <- {_index_word(self.left)}{core}{_index_word(self.right)}"


def _index_word(word: W.Word) -> str:
    return "".join(f"g{abs(e)}" + ("^-1" if e < 0 else "") for e in word)


def N1(i): return Move("N1", i)
def N3(i, j): return Move("N3", i, j)
def N2(i, j, eps=1, side="right"): return Move("N2", i, j, eps, side)
def N4(i, eps=1, left=(), right=()): return Move("N4", i, 0, eps, "right", tuple(left), tuple(right))


def validate_move(m: Move, n: int) -> None:
    if not 1 <= m.i <= n:
        raise MoveError(f"index {m.i} out of range 1..{n}")
    if m.eps not in (1, -1):
        raise MoveError("eps must be +1 or -1")
    if m.kind in ("N2", "N3"):
        if not 1 <= m.j <= n:
            raise MoveError(f"index {m.j} out of range 1..{n}")
        if m.i == m.j:
            raise MoveError("i and j must differ")
    if m.kind == "N2" and m.side not in ("left", "right"):
        raise MoveError("side must be 'left' or 'right'")
    if m.kind == "N4":
        for e in m.left + m.right:
            if abs(e) == m.i:
                raise MoveError("N4 words must avoid index i")
            if not 1 <= abs(e) <= n:
                raise MoveError(f"index {abs(e)} out of range 1..{n}")
        if not (W.is_reduced(m.left) and W.is_reduced(m.right)):
            raise MoveError("N4 words must be freely reduced")


def _moved_element(elements, m: Move):
    g = elements[m.i - 1]
    if m.kind == "N1":
        return I.invert(g)
    if m.kind == "N2":
        h = elements[m.j - 1]
        if m.eps < 0:
            h = I.invert(h)
        return I.compose(g, h) if m.side == "right" else I.compose(h, g)
    core = g if m.eps > 0 else I.invert(g)
    if m.left:
        core = I.compose(I.evaluate(m.left, elements), core)
    if m.right:
        core = I.compose(core, I.evaluate(m.right, elements))
    return core


def apply_move(M: GenTuple, m: Move) -> GenTuple:
    validate_move(m, M.n)
    elems = list(M.elements)
    if m.kind == "N3":
        elems[m.i - 1], elems[m.j - 1] = elems[m.j - 1], elems[m.i - 1]
    else:
        elems[m.i - 1] = _moved_element(elems, m)
    return M.with_elements(elems)


def invert_move(m: Move) -> Move:
    if m.kind in ("N1", "N3"):
        return m
    if m.kind == "N2":
        letter = (-m.eps * m.j,)
        return N4(m.i, 1, (), letter) if m.side == "right" else N4(m.i, 1, letter, ())
    if m.eps > 0:
        return N4(m.i, 1, W.inverse(m.left), W.inverse(m.right))
    return N4(m.i, -1, m.right, m.left)


def expand_move(m: Move) -> list[Move]:
    """Rewrite a move as primitive moves: N1, N3 and N2 in the form g_i <- g_i g_j."""
    if m.kind in ("N1", "N3"):
        return [m]
    if m.kind == "N2":
        if m.side == "right":
            if m.eps > 0:
                return [N2(m.i, m.j)]
            return [N1(m.j), N2(m.i, m.j), N1(m.j)]
        # h g = (g^-1 h^-1)^-1
        return [N1(m.i)] + expand_move(N2(m.i, m.j, -m.eps)) + [N1(m.i)]
    out: list[Move] = []
    if m.eps < 0:
        out.append(N1(m.i))
    for e in m.right:
        out += expand_move(N2(m.i, abs(e), 1 if e > 0 else -1, "right"))
    for e in reversed(m.left):
        out += expand_move(N2(m.i, abs(e), 1 if e > 0 else -1, "left"))
    return out


@dataclass(frozen=True)
class MoveChain:
    moves: tuple = ()
    initial: str = ""
    final: str = ""

    def __len__(self):
        return len(self.moves)

    def to_json(self) -> dict:
        return {"moves": [m.to_json() for m in self.moves], "initial": self.initial, "final": self.final}

    @classmethod
    def from_json(cls, data) -> "MoveChain":
        if isinstance(data, list):
            return cls(tuple(Move.from_json(d) for d in data))
        return cls(tuple(Move.from_json(d) for d in data["moves"]), data.get("initial", ""), data.get("final", ""))

    def then(self, other: "MoveChain") -> "MoveChain":
        return MoveChain(self.moves + other.moves, self.initial or other.initial, other.final or self.final)

    def expanded(self) -> "MoveChain":
        return MoveChain(tuple(p for m in self.moves for p in expand_move(m)), self.initial, self.final)


def make_chain(moves, start: GenTuple, end: GenTuple) -> MoveChain:
    return MoveChain(tuple(moves), start.fingerprint(), end.fingerprint())


def replay(chain: MoveChain, M: GenTuple) -> GenTuple:
    if chain.initial and chain.initial != M.fingerprint():
        raise FingerprintMismatch("chain was not recorded for this tuple")
    for m in chain.moves:
        M = apply_move(M, m)
    if chain.final and is_exact(M) and chain.final != M.fingerprint():
        raise FingerprintMismatch("replay did not reach the recorded final tuple")
    return M


def is_exact(M: GenTuple) -> bool:
    return all(g.kind == TREE or g.concrete.exact for g in M.elements)


# ---------------------------------------------------------------- search


def _other_words(i: int, n: int, depth: int) -> list[W.Word]:
    others = [k for k in range(1, n + 1) if k != i]
    if not others:
        return [()]
    return list(W.enumerate_reduced(n, depth, letters=others))


def _n2_candidates(n: int):
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i == j:
                continue
            for eps in (1, -1):
                for side in ("right", "left"):
                    yield N2(i, j, eps, side)


def _scored(M: GenTuple, moves, base_norm):
    """(decrease, move, new element) for each candidate, computed element-wise."""
    x = M.basepoint
    disp = M.displacements()
    for m in moves:
        new = _moved_element(M.elements, m)
        d_new = I.displacement(M.model, new, x)
        yield disp[m.i - 1] - d_new, m, new


def _better(cand, best, tol):
    if best is None:
        return True
    dc, db = cand[0], best[0]
    if dc > db + tol:
        return True
    if dc < db - tol:
        return False
    return cand[1].key() < best[1].key()


def _pick(M, moves, threshold, tol):
    best = None
    for cand in _scored(M, moves, None):
        if cand[0] > threshold and _better(cand, best, tol):
            best = cand
    return best


def _n4_candidates(M: GenTuple, config: NielsenConfig):
    n = M.n
    for i in range(1, n + 1):
        words = _other_words(i, n, config.conj_depth)
        for eps in (1, -1):
            if config.exhaustive_n4:
                lefts = rights = words
            else:
                lefts, rights = _proposals(M, i, eps, words, config.top_k)
            for L in lefts:
                for R in rights:
                    if not L and not R:
                        continue
                    if eps == 1 and len(L) + len(R) == 1:
                        continue  # already an N2 move
                    yield N4(i, eps, L, R)


def _proposals(M: GenTuple, i: int, eps: int, words, k: int):
    """Left and right multipliers suggested by the orbit near [x, g x]."""
    model, x = M.model, M.basepoint
    g = M.elements[i - 1]
    if eps < 0:
        g = I.invert(g)
    gx = I.apply(g, x)
    targets = [geodesic_point(model, x, gx, t) for t in (0.25, 0.5, 0.75)] if gx != x else [x]
    left_score, right_score, near_score = [], [], []
    for w in words:
        if not w:
            continue
        h = I.evaluate(w, M.elements, provenance=False)
        hx = I.apply(h, x)
        dl = I.displacement(model, I.compose(I.invert(h), g), x)
        dr = I.displacement(model, I.compose(g, h), x)
        near = min(float(dist(model, hx, z)) for z in targets)
        key = W.word_key(w)
        left_score.append((float(dl), len(w), key, W.inverse(w)))
        right_score.append((float(dr), len(w), key, w))
        near_score.append((near, len(w), key, w))
    pick = lambda scores: [s[-1] for s in sorted(scores)[:k]]
    near_words = pick(near_score)
    lefts = [()] + _dedupe(pick(left_score) + [W.inverse(w) for w in near_words])
    # h' x near g^-1 z: the right multiplier undoes the far half of g
    rights = [()] + _dedupe(pick(right_score) + [w for w in near_words])
    return lefts, rights


def _dedupe(ws):
    seen, out = set(), []
    for w in ws:
        if w and w not in seen:
            seen.add(w)
            out.append(w)
    return out


def improving_move_search(M: GenTuple, config: NielsenConfig | None = None) -> Move | None:
    """A move decreasing the norm by more than ``config.epsilon``, or None.

    N2 variants are searched first, then N4 proposals at ``conj_depth``.
    Within a stage the steepest decrease wins, ties go to the smallest move key.
    """
    config = config or NielsenConfig()
    if M.n < 2:
        return None
    tol = 0 if M.model.exact else 1e-12
    best = _pick(M, _n2_candidates(M.n), config.epsilon, tol)
    if best is None and config.conj_depth > 0:
        best = _pick(M, _n4_candidates(M, config), config.epsilon, tol)
    return best[1] if best else None


def element_key(model: SpaceModel, g: I.Isometry, x) -> tuple:
    """Order used to break norm ties in trees (half-prefix comparison)."""
    u = g.concrete
    if isinstance(x, TreePoint) and x.word:
        u = W.mul(W.inverse(x.word), u, x.word)
    half = (len(u) + 1) // 2
    a, b = W.word_key(u[:half]), W.word_key(W.inverse(u)[:half])
    return (len(u), min(a, b), max(a, b))


def tie_break_move(M: GenTuple) -> Move | None:
    """A norm-preserving N2 move lowering the tie-break key of the moved entry."""
    best = None
    x = M.basepoint
    keys = [element_key(M.model, g, x) for g in M.elements]
    for dec, m, new in _scored(M, _n2_candidates(M.n), None):
        if dec != 0 or M.elements[m.j - 1].is_identity():
            continue
        k = element_key(M.model, new, x)
        if k < keys[m.i - 1]:
            cand = (k, m.key(), m)
            if best is None or cand[:2] < best[:2]:
                best = cand
    return best[2] if best else None


def greedy_minimize(M: GenTuple, config: NielsenConfig | None = None) -> tuple[GenTuple, MoveChain]:
    config = config or NielsenConfig()
    start = M
    moves = []
    for _ in range(config.max_iters):
        m = improving_move_search(M, config)
        if m is None and M.model.kind == TREE and config.tree_tiebreak:
            m = tie_break_move(M)
        if m is None:
            break
        M = apply_move(M, m)
        moves.append(m)
    # trivial entries go to the end, keeping the order of the others
    for m in _trivial_to_end(M):
        M = apply_move(M, m)
        moves.append(m)
    return M, make_chain(moves, start, M)


def _trivial_to_end(M: GenTuple) -> list:
    flags = [g.is_identity() for g in M.elements]
    moves = []
    for i in range(len(flags)):
        if not flags[i]:
            continue
        j = next((k for k in range(len(flags) - 1, i, -1) if not flags[k]), None)
        if j is None:
            break
        moves.append(N3(i + 1, j + 1))
        flags[i], flags[j] = flags[j], flags[i]
    return moves


# ---------------------------------------------------------------- basepoint


def _to_hyperboloid(p):
    if isinstance(p, H2Point):
        a, b = p.z.real, p.z.imag
        r2 = a * a + b * b
        return [(r2 + 1) / (2 * b), (r2 - 1) / (2 * b), a / b]
    r2 = abs(p.z) ** 2 + p.t * p.t
    return [(r2 + 1) / (2 * p.t), (r2 - 1) / (2 * p.t), p.z.real / p.t, p.z.imag / p.t]


def _from_hyperboloid(v, like):
    q = v[0] * v[0] - sum(c * c for c in v[1:])
    v = [c / math.sqrt(q) for c in v]
    h = 1.0 / (v[0] - v[1])
    if isinstance(like, H2Point):
        return H2Point(complex(v[2] * h, h))
    return H3Point(complex(v[2] * h, v[3] * h), h)


def _centroid_target(M: GenTuple, x):
    acc = None
    for g in M.elements:
        w = float(I.displacement(M.model, g, x))
        if w <= 0:
            continue
        mid = geodesic_point(M.model, I.apply(I.invert(g), x), I.apply(g, x), 0.5)
        v = [w * c for c in _to_hyperboloid(mid)]
        acc = v if acc is None else [a + b for a, b in zip(acc, v)]
    return None if acc is None else _from_hyperboloid(acc, x)


def _nearby(p, s: float):
    if isinstance(p, H2Point):
        a, b = p.z.real, p.z.imag
        r = math.tanh(s / 2)
        for k in range(8):
            w = r * complex(math.cos(k * math.pi / 4), math.sin(k * math.pi / 4))
            u = 1j * (1 + w) / (1 - w)
            yield H2Point(complex(a + b * u.real, b * u.imag))
        return
    z, t = p.z, p.t
    yield H3Point(z, t * math.exp(s))
    yield H3Point(z, t * math.exp(-s))
    for u in (1, -1, 1j, -1j):
        yield H3Point(z + t * math.tanh(s) * u, t / math.cosh(s))


def _norm_at(M: GenTuple, x) -> float:
    return float(tuple_norm(M.at(x)))


def _optimize_tree(M: GenTuple, config: NielsenConfig):
    x = TreePoint(M.basepoint.word)
    best = tuple_norm(M.at(x))
    if M.basepoint.offset and tuple_norm(M) < best:
        x, best = M.basepoint, tuple_norm(M)
        return x
    ball = list(W.enumerate_reduced(M.model.rank, config.tree_radius, min_length=1))
    while True:
        found = None
        for w in ball:
            y = TreePoint(W.mul(x.word, w))
            v = tuple_norm(M.at(y))
            if v < best and (found is None or (v, W.word_key(y.word)) < (found[0], W.word_key(found[1].word))):
                found = (v, y)
        if found is None:
            return x
        best, x = found


def optimize_basepoint(M: GenTuple, config: NielsenConfig | None = None):
    config = config or NielsenConfig()
    if not M.elements or all(g.is_identity() for g in M.elements):
        return M.basepoint
    if M.model.kind == TREE:
        return _optimize_tree(M, config)
    x = M.basepoint
    best = _norm_at(M, x)
    for _ in range(config.basepoint_iters):
        c = _centroid_target(M, x)
        if c is None:
            break
        moved = False
        for k in range(20):
            y = geodesic_point(M.model, x, c, 0.5 ** k)
            v = _norm_at(M, y)
            if v < best - 1e-13:
                x, best, moved = y, v, True
                break
        if not moved:
            break
    # pattern search polish
    s = 1.0
    evals = 0
    while s > 1e-9 and evals < 4000:
        improved = None
        for y in _nearby(x, s):
            evals += 1
            v = _norm_at(M, y)
            if v < best - 1e-12 * max(1.0, best) and (improved is None or v < improved[0]):
                improved = (v, y)
        if improved:
            best, x = improved
        else:
            s /= 2
    return x
