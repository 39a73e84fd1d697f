"""Geometric verification: decompositions, stable parts, sigma paths,
quasigeodesic checks, ping-pong certificates and position predicates.

All distances are taken in the model carried by the tuple.  Additive
geometric constants are multiplied by ``ctx.unit`` (the hyperbolicity
constant of the working metric: 1 for the normalized hyperbolic models,
0 for trees, where the corresponding triangles are tripods).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import isometry as I
from . import words as W
from .nielsen import GenTuple
from .paths import Path, QGReport, qg_check
from .space import (
    RESOLUTION_LIMIT,
    TREE,
    SpaceModel,
    chart_depth,
    dist,
    dist_to_segment_many,
    gromov_product,
    point_at_distance,
    point_to_json,
    sample_segment,
)

TOL = 1e-9


class CertifyError(ValueError):
    pass


class StablePartUndefined(CertifyError):
    """The displacement threshold or a construction step failed."""


class InvalidDecomposition(CertifyError):
    pass


@dataclass
class CertifyContext:
    model: SpaceModel
    x: object
    M: GenTuple | None = None
    n_index: int | None = None
    N: object = None
    d2: object = 0
    d4: object = 0
    d2n: object = None
    L: object = 1
    T: object = None
    unit: object = None
    step: float | None = None
    margin: float = 0.1
    lmax: int = 8
    short_tol: float = 1e-6
    max_words: int = 400_000
    probe_budget: int = 20_000
    sigma_samples: int = 12
    seed: int = 0

    def __post_init__(self):
        if self.unit is None:
            self.unit = self.model.delta
        if self.M is not None and self.n_index is None:
            disp = self.M.displacements()
            self.n_index = max(range(len(disp)), key=lambda k: (disp[k], k)) + 1
        if self.N is None and self.M is not None:
            self.N = auto_N(self)
        if self.T is None:
            self.T = self.N
        if self.d2n is None:
            self.d2n = 2 * self.L + 100 * self.unit if self.unit else 0
        if self.step is None:
            if self.model.exact:
                self.step = Fraction(1, 4)
            else:
                n = float(self.N) if self.N else 1.0
                self.step = min(0.05, n / 200) if n > 0 else 0.05

    @property
    def gn(self) -> I.Isometry:
        return self.M.elements[self.n_index - 1]

    def c(self, k):
        """Additive constant k in working units."""
        return k * self.unit

    def threshold(self, N=None):
        N = self.N if N is None else N
        return 4 * N + 2 * self.d2 + 2 * self.d4 + self.c(10)

    def to_json(self) -> dict:
        f = lambda v: str(v) if isinstance(v, Fraction) else v
        return {
            "n_index": self.n_index, "N": f(self.N), "d2": f(self.d2), "d4": f(self.d4), "d2n": f(self.d2n),
            "L": f(self.L), "T": f(self.T), "unit": f(self.unit), "step": f(self.step), "margin": self.margin,
            "lmax": self.lmax, "short_tol": self.short_tol,
        }


def auto_N(ctx: CertifyContext):
    """Largest N meeting the stable-part threshold (at most a quarter of |g_n|)."""
    gn = ctx.M.elements[ctx.n_index - 1]
    m = I.displacement(ctx.model, gn, ctx.x)
    N = (m - 2 * ctx.d2 - 2 * ctx.d4 - ctx.c(10)) / 4
    # stable parts must stay clear of the cancellation at either end of g_n
    N = min(N, m / 2 - _junction_overlap(ctx) - 2 * ctx.model.delta)
    if ctx.model.exact:
        N = Fraction(N)
        # quarter-edge resolution keeps all marked points on the sampling grid
        N = Fraction(math.floor(N * 4), 4)
    return N if N > 0 else 0


def _junction_overlap(ctx: CertifyContext):
    """Largest Gromov product at a junction next to a copy of g_n^(+-1)."""
    M, x, n = ctx.M, ctx.x, ctx.n_index
    letters = [e for k in range(1, M.n + 1) for e in (k, -k)]
    pt = {e: I.apply(_letter_iso(M, e), x) for e in letters}
    return max((gromov_product(ctx.model, pt[-u], pt[v], x) for u in letters for v in letters
                if v != -u and n in (abs(u), abs(v))), default=0)


# ---------------------------------------------------------------- decompositions


@dataclass
class Decomposition:
    u: W.Word
    n: int
    h: list
    eps: list

    @property
    def l(self) -> int:
        return len(self.eps)

    @property
    def valid(self) -> bool:
        return all(self.h[i] or self.eps[i - 1] != -self.eps[i] for i in range(1, self.l))

    def letter(self, i: int) -> W.Word:
        return (self.eps[i] * self.n,)

    def w(self, i):  # h_i g_n^e_i, 1-based
        return W.mul(self.h[i - 1], self.letter(i - 1))

    def v(self, i):  # g_n^e_i h_{i+1}
        return W.mul(self.letter(i - 1), self.h[i])

    def z(self, i):
        return W.mul(self.h[i - 1], self.letter(i - 1), self.h[i])

    def y(self, i):
        return W.mul(self.letter(i - 1), self.h[i], self.letter(i))

    def reassemble(self) -> W.Word:
        parts = [self.h[0]]
        for i in range(self.l):
            parts += [self.letter(i), self.h[i + 1]]
        return W.mul(*parts)


def decompose(u: W.Word, n: int) -> Decomposition:
    u = tuple(u)
    if not W.is_reduced(u):
        raise InvalidDecomposition("word is not freely reduced")
    h: list = [[]]
    eps = []
    for e in u:
        if abs(e) == n:
            eps.append(1 if e > 0 else -1)
            h.append([])
        else:
            h[-1].append(e)
    return Decomposition(u, n, [tuple(x) for x in h], eps)


# ---------------------------------------------------------------- thin configurations


def _seg_radius(model, a, b, segments, step) -> float:
    """Largest distance from sampled [a, b] to the union of ``segments``."""
    pts = sample_segment(model, a, b, step)
    best = np.full(len(pts), np.inf)
    for c, e in segments:
        best = np.minimum(best, dist_to_segment_many(model, pts, c, e))
    return float(best.max())


def _path_radius(model, pts, step) -> float:
    """Distance of the broken path through ``pts`` from the geodesic joining its ends."""
    a, b = pts[0], pts[-1]
    return max(_seg_radius(model, p, q, [(a, b)], step) for p, q in zip(pts, pts[1:]))


def _plen(model, pts) -> float:
    return sum(float(dist(model, p, q)) for p, q in zip(pts, pts[1:]))


@dataclass
class QuadReport:
    kind: str
    case: int
    points: dict
    lengths: dict
    bounds: dict
    radii: dict
    slacks: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def length_ok(self) -> bool:
        return all(self.lengths[k] <= self.bounds[k] + TOL for k in self.lengths)

    def to_json(self) -> dict:
        return {
            "kind": self.kind, "case": self.case,
            "points": {k: point_to_json(v) for k, v in self.points.items()},
            "lengths": self.lengths, "bounds": self.bounds, "radii": self.radii,
            "slacks": self.slacks, "extra": self.extra,
        }


def _pair_paths(model, X, A, B, r):
    return {"g": [X, r, A], "h": [A, r, B], "gh": [X, r, B]}


def quad_pair(model: SpaceModel, g: I.Isometry, h: I.Isometry, x, unit=None, step=0.05) -> QuadReport:
    """Near-tripod point r for the triangle x, gx, ghx."""
    unit = model.delta if unit is None else unit
    A = I.apply(g, x)
    B = I.apply(I.compose(g, h), x)
    full = {"g": dist(model, x, A), "h": dist(model, A, B), "gh": dist(model, x, B)}
    bounds = {k: float(v) + 2 * float(unit) for k, v in full.items()}

    def worst(r):
        paths = _pair_paths(model, x, A, B, r)
        return max(_plen(model, p) - bounds[k] for k, p in paths.items())

    s0 = gromov_product(model, A, B, x)
    r = point_at_distance(model, x, A, s0)
    if worst(r) > TOL and not model.exact:
        D = float(full["g"])
        grid = [k * step for k in range(int(D / step) + 1)] + [D]
        r = point_at_distance(model, x, A, min(grid, key=lambda s: worst(point_at_distance(model, x, A, s))))
    paths = _pair_paths(model, x, A, B, r)
    lengths = {k: _plen(model, p) for k, p in paths.items()}
    radii = {k: _path_radius(model, p, step) for k, p in paths.items()}
    return QuadReport("pair", 0, {"x": x, "gx": A, "ghx": B, "r": r}, lengths, bounds, radii,
                      {k: bounds[k] - lengths[k] for k in lengths})


def _triple_paths(case, X, A, B, C, p, q):
    if case == 1:
        return {"g": [X, p, A], "h": [A, p, q, B], "f": [B, q, C], "ghf": [X, p, q, C]}
    return {"g": [X, p, q, A], "h": [A, q, B], "f": [B, q, p, C], "ghf": [X, p, C]}


def _triple_points(model, case, X, A, B, C):
    if case == 1:
        # split {x, gx} | {ghx, ghfx}
        p = point_at_distance(model, X, A, gromov_product(model, A, B, X))
        q = point_at_distance(model, B, C, gromov_product(model, A, C, B))
    else:
        # split {x, ghfx} | {gx, ghx}
        p = point_at_distance(model, X, C, gromov_product(model, A, C, X))
        q = point_at_distance(model, A, B, gromov_product(model, X, B, A))
    return p, q


def quad_decompose(g: I.Isometry, h: I.Isometry, f: I.Isometry | None, x, model: SpaceModel,
                   unit=None, step: float = 0.05, tau=None) -> QuadReport:
    """Thin-triangle (f is None) or thin-quadrilateral decomposition at x."""
    if f is None:
        return quad_pair(model, g, h, x, unit, step)
    unit = model.delta if unit is None else unit
    X = x
    A = I.apply(g, x)
    B = I.apply(I.compose(g, h), x)
    C = I.apply(I.compose(I.compose(g, h), f), x)
    full = {"g": dist(model, X, A), "h": dist(model, A, B), "f": dist(model, B, C), "ghf": dist(model, X, C)}
    bounds = {k: float(v) + 4 * float(unit) for k, v in full.items()}

    def slack(case, p, q):
        paths = _triple_paths(case, X, A, B, C, p, q)
        return min(bounds[k] - _plen(model, pts) for k, pts in paths.items())

    best = {}
    for case in (1, 2):
        p, q = _triple_points(model, case, X, A, B, C)
        s = slack(case, p, q)
        if s < -TOL and not model.exact:
            p, q, s = _refine(model, case, X, A, B, C, p, q, slack)
        best[case] = (s, p, q)
    case = 1 if best[1][0] >= best[2][0] else 2
    s, p, q = best[case]
    paths = _triple_paths(case, X, A, B, C, p, q)
    lengths = {k: _plen(model, pts) for k, pts in paths.items()}
    radii = {k: _path_radius(model, pts, step) for k, pts in paths.items()}
    extra = {}
    if case == 2:
        radii["pq_to_x_gx"] = _seg_radius(model, p, q, [(X, A)], step)
        radii["pq_to_ghx_ghfx"] = _seg_radius(model, p, q, [(B, C)], step)
    if tau is not None:
        extra["long_overlap"] = long_overlap_check(model, X, A, B, C, tau, unit, step)
    pts = {"x": X, "gx": A, "ghx": B, "ghfx": C, "p": p, "q": q}
    return QuadReport("triple", case, pts, lengths, bounds, radii,
                      {"case1": best[1][0], "case2": best[2][0]}, extra)


def _refine(model, case, X, A, B, C, p, q, slack):
    """Grid search for p and q along their defining segments."""
    if case == 1:
        segp, segq = (X, A), (B, C)
    else:
        segp, segq = (X, C), (A, B)
    best = (slack(case, p, q), p, q)
    for width, k in ((2.0, 8), (0.5, 8), (0.1, 8)):
        sp0 = float(dist(model, segp[0], best[1]))
        sq0 = float(dist(model, segq[0], best[2]))
        for a in range(-k, k + 1):
            pp = point_at_distance(model, segp[0], segp[1], max(0.0, sp0 + width * a / k))
            for b in range(-k, k + 1):
                qq = point_at_distance(model, segq[0], segq[1], max(0.0, sq0 + width * b / k))
                s = slack(case, pp, qq)
                if s > best[0]:
                    best = (s, pp, qq)
    return best[1], best[2], best[0]


def long_overlap_check(model, X, A, B, C, tau, unit, step) -> dict:
    """For tau = (a, D) the subsegment of [x, ghfx] starting at distance a of length 3D,
    the longest run of [x,gx], [gx,ghx] or [ghx,ghfx] within 24 units of tau."""
    a, D = tau
    t0 = point_at_distance(model, X, C, a)
    t1 = point_at_distance(model, X, C, a + 3 * D)
    radius = 24 * float(unit)
    best = 0.0
    for P, Q in ((X, A), (A, B), (B, C)):
        pts = sample_segment(model, P, Q, step)
        d = dist_to_segment_many(model, pts, t0, t1) <= radius + TOL
        seglen = float(dist(model, P, Q))
        k = len(pts) - 1
        run = longest = 0
        for inside in d:
            run = run + 1 if inside else 0
            longest = max(longest, run)
        best = max(best, max(0, longest - 1) * seglen / k if k else 0.0)
    need = D - 40 * float(unit)
    return {"longest": best, "need": need, "pass": best >= need - step}


# ---------------------------------------------------------------- stable parts


@dataclass
class StablePart:
    s: object
    t: object
    case: int
    h: W.Word
    eps: int
    N: object
    side: str = "w"
    placement: float = 0.0

    def to_json(self) -> dict:
        return {"s": point_to_json(self.s), "t": point_to_json(self.t), "case": self.case,
                "h": W.unparse(self.h), "eps": self.eps, "side": self.side, "placement": self.placement}


def _stable_w_local(h: I.Isometry, eps: int, gn: I.Isometry, N, ctx: CertifyContext):
    """Stable part of w = h g_n^eps in the frame h^-1, which puts hx at x.

    Returns (s, t, case, frame) with the true points frame . s and frame . t.
    Working near x keeps float coordinates shallow; callers compose the exact
    frame with whatever they apply next."""
    model, x = ctx.model, ctx.x
    m = I.displacement(model, gn, x)
    if m < ctx.threshold(N) - TOL:
        raise StablePartUndefined(f"|g_n|_x = {float(m):.6g} is below the threshold {float(ctx.threshold(N)):.6g}")
    g = gn if eps > 0 else I.invert(gn)
    gx = I.apply(g, x)
    if h.is_identity():
        s = point_at_distance(model, x, gx, m / 2 - N - ctx.d2)
        t = point_at_distance(model, x, gx, m / 2 - ctx.d2)
        return s, t, 1, h
    y = I.apply(I.invert(h), x)  # the basepoint seen from the frame
    start = point_at_distance(model, x, gx, m / 2 - N - ctx.d2)
    radius = _seg_radius(model, start, gx, [(y, gx)], ctx.step)
    if radius <= float(ctx.c(2)) + TOL:
        return start, point_at_distance(model, x, gx, m / 2 - ctx.d2), 2, h
    r = quad_pair(model, h, g, y, ctx.unit, float(ctx.step)).points["r"]
    dyr = dist(model, y, r)
    if dyr < ctx.d4 + N - TOL:
        raise StablePartUndefined("the [x, r] leg is shorter than d4 + N")
    s = point_at_distance(model, y, r, dyr - ctx.d4 - N)
    t = point_at_distance(model, y, r, dyr - ctx.d4)
    return s, t, 3, h


def stable_part(h: I.Isometry, eps: int, gn: I.Isometry, N, ctx: CertifyContext, side: str = "w") -> StablePart:
    """Stable part of the product h g_n^eps (side 'w') or g_n^eps h (side 'v')."""
    x = ctx.x
    g = gn if eps > 0 else I.invert(gn)
    if side == "w":
        s, t, case, F = _stable_w_local(h, eps, gn, N, ctx)
        # in the frame, [x, wx] becomes [F^-1 x, g x]
        ends = (I.apply(I.invert(F), x), I.apply(g, x))
        placement = _seg_radius(ctx.model, s, t, [ends], ctx.step)
        return StablePart(I.apply(F, s), I.apply(F, t), case, h.provenance, eps, N, "w", placement)
    # v = g_n^eps h is the inverse of w = h^-1 g_n^-eps, reversed and moved by v
    hinv = I.invert(h)
    s_w, t_w, case, F = _stable_w_local(hinv, -eps, gn, N, ctx)
    v = I.compose(g, h)
    L = I.compose(v, F)  # exact, equal to g_n^eps
    Linv = I.invert(L)
    ends = (I.apply(I.compose(Linv, v), x), I.apply(Linv, x))
    placement = _seg_radius(ctx.model, t_w, s_w, [ends], ctx.step)
    return StablePart(I.apply(L, t_w), I.apply(L, s_w), case, h.provenance, eps, N, "v", placement)


# ---------------------------------------------------------------- sigma


@dataclass
class BrokenPath:
    model: SpaceModel
    points: list
    labels: list
    N: object
    u: W.Word = ()
    parts: list = field(default_factory=list)
    frame: I.Isometry | None = None

    def path(self) -> Path:
        return Path(self.model, self.points)

    @property
    def length(self):
        return self.path().length

    def to_json(self) -> dict:
        return {"u": W.unparse(self.u), "N": str(self.N) if isinstance(self.N, Fraction) else self.N,
                "points": [{"label": l, **point_to_json(p)} for l, p in zip(self.labels, self.points)]}


def centre_frame(M: GenTuple, u: W.Word) -> I.Isometry | None:
    """Exact isometry moving the middle orbit point of u back to the basepoint.

    Float coordinates of far orbit points lose resolution; recentring keeps
    every point within about half of |u|_x of x."""
    if M.model.exact or len(u) < 2:
        return None
    whole = I.evaluate(u, M.elements)
    prefixes = [I.evaluate(u[:k], M.elements) for k in range(1, len(u))]
    return _local_frame(M.model, M.basepoint, prefixes, whole)


def build_sigma(u: W.Word, N, ctx: CertifyContext, frame="auto") -> BrokenPath:
    """Broken path through the translated stable parts of u (optionally recentred)."""
    if ctx.M is None:
        raise CertifyError("context has no tuple")
    n = ctx.n_index
    dec = decompose(u, n)
    if dec.l == 0:
        raise InvalidDecomposition("word does not involve the distinguished generator")
    if not dec.valid:
        raise InvalidDecomposition("syllable condition violated")
    elems = ctx.M.elements
    gn = elems[n - 1]
    x = ctx.x
    ev = lambda word: I.evaluate(word, elems)
    if isinstance(frame, str):
        frame = centre_frame(ctx.M, dec.u)
    prefix = frame if frame is not None else I.identity_like(gn)
    pts, labels, parts = [I.apply(prefix, x)], ["x"], []
    for i in range(1, dec.l + 1):
        hi = ev(dec.h[i - 1])
        hnext = ev(dec.h[i])
        sw = stable_part(hi, dec.eps[i - 1], gn, N, ctx, "w")
        sv = stable_part(hnext, dec.eps[i - 1], gn, N, ctx, "v")
        ph = I.compose(prefix, hi)
        pts += [I.apply(prefix, sw.s), I.apply(prefix, sw.t), I.apply(ph, sv.s), I.apply(ph, sv.t)]
        labels += [f"S{i}", f"T{i}", f"S'{i}", f"T'{i}"]
        parts += [sw, sv]
        prefix = I.compose(prefix, ev(dec.w(i)))
    pts.append(I.apply(I.compose(prefix, ev(dec.h[dec.l])), x))
    labels.append("ux")
    return BrokenPath(ctx.model, pts, labels, N, dec.u, parts, frame)


def local_qg_check(path, T, lam, eps, step=None, model=None) -> QGReport:
    """Sampled check of the T-local (lam, eps)-quasigeodesic inequality."""
    if isinstance(path, BrokenPath):
        path = path.path()
    model = model or path.model
    if step is None:
        step = 0.25 if model.exact else 0.05
    params, pts = path.sample(float(step))
    return qg_check(model, params, pts, float(T), float(lam), float(eps))


def orbit_path(M: GenTuple, word: W.Word, frame="auto") -> Path:
    """[x, g_i1 x] + g_i1 [x, g_i2 x] + ... through the prefix orbit points."""
    if isinstance(frame, str):
        frame = centre_frame(M, tuple(word))
    cur = frame if frame is not None else I.identity_like(M.elements[0])
    pts = [I.apply(cur, M.basepoint)]
    for e in word:
        g = M.elements[abs(e) - 1]
        cur = I.compose(cur, g if e > 0 else I.invert(g))
        pts.append(I.apply(cur, M.basepoint))
    return Path(M.model, pts)


# ---------------------------------------------------------------- quasi-isometry probe


def word_count(n: int, lmax: int) -> int:
    """Number of nontrivial reduced words of length <= lmax in rank n."""
    return sum(2 * n * (2 * n - 1) ** (L - 1) for L in range(1, lmax + 1))


def budget_lmax(n: int, lmax: int, budget: int) -> int:
    """Largest length <= lmax whose exhaustive enumeration fits the word budget (at least 1)."""
    L = 1
    while L < lmax and word_count(n, L + 1) <= budget:
        L += 1
    return L


def _tree_words_with_displacement(M: GenTuple, lmax: int, budget: int):
    """Fast path at a tree vertex: conjugate the entries to the root and use word lengths."""
    p = M.basepoint.word
    pinv = W.inverse(p)
    value = {}
    for k, g in enumerate(M.elements, start=1):
        c = W.mul(pinv, g.concrete, p)
        value[k], value[-k] = c, W.inverse(c)
    letters = [e for k in range(1, M.n + 1) for e in (k, -k)]
    scale = M.model.scale
    count = 0
    stack = [((), ())]
    while stack:
        word, g = stack.pop()
        if word:
            count += 1
            if count > budget:
                return
            yield word, Fraction(len(g)) / scale, not g
        if len(word) == lmax:
            continue
        for e in reversed(letters):
            if word and word[-1] == -e:
                continue
            stack.append((word + (e,), W.mul(g, value[e])))


def _reduced_words_with_values(M: GenTuple, lmax: int, budget: int):
    """DFS over reduced words (by prefix), yielding (word, isometry)."""
    gens = list(M.elements)
    letters = [e for k in range(1, M.n + 1) for e in (k, -k)]
    value = {e: (gens[abs(e) - 1] if e > 0 else I.invert(gens[abs(e) - 1])).with_provenance(()) for e in letters}
    count = 0
    stack = [((), I.identity_like(gens[0]))]
    while stack:
        word, g = stack.pop()
        if word:
            count += 1
            if count > budget:
                return
            yield word, g
        if len(word) == lmax:
            continue
        for e in reversed(letters):
            if word and word[-1] == -e:
                continue
            stack.append((word + (e,), I.compose(g, value[e])))


@dataclass
class QIProbe:
    alpha: float
    beta: float
    lmax: int
    words: int
    partial: bool
    counterexamples: list
    relations: int
    min_by_length: dict
    head_drop: float

    @property
    def clean(self) -> bool:
        return not self.counterexamples and not self.partial and self.alpha > 0

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha, "beta": self.beta, "lmax": self.lmax, "words": self.words,
            "partial": self.partial, "counterexamples": self.counterexamples[:20],
            "counterexample_count": len(self.counterexamples), "relations": self.relations,
            "min_by_length": {str(k): v for k, v in self.min_by_length.items()}, "head_drop": self.head_drop,
        }


def _fit_linear_lower(points) -> tuple[float, float]:
    """alpha = last slope of the lower convex hull, beta = max(alpha L - D)."""
    pts = sorted(points)
    hull: list = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    if len(hull) < 2:
        return 0.0, 0.0
    (x1, y1), (x2, y2) = hull[-2], hull[-1]
    alpha = max(0.0, (y2 - y1) / (x2 - x1))
    beta = max(0.0, max(alpha * L - D for L, D in pts))
    return alpha, beta


def qi_probe(M: GenTuple, lmax: int, ctx: CertifyContext | None = None) -> QIProbe:
    """Exhaustive displacement statistics over reduced words of length <= lmax."""
    short_tol = ctx.short_tol if ctx else 1e-6
    budget = ctx.max_words if ctx else 400_000
    model, x = M.model, M.basepoint
    disp = [float(d) for d in M.displacements()]
    mins: dict = {}
    rel, short = [], []
    head_drop = math.inf
    count = 0
    if model.kind == TREE and not x.offset:
        items = _tree_words_with_displacement(M, lmax, budget)
    else:
        items = ((w, I.displacement(model, g, x), g.is_identity()) for w, g in _reduced_words_with_values(M, lmax, budget))
    for word, d, trivial in items:
        count += 1
        d = float(d)
        L = len(word)
        if L not in mins or d < mins[L]:
            mins[L] = d
        head_drop = min(head_drop, d - max(disp[abs(e) - 1] for e in word))
        if trivial:
            rel.append(word)
        elif d < short_tol:
            short.append((word, d))
    partial = count > budget
    rel.sort(key=lambda w: (len(w), W.word_key(w)))
    short.sort(key=lambda t: (len(t[0]), W.word_key(t[0])))
    ce = [{"word": W.unparse(w), "length": len(w), "displacement": 0.0, "identity": True} for w in rel]
    ce += [{"word": W.unparse(w), "length": len(w), "displacement": d, "identity": False} for w, d in short]
    alpha, beta = _fit_linear_lower([(0, 0.0)] + sorted(mins.items()))
    return QIProbe(alpha, beta, lmax, min(count, budget), partial, ce, len(rel), mins,
                   head_drop if math.isfinite(head_drop) else 0.0)


# ---------------------------------------------------------------- ping-pong


@dataclass
class FreeCertificate:
    margin: float
    pairwise_margin: float
    min_displacement: float
    max_product: float
    delta: float
    products: list
    alpha: float
    beta: float
    lmax: int
    qg: dict
    probe: dict

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class PingPongReport:
    margin: float
    pairwise_margin: float
    min_displacement: float
    max_product: float
    delta: float
    products: list
    margin_ok: bool
    qg_ok: bool = False
    qg: dict = field(default_factory=dict)
    probe: QIProbe | None = None

    @property
    def certified(self) -> bool:
        return self.margin_ok and self.qg_ok and self.probe is not None and self.probe.clean

    def to_json(self) -> dict:
        return {
            "margin": self.margin, "pairwise_margin": self.pairwise_margin,
            "min_displacement": self.min_displacement, "max_product": self.max_product, "delta": self.delta,
            "margin_ok": self.margin_ok, "qg_ok": self.qg_ok, "qg": self.qg,
            "probe": self.probe.to_json() if self.probe else None, "certified": self.certified,
        }


def _letter_iso(M: GenTuple, e: int) -> I.Isometry:
    g = M.elements[abs(e) - 1]
    return g if e > 0 else I.invert(g)


def pingpong_analysis(M: GenTuple, ctx: CertifyContext, run_probe: bool = True) -> PingPongReport:
    if any(g.is_identity() for g in M.elements):
        raise CertifyError("a trivial element is present")
    model, x = M.model, M.basepoint
    delta = float(model.delta)
    letters = [e for k in range(1, M.n + 1) for e in (k, -k)]
    pt = {e: I.apply(_letter_iso(M, e), x) for e in letters}
    length = {e: float(dist(model, x, pt[e])) for e in letters}
    P = {}
    for u in letters:
        for v in letters:
            if v != -u:
                P[(u, v)] = float(gromov_product(model, pt[-u], pt[v], x))
    m = min(length.values())
    maxP = max(P.values()) if P else 0.0
    pairwise = m / 2 - 2 * delta - maxP
    triple = math.inf
    for (u, v), puv in P.items():
        for w in letters:
            if w != -v:
                triple = min(triple, (length[v] - puv - P[(v, w)]) / 2 - 2 * delta)
    if not math.isfinite(triple):
        triple = m / 2 - 2 * delta
    margin = max(triple, pairwise)
    products = [{"u": W.unparse((u,)), "v": W.unparse((v,)), "P": p} for (u, v), p in sorted(P.items(), key=lambda t: (W.letter_key(t[0][0]), W.letter_key(t[0][1])))]
    rep = PingPongReport(margin, pairwise, m, maxP, delta, products, margin > ctx.margin)
    if not rep.margin_ok:
        return rep
    rep.qg = _orbit_qg_gate(M, ctx, m, maxP, delta)
    rep.qg_ok = rep.qg["pass"]
    if run_probe:
        rep.probe = qi_probe(M, budget_lmax(M.n, ctx.lmax, ctx.probe_budget), ctx)
    return rep


def _gate_words(M: GenTuple, ctx: CertifyContext) -> list:
    import random

    words = list(W.enumerate_reduced(M.n, 2, min_length=1))
    rng = random.Random(ctx.seed)
    letters = [e for k in range(1, M.n + 1) for e in (k, -k)]
    for _ in range(ctx.sigma_samples):
        L = rng.randint(3, 6)
        w: list = []
        while len(w) < L:
            e = rng.choice(letters)
            if not (w and w[-1] == -e):
                w.append(e)
        words.append(tuple(w))
    return words


def _orbit_qg_gate(M: GenTuple, ctx: CertifyContext, m, maxP, delta) -> dict:
    eps = 4 * maxP + 8 * delta
    step = 0.5 if M.model.exact else max(0.05, m / 40)
    worst = None
    checked = 0
    for w in _gate_words(M, ctx):
        rep = local_qg_check(orbit_path(M, w), m, 1.0, eps, step)
        checked += 1
        if worst is None or rep.worst_excess > worst[1].worst_excess:
            worst = (w, rep)
    return {"pass": worst[1].passed, "paths": checked, "T": m, "lam": 1.0, "eps": eps, "step": step,
            "worst_word": W.unparse(worst[0]), "worst": worst[1].to_json()}


def pingpong_certificate(M: GenTuple, ctx: CertifyContext, report: PingPongReport | None = None) -> FreeCertificate | None:
    rep = report if report is not None else pingpong_analysis(M, ctx)
    if not rep.certified:
        return None
    return FreeCertificate(rep.margin, rep.pairwise_margin, rep.min_displacement, rep.max_product, rep.delta,
                           rep.products, rep.probe.alpha, rep.probe.beta, rep.probe.lmax, rep.qg, rep.probe.to_json())


# ---------------------------------------------------------------- position predicates

SHORT_HINT = ("a failing position predicate means the tuple is Nielsen-equivalent to one "
              "whose first entry is k(N, n)-short; minimize the tuple and retry")
MINIMIZE_HINT = "half-survival fails, so the tuple is not minimal; run greedy_minimize first"


@dataclass
class PredicateReport:
    entries: list
    constants: dict
    message: str = ""

    @property
    def passed(self) -> bool:
        return all(e["pass"] for e in self.entries)

    def failed(self) -> list:
        return [e["name"] for e in self.entries if not e["pass"]]

    def worst_margin(self) -> float:
        return min((e["margin"] for e in self.entries), default=0.0)

    def to_json(self) -> dict:
        return {"pass": self.passed, "entries": self.entries, "constants": self.constants,
                "message": self.message, "worst_margin": self.worst_margin()}


def _entry(name, value, bound, kind=">=", **detail) -> dict:
    value, bound = float(value), float(bound)
    margin = value - bound if kind == ">=" else bound - value
    return {"name": name, "pass": margin >= -TOL, "value": value, "bound": bound,
            "margin": margin, "kind": kind, **detail}


def _longest_run(model, P, Q, targets, radius, step) -> float:
    """Length of the longest piece of [P, Q] within ``radius`` of the segment union."""
    pts = sample_segment(model, P, Q, step)
    best = np.full(len(pts), np.inf)
    for c, e in targets:
        best = np.minimum(best, dist_to_segment_many(model, pts, c, e))
    k = len(pts) - 1
    if k == 0:
        return 0.0
    seglen = float(dist(model, P, Q))
    run = longest = -1
    for inside in best <= radius + TOL:
        run = run + 1 if inside else -1
        longest = max(longest, run)
    return max(0, longest) * seglen / k


def _syllable_segments(ctx: CertifyContext, dec: Decomposition, frame=None) -> list:
    """Translates of [x, h_i x] and [x, g_n^e x] along the syllable decomposition."""
    elems, x = ctx.M.elements, ctx.x
    gn = ctx.gn
    segs = []
    prefix = frame if frame is not None else I.identity_like(gn)
    for i in range(dec.l + 1):
        h = I.evaluate(dec.h[i], elems)
        if dec.h[i]:
            segs.append((I.apply(prefix, x), I.apply(I.compose(prefix, h), x)))
        prefix = I.compose(prefix, h)
        if i < dec.l:
            g = gn if dec.eps[i] > 0 else I.invert(gn)
            segs.append((I.apply(prefix, x), I.apply(I.compose(prefix, g), x)))
            prefix = I.compose(prefix, g)
    return segs


def _local_frame(model, x, prefixes: list, whole: I.Isometry):
    """Among exact prefixes P of ``whole``, the inverse of the one keeping x and whole x closest."""
    if model.exact:
        return I.identity_like(whole)
    best = None
    for P in prefixes:
        Pinv = I.invert(P).with_provenance(())
        r = max(float(I.displacement(model, P, x)), float(I.displacement(model, I.compose(Pinv, whole), x)))
        if best is None or r < best[0]:
            best = (r, Pinv)
    return best[1]


def position_predicates(sigma: BrokenPath, ctx: CertifyContext) -> PredicateReport:
    """Evaluate the position inequalities and containments for a sigma path."""
    model, x, elems = ctx.model, ctx.x, ctx.M.elements
    u = sigma.u
    dec = decompose(u, ctx.n_index)
    N, unit, step = sigma.N, ctx.unit, float(ctx.step)
    d2, d4 = ctx.d2, ctx.d4
    gn = ctx.gn
    m = float(I.displacement(model, gn, x))
    ev = lambda w: I.evaluate(w, elems)
    c = lambda k: float(ctx.c(k))
    out = []

    qg = local_qg_check(sigma, N, 1, c(100), step)
    out.append(_entry("sigma_local_quasigeodesic", -qg.worst_excess, 0, worst=qg.to_json()))

    pts = dict(zip(sigma.labels, sigma.points))
    ux = pts["ux"]
    l = dec.l
    h1 = float(I.displacement(model, ev(dec.h[0]), x))
    hl = float(I.displacement(model, ev(dec.h[l]), x))
    xf = sigma.points[0]
    dS1 = float(dist(model, xf, pts["S1"]))
    dTl = float(dist(model, pts[f"T'{l}"], ux))
    half = m / 2 - 2 * float(N) - 2 * float(d2) - float(d4) - c(24)
    out.append(_entry("start_gap_half", dS1, half))
    out.append(_entry("start_gap_syllable", dS1, h1 - m / 2 - float(N) - float(d2) - float(d4) - c(10)))
    out.append(_entry("end_gap_half", dTl, half))
    out.append(_entry("end_gap_syllable", dTl, hl - m / 2 - float(N) - float(d2) - float(d4) - c(10)))

    R = c(15)
    parts = sigma.parts
    for i in range(1, l + 1):
        sw, sv = parts[2 * (i - 1)], parts[2 * (i - 1) + 1]
        hi = ev(dec.h[i - 1])
        g = gn if dec.eps[i - 1] > 0 else I.invert(gn)
        # half-survival of the tripod point for h_i g_n^e_i
        if dec.h[i - 1]:
            r = quad_pair(model, hi, g, x, unit, step).points["r"]
            hgx = I.apply(I.compose(hi, g), x)
            hlen = float(I.displacement(model, hi, x))
            out.append(_entry("half_survival_head", dist(model, r, x), hlen / 2 - c(3), index=i))
            out.append(_entry("half_survival_tail", dist(model, r, hgx), m / 2 - c(3) - float(d2), index=i))
        # stable parts of w_i and v_i inside [x, z_i x], in order
        z = ev(dec.z(i))
        F = _local_frame(model, x, [I.identity_like(gn), hi, I.compose(hi, g)], z)
        fx, zx = I.apply(F, x), I.apply(I.compose(F, z), x)
        Fh = I.compose(F, hi)
        a0, a1 = I.apply(F, sw.s), I.apply(F, sw.t)
        b0, b1 = I.apply(Fh, sv.s), I.apply(Fh, sv.t)
        rw = _seg_radius(model, a0, a1, [(fx, zx)], step)
        rv = _seg_radius(model, b0, b1, [(fx, zx)], step)
        order = float(gromov_product(model, b0, zx, fx)) - float(gromov_product(model, a1, zx, fx))
        out.append(_entry("triple_stable_w", rw, R, "<=", index=i))
        out.append(_entry("triple_stable_v", rv, R, "<=", index=i))
        out.append(_entry("triple_stable_order", order, -2 * R, index=i))
        if i < l:
            swn = parts[2 * i]
            y = ev(dec.y(i))
            hn = ev(dec.h[i])
            F = _local_frame(model, x, [I.identity_like(gn), g, I.compose(g, hn)], y)
            fx, yx = I.apply(F, x), I.apply(I.compose(F, y), x)
            Fg = I.compose(F, g)
            c0, c1 = I.apply(Fg, swn.s), I.apply(Fg, swn.t)
            v0, v1 = I.apply(F, sv.s), I.apply(F, sv.t)
            rv2 = _seg_radius(model, v0, v1, [(fx, yx)], step)
            rw2 = _seg_radius(model, c0, c1, [(fx, yx)], step)
            order2 = float(gromov_product(model, c0, yx, fx)) - float(gromov_product(model, v1, yx, fx))
            run = _longest_run(model, I.apply(Fg, x), I.apply(I.compose(Fg, hn), x), [(fx, yx)], R, step)
            need = float(I.displacement(model, hn, x)) - m - 2 * float(N) - 2 * float(d4) - 2 * float(d2)
            out.append(_entry("gn_triple_stable_v", rv2, R, "<=", index=i))
            out.append(_entry("gn_triple_middle_run", run + step, need, index=i))
            out.append(_entry("gn_triple_stable_w", rw2, R, "<=", index=i))
            out.append(_entry("gn_triple_stable_order", order2, -2 * R, index=i))

    orbit = orbit_path(ctx.M, u, sigma.frame)
    rad = _seg_radius(model, xf, ux, orbit.segments(), step) if orbit.segments() else 0.0
    out.append(_entry("orbit_neighborhood", rad, ctx.d2n, "<="))

    out.append(_window_tracking(ctx, dec, xf, ux, step, sigma.frame))
    depth = chart_depth(model, sigma.points + orbit.points)
    out.append(_entry("numeric_resolution", depth, RESOLUTION_LIMIT, "<="))

    rep = PredicateReport(out, {**ctx.to_json(), "N": float(N), "m": m})
    bad = rep.failed()
    if "numeric_resolution" in bad:
        rep.message = "points leave the float resolution range; results for this word are unreliable"
    elif any(b.startswith("half_survival") for b in bad):
        rep.message = MINIMIZE_HINT
    elif bad:
        rep.message = SHORT_HINT
    return rep


def _window_tracking(ctx, dec, x, ux, step, frame=None) -> dict:
    """Every 10T window of [x, ux] tracks a length-T piece of a syllable segment."""
    model = ctx.model
    T = float(ctx.T)
    radius = float(2 * ctx.L + 100 * ctx.unit) if ctx.unit else 0.0
    D = float(dist(model, x, ux))
    if T <= 0 or D < 10 * T:
        return _entry("window_tracking", 0.0, 0.0, windows=0, note="no window of length 10T")
    segs = _syllable_segments(ctx, dec, frame)
    worst = math.inf
    count = 0
    a = 0.0
    while True:
        a = min(a, D - 10 * T)
        w0 = point_at_distance(model, x, ux, a)
        w1 = point_at_distance(model, x, ux, a + 10 * T)
        best = max(_longest_run(model, P, Q, [(w0, w1)], radius, step) for P, Q in segs)
        worst = min(worst, best + step)
        count += 1
        if a >= D - 10 * T - TOL:
            break
        a += T
    return _entry("window_tracking", worst, T, windows=count, radius=radius)
