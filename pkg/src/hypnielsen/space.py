"""Model spaces: the hyperbolic plane and 3-space (upper half models) and the
Cayley tree of a free group.

Distances are reported in the scaled metric ``raw / scale``.  Tree
computations stay exact (``Fraction``) whenever the inputs are exact.
"""

from __future__ import annotations

import cmath
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real

import numpy as np

from . import words as W

H2 = "H2"
H3 = "H3"
TREE = "tree"
KINDS = (H2, H3, TREE)

TOL = 1e-9


class ModelMismatch(TypeError):
    pass


def as_number(value):
    """Keep ints, Fractions and rational strings exact; everything else float."""
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    return float(value)


@dataclass(frozen=True)
class SpaceModel:
    kind: str
    rank: int = 0
    scale: Real = Fraction(1)
    delta: Real | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == TREE and self.rank < 1:
            raise ValueError("tree model needs a positive rank")
        object.__setattr__(self, "scale", as_number(self.scale))
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.delta is None:
            # H2 is declared 1-hyperbolic at scale 1; trees are 0-hyperbolic.
            default = Fraction(0) if self.kind == TREE else 1 / self.scale
            object.__setattr__(self, "delta", default)
        else:
            object.__setattr__(self, "delta", as_number(self.delta))
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.kind == TREE and self.delta != 0:
            raise ValueError("tree models have delta = 0")

    @property
    def exact(self) -> bool:
        return self.kind == TREE

    def rescaled(self, scale) -> "SpaceModel":
        """Same space with a new scale; delta follows the metric."""
        scale = as_number(scale)
        return SpaceModel(self.kind, self.rank, scale, self.delta * self.scale / scale)

    def normalized(self) -> "SpaceModel":
        """The 1-hyperbolic rescaling (trees: the unit-edge metric)."""
        if self.kind == TREE:
            return SpaceModel(TREE, self.rank, Fraction(1))
        return SpaceModel(self.kind, self.rank, self.scale * self.delta, Fraction(1))

    def to_json(self) -> dict:
        out = {"kind": self.kind, "scale": _num_json(self.scale), "delta": _num_json(self.delta)}
        if self.kind == TREE:
            out["rank"] = self.rank
        return out

    @classmethod
    def from_json(cls, data: dict) -> "SpaceModel":
        return cls(data["kind"], int(data.get("rank", 0)), data.get("scale", 1), data.get("delta"))


def _num_json(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else x.numerator
    return x


# ---------------------------------------------------------------- points


@dataclass(frozen=True)
class H2Point:
    z: complex

    def __post_init__(self):
        z = complex(self.z)
        if not z.imag > 0:
            raise ValueError(f"H2 point needs Im z > 0, got {z}")
        object.__setattr__(self, "z", z)


@dataclass(frozen=True)
class H3Point:
    z: complex
    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("H3 point needs t > 0")
        object.__setattr__(self, "z", complex(self.z))
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class TreePoint:
    """Point at distance ``offset`` from vertex ``word`` toward the root."""

    word: W.Word = ()
    offset: Fraction = field(default=Fraction(0))

    def __post_init__(self):
        word = tuple(self.word)
        off = self.offset if type(self.offset) is Fraction else Fraction(self.offset)
        if not W.is_reduced(word):
            raise ValueError("tree point word must be freely reduced")
        if not 0 <= off < 1:
            raise ValueError("tree offset must lie in [0, 1)")
        if off and not word:
            raise ValueError("the root has no edge toward itself")
        object.__setattr__(self, "word", word)
        object.__setattr__(self, "offset", off)

    @property
    def depth(self) -> Fraction:
        return len(self.word) - self.offset


ROOT = TreePoint()

Point = H2Point | H3Point | TreePoint

_POINT_TYPES = {H2: H2Point, H3: H3Point, TREE: TreePoint}


def check_point(model: SpaceModel, *points) -> None:
    cls = _POINT_TYPES[model.kind]
    for p in points:
        if not isinstance(p, cls):
            raise ModelMismatch(f"{type(p).__name__} is not a point of {model.kind}")
        if model.kind == TREE and W.max_letter(p.word) > model.rank:
            raise ModelMismatch("tree point uses letters beyond the model rank")


def default_basepoint(model: SpaceModel) -> Point:
    if model.kind == H2:
        return H2Point(1j)
    if model.kind == H3:
        return H3Point(0j, 1.0)
    return ROOT


def point_to_json(p: Point) -> dict:
    if isinstance(p, H2Point):
        return {"re": p.z.real, "im": p.z.imag}
    if isinstance(p, H3Point):
        return {"re": p.z.real, "im": p.z.imag, "t": p.t}
    return {"word": W.unparse(p.word), "offset": str(p.offset)}


def point_from_json(model: SpaceModel, data: dict) -> Point:
    if model.kind == H2:
        return H2Point(complex(float(data["re"]), float(data["im"])))
    if model.kind == H3:
        return H3Point(complex(float(data["re"]), float(data["im"])), float(data["t"]))
    return TreePoint(W.parse(data.get("word", "")), Fraction(data.get("offset", "0")))


# ---------------------------------------------------------------- raw metric


def _h2_raw(z: complex, w: complex) -> float:
    return 2.0 * math.asinh(abs(z - w) / (2.0 * math.sqrt(z.imag * w.imag)))


def _h3_raw(p: H3Point, q: H3Point) -> float:
    num = math.sqrt(abs(p.z - q.z) ** 2 + (p.t - q.t) ** 2)
    return 2.0 * math.asinh(num / (2.0 * math.sqrt(p.t * q.t)))


def _tree_raw(p: TreePoint, q: TreePoint) -> Fraction:
    l = W.common_prefix_length(p.word, q.word)
    if not p.offset and not q.offset:
        # vertices: plain integer arithmetic
        return len(p.word) + len(q.word) - 2 * l
    d1, d2 = p.depth, q.depth
    return d1 + d2 - 2 * min(d1, d2, l)


def raw_dist(model: SpaceModel, p: Point, q: Point):
    check_point(model, p, q)
    if model.kind == H2:
        return _h2_raw(p.z, q.z)
    if model.kind == H3:
        return _h3_raw(p, q)
    return _tree_raw(p, q)


# float distances stay accurate to about 1e-8 up to this raw depth from the chart centre
RESOLUTION_LIMIT = 30.0


def chart_depth(model: SpaceModel, pts) -> float:
    """Largest raw distance from the chart centre (0 for trees)."""
    if model.kind == TREE or not pts:
        return 0.0
    centre = default_basepoint(model)
    return max(float(raw_dist(model, centre, p)) for p in pts)


def dist(model: SpaceModel, p: Point, q: Point):
    r = raw_dist(model, p, q)
    return r if model.scale == 1 else r / model.scale


def gromov_product(model: SpaceModel, p: Point, q: Point, base: Point):
    g = (dist(model, base, p) + dist(model, base, q) - dist(model, p, q)) / 2
    if not model.exact and g < 0:
        g = 0.0
    return g


# ---------------------------------------------------------------- geodesics


def _h2_unit_toward(p: complex, q: complex, s: float) -> complex:
    """Point at raw distance ``s`` from p toward q, by arclength on the geodesic."""
    if p == q:
        return p
    dx = q.real - p.real
    if abs(dx) <= 1e-13 * max(p.imag, q.imag):
        sign = 1.0 if q.imag > p.imag else -1.0
        return complex(p.real, p.imag * math.exp(sign * s))
    # semicircle centre c, radius R; z = c + R (tanh tau + i sech tau), sinh tau = (x - c) / y
    c = (q.real + p.real) / 2 + (q.imag - p.imag) * (q.imag + p.imag) / (2 * dx)
    R = math.hypot(p.real - c, p.imag)
    tp = math.asinh((p.real - c) / p.imag)
    tq = math.asinh((q.real - c) / q.imag)
    tau = tp + s if tq > tp else tp - s
    return complex(c + R * math.tanh(tau), R / math.cosh(tau))


def _h2_point(p: complex, q: complex, t: float) -> complex:
    if t == 0 or p == q:
        return p
    if t == 1:
        return q
    return _h2_unit_toward(p, q, t * _h2_raw(p, q))


def _h3_point(p: H3Point, q: H3Point, t: float) -> H3Point:
    if t == 0:
        return p
    if t == 1:
        return q
    dz = q.z - p.z
    if abs(dz) == 0:
        return H3Point(p.z, p.t * (q.t / p.t) ** t)
    u = dz / abs(dz)
    w = _h2_point(complex(0, p.t), complex(abs(dz), q.t), t)
    return H3Point(p.z + w.real * u, w.imag)


def _tree_on_ray(word: W.Word, depth: Fraction) -> TreePoint:
    k = math.ceil(depth)
    if depth == k:
        return TreePoint(word[:k])
    return TreePoint(word[:k], k - depth)


def _tree_point_at(p: TreePoint, q: TreePoint, s: Fraction) -> TreePoint:
    l = W.common_prefix_length(p.word, q.word)
    d1, d2 = p.depth, q.depth
    m = min(d1, d2, l)
    up = d1 - m
    if s <= up:
        return _tree_on_ray(p.word, d1 - s)
    return _tree_on_ray(q.word, m + (s - up))


def geodesic_point(model: SpaceModel, p: Point, q: Point, t) -> Point:
    """Point at fraction ``t`` of the way along the geodesic from p to q."""
    check_point(model, p, q)
    if model.kind == H2:
        return H2Point(_h2_point(p.z, q.z, float(t)))
    if model.kind == H3:
        return _h3_point(p, q, float(t))
    t = Fraction(t)
    return _tree_point_at(p, q, t * _tree_raw(p, q))


def point_at_distance(model: SpaceModel, p: Point, q: Point, s) -> Point:
    """Point on [p, q] at (scaled) distance ``s`` from p, clamped to the segment."""
    d = dist(model, p, q)
    if d == 0:
        return p
    if model.exact:
        s = Fraction(s)
    t = min(max(s / d, 0), 1)
    return geodesic_point(model, p, q, t)


def _h2_axis_chart(a: complex, b: complex):
    """Isometry sending a to i and b onto the imaginary axis above i."""
    dx = b.real - a.real
    if abs(dx) <= 1e-13 * max(a.imag, b.imag):
        c = a.real
        if b.imag > a.imag:
            return lambda z: (z - c) / a.imag
        return lambda z: -a.imag / (z - c)
    # endpoints of the semicircle through a and b, e0 behind a, e1 beyond b
    c = (b.real + a.real) / 2 + (b.imag - a.imag) * (b.imag + a.imag) / (2 * dx)
    R = math.hypot(a.real - c, a.imag)
    e0, e1 = (c - R, c + R) if dx > 0 else (c + R, c - R)
    sg = 1.0 if e1 > e0 else -1.0
    k = abs((a - e0) / (e1 - a))

    def chart(z):
        return (z - e0) / (sg * (e1 - z)) / k

    return chart


def _h2_seg_dist_many(zs: np.ndarray, a: complex, b: complex) -> np.ndarray:
    if a == b:
        return 2.0 * np.arcsinh(np.abs(zs - a) / (2.0 * np.sqrt(zs.imag * a.imag)))
    chart = _h2_axis_chart(a, b)
    D = _h2_raw(a, b)
    z = chart(zs)
    x, y = z.real, z.imag
    s = np.log(np.abs(z))
    inside = np.arcsinh(np.abs(x) / y)
    top = 1j * math.exp(D)
    d_lo = 2.0 * np.arcsinh(np.abs(z - 1j) / (2.0 * np.sqrt(y)))
    d_hi = 2.0 * np.arcsinh(np.abs(z - top) / (2.0 * np.sqrt(y * top.imag)))
    return np.where(s < 0, d_lo, np.where(s > D, d_hi, inside))


def _golden_min(f, lo: float, hi: float, iters: int = 80) -> float:
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return min(fc, fd, f(lo), f(hi))


def _h3_seg_dist_many(zs: np.ndarray, ts: np.ndarray, a: H3Point, b: H3Point) -> np.ndarray:
    """Distances from points (zs, ts) to [a, b], after moving [a, b] onto the vertical axis."""
    z = (zs - a.z) / a.t
    t = ts / a.t
    wz, wt = (b.z - a.z) / a.t, b.t / a.t
    if abs(wz) > 0:
        rot = abs(wz) / wz
        z = z * rot
        wz = abs(wz)
        # rotation about (0, 1) in the vertical plane over R, taking b into the axis
        w_disk = (complex(wz.real, wt) - 1j) / (complex(wz.real, wt) + 1j)
        phi = -cmath.phase(w_disk)
        C = np.array([[1, -1j], [1, 1j]])
        R = np.linalg.inv(C) @ np.diag([cmath.exp(0.5j * phi), cmath.exp(-0.5j * phi)]) @ C
        (ma, mb), (mc, md) = R.real
        czd = mc * z + md
        den = np.abs(czd) ** 2 + mc * mc * t * t
        z, t = ((ma * z + mb) * np.conj(czd) + ma * mc * t * t) / den, t / den
    D = _h3_raw(a, b)
    r = np.sqrt(np.abs(z) ** 2 + t * t)
    s = np.log(r)
    inside = np.arcsinh(np.abs(z) / t)
    top = math.exp(D)
    d_lo = 2.0 * np.arcsinh(np.sqrt(np.abs(z) ** 2 + (t - 1) ** 2) / (2.0 * np.sqrt(t)))
    d_hi = 2.0 * np.arcsinh(np.sqrt(np.abs(z) ** 2 + (t - top) ** 2) / (2.0 * np.sqrt(t * top)))
    return np.where(s < 0, d_lo, np.where(s > D, d_hi, inside))


def dist_to_segment(model: SpaceModel, p: Point, a: Point, b: Point):
    """Distance from p to the geodesic segment [a, b]."""
    check_point(model, p, a, b)
    if model.kind == TREE:
        return (dist(model, p, a) + dist(model, p, b) - dist(model, a, b)) / 2
    if model.kind == H2:
        raw = float(_h2_seg_dist_many(np.array([p.z]), a.z, b.z)[0])
        return raw / model.scale
    raw = float(_h3_seg_dist_many(np.array([p.z]), np.array([p.t]), a, b)[0])
    return raw / model.scale


def dist_to_segment_many(model: SpaceModel, pts: list, a: Point, b: Point) -> np.ndarray:
    if model.kind == H2:
        zs = np.array([p.z for p in pts], dtype=complex)
        return _h2_seg_dist_many(zs, a.z, b.z) / float(model.scale)
    if model.kind == H3:
        zs = np.array([p.z for p in pts], dtype=complex)
        ts = np.array([p.t for p in pts], dtype=float)
        return _h3_seg_dist_many(zs, ts, a, b) / float(model.scale)
    return np.array([float(dist_to_segment(model, p, a, b)) for p in pts])


def sample_segment(model: SpaceModel, a: Point, b: Point, step: float) -> list:
    """Points along [a, b] at spacing at most ``step`` (endpoints included)."""
    d = float(dist(model, a, b))
    k = max(1, math.ceil(d / step)) if step > 0 else 1
    if model.exact:
        return [geodesic_point(model, a, b, Fraction(j, k)) for j in range(k + 1)]
    return [geodesic_point(model, a, b, j / k) for j in range(k + 1)]


def max_dist_to_union(model: SpaceModel, a: Point, b: Point, segments, step: float) -> float:
    """Largest distance from a sampled point of [a, b] to the union of ``segments``."""
    pts = sample_segment(model, a, b, step)
    best = np.full(len(pts), np.inf)
    for (c, e) in segments:
        best = np.minimum(best, dist_to_segment_many(model, pts, c, e))
    return float(best.max())


# ---------------------------------------------------------------- sampling


def random_point(model: SpaceModel, rng: random.Random, radius: int = 6) -> Point:
    if model.kind == H2:
        return H2Point(complex(rng.uniform(-5, 5), math.exp(rng.uniform(-3, 3))))
    if model.kind == H3:
        z = complex(rng.uniform(-5, 5), rng.uniform(-5, 5))
        return H3Point(z, math.exp(rng.uniform(-3, 3)))
    length = rng.randint(0, radius)
    letters = [e for g in range(1, model.rank + 1) for e in (g, -g)]
    word: list[int] = []
    while len(word) < length:
        e = rng.choice(letters)
        if word and word[-1] == -e:
            continue
        word.append(e)
    offset = Fraction(rng.randint(0, 3), 4) if word else Fraction(0)
    return TreePoint(tuple(word), offset)


def triangle_thinness(model: SpaceModel, p: Point, q: Point, r: Point, samples: int = 33) -> float:
    worst = 0.0
    sides = [(p, q), (q, r), (r, p)]
    for k, (a, b) in enumerate(sides):
        others = [s for j, s in enumerate(sides) if j != k]
        d = float(dist(model, a, b))
        step = d / (samples - 1) if d > 0 else 1.0
        worst = max(worst, max_dist_to_union(model, a, b, others, step if d > 0 else 1.0))
    return worst


def estimate_thinness(model: SpaceModel, trials: int, seed: int) -> float:
    """Largest observed thinness over ``trials`` seeded random triangles."""
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = random.Random(seed)
    unit = model.rescaled(1)
    worst = 0.0
    for _ in range(trials):
        p, q, r = (random_point(unit, rng) for _ in range(3))
        worst = max(worst, triangle_thinness(unit, p, q, r))
    return worst / float(model.scale) if not model.exact else Fraction(worst) / model.scale
