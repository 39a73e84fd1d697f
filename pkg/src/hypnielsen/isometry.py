"""Isometries of the model spaces.

Matrices are (P)SL(2) elements acting by Moebius transformations; tree
isometries are reduced words acting by left multiplication.  Every isometry
carries a provenance word over the original generators.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass
from fractions import Fraction

from . import words as W
from .space import (
    H2,
    H3,
    TREE,
    H2Point,
    H3Point,
    ModelMismatch,
    Point,
    SpaceModel,
    TreePoint,
    check_point,
    dist,
    geodesic_point,
    _h3_raw,
)

FLOAT_IDENTITY_TOL = 1e-8


class IsometryError(ValueError):
    pass


# ---------------------------------------------------------------- exact complex


class GaussQ:
    """Complex number with rational real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    def _coerce(self, other):
        if isinstance(other, GaussQ):
            return other
        if isinstance(other, (int, Fraction)):
            return GaussQ(other)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        return GaussQ(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return GaussQ(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return GaussQ(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __neg__(self):
        return GaussQ(-self.re, -self.im)

    def __truediv__(self, other):
        o = self._coerce(other)
        n = o.re * o.re + o.im * o.im
        return self * GaussQ(o.re / n, -o.im / n)

    def __eq__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return complex(self) == other
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"GaussQ({self.re}, {self.im})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        sign = "+" if self.im >= 0 else "-"
        return f"{self.re}{sign}{abs(self.im)}i"


_COMPLEX_RE = re.compile(r"^\s*([+-]?[^+-]+?)?\s*(?:([+-])\s*([^+-]*?)\s*i)?\s*$")


def parse_entry(value, field: str, mode: str):
    if mode == "rational":
        if field == "real":
            return Fraction(str(value))
        if isinstance(value, (list, tuple)):
            return GaussQ(Fraction(str(value[0])), Fraction(str(value[1])))
        text = str(value).replace(" ", "")
        if text.endswith("i"):
            m = re.match(r"^([+-]?[0-9/]+)?([+-][0-9/]*)i$", text) or re.match(r"^()([+-]?[0-9/]*)i$", text)
            if not m:
                raise IsometryError(f"cannot parse complex rational {value!r}")
            re_part = m.group(1) or "0"
            im_part = m.group(2)
            if im_part in ("", "+"):
                im_part = "1"
            elif im_part == "-":
                im_part = "-1"
            return GaussQ(Fraction(re_part), Fraction(im_part))
        return GaussQ(Fraction(text))
    if field == "real":
        return float(Fraction(str(value))) if isinstance(value, str) else float(value)
    if isinstance(value, (list, tuple)):
        return complex(float(value[0]), float(value[1]))
    return complex(str(value).replace("i", "j")) if isinstance(value, str) else complex(value)


def entry_to_json(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, GaussQ):
        return [str(v.re), str(v.im)]
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


# ---------------------------------------------------------------- matrices


def _is_zero(v, exact: bool) -> bool:
    if exact:
        return v == 0
    return abs(complex(v)) < 1e-14


@dataclass(frozen=True)
class Mat2:
    a: object
    b: object
    c: object
    d: object
    field: str = "real"
    mode: str = "rational"

    @property
    def exact(self) -> bool:
        return self.mode == "rational"

    @classmethod
    def make(cls, a, b, c, d, field="real", mode="rational", check=True) -> "Mat2":
        m = cls(a, b, c, d, field, mode)
        if check:
            det = a * d - b * c
            if m.exact:
                if det != 1:
                    raise IsometryError(f"determinant {det} != 1")
            elif abs(complex(det) - 1) > 1e-9:
                raise IsometryError(f"determinant {det} != 1")
        return m.canonical()

    @classmethod
    def identity(cls, field="real", mode="rational") -> "Mat2":
        one, zero = cls._one_zero(field, mode)
        return cls(one, zero, zero, one, field, mode)

    @staticmethod
    def _one_zero(field, mode):
        if mode == "rational":
            return (Fraction(1), Fraction(0)) if field == "real" else (GaussQ(1), GaussQ(0))
        return (1.0, 0.0) if field == "real" else (1 + 0j, 0j)

    def canonical(self) -> "Mat2":
        for v in (self.a, self.b, self.c, self.d):
            if _is_zero(v, self.exact):
                continue
            if self.field == "real":
                negate = v < 0
            else:
                z = complex(v)
                re_zero = v.re == 0 if self.exact else abs(z.real) < 1e-14
                negate = (z.real < 0 and not re_zero) or (re_zero and z.imag < 0)
            if negate:
                return Mat2(-self.a, -self.b, -self.c, -self.d, self.field, self.mode)
            return self
        return self

    def __matmul__(self, other: "Mat2") -> "Mat2":
        field = "complex" if "complex" in (self.field, other.field) else "real"
        mode = "rational" if self.exact and other.exact else "float"
        x, y = self, other
        if mode == "float":
            x, y = self.as_float(), other.as_float()
        a = x.a * y.a + x.b * y.c
        b = x.a * y.b + x.b * y.d
        c = x.c * y.a + x.d * y.c
        d = x.c * y.b + x.d * y.d
        return Mat2(a, b, c, d, field, mode).canonical()

    def inverse(self) -> "Mat2":
        return Mat2(self.d, -self.b, -self.c, self.a, self.field, self.mode).canonical()

    def as_float(self) -> "Mat2":
        if not self.exact:
            return self
        if self.field == "real":
            conv = float
        else:
            conv = complex
        return Mat2(conv(self.a), conv(self.b), conv(self.c), conv(self.d), self.field, "float")

    def complex_entries(self) -> tuple[complex, complex, complex, complex]:
        return tuple(complex(v) for v in (self.a, self.b, self.c, self.d))

    def trace(self):
        return self.a + self.d

    def is_identity(self) -> bool:
        if self.exact:
            return self.b == 0 and self.c == 0 and self.a == self.d and self.a * self.d == 1
        a, b, c, d = self.complex_entries()
        return min(
            _opnorm(a - s, b, c, d - s) for s in (1, -1)
        ) < FLOAT_IDENTITY_TOL

    def to_json(self) -> dict:
        return {
            "entries": [[entry_to_json(self.a), entry_to_json(self.b)], [entry_to_json(self.c), entry_to_json(self.d)]],
            "field": self.field,
            "mode": self.mode,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Mat2":
        field = data.get("field", "real")
        mode = data.get("mode", "rational")
        (a, b), (c, d) = data["entries"]
        vals = [parse_entry(v, field, mode) for v in (a, b, c, d)]
        return cls.make(*vals, field=field, mode=mode)


def _opnorm(a, b, c, d) -> float:
    # largest singular value of [[a, b], [c, d]]
    s = abs(a) ** 2 + abs(b) ** 2 + abs(c) ** 2 + abs(d) ** 2
    det = abs(a * d - b * c)
    return math.sqrt(max(0.0, (s + math.sqrt(max(0.0, s * s - 4 * det * det))) / 2))


def matrix(rows, field="real", mode=None) -> Mat2:
    """Build a canonical matrix.  Exact mode is chosen when all entries are rational."""
    (a, b), (c, d) = rows
    vals = [a, b, c, d]
    if mode is None:
        exact = (int, Fraction, str, GaussQ)
        mode = "rational" if all(isinstance(v, exact) or isinstance(v, (list, tuple)) and all(isinstance(t, exact) for t in v)
                                 for v in vals) else "float"
    if any(isinstance(v, (complex, GaussQ, list, tuple)) or (isinstance(v, str) and "i" in v) for v in vals):
        field = "complex"
    parsed = [parse_entry(v, field, mode) if not isinstance(v, GaussQ) else v for v in vals]
    return Mat2.make(*parsed, field=field, mode=mode)


# ---------------------------------------------------------------- isometries


@dataclass(frozen=True)
class Isometry:
    kind: str
    concrete: object
    provenance: W.Word = ()

    def __post_init__(self):
        if self.kind == TREE:
            if not W.is_reduced(self.concrete):
                raise IsometryError("tree isometry word must be freely reduced")
        elif not isinstance(self.concrete, Mat2):
            raise IsometryError("matrix isometry expected")
        elif self.kind == H2 and self.concrete.field != "real":
            raise IsometryError("H2 isometries must be real matrices")
        if not W.is_reduced(self.provenance):
            raise IsometryError("provenance must be freely reduced")

    def with_provenance(self, word: W.Word) -> "Isometry":
        return Isometry(self.kind, self.concrete, W.reduce(word))

    def is_identity(self) -> bool:
        if self.kind == TREE:
            return len(self.concrete) == 0
        return self.concrete.is_identity()

    def same_concrete(self, other: "Isometry") -> bool:
        if self.kind != other.kind:
            return False
        if self.kind == TREE or (self.concrete.exact and other.concrete.exact):
            return self.concrete == other.concrete
        return invert(self).concrete.__matmul__(other.concrete).is_identity()

    def concrete_json(self) -> dict:
        if self.kind == TREE:
            return {"word": W.unparse(self.concrete)}
        return self.concrete.to_json()

    def __str__(self):
        if self.kind == TREE:
            return W.unparse(self.concrete) or "1"
        m = self.concrete
        return f"[[{m.a}, {m.b}], [{m.c}, {m.d}]]"


def tree_word(text_or_word, provenance: W.Word = ()) -> Isometry:
    w = W.parse(text_or_word) if isinstance(text_or_word, str) else tuple(text_or_word)
    return Isometry(TREE, W.reduce(w), provenance)


def mobius(rows, provenance: W.Word = (), kind: str = H2, mode=None) -> Isometry:
    m = matrix(rows, mode=mode)
    if m.field == "complex":
        kind = H3
    return Isometry(kind, m, provenance)


def identity_like(g: Isometry) -> Isometry:
    if g.kind == TREE:
        return Isometry(TREE, ())
    return Isometry(g.kind, Mat2.identity(g.concrete.field, g.concrete.mode))


def _check_kind(g: Isometry, h: Isometry) -> None:
    if g.kind != h.kind:
        raise ModelMismatch(f"cannot combine {g.kind} and {h.kind} isometries")


def compose(g: Isometry, h: Isometry) -> Isometry:
    """g after h."""
    _check_kind(g, h)
    prov = W.mul(g.provenance, h.provenance)
    if g.kind == TREE:
        return Isometry(TREE, W.mul(g.concrete, h.concrete), prov)
    kind = H3 if H3 in (g.kind, h.kind) else g.kind
    return Isometry(kind, g.concrete @ h.concrete, prov)


def invert(g: Isometry) -> Isometry:
    prov = W.inverse(g.provenance)
    if g.kind == TREE:
        return Isometry(TREE, W.inverse(g.concrete), prov)
    return Isometry(g.kind, g.concrete.inverse(), prov)


def power(g: Isometry, m: int) -> Isometry:
    base = g if m >= 0 else invert(g)
    out = identity_like(g)
    for _ in range(abs(m)):
        out = compose(out, base)
    return out


def evaluate(word: W.Word, gens: list[Isometry], provenance: bool = True) -> Isometry:
    """Evaluate a word in ``gens`` (letter k means gens[k-1])."""
    if not gens:
        raise IsometryError("no generators")
    out = identity_like(gens[0])
    for e in word:
        g = gens[abs(e) - 1]
        out = compose(out, g if e > 0 else invert(g))
    if not provenance:
        out = out.with_provenance(())
    return out


# ---------------------------------------------------------------- action


def _apply_h2(m: Mat2, z: complex) -> complex:
    # Im(gz) = Im z / |cz + d|^2 avoids cancellation; exact entries are kept exact
    if all(isinstance(v, (int, Fraction)) for v in (m.a, m.b, m.c, m.d)):
        a, b, c, d = m.a, m.b, m.c, m.d
        x, y = Fraction(z.real), Fraction(z.imag)
    else:
        a, b, c, d = (float(v) for v in (m.a, m.b, m.c, m.d))
        x, y = z.real, z.imag
    den = (c * x + d) ** 2 + (c * y) ** 2
    re = (a * c * (x * x + y * y) + (a * d + b * c) * x + b * d) / den
    return complex(float(re), float(y / den))


def _apply_h3(m: Mat2, p: H3Point) -> H3Point:
    a, b, c, d = m.complex_entries()
    z, t = p.z, p.t
    czd = c * z + d
    den = abs(czd) ** 2 + abs(c) ** 2 * t * t
    nz = ((a * z + b) * czd.conjugate() + a * c.conjugate() * t * t) / den
    return H3Point(nz, t / den)


def _apply_tree(word: W.Word, p: TreePoint) -> TreePoint:
    r = W.mul(word, p.word)
    if not p.offset:
        return TreePoint(r)
    parent = W.mul(word, p.word[:-1])
    if len(parent) == len(r) - 1:
        return TreePoint(r, p.offset)
    return TreePoint(parent, 1 - p.offset)


def apply(g: Isometry, p: Point) -> Point:
    if g.kind == TREE:
        if not isinstance(p, TreePoint):
            raise ModelMismatch("tree isometry applied to a non-tree point")
        return _apply_tree(g.concrete, p)
    if isinstance(p, H2Point):
        if g.concrete.field != "real":
            raise ModelMismatch("complex matrix applied to an H2 point")
        return H2Point(_apply_h2(g.concrete, p.z))
    if isinstance(p, H3Point):
        return _apply_h3(g.concrete, p)
    raise ModelMismatch("matrix isometry applied to a tree point")


def displacement(model: SpaceModel, g: Isometry, x: Point):
    return dist(model, x, apply(g, x))


# ---------------------------------------------------------------- classification

IDENTITY = "identity"
ELLIPTIC = "elliptic"
PARABOLIC = "parabolic"
HYPERBOLIC = "hyperbolic"


@dataclass(frozen=True)
class ElementClass:
    kind: str
    length: object

    @property
    def attained(self) -> bool:
        """Whether some point realizes the infimum (false only for parabolics)."""
        return self.kind != PARABOLIC


def classify(g: Isometry) -> str:
    if g.is_identity():
        return IDENTITY
    if g.kind == TREE:
        return HYPERBOLIC
    m = g.concrete
    tr = m.trace()
    if m.exact:
        if m.field == "real":
            t2 = tr * tr
            if t2 > 4:
                return HYPERBOLIC
            return PARABOLIC if t2 == 4 else ELLIPTIC
        if tr.im == 0:
            t2 = tr.re * tr.re
            if t2 < 4:
                return ELLIPTIC
            if t2 == 4:
                return PARABOLIC
        return HYPERBOLIC
    t = complex(tr)
    if abs(t.imag) < 1e-12:
        if abs(abs(t.real) - 2) < 1e-12:
            return PARABOLIC
        if abs(t.real) < 2:
            return ELLIPTIC
    return HYPERBOLIC


def translation_length(g: Isometry, model: SpaceModel | None = None) -> ElementClass:
    scale = model.scale if model is not None else 1
    kind = classify(g)
    if kind != HYPERBOLIC:
        zero = Fraction(0) if g.kind == TREE else 0.0
        return ElementClass(kind, zero)
    if g.kind == TREE:
        _, t = W.cyclic_reduce(g.concrete)
        return ElementClass(kind, Fraction(len(t)) / scale)
    t = complex(g.concrete.trace())
    if abs(t.imag) < 1e-15:
        length = 2.0 * math.acosh(abs(t.real) / 2.0)
    else:
        length = 2.0 * abs(cmath.acosh(t / 2).real)
    return ElementClass(kind, length / float(scale))


# ---------------------------------------------------------------- axis


def _fixed_points(m: Mat2) -> tuple[complex, complex | None]:
    a, b, c, d = m.complex_entries()
    if abs(c) < 1e-15:
        if abs(a - d) < 1e-15:
            return (None, None)
        return (b / (d - a), None)
    disc = cmath.sqrt((a + d) ** 2 - 4)
    return ((a - d + disc) / (2 * c), (a - d - disc) / (2 * c))


def _conj_to_infinity(xi: complex, field: str) -> Mat2:
    # z -> -1/(z - xi), sends xi to infinity
    if field == "real":
        return Mat2(0.0, -1.0, 1.0, -xi.real, "real", "float")
    return Mat2(0j, -1 + 0j, 1 + 0j, -xi, "complex", "float")


def _raise_point(p: Point, height: float) -> Point:
    if isinstance(p, H2Point):
        return H2Point(complex(p.z.real, max(p.z.imag, height)))
    return H3Point(p.z, max(p.t, height))


def _apply_mat(m: Mat2, p: Point) -> Point:
    if isinstance(p, H2Point):
        return H2Point(_apply_h2(m, p.z))
    return _apply_h3(m, p)


def _parabolic_point(model: SpaceModel, g: Isometry, x: Point, target: float) -> Point:
    m = g.concrete.as_float()
    xi, _ = _fixed_points(m)
    if xi is None or not math.isfinite(abs(xi)):
        conj = Mat2.identity(m.field, "float")
    else:
        conj = _conj_to_infinity(xi, m.field)
    gm = conj @ m @ conj.inverse()
    shift = abs(complex(gm.b) / complex(gm.d))
    # translation by shift at height H moves points 2 asinh(shift / 2H)
    height = shift / (2 * math.sinh(target * float(model.scale) / 2)) if shift > 0 else 1.0
    y = _raise_point(_apply_mat(conj, x), height * 1.0001)
    return _apply_mat(conj.inverse(), y)


def _h2_foot(x: complex, xi1: complex, xi2: complex | None) -> complex:
    """Nearest point to x on the geodesic with real endpoints xi1, xi2."""
    if xi2 is None or not math.isfinite(abs(xi2)):
        return complex(xi1.real, abs(x - xi1.real))
    p, q = xi1.real, xi2.real
    if p < q:
        p, q = q, p
    w = (x - p) / (x - q)
    u = 1j * abs(w)
    return (q * u - p) / (u - 1)


def _h3_geodesic_foot(x: H3Point, xi1: complex, xi2: complex | None) -> H3Point:
    if xi2 is None or not math.isfinite(abs(xi2)):
        def at(s):
            return H3Point(xi1, math.exp(s))
    else:
        centre, radius = (xi1 + xi2) / 2, abs(xi1 - xi2) / 2
        u = (xi2 - xi1) / abs(xi2 - xi1)

        def at(s):
            theta = 2 * math.atan(math.exp(s))  # s in R <-> theta in (0, pi)
            return H3Point(centre - radius * math.cos(theta) * u, radius * math.sin(theta))

    lo, hi = -40.0, 40.0
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    for _ in range(200):
        c, d = b - g * (b - a), a + g * (b - a)
        if _h3_raw(x, at(c)) < _h3_raw(x, at(d)):
            b = d
        else:
            a = c
    return at((a + b) / 2)


def axis_point(model: SpaceModel, g: Isometry, x: Point, power_k: int = 1):
    """Point y nearly realizing the translation length, plus the broken path
    [x, y] + [y, gy] + ... + [g^k y, g^k x] as a list of segments."""
    check_point(model, x)
    if g.is_identity():
        raise IsometryError("the identity has no axis")
    cls = translation_length(g, model)
    if g.kind == TREE:
        gx = apply(g, x)
        d = dist(model, x, gx)
        y = x if d == cls.length else geodesic_point(model, x, gx, (d - cls.length) / 2 / d)
    elif cls.kind == PARABOLIC:
        y = _parabolic_point(model, g, x, 0.5)
    else:
        m = g.concrete.as_float()
        xi1, xi2 = _fixed_points(m)
        if isinstance(x, H2Point):
            if cls.kind == ELLIPTIC:
                fixed = xi1 if xi1.imag > 0 else xi2
                y = H2Point(complex(fixed.real, abs(fixed.imag)))
            else:
                y = H2Point(_h2_foot(x.z, xi1, xi2))
        else:
            y = _h3_geodesic_foot(x, xi1, xi2)
    path = [(x, y)]
    cur = y
    gk = identity_like(g)
    for _ in range(power_k):
        nxt = apply(g, cur)
        path.append((cur, nxt))
        cur = nxt
        gk = compose(g, gk)
    path.append((cur, apply(gk, x)))
    return y, path
