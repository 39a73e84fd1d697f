"""Coarse-geometry constants: empirical estimates and the executable recursion.

The recursion is evaluated lazily and memoized.  Level n = 1 is seeded with
a single value ``c0`` for every d-constant.
"""

from __future__ import annotations

import copy
import math
import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import words as W
from .paths import Path, hausdorff_to_geodesic, pairwise
from .space import H2, TREE, H2Point, H3Point, SpaceModel, TreePoint, dist, geodesic_point, random_point


class ConstantsError(ValueError):
    pass


class DomainError(ConstantsError):
    pass


class ScheduleError(ConstantsError):
    pass


def _num(v):
    if isinstance(v, bool):
        raise TypeError("boolean is not a constant")
    if isinstance(v, (int, Fraction)):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v)
    return float(v)


def _out(v):
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else str(v)
    return v


@dataclass(frozen=True)
class BaseConstants:
    K: object = 1
    L: object = 1
    N0: object = 1
    N1: object = None

    def __post_init__(self):
        for name in ("K", "L", "N0"):
            v = _num(getattr(self, name))
            if v < 1:
                raise ConstantsError(f"{name} must be at least 1")
            object.__setattr__(self, name, v)
        n1 = 1000 * self.L * self.K ** 2 * self.N0
        if self.N1 is None:
            object.__setattr__(self, "N1", n1)
        else:
            object.__setattr__(self, "N1", _num(self.N1))

    @property
    def derived(self) -> bool:
        return self.N1 == 1000 * self.L * self.K ** 2 * self.N0

    def to_json(self) -> dict:
        return {"K": _out(self.K), "L": _out(self.L), "N0": _out(self.N0), "N1": _out(self.N1)}

    @classmethod
    def from_json(cls, data: dict) -> "BaseConstants":
        return cls(data.get("K", 1), data.get("L", 1), data.get("N0", 1), data.get("N1"))


class ConstantSchedule:
    def __init__(self, base: BaseConstants | None = None, c0=10, N1_check: bool = True):
        self.base = base or BaseConstants()
        self.c0 = _num(c0)
        self.N1_check = N1_check
        self.T: dict = {}
        self.d1: dict = {}
        self.d2: dict = {}
        self.d3: dict = {}
        self.d4: dict = {}
        self.c1: dict = {}
        self.c2: dict = {}
        self.c3: dict = {}
        self.k: dict = {}
        self.levels: set = {1}

    def copy(self) -> "ConstantSchedule":
        return copy.deepcopy(self)

    # lookups; levels above 1 are filled on demand once the level exists
    def D1(self, n, c):
        c = _num(c)
        if n == 1:
            return self.c0
        if (n, c) not in self.d1:
            self._step(n, c)
        return self.d1[(n, c)]

    def D2(self, n):
        if n == 1:
            return self.c0
        if n not in self.d2:
            self._level_constants(n)
        return self.d2[n]

    def D3(self, n):
        if n == 1:
            return self.c0
        if n not in self.d3:
            self._level_constants(n)
        return self.d3[n]

    def D4(self, n, c):
        c = _num(c)
        if n == 1:
            return self.c0
        if (n, c) not in self.d4:
            self._step(n, c)
        return self.d4[(n, c)]

    def K_of(self, N, n):
        """k(N, n) := 6N + 2 d2(n-1) + d3(n-1) + 4 d4(n-1, d2(n-1) + 11) + 35."""
        N = _num(N)
        if (N, n) not in self.k:
            m = n - 1
            d2 = self.D2(m)
            self.k[(N, n)] = 6 * N + 2 * d2 + self.D3(m) + 4 * self.D4(m, d2 + 11) + 35
        return self.k[(N, n)]

    def _level_constants(self, n):
        b = self.base
        m = n - 1
        self._require(m)
        d2 = self.D2(m)
        self.c2[n] = d2 + 100 + b.L
        self.c3[n] = (4 * b.N1 + self.D3(m) + 4 * d2 + 2 * self.D4(m, d2 + 11)
                      + 49 + 2 * b.L + b.K * (2 * b.L + 2))
        self.d2[n] = self.c2[n]
        self.d3[n] = self.c3[n]

    def _require(self, m):
        if m < 1:
            raise ScheduleError("n must be at least 2")
        if m not in self.levels:
            raise ScheduleError(f"schedule has no entries for n = {m}")

    def _step(self, n, c):
        b = self.base
        m = n - 1
        self._require(m)
        L = b.L
        T = max(b.N1, self.D4(m, c + 2 * L + 100 + 1), 2 * c + 2 * (2 * L + 100) + 1)
        self.T[(n, c)] = T
        c1 = max(self.K_of(3 * T, n), self.D1(m, T))
        self.c1[(n, T)] = c1
        self.d1[(n, c)] = c1
        self._level_constants(n)
        self.d4[(n, c)] = max(10 * T, self.D4(m, c))
        self.levels.add(n)

    def to_table(self) -> dict:
        rows = []
        for (n, c) in sorted(self.T):
            T = self.T[(n, c)]
            rows.append({
                "n": n, "c": _out(c), "T": _out(T), "d1": _out(self.d1[(n, c)]), "d2": _out(self.d2[n]),
                "d3": _out(self.d3[n]), "d4": _out(self.d4[(n, c)]), "c1": _out(self.c1[(n, T)]),
                "c2": _out(self.c2[n]), "c3": _out(self.c3[n]),
            })
        ks = [{"N": _out(N), "n": n, "k": _out(v)} for (N, n), v in sorted(self.k.items())]
        return {"base": self.base.to_json(), "c0": _out(self.c0), "steps": rows, "k": ks}


def k_of(N, n: int, sched: ConstantSchedule):
    if n < 2:
        raise DomainError("k(N, n) needs n >= 2")
    if sched.N1_check and _num(N) < sched.base.N1:
        raise DomainError(f"N = {N} is below N1 = {sched.base.N1}")
    return sched.K_of(N, n)


def schedule_step(n: int, c, sched: ConstantSchedule) -> ConstantSchedule:
    """New schedule with the level-n entries for constant c."""
    if n < 2:
        raise ScheduleError("n must be at least 2")
    if n - 1 not in sched.levels:
        raise ScheduleError(f"schedule has no entries for n = {n - 1}")
    c = _num(c)
    if c <= 0:
        raise ScheduleError("c must be positive")
    out = sched.copy()
    if (n, c) not in out.T:
        out._step(n, c)
    return out


def build_schedule(n_max: int, cs, base: BaseConstants | None = None, c0=10, Ns=()) -> ConstantSchedule:
    sched = ConstantSchedule(base, c0)
    for n in range(2, n_max + 1):
        for c in cs:
            sched = schedule_step(n, c, sched)
        for N in Ns:
            k_of(N, n, sched)
    return sched


# ---------------------------------------------------------------- empirical


@dataclass
class MorseEstimate:
    H: float
    T: float
    K: float
    L: float
    lam: float
    eps: float
    samples: int
    seed: int
    kept: int = 0

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _offset_point(model: SpaceModel, p, r: float, rng: random.Random):
    """A point at distance about r from p in a random direction."""
    if r <= 0:
        return p
    raw = r * float(model.scale)
    phi = rng.uniform(0, 2 * math.pi)
    w = math.tanh(raw / 2) * complex(math.cos(phi), math.sin(phi))
    zeta = 1j * (1 + w) / (1 - w)
    if model.kind == H2:
        a, b = p.z.real, p.z.imag
        return H2Point(complex(a + b * zeta.real, b * zeta.imag))
    theta = rng.uniform(0, 2 * math.pi)
    u = complex(math.cos(theta), math.sin(theta))
    return H3Point(p.z + p.t * zeta.real * u, p.t * zeta.imag)


def _tree_spur(model: SpaceModel, y: TreePoint, avoid: set, r: int, rng: random.Random) -> TreePoint:
    word = list(y.word)
    letters = [e for g in range(1, model.rank + 1) for e in (g, -g)]
    for step in range(r):
        choices = [e for e in letters if not (word and word[-1] == -e)]
        if step == 0:
            choices = [e for e in choices if tuple(W.mul(tuple(word), (e,))) not in avoid]
        if not choices:
            break
        word = list(W.mul(tuple(word), (rng.choice(choices),)))
    return TreePoint(tuple(word))


def _perturbed_path(model, rng, eps, pieces=8):
    unit = model.kind == TREE
    p, q = random_point(model, rng), random_point(model, rng)
    if unit:
        p, q = TreePoint(p.word), TreePoint(q.word)
    D = dist(model, p, q)
    if unit:
        verts = [geodesic_point(model, p, q, Fraction(k, int(D))) for k in range(int(D) + 1)] if D else [p]
        words = {v.word for v in verts}
        pts = []
        for v in verts:
            pts.append(v)
            r = rng.randint(0, max(0, int(eps // 2)))
            if r and model.rank > 1:
                pts += [_tree_spur(model, v, words, r, rng), v]
        return Path(model, pts)
    amp = rng.uniform(0, eps / 2)
    pts = [p] + [_offset_point(model, geodesic_point(model, p, q, k / pieces), rng.uniform(0, amp), rng)
                 for k in range(1, pieces)] + [q]
    return Path(model, pts)


def _backtrack_path(model, rng, b):
    p, q = random_point(model, rng), random_point(model, rng)
    if model.kind == TREE:
        p, q = TreePoint(p.word), TreePoint(q.word)
    D = float(dist(model, p, q))
    if D < 1e-9:
        return None
    b = min(b, D / 2)
    a = rng.uniform(0, D - b)
    if model.kind == TREE:
        s1 = geodesic_point(model, p, q, Fraction(a / D).limit_denominator(8))
        s2 = geodesic_point(model, p, q, Fraction((a + b) / D).limit_denominator(8))
    else:
        s1 = geodesic_point(model, p, q, a / D)
        s2 = geodesic_point(model, p, q, (a + b) / D)
    return Path(model, [p, s2, s1, q])


def _step_for(model, path) -> float:
    if model.kind == TREE:
        return 0.5
    return max(float(path.length) / 120, 0.02)


def _excess_by_window(params, D, lam, eps, windows):
    gap = np.abs(params[:, None] - params[None, :])
    excess = gap - lam * D - eps
    return [float(np.max(np.where(gap <= w + 1e-9, excess, -np.inf))) for w in windows]


def estimate_morse(model: SpaceModel, lam: float = 1.0, eps: float = 0.0, samples: int = 200, seed: int = 0,
                   windows=(1, 2, 4, 8, 16, 32, 64, 128, 256, 512)) -> MorseEstimate:
    """Empirical Hausdorff and local-to-global constants on sampled paths.

    H is the largest Hausdorff distance between an accepted (lam, eps)
    path and the geodesic between its endpoints; L = 2H bounds two such
    paths.  T is the smallest window in ``windows`` for which every sampled
    T-local (lam, eps) path is globally within ratio lam + eps, and K the
    largest global ratio seen among those paths.
    """
    if lam < 1 or eps < 0:
        raise ConstantsError("need lam >= 1 and eps >= 0")
    rng = random.Random(seed)
    H = 0.0
    kept = 0
    local_paths = []
    for _ in range(samples):
        path = _perturbed_path(model, rng, eps)
        step = _step_for(model, path)
        params, pts = path.sample(step)
        D = pairwise(model, pts, pts)
        gap = np.abs(params[:, None] - params[None, :])
        if float(np.max(gap - lam * D - eps)) > 1e-9:
            continue
        kept += 1
        H = max(H, hausdorff_to_geodesic(model, path, step))
        local_paths.append((params, D))
    for _ in range(samples):
        path = _backtrack_path(model, rng, rng.uniform(0, 2 * eps + 4))
        if path is None:
            continue
        params, pts = path.sample(_step_for(model, path))
        local_paths.append((params, pairwise(model, pts, pts)))
    target = lam + eps
    T = float(windows[-1])
    K = 1.0
    for w_idx, w in enumerate(windows):
        ok = True
        worst = 1.0
        for params, D in local_paths:
            if _excess_by_window(params, D, lam, eps, [w])[0] > 1e-9:
                continue
            gap = np.abs(params[:, None] - params[None, :])
            ratio = float(np.max(gap / (D + 1.0)))
            worst = max(worst, ratio)
            if ratio > target + 1e-9:
                ok = False
                break
        if ok:
            T, K = float(w), worst
            break
    if H < 1e-7:
        H = 0.0
    return MorseEstimate(H, T, K, 2 * H, lam, eps, samples, seed, kept)
