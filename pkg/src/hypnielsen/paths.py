"""Piecewise geodesic paths: sampling and windowed quasigeodesic checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import words as W
from .space import H2, H3, SpaceModel, dist, sample_segment

CHECK_TOL = 1e-9


@dataclass
class Path:
    """Concatenation of geodesics through ``points``."""

    model: SpaceModel
    points: list

    @property
    def lengths(self) -> list:
        return [dist(self.model, a, b) for a, b in zip(self.points, self.points[1:])]

    @property
    def length(self):
        return sum(self.lengths, 0)

    def segments(self) -> list:
        return list(zip(self.points, self.points[1:]))

    def sample(self, step: float):
        """Arclength parameters and points, spacing at most ``step``."""
        params = [0.0]
        pts = [self.points[0]]
        s = 0.0
        for a, b in self.segments():
            d = float(dist(self.model, a, b))
            seg = sample_segment(self.model, a, b, step)
            k = len(seg) - 1
            for j in range(1, k + 1):
                params.append(s + d * j / k)
                pts.append(seg[j])
            s += d
        return np.array(params), pts


def _coords(model: SpaceModel, pts):
    if model.kind == H2:
        z = np.array([p.z for p in pts], dtype=complex)
        return z, None
    if model.kind == H3:
        return np.array([p.z for p in pts], dtype=complex), np.array([p.t for p in pts])
    return pts, None


def pairwise(model: SpaceModel, A: list, B: list) -> np.ndarray:
    """Distance matrix between two point lists."""
    if model.kind == H2:
        za, zb = _coords(model, A)[0], _coords(model, B)[0]
        num = np.abs(za[:, None] - zb[None, :])
        den = 2.0 * np.sqrt(za.imag[:, None] * zb.imag[None, :])
        return 2.0 * np.arcsinh(num / den) / float(model.scale)
    if model.kind == H3:
        za, ta = _coords(model, A)
        zb, tb = _coords(model, B)
        num = np.sqrt(np.abs(za[:, None] - zb[None, :]) ** 2 + (ta[:, None] - tb[None, :]) ** 2)
        return 2.0 * np.arcsinh(num / (2.0 * np.sqrt(ta[:, None] * tb[None, :]))) / float(model.scale)
    out = np.empty((len(A), len(B)))
    da = [float(p.depth) for p in A]
    db = [float(q.depth) for q in B]
    for r, p in enumerate(A):
        for c, q in enumerate(B):
            l = W.common_prefix_length(p.word, q.word)
            out[r, c] = da[r] + db[c] - 2 * min(da[r], db[c], l)
    return out / float(model.scale)


@dataclass
class QGReport:
    passed: bool
    worst_excess: float
    worst_ratio: float
    worst_window: tuple = (0.0, 0.0)
    samples: int = 0
    window: float = 0.0

    def to_json(self) -> dict:
        return {
            "pass": self.passed,
            "worst_excess": self.worst_excess,
            "worst_ratio": self.worst_ratio,
            "worst_window": list(self.worst_window),
            "samples": self.samples,
            "window": self.window,
        }


def qg_check(model: SpaceModel, params: np.ndarray, pts: list, T: float, lam: float, eps: float,
             block: int = 512) -> QGReport:
    """Check |b - a| <= lam d(a, b) + eps for sampled pairs with |b - a| <= T."""
    n = len(pts)
    worst = (-math.inf, 0.0, (0.0, 0.0))
    T = float(T)
    for r0 in range(0, n, block):
        r1 = min(n, r0 + block)
        c0 = int(np.searchsorted(params, params[r0] - T - CHECK_TOL, "left"))
        c1 = int(np.searchsorted(params, params[r1 - 1] + T + CHECK_TOL, "right"))
        D = pairwise(model, pts[r0:r1], pts[c0:c1])
        gap = np.abs(params[r0:r1, None] - params[None, c0:c1])
        inside = gap <= T + CHECK_TOL
        excess = np.where(inside, gap - lam * D - eps, -np.inf)
        k = int(np.argmax(excess))
        r, c = divmod(k, excess.shape[1])
        if excess[r, c] > worst[0]:
            bound = lam * D[r, c] + eps
            ratio = gap[r, c] / bound if bound > 0 else (math.inf if gap[r, c] > 0 else 0.0)
            worst = (float(excess[r, c]), float(ratio), (float(params[r0 + r]), float(params[c0 + c])))
    excess, ratio, window = worst
    if excess == -math.inf:
        excess, ratio = 0.0, 0.0
    return QGReport(excess <= CHECK_TOL, excess, ratio, tuple(sorted(window)), n, T)


def global_ratio(model: SpaceModel, params: np.ndarray, pts: list) -> float:
    """Smallest K with |b - a| <= K d + K over all sampled pairs."""
    D = pairwise(model, pts, pts)
    gap = np.abs(params[:, None] - params[None, :])
    return float(np.max(gap / (D + 1.0)))


def hausdorff(model: SpaceModel, A: list, B: list) -> float:
    D = pairwise(model, A, B)
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def hausdorff_to_geodesic(model: SpaceModel, path: Path, step: float) -> float:
    """Hausdorff distance between ``path`` and the geodesic joining its ends."""
    from .space import dist_to_segment_many

    a, b = path.points[0], path.points[-1]
    _, pts = path.sample(step)
    if not path.segments():
        return 0.0
    one = float(np.max(dist_to_segment_many(model, pts, a, b)))
    geo = sample_segment(model, a, b, step)
    best = np.full(len(geo), np.inf)
    for p, q in path.segments():
        best = np.minimum(best, dist_to_segment_many(model, geo, p, q))
    return max(one, float(best.max()))
