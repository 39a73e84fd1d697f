"""SVG figures: Poincare disk pictures for H2 and a radial layout for trees."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

from . import certify as C
from . import isometry as I
from . import nielsen as N
from . import words as W
from .space import H2, TREE, sample_segment

SIZE = 640
PAD = 20
R_DISK = (SIZE - 2 * PAD) / 2


class RenderError(ValueError):
    pass


def _disk(z: complex) -> tuple[float, float]:
    w = (z - 1j) / (z + 1j)
    return SIZE / 2 + R_DISK * w.real, SIZE / 2 - R_DISK * w.imag


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _polyline(pts, stroke, width=1.0, dash=None) -> str:
    coords = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline points="{coords}" fill="none" stroke="{stroke}" stroke-width="{width}"{extra}/>'


def _dot(p, r, fill, title=None) -> str:
    t = f"<title>{escape(title)}</title>" if title else ""
    return f'<circle cx="{_fmt(p[0])}" cy="{_fmt(p[1])}" r="{r}" fill="{fill}">{t}</circle>'


def _text(p, s, size=12, fill="#222") -> str:
    return f'<text x="{_fmt(p[0])}" y="{_fmt(p[1])}" font-size="{size}" fill="{fill}" font-family="sans-serif">{escape(s)}</text>'


def _svg(body: list, title: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
            f'viewBox="0 0 {SIZE} {SIZE}">')
    return "\n".join([head, f"<title>{escape(title)}</title>", *body, "</svg>", ""])


def _orbit(M: N.GenTuple, depth: int) -> list:
    """(word, point) for reduced words of length <= depth, breadth first."""
    gens = {}
    for k, g in enumerate(M.elements, start=1):
        gens[k], gens[-k] = g, I.invert(g)
    out = [((), M.basepoint)]
    frontier = [((), I.identity_like(M.elements[0]))]
    for _ in range(depth):
        nxt = []
        for w, g in frontier:
            for e in sorted(gens, key=W.letter_key):
                if w and w[-1] == -e:
                    continue
                h = I.compose(g, gens[e])
                nxt.append((w + (e,), h))
                out.append((w + (e,), I.apply(h, M.basepoint)))
        frontier = nxt
    return out


def _axis_curve(g: I.Isometry) -> list | None:
    if I.classify(g) != I.HYPERBOLIC:
        return None
    m = g.concrete.as_float()
    a, b, c, d = (complex(v).real for v in (m.a, m.b, m.c, m.d))
    if abs(c) < 1e-14:
        # one fixed point at infinity, the other at b / (d - a)
        x0 = b / (d - a)
        return [_disk(complex(x0, math.exp(s / 8))) for s in range(-120, 121)]
    disc = math.sqrt(max(0.0, (a + d) ** 2 - 4))
    p, q = (a - d - disc) / (2 * c), (a - d + disc) / (2 * c)
    cen, rad = (p + q) / 2, abs(q - p) / 2
    return [_disk(cen + rad * complex(math.cos(t), math.sin(t))) for t in (math.pi * k / 240 for k in range(1, 240))]


def _segment_curve(M, p, q) -> list:
    return [_disk(z.z) for z in sample_segment(M.model, p, q, 0.05)]


def render_h2(M: N.GenTuple, outcome: str, depth: int = 3, sigma=None, highlight=None) -> str:
    body = [f'<circle cx="{SIZE / 2}" cy="{SIZE / 2}" r="{R_DISK}" fill="#fbfbf8" stroke="#444"/>']
    palette = ["#c0392b", "#2471a3", "#239b56", "#b9770e", "#7d3c98"]
    for k, g in enumerate(M.elements):
        curve = _axis_curve(g)
        if curve:
            body.append(_polyline(curve, palette[k % len(palette)], 1.2, "4 3"))
    orbit = _orbit(M, depth)
    for w, p in orbit:
        if len(w) == 1:
            body.append(_polyline(_segment_curve(M, M.basepoint, p), "#999", 0.6))
    if highlight is not None:
        body.append(_polyline(_segment_curve(M, M.basepoint, I.apply(highlight, M.basepoint)), "#e67e22", 2.0))
    for w, p in orbit:
        r = 3.5 if not w else max(0.8, 2.5 - 0.5 * len(w))
        body.append(_dot(_disk(p.z), r, "#111" if not w else "#555", W.unparse(w) or "x"))
    if sigma is not None:
        pts = [q for a, b in zip(sigma.points, sigma.points[1:]) for q in sample_segment(M.model, a, b, 0.05)]
        body.append(_polyline([_disk(q.z) for q in pts], "#8e44ad", 1.8))
        for label, q in zip(sigma.labels, sigma.points):
            body.append(_dot(_disk(q.z), 2.2, "#8e44ad", label))
    body.append(_text((PAD, PAD + 4), f"{outcome}  n={M.n}  depth={depth}"))
    return _svg(body, f"H2 orbit picture ({outcome})")


def _tree_layout(rank: int, radius: int) -> dict:
    """Radial positions of the vertices of the Cayley tree ball."""
    letters = sorted([e for k in range(1, rank + 1) for e in (k, -k)], key=W.letter_key)
    pos = {(): (SIZE / 2, SIZE / 2)}
    R = R_DISK / max(1, radius)

    def place(word, lo, hi):
        if len(word) == radius:
            return
        kids = [e for e in letters if not (word and word[-1] == -e)]
        span = (hi - lo) / len(kids)
        for k, e in enumerate(kids):
            a0 = lo + k * span
            ang = a0 + span / 2
            child = word + (e,)
            rr = R * len(child)
            pos[child] = (SIZE / 2 + rr * math.cos(ang), SIZE / 2 + rr * math.sin(ang))
            place(child, a0, a0 + span)

    place((), 0.0, 2 * math.pi)
    return pos


def render_tree(M: N.GenTuple, outcome: str, depth: int = 2, highlight=None) -> str:
    rank = M.model.rank
    radius = 1
    while radius < 8 and 2 * rank * (2 * rank - 1) ** radius <= 4000:
        radius += 1
    pos = _tree_layout(rank, radius)
    body = []
    for w, p in sorted(pos.items(), key=lambda t: (len(t[0]), W.word_key(t[0]))):
        if w:
            body.append(_polyline([pos[w[:-1]], p], "#bbb", 0.5))
    hl = set()
    if highlight is not None:
        path = M.basepoint.word
        target = I.apply(highlight, M.basepoint).word
        for k in range(len(path) + 1):
            hl.add(path[:k])
        for k in range(len(target) + 1):
            hl.add(target[:k])
    for w in sorted(hl, key=lambda t: (len(t), W.word_key(t))):
        if w and w in pos and w[:-1] in pos:
            body.append(_polyline([pos[w[:-1]], pos[w]], "#e67e22", 2.0))
    for w, p in _orbit(M, depth):
        v = p.word
        if v in pos:
            body.append(_dot(pos[v], 3.0 if w else 4.0, "#c0392b" if w else "#111", W.unparse(w) or "x"))
    body.append(_text((PAD, PAD + 4), f"{outcome}  rank={rank}  n={M.n}"))
    return _svg(body, f"tree orbit picture ({outcome})")


def render(result, out_path=None, depth: int | None = None) -> str:
    """SVG for a Dichotomy; written to out_path when given."""
    M, outcome = result.tuple, result.outcome
    highlight = M.elements[0] if outcome == "ShortElement" and not M.elements[0].is_identity() else None
    if M.model.kind == H2:
        sigma = None
        if outcome == "Free":
            try:
                ctx = C.CertifyContext(M.model, M.basepoint, M)
                if ctx.N:
                    sigma = C.build_sigma((ctx.n_index,), ctx.N, ctx)
            except C.CertifyError:
                sigma = None
        svg = render_h2(M, outcome, depth or 3, sigma, highlight)
    elif M.model.kind == TREE:
        svg = render_tree(M, outcome, depth or 2, highlight)
    else:
        raise RenderError("rendering supports H2 and tree models only")
    if out_path is not None:
        with open(out_path, "w") as fh:
            fh.write(svg)
    return svg
