"""Top-level dichotomy: minimize, then certify freeness or exhibit a short element."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

from . import certify as C
from . import constants as K
from . import isometry as I
from . import nielsen as N
from . import words as W
from .space import H2, H3, TREE, SpaceModel, default_basepoint, point_from_json, point_to_json

FREE = "Free"
SHORT = "ShortElement"
INCONCLUSIVE = "Inconclusive"
# basepoint/minimization rounds per outer iteration
ALTERNATIONS = 20

EXIT_CODES = {FREE: 0, SHORT: 2, INCONCLUSIVE: 3}


class SpecError(ValueError):
    pass


@dataclass
class RunConfig:
    epsilon: float = 1e-6
    conj_depth: int = 2
    max_iters: int = 10_000
    outer_iters: int = 6
    lmax: int = 8
    margin: float = 0.1
    seed: int = 0
    short_bound: float | None = None
    float_mode: bool = False
    exhaustive_n4: bool = False
    sigma_words: int = 4
    probe_budget: int = 20_000
    timings: bool = False
    base: K.BaseConstants = field(default_factory=K.BaseConstants)

    _keys = {
        "epsilon": "epsilon", "conjDepth": "conj_depth", "maxIters": "max_iters", "outerIters": "outer_iters",
        "Lmax": "lmax", "margin": "margin", "seed": "seed", "shortBound": "short_bound", "float": "float_mode",
        "exhaustiveN4": "exhaustive_n4", "sigmaWords": "sigma_words", "probeBudget": "probe_budget",
        "timings": "timings",
    }

    @classmethod
    def from_json(cls, data: dict | None) -> "RunConfig":
        cfg = cls()
        for key, value in (data or {}).items():
            if key == "constantsBase":
                cfg.base = K.BaseConstants.from_json(value)
            elif key in cls._keys:
                setattr(cfg, cls._keys[key], value)
            else:
                raise SpecError(f"unknown config key {key!r}")
        if cfg.short_bound is not None and cfg.short_bound < 0:
            raise SpecError("shortBound must be nonnegative")
        return cfg

    def to_json(self) -> dict:
        out = {k: getattr(self, v) for k, v in self._keys.items()}
        out["constantsBase"] = self.base.to_json()
        return out

    def nielsen(self) -> N.NielsenConfig:
        return N.NielsenConfig(epsilon=self.epsilon, conj_depth=self.conj_depth, max_iters=self.max_iters,
                               exhaustive_n4=self.exhaustive_n4)


@dataclass
class InputSpec:
    model: SpaceModel
    generators: list
    basepoint: object = None
    config: RunConfig = field(default_factory=RunConfig)
    raw: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.generators)


def _has_float(rows) -> bool:
    flat = [v for row in rows for v in row]
    return any(isinstance(v, float) and not float(v).is_integer() for v in flat)


def parse_spec(data: dict) -> InputSpec:
    """Validate and parse a JSON-style spec dictionary."""
    if not isinstance(data, dict):
        raise SpecError("spec must be a JSON object")
    try:
        model = SpaceModel.from_json(data["model"])
    except KeyError as e:
        raise SpecError(f"missing field {e}") from None
    except (TypeError, ValueError) as e:
        raise SpecError(f"invalid model: {e}") from None
    if model.kind != TREE and not model.delta > 0:
        raise SpecError("declared delta must be positive for hyperbolic models")
    cfg = RunConfig.from_json(data.get("config"))
    gens_in = data.get("generators")
    if not gens_in:
        raise SpecError("at least one generator is required")
    gens = []
    for k, g in enumerate(gens_in):
        try:
            if model.kind == TREE:
                w = W.parse(g) if isinstance(g, str) else tuple(g)
                if w and W.max_letter(w) > model.rank:
                    raise SpecError(f"generator {k + 1} uses letters beyond rank {model.rank}")
                gens.append(I.tree_word(w))
            else:
                field, mode = "real", ("float" if cfg.float_mode else None)
                if isinstance(g, dict):
                    field = g.get("field", "real")
                    mode = g.get("mode", mode)
                    g = g["entries"]
                if _has_float(g) and mode != "float":
                    raise SpecError("non-rational entries need config.float = true")
                mat = I.matrix(g, field, mode)
                iso = I.Isometry(H3 if mat.field == "complex" else H2, mat)
                if (iso.kind == H3) != (model.kind == H3):
                    raise SpecError(f"generator {k + 1} does not act on {model.kind}")
                gens.append(iso)
        except SpecError:
            raise
        except (ValueError, TypeError, KeyError, ZeroDivisionError) as e:
            raise SpecError(f"generator {k + 1}: {e}") from None
    x = None
    if data.get("basepoint") is not None:
        try:
            x = point_from_json(model, data["basepoint"])
        except (KeyError, ValueError) as e:
            raise SpecError(f"invalid basepoint: {e}") from None
    return InputSpec(model, gens, x, cfg, data)


def load_spec(path) -> InputSpec:
    with open(path) as fh:
        return parse_spec(json.load(fh))


# ---------------------------------------------------------------- reports


def _num(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else str(v)
    return v


@dataclass
class Units:
    """Conversion from the working (normalized) metric back to the input metric."""

    factor: object

    @classmethod
    def for_model(cls, model: SpaceModel) -> "Units":
        if model.kind == TREE:
            return cls(1 / model.scale)
        return cls(model.delta)

    def __call__(self, v):
        if isinstance(v, Fraction) or isinstance(self.factor, Fraction) and isinstance(v, int):
            return _num(Fraction(v) * self.factor)
        return float(v) * float(self.factor)


def element_report(model: SpaceModel, g: I.Isometry, x, units: Units) -> dict:
    cls = I.translation_length(g, model)
    out = {
        "element": g.concrete_json(),
        "word": W.unparse(g.provenance),
        "class": cls.kind,
        "displacement": units(I.displacement(model, g, x)),
        "translation_length": units(cls.length),
        "attained": cls.attained,
    }
    if g.kind != TREE:
        tr = g.concrete.trace()
        if isinstance(tr, I.GaussQ):
            out["trace"] = [_num(tr.re), _num(tr.im)]
        elif isinstance(tr, complex):
            out["trace"] = [tr.real, tr.imag]
        else:
            out["trace"] = _num(tr)
    return out


def tuple_report(M: N.GenTuple, units: Units) -> list:
    return [element_report(M.model, g, M.basepoint, units) for g in M.elements]


@dataclass
class Dichotomy:
    outcome: str
    tuple: N.GenTuple
    chain: N.MoveChain
    basepoint: object
    units: Units
    constants: dict
    diagnostics: dict
    witness: dict | None = None
    certificate: dict | None = None
    timings: dict | None = None

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.outcome]

    def to_json(self) -> dict:
        out = {
            "outcome": self.outcome,
            "tuple": tuple_report(self.tuple, self.units),
            "chain": self.chain.to_json(),
            "basepoint": point_to_json(self.basepoint),
            "constants": self.constants,
            "diagnostics": self.diagnostics,
            "timings": self.timings,
        }
        if self.witness is not None:
            out["witness"] = self.witness
        if self.certificate is not None:
            out["certificate"] = self.certificate
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, Fraction):
        return _num(o)
    if isinstance(o, tuple):
        return list(o)
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# ---------------------------------------------------------------- the loop

FLOAT_SHORT_TOL = 1e-9


def _short_bound(cfg: RunConfig) -> float:
    return 0.0 if cfg.short_bound is None else float(cfg.short_bound)


def _tl(M: N.GenTuple, g: I.Isometry) -> float:
    return float(I.translation_length(g, M.model).length)


def _short_index(M: N.GenTuple, bound: float) -> int | None:
    """1-based index of the shortest entry when it is within the bound."""
    tol = 0.0 if N.is_exact(M) else FLOAT_SHORT_TOL
    best = None
    for k, g in enumerate(M.elements):
        t = 0.0 if g.is_identity() else _tl(M, g)
        if t <= bound + tol and (best is None or t < best[0]):
            best = (t, k + 1)
    return best[1] if best else None


def _neighbor_probe(M: N.GenTuple, bound: float) -> N.Move | None:
    """An N2 move producing an entry of translation length within the bound."""
    tol = 0.0 if N.is_exact(M) else FLOAT_SHORT_TOL
    for i in range(1, M.n + 1):
        for j in range(1, M.n + 1):
            if i == j:
                continue
            for eps in (1, -1):
                for side in ("right", "left"):
                    m = N.N2(i, j, eps, side)
                    g = N.apply_move(M, m).elements[i - 1]
                    if g.is_identity() or _tl(M, g) <= bound + tol:
                        return m
    return None


def _context(M: N.GenTuple, cfg: RunConfig) -> C.CertifyContext:
    return C.CertifyContext(M.model, M.basepoint, M, margin=cfg.margin, lmax=cfg.lmax, seed=cfg.seed,
                            probe_budget=cfg.probe_budget,
                            L=cfg.base.L if M.model.kind != TREE else 0)


def _sigma_words(M: N.GenTuple, n_index: int, count: int) -> list:
    out = []
    for w in W.enumerate_reduced(M.n, 3, min_length=1):
        if any(abs(e) == n_index for e in w):
            out.append(w)
        if len(out) >= count:
            break
    return out


def _predicates(M: N.GenTuple, cfg: RunConfig) -> dict:
    ctx = _context(M, cfg)
    out = {"context": ctx.to_json(), "words": {}}
    for w in _sigma_words(M, ctx.n_index, cfg.sigma_words):
        try:
            sigma = C.build_sigma(w, ctx.N, ctx)
            out["words"][W.unparse(w)] = C.position_predicates(sigma, ctx).to_json()
        except C.CertifyError as e:
            out["words"][W.unparse(w)] = {"pass": False, "error": str(e)}
    return out


def _constants(spec: InputSpec, model: SpaceModel, cfg: RunConfig) -> dict:
    out = {"declared_delta": _num(spec.model.delta), "scale": _num(spec.model.scale),
           "working_model": model.to_json(), "length_factor": _num(Units.for_model(spec.model).factor),
           "short_bound": _short_bound(cfg), "base": cfg.base.to_json(), "margin": cfg.margin, "Lmax": cfg.lmax}
    if spec.n >= 2:
        sched = K.build_schedule(spec.n - 1, [1], cfg.base)
        out["reference_k"] = _num(K.k_of(cfg.base.N1, spec.n, sched))
    return out


def reduce(spec: InputSpec, short_bound: float | None = None) -> Dichotomy:
    """Alternate basepoint optimization and minimization, then certify or exhibit a short entry."""
    cfg = spec.config
    if short_bound is not None:
        cfg = RunConfig(**{**cfg.__dict__, "short_bound": short_bound})
    bound = _short_bound(cfg)
    model = spec.model.normalized()
    units = Units.for_model(spec.model)
    ncfg = cfg.nielsen()
    x0 = spec.basepoint if spec.basepoint is not None else default_basepoint(model)
    M0 = N.GenTuple(model, N.with_provenance(spec.generators), x0)
    clock = {"basepoint": 0.0, "minimize": 0.0, "certify": 0.0}
    M, moves, history = M0, [], []
    report = None
    outcome = INCONCLUSIVE
    for it in range(cfg.outer_iters):
        # basepoint and moves alternate until neither changes
        rounds = []
        for _ in range(ALTERNATIONS):
            t0 = time.perf_counter()
            M = M.at(N.optimize_basepoint(M, ncfg))
            t1 = time.perf_counter()
            M, chain = N.greedy_minimize(M, ncfg)
            t2 = time.perf_counter()
            clock["basepoint"] += t1 - t0
            clock["minimize"] += t2 - t1
            rounds += chain.moves
            # no moves means the basepoint just chosen is still optimal
            if not chain.moves or any(g.is_identity() for g in M.elements):
                break
        chain = N.MoveChain(tuple(rounds))
        moves += chain.moves
        history.append({"iteration": it + 1, "moves": len(chain), "norm": float(M.norm)})
        if any(g.is_identity() for g in M.elements):
            outcome = SHORT
            break
        report = C.pingpong_analysis(M, _context(M, cfg))
        clock["certify"] += time.perf_counter() - t2
        if report.certified:
            outcome = FREE
            break
        if _short_index(M, bound) is not None:
            outcome = SHORT
            break
        probe = _neighbor_probe(M, bound)
        if probe is not None:
            M = N.apply_move(M, probe)
            moves.append(probe)
            history[-1]["probe"] = probe.to_json()
            outcome = SHORT
            break
        if not chain.moves and it > 0:
            break
    return _finish(spec, cfg, M0, M, moves, outcome, report, history, units, clock, bound)


def _finish(spec, cfg, M0, M, moves, outcome, report, history, units, clock, bound) -> Dichotomy:
    witness = certificate = None
    diagnostics: dict = {"history": history, "pingpong": report.to_json() if report else None}
    if outcome == SHORT:
        k = _short_index(M, bound)
        if k is not None and k != 1:
            m = N.N3(1, k)
            M = N.apply_move(M, m)
            moves.append(m)
        g = M.elements[0]
        witness = {"index": 1, **element_report(M.model, g, M.basepoint, units), "bound": bound,
                   "achieved": units(0 if g.is_identity() else I.translation_length(g, M.model).length)}
        if not I.translation_length(g, M.model).attained:
            witness["note"] = "the infimum is not attained (parabolic); the basepoint displacement is larger"
    elif outcome == FREE:
        certificate = C.pingpong_certificate(M, _context(M, cfg), report).to_json()
    else:
        diagnostics["predicates"] = _predicates(M, cfg)
        if report is not None and report.probe is None:
            diagnostics["qi_probe"] = C.qi_probe(M, cfg.lmax, _context(M, cfg)).to_json()
    chain = N.make_chain(moves, M0, M)
    return Dichotomy(outcome, M, chain, M.basepoint, units, _constants(spec, M.model, cfg), diagnostics,
                     witness, certificate, clock if cfg.timings else None)


def epsilon_shorten(spec: InputSpec, eps: float) -> Dichotomy:
    """Run the dichotomy with the short bound set to eps (a working-metric length)."""
    if not eps > 0:
        raise SpecError("eps must be positive")
    if spec.model.kind != TREE and float(eps) < FLOAT_SHORT_TOL:
        raise SpecError("eps below the numeric tolerance is unsupported for hyperbolic models")
    return reduce(spec, short_bound=float(eps))


def certify_only(spec: InputSpec) -> dict:
    """Certificate attempt on the tuple as given (no minimization)."""
    model = spec.model.normalized()
    x = spec.basepoint if spec.basepoint is not None else default_basepoint(model)
    M = N.GenTuple(model, N.with_provenance(spec.generators), x)
    rep = C.pingpong_analysis(M, _context(M, spec.config))
    return {"certified": rep.certified, "report": rep.to_json()}


def result_from_report(data: dict) -> Dichotomy:
    """Rebuild enough of a Dichotomy from its JSON report to render or replay it."""
    try:
        model = SpaceModel.from_json(data["constants"]["working_model"])
        elems = []
        for entry in data["tuple"]:
            prov = W.parse(entry.get("word", ""))
            if model.kind == TREE:
                elems.append(I.tree_word(entry["element"]["word"], prov))
            else:
                elems.append(I.Isometry(model.kind, I.Mat2.from_json(entry["element"]), prov))
        x = point_from_json(model, data["basepoint"])
    except (KeyError, TypeError, ValueError) as e:
        raise SpecError(f"not a report: {e}") from None
    M = N.GenTuple(model, elems, x)
    chain = N.MoveChain.from_json(data.get("chain", {"moves": []}))
    return Dichotomy(data["outcome"], M, chain, x, Units(1), data.get("constants", {}),
                     data.get("diagnostics", {}), data.get("witness"), data.get("certificate"), data.get("timings"))
