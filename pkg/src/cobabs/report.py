"""Pipeline driver and the JSON report format.

Rationals are written as strings (``"1/2"``), unbounded interval ends as
``null``; keys are sorted so identical runs give identical bytes outside the
``timings`` section.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import __version__
from .abstraction import (
    AbstractSystem,
    AbstractTransition,
    CobMap,
    Obligation,
    build,
    certificate_ok,
    check_commutation,
)
from .closure import ClosureConfig, FixpointResult, SubspaceBasis, closure_certificate, fixpoint
from .exactalg import Matrix
from .model import InitSet, Interval, SystemModel, render, with_time
from .parser import parse, parse_polynomial, read_pragmas
from .poly import Polynomial, VarTable, render_rational

REPORT_FORMAT = 1


def rat(x: Optional[Fraction]) -> Optional[str]:
    return None if x is None else render_rational(Fraction(x))


def unrat(s: Optional[str]) -> Optional[Fraction]:
    return None if s is None else Fraction(s)


@dataclass
class Analysis:
    source: str
    model: SystemModel  # the analysed model (time already adjoined if requested)
    config: Dict[str, object]
    spaces: Dict[str, SubspaceBasis]
    fix: Optional[FixpointResult]
    alpha: CobMap
    abs_sys: AbstractSystem
    closure_failures: List[str]
    obligations: List[Obligation]
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def trivial(self) -> bool:
        return all(s.dim == 0 for s in self.spaces.values())

    @property
    def certified(self) -> bool:
        return not self.closure_failures and certificate_ok(self.obligations)


def analyze(
    source: str,
    degree_out: int = 1,
    degree_init: int = 2,
    with_t: bool = False,
    basis: Optional[Sequence[str]] = None,
    max_products: int = 200_000,
) -> Analysis:
    """Parse, close, build and certify.

    ``basis`` fixes the components (same at every location) instead of
    running the fixpoint; the closure certificate then decides whether the
    given span is admissible.
    """
    timings = {}
    t0 = time.perf_counter()
    model = parse(source)
    if with_t:
        model = with_time(model)
    cfg = ClosureConfig(degree_out, degree_init, max_products)
    fix = None
    if basis:
        polys = [parse_polynomial(b, model.vars) for b in basis]
        sp = SubspaceBasis(model.vars, polys)
        spaces = {l: sp for l in model.locations}
    else:
        fix = fixpoint(model, cfg)
        spaces = fix.spaces
    t1 = time.perf_counter()
    timings["closure"] = t1 - t0
    failures = [
        f"{o.location}/{o.source}: {o.element.render()} -> {o.residual.render()}"
        for o in closure_certificate(model, spaces, degree_out, max_products)
        if not o.residual.is_zero()
    ]
    if failures:
        from .abstraction import NotClosed

        raise NotClosed("space is not closed: " + "; ".join(failures[:3]))
    alpha, abs_sys = build(model, spaces, degree_out, max_products)
    obligations = check_commutation(model, alpha, abs_sys)
    timings["build"] = time.perf_counter() - t1
    config = {
        "degree_out": degree_out,
        "degree_init": degree_init,
        "with_time": with_t,
        "max_products": max_products,
        "basis": list(basis) if basis else None,
    }
    return Analysis(source, model, config, spaces, fix, alpha, abs_sys, failures, obligations, timings)


# -- serialization -------------------------------------------------------------------

def _interval(iv: Interval) -> List[Optional[str]]:
    return [rat(iv.low), rat(iv.high)]


def abstract_to_json(alpha: CobMap, a: AbstractSystem) -> dict:
    out = {
        "vars": list(a.vars.names),
        "degree": a.degree,
        "alpha": {loc: [p.render() for p in comps] for loc, comps in alpha.maps},
        "dynamics": {loc: [p.render() for p in dyn] for loc, dyn in a.dynamics},
        "transitions": [
            {
                "name": t.name,
                "source": t.source,
                "target": t.target,
                "guard": t.guard.render(),
                "update": [p.render() for p in t.update],
            }
            for t in a.transitions
        ],
        "init": {n: _interval(iv) for n, iv in a.init.box},
        "init_location": a.init_location,
        "kind": a.kind,
        "locations": list(a.locations),
    }
    if a.degree == 1:
        affine = {}
        for loc, _ in a.dynamics:
            m, b = a.affine(loc)
            affine[loc] = {"A": [[rat(x) for x in row] for row in m.rows()], "b": [rat(x) for x in b]}
        out["affine"] = affine
        out["transition_affine"] = {}
        for t in a.transitions:
            m, c = a.transition_affine(t)
            out["transition_affine"][t.name] = {"M": [[rat(x) for x in row] for row in m.rows()], "c": [rat(x) for x in c]}
    return out


def to_json(an: Analysis) -> dict:
    spaces = {}
    for loc, sp in an.spaces.items():
        entry = {"dim": sp.dim, "basis": [p.render() for p in sp.elements]}
        if an.model.params:
            entry["dim_without_parameter_only"] = sp.without_parameter_only(an.model.params).dim
        spaces[loc] = entry
    closure = {"spaces": spaces, "certificate": {"ok": not an.closure_failures, "failures": an.closure_failures}}
    if an.fix is not None:
        closure["sweeps"] = an.fix.sweeps
        closure["changing_sweeps"] = an.fix.changing_sweeps
        closure["history"] = an.fix.history
    bad = [o for o in an.obligations if not o.ok]
    return {
        "format": REPORT_FORMAT,
        "tool": {"name": "cob", "version": __version__},
        "input": {"digest": hashlib.sha256(an.source.encode()).hexdigest(), "source": an.source},
        "model": render(an.model),
        "config": an.config,
        "trivial": an.trivial,
        "closure": closure,
        "abstraction": abstract_to_json(an.alpha, an.abs_sys),
        "commutation": {
            "ok": not bad,
            "obligations": len(an.obligations),
            "nonzero": [{"kind": o.kind, "where": o.where, "index": o.index, "residual": o.residual.render()} for o in bad],
        },
        "timings": {k: round(v, 6) for k, v in an.timings.items()},
    }


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def without_timings(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timings"}


def _matrix(rows) -> Matrix:
    n = len(rows)
    ncols = len(rows[0]) if rows else 0
    return Matrix.from_rows([[Fraction(x) for x in r] for r in rows], ncols) if n else Matrix(0, 0)


def load_abstraction(report: dict):
    """Rebuild (model, alpha, abstract system) from a report.

    For affine abstractions the matrices are authoritative, so a tampered
    ``A`` changes the reloaded dynamics.
    """
    model = parse(report["model"])
    ab = report["abstraction"]
    wvars = VarTable(ab["vars"])
    alpha = CobMap(
        model.vars,
        tuple((loc, tuple(parse_polynomial(s, model.vars) for s in comps)) for loc, comps in ab["alpha"].items()),
    )
    # keep model location order
    alpha = CobMap(model.vars, tuple((l, alpha.at(l)) for l in model.locations))

    def affine_polys(rows, consts) -> tuple:
        out = []
        for row, c in zip(rows, consts):
            terms = {}
            for j, x in enumerate(row):
                if Fraction(x):
                    terms[tuple(1 if k == j else 0 for k in range(len(wvars)))] = Fraction(x)
            if Fraction(c):
                terms[(0,) * len(wvars)] = Fraction(c)
            out.append(Polynomial(wvars, terms))
        return tuple(out)

    dynamics = []
    for loc, dyn in ab["dynamics"].items():
        if "affine" in ab and loc in ab["affine"]:
            dynamics.append((loc, affine_polys(ab["affine"][loc]["A"], ab["affine"][loc]["b"])))
        else:
            dynamics.append((loc, tuple(parse_polynomial(s, wvars) for s in dyn)))
    by_name = {t.name: t for t in model.transitions}
    transitions = []
    for t in ab["transitions"]:
        ta = ab.get("transition_affine", {}).get(t["name"])
        upd = affine_polys(ta["M"], ta["c"]) if ta else tuple(parse_polynomial(s, wvars) for s in t["update"])
        transitions.append(AbstractTransition(t["name"], t["source"], t["target"], by_name[t["name"]].guard, upd))
    init = InitSet(tuple((n, Interval(unrat(lo), unrat(hi))) for n, (lo, hi) in ab["init"].items()))
    abs_sys = AbstractSystem(
        ab["kind"],
        wvars,
        tuple(ab["locations"]),
        ab["init_location"],
        tuple(dynamics),
        tuple(transitions),
        init,
        ab["degree"],
    )
    return model, alpha, abs_sys


# -- corpus ------------------------------------------------------------------------------

@dataclass
class CorpusRow:
    ident: str
    nvars: int
    degree: int
    b0: int
    seconds: float
    basis: Optional[int]
    reference: Optional[int]
    status: str = "ok"
    dims: Dict[str, int] = field(default_factory=dict)

    @property
    def match(self) -> str:
        if self.reference is None or self.basis is None:
            return "-"
        return "yes" if self.reference == self.basis else "NO"


def model_degree(model: SystemModel) -> int:
    polys = [p for loc in model.locations if model.field_at(loc) is not None for p in model.field_at(loc)]
    polys += [p for t in model.transitions for p in t.update]
    return max((p.degree() for p in polys), default=0)


def corpus_files(directory: Path) -> List[Path]:
    return sorted(p for p in Path(directory).glob("*.cob") if p.is_file())


def run_corpus_file(path: Path) -> CorpusRow:
    text = path.read_text(encoding="utf-8")
    prag = read_pragmas(text)
    k = int(prag.get("degree-init", 2))
    d = int(prag.get("degree-out", 1))
    model = parse(text)
    if prag.get("with-time") == "yes":
        model = with_time(model)
    reference = int(prag["ref-basis"]) if "ref-basis" in prag else None
    t0 = time.perf_counter()
    try:
        fix = fixpoint(model, ClosureConfig(d, k))
    except Exception as exc:  # reported in the table, never fatal
        return CorpusRow(path.stem, len(model.vars), model_degree(model), k, time.perf_counter() - t0, None, reference, f"error: {exc}")
    secs = time.perf_counter() - t0
    spaces = fix.spaces
    if prag.get("drop-parameter-only") == "yes":
        spaces = {l: s.without_parameter_only(model.params) for l, s in spaces.items()}
    dims = {l: s.dim for l, s in spaces.items()}
    at = prag.get("count-at")
    count = dims[at] if at else max(dims.values(), default=0)
    return CorpusRow(path.stem, len(model.vars), model_degree(model), k, secs, count, reference, "ok", dims)


def format_table(rows: Sequence[CorpusRow]) -> str:
    head = ["ID", "#V", "Deg", "#B0", "Time", "#B*", "Ref", "Match"]
    body = [
        [
            r.ident,
            str(r.nvars),
            str(r.degree),
            str(r.b0),
            f"{r.seconds:.2f}",
            "-" if r.basis is None else str(r.basis),
            "-" if r.reference is None else str(r.reference),
            r.match if r.status == "ok" else r.status,
        ]
        for r in rows
    ]
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(head)]
    line = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    out = [line(head), line(["-" * w for w in widths])]
    out += [line(b) for b in body]
    return "\n".join(out) + "\n"


# -- invariant and validation sections ----------------------------------------------------

def invariants_section(model: SystemModel, alpha: CobMap, abs_sys: AbstractSystem) -> dict:
    """Affine equalities (all kinds) plus scale functions for continuous models."""
    from .invariants import equalities, karr, scale_certificate, scale_functions

    hulls = karr(abs_sys, alpha, model.init, model.vars)
    invs = equalities(hulls, alpha)
    locs = {}
    for loc in model.locations:
        h = hulls[loc]
        locs[loc] = {
            "reachable": not h.is_empty,
            "hull_dim": h.dim,
            "equalities": [
                {"abstract": e.abstract_text(abs_sys.vars), "concrete": f"{e.concrete.render()} = 0"}
                for e in invs
                if e.location == loc
            ],
        }
    out = {"method": "karr" if model.kind != "continuous" else "flow-hull", "locations": locs}
    if model.kind == "continuous":
        loc = model.init_location
        a, b = abs_sys.affine(loc)
        res = scale_functions(a, b, alpha.at(loc))
        field = model.field_at(loc)
        out["scale_functions"] = [
            {
                "lambda": rat(q.scale),
                "coeffs": [rat(c) for c in q.coeffs],
                "concrete": q.concrete.render(),
                "certified": scale_certificate(q, field).is_zero(),
            }
            for q in res.quantities
            if not q.concrete.is_zero()
        ]
        out["irrational_eigen_degree"] = res.skipped_eigen_degree
    return out


def validation_section(model: SystemModel, alpha: CobMap, abs_sys: AbstractSystem, cfg) -> dict:
    from .validate import check_exp_conservation, check_flow_commutation, order_ratio

    obligations = check_commutation(model, alpha, abs_sys)
    symbolic = certificate_ok(obligations)
    flow = check_flow_commutation(model, alpha, abs_sys, cfg)
    out = {
        "config": {"step": cfg.step, "horizon": cfg.horizon, "samples": cfg.samples, "tol": cfg.tol, "seed": cfg.seed},
        "symbolic": {"ok": symbolic, "nonzero": sum(1 for o in obligations if not o.ok)},
        "flow": {
            "passed": flow.passed,
            "max_defect": flow.max_defect,
            "blown_samples": flow.blown,
            "note": flow.note,
        },
    }
    passed = symbolic and flow.passed
    if model.kind != "discrete":
        out["order_ratio"] = order_ratio(model, alpha, abs_sys, cfg)
    if model.kind == "continuous" and abs_sys.degree == 1 and len(abs_sys.vars):
        loc = model.init_location
        a, b = abs_sys.affine(loc)
        exp = check_exp_conservation(a, b, alpha.at(loc), model.field_at(loc), model.init, cfg)
        out["exp_conservation"] = {"passed": exp.passed, "drift": exp.drift}
        passed = passed and exp.passed
    out["passed"] = passed
    return out
