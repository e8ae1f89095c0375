"""``cob`` command line tool.

Exit codes: 0 success, 1 error, 2 abstraction not affine, 3 trivial result,
4 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .abstraction import NotAffine, NotClosed, multilinearize
from .closure import ProductCapExceeded, SweepCapExceeded
from .model import ContinuousSystem, render
from .parser import ModelError, parse, read_pragmas
from .report import (
    analyze,
    corpus_files,
    dumps,
    format_table,
    invariants_section,
    load_abstraction,
    run_corpus_file,
    to_json,
    validation_section,
)
from .validate import DEFAULT_SEED, SimConfig

EXIT_OK, EXIT_ERROR, EXIT_NOT_AFFINE, EXIT_TRIVIAL, EXIT_FAIL = 0, 1, 2, 3, 4

log = logging.getLogger("cobabs")

DEFAULT_CORPUS = Path(__file__).parent / "corpus"


def _setup_logging():
    level = os.environ.get("COB_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _write(text: str, out: Optional[str]):
    if out and out != "-":
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _analysis_args(p: argparse.ArgumentParser):
    p.add_argument("--degree-out", "-d", type=int, help="degree bound of the abstract dynamics (default: file pragma or 1)")
    p.add_argument("--degree-init", "-k", type=int, help="degree of the initial monomial basis (default: file pragma or 2)")
    p.add_argument("--with-time", action="store_true", default=None, help="adjoin a clock t with dt/dt = 1")
    p.add_argument("--basis", help="fix the components instead of searching, e.g. 'x; x*y; x*y^2'")
    p.add_argument("--max-products", type=int, default=200_000)


def _run_analysis(args):
    source = Path(args.input).read_text(encoding="utf-8")
    prag = read_pragmas(source)
    d = args.degree_out if args.degree_out is not None else int(prag.get("degree-out", 1))
    k = args.degree_init if args.degree_init is not None else int(prag.get("degree-init", 2))
    wt = args.with_time if args.with_time is not None else prag.get("with-time") == "yes"
    basis = [b.strip() for b in args.basis.split(";") if b.strip()] if args.basis else None
    return analyze(source, d, k, wt, basis, args.max_products)


def _summary(report: dict) -> str:
    lines = [f"model: {report['model'].splitlines()[0].rstrip(' {')}"]
    for loc, sp in report["closure"]["spaces"].items():
        lines.append(f"  {loc}: dim {sp['dim']}  {{{', '.join(sp['basis'])}}}")
    ab = report["abstraction"]
    for loc, dyn in ab["dynamics"].items():
        for w, p in zip(ab["vars"], dyn):
            lines.append(f"  {loc}: d{w}/dt = {p}")
    for t in ab["transitions"]:
        lines.append(f"  {t['name']}: ({', '.join(t['update'])})")
    lines.append(f"certificates: closure {'ok' if report['closure']['certificate']['ok'] else 'FAILED'}, "
                 f"commutation {'ok' if report['commutation']['ok'] else 'FAILED'}")
    return "\n".join(lines) + "\n"


def cmd_abstract(args) -> int:
    an = _run_analysis(args)
    report = to_json(an)
    _write(dumps(report), args.out)
    if args.out and args.out != "-":
        sys.stdout.write(_summary(report))
    if an.trivial:
        print("trivial result: no non-constant closed subspace", file=sys.stderr)
        return EXIT_TRIVIAL
    return EXIT_OK


def cmd_invariants(args) -> int:
    if args.input.endswith(".json"):
        report = json.loads(Path(args.input).read_text(encoding="utf-8"))
    else:
        report = to_json(_run_analysis(args))
    model, alpha, abs_sys = load_abstraction(report)
    report["invariants"] = invariants_section(model, alpha, abs_sys)
    inv = report["invariants"]
    for loc, entry in inv["locations"].items():
        for e in entry["equalities"]:
            print(f"{loc}: {e['concrete']}")
    for q in inv.get("scale_functions", []):
        kind = "conserved" if q["lambda"] == "0" else f"scale {q['lambda']}"
        print(f"{kind}: {q['concrete']}")
    out = args.out or (args.input if args.input.endswith(".json") else None)
    if out:
        _write(dumps(report), out)
    return EXIT_OK


def cmd_validate(args) -> int:
    report = json.loads(Path(args.report).read_text(encoding="utf-8"))
    model, alpha, abs_sys = load_abstraction(report)
    cfg = SimConfig(args.step, args.horizon, args.samples, args.tol, args.seed)
    val = validation_section(model, alpha, abs_sys, cfg)
    report["validation"] = val
    _write(dumps(report), args.out or args.report)
    print(f"symbolic commutation: {'ok' if val['symbolic']['ok'] else 'FAILED'}")
    print(f"flow commutation: max defect {val['flow']['max_defect']:.3g} ({'PASS' if val['flow']['passed'] else 'FAIL'})")
    if val.get("order_ratio") is not None:
        print(f"RK4 order ratio: {val['order_ratio']:.2f}")
    if "exp_conservation" in val:
        print(f"exp(-tA) alpha drift: {max(val['exp_conservation']['drift'], default=0):.3g}")
    print("PASS" if val["passed"] else "FAIL")
    return EXIT_OK if val["passed"] else EXIT_FAIL


def cmd_multilinearize(args) -> int:
    model = parse(Path(args.input).read_text(encoding="utf-8"))
    if not isinstance(model, ContinuousSystem):
        print("multilinearize: only continuous systems are supported", file=sys.stderr)
        return EXIT_ERROR
    copies, out = multilinearize(model)
    text = render(out)
    text = "".join(f"# {c} -> {x}\n" for c, x in copies.items()) + text
    _write(text, args.out)
    return EXIT_OK


def cmd_corpus(args) -> int:
    rows = [run_corpus_file(p) for p in corpus_files(Path(args.dir))]
    if args.json:
        data = [
            {"id": r.ident, "vars": r.nvars, "degree": r.degree, "b0": r.b0, "basis": r.basis, "reference": r.reference, "match": r.match, "dims": r.dims, "status": r.status}
            for r in rows
        ]
        sys.stdout.write(json.dumps(data, sort_keys=True, indent=2) + "\n")
    else:
        sys.stdout.write(format_table(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cob", description="Change-of-bases abstraction of polynomial systems")
    ap.add_argument("--version", action="version", version=f"cob {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("abstract", help="discover a closed basis and build the abstract system")
    p.add_argument("input")
    _analysis_args(p)
    p.add_argument("--out", "-o", help="report path (default: stdout)")
    p.set_defaults(func=cmd_abstract)

    p = sub.add_parser("invariants", help="affine equalities transferred back to the original variables")
    p.add_argument("input", help="a report (.json) or a model file")
    _analysis_args(p)
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_invariants)

    p = sub.add_parser("validate", help="numerically cross-check a report")
    p.add_argument("report")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=lambda s: int(s, 0), default=DEFAULT_SEED)
    p.add_argument("--out", "-o", help="where to write the updated report (default: in place)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("multilinearize", help="rewrite a continuous system into multilinear form")
    p.add_argument("input")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_multilinearize)

    p = sub.add_parser("corpus", help="run the benchmark corpus and print a table")
    p.add_argument("dir", nargs="?", default=str(DEFAULT_CORPUS))
    p.add_argument("--table", action="store_true", help="plain-text table (the default)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_corpus)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NotAffine as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_AFFINE
    except (ModelError, NotClosed, ProductCapExceeded, SweepCapExceeded, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
