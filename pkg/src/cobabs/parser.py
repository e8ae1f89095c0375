"""Parser for the model language.

Example::

    continuous ex11 {
      vars: x, y;
      field { x' = x*y + 2*x; y' = -1/2*y^2 + 7*y + 1; }
      init { x in [0, 1]; y in [0, 1]; }
    }

Comments start with ``#`` or ``//`` and run to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .model import (
    Atom,
    Condition,
    ContinuousSystem,
    HybridSystem,
    InitSet,
    Interval,
    Mode,
    SystemModel,
    Transition,
    TransitionSystem,
    identity_update,
)
from .poly import Polynomial, VarTable, VectorField


class ModelError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(f"{where}{message}")


class ModelSyntaxError(ModelError):
    pass


class ModelSemanticError(ModelError):
    pass


IRRATIONAL_NAMES = {"pi", "e", "tau", "phi"}
FUNCTION_NAMES = {"sin", "cos", "tan", "exp", "log", "ln", "sqrt", "abs", "atan", "asin", "acos", "sinh", "cosh", "tanh"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>(?:\#|//)[^\n]*)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|&&|\*\*|==|!=|[-+*/^(){}\[\];:,'<>=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> List[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ModelSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    # -- token helpers ---------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def error(self, msg: str, tok: Optional[Token] = None) -> ModelSyntaxError:
        tok = tok or self.tok
        return ModelSyntaxError(msg, tok.line, tok.col)

    def semantic(self, msg: str, tok: Optional[Token] = None) -> ModelSemanticError:
        tok = tok or self.tok
        return ModelSemanticError(msg, tok.line, tok.col)

    def accept(self, text: str) -> Optional[Token]:
        if self.tok.text == text and self.tok.kind in ("op", "ident"):
            t = self.tok
            self.pos += 1
            return t
        return None

    def expect(self, text: str) -> Token:
        t = self.accept(text)
        if t is None:
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return t

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            found = self.tok.text or "end of input"
            raise self.error(f"expected identifier, found {found!r}")
        t = self.tok
        self.pos += 1
        return t

    # -- expressions -----------------------------------------------------
    def expr(self, vars: VarTable) -> Polynomial:
        p = self.term(vars)
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.tok.text
            self.pos += 1
            q = self.term(vars)
            p = p + q if op == "+" else p - q
        return p

    def term(self, vars: VarTable) -> Polynomial:
        p = self.unary(vars)
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.tok
            self.pos += 1
            q = self.unary(vars)
            if op.text == "*":
                p = p * q
            else:
                if not q.is_constant():
                    raise self.semantic("non-polynomial expression: division by a non-constant", op)
                c = q.constant_term()
                if not c:
                    raise self.semantic("division by zero", op)
                p = p.scale(1 / c)
        return p

    def unary(self, vars: VarTable) -> Polynomial:
        if self.tok.kind == "op" and self.tok.text in ("-", "+"):
            neg = self.tok.text == "-"
            self.pos += 1
            p = self.unary(vars)
            return -p if neg else p
        return self.power(vars)

    def power(self, vars: VarTable) -> Polynomial:
        base = self.atom(vars)
        if self.tok.kind == "op" and self.tok.text in ("^", "**"):
            op = self.tok
            self.pos += 1
            if self.tok.kind == "number" and re.fullmatch(r"\d+", self.tok.text):
                k = int(self.tok.text)
                self.pos += 1
                return base ** k
            raise self.semantic("non-polynomial expression: exponent must be a non-negative integer literal", op)
        return base

    def atom(self, vars: VarTable) -> Polynomial:
        t = self.tok
        if t.kind == "number":
            self.pos += 1
            return Polynomial.constant(vars, Fraction(t.text))
        if t.kind == "ident":
            self.pos += 1
            if self.tok.text == "(" and self.tok.kind == "op":
                if t.text == "sqrt":
                    raise self.semantic("irrational constant: sqrt is not supported", t)
                raise self.semantic(f"non-polynomial expression: function {t.text!r}", t)
            if t.text in vars:
                return Polynomial.variable(vars, t.text)
            if t.text in IRRATIONAL_NAMES:
                raise self.semantic(f"irrational constant {t.text!r}", t)
            raise self.semantic(f"unknown variable {t.text!r}", t)
        if self.accept("("):
            p = self.expr(vars)
            self.expect(")")
            return p
        raise self.error(f"unexpected {t.text or 'end of input'!r} in expression")

    def rational(self) -> Optional[Fraction]:
        """Signed rational literal ``p``, ``p/q`` or decimal; ``inf`` gives None."""
        neg = False
        if self.tok.text in ("-", "+") and self.tok.kind == "op":
            neg = self.tok.text == "-"
            self.pos += 1
        if self.tok.kind == "ident" and self.tok.text == "inf":
            self.pos += 1
            return None
        if self.tok.kind != "number":
            raise self.error("expected a rational literal")
        val = Fraction(self.tok.text)
        self.pos += 1
        if self.accept("/"):
            if self.tok.kind != "number":
                raise self.error("expected denominator")
            den = Fraction(self.tok.text)
            if not den:
                raise self.semantic("division by zero")
            self.pos += 1
            val = val / den
        return -val if neg else val

    def relation(self) -> str:
        t = self.tok
        if t.kind == "op" and t.text in ("<", "<=", "=", "==", ">=", ">"):
            self.pos += 1
            return "=" if t.text == "==" else t.text
        if t.kind == "op" and t.text == "!=":
            raise self.semantic("disequality guards are not supported; omit the guard", t)
        raise self.error(f"expected relation, found {t.text!r}")

    def condition(self, vars: VarTable) -> Condition:
        if self.tok.kind == "ident" and self.tok.text == "true" and self.peek().text in (";",):
            self.pos += 1
            return Condition()
        atoms = [self.atom_condition(vars)]
        while self.accept("&&"):
            atoms.append(self.atom_condition(vars))
        return Condition(tuple(atoms))

    def atom_condition(self, vars: VarTable) -> Atom:
        lhs = self.expr(vars)
        rel = self.relation()
        rhs = self.expr(vars)
        return Atom(lhs - rhs, rel)

    # -- declarations ------------------------------------------------------
    def ident_list(self, allow_empty: bool = False) -> List[Token]:
        if allow_empty and self.tok.text == ";":
            return []
        names = [self.ident()]
        while True:
            if self.accept(","):
                names.append(self.ident())
            elif self.tok.kind == "ident":
                names.append(self.ident())
            else:
                break
        return names

    def assignments(self, vars: VarTable, assignable: Tuple[str, ...], what: str) -> Dict[str, Polynomial]:
        self.expect("{")
        out: Dict[str, Polynomial] = {}
        while not self.accept("}"):
            name = self.ident()
            if name.text not in vars:
                raise self.semantic(f"unknown variable {name.text!r}", name)
            if name.text not in assignable:
                raise self.semantic(f"parameter {name.text!r} cannot appear on the left of {what}", name)
            if name.text in out:
                raise self.semantic(f"duplicate {what} for {name.text!r}", name)
            self.expect("'")
            self.expect("=")
            out[name.text] = self.expr(vars)
            self.expect(";")
        return out

    def init_block(self, vars: VarTable) -> InitSet:
        self.expect("{")
        box: Dict[str, Interval] = {}
        order: List[str] = []
        atoms: List[Atom] = []

        def put(name: str, iv: Interval, tok: Token):
            try:
                box[name] = box[name].intersect(iv) if name in box else iv
            except ValueError as exc:
                raise self.semantic(f"empty initial interval for {name!r}", tok) from exc
            if name not in order:
                order.append(name)

        while not self.accept("}"):
            t = self.tok
            if t.kind == "ident" and self.peek().text == "in" and self.peek().kind == "ident":
                if t.text not in vars:
                    raise self.semantic(f"unknown variable {t.text!r}", t)
                self.pos += 2
                self.expect("[")
                lo = self.rational()
                self.expect(",")
                hi = self.rational()
                self.expect("]")
                self.expect(";")
                put(t.text, Interval(lo, hi), t)
                continue
            atom = self.atom_condition(vars)
            self.expect(";")
            bound = _single_variable_bound(atom, vars)
            if bound is not None:
                put(bound[0], bound[1], t)
            else:
                atoms.append(atom)
        return InitSet(tuple((n, box[n]) for n in order), Condition(tuple(atoms)))

    # -- systems -------------------------------------------------------------
    def model(self) -> List[SystemModel]:
        systems = []
        while self.tok.kind != "eof":
            systems.append(self.system())
        if not systems:
            raise self.error("no system declared")
        return systems

    def system(self) -> SystemModel:
        kind_tok = self.ident()
        kind = kind_tok.text
        if kind not in ("continuous", "discrete", "hybrid"):
            raise self.error(f"expected 'continuous', 'discrete' or 'hybrid', found {kind!r}", kind_tok)
        name = self.ident().text
        self.expect("{")
        state: Optional[List[Token]] = None
        params: List[Token] = []
        vars: Optional[VarTable] = None
        field_src = None
        init = None
        domain = Condition()
        locations: Optional[List[Token]] = None
        initloc: Optional[Token] = None
        modes: List[Tuple[Token, int]] = []
        transitions: List[Tuple[Token, int]] = []

        # pass 1: declarations fix the VarTable; bodies are re-parsed once it is known
        start = self.pos
        depth = 0
        while True:
            t = self.tok
            if t.kind == "eof":
                raise self.error("unterminated system body")
            if depth == 0 and t.text == "}" and t.kind == "op":
                end = self.pos
                break
            if depth == 0 and t.kind == "ident" and t.text in ("vars", "params") and self.peek().text == ":":
                self.pos += 2
                names = self.ident_list(allow_empty=True)
                self.expect(";")
                if t.text == "vars":
                    if state is not None:
                        raise self.semantic("duplicate vars declaration", t)
                    state = names
                else:
                    params += names
                continue
            if t.text == "{":
                depth += 1
            elif t.text == "}":
                depth -= 1
            self.pos += 1
        if state is None:
            raise self.semantic("missing vars declaration", kind_tok)
        if not state:
            raise self.semantic("empty vars list", kind_tok)
        all_names = [n.text for n in state] + [n.text for n in params]
        try:
            vars = VarTable(all_names)
        except ValueError as exc:
            raise self.semantic(str(exc), kind_tok) from exc
        state_names = tuple(n.text for n in state)
        param_names = tuple(n.text for n in params)

        self.pos = start
        while self.pos < end:
            t = self.tok
            if t.kind == "ident" and t.text in ("vars", "params"):
                self.pos += 2
                self.ident_list(allow_empty=True)
                self.expect(";")
            elif t.kind == "ident" and t.text == "field":
                if kind != "continuous":
                    raise self.semantic("top-level field only allowed in continuous systems; use mode blocks", t)
                if field_src is not None:
                    raise self.semantic("duplicate field block", t)
                self.pos += 1
                field_src = self.assignments(vars, state_names, "a field equation")
            elif t.kind == "ident" and t.text == "init":
                if init is not None:
                    raise self.semantic("duplicate init block", t)
                self.pos += 1
                init = self.init_block(vars)
            elif t.kind == "ident" and t.text == "domain":
                self.pos += 1
                self.expect(":")
                domain = self.condition(vars)
                self.expect(";")
            elif t.kind == "ident" and t.text == "locations":
                self.pos += 1
                self.expect(":")
                locations = self.ident_list()
                self.expect(";")
            elif t.kind == "ident" and t.text == "initloc":
                self.pos += 1
                self.expect(":")
                initloc = self.ident()
                self.expect(";")
            elif t.kind == "ident" and t.text == "mode":
                self.pos += 1
                loc = self.ident()
                modes.append((loc, self.pos))
                self.skip_block()
            elif t.kind == "ident" and t.text == "transition":
                self.pos += 1
                tname = self.ident()
                transitions.append((tname, self.pos))
                self.skip_block()
            else:
                raise self.error(f"unexpected {t.text!r} in {kind} system")
        self.pos = end
        self.expect("}")
        resume = self.pos

        init = init or InitSet()
        if kind == "continuous":
            if field_src is None:
                raise self.semantic("continuous system without field block", kind_tok)
            missing = [n for n in state_names if n not in field_src]
            if missing:
                raise self.semantic(f"no dynamics for variable(s) {', '.join(missing)}", kind_tok)
            field = VectorField.from_mapping(vars, field_src)
            result: SystemModel = ContinuousSystem(name, vars, state_names, param_names, field, init, domain)
            self.pos = resume
            return result

        if kind == "discrete":
            if modes:
                raise self.semantic("mode blocks are only allowed in hybrid systems", modes[0][0])
            if locations is None:
                raise self.semantic("discrete system without locations", kind_tok)
            loc_names = self._unique_locations(locations)
        else:
            if locations is not None:
                loc_names = self._unique_locations(locations)
            else:
                loc_names = self._unique_locations([m[0] for m in modes])
            if not modes:
                raise self.semantic("hybrid system without modes", kind_tok)
        if initloc is None:
            if kind == "discrete":
                raise self.semantic("discrete system without initloc", kind_tok)
            init_location = loc_names[0]
        else:
            if initloc.text not in loc_names:
                raise self.semantic(f"unknown initial location {initloc.text!r}", initloc)
            init_location = initloc.text

        mode_map: Dict[str, Mode] = {}
        for loc, pos in modes:
            if loc.text not in loc_names:
                raise self.semantic(f"mode for undeclared location {loc.text!r}", loc)
            if loc.text in mode_map:
                raise self.semantic(f"duplicate location {loc.text!r}", loc)
            self.pos = pos
            mode_map[loc.text] = self.mode_body(vars, state_names)

        trans: List[Transition] = []
        seen = set()
        for tname, pos in transitions:
            if tname.text in seen:
                raise self.semantic(f"duplicate transition {tname.text!r}", tname)
            seen.add(tname.text)
            self.pos = pos
            trans.append(self.transition_body(tname.text, vars, state_names, loc_names))
        self.pos = resume

        if kind == "discrete":
            return TransitionSystem(name, vars, state_names, param_names, tuple(loc_names), tuple(trans), init_location, init)
        missing = [l for l in loc_names if l not in mode_map]
        if missing:
            raise self.semantic(f"location(s) without dynamics: {', '.join(missing)}", kind_tok)
        return HybridSystem(
            name,
            vars,
            state_names,
            param_names,
            tuple(loc_names),
            tuple((l, mode_map[l]) for l in loc_names),
            tuple(trans),
            init_location,
            init,
        )

    def _unique_locations(self, toks: List[Token]) -> List[str]:
        names: List[str] = []
        for t in toks:
            if t.text in names:
                raise self.semantic(f"duplicate location {t.text!r}", t)
            names.append(t.text)
        return names

    def skip_block(self):
        start = self.tok
        self.expect("{")
        depth = 1
        while depth:
            t = self.tok
            if t.kind == "eof":
                raise self.error("unterminated block", start)
            if t.kind == "op" and t.text == "{":
                depth += 1
            elif t.kind == "op" and t.text == "}":
                depth -= 1
            self.pos += 1

    def mode_body(self, vars: VarTable, state: Tuple[str, ...]) -> Mode:
        self.expect("{")
        self.expect("field")
        src = self.assignments(vars, state, "a field equation")
        inv = Condition()
        if self.accept("inv"):
            self.expect(":")
            inv = self.condition(vars)
            self.expect(";")
        self.expect("}")
        return Mode(VectorField.from_mapping(vars, src), inv)

    def transition_body(self, name: str, vars: VarTable, state: Tuple[str, ...], locations: List[str]) -> Transition:
        self.expect("{")
        self.expect("from")
        src = self.ident()
        self.expect(";")
        self.expect("to")
        dst = self.ident()
        self.expect(";")
        for t in (src, dst):
            if t.text not in locations:
                raise self.semantic(f"unknown location {t.text!r}", t)
        guard = Condition()
        if self.accept("guard"):
            self.expect(":")
            guard = self.condition(vars)
            self.expect(";")
        updates: Dict[str, Polynomial] = {}
        if self.accept("update"):
            updates = self.assignments(vars, state, "an update")
        self.expect("}")
        ident = identity_update(vars)
        update = tuple(updates.get(n, ident[i]) for i, n in enumerate(vars.names))
        return Transition(name, src.text, dst.text, guard, update)


def _single_variable_bound(atom: Atom, vars: VarTable) -> Optional[Tuple[str, Interval]]:
    """Recognise ``c*x + d rel 0`` with non-strict or equality relation."""
    p = atom.poly
    if atom.rel in ("<", ">") or p.degree() != 1:
        return None
    linear = [m for m in p.terms if sum(m) == 1]
    if len(linear) != 1:
        return None
    m = linear[0]
    name = vars.names[m.index(1)]
    a = p.terms[m]
    bound = -p.constant_term() / a
    rel = atom.rel
    if a < 0 and rel != "=":
        rel = "<=" if rel == ">=" else ">="
    if rel == "=":
        return name, Interval(bound, bound)
    if rel == ">=":
        return name, Interval(bound, None)
    return name, Interval(None, bound)


def parse_many(text: str) -> List[SystemModel]:
    return _Parser(text).model()


def parse(text: str) -> SystemModel:
    """Parse text holding exactly one system."""
    systems = parse_many(text)
    if len(systems) != 1:
        raise ModelSemanticError(f"expected exactly one system, found {len(systems)}")
    return systems[0]


def parse_polynomial(text: str, vars: VarTable) -> Polynomial:
    p = _Parser(text)
    out = p.expr(vars)
    if p.tok.kind != "eof":
        raise p.error(f"trailing input {p.tok.text!r}")
    return out


def parse_condition(text: str, vars: VarTable) -> Condition:
    p = _Parser(text)
    out = p.condition(vars)
    if p.tok.kind != "eof":
        raise p.error(f"trailing input {p.tok.text!r}")
    return out


def read_pragmas(text: str) -> Dict[str, str]:
    """``#! key: value`` header lines (used by the benchmark corpus)."""
    out = {}
    for line in text.splitlines():
        m = re.match(r"\s*#!\s*([\w-]+)\s*:\s*(.*?)\s*$", line)
        if m:
            out[m.group(1)] = m.group(2)
    return out
