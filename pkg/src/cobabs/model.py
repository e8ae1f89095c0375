"""System models: continuous ODEs, transition systems and hybrid automata.

All models are immutable once built.  Parameters live in the same
:class:`VarTable` as state variables, after them, with zero dynamics and
identity updates.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .poly import Polynomial, VarTable, VectorField, render_rational

RELATIONS = ("<", "<=", "=", ">=", ">")

#: location name used for the single implicit location of a continuous system
CONTINUOUS_LOCATION = "main"


@dataclass(frozen=True)
class Interval:
    """Closed interval; ``None`` bounds stand for -inf / +inf."""

    low: Optional[Fraction] = None
    high: Optional[Fraction] = None

    def __post_init__(self):
        if self.low is not None and self.high is not None and self.low > self.high:
            raise ValueError(f"empty interval [{self.low}, {self.high}]")

    @property
    def is_point(self) -> bool:
        return self.low is not None and self.low == self.high

    @property
    def bounded(self) -> bool:
        return self.low is not None and self.high is not None

    def intersect(self, other: "Interval") -> "Interval":
        lo = self.low if other.low is None else other.low if self.low is None else max(self.low, other.low)
        hi = self.high if other.high is None else other.high if self.high is None else min(self.high, other.high)
        return Interval(lo, hi)

    def contains(self, x) -> bool:
        return (self.low is None or x >= self.low) and (self.high is None or x <= self.high)


@dataclass(frozen=True)
class Atom:
    """``poly rel 0``."""

    poly: Polynomial
    rel: str

    def __post_init__(self):
        if self.rel not in RELATIONS:
            raise ValueError(f"unknown relation {self.rel!r}")

    def holds(self, point) -> bool:
        v = self.poly.evaluate(point)
        return {
            "<": v < 0,
            "<=": v <= 0,
            "=": v == 0,
            ">=": v >= 0,
            ">": v > 0,
        }[self.rel]

    def render(self) -> str:
        return f"{self.poly.render()} {self.rel} 0"


@dataclass(frozen=True)
class Condition:
    """Conjunction of atoms; the empty conjunction is true."""

    atoms: Tuple[Atom, ...] = ()

    def holds(self, point) -> bool:
        return all(a.holds(point) for a in self.atoms)

    def is_true(self) -> bool:
        return not self.atoms

    def render(self) -> str:
        return " && ".join(a.render() for a in self.atoms) if self.atoms else "true"

    def __and__(self, other: "Condition") -> "Condition":
        return Condition(self.atoms + other.atoms)


TRUE = Condition()


@dataclass(frozen=True)
class InitSet:
    """A box (per-variable intervals; absent variables are unbounded) plus side conditions."""

    box: Tuple[Tuple[str, Interval], ...] = ()
    condition: Condition = TRUE

    def interval(self, name: str) -> Interval:
        for n, iv in self.box:
            if n == name:
                return iv
        return Interval()

    def box_dict(self) -> Dict[str, Interval]:
        return dict(self.box)

    def contains(self, point: Mapping[str, Fraction], vars: VarTable) -> bool:
        for n, iv in self.box:
            if not iv.contains(point[n]):
                return False
        return self.condition.holds([point[n] for n in vars.names])


@dataclass(frozen=True)
class Transition:
    name: str
    source: str
    target: str
    guard: Condition
    update: Tuple[Polynomial, ...]

    def is_identity(self) -> bool:
        vars = self.update[0].vars if self.update else None
        return all(p == Polynomial.variable(vars, n) for p, n in zip(self.update, vars.names)) if vars else True


@dataclass(frozen=True)
class Mode:
    field: VectorField
    invariant: Condition = TRUE


@dataclass(frozen=True)
class ContinuousSystem:
    name: str
    vars: VarTable
    state: Tuple[str, ...]
    params: Tuple[str, ...]
    field: VectorField
    init: InitSet = InitSet()
    domain: Condition = TRUE

    kind = "continuous"

    @property
    def locations(self) -> Tuple[str, ...]:
        return (CONTINUOUS_LOCATION,)

    @property
    def init_location(self) -> str:
        return CONTINUOUS_LOCATION

    @property
    def transitions(self) -> Tuple[Transition, ...]:
        return ()

    def field_at(self, loc: str) -> Optional[VectorField]:
        return self.field

    def invariant_at(self, loc: str) -> Condition:
        return self.domain


@dataclass(frozen=True)
class TransitionSystem:
    name: str
    vars: VarTable
    state: Tuple[str, ...]
    params: Tuple[str, ...]
    locations: Tuple[str, ...]
    transitions: Tuple[Transition, ...]
    init_location: str
    init: InitSet = InitSet()

    kind = "discrete"

    def field_at(self, loc: str) -> Optional[VectorField]:
        return None

    def invariant_at(self, loc: str) -> Condition:
        return TRUE


@dataclass(frozen=True)
class HybridSystem:
    name: str
    vars: VarTable
    state: Tuple[str, ...]
    params: Tuple[str, ...]
    locations: Tuple[str, ...]
    modes: Tuple[Tuple[str, Mode], ...]
    transitions: Tuple[Transition, ...]
    init_location: str
    init: InitSet = InitSet()

    kind = "hybrid"

    def mode(self, loc: str) -> Mode:
        for n, m in self.modes:
            if n == loc:
                return m
        raise KeyError(loc)

    def field_at(self, loc: str) -> Optional[VectorField]:
        return self.mode(loc).field

    def invariant_at(self, loc: str) -> Condition:
        return self.mode(loc).invariant


SystemModel = Union[ContinuousSystem, TransitionSystem, HybridSystem]


def identity_update(vars: VarTable) -> Tuple[Polynomial, ...]:
    return tuple(Polynomial.variable(vars, n) for n in vars.names)


def incoming(model: SystemModel, loc: str) -> List[Transition]:
    return [t for t in model.transitions if t.target == loc]


def outgoing(model: SystemModel, loc: str) -> List[Transition]:
    return [t for t in model.transitions if t.source == loc]


# -- transformations --------------------------------------------------------

def _embed_condition(c: Condition, target: VarTable) -> Condition:
    return Condition(tuple(Atom(a.poly.embed(target), a.rel) for a in c.atoms))


def _embed_transition(t: Transition, target: VarTable, extra_updates: Mapping[str, Polynomial]) -> Transition:
    old = {n: p for n, p in zip(t.update[0].vars.names, t.update)} if t.update else {}
    update = []
    for n in target.names:
        if n in old:
            update.append(old[n].embed(target))
        else:
            update.append(extra_updates.get(n, Polynomial.variable(target, n)))
    return replace(t, guard=_embed_condition(t.guard, target), update=tuple(update))


def with_time(model: SystemModel, name: str = "t") -> SystemModel:
    """Adjoin a clock variable with unit rate (identity across jumps)."""
    if name in model.vars:
        raise ValueError(f"cannot adjoin time: variable {name!r} already declared")
    target = model.vars.extended([name])
    one = Polynomial.constant(target, 1)
    state = model.state + (name,)
    init = model.init
    if isinstance(model, ContinuousSystem):
        return replace(
            model,
            vars=target,
            state=state,
            field=model.field.embed(target, {name: one}),
            init=InitSet(init.box + ((name, Interval(Fraction(0), Fraction(0))),), _embed_condition(init.condition, target)),
            domain=_embed_condition(model.domain, target),
        )
    transitions = tuple(_embed_transition(t, target, {}) for t in model.transitions)
    new_init = InitSet(init.box + ((name, Interval(Fraction(0), Fraction(0))),), _embed_condition(init.condition, target))
    if isinstance(model, TransitionSystem):
        return replace(model, vars=target, state=state, transitions=transitions, init=new_init)
    modes = tuple(
        (loc, Mode(m.field.embed(target, {name: one}), _embed_condition(m.invariant, target))) for loc, m in model.modes
    )
    return replace(model, vars=target, state=state, modes=modes, transitions=transitions, init=new_init)


# -- rendering -----------------------------------------------------------------

def _render_bound(x: Optional[Fraction], neg: bool) -> str:
    if x is None:
        return "-inf" if neg else "inf"
    return render_rational(x)


def _render_init(init: InitSet, indent: str) -> List[str]:
    lines = [f"{indent}init {{"]
    for n, iv in init.box:
        if iv.is_point:
            lines.append(f"{indent}  {n} = {render_rational(iv.low)};")
        else:
            lines.append(f"{indent}  {n} in [{_render_bound(iv.low, True)}, {_render_bound(iv.high, False)}];")
    for a in init.condition.atoms:
        lines.append(f"{indent}  {a.render()};")
    lines.append(f"{indent}}}")
    return lines


def _render_field(field: VectorField, state: Sequence[str], indent: str) -> List[str]:
    lines = [f"{indent}field {{"]
    for n in state:
        lines.append(f"{indent}  {n}' = {field[n].render()};")
    lines.append(f"{indent}}}")
    return lines


def _render_transition(t: Transition, vars: VarTable, state: Sequence[str], indent: str) -> List[str]:
    lines = [f"{indent}transition {t.name} {{", f"{indent}  from {t.source};", f"{indent}  to {t.target};"]
    if not t.guard.is_true():
        lines.append(f"{indent}  guard: {t.guard.render()};")
    lines.append(f"{indent}  update {{")
    for n, p in zip(vars.names, t.update):
        if n in state and p != Polynomial.variable(vars, n):
            lines.append(f"{indent}    {n}' = {p.render()};")
    lines.append(f"{indent}  }}")
    lines.append(f"{indent}}}")
    return lines


def render(model: SystemModel) -> str:
    """Canonical model-language text; ``parse(render(m)) == m``."""
    ind = "  "
    out = [f"{model.kind} {model.name} {{", f"{ind}vars: {', '.join(model.state)};"]
    if model.params:
        out.append(f"{ind}params: {', '.join(model.params)};")
    if isinstance(model, ContinuousSystem):
        out += _render_field(model.field, model.state, ind)
        out += _render_init(model.init, ind)
        if not model.domain.is_true():
            out.append(f"{ind}domain: {model.domain.render()};")
    elif isinstance(model, TransitionSystem):
        out.append(f"{ind}locations: {' '.join(model.locations)};")
        out.append(f"{ind}initloc: {model.init_location};")
        for t in model.transitions:
            out += _render_transition(t, model.vars, model.state, ind)
        out += _render_init(model.init, ind)
    else:
        out.append(f"{ind}initloc: {model.init_location};")
        for loc, m in model.modes:
            out.append(f"{ind}mode {loc} {{")
            out += _render_field(m.field, model.state, ind * 2)
            if not m.invariant.is_true():
                out.append(f"{ind * 2}inv: {m.invariant.render()};")
            out.append(f"{ind}}}")
        for t in model.transitions:
            out += _render_transition(t, model.vars, model.state, ind)
        out += _render_init(model.init, ind)
    out.append("}")
    return "\n".join(out) + "\n"
