"""Numerical and execution-based cross checks of an abstraction.

This is the only module that uses floating point.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from .abstraction import AbstractSystem, CobMap, init_substitution
from .exactalg import Matrix
from .model import InitSet, Interval, SystemModel, Transition, outgoing
from .poly import Polynomial, VarTable, VectorField

DEFAULT_SEED = 0xC0B


@dataclass
class SimConfig:
    step: float = 1e-3
    horizon: float = 1.0
    samples: int = 20
    tol: float = 1e-4
    seed: int = DEFAULT_SEED
    blowup: float = 1e12

    def __post_init__(self):
        if self.step <= 0 or self.horizon <= 0:
            raise ValueError("step and horizon must be positive")

    @property
    def steps(self) -> int:
        return max(1, int(round(self.horizon / self.step)))


class CompiledPolys:
    """Vectorised float evaluation of a list of polynomials over one VarTable."""

    def __init__(self, polys: Sequence[Polynomial], nvars: Optional[int] = None):
        self.nout = len(polys)
        n = nvars if nvars is not None else (len(polys[0].vars) if polys else 0)
        monos = sorted({m for p in polys for m in p.terms})
        self.exps = np.array(monos, dtype=float).reshape(len(monos), n)
        self.coef = np.zeros((len(monos), self.nout))
        pos = {m: i for i, m in enumerate(monos)}
        for j, p in enumerate(polys):
            for m, c in p.terms.items():
                self.coef[pos[m], j] = float(c)
        self._nonneg = (self.exps == np.round(self.exps)).all()

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """``x`` has shape (samples, n); returns (samples, nout)."""
        if not len(self.exps):
            return np.zeros((x.shape[0], self.nout))
        with np.errstate(over="ignore", invalid="ignore"):
            vals = np.prod(np.power(x[:, None, :], self.exps[None, :, :]), axis=2)
        return vals @ self.coef


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (steps + 1, samples, n)
    blown: np.ndarray  # (samples,) bool


def rk4(f: CompiledPolys, x0: np.ndarray, h: float, steps: int, blowup: float = 1e12, t0: float = 0.0) -> Trajectory:
    """Classical fourth-order Runge-Kutta for an autonomous field, batched over samples."""
    x = np.array(x0, dtype=float, ndmin=2)
    out = np.empty((steps + 1,) + x.shape)
    out[0] = x
    blown = np.zeros(x.shape[0], dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(steps):
            k1 = f(x)
            k2 = f(x + h / 2 * k1)
            k3 = f(x + h / 2 * k2)
            k4 = f(x + h * k3)
            x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            bad = ~np.isfinite(x).all(axis=1) | (np.abs(x).max(axis=1, initial=0.0) > blowup)
            blown |= bad
            x[bad] = 0.0
            out[i + 1] = x
    return Trajectory(t0 + h * np.arange(steps + 1), out, blown)


def integrate(field: VectorField, x0: Sequence[float], cfg: SimConfig) -> Trajectory:
    return rk4(CompiledPolys(list(field)), np.array([x0], dtype=float), cfg.step, cfg.steps, cfg.blowup)


# -- sampling ---------------------------------------------------------------------

def _range(iv: Interval, width: float = 1.0) -> Tuple[float, float]:
    lo = None if iv.low is None else float(iv.low)
    hi = None if iv.high is None else float(iv.high)
    if lo is None and hi is None:
        return -width, width
    if lo is None:
        return hi - width, hi
    if hi is None:
        return lo, lo + width
    return lo, hi


def sample_init(init: InitSet, vars: VarTable, count: int, rng: random.Random, exact: bool = False, width: float = 1.0, tries: int = 200):
    """Points of the initial set: free variables drawn from the box, the
    eliminated ones computed from the init equalities; side conditions are
    enforced by rejection.  ``exact`` draws integers (or rationals) instead of floats."""
    images, free = init_substitution(init, vars)
    box = init.box_dict()
    out = []
    for _ in range(count):
        for _ in range(tries):
            vals = {}
            for n in vars.names:
                lo, hi = _range(box.get(n, Interval()), width)
                if exact:
                    ilo, ihi = math.ceil(lo), math.floor(hi)
                    if ilo <= ihi:
                        vals[n] = Fraction(rng.randint(ilo, ihi))
                    else:
                        vals[n] = Fraction(lo) + Fraction(rng.randint(0, 8), 8) * (Fraction(hi) - Fraction(lo))
                else:
                    vals[n] = rng.uniform(lo, hi)
            point = [vals[n] for n in vars.names]
            full = [p.evaluate(point) for p in images]
            if init.condition.holds(full) and all(box.get(n, Interval()).contains(x) for n, x in zip(vars.names, full)):
                out.append(full)
                break
        else:
            raise ValueError("could not sample the initial set")
    return out


# -- flow commutation -------------------------------------------------------------------

@dataclass
class FlowReport:
    defects: List[float]
    blown: List[int]
    passed: bool
    tol: float
    note: str = ""

    @property
    def max_defect(self) -> float:
        return max(self.defects, default=0.0)


def _relative_defect(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """max over time of |a - w|_inf / (1 + |w|_inf), per sample; arrays (T, S, m)."""
    if a.shape[-1] == 0:
        return np.zeros(a.shape[1])
    num = np.abs(a - w).max(axis=2)
    den = 1.0 + np.abs(w).max(axis=2, initial=0.0)
    return (num / den).max(axis=0)


def default_schedule(model: SystemModel, jumps: int = 2) -> List[str]:
    """Follow the first outgoing transition from each visited location."""
    out = []
    loc = model.init_location
    for _ in range(jumps):
        ts = outgoing(model, loc)
        if not ts:
            break
        out.append(ts[0].name)
        loc = ts[0].target
    return out


def _flow_defects(model, alpha: CobMap, abs_sys: AbstractSystem, x0: np.ndarray, h: float, horizon: float, schedule: Sequence[str], blowup: float):
    """Run original and abstract side by side through a scripted schedule."""
    trans = {t.name: t for t in model.transitions}
    atrans = {t.name: t for t in abs_sys.transitions}
    segments = len(schedule) + 1
    # every segment spans exactly horizon / segments, whatever h is
    steps = max(1, int(round(horizon / h / segments)))
    h = horizon / segments / steps
    loc = model.init_location
    x = x0
    w = CompiledPolys(list(alpha.at(loc)), len(model.vars))(x)
    defect = np.zeros(x.shape[0])
    blown = np.zeros(x.shape[0], dtype=bool)
    for seg in range(segments):
        fx = CompiledPolys(list(model.field_at(loc)), len(model.vars))
        fw = CompiledPolys(list(abs_sys.dynamics_at(loc)), len(abs_sys.vars))
        tx = rk4(fx, x, h, steps, blowup)
        tw = rk4(fw, w, h, steps, blowup)
        amap = CompiledPolys(list(alpha.at(loc)), len(model.vars))
        images = np.stack([amap(tx.states[i]) for i in range(steps + 1)])
        blown |= tx.blown | tw.blown
        defect = np.maximum(defect, _relative_defect(images, tw.states))
        x, w = tx.states[-1], tw.states[-1]
        if seg < len(schedule):
            t = trans[schedule[seg]]
            x = CompiledPolys(list(t.update), len(model.vars))(x)
            w = CompiledPolys(list(atrans[t.name].update), len(abs_sys.vars))(w)
            loc = t.target
    defect[blown] = 0.0
    return defect, blown


def check_flow_commutation(
    model: SystemModel,
    alpha: CobMap,
    abs_sys: AbstractSystem,
    cfg: SimConfig,
    schedule: Optional[Sequence[str]] = None,
) -> FlowReport:
    """Compare ``alpha(x(t))`` with the abstract trajectory from ``alpha(x0)``."""
    if model.kind == "discrete":
        return check_discrete_commutation(model, alpha, abs_sys, cfg)
    rng = random.Random(cfg.seed)
    x0 = np.array(sample_init(model.init, model.vars, cfg.samples, rng), dtype=float)
    if schedule is None:
        schedule = default_schedule(model) if model.kind == "hybrid" else []
    defects, blown = _flow_defects(model, alpha, abs_sys, x0, cfg.step, cfg.horizon, schedule, cfg.blowup)
    ok = bool((defects <= cfg.tol).all()) and not blown.all()
    note = f"schedule: {', '.join(schedule)}" if schedule else ""
    return FlowReport([float(d) for d in defects], [int(i) for i in np.nonzero(blown)[0]], ok, cfg.tol, note)


def order_ratio(
    model: SystemModel,
    alpha: CobMap,
    abs_sys: AbstractSystem,
    cfg: SimConfig,
    coarse: float = 0.02,
    floor: float = 1e-11,
) -> Optional[float]:
    """Ratio of the commutation defect at steps ``coarse`` and ``coarse / 2``.

    RK4 gives about 16.  Returns None when the coarse defect is already at
    round-off level (e.g. linear alpha, where RK4 commutes exactly with alpha).
    """
    if model.kind == "discrete":
        return None
    rng = random.Random(cfg.seed)
    x0 = np.array(sample_init(model.init, model.vars, cfg.samples, rng), dtype=float)
    schedule = default_schedule(model) if model.kind == "hybrid" else []
    d1, b1 = _flow_defects(model, alpha, abs_sys, x0, coarse, cfg.horizon, schedule, cfg.blowup)
    d2, b2 = _flow_defects(model, alpha, abs_sys, x0, coarse / 2, cfg.horizon, schedule, cfg.blowup)
    keep = ~(b1 | b2)
    if not keep.any():
        return None
    e1, e2 = d1[keep].max(), d2[keep].max()
    if e1 < floor or e2 == 0:
        return None
    return float(e1 / e2)


# -- discrete execution ------------------------------------------------------------------

def execute(model: SystemModel, x0: Sequence[Fraction], steps: int, rng: random.Random) -> List[Tuple[str, Tuple[Fraction, ...], Optional[Transition]]]:
    """Exact run choosing uniformly among enabled transitions.

    Each entry is ``(location, state, transition taken to get here)``.
    """
    loc = model.init_location
    x = tuple(Fraction(v) for v in x0)
    run = [(loc, x, None)]
    for _ in range(steps):
        enabled = [t for t in outgoing(model, loc) if t.guard.holds(x)]
        if not enabled:
            break
        t = rng.choice(enabled)
        x = tuple(p.evaluate(x) for p in t.update)
        loc = t.target
        run.append((loc, x, t))
    return run


def check_discrete_commutation(model: SystemModel, alpha: CobMap, abs_sys: AbstractSystem, cfg: SimConfig, steps: int = 50) -> FlowReport:
    """Exact: ``alpha_post(F(x)) == F'(alpha_pre(x))`` at every executed step."""
    rng = random.Random(cfg.seed)
    atrans = {t.name: t for t in abs_sys.transitions}
    defects = []
    for x0 in sample_init(model.init, model.vars, cfg.samples, rng, exact=True, width=10):
        run = execute(model, x0, steps, rng)
        bad = 0
        for (l0, x, _), (l1, y, t) in zip(run, run[1:]):
            w = [h.evaluate(x) for h in alpha.at(l0)]
            lhs = [h.evaluate(y) for h in alpha.at(l1)]
            rhs = [p.evaluate(w) for p in atrans[t.name].update]
            bad += sum(1 for a, b in zip(lhs, rhs) if a != b)
        defects.append(float(bad))
    return FlowReport(defects, [], all(d == 0 for d in defects), 0.0, "exact execution")


def check_equalities_exact(model: SystemModel, invariants: Mapping[str, Sequence[Polynomial]], cfg: SimConfig, steps: int = 50, samples: int = 50, width: float = 10) -> List[Tuple[str, Polynomial, Tuple[Fraction, ...]]]:
    """Run the original program and collect every violated equality."""
    rng = random.Random(cfg.seed)
    bad = []
    for x0 in sample_init(model.init, model.vars, samples, rng, exact=True, width=width):
        for loc, x, _ in execute(model, x0, steps, rng):
            for p in invariants.get(loc, ()):
                if p.evaluate(x) != 0:
                    bad.append((loc, p, x))
    return bad


def check_equalities_numeric(model: SystemModel, invariants: Sequence[Polynomial], cfg: SimConfig, rel: float = 1e-6) -> float:
    """Largest relative violation of the equalities along integrated trajectories."""
    if not invariants:
        return 0.0
    rng = random.Random(cfg.seed)
    x0 = np.array(sample_init(model.init, model.vars, cfg.samples, rng), dtype=float)
    tr = rk4(CompiledPolys(list(model.field_at(model.init_location))), x0, cfg.step, cfg.steps, cfg.blowup)
    worst = 0.0
    val = CompiledPolys(list(invariants), len(model.vars))
    mag = CompiledPolys([Polynomial(p.vars, {m: abs(c) for m, c in p.terms.items()}) for p in invariants], len(model.vars))
    for i in range(0, cfg.steps + 1, max(1, cfg.steps // 100)):
        x = tr.states[i][~tr.blown]
        v = np.abs(val(x))
        s = 1.0 + mag(np.abs(x))
        worst = max(worst, float((v / s).max(initial=0.0)))
    return worst


# -- conservation of e^{-tA} alpha -------------------------------------------------------

@dataclass
class ExpReport:
    drift: List[float]  # per component, relative
    passed: bool
    tol: float


def check_exp_conservation(a: Matrix, b: Sequence[Fraction], alpha: Sequence[Polynomial], field: VectorField, init: InitSet, cfg: SimConfig) -> ExpReport:
    """``e^{-tA} (alpha(x(t)), 1)`` (homogenised with b) must stay at its value at t = 0."""
    m = len(alpha)
    vars = field.vars
    at = np.zeros((m + 1, m + 1))
    for i in range(m):
        for j in range(m):
            at[i, j] = float(a[i, j])
        at[i, m] = float(b[i])
    rng = random.Random(cfg.seed)
    x0 = np.array(sample_init(init, vars, cfg.samples, rng), dtype=float)
    tr = rk4(CompiledPolys(list(field)), x0, cfg.step, cfg.steps, cfg.blowup)
    amap = CompiledPolys(list(alpha), len(vars))
    keep = ~tr.blown
    q0 = None
    drift = np.zeros(m)
    stride = max(1, cfg.steps // 50)
    for i in range(0, cfg.steps + 1, stride):
        w = amap(tr.states[i][keep])
        wt = np.hstack([w, np.ones((w.shape[0], 1))])
        q = wt @ expm(-tr.times[i] * at).T
        if q0 is None:
            q0 = q
        scale = 1.0 + np.abs(q0[:, :m]).max(axis=1, keepdims=True)
        drift = np.maximum(drift, (np.abs(q - q0)[:, :m] / scale).max(axis=0, initial=0.0))
    return ExpReport([float(d) for d in drift], bool((drift <= cfg.tol).all()), cfg.tol)
