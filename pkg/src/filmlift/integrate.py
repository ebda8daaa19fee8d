"""Adaptive Runge-Kutta integration of the profile equation.

Integration starts from a Taylor seed at y_start (the equation is
regular at the origin but a series start avoids wasting steps there),
proceeds with an embedded Dormand-Prince 5(4) pair, classifies every
accepted step against the invariant cones and stops at the first
terminal event: decisive cone entry, touch-down of the film height,
loss of finiteness, or reaching y_max.

Dense output is cubic Hermite on each accepted step, which is fourth
order accurate and sufficient for event localization, quadrature and
snapshot evaluation.  Event positions are localized by bisection on
the dense output to 1e-10 in y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .model import (
    ProblemConfig,
    ProfileState,
    Region,
    RegionTag,
    classify_raw,
    energy_E1_raw,
    energy_E2_raw,
    rhs_physical_raw,
)

__all__ = [
    "TerminalEvent",
    "SeedExpansion",
    "Trajectory",
    "seed",
    "integrate",
    "evolution_snapshots",
    "adaptive_rk45",
]

# Dormand-Prince 5(4) tableau.  _A: stage weights, _B5: fifth-order
# solution weights, _E: difference to the embedded fourth-order
# estimate.  The pair is FSAL: stage 7 is the RHS at the new point.
_C = (0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0)
_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0),
)
_B5 = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0)
_E = (
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)

_SAFETY = 0.9
_MIN_SCALE = 0.2
_MAX_SCALE = 5.0
_ORDER_EXP = -1.0 / 5.0
_EVENT_TOL = 1e-10  # absolute bisection tolerance in y


class TerminalEvent(Enum):
    ENTERED_SIGMA_PLUS = "EnteredSigmaPlus"
    ENTERED_SIGMA_MINUS = "EnteredSigmaMinus"
    TOUCH_DOWN = "TouchDown"
    NON_FINITE = "NonFinite"
    REACHED_Y_MAX = "ReachedYMax"


_ENTRY_EVENT = {1: TerminalEvent.ENTERED_SIGMA_PLUS, -1: TerminalEvent.ENTERED_SIGMA_MINUS}
_INT_REGION = {-1: Region.SIGMA_MINUS, 0: Region.UNDECIDED, 1: Region.SIGMA_PLUS}


@dataclass(frozen=True)
class SeedExpansion:
    """Taylor seed of the profile at the origin for one kappa.

    The series keeps two orders beyond the forced quartic term,

        f(y) = 1 + kappa y^2/2 - alpha y^4/24 + c6 y^6/360,
        c6 = alpha kappa (3m + 1)/2,

    where f_yyyy(0) = -alpha is forced by the ODE at the symmetric
    initial data.  Odd derivatives keep only odd powers (evenness of
    f).  At the default y_start = 1e-3 the truncation error of every
    component sits far below atol; the third derivative needs the c6
    term for that, the height alone would not.
    """

    kappa: float
    y_start: float
    m: float
    alpha_: float

    def eval(self, y: float) -> np.ndarray:
        """State array (f, fy, fyy, fyyy) of the series at 0 <= y <= y_start."""
        k, al = self.kappa, self.alpha_
        c6 = al * k * (3.0 * self.m + 1.0) / 2.0
        y2 = y * y
        return np.array(
            [
                1.0 + y2 * (k / 2.0 + y2 * (-al / 24.0 + y2 * (c6 / 360.0))),
                y * (k + y2 * (-al / 6.0 + y2 * (c6 / 60.0))),
                k + y2 * (-al / 2.0 + y2 * (c6 / 12.0)),
                y * (-al + y2 * (c6 / 3.0)),
            ]
        )

    @property
    def state(self) -> ProfileState:
        return ProfileState.from_array(self.y_start, self.eval(self.y_start))


def seed(kappa: float, cfg: ProblemConfig) -> SeedExpansion:
    return SeedExpansion(kappa=float(kappa), y_start=cfg.y_start, m=cfg.m, alpha_=cfg.exponent)


def _hermite(y0: float, h: float, s0: np.ndarray, d0: np.ndarray,
             s1: np.ndarray, d1: np.ndarray, y: float) -> np.ndarray:
    """Cubic Hermite value on one step [y0, y0 + h]."""
    t = (y - y0) / h
    t2 = t * t
    t3 = t2 * t
    return (
        (2.0 * t3 - 3.0 * t2 + 1.0) * s0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * s1
        + (t3 - t2) * h * d1
    )


class _DenseSolution:
    """Piecewise cubic Hermite interpolant over accepted steps."""

    def __init__(self, ys: np.ndarray, states: np.ndarray, derivs: np.ndarray):
        self.ys = ys            # (N,) accepted nodes, strictly increasing
        self.states = states    # (N, 4)
        self.derivs = derivs    # (N, 4) RHS at the nodes

    def __call__(self, y: float) -> np.ndarray:
        ys = self.ys
        if y <= ys[0]:
            return self.states[0].copy()
        if y >= ys[-1]:
            return self.states[-1].copy()
        i = int(np.searchsorted(ys, y, side="right")) - 1
        h = ys[i + 1] - ys[i]
        return _hermite(ys[i], h, self.states[i], self.derivs[i],
                        self.states[i + 1], self.derivs[i + 1], y)


def adaptive_rk45(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    s0: np.ndarray,
    t_end: float,
    rtol: float,
    atol: float,
    max_step: float = math.inf,
    first_step: float | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """Generic embedded RK 5(4) driver for smooth auxiliary systems.

    Returns (nodes, states, derivs, ok).  ok is False when the step
    size underflows or the RHS stops being finite; integration then
    ends at the last accepted node.  The profile integration uses the
    specialized event-aware loop in integrate() instead.
    """
    t = float(t0)
    s = np.asarray(s0, dtype=float).copy()
    span = t_end - t
    if span <= 0.0:
        raise ValueError("t_end must exceed t0")
    h = first_step if first_step is not None else min(span * 1e-3, max_step)
    nodes = [t]
    states = [s.copy()]
    k1 = np.asarray(rhs(t, s), dtype=float)
    derivs = [k1.copy()]
    ok = True
    ks: list[np.ndarray | None] = [None] * 7
    while t < t_end:
        h = min(h, t_end - t, max_step)
        if h < 1e-14 * max(1.0, abs(t)):
            ok = False
            break
        ks[0] = k1
        err = math.inf
        bad = False
        for i in range(1, 7):
            acc = s + h * sum(a * k for a, k in zip(_A[i], ks[:i]))
            if not np.all(np.isfinite(acc)):
                bad = True
                break
            ks[i] = np.asarray(rhs(t + _C[i] * h, acc), dtype=float)
            if not np.all(np.isfinite(ks[i])):
                bad = True
                break
        if not bad:
            s_new = s + h * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
            err_vec = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
            scale = atol + rtol * np.maximum(np.abs(s), np.abs(s_new))
            err = math.sqrt(float(np.mean((err_vec / scale) ** 2)))
        if bad or not math.isfinite(err):
            h *= _MIN_SCALE
            continue
        if err > 1.0:
            h *= max(_SAFETY * err**_ORDER_EXP, _MIN_SCALE)
            continue
        t += h
        s = s_new
        k1 = ks[6]  # FSAL
        nodes.append(t)
        states.append(s.copy())
        derivs.append(k1.copy())
        # err == 0 happens on exactly-zero solutions; grow at the cap
        h *= _MAX_SCALE if err == 0.0 else min(max(_SAFETY * err**_ORDER_EXP, _MIN_SCALE), _MAX_SCALE)
    return np.array(nodes), np.array(states), np.array(derivs), ok


@dataclass
class Trajectory:
    """Sampled solution of the profile equation for one kappa.

    Sample arrays include the exact initial row at y = 0 (where E2
    diverges and is stored as -inf), every accepted integrator step and
    any requested output stations, merged in increasing y.  Dense
    evaluation between nodes goes through the seed series on
    [0, y_start] and cubic Hermite beyond.
    """

    kappa: float
    cfg: ProblemConfig
    y: np.ndarray          # (N,) sample stations, strictly increasing from 0
    states: np.ndarray     # (N, 4) rows (f, fy, fyy, fyyy)
    E1: np.ndarray         # (N,)
    E2: np.ndarray         # (N,), E2[0] = -inf at the seed row
    tags: np.ndarray       # (N,) classifier verdicts in {-1, 0, +1}
    event: TerminalEvent
    y_event: float
    entry_tag: int         # first decisive verdict along the run (0 if none)
    y_entry: float         # where it was localized (nan if none)
    seed_exp: SeedExpansion
    dense: _DenseSolution
    n_steps: int
    n_rejected: int

    def tag_at(self, i: int) -> RegionTag:
        v = int(self.tags[i])
        return RegionTag(_INT_REGION[v], float(self.y[i]) if v != 0 else None)

    @property
    def entry(self) -> RegionTag:
        if self.entry_tag == 0:
            return RegionTag(Region.UNDECIDED, None)
        return RegionTag(_INT_REGION[self.entry_tag], self.y_entry)

    @property
    def terminal_state(self) -> ProfileState:
        return ProfileState.from_array(float(self.y[-1]), self.states[-1])

    def eval_state(self, y: float) -> np.ndarray:
        """Dense state at any 0 <= y <= terminal y."""
        if y < 0:
            raise ValueError("y must be nonnegative")
        if y <= self.cfg.y_start:
            return self.seed_exp.eval(y)
        return self.dense(y)

    def eval_f(self, y: Sequence[float] | np.ndarray) -> np.ndarray:
        return np.array([self.eval_state(float(v))[0] for v in np.atleast_1d(y)])


def integrate(
    kappa: float,
    cfg: ProblemConfig,
    y_out: Sequence[float] | None = None,
    stop_at_entry: bool = True,
    max_step: float = math.inf,
) -> Trajectory:
    """Integrate one shooting trajectory until its first terminal event.

    With stop_at_entry=False a decisive cone entry is recorded but the
    run continues to touch-down, y_max or breakdown; scan consumers use
    this to observe persistence of the verdict.  y_out requests extra
    dense-output sample stations merged into the returned arrays.
    max_step caps the accepted step size; diagnostics that difference
    stored nodes use it to keep the sampling density under control.
    """
    m, al = cfg.m, cfg.exponent
    eps_c = cfg.eps_c
    se = seed(kappa, cfg)

    y = cfg.y_start
    s = se.eval(y)
    k1 = rhs_physical_raw(y, s, m, al)
    nodes = [y]
    nstates = [s.copy()]
    nderivs = [k1.copy()]
    event = TerminalEvent.REACHED_Y_MAX
    y_event = cfg.y_max
    entry_tag = classify_raw(y, s, eps_c)
    y_entry = y if entry_tag != 0 else math.nan
    finished = False
    if entry_tag != 0 and stop_at_entry:
        # decisive straight out of the seed (e.g. kappa < 0)
        event, y_event, finished = _ENTRY_EVENT[entry_tag], y, True

    h = min(cfg.y_start / 5.0, max_step)
    n_steps = 0
    n_rejected = 0
    ks: list[np.ndarray | None] = [None] * 7

    while not finished:
        h = min(h, cfg.y_max - y, max_step)
        if h < 1e-14 * max(1.0, y):
            event, y_event = TerminalEvent.NON_FINITE, y
            break
        ks[0] = k1
        err = math.inf
        bad = False
        for i in range(1, 7):
            acc = s + h * sum(a * k for a, k in zip(_A[i], ks[:i]))
            if acc[0] <= 0.0 or not np.all(np.isfinite(acc)):
                bad = True
                break
            ks[i] = rhs_physical_raw(y + _C[i] * h, acc, m, al)
            if not np.all(np.isfinite(ks[i])):
                bad = True
                break
        if not bad:
            s_new = s + h * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
            err_vec = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
            scale = cfg.atol + cfg.rtol * np.maximum(np.abs(s), np.abs(s_new))
            err = math.sqrt(float(np.mean((err_vec / scale) ** 2)))
            if s_new[0] <= 0.0 or not np.all(np.isfinite(s_new)):
                bad = True
        if bad or not math.isfinite(err):
            n_rejected += 1
            h *= _MIN_SCALE
            continue
        if err > 1.0:
            n_rejected += 1
            h *= max(_SAFETY * err**_ORDER_EXP, _MIN_SCALE)
            continue

        # step accepted; localize events inside (y, y + h]
        y_new = y + h
        d_new = ks[6]
        y0, s0, d0 = y, s.copy(), ks[0].copy()

        def dense_at(q: float) -> np.ndarray:
            return _hermite(y0, h, s0, d0, s_new, d_new, q)

        cut: tuple[float, np.ndarray, TerminalEvent] | None = None
        if s_new[0] <= cfg.f_min:
            y_td = _first_true(lambda q: dense_at(q)[0] <= cfg.f_min, y0, y_new)
            cut = (y_td, dense_at(y_td), TerminalEvent.TOUCH_DOWN)
        tag_new = classify_raw(y_new, s_new, eps_c)
        if tag_new != 0 and entry_tag == 0:
            y_fl = _first_true(lambda q: classify_raw(q, dense_at(q), eps_c) != 0, y0, y_new)
            entry_tag = classify_raw(y_fl, dense_at(y_fl), eps_c) or tag_new
            y_entry = y_fl
            if stop_at_entry and (cut is None or y_fl < cut[0]):
                cut = (y_fl, dense_at(y_fl), _ENTRY_EVENT[entry_tag])

        if cut is not None:
            y, s = cut[0], cut[1]
            k1 = rhs_physical_raw(y, s, m, al)
            event, y_event = cut[2], y
            if y > nodes[-1]:
                nodes.append(y)
                nstates.append(s.copy())
                nderivs.append(k1.copy())
            break

        y, s, k1 = y_new, s_new, d_new
        n_steps += 1
        nodes.append(y)
        nstates.append(s.copy())
        nderivs.append(k1.copy())
        if y >= cfg.y_max * (1.0 - 1e-14):
            event, y_event = TerminalEvent.REACHED_Y_MAX, y
            break
        h *= min(max(_SAFETY * err**_ORDER_EXP, _MIN_SCALE), _MAX_SCALE)

    ny = np.array(nodes)
    nst = np.array(nstates)
    nde = np.array(nderivs)
    dense = _DenseSolution(ny, nst, nde)

    # merged sample stations: the y = 0 row, accepted nodes, requests
    stations = [np.array([0.0]), ny]
    if y_out is not None:
        req = np.asarray([v for v in y_out if 0.0 < v < float(ny[-1])], dtype=float)
        stations.append(req)
    ys = np.unique(np.concatenate(stations))
    N = len(ys)
    states = np.empty((N, 4))
    e1 = np.empty(N)
    e2 = np.empty(N)
    tags = np.zeros(N, dtype=np.int8)
    for i, yv in enumerate(ys):
        if yv == 0.0:
            sv = np.array([1.0, 0.0, kappa, 0.0])
            e2[i] = -np.inf
        else:
            sv = se.eval(yv) if yv <= cfg.y_start else dense(yv)
            e2[i] = energy_E2_raw(yv, sv, m, al)
            tags[i] = classify_raw(yv, sv, eps_c)
        states[i] = sv
        e1[i] = energy_E1_raw(yv, sv, m, al)

    return Trajectory(
        kappa=float(kappa),
        cfg=cfg,
        y=ys,
        states=states,
        E1=e1,
        E2=e2,
        tags=tags,
        event=event,
        y_event=float(y_event),
        entry_tag=entry_tag,
        y_entry=float(y_entry),
        seed_exp=se,
        dense=dense,
        n_steps=n_steps,
        n_rejected=n_rejected,
    )


def _first_true(pred: Callable[[float], bool], lo: float, hi: float) -> float:
    """First point in (lo, hi] where pred holds, by bisection.

    Assumes pred(hi) is True and pred(lo) is False; the returned value
    is within _EVENT_TOL of the flip.
    """
    while hi - lo > _EVENT_TOL:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def evolution_snapshots(
    traj: Trajectory,
    cfg: ProblemConfig,
    times: Sequence[float],
    x_grid: Sequence[float],
    a: float | None = None,
) -> np.ndarray:
    """Film height snapshots h(x, t) reconstructed from one profile.

    For m < 4: h = t^alpha f(|x| / t^alpha), valid for t > 0.  For
    m = 4: h = exp(b t) f(|x| exp(-b t)), any real t.  Stations beyond
    the computed range use the linear far-field extension f ~ a y; by
    default a is f/y at the terminal sample.
    """
    if len(traj.y) == 0:
        raise ValueError("empty trajectory")
    times = np.asarray(times, dtype=float)
    x_grid = np.asarray(x_grid, dtype=float)
    if cfg.m < 4.0 and np.any(times <= 0.0):
        raise ValueError("times must be positive for m < 4")
    al = cfg.exponent
    y_end = float(traj.y[-1])
    if a is None:
        a = float(traj.states[-1, 0] / y_end)
    out = np.empty((len(times), len(x_grid)))
    for i, t in enumerate(times):
        lift = math.exp(al * t) if cfg.m == 4.0 else t**al
        ys = np.abs(x_grid) / lift
        f = np.array([traj.eval_state(v)[0] if v <= y_end else a * v for v in ys])
        out[i] = lift * f
    return out
