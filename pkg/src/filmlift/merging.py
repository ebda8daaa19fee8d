"""First-order correction for two merging droplets.

A droplet pair with cone opening a and curvature b_drop at the contact
point adds a -b_drop x^2 term to the initial data.  To first order the
lifting profile f0 acquires a correction P solving the linear balance

    alpha (2 P - y P_y) + (f0^m P_yyy)_y + m (f0^{m-1} f0_yyy P)_y = 0

with P even at the origin and P ~ -b_drop y^2 at the matching radius.
The problem is linear, so two basis integrations (unit P(0), unit
P_yy(0)) span all solutions and the far-field condition selects the
combination.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrate import TerminalEvent, Trajectory, _DenseSolution, adaptive_rk45
from .model import ProblemConfig, rhs_physical_raw


class BasisDegenerate(RuntimeError):
    """The two basis responses are numerically collinear at y_match."""


@dataclass(frozen=True)
class CorrectionProblem:
    base: Trajectory            # accepted lifting profile f0
    b_drop: float               # droplet curvature, >= 0
    y_match: float              # matching radius inside the base range
    rtol: float = 1e-10
    atol: float = 1e-12

    def __post_init__(self) -> None:
        if self.base.event is not TerminalEvent.REACHED_Y_MAX:
            raise ValueError("correction needs an accepted base profile")
        if not self.b_drop >= 0.0:
            raise ValueError("b_drop must be nonnegative")
        ys = self.base.cfg.y_start
        if not ys < self.y_match <= float(self.base.y[-1]):
            raise ValueError("y_match must lie inside the base trajectory")


@dataclass(frozen=True)
class CorrectionSolution:
    """Sampled correction and the shooting parameters that produced it."""

    y: np.ndarray               # sample stations on [y_start, y_match]
    states: np.ndarray          # (N, 4) rows P, P_y, P_yy, P_yyy
    p0: float                   # P(0)
    q0: float                   # P_yy(0)
    residual_match: float       # |P(y_match)/y_match^2 + b_drop|
    problem: CorrectionProblem


def correction_rhs(base: Trajectory):
    """RHS of the linearized balance as a first-order system in y.

    The base profile enters through its dense output; its fourth
    derivative is recovered from the profile equation itself.
    """
    cfg = base.cfg
    m, al = cfg.m, cfg.exponent

    def rhs(y: float, s: np.ndarray) -> np.ndarray:
        P, Py, Pyy, Pyyy = s
        f0 = base.eval_state(y)
        f, fy, fyy, fyyy = f0
        f4 = rhs_physical_raw(y, f0, m, al)[3]
        fm = f ** m
        fm1 = f ** (m - 1.0)
        # m (f0^{m-1} f0_yyy P)_y, product rule
        expand = m * ((m - 1.0) * f ** (m - 2.0) * fy * fyyy * P
                      + fm1 * f4 * P + fm1 * fyyy * Py)
        P4 = (al * (y * Py - 2.0 * P) - m * fm1 * fy * Pyyy - expand) / fm
        return np.array([Py, Pyy, Pyyy, P4])

    return rhs


def _p_seed(p0: float, q0: float, y: float, m: float, al: float) -> np.ndarray:
    # even series P = p0 + q0 y^2/2 + alpha (m-2) p0 y^4/24 + O(y^6)
    c4 = al * (m - 2.0) * p0
    return np.array([
        p0 + q0 * y * y / 2.0 + c4 * y**4 / 24.0,
        q0 * y + c4 * y**3 / 6.0,
        q0 + c4 * y * y / 2.0,
        c4 * y,
    ])


def solve_correction(prob: CorrectionProblem, n_samples: int = 513) -> CorrectionSolution:
    """Shoot the two correction bases and match P/y^2 -> -b_drop.

    The coefficients minimize the deviation of P/y^2 from -b_drop and
    of its derivative from 0 over the outer fifth of [y_start, y_match];
    a third all-zero integration guards the linear solver itself.
    """
    cfg = prob.base.cfg
    m, al = cfg.m, cfg.exponent
    ys = cfg.y_start
    rhs = correction_rhs(prob.base)

    # keep integration nodes at least as dense as the output grid so the
    # emitted samples are accurate at grid resolution, not just at nodes
    step_cap = (prob.y_match - ys) / (n_samples - 1)
    dense: list[_DenseSolution] = []
    for p0, q0 in ((1.0, 0.0), (0.0, 1.0), (0.0, 0.0)):
        nodes, states, derivs, ok = adaptive_rk45(
            rhs, ys, _p_seed(p0, q0, ys, m, al), prob.y_match, prob.rtol,
            prob.atol, max_step=step_cap)
        if not ok:
            raise BasisDegenerate(f"basis run ({p0}, {q0}) broke down")
        if p0 == 0.0 and q0 == 0.0:
            drift = float(np.max(np.abs(states)))
            if drift > 100.0 * prob.atol:
                raise BasisDegenerate(f"zero solution drifted to {drift:.3e}")
        else:
            dense.append(_DenseSolution(np.asarray(nodes), np.asarray(states),
                                        np.asarray(derivs)))

    window = np.linspace(prob.y_match - 0.2 * (prob.y_match - ys), prob.y_match, 64)
    rows, target = [], []
    for yq in window:
        s1, s2 = dense[0](yq), dense[1](yq)
        y2 = yq * yq
        rows.append([s1[0] / y2, s2[0] / y2])
        target.append(-prob.b_drop)
        rows.append([s1[1] / y2 - 2.0 * s1[0] / (y2 * yq),
                     s2[1] / y2 - 2.0 * s2[0] / (y2 * yq)])
        target.append(0.0)
    A = np.asarray(rows)
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[0] <= 0.0 or sv[-1] / sv[0] < 1e-12:
        raise BasisDegenerate(f"matching system singular values {sv}")
    coef, *_ = np.linalg.lstsq(A, np.asarray(target), rcond=None)
    c1, c2 = float(coef[0]), float(coef[1])

    yg = np.linspace(ys, prob.y_match, n_samples)
    states = np.array([c1 * dense[0](v) + c2 * dense[1](v) for v in yg])
    end = c1 * dense[0](prob.y_match)[0] + c2 * dense[1](prob.y_match)[0]
    residual = abs(end / prob.y_match**2 + prob.b_drop)
    return CorrectionSolution(y=yg, states=states, p0=c1, q0=c2,
                              residual_match=residual, problem=prob)
