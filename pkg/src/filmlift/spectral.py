"""Characteristic roots of the m = 4 far-field linearization.

At m = 4 the approach to the cone is algebraic in y: perturbations of
the Phi = a fixed point carry exponents that solve the monic cubic

    z^3 + 2 z^2 - z - (2 + b/a^4) = 0.

The decaying pair sets the observable rate lambda0 (and oscillation
omega0); the tail check regresses W - 1 against that mode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .integrate import TerminalEvent, Trajectory
from .model import to_phase_raw

_CONJ_TOL = 1e-12
_NOISE_FLOOR = 1e3 * np.finfo(float).eps


class WindowTooShort(RuntimeError):
    """Fewer than 10 samples in the tail-fit window."""


class SignalBelowNoise(RuntimeError):
    """max |W-1| on the window is already at the integrator noise floor."""


@dataclass(frozen=True)
class SpectralResult:
    """Roots of the far-field cubic for one (a, b) pair.

    z0 is the decaying root with the largest (least negative) real
    part, the complex-pair member with Im >= 0 when there is a tie;
    lambda0 = Re z0 < -1, omega0 = |Im z0|.
    """

    a: float
    b: float
    roots: tuple[complex, complex, complex]
    z0: complex
    lambda0: float
    omega0: float


@dataclass(frozen=True)
class TailCheck:
    lambda_measured: float
    amplitudes: tuple[float, float]     # cos/sin amplitudes of e^{lambda0 xi}
    residual_rel: float
    window: tuple[float, float]         # in y
    passed: bool


def characteristic_roots(a: float, b: float) -> SpectralResult:
    """Solve the far-field cubic via companion-matrix eigenvalues."""
    if not (a > 0.0 and math.isfinite(a)):
        raise ValueError("far-field slope a must be positive")
    if not (b > 0.0 and math.isfinite(b)):
        raise ValueError("exponential rate b must be positive")
    c = 2.0 + b / a**4
    roots = np.roots([1.0, 2.0, -1.0, -c]).astype(complex)
    # one Newton step tightens the eigenvalue residual
    for i, z in enumerate(roots):
        dp = 3.0 * z * z + 4.0 * z - 1.0
        if abs(dp) > 1e-8:
            roots[i] = z - (((z + 2.0) * z - 1.0) * z - c) / dp
    # symmetrize a conjugate pair so Im z1 == -Im z2 exactly
    order = np.argsort(roots.real)
    roots = roots[order]
    if abs(roots[0].real - roots[1].real) <= _CONJ_TOL * max(1.0, abs(roots[0])):
        mean_re = 0.5 * (roots[0].real + roots[1].real)
        mean_im = 0.5 * abs(roots[0].imag - roots[1].imag)
        if mean_im > _CONJ_TOL * max(1.0, abs(roots[0])):
            roots[0] = complex(mean_re, -mean_im)
            roots[1] = complex(mean_re, +mean_im)
        else:
            roots[0] = complex(roots[0].real, 0.0)
            roots[1] = complex(roots[1].real, 0.0)
    roots[2] = complex(roots[2].real, 0.0) if abs(roots[2].imag) <= _CONJ_TOL * max(1.0, abs(roots[2])) else roots[2]

    neg = [z for z in roots if z.real < 0.0]
    pos = [z for z in roots if z.real > 0.0]
    if len(pos) != 1 or len(neg) != 2:
        raise ValueError(f"unexpected root signs for a={a}, b={b}: {roots}")
    z0 = max(neg, key=lambda z: (z.real, z.imag))
    return SpectralResult(a=a, b=b, roots=tuple(roots), z0=z0,
                          lambda0=z0.real, omega0=abs(z0.imag))


def fit_tail(xi: np.ndarray, signal: np.ndarray, lambda0: float,
             omega0: float) -> tuple[float, float, float]:
    """Amplitudes and relative residual of signal ~ e^{lambda0 xi} osc.

    Basis columns are normalized at the window's right edge to keep the
    design matrix well scaled; returned amplitudes refer to the plain
    e^{lambda0 xi} cos/sin basis.  With omega0 == 0 the sine column is
    dropped and its amplitude reported as 0.
    """
    xi_end = xi[-1]
    env = np.exp(lambda0 * (xi - xi_end))
    if omega0 > 0.0:
        A = np.column_stack([env * np.cos(omega0 * xi), env * np.sin(omega0 * xi)])
    else:
        A = env[:, None]
    coef, *_ = np.linalg.lstsq(A, signal, rcond=None)
    resid = float(np.linalg.norm(A @ coef - signal) / np.linalg.norm(signal))
    scale = math.exp(-lambda0 * xi_end)
    a_cos = float(coef[0]) * scale
    a_sin = float(coef[1]) * scale if omega0 > 0.0 else 0.0
    return a_cos, a_sin, resid


def tail_expansion_check(traj: Trajectory, spec: SpectralResult) -> TailCheck:
    """Regress W - 1 on the decaying mode over the last two decades.

    The measured exponent comes from scanning lambda over
    [2 lambda0, lambda0/2] at fixed omega0 and keeping the residual
    minimizer; pass/fail reflects the fixed-lambda0 residual against a
    5 percent bar.
    """
    sel = traj.y > 0.0
    y = traj.y[sel]
    y_end = y[-1]
    win = y >= y_end / 100.0
    yw = y[win]
    if len(yw) < 10:
        raise WindowTooShort(f"{len(yw)} samples in [y_end/100, y_end]")
    states = traj.states[sel][win]
    sig = np.empty(len(yw))
    for i, (yi, s) in enumerate(zip(yw, states)):
        _, p = to_phase_raw(yi, s, traj.cfg.m)
        sig[i] = p[1] - 1.0
    if np.max(np.abs(sig)) < _NOISE_FLOOR:
        raise SignalBelowNoise("tail of W-1 is below the integration noise floor")
    xi = np.log(yw)
    a_cos, a_sin, resid0 = fit_tail(xi, sig, spec.lambda0, spec.omega0)

    lam_best, res_best = spec.lambda0, resid0
    for lam in np.linspace(2.0 * spec.lambda0, 0.5 * spec.lambda0, 121):
        _, _, res = fit_tail(xi, sig, float(lam), spec.omega0)
        if res < res_best:
            lam_best, res_best = float(lam), res
    return TailCheck(lambda_measured=lam_best, amplitudes=(a_cos, a_sin),
                     residual_rel=resid0, window=(float(yw[0]), float(y_end)),
                     passed=resid0 <= 0.05)
