"""Profile ODE for self-similar lifting of a thin film.

The film height h(x, t) obeys h_t + (h^m h_xxx)_x = 0 with mobility
exponent m in (0, 4].  Symmetric solutions lifting off a wetted point
have the form h = t^a f(|x| / t^a) for m < 4, with an exponential
analogue at m = 4.  The profile f satisfies

    a (f - y f_y) + (f^m f_yyy)_y = 0,   f(0) = 1, f_y(0) = 0, f_yyy(0) = 0,

where the free curvature f_yy(0) = kappa is selected by shooting so
that f(y) / y tends to a positive limit.  This module holds the state
types, the right-hand sides in physical and logarithmic phase
coordinates, the cone-region classifier and the two energy functionals
used to certify trajectories.

Functions with a _raw suffix are the array kernels used in integration
loops; the public wrappers take the typed states and a ProblemConfig.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

__all__ = [
    "ProblemConfig",
    "ProfileState",
    "PhaseState",
    "Region",
    "RegionTag",
    "alpha",
    "rhs_physical",
    "to_phase",
    "from_phase",
    "phase_rhs",
    "classify",
    "energy_E1",
    "energy_E2",
]


def alpha(m: float, b: float | None = None) -> float:
    """Similarity exponent for mobility m.

    For m < 4 the lifting rate is algebraic, h(0, t) = t^alpha with
    alpha = 1 / (4 - m).  At the borderline m = 4 the lifting is
    exponential and its rate b > 0 is a free parameter; b then plays
    the role of alpha in the profile equation.
    """
    if not 0.0 < m <= 4.0:
        raise ValueError(f"mobility exponent m={m} outside (0, 4]")
    if m == 4.0:
        if b is None or b <= 0.0:
            raise ValueError("m = 4 requires an exponential rate b > 0")
        return float(b)
    if b is not None:
        raise ValueError("rate b is only meaningful for m = 4")
    return 1.0 / (4.0 - m)


@dataclass(frozen=True)
class ProblemConfig:
    """Parameters of one shooting problem.

    y_start is where integration leaves the Taylor seed, f_min the
    touch-down floor, eps_c the classification margin.  rtol/atol feed
    the adaptive stepper.  Defaults are safe for every m in (0, 4].
    """

    m: float
    b: float | None = None
    y_start: float = 1e-3
    y_max: float = 50.0
    f_min: float = 1e-8
    rtol: float = 1e-10
    atol: float = 1e-12
    eps_c: float = 1e-9
    kappa_tol: float = 1e-10

    def __post_init__(self) -> None:
        alpha(self.m, self.b)  # validates m and b together
        if self.y_start <= 0 or self.y_max <= self.y_start:
            raise ValueError("need 0 < y_start < y_max")
        if min(self.f_min, self.eps_c, self.rtol, self.atol, self.kappa_tol) <= 0:
            raise ValueError("tolerances and floors must be positive")

    @property
    def exponent(self) -> float:
        return alpha(self.m, self.b)

    def with_y_max(self, y_max: float) -> "ProblemConfig":
        return replace(self, y_max=y_max)


@dataclass(frozen=True)
class ProfileState:
    """Profile and its first three derivatives at one station y."""

    y: float
    f: float
    fy: float
    fyy: float
    fyyy: float

    def as_array(self) -> np.ndarray:
        return np.array([self.f, self.fy, self.fyy, self.fyyy])

    @staticmethod
    def from_array(y: float, s: np.ndarray) -> "ProfileState":
        return ProfileState(float(y), float(s[0]), float(s[1]), float(s[2]), float(s[3]))


@dataclass(frozen=True)
class PhaseState:
    """Cone-scaled coordinates at xi = ln y.

    phi compares f against the critical scaling y^(4/m); w is the
    logarithmic slope y f_y / f; q and z are the matching rescalings
    of the second and third derivative.  On the asymptotic cone f = a y
    the triple (w, q, z) sits at (1, 0, 0).
    """

    xi: float
    phi: float
    w: float
    q: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.phi, self.w, self.q, self.z])


class Region(Enum):
    """The two invariant cones and the undecided middle."""

    SIGMA_PLUS = "SigmaPlus"
    SIGMA_MINUS = "SigmaMinus"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class RegionTag:
    """Classifier verdict, with the station where it was detected."""

    region: Region
    y: float | None = None

    @property
    def decided(self) -> bool:
        return self.region is not Region.UNDECIDED


# ---------------------------------------------------------------- kernels


def rhs_physical_raw(y: float, s: np.ndarray, m: float, alpha_: float) -> np.ndarray:
    """Derivative of (f, f_y, f_yy, f_yyy) in y.

    Solves the profile equation for the top derivative,

        f_yyyy = [-alpha (f - y f_y) - m f^(m-1) f_y f_yyy] / f^m,

    valid while f > 0.  Fractional powers go through exp(m ln f), which
    is safe because integration halts before f reaches the floor.
    """
    f, fy, fyy, fyyy = s
    fm = math.exp(m * math.log(f)) if f > 0.0 else math.nan
    f4 = (-alpha_ * (f - y * fy) - m * (fm / f) * fy * fyyy) / fm
    return np.array([fy, fyy, fyyy, f4])


def classify_raw(y: float, s: np.ndarray, eps_c: float) -> int:
    """Cone test on raw signals; returns -1, 0 or +1.

    Membership of the cones reduces, for y > 0 and f > 0, to the signs
    of (y f_y - f, f_yy, f_yyy) because the power prefactors of the
    phase variables are strictly positive.  The slope signal carries a
    relative margin eps_c (1 + |f|) since f grows linearly in the far
    field; the curvature signals use the absolute margin eps_c.
    """
    f = s[0]
    g = y * s[1] - f
    sm = eps_c * (1.0 + abs(f))
    if g > sm and s[2] > eps_c and s[3] > eps_c:
        return 1
    if g < -sm and s[2] < -eps_c and s[3] < -eps_c:
        return -1
    return 0


def energy_E1_raw(y: float, s: np.ndarray, m: float, alpha_: float) -> float:
    f, fy, fyy, fyyy = s
    return alpha_ * (f * fy - 0.5 * y * fy * fy) + f**m * fyy * fyyy


def energy_E2_raw(y: float, s: np.ndarray, m: float, alpha_: float) -> float:
    f, fy, fyy, fyyy = s
    g = f - y * fy
    return -alpha_ * g * g / (2.0 * y) + f**m * fyy * fyyy


def to_phase_raw(y: float, s: np.ndarray, m: float) -> tuple[float, np.ndarray]:
    f, fy, fyy, fyyy = s
    return math.log(y), np.array(
        [
            f * y ** (-4.0 / m),
            y * fy / f,
            y ** (2.0 / 3.0) * f ** ((m - 3.0) / 3.0) * fyy,
            y ** (1.0 / 3.0) * f ** ((2.0 * m - 3.0) / 3.0) * fyyy,
        ]
    )


def from_phase_raw(xi: float, p: np.ndarray, m: float) -> tuple[float, np.ndarray]:
    phi, w, q, z = p
    y = math.exp(xi)
    f = phi * y ** (4.0 / m)
    return y, np.array(
        [
            f,
            w * f / y,
            q * y ** (-2.0 / 3.0) * f ** ((3.0 - m) / 3.0),
            z * y ** (-1.0 / 3.0) * f ** ((3.0 - 2.0 * m) / 3.0),
        ]
    )


def phase_rhs_raw(p: np.ndarray, m: float, alpha_: float) -> np.ndarray:
    """Autonomous flow of (phi, w, q, z) in xi = ln y.

    Derived from rhs_physical by the chain rule.  The cone line
    (phi, 1, 0, 0) is a line of fixed points exactly when m = 4, which
    is the structural reason the borderline case decays algebraically
    in y while m < 4 decays double-exponentially.
    """
    phi, w, q, z = p
    s = phi ** (-m / 3.0)
    return np.array(
        [
            phi * (w - 4.0 / m),
            q * s + w * (1.0 - w),
            (2.0 + (m - 3.0) * w) / 3.0 * q + z * s,
            alpha_ * (w - 1.0) * s + (1.0 - (m + 3.0) * w) / 3.0 * z,
        ]
    )


# ------------------------------------------------------------ public ops


def rhs_physical(s: ProfileState, cfg: ProblemConfig) -> np.ndarray:
    """Derivative (f_y, f_yy, f_yyy, f_yyyy) at a typed state."""
    if s.f <= 0.0:
        raise ValueError("rhs_physical needs f > 0")
    return rhs_physical_raw(s.y, s.as_array(), cfg.m, cfg.exponent)


def to_phase(s: ProfileState, m: float) -> PhaseState:
    """Map a physical sample with y > 0, f > 0 to cone coordinates."""
    if s.y <= 0.0 or s.f <= 0.0:
        raise ValueError("phase coordinates need y > 0 and f > 0")
    xi, p = to_phase_raw(s.y, s.as_array(), m)
    return PhaseState(xi, float(p[0]), float(p[1]), float(p[2]), float(p[3]))


def from_phase(p: PhaseState, m: float) -> ProfileState:
    """Invert to_phase; exact algebraic inversion."""
    if p.phi <= 0.0:
        raise ValueError("phase state needs phi > 0")
    y, s = from_phase_raw(p.xi, p.as_array(), m)
    return ProfileState.from_array(y, s)


def phase_rhs(p: PhaseState, cfg: ProblemConfig) -> np.ndarray:
    """Right-hand side of the phase flow at a typed state."""
    if p.phi <= 0.0:
        raise ValueError("phase state needs phi > 0")
    return phase_rhs_raw(p.as_array(), cfg.m, cfg.exponent)


def classify(s: ProfileState, cfg: ProblemConfig) -> RegionTag:
    """Margin classifier for the invariant cones at one sample."""
    if s.y <= 0.0 or s.f <= 0.0:
        raise ValueError("classification needs y > 0 and f > 0")
    v = classify_raw(s.y, s.as_array(), cfg.eps_c)
    if v > 0:
        return RegionTag(Region.SIGMA_PLUS, s.y)
    if v < 0:
        return RegionTag(Region.SIGMA_MINUS, s.y)
    return RegionTag(Region.UNDECIDED, None)


def energy_E1(s: ProfileState, cfg: ProblemConfig) -> float:
    """First energy, zero at the origin and nondecreasing in y.

    E1 = alpha (f f_y - y f_y^2 / 2) + f^m f_yy f_yyy, with
    dE1/dy = alpha f_y^2 / 2 + f^m f_yyy^2 >= 0 along solutions.
    """
    return energy_E1_raw(s.y, s.as_array(), cfg.m, cfg.exponent)


def energy_E2(s: ProfileState, cfg: ProblemConfig) -> float:
    """Second energy, diverging to -inf at the origin, increasing in y.

    E2 = -alpha (f - y f_y)^2 / (2 y) + f^m f_yy f_yyy, defined for
    y > 0 only.
    """
    if s.y <= 0.0:
        raise ValueError("E2 is defined for y > 0 only")
    return energy_E2_raw(s.y, s.as_array(), cfg.m, cfg.exponent)
