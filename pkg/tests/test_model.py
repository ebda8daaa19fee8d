import math

import numpy as np
import pytest

from filmlift.model import (PhaseState, ProblemConfig, ProfileState, Region,
                            alpha, classify, classify_raw, energy_E1,
                            energy_E2, from_phase, from_phase_raw, phase_rhs,
                            phase_rhs_raw, rhs_physical, rhs_physical_raw,
                            to_phase, to_phase_raw)


def test_alpha_values():
    assert alpha(2.0) == 0.5
    assert alpha(1.0) == pytest.approx(1.0 / 3.0, rel=1e-15)
    assert alpha(3.5) == 2.0
    assert alpha(4.0, b=0.7) == 0.7


def test_alpha_rejects_bad_inputs():
    with pytest.raises(ValueError):
        alpha(0.0)
    with pytest.raises(ValueError):
        alpha(4.5)
    with pytest.raises(ValueError):
        alpha(4.0)  # missing rate
    with pytest.raises(ValueError):
        alpha(4.0, b=-1.0)
    with pytest.raises(ValueError):
        alpha(2.0, b=1.0)  # rate is meaningless below m = 4


def test_config_validation():
    with pytest.raises(ValueError):
        ProblemConfig(m=2.0, y_start=1.0, y_max=0.5)
    with pytest.raises(ValueError):
        ProblemConfig(m=2.0, rtol=-1e-10)
    cfg = ProblemConfig(m=4.0, b=2.0)
    assert cfg.exponent == 2.0
    assert cfg.with_y_max(99.0).y_max == 99.0
    assert cfg.with_y_max(99.0).m == cfg.m


def test_rhs_solves_profile_equation():
    # plug the computed top derivative back into the defining relation
    cfg = ProblemConfig(m=2.5)
    s = ProfileState(y=1.3, f=1.7, fy=0.4, fyy=-0.2, fyyy=0.11)
    d = rhs_physical(s, cfg)
    al, m = cfg.exponent, cfg.m
    lhs = al * (s.f - s.y * s.fy) + m * s.f ** (m - 1) * s.fy * s.fyyy + s.f**m * d[3]
    assert abs(lhs) < 1e-13
    assert d[0] == s.fy and d[1] == s.fyy and d[2] == s.fyyy


def test_rhs_rejects_nonpositive_height():
    cfg = ProblemConfig(m=2.0)
    with pytest.raises(ValueError):
        rhs_physical(ProfileState(1.0, 0.0, 0.1, 0.1, 0.1), cfg)


def test_phase_round_trip_random_states():
    rng = np.random.default_rng(3)
    for m in (0.5, 1.0, 2.0, 3.0, 4.0):
        for _ in range(50):
            y = float(rng.uniform(0.1, 30.0))
            s = np.array([rng.uniform(0.2, 5.0), *rng.normal(size=3)])
            xi, p = to_phase_raw(y, s, m)
            y2, s2 = from_phase_raw(xi, p, m)
            assert abs(y2 - y) < 1e-12 * y
            assert np.all(np.abs(s2 - s) <= 1e-11 * (1.0 + np.abs(s)))


def test_phase_round_trip_typed():
    s = ProfileState(2.0, 3.0, 1.4, 0.2, -0.05)
    p = to_phase(s, 2.0)
    back = from_phase(p, 2.0)
    assert back.y == pytest.approx(s.y, rel=1e-14)
    assert back.f == pytest.approx(s.f, rel=1e-14)
    with pytest.raises(ValueError):
        to_phase(ProfileState(0.0, 1.0, 0.0, 0.0, 0.0), 2.0)
    with pytest.raises(ValueError):
        from_phase(PhaseState(0.0, -1.0, 0.0, 0.0, 0.0), 2.0)


def test_phase_rhs_matches_physical_flow():
    """d(phase)/dxi from the chain rule must equal the closed form."""
    cfg = ProblemConfig(m=2.0)
    m, al = cfg.m, cfg.exponent
    y = 3.0
    s = np.array([2.2, 0.9, 0.05, -0.02])
    d = rhs_physical_raw(y, s, m, al)
    eps = 1e-7
    s1 = s + eps * d
    xi0, p0 = to_phase_raw(y, s, m)
    xi1, p1 = to_phase_raw(y + eps, s1, m)
    fd = (p1 - p0) / (xi1 - xi0)
    closed = phase_rhs_raw(p0, m, al)
    assert np.all(np.abs(fd - closed) < 1e-5 * (1.0 + np.abs(closed)))


def test_phase_cone_is_fixed_line_only_at_m4():
    # on the ray f = a y: (w, q, z) = (1, 0, 0) and phi evolves freely
    for m, frozen in ((4.0, True), (2.0, False)):
        al = 1.0 if m == 4.0 else alpha(m)
        p = np.array([0.7, 1.0, 0.0, 0.0])
        d = phase_rhs_raw(p, m, al)
        assert np.allclose(d[1:], 0.0, atol=1e-15)
        assert (abs(d[0]) < 1e-15) == frozen


def test_classifier_margins():
    eps = 1e-9
    plus = np.array([1.0, 2.0, 1e-3, 1e-3])  # y fy - f = 1 > 0
    minus = np.array([1.0, -2.0, -1e-3, -1e-3])
    on_edge = np.array([1.0, 1.0, 1e-3, 1e-3])  # slope signal exactly 0
    assert classify_raw(1.0, plus, eps) == 1
    assert classify_raw(1.0, minus, eps) == -1
    assert classify_raw(1.0, on_edge, eps) == 0
    # one signal inside its margin blocks the verdict
    assert classify_raw(1.0, np.array([1.0, 2.0, eps / 2, 1e-3]), eps) == 0
    assert classify_raw(1.0, np.array([1.0, 2.0, 1e-3, -1e-3]), eps) == 0


def test_classify_typed_and_guards():
    cfg = ProblemConfig(m=2.0)
    tag = classify(ProfileState(1.0, 1.0, 2.0, 1e-3, 1e-3), cfg)
    assert tag.region is Region.SIGMA_PLUS and tag.decided and tag.y == 1.0
    tag = classify(ProfileState(1.0, 1.0, 0.0, 0.0, 0.0), cfg)
    assert tag.region is Region.UNDECIDED and not tag.decided
    with pytest.raises(ValueError):
        classify(ProfileState(1.0, -1.0, 0.0, 0.0, 0.0), cfg)


def test_energy_derivatives():
    """dE1/dy = alpha fy^2/2 + f^m fyyy^2 and its E2 analogue."""
    cfg = ProblemConfig(m=1.5)
    m, al = cfg.m, cfg.exponent
    y = 2.0
    s = np.array([1.8, 0.6, 0.1, -0.3])
    d = rhs_physical_raw(y, s, m, al)
    eps = 1e-6
    s1 = s + eps * d

    e1 = energy_E1(ProfileState.from_array(y, s), cfg)
    e1p = energy_E1(ProfileState.from_array(y + eps, s1), cfg)
    want = al * s[1] ** 2 / 2.0 + s[0] ** m * s[3] ** 2
    assert (e1p - e1) / eps == pytest.approx(want, rel=1e-4)

    e2 = energy_E2(ProfileState.from_array(y, s), cfg)
    e2p = energy_E2(ProfileState.from_array(y + eps, s1), cfg)
    g = s[0] - y * s[1]
    want2 = al * g * g / (2.0 * y * y) + s[0] ** m * s[3] ** 2
    assert (e2p - e2) / eps == pytest.approx(want2, rel=1e-4)

    with pytest.raises(ValueError):
        energy_E2(ProfileState.from_array(0.0, s), cfg)
