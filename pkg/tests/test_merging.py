import numpy as np
import pytest

import filmlift.merging as mg
from filmlift.integrate import integrate
from filmlift.merging import (BasisDegenerate, CorrectionProblem,
                              solve_correction)
from filmlift.model import ProblemConfig

from conftest import merge_fd_residual


def test_matching_residual_decreases_outward(merge_base):
    near = solve_correction(CorrectionProblem(base=merge_base, b_drop=1.0,
                                              y_match=15.0))
    far = solve_correction(CorrectionProblem(base=merge_base, b_drop=1.0,
                                             y_match=30.0))
    assert near.residual_match == pytest.approx(3.01e-4, rel=0.3)
    assert far.residual_match == pytest.approx(5.33e-5, rel=0.3)
    assert far.residual_match <= near.residual_match
    # matched limit: P / y^2 -> -b_drop at the outer edge
    assert far.states[-1, 0] / far.y[-1] ** 2 == pytest.approx(-1.0, abs=1e-3)


def test_zero_droplet_gives_zero_correction(merge_base):
    sol = solve_correction(CorrectionProblem(base=merge_base, b_drop=0.0,
                                             y_match=20.0))
    assert sol.p0 == 0.0 and sol.q0 == 0.0
    assert np.all(sol.states == 0.0)
    assert sol.residual_match == 0.0


def test_correction_is_homogeneous_in_b(merge_base):
    one = solve_correction(CorrectionProblem(base=merge_base, b_drop=1.0,
                                             y_match=20.0))
    two = solve_correction(CorrectionProblem(base=merge_base, b_drop=2.0,
                                             y_match=20.0))
    assert two.p0 == 2.0 * one.p0 and two.q0 == 2.0 * one.q0
    np.testing.assert_array_equal(two.states, 2.0 * one.states)


def test_solution_satisfies_equation_in_divergence_form(merge_base):
    sol = solve_correction(CorrectionProblem(base=merge_base, b_drop=1.0,
                                             y_match=30.0))
    assert merge_fd_residual(sol, merge_base) <= 1e-4


def test_problem_validation(merge_base):
    with pytest.raises(ValueError):
        CorrectionProblem(base=merge_base, b_drop=-1.0, y_match=20.0)
    with pytest.raises(ValueError):
        CorrectionProblem(base=merge_base, b_drop=1.0, y_match=1e9)
    with pytest.raises(ValueError):
        CorrectionProblem(base=merge_base, b_drop=1.0, y_match=1e-4)
    decided = integrate(0.3, ProblemConfig(m=2.0))  # hits the minus cone
    with pytest.raises(ValueError):
        CorrectionProblem(base=decided, b_drop=1.0, y_match=5.0)


def test_zero_basis_drift_guard(merge_base, monkeypatch):
    true_seed = mg._p_seed

    def biased(p0, q0, y, m, al):
        if p0 == 0.0 and q0 == 0.0:
            return np.array([1e-6, 0.0, 0.0, 0.0])
        return true_seed(p0, q0, y, m, al)

    monkeypatch.setattr(mg, "_p_seed", biased)
    with pytest.raises(BasisDegenerate, match="drifted"):
        solve_correction(CorrectionProblem(base=merge_base, b_drop=1.0,
                                           y_match=20.0))


def test_singular_matching_guard(merge_base, monkeypatch):
    def collinear(rhs, y0, s0, y1, rtol, atol, max_step=np.inf):
        nodes = np.linspace(y0, y1, 50)
        value = 0.0 if np.all(s0 == 0.0) else 1.0
        states = np.full((50, 4), value)
        return nodes, states, np.zeros((50, 4)), True

    monkeypatch.setattr(mg, "adaptive_rk45", collinear)
    with pytest.raises(BasisDegenerate, match="singular"):
        solve_correction(CorrectionProblem(base=merge_base, b_drop=1.0,
                                           y_match=20.0))
