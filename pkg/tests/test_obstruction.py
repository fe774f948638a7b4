import numpy as np
import pytest

from kahlerlab import obstruction as ob
from kahlerlab.fibermodel import ProjectiveValue
from kahlerlab.scalarfun import constant, from_monomials


@pytest.fixture(scope="module")
def balanced(quad, c_minus_one, unit):
    return ob.CurveProblem(quad, c_minus_one, from_monomials([-5 / 9, 1.0], unit))


@pytest.fixture(scope="module")
def tilted(quad, c_minus_one, unit):
    return ob.CurveProblem(quad, c_minus_one, from_monomials([0.0, 1.0], unit))


def test_curve_is_logistic(balanced):
    t, tau = ob.integrate_curve(balanced)
    assert np.max(np.abs(tau - 1 / (1 + np.exp(-2 * t)))) < 1e-10


def test_weight_closed_form(balanced):
    t, tau = ob.integrate_curve(balanced)
    _, zeta = ob.zeta_weight(balanced)
    assert np.max(np.abs(zeta - ob.zeta_closed_form(balanced, tau))) < 1e-9


def test_balanced_case_is_bounded_with_endpoint_limits(balanced):
    obs = ob.obstruction_integral(balanced)
    assert abs(obs.value) < 1e-8
    sol = ob.solve_theta_ode(balanced)
    assert sol.bounded
    assert abs(sol.limit_plus - 2 / 9) < 1e-4
    assert abs(sol.limit_minus - 5 / 18) < 1e-4
    assert ob.limit_report(balanced, sol).passed


def test_tilted_case_is_unbounded(tilted, quad):
    obs = ob.obstruction_integral(tilted)
    k = ob.fiber_reduction_constant(tilted)
    assert abs(abs(obs.value) - 5 / 6 * abs(k)) < 1e-8
    assert abs(obs.value - obs.tau_value) < 1e-8
    sol = ob.solve_theta_ode(tilted)
    assert not sol.bounded
    assert sol.obstruction == pytest.approx(obs.value)


def test_bounded_solution_is_unique(quad, c_minus_one, unit):
    p = ob.CurveProblem(quad, c_minus_one, from_monomials([-5 / 9, 1.0], unit), T=7.5)
    ref = ob.solve_theta_ode(p)
    assert ob.uniqueness_check(p, ref, ob.solve_theta_direct(p)).passed
    assert not ob.uniqueness_check(p, ref, ob.solve_theta_direct(p, 1e-3)).passed


def test_zero_H_gives_zero_theta(quad, c_minus_one, unit):
    sol = ob.solve_theta_ode(ob.CurveProblem(quad, c_minus_one, constant(0.0, unit)))
    assert sol.bounded and sol.max_abs() < 1e-12


def test_even_grid_is_rejected(quad, c_minus_one, unit):
    with pytest.raises(ValueError, match="odd"):
        ob.CurveProblem(quad, c_minus_one, constant(0.0, unit), n=100)


def test_sweep_agreement_and_fibre_reduction(quad):
    cases = ob.sweep(quad)
    assert len(cases) == 20
    assert all(case.agrees for case in cases)
    assert sum(case.bounded for case in cases) >= 5
    for case in cases:
        k = ob.fiber_reduction_constant(ob.CurveProblem(quad, case.c, constant(0.0, quad.interval)))
        assert case.obstruction == pytest.approx(k * case.endpoint_residual, rel=1e-6, abs=1e-9)


def test_infinite_c(quad, unit):
    inf = ProjectiveValue.infinity()
    p = ob.CurveProblem(quad, inf, from_monomials([-0.5, 1.0], unit))
    assert abs(ob.obstruction_integral(p).value) < 1e-8
    assert ob.solve_theta_ode(p).bounded
