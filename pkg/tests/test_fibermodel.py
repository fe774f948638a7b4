import numpy as np
import pytest

from kahlerlab import chartlab as cl
from kahlerlab import fibermodel as fm
from kahlerlab.jets import Jet
from kahlerlab.profiles import quadratic_profile
from kahlerlab.scalarfun import Interval, from_monomials


@pytest.mark.parametrize("name", ["flat-const", "flat-var", "flat-infinite"])
def test_fixture_is_kahler_with_closed_form_killing_data(name):
    m = fm.fixture(name)
    pts = m.sample(40, np.random.default_rng(1))
    assert cl.check_kahler(m.chart, pts).passed
    assert m.check_connection(pts).passed
    kd = fm.killing_data(m, pts)
    assert np.max(np.abs(kd.v - kd.v_gradient)) < 1e-10
    assert np.max(np.abs(kd.Q_metric - kd.Q)) < 1e-10
    assert np.max(np.abs(kd.Y_laplacian - kd.Y)) < 1e-8
    assert np.max(np.abs(kd.tau - m.radius.interval.tau_min)) > 0


def test_round_base_model_is_kahler():
    iv = Interval(0.0, 1.0)
    base = fm.round_base(1.0, 0.5, 0.7, fm.ProjectiveValue(-1.0, 1.0))
    m = fm.FiberModel(fm.FiberModelSpec(quadratic_profile(iv), base))
    pts = m.sample(30, np.random.default_rng(2))
    assert cl.check_kahler(m.chart, pts).passed
    assert m.check_connection(pts).passed


def test_projective_values():
    assert fm.ProjectiveValue.infinity().is_infinite
    assert fm.ProjectiveValue(-2.0, 2.0).value == -1.0
    with pytest.raises(ValueError):
        fm.ProjectiveValue(0.0, 0.0)
    with pytest.raises(ValueError, match="lies in"):
        fm.ProjectiveValue.finite(0.5).check_outside(Interval(0.0, 1.0))


def test_c_inside_interval_is_rejected(unit, quad):
    base = fm.flat_constant_c_base(1.0, 0.5, fm.ProjectiveValue.finite(0.25))
    with pytest.raises(ValueError):
        fm.FiberModel(fm.FiberModelSpec(quad, base))


def test_theta_from_H_on_variable_c(flat_var, var_points, unit):
    H = from_monomials([0.0, 1.0, -3.0, 2.0], unit)
    theta, rep = fm.theta_from_H(flat_var, H)
    assert rep.passed
    assert rep["F_y(tau_max) over sampled y"].max_residual < 1e-10
    # theta along a fibre agrees with the chart field
    y = var_points[0, :2]
    tau = np.array([0.3, 0.6])
    X = [Jet.constant(c) for c in np.array([flat_var.point(y[0], y[1], t) for t in tau]).T]
    assert np.allclose(theta(X).value, theta.along(y, tau), atol=1e-12)


def test_theta_from_H_rejects_nonzero_moments(flat_var, unit):
    with pytest.raises(ValueError, match="L2-orthogonal"):
        fm.theta_from_H(flat_var, from_monomials([0.0, 0.0, 0.5], unit))


def test_endpoint_residual_matches_moments(unit, c_minus_one):
    # H' = tau: -int (tau + 1) tau dtau = -(1/3 + 1/2)
    H = from_monomials([0.0, 0.0, 0.5], unit)
    assert abs(fm.endpoint_residual(H, c_minus_one) + 5 / 6) < 1e-14
    H0 = from_monomials([0.0, -5 / 9, 0.5], unit)
    assert abs(fm.endpoint_residual(H0, c_minus_one)) < 1e-14
