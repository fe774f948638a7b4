import numpy as np
import pytest

from kahlerlab.profiles import MomentumProfile, builtin_profile, quadratic_profile, radius_map, validate_profile
from kahlerlab.scalarfun import Interval, from_monomials


def test_quadratic_radius_closed_form(unit):
    R = radius_map(quadratic_profile(unit, 1.0))
    t = R.interval.grid(101)
    assert np.max(np.abs(R.radius(t) / np.sqrt(t / (1 - t)) - 1)) < 1e-9


@pytest.mark.parametrize("a", [0.5, 2.0, 3.0])
def test_quadratic_radius_any_a(a):
    iv = Interval(-1.0, 2.0)
    R = radius_map(quadratic_profile(iv, a))
    t = R.interval.grid(41)
    closed = np.sqrt((t + 1) / (2 - t))
    assert np.max(np.abs(R.radius(t) / closed - 1)) < 1e-9
    assert abs(R.radius(iv.midpoint) - 1) < 1e-12


def test_radius_inverse_round_trip(unit, quad):
    R = radius_map(quad)
    t = R.interval.grid(15)
    assert np.max(np.abs(R.tau_of_r(R.radius(t)) - t)) < 1e-10


def test_validation_flags_bad_slope(unit):
    bad = MomentumProfile(from_monomials([0.0, 2.0, -2.0], unit), 3.0)
    rep = validate_profile(bad)
    assert not rep["Q'(tau_min) - 2a"].passed


def test_builtin_quartic_keeps_slopes():
    P = builtin_profile("quartic", Interval(0.5, 2.0), 1.5, {"bump": 1.0})
    assert abs(P.dQ(0.5) - 3.0) < 1e-10 and abs(P.dQ(2.0) + 3.0) < 1e-10


def test_builtin_custom_coeffs_and_rejection(unit):
    P = builtin_profile("custom-coeffs", unit, 1.0, {"coeffs": [0.0, 2.0, -2.0]})
    assert abs(P.Q(0.5) - 0.5) < 1e-14
    with pytest.raises(ValueError, match="failed validation"):
        builtin_profile("custom-coeffs", unit, 1.0, {"coeffs": [0.0, 1.0, -1.0]})
    with pytest.raises(ValueError, match="unknown profile"):
        builtin_profile("cubic", unit)
