import numpy as np
import pytest

from kahlerlab import biconf as bc
from kahlerlab import u2inv as u
from kahlerlab.fibermodel import ProjectiveValue
from kahlerlab.profiles import builtin_profile
from kahlerlab.scalarfun import Interval, cheb_fit, constant, from_monomials


@pytest.fixture(scope="module")
def pair(quad, c_minus_one):
    Ph = builtin_profile("quartic", Interval(0.5, 2.0), 1.5, {"bump": 1.0})
    return u.pair_from_profiles(quad, c_minus_one, Ph, ProjectiveValue(-0.5, 1.0))


def test_invariant_of_constant_data(quad, c_minus_one, unit):
    p = u.BlowupPair(constant(1.0, unit), constant(2.0, unit), quad, c_minus_one)
    assert u.dd_invariant(p) == 4.0
    assert u.dd_invariant(p.endpoints().flipped()) == 4.0


@pytest.mark.parametrize("side", ["hat", "base"])
def test_invariance_on_r_grid(pair, side):
    d = u.dd_invariant(pair)
    for r in np.geomspace(0.2, 5.0, 5):
        assert abs(u.dd_invariant(u.central_automorphism(pair, r, side)) - d) < 1e-10


def test_central_automorphism_scales_chi(pair):
    e = pair.endpoints()
    m = u.central_automorphism(pair, 2.0).endpoints()
    assert m.chi_plus == pytest.approx(2 * e.chi_plus, rel=1e-10)
    assert m.chi_minus == pytest.approx(e.chi_minus / 2, rel=1e-10)
    assert m.f_plus == pytest.approx(e.f_plus, rel=1e-10)


def test_round_trip(pair):
    back = u.central_automorphism(u.central_automorphism(pair, 3.0), 1 / 3.0)
    a, b = pair.endpoints(), back.endpoints()
    assert np.allclose(list(vars(a).values()), list(vars(b).values()), atol=1e-10)


def test_bad_scale_rejected(pair):
    with pytest.raises(ValueError):
        u.central_automorphism(pair, -1.0)


def test_special_change_has_unit_invariant(flat_const, const_points, unit):
    S = from_monomials([0.0, 0.0, 1.0], unit)
    change = bc.from_SH(flat_const, S, bc.H_from_S(flat_const, S), points=const_points)
    p = u.pair_from_change(flat_const, change)
    assert abs(u.dd_invariant(p) - 1) < 1e-8
    verdict = u.is_special_after_recentering(p)
    assert verdict.special


def test_recentering_solves_for_r(quad, c_minus_one, unit):
    f = from_monomials([1.0, 0.5], unit)
    chi = cheb_fit(lambda t: f(t) * (1 + t - 0.5 * (1 - t)), unit, 16)
    p = u.BlowupPair(f, chi, quad, c_minus_one)
    assert abs(u.dd_invariant(p) - 1) < 1e-12
    verdict = u.is_special_after_recentering(p)
    assert verdict.r == pytest.approx(0.5)
    m = verdict.pair.endpoints()
    assert abs(m.chi_plus - m.f_plus) < 1e-10 and abs(m.chi_minus - m.f_minus) < 1e-10


def test_not_special_when_invariant_differs(pair):
    verdict = u.is_special_after_recentering(pair)
    assert not verdict.special and verdict.r is None


def test_endpoint_data_must_be_positive():
    with pytest.raises(ValueError):
        u.EndpointData(1.0, 1.0, 0.0, 1.0)
