"""
An invariant of pairs of U(2)-invariant metrics
===============================================

Given the eigenvalues f and chi of one metric relative to another on the
blow-up of CP^2 at a point, the ratio d = chi+ chi- / (f+ f-) of their values on
the two exceptional orbits does not change under the central C^* action.
"""

import numpy as np

from kahlerlab import u2inv as u
from kahlerlab.fibermodel import ProjectiveValue
from kahlerlab.profiles import builtin_profile
from kahlerlab.scalarfun import Interval, cheb_fit, from_monomials

unit = Interval(0.0, 1.0)
P = builtin_profile("quadratic", unit)
Phat = builtin_profile("quartic", Interval(0.5, 2.0), 1.5, {"bump": 1.0})
c = ProjectiveValue(-1.0, 1.0)

pair = u.pair_from_profiles(P, c, Phat, ProjectiveValue(-0.5, 1.0))
d = u.dd_invariant(pair)
print("endpoint data:", pair.endpoints())
print("d =", d)

for r in (0.25, 0.5, 2.0, 4.0):
    moved = u.central_automorphism(pair, r)
    print(f"r = {r:5.2f}  chi+ = {moved.endpoints().chi_plus:.10f}  d - d0 = {u.dd_invariant(moved) - d:+.2e}")

# d = 1 for pairs related by a special biconformal change; conversely, with d = 1
# a central automorphism makes the endpoint eigenvalues agree
f = from_monomials([1.0, 0.5], unit)
chi = cheb_fit(lambda t: f(t) * (1 + t - 0.5 * (1 - t)), unit, 16)
verdict = u.is_special_after_recentering(u.BlowupPair(f, chi, P, c))
print("\nd =", verdict.d, " recentering r =", verdict.r)
print(verdict.report.table())
print("theta at the ends:", {k: round(float(v), 6) for k, v in verdict.report.extras.items() if k.startswith("theta")})
