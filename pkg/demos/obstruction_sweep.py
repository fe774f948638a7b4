"""
Bounded solutions along a gradient curve
========================================

Along a gradient curve of tau the condition on theta becomes a linear ODE in
the curve parameter.  A bounded solution exists exactly when a weighted
integral of H' vanishes.  This script shows both outcomes and a sweep.
"""

import numpy as np

from kahlerlab import obstruction as ob
from kahlerlab.fibermodel import ProjectiveValue
from kahlerlab.profiles import quadratic_profile
from kahlerlab.scalarfun import Interval, from_monomials

iv = Interval(0.0, 1.0)
P = quadratic_profile(iv)
c = ProjectiveValue(-1.0, 1.0)

# on the quadratic profile the curve is the logistic function
p = ob.CurveProblem(P, c, from_monomials([-5 / 9, 1.0], iv))
t, tau = ob.integrate_curve(p)
print("max |tau(t) - logistic(2t)|:", np.max(np.abs(tau - 1 / (1 + np.exp(-2 * t)))))

for label, coeffs in (("H' = tau - 5/9", [-5 / 9, 1.0]), ("H' = tau", [0.0, 1.0])):
    prob = ob.CurveProblem(P, c, from_monomials(coeffs, iv))
    sol = ob.solve_theta_ode(prob)
    print(f"\n{label}: obstruction {sol.obstruction:+.3e}, bounded {sol.bounded}, max|theta| {sol.max_abs():.3g}")
    if sol.bounded:
        print(f"  theta(-inf) = {sol.limit_minus:.8f}  theta(+inf) = {sol.limit_plus:.8f}")
        print(f"  endpoint ratios W/Y = {prob.endpoint_ratios()}")

print("\nsweep over twenty (H', c) pairs")
header = "H' coefficients"
print(f"{header:32s} {'c':>6s} {'obstruction':>12s} bounded  agrees")
for case in ob.sweep(P):
    coeffs = ", ".join(f"{x:.3g}" for x in case.coeffs)
    print(f"{coeffs:32s} {case.c.value:6.2f} {case.obstruction:12.3e} {str(case.bounded):7s}  {case.agrees}")
