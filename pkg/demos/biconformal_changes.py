"""
Special biconformal changes
===========================

Two ways to produce a special biconformal change ghat = f g - theta(dtau^2 + xi^2):
from a potential S(tau) on a constant-c model, and from H(tau) alone on a model
whose c varies over the base.  Then the curvature of ghat is compared with the
formulas in terms of g.
"""

import numpy as np

from kahlerlab import biconf as bc
from kahlerlab import canonical as cn
from kahlerlab import fibermodel as fm
from kahlerlab.scalarfun import from_monomials

rng = np.random.default_rng(1)

# S(tau) = tau^2 on the constant-c fixture; H follows by quadrature of -Lap S(tau)
flat = fm.fixture("flat-const")
pts = flat.sample(60, rng)
S = from_monomials([0.0, 0.0, 1.0], flat.interval)
change = bc.from_SH(flat, S, bc.H_from_S(flat, S), points=pts)
print("positivity shift added to H:", change.shift)
print(bc.verify_change(flat, change, pts).table())

# p ghat + q g is again special, with tauhat -> p tauhat + q tau + s
moved = change.combine(2.0, 0.5, -1.0)
print("\ncombined change passes:", bc.verify_change(flat, moved, pts).passed)

# on the variable-c fixture theta is determined by H, provided H' is orthogonal to 1 and tau
var = fm.fixture("flat-var")
vpts = var.sample(60, rng)
H = from_monomials([0.0, 1.0, -3.0, 2.0], var.interval)
theta, trep = fm.theta_from_H(var, H)
print("\n" + trep.table())
vchange = bc.from_theta_field(var, theta, H, points=vpts)
print("variable-c change passes:", bc.verify_change(var, vchange, vpts).passed)

try:
    fm.theta_from_H(var, from_monomials([0.0, 0.0, 0.5], var.interval))
except ValueError as err:
    print("\nH' = tau is rejected:", err)

# curvature of ghat against the g-side formulas; note the two scalar-curvature entries
print("\n" + cn.curvature_relations_check(var, vchange, vpts[:30]).table())
