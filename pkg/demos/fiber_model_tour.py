"""
A fiber model and its Killing potential
=======================================

Builds the flat constant-c fixture on the quadratic profile, checks that the
metric is Kaehler and compares Q, Y and the radius map with their closed forms.
"""

import numpy as np

from kahlerlab import chartlab as cl
from kahlerlab import fibermodel as fm

model = fm.fixture("flat-const")
pts = model.sample(100, np.random.default_rng(0))

# J^2 = -1, compatibility, d omega and the Nijenhuis tensor
print(cl.check_kahler(model.chart, pts).table())

# v = grad tau, g(v, v) = Q(tau) and Lap tau = Q/(tau - c) + Q'
kd = fm.killing_data(model, pts)
print("\n|g(v,v) - Q|     ", np.max(np.abs(kd.Q_metric - kd.Q)))
print("|Lap tau - Y|    ", np.max(np.abs(kd.Y_laplacian - kd.Y)))

# for the quadratic profile on [0, 1] the fiber radius is sqrt(tau / (1 - tau))
t = model.inner.grid(9)
r = model.radius.radius(t)
for ti, ri in zip(t, r):
    print(f"tau = {ti:.4f}   r = {ri:.12f}   closed form {np.sqrt(ti / (1 - ti)):.12f}")

# curvature: Ricci form and scalar curvature at a few points
cp = cl.curvature(model.chart, pts[:5])
print("\nscalar curvature at five points:", np.round(cp.scalar, 6))
