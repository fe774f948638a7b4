"""Momentum profiles Q(tau) and the change of variables between tau and the fiber radius."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .report import ResidualReport
from .scalarfun import Interval, TauFunction, antiderivative, cheb_fit, differentiate, from_monomials

DEFAULT_EPSILON_FRACTION = 0.05


@dataclass(frozen=True, eq=False)
class MomentumProfile:
    """The norm-squared Q = g(v, v) of the gradient as a function of tau, with slope parameter a."""

    Q: TauFunction
    a: float

    def __post_init__(self):
        if not float(self.a) > 0:
            raise ValueError(f"profile slope parameter a must be positive, got {self.a}")
        object.__setattr__(self, "a", float(self.a))

    @property
    def interval(self) -> Interval:
        return self.Q.interval

    @property
    def tau_star(self) -> float:
        return self.interval.midpoint

    @cached_property
    def dQ(self) -> TauFunction:
        return differentiate(self.Q)

    def __call__(self, tau):
        return self.Q(tau)


def _interior_nodes(interval: Interval, n: int = 200) -> np.ndarray:
    k = np.arange(1, n + 1)
    return interval.from_unit(np.cos(np.pi * (2 * k - 1) / (2 * n)))


def validate_profile(P: MomentumProfile) -> ResidualReport:
    """Boundary conditions and interior positivity of a profile, as report entries."""
    iv = P.interval
    rep = ResidualReport()
    scale = P.Q.sup_norm()
    rep.add("Q(tau_min)", abs(P.Q(iv.tau_min)), 1e-10 * scale, "Q = 0 at tau_min")
    rep.add("Q(tau_max)", abs(P.Q(iv.tau_max)), 1e-10 * scale, "Q = 0 at tau_max")
    slope_lo, slope_hi = float(P.dQ(iv.tau_min)), float(P.dQ(iv.tau_max))
    rep.add("Q'(tau_min) - 2a", abs(slope_lo - 2 * P.a), 1e-8 * 2 * P.a, "Q' = 2a at tau_min")
    rep.add("Q'(tau_max) + 2a", abs(slope_hi + 2 * P.a), 1e-8 * 2 * P.a, "Q' = -2a at tau_max")
    min_q = float(np.min(P.Q(_interior_nodes(iv))))
    residual = 0.0 if min_q > 0 else max(-min_q, np.finfo(float).tiny)
    rep.add("interior positivity", residual, 0.0, "Q > 0 on the open interval", 200)
    rep.extras.update(slope_min=slope_lo, slope_max=slope_hi, positivity_margin=min_q)
    return rep


def quadratic_profile(interval: Interval, a: float = 1.0) -> MomentumProfile:
    lo, hi, length = interval.tau_min, interval.tau_max, interval.length
    return MomentumProfile(cheb_fit(lambda t: 2 * a * (t - lo) * (hi - t) / length, interval, 8), a)


def builtin_profile(name: str, interval: Interval, a: float = 1.0, params: dict | None = None) -> MomentumProfile:
    """Named profile families.

    ``quadratic``: 2a(tau - tau_min)(tau_max - tau)/L.
    ``quartic``: the quadratic times 1 + bump*u*(1 - u) with u the unit-interval coordinate;
    endpoint slopes are unchanged and Q stays positive for bump > -4.
    ``custom-coeffs``: monomial coefficients of Q in tau (params["coeffs"]).
    """
    params = dict(params or {})
    if name == "quadratic":
        P = quadratic_profile(interval, a)
    elif name == "quartic":
        bump = float(params.get("bump", 0.0))
        lo, length = interval.tau_min, interval.length
        base = quadratic_profile(interval, a).Q

        def q(t):
            u = (t - lo) / length
            return base(t) * (1 + bump * u * (1 - u))

        P = MomentumProfile(cheb_fit(q, interval, 8), a)
    elif name == "custom-coeffs":
        if "coeffs" not in params:
            raise ValueError("custom-coeffs profile needs params['coeffs']")
        P = MomentumProfile(from_monomials(params["coeffs"], interval), a)
    else:
        raise ValueError(f"unknown profile {name!r}")
    rep = validate_profile(P)
    if not rep.passed:
        raise ValueError(f"profile {name!r} failed validation:\n{rep.table()}")
    return P


def _adaptive_fit(func, interval: Interval, start: int = 64, limit: int = 1024, rel_tail: float = 1e-15) -> TauFunction:
    """Chebyshev fit whose trailing coefficients have decayed to rounding level."""
    n = start
    while True:
        F = cheb_fit(func, interval, n)
        c = np.abs(F.coefficients)
        if np.max(c[-8:]) <= rel_tail * np.max(c) or n >= limit:
            return F
        n *= 2


@dataclass(frozen=True, eq=False)
class RadiusMap:
    """log r as a function of tau on the restricted interval, normalised by r(tau_*) = 1."""

    profile: MomentumProfile
    logr: TauFunction
    epsilon: float

    @property
    def interval(self) -> Interval:
        return self.logr.interval

    @property
    def tau_star(self) -> float:
        return self.profile.tau_star

    @cached_property
    def r(self) -> TauFunction:
        return _adaptive_fit(lambda t: np.exp(self.logr(t)), self.interval)

    def log_radius(self, tau):
        return self.logr(tau)

    def radius(self, tau):
        return np.exp(self.logr(tau))

    @cached_property
    def _logr_range(self) -> tuple[float, float]:
        iv = self.interval
        return float(self.logr(iv.tau_min)), float(self.logr(iv.tau_max))

    def tau_of_log_radius(self, rho, tol: float = 1e-12):
        """Invert log r(tau) = rho by bisection, then polish with Newton steps."""
        rho = np.asarray(rho, dtype=float)
        lo_r, hi_r = self._logr_range
        if np.any(rho < lo_r - 1e-14) or np.any(rho > hi_r + 1e-14):
            bad = rho[(rho < lo_r - 1e-14) | (rho > hi_r + 1e-14)].ravel()[0]
            raise ValueError(
                f"radius exp({bad:.6g}) maps outside the restricted interval "
                f"[{self.interval.tau_min:.6g}, {self.interval.tau_max:.6g}]"
            )
        lo = np.full(rho.shape, self.interval.tau_min)
        hi = np.full(rho.shape, self.interval.tau_max)
        while np.max(hi - lo) > tol:
            mid = 0.5 * (lo + hi)
            above = self.logr(mid) > rho
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
        tau = 0.5 * (lo + hi)
        for _ in range(2):
            val, slope = self.logr.derivatives(tau, 1)
            tau = np.clip(tau - (val - rho) / slope, self.interval.tau_min, self.interval.tau_max)
        return tau

    def tau_of_r(self, r0, tol: float = 1e-12):
        r0 = np.asarray(r0, dtype=float)
        if np.any(r0 <= 0):
            raise ValueError("radius must be positive")
        return self.tau_of_log_radius(np.log(r0), tol)

    def tau_derivatives(self, rho):
        """tau and its first three derivatives with respect to rho = log r."""
        tau = self.tau_of_log_radius(rho)
        _, d1, d2, d3 = self.logr.derivatives(tau, 3)
        return [tau, 1 / d1, -d2 / d1**3, (3 * d2**2 - d1 * d3) / d1**5]


def radius_map(P: MomentumProfile, epsilon: float | None = None) -> RadiusMap:
    """Solve dr/dtau = a r / Q on [tau_min + eps, tau_max - eps] with r(tau_*) = 1."""
    iv = P.interval
    eps = DEFAULT_EPSILON_FRACTION * iv.length if epsilon is None else float(epsilon)
    if not 0 < eps < 0.5 * iv.length:
        raise ValueError(f"epsilon {eps} leaves an empty interior of [{iv.tau_min}, {iv.tau_max}]")
    inner = iv.shrink(eps)
    integrand = _adaptive_fit(lambda t: P.a / P.Q(t), inner)
    return RadiusMap(P, antiderivative(integrand, P.tau_star), eps)
