"""The linear ODE theta' + theta Y = W along gradient curves, its weight and integral obstruction.

Along an integral curve of v the moment variable obeys d tau/dt = Q(tau), so
functions of tau restricted to the curve are differentiated with d_v = Q d/dtau.
With W = -H'(tau) and zeta = exp(Z), Z' = Y, a bounded solution exists only when
the integral of zeta W over the whole line vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp

from .fibermodel import ProjectiveValue
from .profiles import MomentumProfile
from .report import ResidualReport
from .scalarfun import Interval, TauFunction, differentiate, from_monomials, gauss_legendre

RTOL = 1e-12
ATOL = 1e-15
LIMIT_WINDOW = 1e-6  # limits are read where zeta has fallen to this fraction of zeta(0)
RESOLVED_WINDOW = 1e-9  # theta is only formed where zeta is above this fraction
BOUND_FACTOR = 1e3


@dataclass(frozen=True, eq=False)
class CurveProblem:
    """A gradient curve of a fiber model over a base point where c takes the given value."""

    profile: MomentumProfile
    c: ProjectiveValue
    H_prime: TauFunction
    T: float | None = None
    n: int = 4001
    tail_tol: float = 1e-6

    def __post_init__(self):
        self.c.check_outside(self.profile.interval)
        if self.T is None:
            object.__setattr__(self, "T", 40.0 / self.profile.a)
        if self.n % 2 == 0:
            raise ValueError("grid size must be odd so that t = 0 is a node")

    @classmethod
    def from_H(cls, profile, c, H: TauFunction, **kw) -> "CurveProblem":
        return cls(profile, c, differentiate(H), **kw)

    @property
    def interval(self) -> Interval:
        return self.profile.interval

    @property
    def t_grid(self) -> np.ndarray:
        return np.linspace(-self.T, self.T, self.n)

    def Y(self, tau):
        """Laplacian of tau along the curve, from the closed form on fiber models."""
        tau = np.asarray(tau, dtype=float)
        Q, dQ = self.profile.Q(tau), self.profile.dQ(tau)
        if self.c.is_infinite:
            return dQ
        return Q * self.c.q / (tau * self.c.q - self.c.p) + dQ

    def W(self, tau):
        return -self.H_prime(np.asarray(tau, dtype=float))

    def endpoint_ratios(self) -> tuple[float, float]:
        """W/Y at tau_min and tau_max: the l'Hospital limits of a bounded theta."""
        iv = self.interval
        return (float(self.W(iv.tau_min) / self.Y(iv.tau_min)), float(self.W(iv.tau_max) / self.Y(iv.tau_max)))

    @cached_property
    def _curve(self):
        """Dense solutions of (tau, Z, J) from t = 0 forwards and backwards; J(t) = int_0^t zeta W."""
        Qf = self.profile.Q

        def rhs(t, s):
            tau = np.clip(s[0], self.interval.tau_min, self.interval.tau_max)
            return [Qf(tau), self.Y(tau), np.exp(s[1]) * self.W(tau)]

        y0 = [self.profile.tau_star, 0.0, 0.0]
        out = []
        for end in (self.T, -self.T):
            sol = solve_ivp(rhs, (0.0, end), y0, method="DOP853", rtol=RTOL, atol=ATOL, dense_output=True)
            if not sol.success:
                raise RuntimeError(f"curve integration failed: {sol.message}")
            out.append(sol.sol)
        return tuple(out)

    def state(self, t) -> np.ndarray:
        """(tau, Z, J) at times t, shape (3, len(t))."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        fwd, bwd = self._curve
        out = np.empty((3, t.size))
        pos = t >= 0
        if pos.any():
            out[:, pos] = fwd(t[pos])
        if (~pos).any():
            out[:, ~pos] = bwd(t[~pos])
        out[0] = np.clip(out[0], self.interval.tau_min, self.interval.tau_max)
        return out


def integrate_curve(p: CurveProblem) -> tuple[np.ndarray, np.ndarray]:
    """tau(t) on the problem grid, with tau(0) = tau_*."""
    t = p.t_grid
    tau = p.state(t)[0]
    iv = p.interval
    gap = max(tau[0] - iv.tau_min, iv.tau_max - tau[-1])
    if gap > 1e-4:
        raise ValueError(f"grid too short: the curve stops {gap:.2e} from an endpoint; increase T (now {p.T:g})")
    if np.any(np.diff(tau) < -1e-14):
        raise RuntimeError("tau(t) is not monotone along the curve")
    return t, tau


def zeta_weight(p: CurveProblem) -> tuple[np.ndarray, np.ndarray]:
    """zeta = exp(Z), Z' = Y, Z(0) = 0 on the grid; tails must have decayed."""
    t = p.t_grid
    Z = p.state(t)[1]
    zeta = np.exp(Z)
    if max(zeta[0], zeta[-1]) > p.tail_tol:
        raise ValueError(f"zeta does not decay at the ends of the grid ({zeta[0]:.2e}, {zeta[-1]:.2e}); "
                         "Y data are not those of a moment map on a compact orbit space")
    return t, zeta


def zeta_closed_form(p: CurveProblem, tau) -> np.ndarray:
    """zeta as a function of tau: Q |tau - c| normalised at tau_* (Q alone when c is infinite)."""
    tau = np.asarray(tau, dtype=float)
    ts = p.profile.tau_star
    if p.c.is_infinite:
        return p.profile.Q(tau) / p.profile.Q(ts)
    return (p.profile.Q(tau) * np.abs(tau * p.c.q - p.c.p)) / (p.profile.Q(ts) * abs(ts * p.c.q - p.c.p))


def _tails(p: CurveProblem, zeta_lo: float, zeta_hi: float) -> tuple[float, float]:
    """Integrals of zeta W beyond -T and +T, from the exponential behaviour of zeta at the ends."""
    ratio_lo, ratio_hi = p.endpoint_ratios()
    return zeta_lo * ratio_lo, -zeta_hi * ratio_hi


@dataclass
class Obstruction:
    value: float
    tau_value: float
    flagged: bool

    def __float__(self):
        return self.value


def obstruction_integral(p: CurveProblem) -> Obstruction:
    """Integral of zeta W over the line, and the same integral after substituting tau."""
    ends = p.state([-p.T, p.T])
    lo_tail, hi_tail = _tails(p, np.exp(ends[1, 0]), np.exp(ends[1, 1]))
    value = float(ends[2, 1] - ends[2, 0] + lo_tail + hi_tail)
    x, w = gauss_legendre(p.interval, max(64, p.H_prime.degree + 16))
    zq = zeta_closed_form(p, x) / p.profile.Q(x)
    tau_value = float(np.sum(w * zq * p.W(x)))
    return Obstruction(value, tau_value, abs(value - tau_value) > 1e-5)


@dataclass
class OdeSolution:
    t: np.ndarray
    tau: np.ndarray
    theta_of_t: np.ndarray
    limit_minus: float
    limit_plus: float
    bounded: bool
    threshold: float
    resolved: np.ndarray = field(repr=False, default=None)
    obstruction: float = float("nan")

    def max_abs(self) -> float:
        vals = self.theta_of_t[self.resolved] if self.resolved is not None else self.theta_of_t
        return float(np.max(np.abs(vals)))


def _threshold(p: CurveProblem) -> float:
    iv = p.interval
    x = iv.grid(401)
    w_norm = float(np.max(np.abs(p.W(x))))
    y_min = min(abs(float(p.Y(iv.tau_min))), abs(float(p.Y(iv.tau_max))))
    return BOUND_FACTOR * w_norm / y_min + 1e-12


def _limits(t, zeta, theta, resolved, window=LIMIT_WINDOW) -> tuple[float, float]:
    inside = np.flatnonzero(zeta >= window)
    lo = inside[0] if inside.size else np.flatnonzero(resolved)[0]
    hi = inside[-1] if inside.size else np.flatnonzero(resolved)[-1]
    return float(theta[lo]), float(theta[hi])


def solve_theta_ode(p: CurveProblem, obstruction_tol: float = 1e-8) -> OdeSolution:
    """theta(t) = zeta(t)^-1 times the integral of zeta W up to t, on the resolved part of the grid."""
    t = p.t_grid
    tau, Z, Jt = p.state(t)
    zeta = np.exp(Z)
    lo_tail, hi_tail = _tails(p, zeta[0], zeta[-1])
    cumulative = Jt - Jt[0] + lo_tail
    resolved = zeta >= RESOLVED_WINDOW
    theta = np.full_like(t, np.nan)
    theta[resolved] = cumulative[resolved] / zeta[resolved]
    obstruction = float(Jt[-1] - Jt[0] + lo_tail + hi_tail)
    thr = _threshold(p)
    bounded = bool(np.max(np.abs(theta[resolved])) < thr)
    lim_m, lim_p = (np.nan, np.nan)
    if abs(obstruction) < obstruction_tol:
        lim_m, lim_p = _limits(t, zeta, theta, resolved)
    return OdeSolution(t, tau, theta, lim_m, lim_p, bounded, thr, resolved, obstruction)


def solve_theta_direct(p: CurveProblem, perturbation: float = 0.0) -> OdeSolution:
    """Adaptive integration of theta' = W - theta Y from t = -T, started at the endpoint ratio W/Y."""
    t = p.t_grid
    Wm, _ = p.endpoint_ratios()

    def rhs(s, y):
        tau = p.state([s])[0, 0]
        return [p.W(tau) - y[0] * p.Y(tau)]

    sol = solve_ivp(rhs, (-p.T, p.T), [Wm + perturbation], method="DOP853", rtol=1e-13, atol=1e-15, t_eval=t)
    if not sol.success:
        raise RuntimeError(f"direct theta integration failed: {sol.message}")
    theta = sol.y[0]
    tau, Z, _ = p.state(t)
    zeta = np.exp(Z)
    resolved = zeta >= RESOLVED_WINDOW
    thr = _threshold(p)
    bounded = bool(np.max(np.abs(theta[resolved])) < thr)
    lim_m, lim_p = _limits(t, zeta, theta, resolved)
    return OdeSolution(t, tau, theta, lim_m, lim_p, bounded, thr, resolved)


def uniqueness_check(p: CurveProblem, theta1: OdeSolution, theta2: OdeSolution, rel_tol: float = 1e-6) -> ResidualReport:
    """Two bounded solutions of the same problem must coincide."""
    rep = ResidualReport()
    mask = theta1.resolved & theta2.resolved
    diff = float(np.max(np.abs(theta1.theta_of_t[mask] - theta2.theta_of_t[mask])))
    scale = 1.0 + theta1.max_abs()
    rep.add("max |theta1 - theta2|", diff, rel_tol * scale, "bounded solutions are unique", int(mask.sum()))
    rep.add("both solutions bounded", 0.0 if (theta1.bounded and theta2.bounded) else 1.0, 0.0,
            "uniqueness applies to bounded solutions")
    return rep


def limit_report(p: CurveProblem, sol: OdeSolution, tol: float = 1e-4) -> ResidualReport:
    rep = ResidualReport()
    Wm, Wp = p.endpoint_ratios()
    rep.add("theta(-inf) - W/Y(tau_min)", abs(sol.limit_minus - Wm), tol, "theta(-inf) = W/Y at tau_min")
    rep.add("theta(+inf) - W/Y(tau_max)", abs(sol.limit_plus - Wp), tol, "theta(+inf) = W/Y at tau_max")
    return rep


def fiber_reduction_constant(p: CurveProblem) -> float:
    """The factor k with obstruction = k * F_y(tau_max).

    Returned as the signed factor ``sgn(tau - c) * q / (Q(tau_*) |tau_* q - p|)``; when c is infinite
    it is ``-sgn(p) / Q(tau_*)``, matching the projective scaling of the endpoint residual.
    """
    ts = p.profile.tau_star
    Qs = float(p.profile.Q(ts))
    if p.c.is_infinite:
        return float(-np.sign(p.c.p) / Qs)
    side = np.sign(p.interval.tau_min * p.c.q - p.c.p)
    return float(side * p.c.q / (Qs * abs(ts * p.c.q - p.c.p)))


@dataclass
class SweepCase:
    coeffs: tuple
    c: ProjectiveValue
    obstruction: float
    bounded: bool
    endpoint_residual: float

    @property
    def agrees(self) -> bool:
        return self.bounded == (abs(self.obstruction) < 1e-7)


def default_sweep_cases(interval: Interval) -> list[tuple[tuple, ProjectiveValue]]:
    """Twenty (H', c) pairs: half built to have zero obstruction for their c, half generic."""
    lo, hi = interval.tau_min, interval.tau_max
    cs = [ProjectiveValue.finite(lo - 1.0), ProjectiveValue.finite(lo - 0.25), ProjectiveValue.finite(hi + 0.5),
          ProjectiveValue.finite(hi + 3.0), ProjectiveValue.infinity()]
    x, w = gauss_legendre(interval, 32)
    cases = []
    for c in cs:
        weight = np.ones_like(x) if c.is_infinite else np.abs(x * c.q - c.p)
        m0, m1, m2 = (float(np.sum(w * weight * x**k)) for k in range(3))
        cases.append(((-m1 / m0, 1.0), c))  # tau minus weighted mean
        cases.append(((-m2 / m0, 0.0, 1.0), c))
        cases.append(((1.0, 0.0), c))
        cases.append(((0.3, -1.0, 2.0), c))
    return cases


def sweep(profile: MomentumProfile, cases=None) -> list[SweepCase]:
    from .fibermodel import endpoint_residual

    cases = cases if cases is not None else default_sweep_cases(profile.interval)
    out = []
    for coeffs, c in cases:
        Hp = from_monomials(coeffs, profile.interval)
        p = CurveProblem(profile, c, Hp)
        sol = solve_theta_ode(p)
        H = from_monomials([0.0] + [a / (k + 1) for k, a in enumerate(coeffs)], profile.interval)
        out.append(SweepCase(tuple(coeffs), c, sol.obstruction, sol.bounded, endpoint_residual(H, c)))
    return out
