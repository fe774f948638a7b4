"""Eigenvalue data of two U(2)-invariant metrics on the one-point blow-up of CP^2.

Everything is a function of the moment variable tau of ``g``.  ``f`` is the
eigenvalue of ghat on the horizontal plane and ``chi`` on the plane spanned by
v and u; tau_min corresponds to the exceptional orbit Sigma^- and tau_max to
Sigma^+.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .fibermodel import ProjectiveValue
from .profiles import MomentumProfile
from .report import ResidualReport
from .scalarfun import Interval, TauFunction, cheb_fit, differentiate

ORIENTATION = "tau_min -> Sigma-, tau_max -> Sigma+"
FIT_DEGREE = 48


@dataclass(frozen=True)
class EndpointData:
    f_plus: float
    f_minus: float
    chi_plus: float
    chi_minus: float

    def __post_init__(self):
        if min(self.f_plus, self.f_minus, self.chi_plus, self.chi_minus) <= 0:
            raise ValueError(f"endpoint eigenvalues must be positive: {self}")

    def flipped(self) -> "EndpointData":
        return EndpointData(self.f_minus, self.f_plus, self.chi_minus, self.chi_plus)


@dataclass(frozen=True, eq=False)
class BlowupPair:
    f: TauFunction
    chi: TauFunction
    Q: MomentumProfile
    c: ProjectiveValue = field(default_factory=ProjectiveValue.infinity)
    orientation: str = ORIENTATION

    def __post_init__(self):
        x = self.interval.grid(201)
        if np.min(self.f(x)) <= 0 or np.min(self.chi(x)) <= 0:
            raise ValueError("f and chi must be positive on the closed interval")

    @property
    def interval(self) -> Interval:
        return self.Q.interval

    def endpoints(self) -> EndpointData:
        iv = self.interval
        return EndpointData(float(self.f(iv.tau_max)), float(self.f(iv.tau_min)),
                            float(self.chi(iv.tau_max)), float(self.chi(iv.tau_min)))

    def _phi(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.c.is_infinite:
            return np.ones_like(tau)
        return tau * self.c.q - self.c.p


def dd_invariant(pair: BlowupPair | EndpointData) -> float:
    e = pair.endpoints() if isinstance(pair, BlowupPair) else pair
    return e.chi_plus * e.chi_minus / (e.f_plus * e.f_minus)


def _flow(profile: MomentumProfile, tau0: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Flow of Q d/dtau for time t from each tau0, with the derivative d Phi / d tau0."""
    n = tau0.size
    iv = profile.interval

    def rhs(_, s):
        tau = np.clip(s[:n], iv.tau_min, iv.tau_max)
        return np.concatenate([profile.Q(tau), profile.dQ(tau) * s[n:]])

    sol = solve_ivp(rhs, (0.0, t), np.concatenate([tau0, np.ones(n)]), method="DOP853", rtol=1e-13, atol=1e-15)
    if not sol.success:
        raise RuntimeError(f"flow integration failed: {sol.message}")
    end = sol.y[:, -1]
    return np.clip(end[:n], iv.tau_min, iv.tau_max), end[n:]


def central_automorphism(pair: BlowupPair, r_scale: float, side: str = "hat") -> BlowupPair:
    """Pull ghat (or g, with ``side="base"``) back along the central C^* action.

    The flow of v for time t = -log(r)/(2a) fixes both exceptional orbits and
    multiplies chi^+ by r and chi^- by 1/r; f keeps its endpoint values.
    Pulling back g by the same map is the same as pulling back ghat by its inverse.
    """
    if not r_scale > 0:
        raise ValueError(f"r_scale must be positive, got {r_scale}")
    if side not in ("hat", "base"):
        raise ValueError("side must be 'hat' or 'base'")
    r = r_scale if side == "hat" else 1.0 / r_scale
    if r == 1.0:
        return pair
    t = -np.log(r) / (2 * pair.Q.a)
    P, iv = pair.Q, pair.interval

    def transformed(tau):
        phi_tau, dphi = _flow(P, np.asarray(tau, dtype=float), t)
        f_new = pair.f(phi_tau) * pair._phi(phi_tau) / pair._phi(tau)
        chi_new = pair.chi(phi_tau) * dphi  # Q(Phi)/Q = dPhi/dtau along the flow
        return f_new, chi_new

    nodes_cache = {}

    def part(k):
        def evaluate(tau):
            key = tau.tobytes()
            if key not in nodes_cache:
                nodes_cache[key] = transformed(tau)
            return nodes_cache[key][k]
        return evaluate

    degree = max(FIT_DEGREE, pair.f.degree, pair.chi.degree)
    return BlowupPair(cheb_fit(part(0), iv, degree), cheb_fit(part(1), iv, degree), P, pair.c, pair.orientation)


@dataclass
class RecenteringVerdict:
    special: bool
    r: float | None
    d: float
    report: ResidualReport
    pair: BlowupPair | None = None


def is_special_after_recentering(pair: BlowupPair, tol: float = 1e-8, post_tol: float = 1e-10) -> RecenteringVerdict:
    """If d = 1, the central automorphism taking chi^+ to f^+ makes the endpoint data special."""
    d = dd_invariant(pair)
    rep = ResidualReport()
    rep.add("|d - 1|", abs(d - 1), tol, "d(g, ghat) = 1", informational=True)
    rep.extras.update(d=d, orientation=pair.orientation)
    if abs(d - 1) > tol:
        return RecenteringVerdict(False, None, d, rep)
    e = pair.endpoints()
    r = e.f_plus / e.chi_plus
    moved = central_automorphism(pair, r)
    m = moved.endpoints()
    rep.add("chi+ - f+ after recentering", abs(m.chi_plus - m.f_plus), post_tol, "chi+ = f+")
    rep.add("chi- - f- after recentering", abs(m.chi_minus - m.f_minus), post_tol, "chi- = f-")
    theta_rep = endpoint_theta_report(moved)
    rep.extend(theta_rep)
    rep.extras["r"] = r
    return RecenteringVerdict(rep.passed, r, d, rep, moved)


def endpoint_theta_report(pair: BlowupPair) -> ResidualReport:
    """theta = (f - chi)/Q near the exceptional orbits via the l'Hospital quotient (f - chi)'/Q'."""
    iv = pair.interval
    diff = pair.f - pair.chi
    d_diff = differentiate(diff)
    rep = ResidualReport()
    for name, tau in (("tau_min", iv.tau_min), ("tau_max", iv.tau_max)):
        val = float(d_diff(tau) / pair.Q.dQ(tau))
        rep.extras[f"theta({name})"] = val
        rep.add(f"theta bounded at {name}", 0.0 if np.isfinite(val) else np.inf, 0.0, "theta extends smoothly")
    return rep


def pair_from_profiles(P: MomentumProfile, c: ProjectiveValue, Phat: MomentumProfile, chat: ProjectiveValue,
                       degree: int = 64) -> BlowupPair:
    """Eigenvalue data of two fiber-model metrics on the same bundle, matched at equal fiber radius.

    tauhat(tau) solves dtauhat/dtau = a Qhat(tauhat) / (ahat Q(tau)) with tauhat(tau_*) = tauhat_*; then
    f = a (tauhat - chat) / (ahat (tau - c)) and chi = (a / ahat) dtauhat/dtau.
    """
    iv, ivh = P.interval, Phat.interval
    a, ah = P.a, Phat.a

    def rhs(tau, y):
        th = np.clip(y[0], ivh.tau_min, ivh.tau_max)
        return [a * Phat.Q(th) / (ah * P.Q(tau))]

    def tauhat(tau):
        tau = np.asarray(tau, dtype=float)
        out = np.empty_like(tau)
        lo_edge, hi_edge = tau <= iv.tau_min, tau >= iv.tau_max
        out[lo_edge], out[hi_edge] = ivh.tau_min, ivh.tau_max
        for mask, end in ((~lo_edge & (tau < P.tau_star), iv.tau_min), (~hi_edge & (tau >= P.tau_star), iv.tau_max)):
            if not mask.any():
                continue
            pts = tau[mask]
            stop = end + (P.tau_star - end) * 1e-12
            sol = solve_ivp(rhs, (P.tau_star, stop), [Phat.tau_star], method="DOP853", rtol=1e-13, atol=1e-15,
                            dense_output=True)
            out[mask] = sol.sol(pts)[0]
        return out

    T = cheb_fit(tauhat, iv, degree)
    dT = differentiate(T)
    if c.is_infinite or chat.is_infinite:
        if not (c.is_infinite and chat.is_infinite):
            raise ValueError("c and chat must both be finite or both infinite")
        f = cheb_fit(lambda t: (a / ah) * np.ones_like(t), iv, degree)
    else:
        f = cheb_fit(lambda t: a * (T(t) * chat.q - chat.p) * c.q / (ah * chat.q * (t * c.q - c.p)), iv, degree)
    chi = dT * (a / ah)
    return BlowupPair(f, chi, P, c)


def pair_from_change(model, change) -> BlowupPair:
    """Endpoint-extended eigenvalue data of a special biconformal change on a constant-c fiber model."""
    c = model.base.constant_c
    if c is None:
        raise ValueError("pair_from_change needs a fiber model with constant c")
    if change.H is None:
        raise ValueError("the change must carry H as a function of tau")
    P = model.profile
    iv = P.interval
    if change.S is not None:
        theta = differentiate(change.S)
    elif hasattr(change.theta, "along"):
        y = np.mean(model.base.box, axis=1)
        theta = cheb_fit(lambda tau: change.theta.along(y, tau), iv, FIT_DEGREE)
    else:
        raise ValueError("theta must come from S or from theta_from_H")
    chi = change.H
    f = chi + P.Q * theta
    return BlowupPair(f, chi, P, c)
