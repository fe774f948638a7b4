"""Special biconformal changes ghat = f g - theta (dtau (x) dtau + xi (x) xi).

A change is described by chart fields ``f``, ``theta`` and ``tauhat`` on a model
(a :class:`~kahlerlab.fibermodel.FiberModel` or a
:class:`~kahlerlab.chartlab.KillingModel`).  Its eigenvalues relative to ``g`` are
``f`` on the horizontal plane and ``f - Q theta`` on the plane spanned by
``v = grad tau`` and ``u = J v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import jets as J
from .chartlab import ChartMetric, Geometry, compose_form_J, lower_index, pair, raise_index, wedge11
from .jets import Jet
from .report import ResidualReport
from .scalarfun import TauFunction, antiderivative, cheb_fit, differentiate, identity

DEFAULT_SAMPLES = 200
HYPOTHESIS_TOL = 1e-6
TRIVIAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BiconfChange:
    """Data of a special biconformal change on a model.

    ``f``, ``theta``, ``tauhat``, ``H_field`` and ``dH_field`` are chart fields
    (callables on coordinate jets).  ``H_field`` is ``f - Q theta`` and ``dH_field``
    its tau-derivative.  When these come from functions of tau, ``H`` (already
    shifted) and its antiderivative ``P`` hold the functions themselves.
    """

    model: object
    f: Callable
    theta: Callable
    tauhat: Callable
    H_field: Callable
    dH_field: Callable
    shift: float = 0.0
    S: TauFunction | None = None
    H: TauFunction | None = None
    P: TauFunction | None = None
    origin: str = ""
    report: ResidualReport = field(default_factory=ResidualReport)

    def is_trivial(self, points) -> bool:
        X = [Jet.constant(c) for c in np.atleast_2d(points).T]
        f = J.value(self.f(X))
        th = J.value(self.theta(X))
        return bool(np.ptp(f) < TRIVIAL_TOL and np.max(np.abs(th)) < TRIVIAL_TOL)

    def combine(self, p: float, q: float, s: float) -> "BiconfChange":
        """The change of the pair (p ghat + q g, p tauhat + q tau + s)."""
        m = self.model
        f, th, th_hat, H, dH = self.f, self.theta, self.tauhat, self.H_field, self.dH_field
        return replace(
            self,
            f=lambda X: p * f(X) + q,
            theta=lambda X: p * th(X),
            tauhat=lambda X: p * th_hat(X) + q * m.tau(X) + s,
            H_field=lambda X: p * H(X) + q,
            dH_field=lambda X: p * dH(X),
            S=None if self.S is None else self.S * p,
            H=None if self.H is None else self.H * p + q,
            P=None if self.P is None else self.P * p + identity(self.P.interval) * q + s,
            origin=f"{self.origin} combined (p={p:g}, q={q:g}, s={s:g})",
        )


def _tau_field(model, F: TauFunction):
    return lambda X: J.apply_tau_function(F, model.tau(X))


def _scale(s, w):
    return J.einsum("n,na->na", s, w)


def _sample(model, n: int, seed: int):
    return model.sample(n, np.random.default_rng(seed))


def _constants(X):
    return [Jet.constant(J.value(x)) for x in X]


def positivity_shift(H_vals: np.ndarray, Qtheta_vals: np.ndarray) -> float:
    """Smallest constant making H + shift > 0 and H + shift + Q theta > 0 on the samples, plus a margin.

    The margin is a tenth of the spread of |Q theta|, or 1 when that spread vanishes.
    """
    base = max(0.0, -float(np.min(H_vals + Qtheta_vals)), -float(np.min(H_vals)))
    spread = float(np.ptp(np.abs(Qtheta_vals)))
    margin = 0.1 * spread
    if margin <= 1e-12 * max(1.0, float(np.max(np.abs(H_vals)))):
        margin = 1.0
    if base == 0.0 and float(np.min(H_vals)) > margin and float(np.min(H_vals + Qtheta_vals)) > margin:
        return 0.0
    return base + margin


def H_from_S(model, S: TauFunction, y=None, degree: int = 64) -> TauFunction:
    """H with H' = -(S'' Q + S' Y) using the closed-form Y over a base point, anchored at tau_min."""
    iv = model.interval
    Qf = model.profile.Q

    def dH(t):
        _, s1, s2 = S.derivatives(t, 2)
        return -(s2 * Qf(t) + s1 * model.Y_along(t, y))

    return antiderivative(cheb_fit(dH, iv, degree), iv.tau_min)


def _finish(model, theta, H_tau: TauFunction, points, S=None, origin="", extra: ResidualReport | None = None,
            auto_shift: bool = True) -> BiconfChange:
    Xc = _constants(J.seed(points))
    tau_v = J.value(model.tau(Xc))
    Q_v = J.value(model.Q(Xc))
    th_v = J.value(theta(Xc)) * np.ones_like(tau_v)
    H_v = H_tau(tau_v)
    shift = positivity_shift(H_v, Q_v * th_v) if auto_shift else 0.0
    Hs = H_tau + shift
    P = antiderivative(Hs, model.interval.tau_min)
    dHs = differentiate(Hs)

    def f(X):
        return J.apply_tau_function(Hs, model.tau(X)) + model.Q(X) * theta(X)

    rep = ResidualReport()
    if extra is not None:
        rep.extend(extra)
    rep.extras["shift"] = shift
    change = BiconfChange(
        model=model,
        f=f,
        theta=theta,
        tauhat=_tau_field(model, P),
        H_field=_tau_field(model, Hs),
        dH_field=_tau_field(model, dHs),
        shift=shift,
        S=S,
        H=Hs,
        P=P,
        origin=origin,
        report=rep,
    )
    rep.extras["trivial"] = change.is_trivial(points)
    return change


def potential_hypothesis_residual(model, S: TauFunction, H: TauFunction, points) -> np.ndarray:
    """|Lap[S(tau)] + H'(tau)| at the points, with the Laplacian taken by the chart geometry."""
    geo = Geometry(model.chart, points)
    X = geo.X
    tau = model.tau(X)
    lap = geo.laplacian(J.apply_tau_function(S, tau)).value
    return np.abs(lap + differentiate(H)(tau.value))


def from_SH(model, S: TauFunction, H: TauFunction, points=None, seed: int = 0,
            tol: float = HYPOTHESIS_TOL) -> BiconfChange:
    """Change with theta = S'(tau), valid when Lap[S(tau)] = -H'(tau)."""
    if points is None:
        points = _sample(model, DEFAULT_SAMPLES, seed)
    res = potential_hypothesis_residual(model, S, H, points)
    if np.max(res) > tol:
        worst = np.argsort(res)[::-1][:3]
        detail = "; ".join(f"x={np.array2string(points[i], precision=4)} residual={res[i]:.3e}" for i in worst)
        raise ValueError(f"Lap[S(tau)] + H'(tau) = {np.max(res):.3e} exceeds {tol:g} (worst points: {detail})")
    dS = differentiate(S)
    theta = _tau_field(model, dS)
    rep = ResidualReport()
    rep.add("Lap[S(tau)] + H'(tau)", float(np.max(res)), tol, "theta = dS/dtau hypothesis", len(points))
    return _finish(model, theta, H, points, S=S, origin="S,H", extra=rep)


def theta_condition_residuals(model, theta, H: TauFunction, points) -> tuple[np.ndarray, np.ndarray]:
    """|d_u theta| and |d_v theta + theta Y + H'(tau)| at the points."""
    X = J.seed(points)
    th = theta(X)
    dth = J.gradient(th)
    du = pair(dth, model.u(X)).value
    dv = pair(dth, model.v(X))
    tau = model.tau(X)
    comb = dv.value + th.value * J.value(model.Y(X)) + differentiate(H)(tau.value)
    return np.abs(du), np.abs(comb)


def from_theta_field(model, theta, H: TauFunction, points=None, seed: int = 0,
                     tol: float = HYPOTHESIS_TOL) -> BiconfChange:
    if points is None:
        points = _sample(model, DEFAULT_SAMPLES, seed)
    du, comb = theta_condition_residuals(model, theta, H, points)
    failed = []
    if np.max(du) > tol:
        failed.append(f"d_u theta = 0 (residual {np.max(du):.3e})")
    if np.max(comb) > tol:
        failed.append(f"d_v theta + theta Y = -H'(tau) (residual {np.max(comb):.3e})")
    if failed:
        raise ValueError("theta rejected: " + "; ".join(failed))
    rep = ResidualReport()
    rep.add("d_u theta", float(np.max(du)), tol, "d_u theta = 0", len(points))
    rep.add("d_v theta + theta Y + H'", float(np.max(comb)), tol, "d_v theta + theta Y = -H'(tau)", len(points))
    return _finish(model, theta, H, points, origin="theta,H", extra=rep)


def from_potential_psi(model, psi, points=None, seed: int = 0, du_tol: float = 1e-7,
                       wedge_tol: float = 1e-6) -> BiconfChange:
    """Change whose Kaehler form is omega + 2i ddbar psi, for psi with d_u psi = 0 and d_v psi a function of tau."""
    if points is None:
        points = _sample(model, DEFAULT_SAMPLES, seed)
    geo = Geometry(model.chart, points)
    X = geo.X
    P = psi(X)
    dP = J.gradient(P)
    du = np.abs(pair(dP, model.u(X)).value)
    dvpsi = pair(dP, model.v(X))
    wedge = np.abs(wedge11(J.gradient(dvpsi), model.dtau(X)).value).max(axis=(1, 2))
    if np.max(du) > du_tol:
        raise ValueError(f"hypothesis d_u psi = 0 fails: max |d_u psi| = {np.max(du):.3e}")
    if np.max(wedge) > wedge_tol:
        raise ValueError(f"hypothesis d(d_v psi) ^ dtau = 0 fails: residual {np.max(wedge):.3e}")

    def parts(X):
        g = Geometry.from_jets(model.chart, X)
        Pj = psi(X)
        lap = g.laplacian(Pj)
        v = model.v(X)
        dv = pair(J.gradient(Pj), v)
        Q = model.Q(X)
        ddv = pair(J.gradient(dv), v) / Q  # d(d_v psi)/dtau
        return lap, dv, ddv, Q

    def f(X):
        lap, _, ddv, _ = parts(X)
        return lap + 1.0 - ddv

    def theta(X):
        lap, _, ddv, Q = parts(X)
        return (lap - 2.0 * ddv) / Q

    def tauhat(X):
        _, dv, _, _ = parts(X)
        return model.tau(X) + dv

    def H(X):
        _, _, ddv, _ = parts(X)
        return 1.0 + ddv

    def dH(X):
        hv = H(X)
        return pair(J.gradient(hv), model.v(X)) / model.Q(X)

    rep = ResidualReport()
    rep.add("d_u psi", float(np.max(du)), du_tol, "d_u psi = 0", len(points))
    rep.add("d(d_v psi) ^ dtau", float(np.max(wedge)), wedge_tol, "d_v psi is a function of tau", len(points))

    # omega_hat two ways: omega + 2i ddbar psi and f omega + theta xi ^ dtau
    direct = geo.omega + geo.ddbar(P)
    lap, _, ddv, Q = parts(X)
    fv = lap + 1.0 - ddv
    thv = (lap - 2.0 * ddv) / Q
    assembled = geo.omega * fv.value[:, None, None] + wedge11(model.xi(X), model.dtau(X)) * thv.value[:, None, None]
    rep.add("omega + 2i ddbar psi vs f omega + theta xi^dtau", float(np.max(np.abs((direct - assembled).value))),
            1e-6, "Kaehler form of the change", len(points))
    change = BiconfChange(model=model, f=f, theta=theta, tauhat=tauhat, H_field=H, dH_field=dH, origin="psi",
                          report=rep)
    rep.extras["trivial"] = change.is_trivial(points)
    return change


class HatMetric:
    """The metric ghat of a change, packaged as a chart metric with the same complex structure."""

    def __init__(self, model, change: BiconfChange):
        self.model = model
        self.change = change
        self.chart = ChartMetric(self.metric, model.chart.cstruct, model.chart.box, model.chart.name + "^")

    def metric(self, X) -> Jet:
        m, c = self.model, self.change
        g = m.chart.metric(X)
        dtau = m.dtau(X)
        xi = lower_index(g, m.u(X))
        f = c.f(X)
        th = c.theta(X)
        outer = J.einsum("na,nb->nab", dtau, dtau) + J.einsum("na,nb->nab", xi, xi)
        return J.einsum("n,nab->nab", f, g) - J.einsum("n,nab->nab", th, outer)

    def omega(self, X) -> Jet:
        return J.einsum("nca,ncb->nab", self.model.chart.cstruct(X), self.metric(X))

    def omega_formula(self, X) -> Jet:
        m, c = self.model, self.change
        g = m.chart.metric(X)
        om = J.einsum("nca,ncb->nab", m.chart.cstruct(X), g)
        xi = lower_index(g, m.u(X))
        return J.einsum("n,nab->nab", c.f(X), om) + J.einsum("n,nab->nab", c.theta(X), wedge11(xi, m.dtau(X)))


def hat_metric(model, change: BiconfChange, points=None, seed: int = 0) -> HatMetric:
    hm = HatMetric(model, change)
    if points is None:
        points = _sample(model, 50, seed)
    X = _constants(J.seed(points))
    eig = np.linalg.eigvalsh(J.value(hm.metric(X)))
    if np.min(eig) <= 0:
        raise ValueError(f"ghat is not positive definite: smallest eigenvalue {np.min(eig):.3e}")
    return hm


def verify_change(model, change: BiconfChange, points, tol: float = 1e-6) -> ResidualReport:
    """Residuals of the four conditions, closedness, gradient condition and eigenvalue structure."""
    n = len(points)
    hm = HatMetric(model, change)
    geo = Geometry(model.chart, points)
    X = geo.X
    rep = ResidualReport()
    tau = model.tau(X)
    dtau = model.dtau(X)
    v, u = model.v(X), model.u(X)
    Q = model.Q(X)
    Y = model.Y(X)
    f, th, th_hat = change.f(X), change.theta(X), change.tauhat(X)
    Hf, dHf = change.H_field(X), change.dH_field(X)
    xi = lower_index(geo.g, u)

    dth = J.gradient(th_hat)
    rep.add("(i) dtauhat ^ dtau", np.max(np.abs(wedge11(dth, dtau).value)), tol, "tauhat is a function of tau", n)
    rep.add("(ii) f - Q theta - H(tau)", np.max(np.abs((f - Q * th - Hf).value)), tol, "f - Q theta = H(tau)", n)
    dtheta = J.gradient(th)
    du = pair(dtheta, u)
    dv = pair(dtheta, v)
    rep.add("(iii) d_u theta", np.max(np.abs(du.value)), tol, "d_u theta = 0", n)
    rep.add("(iii) d_v theta + theta Y + H'", np.max(np.abs((dv + th * Y + dHf).value)), tol,
            "d_v theta + theta Y = -H'(tau)", n)
    fv, qth = f.value, (Q * th).value
    margin = float(np.min(fv - np.maximum(qth, 0.0)))
    rep.add("(iv) positivity f > max(Q theta, 0)", 0.0 if margin > 0 else -margin + 1e-300, 0.0,
            "f > max(Q theta, 0)", n)
    rep.extras["positivity_margin"] = margin

    # tauhat = P(tau) with P' = H
    if change.P is not None and change.H is not None:
        t = np.linspace(model.interval.tau_min, model.interval.tau_max, 101)
        rep.add("P' - H", np.max(np.abs(differentiate(change.P)(t) - change.H(t))), 1e-10,
                "H = dP/dtau", len(t))

    ghat = hm.metric(X)
    omega_hat = J.einsum("nca,ncb->nab", geo.J, ghat)
    rep.add("d omega_hat", np.max(np.abs(geo.exterior_derivative(omega_hat).value)), tol,
            "omega_hat is closed", n)
    combo = J.gradient(f - Q * th) + _scale(dv + th * Y, dtau) + _scale(du, xi)
    rep.add("closedness combination", np.max(np.abs(combo.value)), tol,
            "d(f - Q theta) + (d_v theta + theta Y) dtau + (d_u theta) xi = 0", n)
    grad_res = J.einsum("na,nab->nb", v, ghat) - J.gradient(th_hat)
    rep.add("ghat(v,.) - dtauhat", np.max(np.abs(grad_res.value)), tol, "v is the ghat-gradient of tauhat", n)
    form_res = omega_hat.value - hm.omega_formula(X).value
    rep.add("omega_hat vs f omega + theta xi^dtau", np.max(np.abs(form_res)), 1e-10, "Kaehler form of ghat", n)

    gv, ghv = geo.g.value, ghat.value
    ghat_eig = np.linalg.eigvalsh(ghv)
    rep.add("ghat positive definite", 0.0 if ghat_eig.min() > 0 else -ghat_eig.min() + 1e-300, 0.0,
            "ghat is a metric", n)
    rep.extras["ghat_min_eigenvalue"] = float(ghat_eig.min())
    rel = np.sort(np.linalg.eigvals(np.linalg.solve(gv, ghv)).real, axis=1)
    expected = np.sort(np.column_stack([fv, fv, fv - qth, fv - qth]), axis=1)
    rep.add("relative eigenvalues {f, f - Q theta}", np.max(np.abs(rel - expected)), 1e-8,
            "eigenvalues of ghat relative to g", n)
    # real 4x4 determinants: the ratio is gamma squared, gamma = (f - Q theta) f
    ratio = np.linalg.det(ghv) / np.linalg.det(gv)
    gamma = (fv - qth) * fv
    rep.add("det ghat / det g - gamma^2", np.max(np.abs(ratio - gamma**2) / gamma**2), 1e-8,
            "volume ratio gamma = (f - Q theta) f", n)
    rep.extras["trivial"] = change.is_trivial(points)
    return rep
