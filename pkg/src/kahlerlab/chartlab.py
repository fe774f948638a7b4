"""Tensor calculus on a four-dimensional chart, driven by Taylor jets.

Conventions, fixed here and used everywhere:

* ``J`` acts on vectors, ``(JX)^a = J^a_b X^b``; the Kaehler form is
  ``omega = g(J., .)``, stored as the matrix ``J^T g``.
* Two-forms are antisymmetric matrices, ``sigma = 1/2 sigma_ab dx^a ^ dx^b``, and
  ``<sigma, tau> = 1/2 sigma_ab tau^ab``.
* The Laplacian is ``div grad`` (negative at a maximum).
* ``ddbar(psi)`` returns ``2i d dbar psi = (Hess psi)(J., .) - (Hess psi)(., J.)``.
* The Ricci form is ``rho = Ric(J., .)``.
* For a two-form ``eta`` the endomorphism with ``g(Aw, .) = eta(w, .)`` is ``A = -g^{-1} eta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import jets as J
from .jets import Jet
from .report import ResidualReport

Field = Callable[[list], Jet]

EPS4 = np.zeros((4, 4, 4, 4))
for _perm in __import__("itertools").permutations(range(4)):
    _sign = np.linalg.det(np.eye(4)[list(_perm)])
    EPS4[_perm] = round(_sign)


@dataclass(frozen=True, eq=False)
class ChartMetric:
    """Metric and complex structure on a coordinate box.

    ``metric`` and ``cstruct`` map the list of four coordinate jets (each of
    shape ``(n,)``) to jets of shape ``(n, 4, 4)``.
    """

    metric: Callable[[list], Jet]
    cstruct: Callable[[list], Jet]
    box: np.ndarray
    name: str = "chart"

    def __post_init__(self):
        box = np.asarray(self.box, dtype=float)
        if box.shape != (4, 2) or np.any(box[:, 0] >= box[:, 1]):
            raise ValueError("chart box must be a (4, 2) array of increasing bounds")
        object.__setattr__(self, "box", box)

    def contains(self, points) -> bool:
        p = np.atleast_2d(points)
        return bool(np.all((p >= self.box[:, 0]) & (p <= self.box[:, 1])))

    def sample(self, n: int, rng: np.random.Generator, margin: float = 0.0) -> np.ndarray:
        lo = self.box[:, 0] + margin * (self.box[:, 1] - self.box[:, 0])
        hi = self.box[:, 1] - margin * (self.box[:, 1] - self.box[:, 0])
        return rng.uniform(lo, hi, size=(n, 4))

    def values(self, points) -> tuple[np.ndarray, np.ndarray]:
        X = [Jet.constant(c) for c in np.asarray(points, dtype=float).T]
        return self.metric(X).value, self.cstruct(X).value


@dataclass
class CurvaturePack:
    christoffels: np.ndarray  # (n, 4, 4, 4), index [n, k, i, j] for Gamma^k_ij
    ricci: np.ndarray
    scalar: np.ndarray
    ricci_form: np.ndarray
    kahler_form: np.ndarray


def wedge11(a, b):
    """Two-form a ^ b of two one-forms (batched)."""
    return J.einsum("na,nb->nab", a, b) - J.einsum("na,nb->nba", a, b)


def wedge22(s, t):
    """Coefficient of dx1^dx2^dx3^dx4 in s ^ t."""
    return 0.25 * J.einsum("ncd,ncd->n", J.einsum("abcd,nab->ncd", EPS4, s), t)


def raise_index(ginv, form):
    return J.einsum("nab,nb->na", ginv, form)


def lower_index(g, vec):
    return J.einsum("nab,nb->na", g, vec)


def pair(form, vec):
    return J.einsum("na,na->n", form, vec)


def compose_form_J(form, Jm):
    """The one-form ``form o J``."""
    return J.einsum("na,nab->nb", form, Jm)


class Geometry:
    """All metric quantities of a chart at a batch of points, as jets."""

    def __init__(self, chart: ChartMetric, points, X=None):
        self.chart = chart
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.X = J.seed(self.points) if X is None else X
        self.g = chart.metric(self.X)
        self.J = chart.cstruct(self.X)
        cond = np.linalg.cond(self.g.value)
        if not np.all(np.isfinite(cond)) or np.max(cond) > 1e12:
            raise ValueError(f"singular metric matrix, condition number {np.max(cond):.3e}")

    @classmethod
    def from_jets(cls, chart: ChartMetric, X) -> "Geometry":
        """Geometry on coordinate jets that were already seeded."""
        return cls(chart, np.column_stack([J.value(x) for x in X]), X)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @cached_property
    def ginv(self) -> Jet:
        return J.inv(self.g)

    @cached_property
    def dg(self) -> Jet:
        """``dg[n, k, i, j] = d_k g_ij``."""
        return J.stack([J.partial(self.g, k) for k in range(4)], axis=1)

    @cached_property
    def christoffel(self) -> Jet:
        """``Gamma[n, k, i, j] = Gamma^k_ij``."""
        dg = self.dg
        # T[n, m, i, j] = d_i g_mj + d_j g_mi - d_m g_ij
        T = dg.transpose(0, 2, 1, 3) + dg.transpose(0, 2, 3, 1) - dg
        return 0.5 * J.einsum("nkm,nmij->nkij", self.ginv, T)

    @cached_property
    def ricci(self) -> Jet:
        G = self.christoffel
        dG = J.stack([J.partial(G, k) for k in range(4)], axis=1)  # [n, d, l, i, k]
        term1 = J.einsum("nllik->nik", dG)
        term2 = J.einsum("nklil->nik", dG)
        GG = J.einsum("nllm,nmik->nik", G, G)
        tr = J.einsum("nlkm,nmil->nik", G, G)
        return term1 - term2 + GG - tr

    @cached_property
    def scalar(self) -> Jet:
        return J.einsum("nij,nij->n", self.ginv, self.ricci)

    @cached_property
    def omega(self) -> Jet:
        return J.einsum("nca,ncb->nab", self.J, self.g)

    @cached_property
    def rho(self) -> Jet:
        return J.einsum("nca,ncb->nab", self.J, self.ricci)

    @cached_property
    def volume_coefficient(self) -> Jet:
        """Coefficient of omega ^ omega."""
        return wedge22(self.omega, self.omega)

    # scalar fields ----------------------------------------------------
    def d(self, F: Jet) -> Jet:
        return J.gradient(F)

    def grad(self, F: Jet) -> Jet:
        return raise_index(self.ginv, J.gradient(F))

    def hessian(self, F: Jet) -> Jet:
        dF = J.gradient(F)
        ddF = J.stack([J.partial(dF, k) for k in range(4)], axis=-1)
        return ddF - J.einsum("nkij,nk->nij", self.christoffel, dF)

    def laplacian(self, F: Jet) -> Jet:
        return J.einsum("nij,nij->n", self.ginv, self.hessian(F))

    def ddbar(self, F: Jet) -> Jet:
        H = self.hessian(F)
        return J.einsum("nca,ncb->nab", self.J, H) - J.einsum("nac,ncb->nab", H, self.J)

    def directional(self, F: Jet, w) -> Jet:
        return pair(J.gradient(F), w)

    # forms and fields ---------------------------------------------------
    def exterior_derivative(self, sigma: Jet) -> Jet:
        """``(d sigma)_abc = d_a sigma_bc + d_b sigma_ca + d_c sigma_ab`` of a two-form."""
        ds = J.stack([J.partial(sigma, k) for k in range(4)], axis=1)  # [n, a, b, c]
        return ds + ds.transpose(0, 2, 3, 1) + ds.transpose(0, 3, 1, 2)

    def divergence(self, w: Jet) -> Jet:
        """Divergence of a vector field (shape (n, 4)) or an endomorphism (shape (n, 4, 4))."""
        G = self.christoffel
        dw = J.stack([J.partial(w, k) for k in range(4)], axis=1)
        if w.ndim == 2:
            return J.einsum("nkk->n", dw) + J.einsum("nkkl,nl->n", G, w)
        return (
            J.einsum("nkkj->nj", dw)
            + J.einsum("nkkl,nlj->nj", G, w)
            - J.einsum("nlkj,nkl->nj", G, w)
        )

    def inner2(self, s, t) -> Jet:
        """Pointwise inner product 1/2 s_ab t^ab of two-forms."""
        t_up = J.einsum("nac,nbd,ncd->nab", self.ginv, self.ginv, t)
        return 0.5 * J.einsum("nab,nab->n", s, t_up)

    def endomorphism(self, eta) -> Jet:
        """``A`` with ``g(Aw, .) = eta(w, .)``."""
        return -J.einsum("nab,nbc->nac", self.ginv, eta)

    def nijenhuis(self) -> Jet:
        Jm = self.J
        dJ = J.stack([J.partial(Jm, k) for k in range(4)], axis=1)  # [n, l, i, k] = d_l J^i_k
        t1 = J.einsum("nlj,nlik->nijk", Jm, dJ)
        t2 = J.einsum("nlk,nlij->nijk", Jm, dJ)
        inner = J.einsum("njlk->nljk", dJ) - J.einsum("nklj->nljk", dJ)
        t3 = J.einsum("nil,nljk->nijk", Jm, inner)
        return t1 - t2 - t3


class KillingModel:
    """A chart together with a Killing potential, all fields derived by differentiation.

    Fiber models provide the same interface with closed-form fields.
    """

    def __init__(self, chart: ChartMetric, tau: Field, sampler=None):
        self.chart = chart
        self._tau = tau
        self._sampler = sampler

    def tau(self, X):
        return self._tau(X)

    def dtau(self, X):
        return J.gradient(self._tau(X))

    def v(self, X):
        return raise_index(J.inv(self.chart.metric(X)), self.dtau(X))

    def u(self, X):
        return J.einsum("nab,nb->na", self.chart.cstruct(X), self.v(X))

    def xi(self, X):
        return lower_index(self.chart.metric(X), self.u(X))

    def Q(self, X):
        return pair(self.dtau(X), self.v(X))

    def Y(self, X):
        return Geometry.from_jets(self.chart, X).laplacian(self._tau(X))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self._sampler is not None:
            return self._sampler(n, rng)
        return self.chart.sample(n, rng, margin=0.05)


def curvature(chart: ChartMetric, points) -> CurvaturePack:
    geo = Geometry(chart, points)
    return CurvaturePack(
        christoffels=geo.christoffel.value,
        ricci=geo.ricci.value,
        scalar=geo.scalar.value,
        ricci_form=geo.rho.value,
        kahler_form=geo.omega.value,
    )


def hessian(chart, F: Field, points):
    geo = Geometry(chart, points)
    return geo.hessian(F(geo.X)).value


def gradient(chart, F: Field, points):
    geo = Geometry(chart, points)
    return geo.grad(F(geo.X)).value


def laplacian(chart, F: Field, points):
    geo = Geometry(chart, points)
    return geo.laplacian(F(geo.X)).value


def ddbar(chart, F: Field, points):
    geo = Geometry(chart, points)
    return geo.ddbar(F(geo.X)).value


def exterior_derivative(chart, sigma: Callable, points):
    geo = Geometry(chart, points)
    return geo.exterior_derivative(sigma(geo.X)).value


def divergence(chart, w: Callable, points):
    geo = Geometry(chart, points)
    return geo.divergence(w(geo.X)).value


def christoffel_fd(chart: ChartMetric, points, h: float = 1e-5) -> np.ndarray:
    """Christoffel symbols from central differences of metric values (an independent oracle)."""
    points = np.atleast_2d(points)
    g0, _ = chart.values(points)
    dg = np.empty(points.shape[:1] + (4, 4, 4))
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        gp, _ = chart.values(points + e)
        gm, _ = chart.values(points - e)
        dg[:, k] = (gp - gm) / (2 * h)
    T = dg.transpose(0, 2, 1, 3) + dg.transpose(0, 2, 3, 1) - dg
    return 0.5 * np.einsum("nkm,nmij->nkij", np.linalg.inv(g0), T)


def _maxabs(x) -> float:
    x = J.value(x)
    return float(np.max(np.abs(x))) if x.size else 0.0


def check_kahler(chart: ChartMetric, points) -> ResidualReport:
    geo = Geometry(chart, points)
    Jv, gv = geo.J.value, geo.g.value
    n = geo.n
    rep = ResidualReport()
    rep.add("J^2 + Id", _maxabs(Jv @ Jv + np.eye(4)), 1e-10, "J is a complex structure", n)
    rep.add("g(J.,J.) - g", _maxabs(np.swapaxes(Jv, 1, 2) @ gv @ Jv - gv), 1e-10, "g is Hermitian", n)
    rep.add("d omega", _maxabs(geo.exterior_derivative(geo.omega)), 1e-7, "omega = g(J.,.) is closed", n)
    rep.add("Nijenhuis", _maxabs(geo.nijenhuis()), 1e-7, "J is integrable", n)
    eig = np.linalg.eigvalsh(0.5 * (gv + np.swapaxes(gv, 1, 2)))
    rep.extras["min_metric_eigenvalue"] = float(eig.min())
    rep.add("metric positivity", 0.0 if eig.min() > 0 else -eig.min() + 1e-300, 0.0, "g positive definite", n)
    return rep


def check_identities(chart: ChartMetric, tau: Field, psi: Field, eta, points, tol: float = 1e-7,
                     eta_is_closed: bool = True, defect: float = 0.0) -> ResidualReport:
    """Pointwise Kaehler identities, each side computed along a separate code path.

    ``eta`` maps coordinate jets to a two-form; pass the exact form
    ``2i ddbar psi`` (or any closed form) to test the closedness criterion.
    A nonzero ``defect`` adds ``defect * (1 + x_0^2)`` to one side of every
    identity, to confirm that each residual actually registers a mismatch.
    """
    geo = Geometry(chart, points)
    n = geo.n
    bump = defect * (1 + np.atleast_2d(points)[:, 0] ** 2)

    def _res(diff) -> float:
        d = J.value(diff)
        return _maxabs(d + bump.reshape((n,) + (1,) * (d.ndim - 1)))
    X = geo.X
    rep = ResidualReport()
    T = tau(X)
    P = psi(X)
    g, ginv, Jm = geo.g, geo.ginv, geo.J
    dtau = J.gradient(T)
    v = raise_index(ginv, dtau)
    u = J.einsum("nab,nb->na", Jm, v)
    xi = lower_index(g, u)
    Htau = geo.hessian(T)

    herm = J.einsum("nca,ncd,ndb->nab", Jm, Htau, Jm) - Htau
    rep.add("Hess tau Hermitian", _res(herm), tol, "Killing potential: Hess tau is Hermitian", n)

    # 2 i_v(i ddbar psi) = d(d_u psi) - [d(d_v psi)] J
    dd = geo.ddbar(P)
    lhs = J.einsum("na,nab->nb", v, dd)
    dP = J.gradient(P)
    dv_psi = pair(dP, v)
    du_psi = pair(dP, u)
    rhs = J.gradient(du_psi) - compose_form_J(J.gradient(dv_psi), Jm)
    rep.add("2 i_v(i ddbar psi) = d(d_u psi) - d(d_v psi) J", _res(lhs - rhs), tol,
            "contraction of i ddbar psi with a real-holomorphic field", n)

    # v is also the gradient of tau + d_v psi for omega_hat = omega + 2i ddbar psi, when d_u psi = 0
    rep.add("d_u psi (hypothesis for the ghat gradient)", _maxabs(du_psi), tol, "d_{Jv} psi = 0", n,
            informational=True)
    ghat = J.einsum("nac,ncb->nab", geo.omega + dd, Jm)
    lhs2 = J.einsum("na,nab->nb", v, ghat)
    rhs2 = dtau + J.gradient(dv_psi)
    # where d_u psi does not vanish the two sides differ by d(d_u psi) o J
    res2 = lhs2 - rhs2 - compose_form_J(J.gradient(du_psi), Jm)
    rep.add("ghat(v, .) = d(tau + d_v psi)", _res(res2),
            tol, "v is also the ghat-gradient of tau + d_v psi", n)

    if eta is not None:
        E = eta(X)
        A = geo.endomorphism(E)
        JA = J.einsum("nab,nbc->nac", Jm, A)
        lhs3 = J.gradient(geo.inner2(geo.omega, E))
        rhs3 = -geo.divergence(JA)
        res3 = _res(lhs3 - rhs3)
        closed = _maxabs(geo.exterior_derivative(E))
        rep.add("d<omega,eta> + div JA", res3, tol, "closedness criterion for two-forms on a Kaehler surface",
                n, informational=not eta_is_closed)
        rep.extras["d eta"] = closed

        # <sigma, alpha ^ alpha'> = sigma(w, w') with w = v, w' = u and w' = e_1
        sig = E
        for label, w2 in (("u", u), ("e1", Jet.constant(np.tile(np.eye(4)[0], (n, 1))))):
            a1, a2 = lower_index(g, v), lower_index(g, w2)
            via_inner = geo.inner2(sig, wedge11(a1, a2))
            direct = J.einsum("na,nab,nb->n", v, sig, w2)
            rep.add(f"<sigma, alpha^alpha'> = sigma(v, {label})", _res(via_inner - direct), tol,
                    "inner product with a decomposable two-form", n)

    # Ricci and Hessian contracted with v
    Y = geo.laplacian(T)
    Q = pair(dtau, v)
    ric_v = J.einsum("na,nab->nb", v, geo.ricci)
    rep.add("2 Ric(v,.) + dY", _res(2 * ric_v + J.gradient(Y)), 10 * tol, "2 Ric(v,.) = -dY", n)
    hess_v = J.einsum("na,nab->nb", v, Htau)
    rep.add("2 Hess tau(v,.) - dQ", _res(2 * hess_v - J.gradient(Q)), 10 * tol, "2 Hess tau(v,.) = dQ", n)

    # 4 zeta ^ alpha ^ xi = [tr(A) g(v,v) - 2 g(Av, v)] omega ^ omega for Hermitian A
    vol = geo.volume_coefficient
    for label, B in (("Hess tau", Htau), ("Ric", geo.ricci)):
        A = J.einsum("nab,nbc->nac", ginv, B)
        zeta = J.einsum("nca,ncb->nab", J.einsum("nab,nbc->nac", Jm, A), g)
        trA = J.einsum("naa->n", A)
        lhs4 = 4 * wedge22(zeta, wedge11(dtau, xi))
        rhs4 = (trA * Q - 2 * J.einsum("na,nab,nb->n", v, B, v)) * vol
        rep.add(f"4 zeta^alpha^xi identity ({label})", _res(lhs4 - rhs4), tol,
                "4 zeta^alpha^xi = [tr(A) g(v,v) - 2 g(Av,v)] omega^omega", n)
        lhs5 = 4 * wedge22(zeta, geo.omega)
        rep.add(f"4 zeta^omega = tr(A) omega^omega ({label})", _res(lhs5 - trA * vol), tol,
                "trace form of the zeta identity", n)

    # 4 (i ddbar psi) ^ omega = (Lap psi) omega ^ omega
    lhs6 = 2 * wedge22(dd, geo.omega)
    rep.add("4 (i ddbar psi)^omega = (Lap psi) omega^omega", _res(lhs6 - geo.laplacian(P) * vol), tol,
            "trace of i ddbar", n)
    return rep
