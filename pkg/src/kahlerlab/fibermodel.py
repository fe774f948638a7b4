"""Explicit Kaehler surfaces with a Killing potential whose gradient is geodesic.

The total space of a Hermitian line bundle over a surface chart carries the
metric ``phi(tau, y) h`` on horizontal vectors and ``Q(tau) / (a r)^2`` times the
Euclidean fiber metric on vertical ones, where the fiber radius ``r`` and the
moment coordinate ``tau`` are related by ``dr/dtau = a r / Q`` and
``phi = (tau - c) / (tau_* - c)``.  The function ``c`` on the base takes values
in the projective line, written ``[p : q]`` so that ``c = p/q`` and ``c = oo``
is ``[1 : 0]``.

Chart coordinates are ``(y1, y2, z1, z2)``.  Horizontal lifts are
``d/dy_j - alpha_j d/dphi`` with ``d/dphi = -z2 d/dz1 + z1 d/dz2``; the metric is
closed exactly when ``d alpha = a q / (tau_* q - p) * omega_h``, where
``omega_h = sqrt(det h) dy1 ^ dy2``.  With ``Omega = -d alpha`` this is the
curvature ``-a (tau_* - c)^{-1} omega_h`` of the connection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import jets as J
from .chartlab import ChartMetric, Geometry, lower_index, pair, raise_index
from .jets import Jet
from .profiles import MomentumProfile, RadiusMap, radius_map
from .report import ResidualReport
from .scalarfun import Interval, TauFunction, antiderivative, differentiate, identity, moments, smooth_divide_by_Q

J0 = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class ProjectiveValue:
    """The point ``[p : q]`` of the real projective line."""

    p: float
    q: float

    def __post_init__(self):
        if self.p == 0 and self.q == 0:
            raise ValueError("[0 : 0] is not a projective point")

    @classmethod
    def finite(cls, c: float) -> "ProjectiveValue":
        return cls(float(c), 1.0)

    @classmethod
    def infinity(cls) -> "ProjectiveValue":
        return cls(1.0, 0.0)

    @property
    def is_infinite(self) -> bool:
        return self.q == 0

    @property
    def value(self) -> float:
        return np.inf if self.q == 0 else self.p / self.q

    def check_outside(self, interval: Interval) -> None:
        lo = interval.tau_min * self.q - self.p
        hi = interval.tau_max * self.q - self.p
        if lo * hi <= 0:
            raise ValueError(f"c = [{self.p} : {self.q}] lies in [{interval.tau_min}, {interval.tau_max}]")


def _ones(y):
    return Jet.constant(np.ones(y.shape))


def _zeros(y):
    return Jet.constant(np.zeros(y.shape))


@dataclass(frozen=True, eq=False)
class BaseSurfaceChart:
    """Base surface data on a coordinate rectangle.

    ``h(y1, y2)`` returns a ``(n, 2, 2)`` jet, ``c(y1, y2)`` a pair ``(p, q)`` of
    jets, ``alpha(y1, y2)`` a pair of jets for the connection form
    ``alpha_1 dy1 + alpha_2 dy2``.
    """

    h: Callable
    c: Callable
    alpha: Callable
    box: np.ndarray
    name: str = "base"
    constant_c: ProjectiveValue | None = None

    def c_values(self, y) -> tuple[np.ndarray, np.ndarray]:
        y = np.atleast_2d(y)
        p, q = self.c(Jet.constant(y[:, 0]), Jet.constant(y[:, 1]))
        return J.value(p) * np.ones(len(y)), J.value(q) * np.ones(len(y))


def flat_h(y1, y2):
    one, zero = _ones(y1), _zeros(y1)
    return J.block([[one, zero], [zero, one]])


def flat_constant_c_base(a: float, tau_star: float, c: ProjectiveValue = ProjectiveValue(-1.0, 1.0),
                         half_width: float = 1.0) -> BaseSurfaceChart:
    """Flat base with constant c and the symmetric gauge alpha = kappa (-y2, y1) / 2."""
    kappa = a * c.q / (tau_star * c.q - c.p)

    def cfun(y1, y2):
        return c.p * _ones(y1), c.q * _ones(y1)

    def alpha(y1, y2):
        return -0.5 * kappa * y2, 0.5 * kappa * y1

    box = np.array([[-half_width, half_width]] * 2)
    return BaseSurfaceChart(flat_h, cfun, alpha, box, "flat-constant-c", constant_c=c)


def flat_variable_c_base(a: float, tau_star: float, c0: float = -1.0, amplitude: float = 0.2,
                         half_width: float = 1.0) -> BaseSurfaceChart:
    """Flat base with c(y) = c0 - amplitude sin(y1) and alpha = (-y2 a / (tau_* - c(y1)), 0)."""

    def cfun(y1, y2):
        return c0 - amplitude * J.sin(y1), _ones(y1)

    def alpha(y1, y2):
        return -y2 * a / (tau_star - c0 + amplitude * J.sin(y1)), _zeros(y1)

    box = np.array([[-half_width, half_width]] * 2)
    return BaseSurfaceChart(flat_h, cfun, alpha, box, "flat-variable-c")


def round_base(a: float, tau_star: float, curvature: float, c: ProjectiveValue,
               half_width: float = 0.5) -> BaseSurfaceChart:
    """Constant-curvature base ``h = 4 |dy|^2 / (1 + K |y|^2)^2`` with constant c."""
    K = float(curvature)
    kappa = a * c.q / (tau_star * c.q - c.p)

    def conformal(y1, y2):
        return 1 + K * (y1 * y1 + y2 * y2)

    def h(y1, y2):
        lam = 4.0 / (conformal(y1, y2) ** 2)
        zero = _zeros(y1)
        return J.block([[lam, zero], [zero, lam]])

    def cfun(y1, y2):
        return c.p * _ones(y1), c.q * _ones(y1)

    def alpha(y1, y2):
        w = conformal(y1, y2)
        return -2 * kappa * y2 / w, 2 * kappa * y1 / w

    box = np.array([[-half_width, half_width]] * 2)
    return BaseSurfaceChart(h, cfun, alpha, box, f"round-K{K:g}", constant_c=c)


@dataclass(frozen=True, eq=False)
class FiberModelSpec:
    profile: MomentumProfile
    base: BaseSurfaceChart
    epsilon: float | None = None

    @property
    def interval(self) -> Interval:
        return self.profile.interval

    @property
    def a(self) -> float:
        return self.profile.a

    @property
    def tau_star(self) -> float:
        return self.interval.midpoint


class FiberModel:
    """A fiber-model metric together with its Killing potential and closed-form fields."""

    def __init__(self, spec: FiberModelSpec):
        self.spec = spec
        self.profile = spec.profile
        self.interval = spec.interval
        self.a = spec.a
        self.tau_star = spec.tau_star
        self.base = spec.base
        self.radius: RadiusMap = radius_map(spec.profile, spec.epsilon)
        self.inner = self.radius.interval
        if self.base.constant_c is not None:
            self.base.constant_c.check_outside(self.interval)
        self._check_c_outside()
        r_hi = float(np.exp(self.radius.logr(self.inner.tau_max)))
        box = np.vstack([self.base.box, [[-r_hi, r_hi], [-r_hi, r_hi]]])
        self.chart = ChartMetric(self.metric, self.cstruct, box, f"fiber[{self.base.name}]")

    def _check_c_outside(self):
        grid = np.stack(np.meshgrid(*(np.linspace(lo, hi, 9) for lo, hi in self.base.box)), -1).reshape(-1, 2)
        p, q = self.base.c_values(grid)
        lo = self.interval.tau_min * q - p
        hi = self.interval.tau_max * q - p
        # tau - c must keep one sign on the whole interval and over the whole base chart
        if np.any(lo * hi <= 0) or not (np.all(lo > 0) or np.all(lo < 0)):
            raise ValueError("c takes values inside the moment interval on the base chart")

    # coordinates -> fields --------------------------------------------
    def log_radius(self, X):
        return 0.5 * J.log(X[2] * X[2] + X[3] * X[3])

    def tau(self, X) -> Jet:
        rho = self.log_radius(X)
        if not isinstance(rho, Jet):
            return self.radius.tau_of_log_radius(rho)
        return J.compose(rho, self.radius.tau_derivatives(rho.value))

    def Q(self, X) -> Jet:
        return J.apply_tau_function(self.profile.Q, self.tau(X))

    def pq(self, X):
        p, q = self.base.c(X[0], X[1])
        return p, q

    def phi(self, X, tau=None):
        """Horizontal factor (tau - c) / (tau_* - c) in projective form."""
        tau = self.tau(X) if tau is None else tau
        p, q = self.pq(X)
        return (tau * q - p) / (self.tau_star * q - p)

    def Y(self, X, tau=None):
        """Laplacian of tau in closed form, q Q / (tau q - p) + Q'."""
        tau = self.tau(X) if tau is None else tau
        p, q = self.pq(X)
        return J.apply_tau_function(self.profile.Q, tau) * q / (tau * q - p) + J.apply_tau_function(
            self.profile.dQ, tau
        )

    def Y_along(self, tau, y=None):
        """Closed-form Y as a function of tau over the base point ``y`` (default: base box centre)."""
        y = np.mean(self.base.box, axis=1) if y is None else np.asarray(y, dtype=float)
        p, q = self.base.c_values(y[None, :])
        tau = np.asarray(tau, dtype=float)
        return self.profile.Q(tau) * q[0] / (tau * q[0] - p[0]) + self.profile.dQ(tau)

    def frame(self, X) -> Jet:
        a1, a2 = self.base.alpha(X[0], X[1])
        one, zero = _ones(X[0]), _zeros(X[0])
        return J.block(
            [
                [one, zero, zero, zero],
                [zero, one, zero, zero],
                [-X[3] * a1, -X[3] * a2, one, zero],
                [X[2] * a1, X[2] * a2, zero, one],
            ]
        )

    def frame_inverse(self, X) -> Jet:
        a1, a2 = self.base.alpha(X[0], X[1])
        one, zero = _ones(X[0]), _zeros(X[0])
        return J.block(
            [
                [one, zero, zero, zero],
                [zero, one, zero, zero],
                [X[3] * a1, X[3] * a2, one, zero],
                [-X[2] * a1, -X[2] * a2, zero, one],
            ]
        )

    def metric(self, X) -> Jet:
        tau = self.tau(X)
        Q = J.apply_tau_function(self.profile.Q, tau)
        phi = self.phi(X, tau)
        h = self.base.h(X[0], X[1])
        r2 = X[2] * X[2] + X[3] * X[3]
        vert = Q / (r2 * self.a**2)
        zero = _zeros(X[0])
        D = J.block(
            [
                [phi * h[:, 0, 0], phi * h[:, 0, 1], zero, zero],
                [phi * h[:, 1, 0], phi * h[:, 1, 1], zero, zero],
                [zero, zero, vert, zero],
                [zero, zero, zero, vert],
            ]
        )
        B = self.frame(X)
        return J.einsum("nba,nbc,ncd->nad", B, D, B)

    def cstruct(self, X) -> Jet:
        h = self.base.h(X[0], X[1])
        s = 1 / J.sqrt(h[:, 0, 0] * h[:, 1, 1] - h[:, 0, 1] * h[:, 1, 0])
        one, zero = _ones(X[0]), _zeros(X[0])
        Jb = J.block(
            [
                [-h[:, 0, 1] * s, -h[:, 1, 1] * s, zero, zero],
                [h[:, 0, 0] * s, h[:, 0, 1] * s, zero, zero],
                [zero, zero, zero, -one],
                [zero, zero, one, zero],
            ]
        )
        return J.einsum("nab,nbc,ncd->nad", self.frame_inverse(X), Jb, self.frame(X))

    def v(self, X) -> Jet:
        """Gradient of tau: a times the radial field."""
        zero = _zeros(X[0])
        return J.stack([zero, zero, self.a * X[2], self.a * X[3]], axis=-1)

    def u(self, X) -> Jet:
        zero = _zeros(X[0])
        return J.stack([zero, zero, -self.a * X[3], self.a * X[2]], axis=-1)

    def dtau(self, X) -> Jet:
        """d tau = (Q / a) (z1 dz1 + z2 dz2) / r^2."""
        Q = self.Q(X)
        r2 = X[2] * X[2] + X[3] * X[3]
        w = Q / (r2 * self.a)
        zero = _zeros(X[0])
        return J.stack([zero, zero, w * X[2], w * X[3]], axis=-1)

    def xi(self, X) -> Jet:
        return lower_index(self.metric(X), self.u(X))

    # sampling -----------------------------------------------------------
    def sample(self, n: int, rng: np.random.Generator, base_margin: float = 0.0, tau_range=None) -> np.ndarray:
        """Points with y uniform in the base box, tau uniform in the restricted interval, angle uniform."""
        box = self.base.box
        width = box[:, 1] - box[:, 0]
        y = rng.uniform(box[:, 0] + base_margin * width, box[:, 1] - base_margin * width, size=(n, 2))
        lo, hi = tau_range if tau_range is not None else (self.inner.tau_min, self.inner.tau_max)
        pad = 1e-9 * (hi - lo)
        tau = rng.uniform(lo + pad, hi - pad, size=n)
        ang = rng.uniform(0.0, 2 * np.pi, size=n)
        r = np.exp(self.radius.logr(tau))
        return np.column_stack([y, r * np.cos(ang), r * np.sin(ang)])

    def point(self, y1: float, y2: float, tau: float, angle: float = 0.0) -> np.ndarray:
        r = float(np.exp(self.radius.logr(tau)))
        return np.array([y1, y2, r * np.cos(angle), r * np.sin(angle)])

    def check_connection(self, points) -> ResidualReport:
        """``d alpha = a q / (tau_* q - p) omega_h`` on the base."""
        Y = J.seed(np.column_stack([np.atleast_2d(points)[:, :2], np.zeros((len(points), 2))]))
        a1, a2 = self.base.alpha(Y[0], Y[1])
        dalpha = J.partial(a2, 0) - J.partial(a1, 1)
        h = self.base.h(Y[0], Y[1]).value
        p, q = self.base.c(Y[0], Y[1])
        p, q = J.value(p), J.value(q)
        target = self.a * q / (self.tau_star * q - p) * np.sqrt(np.linalg.det(h))
        rep = ResidualReport()
        rep.add("d alpha - a (tau_* - c)^-1 omega_h", np.max(np.abs(dalpha.value - target)), 1e-10,
                "connection curvature", len(points))
        return rep


def build_chart_metric(spec: FiberModelSpec) -> ChartMetric:
    return FiberModel(spec).chart


@dataclass
class KillingData:
    tau: np.ndarray
    v: np.ndarray
    v_gradient: np.ndarray
    u: np.ndarray
    xi: np.ndarray
    Q: np.ndarray
    Q_metric: np.ndarray
    Y: np.ndarray
    Y_laplacian: np.ndarray


def killing_data(model: FiberModel, points) -> KillingData:
    geo = Geometry(model.chart, points)
    X = geo.X
    tau = model.tau(X)
    v = model.v(X)
    v_grad = geo.grad(tau)
    u = J.einsum("nab,nb->na", geo.J, v)
    xi = lower_index(geo.g, u)
    return KillingData(
        tau=tau.value,
        v=v.value,
        v_gradient=v_grad.value,
        u=u.value,
        xi=xi.value,
        Q=model.Q(X).value,
        Q_metric=J.einsum("na,nab,nb->n", v, geo.g, v).value,
        Y=model.Y(X).value,
        Y_laplacian=geo.laplacian(tau).value,
    )


def laplacian_tau_closed_form(model: FiberModel, points) -> np.ndarray:
    X = [Jet.constant(c) for c in np.atleast_2d(points).T]
    return model.Y(X).value


# theta from H ----------------------------------------------------------------

def endpoint_residual(H: TauFunction, c: ProjectiveValue) -> float:
    """``F_y(tau_max) = -int (tau - c) H'`` over the interval, in projective scaling.

    For finite c this is the literal value; for c = oo the factor (tau - c) is
    replaced by its projective representative -p.
    """
    m0, m1 = _moments_of_derivative(H)
    value = -(c.q * m1 - c.p * m0)
    return value / c.q if c.q != 0 else value / abs(c.p)


def _moments_of_derivative(H: TauFunction) -> tuple[float, float]:
    return tuple(moments(differentiate(H), (0, 1)))


@dataclass
class ThetaField:
    """theta = (p E0(tau) - q E1(tau)) / (tau q - p) on a fiber model."""

    model: FiberModel
    H: TauFunction
    E0: TauFunction
    E1: TauFunction

    def __call__(self, X):
        tau = self.model.tau(X)
        p, q = self.model.pq(X)
        e0 = J.apply_tau_function(self.E0, tau)
        e1 = J.apply_tau_function(self.E1, tau)
        return (e0 * p - e1 * q) / (tau * q - p)

    def along(self, y, tau):
        """theta as a function of tau over the base point y, on the closed interval."""
        y = np.asarray(y, dtype=float)
        p, q = self.model.base.c_values(y[None, :])
        tau = np.asarray(tau, dtype=float)
        return (self.E0(tau) * p[0] - self.E1(tau) * q[0]) / (tau * q[0] - p[0])


def theta_from_H(model: FiberModel, H: TauFunction, sample_ys=None, moment_tol: float = 1e-8,
                 endpoint_tol: float = 1e-10) -> tuple[ThetaField, ResidualReport]:
    """Build theta with d_u theta = 0 and d_v theta + theta Y = -H'(tau).

    For each base point y, ``F_y`` is the antiderivative vanishing at tau_min of
    ``-(tau - c(y)) H'``, ``E_y = F_y / Q`` and ``theta = E_y / (tau - c(y))``.  As
    ``F_y`` is linear in c, theta is assembled from the two y-independent
    quotients ``E0 = (H - H(tau_min)) / Q`` and ``E1 = (int tau H') / Q``.
    """
    from .scalarfun import differentiate

    iv = model.interval
    if H.interval != iv:
        raise ValueError("H must live on the model's interval")
    dH = differentiate(H)
    t = identity(iv)
    m = moments(dH, (0, 1))
    scale = np.sqrt(moments(dH * dH, (0,))[0]) * max(iv.length, 1.0) ** 1.5 + 1e-300
    rel = np.abs(m) / scale

    rep = ResidualReport()
    if sample_ys is None:
        rng = np.random.default_rng(0)
        box = model.base.box
        sample_ys = rng.uniform(box[:, 0], box[:, 1], size=(16, 2))
    sample_ys = np.atleast_2d(sample_ys)
    ps, qs = model.base.c_values(sample_ys)
    norm_dH = dH.sup_norm() + 1e-300
    fy = []
    for p, q in zip(ps, qs):
        fy.append(endpoint_residual(H, ProjectiveValue(p, q)))
    fy = np.array(fy)
    worst = int(np.argmax(np.abs(fy)))
    rep.add("F_y(tau_max) over sampled y", float(np.max(np.abs(fy))), endpoint_tol * max(norm_dH, 1.0),
            "F_y vanishes at tau_max", len(fy))
    rep.add("moment int H'", rel[0], moment_tol, "H' orthogonal to 1")
    rep.add("moment int tau H'", rel[1], moment_tol, "H' orthogonal to tau")
    violated = [name for name, r in zip(("int H' dtau", "int tau H' dtau"), rel) if r > moment_tol]
    if violated or abs(fy[worst]) > endpoint_tol * max(norm_dH, 1.0):
        raise ValueError(
            f"H' is not L2-orthogonal to affine functions: F_y(tau_max) = {fy[worst]:.3e} at "
            f"y = ({sample_ys[worst, 0]:.6g}, {sample_ys[worst, 1]:.6g}); violated moment(s): "
            f"{', '.join(violated) if violated else 'none beyond tolerance'} "
            f"(relative values {rel[0]:.3e}, {rel[1]:.3e})"
        )

    M0 = H - float(H(iv.tau_min))
    M1 = antiderivative(t * dH, iv.tau_min)
    # tiny endpoint defects left by quadrature are removed before dividing
    M0 = M0 - float(M0(iv.tau_max)) * (t - iv.tau_min) / iv.length
    M1 = M1 - float(M1(iv.tau_max)) * (t - iv.tau_min) / iv.length
    E0 = smooth_divide_by_Q(M0, model.profile)
    E1 = smooth_divide_by_Q(M1, model.profile)
    theta = ThetaField(model, H, E0, E1)

    # literal per-y recipe at a few base points, compared with the decomposition
    check_taus = np.linspace(model.inner.tau_min, model.inner.tau_max, 7)
    worst_dev = 0.0
    for (y1, y2), p, q in zip(sample_ys[:4], ps[:4], qs[:4]):
        Fy = antiderivative(-(t * q - p) * dH, iv.tau_min)
        Fy = Fy - float(Fy(iv.tau_max)) * (t - iv.tau_min) / iv.length
        Ey = smooth_divide_by_Q(Fy, model.profile)
        literal = Ey(check_taus) / (check_taus * q - p)
        pts = np.array([model.point(y1, y2, tt) for tt in check_taus])
        Xc = [Jet.constant(col) for col in pts.T]
        worst_dev = max(worst_dev, float(np.max(np.abs(theta(Xc).value - literal))))
    rep.add("per-y recipe vs decomposition", worst_dev, 1e-9 * max(norm_dH, 1.0),
            "theta = E_y / (tau - c(y))", 4 * len(check_taus))
    rep.extras["E_endpoint_values"] = [float(E0(iv.tau_min)), float(E0(iv.tau_max)),
                                       float(E1(iv.tau_min)), float(E1(iv.tau_max))]
    return theta, rep


def fixture(name: str, a: float = 1.0, interval: Interval | None = None, epsilon=None) -> FiberModel:
    """Standard fixtures on the quadratic profile: ``flat-const`` (c = -1) and ``flat-var``."""
    from .profiles import builtin_profile

    iv = interval or Interval(0.0, 1.0)
    profile = builtin_profile("quadratic", iv, a)
    ts = iv.midpoint
    if name == "flat-const":
        base = flat_constant_c_base(a, ts, ProjectiveValue(-1.0, 1.0))
    elif name == "flat-var":
        base = flat_variable_c_base(a, ts)
    elif name == "flat-infinite":
        base = flat_constant_c_base(a, ts, ProjectiveValue.infinity())
    else:
        raise ValueError(f"unknown fixture {name!r}")
    return FiberModel(FiberModelSpec(profile, base, epsilon))
