"""Smooth scalar functions of the moment coordinate on a closed interval.

Every function of tau is stored as a Chebyshev series (first kind) on the
interval.  Fitting interpolates at Chebyshev points of the second kind, which
include both endpoints, so endpoint values are reproduced exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial import legendre as L
from scipy.fft import dct

DEFAULT_DEGREE = 64
ENDPOINT_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class Interval:
    """Closed interval [tau_min, tau_max] with tau_min < tau_max."""

    tau_min: float
    tau_max: float

    def __post_init__(self):
        lo, hi = float(self.tau_min), float(self.tau_max)
        if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
            raise ValueError(f"invalid interval [{lo}, {hi}]")
        object.__setattr__(self, "tau_min", lo)
        object.__setattr__(self, "tau_max", hi)

    @property
    def length(self) -> float:
        return self.tau_max - self.tau_min

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.tau_min + self.tau_max)

    def to_unit(self, tau):
        return (2.0 * np.asarray(tau, dtype=float) - (self.tau_min + self.tau_max)) / self.length

    def from_unit(self, x):
        return self.midpoint + 0.5 * self.length * np.asarray(x, dtype=float)

    def contains(self, tau, slack: float = 0.0) -> bool:
        t = np.asarray(tau, dtype=float)
        return bool(np.all((t >= self.tau_min - slack) & (t <= self.tau_max + slack)))

    def shrink(self, eps: float) -> "Interval":
        return Interval(self.tau_min + eps, self.tau_max - eps)

    def grid(self, n: int) -> np.ndarray:
        return np.linspace(self.tau_min, self.tau_max, n)


@dataclass(frozen=True, eq=False)
class TauFunction:
    """Chebyshev series ``sum c_k T_k(x)`` with ``x`` the affine image of tau in [-1, 1]."""

    interval: Interval
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=float)).copy()
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-D array")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite Chebyshev coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def __call__(self, tau):
        return C.chebval(self.interval.to_unit(tau), self.coefficients)

    @cached_property
    def _derivative_series(self) -> list[np.ndarray]:
        series = [self.coefficients]
        scale = 2.0 / self.interval.length
        for _ in range(4):
            series.append(C.chebder(series[-1]) * scale if series[-1].size > 1 else np.zeros(1))
        return series

    def derivatives(self, tau, order: int = 3) -> list[np.ndarray]:
        """Values of the function and its first ``order`` derivatives at ``tau``."""
        x = self.interval.to_unit(tau)
        return [C.chebval(x, self._derivative_series[k]) for k in range(order + 1)]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self(self.interval.from_unit(np.cos(np.linspace(0, np.pi, 4 * self.degree + 65)))))))

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, TauFunction):
            if other.interval != self.interval:
                raise ValueError("TauFunctions live on different intervals")
            return other.coefficients
        return np.array([float(other)])

    def __add__(self, other):
        return TauFunction(self.interval, C.chebadd(self.coefficients, self._coerce(other)))

    __radd__ = __add__

    def __sub__(self, other):
        return TauFunction(self.interval, C.chebsub(self.coefficients, self._coerce(other)))

    def __rsub__(self, other):
        return TauFunction(self.interval, C.chebsub(self._coerce(other), self.coefficients))

    def __mul__(self, other):
        return TauFunction(self.interval, C.chebmul(self.coefficients, self._coerce(other)))

    __rmul__ = __mul__

    def __neg__(self):
        return TauFunction(self.interval, -self.coefficients)

    def __truediv__(self, scalar: float):
        return TauFunction(self.interval, self.coefficients / float(scalar))


def second_kind_nodes(interval: Interval, degree: int) -> np.ndarray:
    """Chebyshev points of the second kind mapped to ``interval``, ordered from tau_max down."""
    return interval.from_unit(np.cos(np.pi * np.arange(degree + 1) / degree))


def _values_to_coefficients(values: np.ndarray) -> np.ndarray:
    n = values.size - 1
    c = dct(values, type=1) / n
    c[0] *= 0.5
    c[-1] *= 0.5
    return c


def cheb_fit(evaluator: Callable, interval: Interval, degree: int = DEFAULT_DEGREE) -> TauFunction:
    """Interpolate a vectorised callable at ``degree + 1`` Chebyshev points of the second kind."""
    if degree < 1:
        raise ValueError("degree must be at least 1")
    nodes = second_kind_nodes(interval, degree)
    values = np.broadcast_to(np.asarray(evaluator(nodes), dtype=float), nodes.shape)
    bad = ~np.isfinite(values)
    if np.any(bad):
        raise ValueError(f"evaluator returned a non-finite value at tau = {nodes[bad][0]!r}")
    return TauFunction(interval, _values_to_coefficients(np.array(values)))


def from_monomials(coeffs, interval: Interval) -> TauFunction:
    """TauFunction for the polynomial ``sum coeffs[k] * tau**k``."""
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    deg = max(len(coeffs) - 1, 1)
    return cheb_fit(lambda t: np.polynomial.polynomial.polyval(t, coeffs), interval, deg)


def constant(value: float, interval: Interval) -> TauFunction:
    return TauFunction(interval, [float(value)])


def identity(interval: Interval) -> TauFunction:
    return TauFunction(interval, [interval.midpoint, 0.5 * interval.length])


def differentiate(F: TauFunction) -> TauFunction:
    return TauFunction(F.interval, F._derivative_series[1])


def antiderivative(F: TauFunction, anchor: float) -> TauFunction:
    """Antiderivative of ``F`` vanishing at ``anchor``."""
    if not F.interval.contains(anchor):
        raise ValueError(f"anchor {anchor} outside [{F.interval.tau_min}, {F.interval.tau_max}]")
    c = C.chebint(F.coefficients) * (0.5 * F.interval.length)
    G = TauFunction(F.interval, c)
    return G - float(G(anchor))


def smooth_divide_by_Q(F: TauFunction, Q, degree: int | None = None) -> TauFunction:
    """Return ``E = F / Q`` where Q vanishes simply at both endpoints.

    ``Q`` may be a TauFunction or anything with a ``Q`` attribute.  ``F`` must
    vanish at both endpoints; the endpoint values of ``E`` come from
    l'Hospital's rule, ``F'/Q'``.
    """
    Q = getattr(Q, "Q", Q)
    if F.interval != Q.interval:
        raise ValueError("F and Q live on different intervals")
    iv = F.interval
    scale = max(F.sup_norm(), 1.0)
    for end in (iv.tau_min, iv.tau_max):
        if abs(F(end)) > ENDPOINT_ZERO_TOL * scale:
            raise ValueError(f"F does not vanish at tau = {end}: F = {float(F(end)):.3e}")
    n = degree or max(F.degree, Q.degree, 8)
    nodes = second_kind_nodes(iv, n)
    vals = np.empty_like(nodes)
    inner = slice(1, -1)
    vals[inner] = F(nodes[inner]) / Q(nodes[inner])
    dF, dQ = differentiate(F), differentiate(Q)
    vals[0] = dF(nodes[0]) / dQ(nodes[0])
    vals[-1] = dF(nodes[-1]) / dQ(nodes[-1])
    return TauFunction(iv, _values_to_coefficients(vals))


def gauss_legendre(interval: Interval, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = L.leggauss(n)
    return interval.from_unit(x), w * 0.5 * interval.length


def moments(F: TauFunction, powers=(0, 1)) -> np.ndarray:
    """L2 inner products of F with tau**k on the interval."""
    t, w = gauss_legendre(F.interval, F.degree + 8)
    f = F(t)
    return np.array([np.sum(w * f * t**k) for k in powers])


def project_out_affine(W: TauFunction) -> TauFunction:
    """Remove the L2-orthogonal projection of W onto span{1, tau}."""
    iv = W.interval
    t, w = gauss_legendre(iv, W.degree + 8)
    basis = np.vstack([np.ones_like(t), t])
    gram = (basis * w) @ basis.T
    rhs = (basis * w) @ W(t)
    alpha, beta = np.linalg.solve(gram, rhs)
    # alpha + beta*tau written in the Chebyshev basis of the interval
    return W - TauFunction(iv, [alpha + beta * iv.midpoint, beta * 0.5 * iv.length])
