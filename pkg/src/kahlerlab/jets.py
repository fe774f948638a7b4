"""Truncated multivariate Taylor jets for exact chart derivatives.

A :class:`Jet` holds the Taylor coefficients, up to total degree three, of an
array-valued function of the four chart coordinates about a batch of base
points.  Arithmetic is exact on truncated polynomials, so every derivative
read off a jet agrees with the analytic derivative to rounding error.  This is
the nested dual number construction flattened into a single coefficient table.

Coefficient arrays have shape ``(NCOEF, *shape)``.  Taking a partial
derivative lowers the order by one, so metric jets seeded at order three give
Christoffel symbols at order two and curvature at order one.
"""

from __future__ import annotations

import itertools

import numpy as np

NVAR = 4
MAX_ORDER = 3

MONOMIALS = sorted(
    (m for m in itertools.product(range(MAX_ORDER + 1), repeat=NVAR) if sum(m) <= MAX_ORDER),
    key=lambda m: (sum(m), tuple(-k for k in m)),
)
NCOEF = len(MONOMIALS)
_INDEX = {m: i for i, m in enumerate(MONOMIALS)}
_DEGREE = np.array([sum(m) for m in MONOMIALS])


def _pair_tables():
    left, right, target = [], [], []
    for i, a in enumerate(MONOMIALS):
        for j, b in enumerate(MONOMIALS):
            s = tuple(x + y for x, y in zip(a, b))
            if sum(s) <= MAX_ORDER:
                left.append(i)
                right.append(j)
                target.append(_INDEX[s])
    left, right, target = map(np.array, (left, right, target))
    order = np.argsort(target, kind="stable")
    left, right, target = left[order], right[order], target[order]
    starts = np.searchsorted(target, np.arange(NCOEF))
    return left, right, starts


_LEFT, _RIGHT, _STARTS = _pair_tables()


def _gather(prod: np.ndarray) -> np.ndarray:
    return np.add.reduceat(prod, _STARTS, axis=0)


def _derivative_tables():
    tables = []
    for k in range(NVAR):
        src, fac = np.zeros(NCOEF, dtype=int), np.zeros(NCOEF)
        for i, m in enumerate(MONOMIALS):
            up = list(m)
            up[k] += 1
            up = tuple(up)
            if up in _INDEX:
                src[i], fac[i] = _INDEX[up], up[k]
        tables.append((src, fac))
    return tables


_DERIV = _derivative_tables()


def _coefficient_axes(shape_ndim: int) -> tuple:
    return (slice(None),) + (None,) * shape_ndim


class Jet:
    """Array of truncated Taylor polynomials in the chart coordinates."""

    __slots__ = ("c", "order")
    __array_priority__ = 1000
    __array_ufunc__ = None

    def __init__(self, coeffs, order: int = MAX_ORDER):
        self.c = coeffs
        self.order = order

    # construction -----------------------------------------------------
    @classmethod
    def constant(cls, value) -> "Jet":
        v = np.asarray(value, dtype=float)
        c = np.zeros((NCOEF,) + v.shape)
        c[0] = v
        return cls(c)

    @property
    def shape(self) -> tuple:
        return self.c.shape[1:]

    @property
    def ndim(self) -> int:
        return self.c.ndim - 1

    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    # indexing and reshaping -------------------------------------------
    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.c[(slice(None),) + key], self.order)

    def transpose(self, *axes) -> "Jet":
        return Jet(np.transpose(self.c, (0,) + tuple(a + 1 for a in axes)), self.order)

    def reshape(self, *shape) -> "Jet":
        return Jet(self.c.reshape((NCOEF,) + tuple(shape)), self.order)

    def sum(self, axis) -> "Jet":
        axis = (axis,) if np.isscalar(axis) else tuple(axis)
        return Jet(self.c.sum(axis=tuple(a + 1 if a >= 0 else a for a in axis)), self.order)

    # arithmetic -------------------------------------------------------
    def __neg__(self):
        return Jet(-self.c, self.order)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.c + other.c, min(self.order, other.order))
        c = self.c + np.zeros((1,) + np.shape(other))
        c = c.copy()
        c[0] = c[0] + other
        return Jet(c, self.order)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return _bilinear(self, other, np.multiply)
        other = np.asarray(other, dtype=float)
        return Jet(self.c * other[None], self.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * reciprocal(other)
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and 0 <= p <= 4:
            out = Jet.constant(np.ones(self.shape))
            for _ in range(int(p)):
                out = out * self
            return out
        x0 = self.value
        p = float(p)
        derivs = [x0**p, p * x0 ** (p - 1), p * (p - 1) * x0 ** (p - 2), p * (p - 1) * (p - 2) * x0 ** (p - 3)]
        return compose(self, derivs)

    def __matmul__(self, other):
        return einsum("...ij,...jk->...ik", self, other)

    def __rmatmul__(self, other):
        return einsum("...ij,...jk->...ik", other, self)

    def __repr__(self):
        return f"Jet(shape={self.shape}, order={self.order})"


def _bilinear(a: Jet, b: Jet, op) -> Jet:
    return Jet(_gather(op(a.c[_LEFT], b.c[_RIGHT])), min(a.order, b.order))


def einsum(spec: str, *operands):
    """``numpy.einsum`` for any mix of jets and plain arrays.

    The subscripts describe the array shapes only; the coefficient axis is handled
    internally.  Operands are contracted left to right.
    """
    if len(operands) == 1:
        a = operands[0]
        if isinstance(a, Jet):
            return Jet(np.einsum(_prefix(spec, "Z"), a.c), a.order)
        return np.einsum(spec, a)
    inputs, output = spec.split("->")
    terms = inputs.split(",")
    if len(terms) != len(operands):
        raise ValueError("subscripts do not match operand count")
    acc, acc_term = operands[0], terms[0]
    for k in range(1, len(operands)):
        if k == len(operands) - 1:
            out_term = output
        else:
            rest = set("".join(terms[k + 1:]) + output)
            letters = (acc_term + terms[k]).replace("...", "")
            kept = "".join(ch for ch in dict.fromkeys(letters) if ch in rest)
            out_term = ("..." if "..." in acc_term + terms[k] else "") + kept
        acc = _einsum2(f"{acc_term},{terms[k]}->{out_term}", acc, operands[k])
        acc_term = out_term
    return acc


def _prefix(spec: str, letter: str) -> str:
    inputs, output = spec.split("->")
    return ",".join(letter + t for t in inputs.split(",")) + "->" + letter + output


def _einsum2(spec: str, a, b):
    ja, jb = isinstance(a, Jet), isinstance(b, Jet)
    if not ja and not jb:
        return np.einsum(spec, a, b)
    inputs, output = spec.split("->")
    ta, tb = inputs.split(",")
    if ja and jb:
        prod = np.einsum(f"Z{ta},Z{tb}->Z{output}", a.c[_LEFT], b.c[_RIGHT], optimize=True)
        return Jet(_gather(prod), min(a.order, b.order))
    if ja:
        return Jet(np.einsum(f"Z{ta},{tb}->Z{output}", a.c, np.asarray(b, dtype=float), optimize=True), a.order)
    return Jet(np.einsum(f"{ta},Z{tb}->Z{output}", np.asarray(a, dtype=float), b.c, optimize=True), b.order)


# elementary functions ----------------------------------------------------

def compose(x: Jet, derivs) -> Jet:
    """Apply a scalar function given its derivatives ``[f, f', f'', f''']`` at ``x.value``."""
    h = Jet(x.c.copy(), x.order)
    h.c[0] = 0.0
    out = Jet.constant(derivs[0])
    power = None
    fact = 1.0
    for k in range(1, min(len(derivs) - 1, x.order) + 1):
        power = h if power is None else power * h
        fact *= k
        out = out + power * (np.asarray(derivs[k]) / fact)
    out.order = x.order
    return out


def reciprocal(x: Jet) -> Jet:
    x0 = x.value
    return compose(x, [1 / x0, -1 / x0**2, 2 / x0**3, -6 / x0**4])


def exp(x):
    if not isinstance(x, Jet):
        return np.exp(x)
    e = np.exp(x.value)
    return compose(x, [e, e, e, e])


def log(x):
    if not isinstance(x, Jet):
        return np.log(x)
    x0 = x.value
    return compose(x, [np.log(x0), 1 / x0, -1 / x0**2, 2 / x0**3])


def sqrt(x):
    if not isinstance(x, Jet):
        return np.sqrt(x)
    return x**0.5


def sin(x):
    if not isinstance(x, Jet):
        return np.sin(x)
    s, c = np.sin(x.value), np.cos(x.value)
    return compose(x, [s, c, -s, -c])


def cos(x):
    if not isinstance(x, Jet):
        return np.cos(x)
    s, c = np.sin(x.value), np.cos(x.value)
    return compose(x, [c, -s, -c, s])


def apply_tau_function(F, x):
    """Evaluate a :class:`~kahlerlab.scalarfun.TauFunction` on a jet or array."""
    if not isinstance(x, Jet):
        return F(x)
    return compose(x, F.derivatives(x.value, 3))


# derivatives and assembly -------------------------------------------------

def partial(x: Jet, k: int) -> Jet:
    if x.order < 1:
        raise ValueError("jet order exhausted; seed with a higher order")
    src, fac = _DERIV[k]
    c = x.c[src] * fac[_coefficient_axes(x.ndim)]
    c[_DEGREE >= MAX_ORDER] = 0.0
    return Jet(c, x.order - 1)


def gradient(x: Jet) -> Jet:
    """Stack of the four partials as a new trailing axis."""
    return stack([partial(x, k) for k in range(NVAR)], axis=-1)


def stack(items, axis: int = 0) -> Jet:
    items = [it if isinstance(it, Jet) else Jet.constant(it) for it in items]
    shape = np.broadcast_shapes(*(it.shape for it in items))
    cs = [np.broadcast_to(it.c, (NCOEF,) + shape) for it in items]
    ax = axis + 1 if axis >= 0 else axis
    return Jet(np.stack(cs, axis=ax), min(it.order for it in items))


def zeros(shape) -> Jet:
    return Jet(np.zeros((NCOEF,) + tuple(shape)))


def block(rows) -> Jet:
    """Assemble a matrix from a nested list of scalar jets or numbers (batch axis first)."""
    return stack([stack(r, axis=-1) for r in rows], axis=-2)


def seed(points) -> list[Jet]:
    """Coordinate jets ``x^k`` about a batch of points of shape ``(n, 4)``."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != NVAR:
        raise ValueError("points must have shape (n, 4)")
    out = []
    for k in range(NVAR):
        c = np.zeros((NCOEF, points.shape[0]))
        c[0] = points[:, k]
        e = [0] * NVAR
        e[k] = 1
        c[_INDEX[tuple(e)]] = 1.0
        out.append(Jet(c))
    return out


def inv(G: Jet) -> Jet:
    """Inverse of a batch of matrix jets via the Neumann series about the value."""
    A = np.linalg.inv(G.value)
    N = Jet(G.c.copy(), G.order)
    N.c[0] = 0.0
    X = -einsum("...ij,...jk->...ik", A, N)
    term = Jet.constant(A)
    total = Jet.constant(A)
    for _ in range(G.order):
        term = einsum("...ij,...jk->...ik", X, term)
        total = total + term
    total.order = G.order
    return total


def value(x):
    return x.value if isinstance(x, Jet) else np.asarray(x, dtype=float)


def coefficient(x: Jet, multi_index) -> np.ndarray:
    """Raw Taylor coefficient of the given monomial."""
    return x.c[_INDEX[tuple(multi_index)]]
