import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from kahlerlab import jets as J
from kahlerlab.jets import Jet

points = st.lists(st.floats(-1.5, 1.5), min_size=4, max_size=4).map(lambda p: np.array([p]))


def _d(x, *idx):
    out = x
    for k in idx:
        out = J.partial(out, k)
    return out.value


@settings(max_examples=30, deadline=None)
@given(points)
def test_polynomial_derivatives(p):
    X = J.seed(p)
    F = X[0] * X[0] * X[1] + 3 * X[2] * X[3] - X[3] ** 3
    x, y, z, w = p[0]
    assert np.allclose(F.value, x * x * y + 3 * z * w - w**3)
    assert np.allclose(_d(F, 0), 2 * x * y)
    assert np.allclose(_d(F, 0, 0, 1), 2.0)
    assert np.allclose(_d(F, 3, 3), -6 * w)
    assert np.allclose(_d(F, 2, 3), 3.0)


@settings(max_examples=30, deadline=None)
@given(points)
def test_elementary_functions(p):
    X = J.seed(p)
    x = X[0]
    assert np.allclose(_d(J.sin(x), 0, 0, 0), -np.cos(p[0, 0]))
    assert np.allclose(_d(J.exp(2 * x), 0, 0), 4 * np.exp(2 * p[0, 0]))
    E = J.exp(x)
    assert np.allclose(_d(J.log(E), 0, 0, 0), 0.0, atol=1e-12)
    s = J.sqrt(1 + x * x)
    assert np.allclose(_d(s * s, 0, 0), 2.0)
    r = J.reciprocal(2 + x)
    assert np.allclose(_d(r, 0, 0), 2 / (2 + p[0, 0]) ** 3)


def test_matrix_inverse_derivatives():
    p = np.array([[0.3, -0.2, 0.5, 0.1]])
    X = J.seed(p)
    one = Jet.constant(np.ones(1))
    M = J.block([[2 + X[0], X[1]], [X[1], 3 + X[2] * X[2]]])
    Minv = J.inv(M)
    prod = J.einsum("nab,nbc->nac", M, Minv)
    assert np.allclose(prod.value, np.eye(2))
    for k in range(4):
        assert np.allclose(J.partial(prod, k).value, 0.0, atol=1e-13)
    assert one.value.shape == (1,)


def test_scalar_times_vector_einsum():
    X = J.seed(np.array([[1.0, 2.0, 0.0, 0.0]]))
    w = J.stack([X[0], X[1]], axis=1)
    s = X[0] * X[1]
    out = J.einsum("n,na->na", s, w)
    assert np.allclose(out.value, [[2.0, 4.0]])
    assert np.allclose(J.partial(out, 0).value, [[4.0, 4.0]])


def test_apply_tau_function_chain_rule(unit):
    from kahlerlab.scalarfun import from_monomials

    F = from_monomials([0.0, 0.0, 0.0, 1.0], unit)
    X = J.seed(np.array([[0.4, 0.0, 0.0, 0.0]]))
    G = J.apply_tau_function(F, X[0] * X[0])
    # G = x^6
    assert np.allclose(_d(G, 0, 0, 0), 120 * 0.4**3)
