import numpy as np
import pytest

from comclust import autodiff as ad
from comclust.autodiff import Var, backward, cosine_distance, grad_of, make_rng
from comclust.errors import NotScalarError, ZeroVectorError


def test_cosine_distance_identical_orthogonal_antipodal():
    assert cosine_distance([1.0, 0.0], [1.0, 0.0]) == pytest.approx(0.0, abs=1e-12)
    assert cosine_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0, abs=1e-12)
    assert cosine_distance([1.0, 0.0], [-1.0, 0.0]) == pytest.approx(2.0, abs=1e-12)


def test_cosine_distance_properties():
    rng = make_rng(7)
    for _ in range(100):
        u = rng.normal(size=5)
        v = rng.normal(size=5)
        d = cosine_distance(u, v)
        assert 0.0 <= d <= 2.0
        assert d == pytest.approx(cosine_distance(v, u), abs=1e-12)
        a, b = rng.uniform(0.1, 10.0, size=2)
        assert cosine_distance(a * u, b * v) == pytest.approx(d, abs=1e-10)


def test_cosine_distance_zero_vector():
    with pytest.raises(ZeroVectorError):
        cosine_distance([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(ZeroVectorError):
        cosine_distance([1.0, 0.0], [1e-13, 0.0])


def test_backward_square():
    x = Var(np.array(3.0))
    y = ad.mul(x, x)
    backward(y)
    assert x.grad == pytest.approx(6.0)


def test_backward_requires_scalar():
    x = Var(np.ones(3))
    y = ad.mul(x, x)
    with pytest.raises(NotScalarError):
        backward(y)


def test_cosine_gradient_zero_at_identical_vectors():
    u = Var(np.array([0.4, -1.2, 0.7]))
    v = Var(np.array([0.4, -1.2, 0.7]))
    d = cosine_distance(u, v)
    backward(d)
    np.testing.assert_allclose(u.grad, np.zeros(3), atol=1e-12)


def _rel_err(a, b):
    return np.abs(a - b) / np.maximum.reduce(
        [np.abs(a), np.abs(b), np.full_like(a, 1e-8)])


def central_diff(f, x, h=1e-4):
    """Finite-difference oracle, independent of the tape."""
    g = np.zeros_like(x)
    flat = x.ravel()
    gflat = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * h)
    return g


def test_mlp_gradients_match_finite_differences():
    # random 2-layer MLP with a scalar loss built from tape primitives
    rng = make_rng(12)
    w1 = rng.normal(size=(4, 6)) * 0.5
    b1 = rng.normal(size=6) * 0.1
    w2 = rng.normal(size=(6, 3)) * 0.5
    x = rng.normal(size=(5, 4))

    def run():
        vw1, vb1, vw2 = Var(w1), Var(b1), Var(w2)
        h = ad.relu(ad.add(ad.matmul(Var(x), vw1), vb1))
        out = ad.matmul(h, vw2)
        loss = ad.mul(out, out)
        # reduce to scalar: sum of all entries via dots with ones
        s = ad.matmul(ad.as_var(np.ones((1, 5))),
                      ad.matmul(loss, ad.as_var(np.ones((3, 1)))))
        return vw1, vb1, vw2, ad.row(ad.row(s, 0), 0)

    vw1, vb1, vw2, loss = run()
    backward(loss)
    for param, var in ((w1, vw1), (b1, vb1), (w2, vw2)):
        num = central_diff(lambda: float(run()[3].value), param)
        assert np.max(_rel_err(grad_of(var), num)) < 1e-3


def test_take_rows_scatter_adds_duplicates():
    x = Var(np.arange(6.0).reshape(3, 2))
    g = ad.take_rows(x, [0, 0, 2])
    s = ad.matmul(ad.as_var(np.ones((1, 3))), ad.matmul(g, ad.as_var(np.ones((2, 1)))))
    backward(ad.row(ad.row(s, 0), 0))
    np.testing.assert_allclose(x.grad, [[2, 2], [0, 0], [1, 1]])


def test_rng_reproducibility():
    a = make_rng(42).normal(size=10)
    b = make_rng(42).normal(size=10)
    c = make_rng(43).normal(size=10)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
