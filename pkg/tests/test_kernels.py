"""Backend parity: the compiled kernels must match the NumPy fallback."""

import numpy as np
import pytest

from pars import _kernels
from pars._kernels import _numpy

BACKENDS = _kernels.available_backends()

pytestmark = pytest.mark.skipif(
    "compiled" not in BACKENDS, reason="compiled kernel extension not built"
)


def _random_net(rng, dims):
    weights = [
        np.ascontiguousarray(rng.normal(size=(dims[i + 1], dims[i])))
        for i in range(len(dims) - 1)
    ]
    biases = [rng.normal(size=dims[i + 1]) for i in range(len(dims) - 1)]
    return weights, biases


@pytest.mark.parametrize(
    "dims,batch",
    [
        ([2, 64, 64, 5], 64),
        ([3, 7, 4], 9),
        ([5, 3], 1),  # single linear layer
        ([4, 8, 2], 192),
    ],
)
def test_forward_backward_parity(dims, batch):
    rng = np.random.default_rng(42)
    weights, biases = _random_net(rng, dims)
    x = np.ascontiguousarray(rng.normal(size=(batch, dims[0])))
    compiled = BACKENDS["compiled"]

    logits_n, cache_n = _numpy.forward_batch(x, weights, biases)
    logits_c, cache_c = compiled.forward_batch(x, weights, biases)
    np.testing.assert_allclose(logits_c, logits_n, rtol=1e-12, atol=1e-12)
    for a_n, a_c in zip(cache_n[0], cache_c[0]):
        np.testing.assert_allclose(a_c, a_n, rtol=1e-12, atol=1e-12)

    dlogits = np.ascontiguousarray(rng.normal(size=logits_n.shape))
    dw_n, db_n = _numpy.backward_batch(dlogits, weights, cache_n)
    dw_c, db_c = compiled.backward_batch(dlogits, weights, cache_c)
    for a, b in zip(dw_n, dw_c):
        np.testing.assert_allclose(b, a, rtol=1e-10, atol=1e-12)
    for a, b in zip(db_n, db_c):
        np.testing.assert_allclose(b, a, rtol=1e-10, atol=1e-12)


def test_softmax_parity_and_stability():
    rng = np.random.default_rng(7)
    compiled = BACKENDS["compiled"]
    logits = np.ascontiguousarray(rng.normal(scale=50.0, size=(40, 6)))
    logits[0, 0] = 1000.0  # must not overflow
    p_n = _numpy.softmax_batch(logits.copy())
    p_c = compiled.softmax_batch(logits.copy())
    assert np.isfinite(p_c).all()
    np.testing.assert_allclose(p_c, p_n, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(p_c.sum(axis=1), 1.0, atol=1e-12)


def test_empty_batch_backward():
    rng = np.random.default_rng(3)
    weights, biases = _random_net(rng, [3, 4, 2])
    compiled = BACKENDS["compiled"]
    x = np.zeros((0, 3))
    logits, cache = compiled.forward_batch(x, weights, biases)
    assert logits.shape == (0, 2)
    dws, dbs = compiled.backward_batch(np.zeros((0, 2)), weights, cache)
    for dw in dws:
        assert not dw.any()
    for db in dbs:
        assert not db.any()
