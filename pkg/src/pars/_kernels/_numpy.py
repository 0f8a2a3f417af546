"""Pure-NumPy implementation of the batched MLP kernels.

This is the fallback backend used when the compiled extension is not
available. Both backends expose the same three functions and must agree
numerically (see tests/test_kernels.py).

Conventions shared by all backends:
  * weights[i] has shape (out_i, in_i), biases[i] has shape (out_i,),
    hidden activations are ReLU, the last layer emits raw logits;
  * forward returns (logits, cache) with cache = (acts, pres) where
    acts[i] is the input to layer i and pres[i] its pre-activation;
  * backward receives d(loss)/d(logits) for the whole batch (any mean
    weighting is already folded in) and returns per-layer gradient sums.
"""

import numpy as np

NAME = "numpy"


def softmax_batch(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def forward_batch(x, weights, biases):
    acts = [x]
    pres = []
    a = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w.T + b
        pres.append(z)
        if i != last:
            a = np.maximum(z, 0.0)
            acts.append(a)
    return pres[-1], (acts, pres)


def backward_batch(dlogits, weights, cache):
    acts, pres = cache
    n_layers = len(weights)
    dws = [None] * n_layers
    dbs = [None] * n_layers
    dz = dlogits
    for i in range(n_layers - 1, -1, -1):
        dws[i] = dz.T @ acts[i]
        dbs[i] = dz.sum(axis=0)
        if i > 0:
            dz = (dz @ weights[i]) * (pres[i - 1] > 0.0)
    return dws, dbs
