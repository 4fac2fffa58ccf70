"""Central finite-difference check of backpropagated MSE gradients.

Coordinates whose ``+-h`` stencil flips any ReLU on or off are skipped: the
loss is not differentiable across such a kink and the difference quotient
measures the jump, not the gradient.
"""

import numpy as np

from eccnbench.learner import gradient, mse
from eccnbench.rnn import _ffn_forward, _rnn_forward, init_ffn, init_rnn, trainable


def relu_pattern(model, X):
    if hasattr(model, "weights"):
        return [a > 0 for a in _ffn_forward(model, X)[1][1:]]
    m = model.as_multi() if hasattr(model, "as_multi") else model
    return [z > 0 for _, _, zs in _rnn_forward(m, X, keep=True)[1] for z in zs]


def _same(p, q):
    return all(np.array_equal(a, b) for a, b in zip(p, q))


def random_model(case, rng):
    """Case ``k`` cycles single-layer RNN, 2-layer RNN and FFN with ``n = 1 + k % 4``."""
    n = 1 + case % 4
    kind = case % 3
    if kind == 0:
        model = init_rnn(n, case, constrained=case % 2 == 0)
    elif kind == 1:
        model = init_rnn((n, n), case, constrained=case % 2 == 0)
    else:
        model = init_ffn(n * n, case, hidden=(5, 4, 3))
        for b in model.biases:
            b[:] = rng.normal(0, 0.3, size=b.shape)
    return model, n


def check(model, X, y, h=1e-5, rtol=1e-4, small=1e-6):
    """Return ``(checked, worst relative error)`` over all trainable coordinates."""
    grads = gradient(model, X, y)
    base = relu_pattern(model, X)
    tensors = model.tensors()
    checked, worst = 0, 0.0
    for name, g in grads.items():
        assert trainable(name)
        for idx in np.ndindex(g.shape):
            vals = []
            for sign in (1, -1):
                t = {k: v.copy() for k, v in tensors.items()}
                t[name][idx] += sign * h
                m = type(model).from_tensors(t, constrained=model.constrained)
                if not _same(relu_pattern(m, X), base):
                    break
                vals.append(mse(m.predict_batch(X), y))
            if len(vals) < 2:
                continue
            fd = (vals[0] - vals[1]) / (2 * h)
            if abs(g[idx]) > small:
                worst = max(worst, abs(fd - g[idx]) / abs(g[idx]))
            elif abs(fd) > small:
                worst = max(worst, abs(fd - g[idx]) / small)
            checked += 1
    return checked, worst
