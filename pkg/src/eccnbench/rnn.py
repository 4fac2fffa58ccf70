"""ReLU recurrent networks and a three-hidden-layer feed-forward baseline.

Recurrent layer ``j`` reads a scalar sequence ``s_1..s_L`` and iterates

    h_t = relu(b + W^T h_{t-1} + U^T s_t),   t = 1..L,

starting from ``h0``. Layer 1 reads the flattened adjacency vector; layer
``j >= 2`` reads the components of layer ``j-1``'s final hidden state. The
output is ``wo . h_L + bo``.

In constrained mode the parameters live in

    ||W[:, k]||_1 <= 1/4,  |U| <= 1/4,  |b| <= 1/2,  |h0| <= 1,
    wo >= 0,  ||wo||_1 <= 1/2,  0 <= bo <= 1/2,

which keeps every hidden state in ``[0, 1]`` and every output in ``[0, 1]``.
``h0`` is held at zero and is never trained.

Batched evaluation takes inputs of shape ``(batch, length)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

W_COL_L1 = 0.25
U_MAX = 0.25
B_MAX = 0.5
H0_MAX = 1.0
WO_L1 = 0.5
BO_MAX = 0.5

FFN_HIDDEN = (64, 32, 16)


def _as_input(x) -> np.ndarray:
    bits = getattr(x, "bits", x)
    return np.asarray(bits, dtype=np.float64).reshape(-1)


@dataclass
class RnnLayer:
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray
    h0: np.ndarray

    @property
    def width(self) -> int:
        return self.b.shape[0]


@dataclass
class MultiLayerRnnParams:
    layers: list[RnnLayer]
    wo: np.ndarray
    bo: np.ndarray
    constrained: bool = True

    kind = "multi_rnn"

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(layer.width for layer in self.layers)

    def tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for j, layer in enumerate(self.layers):
            out[f"layer{j}.W"] = layer.W
            out[f"layer{j}.U"] = layer.U
            out[f"layer{j}.b"] = layer.b
            out[f"layer{j}.h0"] = layer.h0
        out["wo"] = self.wo
        out["bo"] = self.bo
        return out

    @classmethod
    def from_tensors(cls, t: dict[str, np.ndarray], constrained: bool = True):
        layers = []
        j = 0
        while f"layer{j}.W" in t:
            layers.append(RnnLayer(*(np.array(t[f"layer{j}.{k}"], dtype=np.float64)
                                     for k in ("W", "U", "b", "h0"))))
            j += 1
        return cls(layers, np.array(t["wo"], dtype=np.float64),
                   np.array(t["bo"], dtype=np.float64), constrained)

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return _rnn_forward(self, X)[0]

    def loss_and_grad(self, X: np.ndarray, y: np.ndarray):
        pred, cache = _rnn_forward(self, X, keep=True)
        resid = pred - y
        grads = _rnn_backward(self, cache, 2.0 * resid / len(y))
        return float(np.mean(resid**2)), grads

    def project(self):
        return project_constraints(self)


@dataclass
class SingleLayerRnnParams:
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray
    h0: np.ndarray
    wo: np.ndarray
    bo: np.ndarray
    constrained: bool = True

    kind = "rnn"

    @property
    def width(self) -> int:
        return self.b.shape[0]

    def as_multi(self) -> MultiLayerRnnParams:
        return MultiLayerRnnParams(
            [RnnLayer(self.W, self.U, self.b, self.h0)], self.wo, self.bo, self.constrained
        )

    @classmethod
    def from_multi(cls, p: MultiLayerRnnParams) -> "SingleLayerRnnParams":
        if len(p.layers) != 1:
            raise ValueError("expected a single recurrent layer")
        (layer,) = p.layers
        return cls(layer.W, layer.U, layer.b, layer.h0, p.wo, p.bo, p.constrained)

    def tensors(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "U": self.U, "b": self.b, "h0": self.h0, "wo": self.wo, "bo": self.bo}

    @classmethod
    def from_tensors(cls, t: dict[str, np.ndarray], constrained: bool = True):
        return cls(*(np.array(t[k], dtype=np.float64) for k in ("W", "U", "b", "h0", "wo", "bo")),
                   constrained)

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return self.as_multi().predict_batch(X)

    def loss_and_grad(self, X, y):
        loss, g = self.as_multi().loss_and_grad(X, y)
        return loss, {k.removeprefix("layer0."): v for k, v in g.items()}

    def project(self):
        return project_constraints(self)


@dataclass
class FeedForwardParams:
    """Three ReLU dense layers followed by one linear output unit."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    constrained: bool = field(default=False, init=False)

    kind = "ffn"

    def __post_init__(self):
        if len(self.weights) != 4 or len(self.biases) != 4:
            raise ValueError("expected three hidden layers and one output layer")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape[1] != b.shape[0]:
                raise ValueError(f"layer {k}: weight {w.shape} does not match bias {b.shape}")
            if k and self.weights[k - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {k} input does not chain from layer {k - 1}")
        if self.weights[-1].shape[1] != 1:
            raise ValueError("output layer must have a single unit")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"dense{k}.weight"] = w
            out[f"dense{k}.bias"] = b
        return out

    @classmethod
    def from_tensors(cls, t: dict[str, np.ndarray], constrained: bool = False):
        return cls([np.array(t[f"dense{k}.weight"], dtype=np.float64) for k in range(4)],
                   [np.array(t[f"dense{k}.bias"], dtype=np.float64) for k in range(4)])

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return _ffn_forward(self, X)[0]

    def loss_and_grad(self, X, y):
        pred, acts = _ffn_forward(self, X)
        resid = pred - y
        grads = _ffn_backward(self, acts, 2.0 * resid / len(y))
        return float(np.mean(resid**2)), grads

    def project(self):
        return self


def trainable(name: str) -> bool:
    return not name.endswith("h0")


# forward / backward -------------------------------------------------------

def _check_batch(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError(f"expected inputs of shape (batch, length), got {X.shape}")
    return X


def _rnn_forward(p: MultiLayerRnnParams, X, keep=False, check_bounds=False):
    seq = _check_batch(X)
    batch = seq.shape[0]
    cache = []
    for j, layer in enumerate(p.layers):
        a = layer.width
        if j and seq.shape[1] != p.layers[j - 1].width:
            raise ValueError("layer input length must equal the previous layer's width")
        H = np.tile(layer.h0, (batch, 1))
        hs, zs = [H], []
        for t in range(seq.shape[1]):
            Z = layer.b + H @ layer.W + seq[:, t:t + 1] * layer.U
            H = np.maximum(Z, 0.0)
            if check_bounds and p.constrained:
                assert np.all(H <= 1.0 + 1e-12), f"hidden state left [0, 1] at layer {j} step {t}"
            if keep:
                hs.append(H)
                zs.append(Z)
        if keep:
            cache.append((seq, hs, zs))
        seq = H
        assert H.shape == (batch, a)
    if seq.shape[1] != p.wo.shape[0]:
        raise ValueError("output weights do not match the last layer width")
    return seq @ p.wo + p.bo, cache


def _rnn_backward(p: MultiLayerRnnParams, cache, dpred: np.ndarray) -> dict[str, np.ndarray]:
    grads = {}
    final = cache[-1][1][-1]
    grads["wo"] = final.T @ dpred
    grads["bo"] = np.array(dpred.sum())
    dseq = dpred[:, None] * p.wo[None, :]
    for j in reversed(range(len(p.layers))):
        layer = p.layers[j]
        seq, hs, zs = cache[j]
        gW = np.zeros_like(layer.W)
        gU = np.zeros_like(layer.U)
        gb = np.zeros_like(layer.b)
        dinput = np.zeros_like(seq)
        dH = dseq
        for t in reversed(range(seq.shape[1])):
            dZ = dH * (zs[t] > 0.0)
            gW += hs[t].T @ dZ
            gb += dZ.sum(axis=0)
            gU[0] += seq[:, t] @ dZ
            dinput[:, t] = dZ @ layer.U[0]
            dH = dZ @ layer.W.T
        grads[f"layer{j}.W"] = gW
        grads[f"layer{j}.U"] = gU
        grads[f"layer{j}.b"] = gb
        dseq = dinput
    return grads


def _ffn_forward(p: FeedForwardParams, X):
    A = _check_batch(X)
    if A.shape[1] != p.input_dim:
        raise ValueError(f"input length {A.shape[1]} does not match {p.input_dim}")
    acts = [A]
    for w, b in zip(p.weights[:-1], p.biases[:-1]):
        A = np.maximum(A @ w + b, 0.0)
        acts.append(A)
    out = A @ p.weights[-1] + p.biases[-1]
    return out[:, 0], acts


def _ffn_backward(p: FeedForwardParams, acts, dpred):
    grads = {}
    d = dpred[:, None]
    for k in reversed(range(4)):
        grads[f"dense{k}.weight"] = acts[k].T @ d
        grads[f"dense{k}.bias"] = d.sum(axis=0)
        if k:
            d = (d @ p.weights[k].T) * (acts[k] > 0.0)
    return grads


def forward_multi(p: MultiLayerRnnParams, x, size_adaptive: bool = True,
                  check_bounds: bool = False) -> float:
    """Evaluate the stacked recurrence on one input vector.

    With ``size_adaptive`` the input must have ``a**2`` entries where ``a`` is
    the first layer's width.
    """
    x = _as_input(x)
    a = p.layers[0].width
    if size_adaptive and len(x) != a * a:
        raise ValueError(f"size-adaptive input must have {a * a} entries, got {len(x)}")
    return float(_rnn_forward(p, x[None, :], check_bounds=check_bounds)[0][0])


def forward_single(p: SingleLayerRnnParams, x, size_adaptive: bool = True,
                   check_bounds: bool = False) -> float:
    return forward_multi(p.as_multi(), x, size_adaptive, check_bounds)


def forward_ffn(p: FeedForwardParams, x) -> float:
    return float(p.predict_batch(_as_input(x)[None, :])[0])


# constraints --------------------------------------------------------------

def project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection of a vector onto ``{x : ||x||_1 <= radius}`` (sort-based)."""
    v = np.asarray(v, dtype=np.float64)
    a = np.abs(v)
    # the slack absorbs rounding in a previous projection, keeping this idempotent
    if a.sum() <= radius * (1 + 1e-12):
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u) - radius
    j = np.arange(1, len(u) + 1)
    rho = np.nonzero(u - css / j > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def project_capped_simplex(v: np.ndarray, radius: float) -> np.ndarray:
    """Projection onto ``{x >= 0, sum(x) <= radius}``: clamp, then L1-ball projection."""
    return project_l1_ball(np.maximum(v, 0.0), radius)


def _project_layer(layer: RnnLayer) -> RnnLayer:
    W = layer.W.copy()
    for k in range(W.shape[1]):
        W[:, k] = project_l1_ball(W[:, k], W_COL_L1)
    return RnnLayer(
        W,
        np.clip(layer.U, -U_MAX, U_MAX),
        np.clip(layer.b, -B_MAX, B_MAX),
        np.clip(layer.h0, -H0_MAX, H0_MAX),
    )


def project_constraints(p):
    """Nearest (Euclidean, block by block) parameters satisfying the constraint set."""
    if isinstance(p, SingleLayerRnnParams):
        return SingleLayerRnnParams.from_multi(project_constraints(p.as_multi()))
    if not p.constrained:
        return p
    return MultiLayerRnnParams(
        [_project_layer(layer) for layer in p.layers],
        project_capped_simplex(p.wo, WO_L1),
        np.clip(p.bo, 0.0, BO_MAX),
        True,
    )


def constraint_violations(p, tol: float = 1e-12) -> list[str]:
    if isinstance(p, SingleLayerRnnParams):
        p = p.as_multi()
    bad = []
    for j, layer in enumerate(p.layers):
        col = np.abs(layer.W).sum(axis=0)
        if np.any(col > W_COL_L1 + tol):
            bad.append(f"layer{j}.W column L1 norm {col.max():.6g} > {W_COL_L1}")
        if np.any(np.abs(layer.U) > U_MAX + tol):
            bad.append(f"layer{j}.U exceeds {U_MAX}")
        if np.any(np.abs(layer.b) > B_MAX + tol):
            bad.append(f"layer{j}.b exceeds {B_MAX}")
        if np.any(np.abs(layer.h0) > H0_MAX + tol):
            bad.append(f"layer{j}.h0 exceeds {H0_MAX}")
    if np.any(p.wo < -tol):
        bad.append("wo has negative entries")
    if np.abs(p.wo).sum() > WO_L1 + tol:
        bad.append(f"wo L1 norm exceeds {WO_L1}")
    if not (-tol <= float(p.bo) <= BO_MAX + tol):
        bad.append(f"bo outside [0, {BO_MAX}]")
    return bad


# initialisation -----------------------------------------------------------

def _uniform_l1_ball(rng, dim: int, radius: float) -> np.ndarray:
    # uniform on the cross-polytope: Dirichlet(1,...,1) with one slack coordinate
    mags = rng.dirichlet(np.ones(dim + 1))[:dim] * radius
    return mags * rng.choice([-1.0, 1.0], size=dim)


def _init_layer(rng, a: int, constrained: bool) -> RnnLayer:
    if constrained:
        W = np.stack([_uniform_l1_ball(rng, a, W_COL_L1) for _ in range(a)], axis=1)
        U = rng.uniform(-U_MAX, U_MAX, size=(1, a))
        b = rng.uniform(-B_MAX, B_MAX, size=a)
    else:
        # near-identity recurrence keeps a ReLU RNN trainable over long inputs
        W = np.eye(a) + rng.normal(0.0, 0.01, size=(a, a))
        U = rng.normal(0.0, 1.0 / np.sqrt(a), size=(1, a))
        b = np.zeros(a)
    return RnnLayer(W, U, b, np.zeros(a))


def init_rnn(widths: Sequence[int] | int, seed: int, constrained: bool = True):
    """Random RNN parameters; an ``int`` width gives a single-layer model.

    Constrained draws are uniform inside each constraint set; ``h0`` is zero.
    """
    rng = np.random.default_rng(seed)
    single = isinstance(widths, (int, np.integer))
    widths = (int(widths),) if single else tuple(int(a) for a in widths)
    if not widths or min(widths) < 1:
        raise ValueError(f"invalid widths {widths}")
    layers = [_init_layer(rng, a, constrained) for a in widths]
    a = widths[-1]
    if constrained:
        wo = rng.dirichlet(np.ones(a + 1))[:a] * WO_L1
        bo = np.array(rng.uniform(0.0, BO_MAX))
    else:
        wo = rng.normal(0.0, 1.0 / np.sqrt(a), size=a)
        bo = np.array(0.0)
    p = MultiLayerRnnParams(layers, wo, bo, constrained)
    return SingleLayerRnnParams.from_multi(p) if single else p


def init_ffn(input_dim: int, seed: int, hidden: Sequence[int] = FFN_HIDDEN) -> FeedForwardParams:
    """He-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    dims = [input_dim, *hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims, dims[1:]):
        lim = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return FeedForwardParams(weights, biases)


def init_params(shape, seed: int, mode: str = "constrained"):
    """Dispatch on ``shape``: an int or widths tuple for RNNs, ``("ffn", input_dim)`` for the FNN."""
    if isinstance(shape, tuple) and shape and shape[0] == "ffn":
        return init_ffn(shape[1], seed, *shape[2:])
    if mode not in ("constrained", "unconstrained"):
        raise ValueError(f"unknown mode {mode!r}")
    widths = getattr(shape, "widths", shape)
    return init_rnn(widths, seed, constrained=mode == "constrained")


def zeros_like_params(p):
    return type(p).from_tensors({k: np.zeros_like(v) for k, v in p.tensors().items()},
                                constrained=p.constrained)
