"""Supervised training of ECCN predictors.

Minibatch Adam on the mean squared error in normalised label space, with
projection back onto the constraint set after every step for constrained
RNNs and early stopping on validation MSE.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .data import LabeledDataset
from .rnn import init_ffn, init_rnn, trainable
from .solvers import kellerman_cover

MODEL_KINDS = ("constrained_rnn", "multi_rnn", "rnn", "ffn")


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, which: str):
        self.epoch = epoch
        super().__init__(f"non-finite {which} loss at epoch {epoch}")


@dataclass
class TrainConfig:
    """Training hyperparameters; ``hidden_width = 0`` means width ``n_max``."""

    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 2000
    patience: int = 20
    seed: int = 0
    model: str = "constrained_rnn"
    hidden_width: int = 0
    layers: int = 1
    noise_sigma: float = 0.0
    split_seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.model not in MODEL_KINDS:
            raise ValueError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    @classmethod
    def from_text(cls, text: str) -> "TrainConfig":
        types = {f.name: f.type for f in fields(cls)}
        casts = {"float": float, "int": int, "str": str}
        values = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ValueError(f"config line {lineno}: unknown key {key!r}")
            try:
                values[key] = casts[types[key]](value)
            except ValueError:
                raise ValueError(f"config line {lineno}: bad value {value!r} for {key}") from None
        return cls(**values)

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in fields(self))


def build_model(config: TrainConfig, n_max: int):
    if config.model == "ffn":
        return init_ffn(n_max * n_max, config.seed)
    if config.model == "constrained_rnn":
        if config.layers == 1:
            return init_rnn(n_max, config.seed, constrained=True)
        return init_rnn((n_max,) * config.layers, config.seed, constrained=True)
    if config.model == "multi_rnn":
        return init_rnn((n_max,) * max(2, config.layers), config.seed, constrained=True)
    width = config.hidden_width or n_max
    if config.layers == 1:
        return init_rnn(width, config.seed, constrained=False)
    return init_rnn((width,) * config.layers, config.seed, constrained=False)


# losses and gradients -----------------------------------------------------

def mse(predictions, labels) -> float:
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if len(p) != len(y):
        raise ValueError(f"length mismatch: {len(p)} predictions, {len(y)} labels")
    if len(p) == 0:
        raise ValueError("mse of an empty sample")
    return float(np.mean((p - y) ** 2))


def gradient(model, X, y) -> dict[str, np.ndarray]:
    """Gradient of the batch MSE with respect to every trainable tensor."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.ndim == 1:
        X = X[None, :]
    if len(y) == 0 or X.shape[0] != len(y):
        raise ValueError("batch must be non-empty with one label per input")
    return model.loss_and_grad(X, y)[1]


def predict(model, X, chunk: int = 4096) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.concatenate([model.predict_batch(X[i:i + chunk]) for i in range(0, len(X), chunk)])


# Adam ---------------------------------------------------------------------

@dataclass
class AdamState:
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, lr: float) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; tensors without a gradient pass through."""
    t = state.t + 1
    m, v = dict(state.m), dict(state.v)
    out = dict(params)
    for name, g in grads.items():
        if name not in params:
            raise ValueError(f"gradient for unknown tensor {name!r}")
        if np.shape(g) != np.shape(params[name]):
            raise ValueError(f"shape mismatch for {name}: {np.shape(g)} vs {np.shape(params[name])}")
        m[name] = state.beta1 * m.get(name, 0.0) + (1 - state.beta1) * g
        v[name] = state.beta2 * v.get(name, 0.0) + (1 - state.beta2) * g * g
        m_hat = m[name] / (1 - state.beta1**t)
        v_hat = v[name] / (1 - state.beta2**t)
        out[name] = params[name] - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return out, AdamState(t, m, v, state.beta1, state.beta2, state.eps)


# training -----------------------------------------------------------------

class EarlyStopping:
    """Stop once validation loss has not improved for ``patience`` epochs."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.bad_epochs = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        """Record an epoch; returns True when it is the new best."""
        if val_loss < self.best:
            self.best, self.best_epoch, self.bad_epochs = val_loss, epoch, 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_mse: float
    val_mse: float
    best: bool


@dataclass
class TrainResult:
    params: object
    history: list[EpochRecord]
    best_epoch: int

    @property
    def best_val_mse(self) -> float:
        return self.history[self.best_epoch - 1].val_mse

    def history_csv(self) -> str:
        lines = ["epoch,train_mse,val_mse,best_flag"]
        lines += [f"{r.epoch},{r.train_mse!r},{r.val_mse!r},{int(r.best)}" for r in self.history]
        return "\n".join(lines) + "\n"


def add_label_noise(labels, sigma: float, seed: int) -> np.ndarray:
    """``y + N(0, sigma)`` per label, unclipped."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    y = np.asarray(labels, dtype=np.float64)
    if sigma == 0:
        return y.copy()
    return y + np.random.default_rng(seed).normal(0.0, sigma, size=y.shape)


def train(model, train_set: LabeledDataset, val_set: LabeledDataset, config: TrainConfig,
          on_epoch: Callable[[EpochRecord], None] | None = None) -> TrainResult:
    """Fit ``model`` and return the parameters of the best validation epoch.

    Training labels get Gaussian noise when ``config.noise_sigma > 0``; the
    validation labels stay clean. Reported train MSE is against the labels
    actually used for fitting.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("training and validation sets must be non-empty")
    X, X_val = train_set.inputs(), val_set.inputs()
    y = add_label_noise(train_set.labels, config.noise_sigma, config.seed + 1)
    y_val = val_set.labels
    rng = np.random.default_rng(config.seed)
    params = model.project()
    tensors = params.tensors()
    state = AdamState()
    stopper = EarlyStopping(config.patience)
    history: list[EpochRecord] = []
    best_params = params

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(X))
        for start in range(0, len(X), config.batch_size):
            idx = order[start:start + config.batch_size]
            _, grads = params.loss_and_grad(X[idx], y[idx])
            grads = {k: g for k, g in grads.items() if trainable(k)}
            tensors, state = adam_step(tensors, grads, state, config.learning_rate)
            params = type(params).from_tensors(tensors, constrained=params.constrained).project()
            tensors = params.tensors()
        train_mse = mse(predict(params, X), y)
        val_mse = mse(predict(params, X_val), y_val)
        if not math.isfinite(train_mse):
            raise TrainingDiverged(epoch, "training")
        if not math.isfinite(val_mse):
            raise TrainingDiverged(epoch, "validation")
        improved = stopper.update(epoch, val_mse)
        if improved:
            best_params = params
        record = EpochRecord(epoch, train_mse, val_mse, improved)
        history.append(record)
        if on_epoch:
            on_epoch(record)
        if stopper.should_stop:
            break
    return TrainResult(best_params, history, stopper.best_epoch)


def evaluate(params, dataset: LabeledDataset) -> float:
    return mse(predict(params, dataset.inputs()), dataset.labels)


# baselines ----------------------------------------------------------------

@dataclass(frozen=True)
class ConstantPredictor:
    raw: int
    label_scale: float = 1.0

    @property
    def value(self) -> float:
        return self.raw / self.label_scale

    def predict_batch(self, X) -> np.ndarray:
        return np.full(len(X), self.value)


def majority_vote_baseline(raw_labels, label_scale: float = 1.0) -> ConstantPredictor:
    """Most frequent raw label; ties go to the smallest label."""
    counts = Counter(int(v) for v in raw_labels)
    if not counts:
        raise ValueError("majority vote needs at least one label")
    top = max(counts.values())
    return ConstantPredictor(min(v for v, c in counts.items() if c == top), label_scale)


def kellerman_mse(dataset: LabeledDataset) -> float:
    preds = [kellerman_cover(r.graph).size / dataset.label_scale for r in dataset.records]
    return mse(preds, dataset.labels)


# selection rule -----------------------------------------------------------

def sem_tolerance(m: int) -> float:
    """Empirical-error tolerance ``8 / (3 sqrt(m))`` for a sample of size ``m``."""
    if m < 1:
        raise ValueError("sample size must be >= 1")
    return 8.0 / (3.0 * math.sqrt(m))


@dataclass
class SemReport:
    result: TrainResult
    train_mse: float
    best_train_mse: float
    tolerance: float
    restart_train_mse: list[float]

    @property
    def attained(self) -> bool:
        return self.train_mse <= self.best_train_mse + self.tolerance


def sem_select(train_set: LabeledDataset, val_set: LabeledDataset, config: TrainConfig,
               restarts: int = 3) -> SemReport:
    """Train with ``config.seed`` and check it against ``restarts - 1`` reseeded runs.

    Gradient training gives no empirical-error-minimisation guarantee, so this
    reports whether the primary run's clean train MSE lies within
    ``8 / (3 sqrt(m))`` of the best seen, rather than promising it.
    """
    m = len(train_set)
    tol = sem_tolerance(m)
    runs = []
    for k in range(max(1, restarts)):
        cfg = TrainConfig(**{**config.__dict__, "seed": config.seed + k})
        result = train(build_model(cfg, train_set.n_max), train_set, val_set, cfg)
        runs.append((result, evaluate(result.params, train_set)))
    scores = [s for _, s in runs]
    return SemReport(runs[0][0], scores[0], min(scores), tol, scores)
