"""Operation-counting interpreter for the thresholded RNN.

Runs the recurrence on :class:`Counted` scalars so that every real-valued
``+ - * /``, every comparison and every emitted truth value bumps a shared
counter. The accounting convention:

* a dot product of length ``k`` costs ``k`` multiplications and ``k - 1`` additions;
* a ReLU costs one comparison plus one conditional output;
* the extra threshold unit ``1[f(x) + w y + c >= 0]`` costs one multiplication,
  two additions, one comparison and one output.

The interpreter is only a check on the closed-form operation counts; it is
slow and deliberately scalar.
"""

from __future__ import annotations

import random
from typing import Sequence


class OpCounter:
    def __init__(self):
        self.count = 0

    def tick(self, k: int = 1) -> None:
        self.count += k


class Counted:
    __slots__ = ("value", "counter")

    def __init__(self, value: float, counter: OpCounter):
        self.value = float(value)
        self.counter = counter

    def _wrap(self, value: float) -> "Counted":
        self.counter.tick()
        return Counted(value, self.counter)

    @staticmethod
    def _v(other) -> float:
        return other.value if isinstance(other, Counted) else float(other)

    def __add__(self, other):
        return self._wrap(self.value + self._v(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.value - self._v(other))

    def __rsub__(self, other):
        return self._wrap(self._v(other) - self.value)

    def __mul__(self, other):
        return self._wrap(self.value * self._v(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.value / self._v(other))

    def __ge__(self, other) -> bool:
        self.counter.tick()
        return self.value >= self._v(other)

    def __gt__(self, other) -> bool:
        self.counter.tick()
        return self.value > self._v(other)


def _output(flag: bool, counter: OpCounter) -> bool:
    counter.tick()
    return flag


def _relu(z: Counted) -> Counted:
    positive = _output(z > 0.0, z.counter)
    return z if positive else Counted(0.0, z.counter)


def _dot(ws: Sequence[Counted], hs: Sequence[Counted]) -> Counted:
    acc = ws[0] * hs[0]
    for w, h in zip(ws[1:], hs[1:]):
        acc = acc + w * h
    return acc


def _layer(W, U, b, h0, inputs):
    a = len(b)
    h = list(h0)
    for x in inputs:
        wh = [_dot([W[j][k] for j in range(a)], h) for k in range(a)]
        ux = [U[k] * x for k in range(a)]
        h = [_relu(b[k] + wh[k] + ux[k]) for k in range(a)]
    return h


def count_forward_ops(widths: Sequence[int], b: int, seed: int = 0) -> int:
    """Count operations deciding membership for one maximal-length input.

    Random parameter values are used; the count does not depend on them.
    """
    rng = random.Random(seed)
    counter = OpCounter()

    def c(v=None):
        return Counted(rng.uniform(-1, 1) if v is None else v, counter)

    inputs = [c(float(rng.randint(0, 1))) for _ in range(b)]
    seq = inputs
    for a in widths:
        W = [[c() for _ in range(a)] for _ in range(a)]
        U = [c() for _ in range(a)]
        bias = [c() for _ in range(a)]
        h0 = [c(0.0) for _ in range(a)]
        seq = _layer(W, U, bias, h0, seq)
    wo = [c() for _ in range(widths[-1])]
    bo = c()
    f = _dot(wo, seq) + bo
    w, y, cst = c(), c(), c()
    _output((f + w * y + cst) >= 0.0, counter)
    return counter.count
