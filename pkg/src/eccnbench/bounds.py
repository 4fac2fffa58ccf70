"""Capacity and sample-complexity bounds for ReLU RNNs.

Every closed form is evaluated in 50-digit mpmath arithmetic and handed back
as a float. Parameter counts and operation counts are exact integers.

The chain behind the closed forms is

    W, T  ->  VCdim <= 2 (W + 2) (2 T + log2(8 e))       (extended net, +2 params)
          ->  Pdim <= VCdim
          ->  M <= 128/eps^2 [2 Pdim ln(34/eps) + ln(16/delta)]
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import mpmath

from .graphs import graph_space_size

_DPS = 50


def _mp(x) -> mpmath.mpf:
    return mpmath.mpf(x)


def log2_8e() -> mpmath.mpf:
    with mpmath.workdps(_DPS):
        return mpmath.log(8 * mpmath.e, 2)


def _check_eps_delta(eps: float, delta: float) -> None:
    if not (eps > 0 and delta > 0):
        raise ValueError(f"eps and delta must be positive, got eps={eps}, delta={delta}")
    if eps > 1 or delta > 1:
        raise ValueError(f"eps and delta must be at most 1, got eps={eps}, delta={delta}")


def _check_widths(widths: Sequence[int]) -> tuple[int, ...]:
    widths = tuple(int(a) for a in widths)
    if not widths or min(widths) < 1:
        raise ValueError(f"widths must be a non-empty list of positive integers, got {widths}")
    return widths


def param_count_single(a: int) -> int:
    if a < 1:
        raise ValueError("width must be >= 1")
    return a * a + 3 * a + 1


def param_count_multi(widths: Sequence[int]) -> int:
    widths = _check_widths(widths)
    return sum(a * a + 2 * a for a in widths) + widths[-1] + 1


def op_count_single(a: int, b: int) -> int:
    if a < 1 or b < 1:
        raise ValueError("width and input length must be >= 1")
    return b * (2 * a * a + 4 * a) + 2 * a + 5


def op_count_multi(widths: Sequence[int], b: int) -> int:
    widths = _check_widths(widths)
    if b < 1:
        raise ValueError("input length must be >= 1")
    a1 = widths[0]
    total = b * (2 * a1 * a1 + 4 * a1)
    for prev, nxt in zip(widths, widths[1:]):
        total += prev * (2 * nxt * nxt + 4 * nxt)
    return total + 2 * widths[-1] + 5


def vcdim_bound(W: int, T: int) -> float:
    """``2 W (2 T + log2(8e))`` for a thresholded net with ``W`` parameters."""
    return float(_vcdim_mp(W, T))


def vcdim_bound_int(W: int, T: int) -> int:
    return int(mpmath.floor(_vcdim_mp(W, T)))


def _vcdim_mp(W: int, T: int) -> mpmath.mpf:
    if W < 1 or T < 1:
        raise ValueError("W and T must be >= 1")
    with mpmath.workdps(_DPS):
        return 2 * _mp(W) * (2 * _mp(T) + log2_8e())


def _sc_from_pdim_mp(pdim, eps, delta) -> mpmath.mpf:
    with mpmath.workdps(_DPS):
        e, d = _mp(eps), _mp(delta)
        return 128 / e**2 * (2 * _mp(pdim) * mpmath.log(34 / e) + mpmath.log(16 / d))


def sample_complexity_from_pdim(pdim: float, eps: float, delta: float) -> float:
    if pdim < 0:
        raise ValueError("pseudo-dimension must be non-negative")
    _check_eps_delta(eps, delta)
    return float(_sc_from_pdim_mp(pdim, eps, delta))


def _closed_form(prefactor, second, eps, delta) -> mpmath.mpf:
    # 128/eps^2 [ln(16/delta) + ln(34/eps) * 4 * prefactor * second]
    with mpmath.workdps(_DPS):
        e, d = _mp(eps), _mp(delta)
        return 128 / e**2 * (
            mpmath.log(16 / d) + mpmath.log(34 / e) * 4 * _mp(prefactor) * second
        )


def sample_complexity_single(a: int, b: int, eps: float, delta: float) -> float:
    _check_eps_delta(eps, delta)
    if a < 1 or b < 1:
        raise ValueError("width and input length must be >= 1")
    with mpmath.workdps(_DPS):
        second = 2 * b * (2 * a * a + 4 * a) + 4 * a + 10 + log2_8e()
        return float(_closed_form(a * a + 3 * a + 3, second, eps, delta))


def sample_complexity_multi(widths: Sequence[int], b: int, eps: float, delta: float) -> float:
    _check_eps_delta(eps, delta)
    widths = _check_widths(widths)
    if b < 1:
        raise ValueError("input length must be >= 1")
    prefactor = sum(a * a + 2 * a for a in widths) + widths[-1] + 3
    a1, ad = widths[0], widths[-1]
    inner = sum(p * (4 * q * q + 8 * q) for p, q in zip(widths, widths[1:]))
    with mpmath.workdps(_DPS):
        second = 2 * b * (2 * a1 * a1 + 4 * a1) + inner + 4 * ad + 10 + log2_8e()
        return float(_closed_form(prefactor, second, eps, delta))


def sample_complexity_chain(widths: Sequence[int], b: int, eps: float, delta: float) -> float:
    """Same bound assembled from the parameter count, op count and VC bound."""
    _check_eps_delta(eps, delta)
    W = param_count_multi(widths)
    T = op_count_multi(widths, b)
    return float(_sc_from_pdim_mp(_vcdim_mp(W + 2, T), eps, delta))


def _graph_mp(n: int, d: int, eps: float, delta: float, wide_prefactor: bool) -> mpmath.mpf:
    _check_eps_delta(eps, delta)
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    if wide_prefactor and d == 1:
        prefactor = n * n + 4 * n + 3
        poly = 4 * n**4 + 8 * n**3 + 4 * n + 10
    else:
        prefactor = d * n * n + (2 * d + 1) * n + 3
        poly = 4 * n**4 + (8 + 4 * (d - 1)) * n**3 + 8 * (d - 1) * n * n + 4 * n + 10
    with mpmath.workdps(_DPS):
        return _closed_form(prefactor, poly + log2_8e(), eps, delta)


def sample_complexity_graph(
    n: int, d: int, eps: float, delta: float, wide_prefactor: bool = True
) -> float:
    """Bound for the size-adaptive RNN (``d`` layers of width ``n``, input ``n**2``).

    With ``wide_prefactor=True`` and ``d == 1`` the single-layer graph bound uses the
    prefactor ``n^2 + 4n + 3``. ``wide_prefactor=False`` (or ``d > 1``)
    uses the multi-layer form, whose ``d = 1`` prefactor is ``n^2 + 3n + 3``
    and agrees with substituting ``a = n, b = n^2`` into the single-layer bound.
    """
    return float(_graph_mp(n, d, eps, delta, wide_prefactor))


def breakeven_ratio(
    n: int, d: int, eps: float, delta: float, wide_prefactor: bool = True
) -> float:
    """Graph-mode sample complexity divided by the number of graphs on <= n vertices."""
    with mpmath.workdps(_DPS):
        return float(_graph_mp(n, d, eps, delta, wide_prefactor) / _mp(graph_space_size(n)))


def round_sig(x: float, digits: int = 12) -> float:
    if x == 0 or not math.isfinite(x):
        return x
    return round(x, digits - 1 - int(math.floor(math.log10(abs(x)))))


@dataclass(frozen=True)
class RnnShape:
    widths: tuple[int, ...]
    max_input_len: int

    def __post_init__(self):
        _check_widths(self.widths)
        if self.max_input_len < 1:
            raise ValueError("max input length must be >= 1")

    @property
    def layers(self) -> int:
        return len(self.widths)

    @classmethod
    def size_adaptive(cls, n: int, d: int = 1) -> "RnnShape":
        return cls((n,) * d, n * n)


@dataclass(frozen=True)
class BoundReport:
    shape: RnnShape
    W: int
    T: int
    vcdim_bound: float
    vcdim_bound_int: int
    pdim_bound: float
    eps: float
    delta: float
    sample_complexity: float
    graph_n: int | None = None
    breakeven: float | None = None
    sample_complexity_alt: float | None = None
    breakeven_alt: float | None = None

    def sample_complexity_at(self, eps: float, delta: float) -> float:
        return sample_complexity_from_pdim(self.pdim_bound, eps, delta)

    CSV_COLUMNS = (
        "widths", "b", "d", "W", "T", "vcdim_bound", "pdim_bound",
        "sample_complexity", "breakeven_ratio",
    )

    def csv_row(self) -> list[str]:
        return [
            " ".join(map(str, self.shape.widths)),
            str(self.shape.max_input_len),
            str(self.shape.layers),
            str(self.W),
            str(self.T),
            repr(round_sig(self.vcdim_bound)),
            repr(round_sig(self.pdim_bound)),
            repr(round_sig(self.sample_complexity)),
            "" if self.breakeven is None else repr(round_sig(self.breakeven)),
        ]

    def text(self) -> str:
        rows = [
            ("widths", " ".join(map(str, self.shape.widths))),
            ("b (max input length)", str(self.shape.max_input_len)),
            ("d (layers)", str(self.shape.layers)),
            ("W (parameters)", str(self.W)),
            ("T (operations)", str(self.T)),
            ("VCdim bound", f"{round_sig(self.vcdim_bound):.12g} (floor {self.vcdim_bound_int})"),
            ("Pdim bound", f"{round_sig(self.pdim_bound):.12g}"),
            (f"M_L(eps={self.eps:g}, delta={self.delta:g})", f"{round_sig(self.sample_complexity):.12g}"),
        ]
        if self.graph_n is not None:
            rows.append(("|G<=n|", str(graph_space_size(self.graph_n))))
            rows.append(("break-even ratio", f"{self.breakeven:.6g} ({100 * self.breakeven:.3g} %)"))
        if self.sample_complexity_alt is not None:
            rows.append(("M_L (n^2+3n+3 prefactor)", f"{round_sig(self.sample_complexity_alt):.12g}"))
            rows.append(("break-even (n^2+3n+3 prefactor)",
                         f"{self.breakeven_alt:.6g} ({100 * self.breakeven_alt:.3g} %)"))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def bound_report(shape: RnnShape, eps: float, delta: float) -> BoundReport:
    _check_eps_delta(eps, delta)
    W = param_count_multi(shape.widths)
    T = op_count_multi(shape.widths, shape.max_input_len)
    vc = vcdim_bound(W + 2, T)
    return BoundReport(
        shape=shape, W=W, T=T,
        vcdim_bound=vc, vcdim_bound_int=vcdim_bound_int(W + 2, T), pdim_bound=vc,
        eps=eps, delta=delta,
        sample_complexity=sample_complexity_multi(shape.widths, shape.max_input_len, eps, delta),
    )


def graph_bound_report(n: int, d: int, eps: float, delta: float, diagnostic: bool = False) -> BoundReport:
    """Report for the size-adaptive RNN; ``diagnostic`` adds the alternative d=1 prefactor."""
    base = bound_report(RnnShape.size_adaptive(n, d), eps, delta)
    extra = {}
    if diagnostic and d == 1:
        extra = dict(
            sample_complexity_alt=sample_complexity_graph(n, d, eps, delta, wide_prefactor=False),
            breakeven_alt=breakeven_ratio(n, d, eps, delta, wide_prefactor=False),
        )
    return BoundReport(
        **{**base.__dict__,
           "sample_complexity": sample_complexity_graph(n, d, eps, delta),
           "graph_n": n,
           "breakeven": breakeven_ratio(n, d, eps, delta),
           **extra},
    )
