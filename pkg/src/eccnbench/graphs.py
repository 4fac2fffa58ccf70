"""Undirected simple graphs stored as neighbour bitmasks.

A graph on ``n`` vertices keeps one integer per vertex whose set bits are
that vertex's neighbours. The canonical serialisation is the upper triangle
of the adjacency matrix read row-major, which is also what the text record
format stores.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator

import numpy as np

MAX_VERTICES = 64


class GraphParseError(ValueError):
    """Raised when a graph record cannot be decoded."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


@dataclass(frozen=True)
class Graph:
    n: int
    adj: tuple[int, ...]

    def __post_init__(self):
        if not 1 <= self.n <= MAX_VERTICES:
            raise ValueError(f"vertex count must be in 1..{MAX_VERTICES}, got {self.n}")
        if len(self.adj) != self.n:
            raise ValueError("adjacency must hold one mask per vertex")
        full = (1 << self.n) - 1
        for v, mask in enumerate(self.adj):
            if mask & ~full:
                raise ValueError(f"vertex {v} references a vertex >= {self.n}")
            if mask >> v & 1:
                raise ValueError(f"self-loop at vertex {v}")
            for u in iter_bits(mask):
                if not self.adj[u] >> v & 1:
                    raise ValueError(f"asymmetric adjacency between {v} and {u}")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        adj = [0] * n
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            adj[u] |= 1 << v
            adj[v] |= 1 << u
        return cls(n, tuple(adj))

    @classmethod
    def from_upper_bits(cls, n: int, bits: Iterable[int]) -> "Graph":
        bits = list(bits)
        if len(bits) != n * (n - 1) // 2:
            raise ValueError(f"expected {n * (n - 1) // 2} upper-triangle bits, got {len(bits)}")
        pairs = ((i, j) for i in range(n) for j in range(i + 1, n))
        return cls.from_edges(n, (pair for pair, bit in zip(pairs, bits) if bit))

    @classmethod
    def from_matrix(cls, matrix) -> "Graph":
        a = np.asarray(matrix)
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValueError("adjacency matrix must be square")
        if np.any(a != a.T):
            raise ValueError("adjacency matrix must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency matrix must have zero diagonal")
        return cls.from_edges(n, zip(*np.nonzero(np.triu(a, 1))))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        full = (1 << n) - 1
        return cls(n, tuple(full & ~(1 << v) for v in range(n)))

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(n, (0,) * n)

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adj[u] >> v & 1)

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Edges ``(u, v)`` with ``u < v`` in row-major order."""
        return tuple(
            (u, v) for u in range(self.n) for v in iter_bits(self.adj[u]) if v > u
        )

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def upper_bits(self) -> list[int]:
        return [
            self.adj[i] >> j & 1 for i in range(self.n) for j in range(i + 1, self.n)
        ]

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.uint8)
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1
        return a


def iter_bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def bits_to_set(mask: int) -> frozenset[int]:
    return frozenset(iter_bits(mask))


def set_to_bits(vertices: Iterable[int]) -> int:
    mask = 0
    for v in vertices:
        mask |= 1 << v
    return mask


def er_generate(n: int, p: float, seed: int) -> Graph:
    """Draw an Erdős–Rényi graph G(n, p).

    Each of the ``n(n-1)/2`` vertex pairs, visited row-major over the upper
    triangle, becomes an edge when its uniform draw falls below ``p``.
    """
    if not 1 <= n <= MAX_VERTICES:
        raise ValueError(f"vertex count must be in 1..{MAX_VERTICES}, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability must be in [0, 1], got {p}")
    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
    draws = rng.random(n * (n - 1) // 2) < p
    return Graph.from_upper_bits(n, draws.astype(int))


@dataclass(frozen=True)
class FlatEncoding:
    bits: np.ndarray
    true_n: int

    @property
    def n_max(self) -> int:
        return int(round(np.sqrt(len(self.bits))))


def flatten(g: Graph, n_max: int) -> FlatEncoding:
    """Row-major ``n x n`` adjacency matrix, zero-padded to ``n_max**2`` entries."""
    if g.n > n_max:
        raise ValueError(f"graph has {g.n} vertices, more than n_max={n_max}")
    bits = np.zeros(n_max * n_max, dtype=np.float64)
    bits[: g.n * g.n] = g.adjacency_matrix().reshape(-1)
    bits.flags.writeable = False
    return FlatEncoding(bits, g.n)


def unflatten(enc: FlatEncoding) -> Graph:
    n = enc.true_n
    if np.any(enc.bits[n * n:]):
        raise ValueError("non-zero entries in the padding region")
    return Graph.from_matrix(np.asarray(enc.bits[: n * n]).reshape(n, n).astype(np.uint8))


def graph_space_size(n: int) -> int:
    """Number of labelled simple graphs with between 1 and ``n`` vertices."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return sum(1 << (i * i - i) // 2 for i in range(1, n + 1))


def encode_record(g: Graph) -> str:
    bits = "".join(map(str, g.upper_bits()))
    return f"{g.n}\t{bits or '0'}"


def decode_record(text: str, line: int | None = None) -> Graph:
    """Parse ``<n>\\t<upper-triangle bits>``.

    A single-vertex graph has no pairs; its bit field is written as ``0``,
    matching the two-vertex empty graph's spelling of "no edges".
    """
    fields = text.rstrip("\n").split("\t")
    if len(fields) < 2:
        raise GraphParseError("expected '<n>\\t<bits>'", line, "n")
    try:
        n = int(fields[0])
    except ValueError:
        raise GraphParseError(f"vertex count {fields[0]!r} is not an integer", line, "n") from None
    if not 1 <= n <= MAX_VERTICES:
        raise GraphParseError(f"vertex count {n} outside 1..{MAX_VERTICES}", line, "n")
    raw = fields[1]
    if raw.strip("01") or not raw:
        raise GraphParseError(f"bit field {raw!r} is not binary", line, "bits")
    expected = n * (n - 1) // 2
    if expected == 0:
        if raw != "0":
            raise GraphParseError("single-vertex graph must use bit field '0'", line, "bits")
        return Graph.empty(n)
    if len(raw) != expected:
        raise GraphParseError(
            f"expected {expected} bits for n={n}, got {len(raw)}", line, "bits"
        )
    return Graph.from_upper_bits(n, (int(c) for c in raw))
