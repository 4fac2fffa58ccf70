"""Labelled ECCN datasets: file format, generation and splitting.

Dataset file (UTF-8, LF)::

    #eccn-dataset v1 n_max=<k> label_scale=<float>
    <n>\\t<upper-triangle bits>\\t<raw ECCN>
    ...

Labels are normalised by ``label_scale = floor(n_max**2 / 4)``, the largest
edge clique cover number a graph on ``n_max`` vertices can have, so that
normalised labels lie in ``[0, 1]``.
"""

from __future__ import annotations

import math
import multiprocessing
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .fileio import atomic_write_bytes
from .graphs import Graph, GraphParseError, decode_record, encode_record, er_generate, flatten
from .solvers import BudgetExhausted, exact_eccn, verify_cover

HEADER_RE = re.compile(r"^#eccn-dataset v1 n_max=(\d+) label_scale=(\S+)$")


def default_label_scale(n_max: int) -> float:
    return float(max(1, n_max * n_max // 4))


@dataclass(frozen=True)
class Record:
    graph: Graph
    eccn: int


@dataclass
class LabeledDataset:
    records: tuple[Record, ...]
    n_max: int
    label_scale: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.records = tuple(self.records)
        for k, r in enumerate(self.records):
            if r.graph.n > self.n_max:
                raise ValueError(f"record {k} has {r.graph.n} vertices > n_max={self.n_max}")
            if not 0 <= r.eccn <= self.label_scale:
                raise ValueError(f"record {k} label {r.eccn} outside [0, {self.label_scale}]")

    def __len__(self) -> int:
        return len(self.records)

    def subset(self, indices: Iterable[int]) -> "LabeledDataset":
        return LabeledDataset(tuple(self.records[i] for i in indices), self.n_max,
                              self.label_scale, dict(self.provenance))

    @property
    def raw_labels(self) -> np.ndarray:
        return np.array([r.eccn for r in self.records], dtype=np.float64)

    @property
    def labels(self) -> np.ndarray:
        return self.raw_labels / self.label_scale

    @property
    def sizes(self) -> np.ndarray:
        return np.array([r.graph.n for r in self.records], dtype=int)

    def inputs(self) -> np.ndarray:
        if not self.records:
            return np.zeros((0, self.n_max * self.n_max))
        return np.stack([flatten(r.graph, self.n_max).bits for r in self.records])

    def header(self) -> str:
        return f"#eccn-dataset v1 n_max={self.n_max} label_scale={self.label_scale!r}"

    def dumps(self) -> str:
        lines = [self.header()]
        lines += [f"{encode_record(r.graph)}\t{r.eccn}" for r in self.records]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        atomic_write_bytes(path, self.dumps().encode("utf-8"))


def parse_dataset(text: str) -> LabeledDataset:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise GraphParseError("empty dataset file", 1, "header")
    m = HEADER_RE.match(lines[0])
    if not m:
        raise GraphParseError(f"bad header {lines[0]!r}", 1, "header")
    n_max = int(m.group(1))
    try:
        scale = float(m.group(2))
    except ValueError:
        raise GraphParseError(f"label_scale {m.group(2)!r} is not a number", 1, "label_scale") from None
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != 3:
            raise GraphParseError("expected '<n>\\t<bits>\\t<eccn>'", lineno, "record")
        g = decode_record("\t".join(fields[:2]), lineno)
        try:
            eccn = int(fields[2])
        except ValueError:
            raise GraphParseError(f"label {fields[2]!r} is not an integer", lineno, "eccn") from None
        if g.n > n_max:
            raise GraphParseError(f"graph has {g.n} vertices > n_max={n_max}", lineno, "n")
        if not 0 <= eccn <= scale:
            raise GraphParseError(f"label {eccn} outside [0, {scale}]", lineno, "eccn")
        records.append(Record(g, eccn))
    return LabeledDataset(tuple(records), n_max, scale)


def load_dataset(path) -> LabeledDataset:
    return parse_dataset(Path(path).read_text(encoding="utf-8"))


def read_graph_file(path) -> list[Graph]:
    """Graph records, one per line; ``#`` lines and trailing label columns are ignored."""
    graphs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        graphs.append(decode_record("\t".join(fields[:2]), lineno))
    return graphs


# generation ---------------------------------------------------------------

@dataclass(frozen=True)
class GenerationPlan:
    sizes: tuple[int, ...]
    p_values: tuple[float, ...]
    samples: int
    seed: int
    budget: int | None = None

    def job(self, index: int) -> tuple[int, float, int]:
        """(n, p, seed) for record ``index``; sizes and densities cycle round-robin."""
        p = self.p_values[index % len(self.p_values)]
        n = self.sizes[(index // len(self.p_values)) % len(self.sizes)]
        return n, p, self.seed + index


def label_graph(g: Graph, budget: int | None = None) -> int | None:
    """Exact ECCN with its witness verified; ``None`` when the budget runs out."""
    try:
        k, cover = exact_eccn(g, budget)
    except BudgetExhausted:
        return None
    check = verify_cover(g, cover)
    if not check:
        raise AssertionError(f"exact solver produced an invalid witness: {check.violation}")
    return k


def _label_job(args):
    n, p, seed, budget = args
    g = er_generate(n, p, seed)
    return g, label_graph(g, budget)


def generate_dataset(plan: GenerationPlan, workers: int = 1) -> tuple[LabeledDataset, int]:
    """Generate and exactly label ``plan.samples`` graphs.

    Returns the dataset and the number of records dropped because the solver
    budget ran out. Output order is the record index order, so the result does
    not depend on ``workers``.
    """
    jobs = [(*plan.job(i), plan.budget) for i in range(plan.samples)]
    if workers > 1:
        ctx = multiprocessing.get_context("fork" if os.name == "posix" else "spawn")
        with ctx.Pool(workers) as pool:
            results = pool.map(_label_job, jobs, chunksize=max(1, len(jobs) // (8 * workers)))
    else:
        results = [_label_job(j) for j in jobs]
    records = [Record(g, k) for g, k in results if k is not None]
    dropped = len(results) - len(records)
    n_max = max(plan.sizes)
    provenance = {
        "sizes": list(plan.sizes), "p": list(plan.p_values), "samples": plan.samples,
        "seed": plan.seed, "budget": plan.budget,
    }
    return LabeledDataset(tuple(records), n_max, default_label_scale(n_max), provenance), dropped


# splitting ----------------------------------------------------------------

SPLIT_FRACTIONS = (0.7, 0.1, 0.2)


def split_dataset(d: LabeledDataset, seed: int) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """70/10/20 train/validation/test split, stratified by vertex count.

    Within each vertex-count stratum the records are shuffled and cut at
    rounded 70 % and 80 % marks.
    """
    if len(d) < 10:
        raise ValueError(f"need at least 10 records to split, got {len(d)}")
    rng = np.random.default_rng(seed)
    parts: list[list[int]] = [[], [], []]
    sizes = d.sizes
    for n in sorted(set(sizes.tolist())):
        idx = np.nonzero(sizes == n)[0]
        idx = idx[rng.permutation(len(idx))]
        m = len(idx)
        cut1 = int(math.floor(SPLIT_FRACTIONS[0] * m + 0.5))
        cut2 = int(math.floor((SPLIT_FRACTIONS[0] + SPLIT_FRACTIONS[1]) * m + 0.5))
        parts[0] += idx[:cut1].tolist()
        parts[1] += idx[cut1:cut2].tolist()
        parts[2] += idx[cut2:].tolist()
    if not parts[0] or not parts[1] or not parts[2]:
        raise ValueError("too few records to fill every split")
    return tuple(d.subset(sorted(p)) for p in parts)


def parse_size_range(text: str) -> tuple[int, ...]:
    """``"6-10"`` or ``"6,7,9"`` to a tuple of sizes."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ValueError(f"empty size specification {text!r}")
    return tuple(out)


def parse_floats(text: str | Sequence[float]) -> tuple[float, ...]:
    if isinstance(text, str):
        return tuple(float(t) for t in text.split(",") if t.strip())
    return tuple(float(t) for t in text)
