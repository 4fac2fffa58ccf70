"""Command-line entry point: ``eccnbench {generate,solve,bounds,train,eval,report}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver budget
exhausted for every record.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import checkpoint
from .bounds import RnnShape, bound_report, graph_bound_report
from .data import (
    GenerationPlan,
    LabeledDataset,
    generate_dataset,
    load_dataset,
    parse_floats,
    parse_size_range,
    read_graph_file,
    split_dataset,
)
from .fileio import atomic_write_text
from .graphs import GraphParseError
from .learner import (
    TrainConfig,
    TrainingDiverged,
    build_model,
    evaluate,
    kellerman_mse,
    majority_vote_baseline,
    train,
)
from .solvers import BudgetExhausted, exact_eccn, kellerman_cover, verify_cover

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BUDGET = 0, 1, 2, 3

SCENARIOS = {
    "sparse": (0.1,),
    "medium": (0.5,),
    "dense": (0.9,),
    "mixed": (0.1, 0.5, 0.9),
}

REPORT_COLUMNS = ("scenario", "model", "sweep", "sweep_value", "seed", "test_mse", "status")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _fmt(x: float) -> str:
    return repr(float(x))


# manifest -----------------------------------------------------------------

@dataclass
class ExperimentManifest:
    scenario: str = "mixed"
    p: tuple[float, ...] = ()
    sizes: tuple[int, ...] = (6, 7, 8, 9, 10)
    samples: int = 20000
    seed: int = 0
    budget: int | None = None
    max_exact_n: int = 10
    dataset: str = ""
    seeds: tuple[int, ...] = (0,)
    split_seed: int = 0
    sigmas: tuple[float, ...] = ()
    train_sizes: tuple[str, ...] = ()
    models: tuple[str, ...] = ("constrained_rnn",)
    train: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise UsageError(f"unknown scenario {self.scenario!r}")
        if not self.p:
            self.p = SCENARIOS[self.scenario]
        if any(not 0 <= p <= 1 for p in self.p):
            raise UsageError("edge probabilities must be in [0, 1]")
        if self.samples < 10:
            raise UsageError("sample count must be at least 10")
        if min(self.sizes) < 1 or max(self.sizes) > self.max_exact_n:
            raise UsageError(
                f"sizes must lie in 1..{self.max_exact_n} (raise max_exact_n to override)"
            )

    @classmethod
    def from_text(cls, text: str) -> "ExperimentManifest":
        train_keys = {f.name for f in fields(TrainConfig)}
        kw: dict = {}
        train_kw: dict = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"manifest line {lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            try:
                if key in ("scenario", "dataset"):
                    kw[key] = value
                elif key == "p":
                    kw[key] = parse_floats(value)
                elif key == "sizes":
                    kw[key] = parse_size_range(value)
                elif key in ("samples", "seed", "max_exact_n", "split_seed"):
                    kw[key] = int(value)
                elif key == "budget":
                    kw[key] = int(value) if value else None
                elif key == "seeds":
                    kw[key] = tuple(int(v) for v in value.split(",") if v.strip())
                elif key == "sigmas":
                    kw[key] = parse_floats(value)
                elif key in ("train_sizes", "models"):
                    kw[key] = tuple(v.strip() for v in value.split(",") if v.strip())
                elif key in train_keys:
                    train_kw[key] = value
                else:
                    raise UsageError(f"manifest line {lineno}: unknown key {key!r}")
            except ValueError as exc:
                raise UsageError(f"manifest line {lineno}: {exc}") from None
        kw["train"] = train_kw
        return cls(**kw)

    def plan(self) -> GenerationPlan:
        return GenerationPlan(tuple(self.sizes), tuple(self.p), self.samples, self.seed, self.budget)

    def train_config(self, **overrides) -> TrainConfig:
        text = "".join(f"{k}={v}\n" for k, v in {**self.train, **overrides}.items())
        try:
            return TrainConfig.from_text(text)
        except ValueError as exc:
            raise UsageError(str(exc)) from None


# subcommands --------------------------------------------------------------

def cmd_generate(manifest: ExperimentManifest, out: str, workers: int = 1) -> tuple[LabeledDataset, int]:
    ds, dropped = generate_dataset(manifest.plan(), workers)
    print(f"generated {len(ds)} labelled records, dropped {dropped} (solver budget)",
          file=sys.stderr)
    if len(ds) == 0:
        raise BudgetExhausted(manifest.budget or 0)
    try:
        ds.save(out)
    except OSError as exc:
        raise DataError(f"cannot write {out}: {exc}") from None
    return ds, dropped


def cmd_solve(path: str, method: str = "exact", budget: int | None = None) -> list[list[str]]:
    graphs = read_graph_file(path)
    rows = []
    methods = ("exact", "kellerman") if method == "both" else (method,)
    for gid, g in enumerate(graphs):
        for m in methods:
            if m == "exact":
                try:
                    size, cover = exact_eccn(g, budget)
                except BudgetExhausted:
                    rows.append([str(gid), str(g.n), m, "", "", "unsolved"])
                    continue
            else:
                cover = kellerman_cover(g)
                size = cover.size
            rows.append([str(gid), str(g.n), m, str(size), cover.format(),
                         "valid" if verify_cover(g, cover) else "invalid"])
    return rows


SOLVE_COLUMNS = ("graph_id", "n", "method", "cover_size", "witness", "validity")


def cmd_bounds(args) -> str:
    if args.graph:
        if args.n is None:
            raise UsageError("--graph requires -n")
        report = graph_bound_report(args.n, args.d, args.eps, args.delta, args.diagnostic)
    else:
        if not args.a:
            raise UsageError("give layer widths with -a, or use --graph -n N")
        widths = tuple(int(w) for chunk in args.a for w in str(chunk).split(",") if w)
        if args.b is None:
            raise UsageError("-b (maximum input length) is required with -a")
        report = bound_report(RnnShape(widths, args.b), args.eps, args.delta)
    if args.csv:
        return _csv_text(report.CSV_COLUMNS, [report.csv_row()])
    return report.text() + "\n"


def _check_dataset_shape(params, ds: LabeledDataset) -> None:
    need = ds.n_max * ds.n_max
    if params.kind == "ffn":
        if params.input_dim != need:
            raise DataError(f"checkpoint expects inputs of length {params.input_dim}, "
                            f"dataset has n_max={ds.n_max} ({need})")
    elif params.constrained:
        width = params.width if params.kind == "rnn" else params.widths[0]
        if width != ds.n_max:
            raise DataError(f"size-adaptive checkpoint has width {width}, dataset n_max={ds.n_max}")


def cmd_train(dataset: str, config: TrainConfig, out: str, history: str | None = None):
    ds = load_dataset(dataset)
    tr, va, _ = split_dataset(ds, config.split_seed)
    result = train(build_model(config, ds.n_max), tr, va, config)
    checkpoint.save(out, result.params, {
        "n_max": str(ds.n_max), "model": config.model, "best_epoch": str(result.best_epoch),
    })
    if history:
        atomic_write_text(history, result.history_csv())
    return result


EVAL_COLUMNS = ("model", "test_mse", "test_mse_raw", "n_test")


def cmd_eval(dataset: str, ckpt: str, config: TrainConfig) -> list[list[str]]:
    ds = load_dataset(dataset)
    params, _ = checkpoint.load(ckpt)
    _check_dataset_shape(params, ds)
    tr, _, te = split_dataset(ds, config.split_seed)
    base = majority_vote_baseline(tr.raw_labels, tr.label_scale)
    scale2 = ds.label_scale**2
    rows = []
    for name, value in (
        (params.kind if not params.constrained else f"constrained_{params.kind}", evaluate(params, te)),
        ("majority_vote", evaluate(base, te)),
        ("kellerman", kellerman_mse(te)),
    ):
        rows.append([name, _fmt(value), _fmt(value * scale2), str(len(te))])
    return rows


def run_sweep(manifest: ExperimentManifest, workers: int = 1,
              dataset: LabeledDataset | None = None, log=None) -> list[list[str]]:
    """Training-size and noise sweeps as long-form rows (see ``REPORT_COLUMNS``)."""
    if dataset is None:
        if manifest.dataset:
            dataset = load_dataset(manifest.dataset)
        else:
            dataset, _ = generate_dataset(manifest.plan(), workers)
    tr, va, te = split_dataset(dataset, manifest.split_seed)
    kell = kellerman_mse(te)
    rows: list[list[str]] = []

    def add(model, sweep, value, seed, mse_value=None, error=None):
        status = "ok" if error is None else f"failed: {error}"
        rows.append([manifest.scenario, model, sweep, str(value), str(seed),
                     "" if mse_value is None else _fmt(mse_value), status])
        if log:
            log(rows[-1])

    def cell(model, sweep, value, seed, train_subset, sigma):
        try:
            cfg = manifest.train_config(model=model, seed=seed, noise_sigma=sigma)
            result = train(build_model(cfg, dataset.n_max), train_subset, va, cfg)
            add(model, sweep, value, seed, evaluate(result.params, te))
        except (TrainingDiverged, ValueError, UsageError) as exc:
            add(model, sweep, value, seed, error=str(exc).replace(",", ";"))

    for seed in manifest.seeds:
        order = np.random.default_rng(seed).permutation(len(tr))
        for label in manifest.train_sizes:
            size = len(tr) if label == "all" else int(label)
            if size > len(tr) or size < 1:
                for model in (*manifest.models, "majority_vote", "kellerman"):
                    add(model, "train_size", size, seed,
                        error=f"train size {size} outside 1..{len(tr)}")
                continue
            subset = tr.subset(sorted(order[:size].tolist()))
            for model in manifest.models:
                cell(model, "train_size", size, seed, subset, 0.0)
            base = majority_vote_baseline(subset.raw_labels, subset.label_scale)
            add("majority_vote", "train_size", size, seed, evaluate(base, te))
            add("kellerman", "train_size", size, seed, kell)
        for sigma in manifest.sigmas:
            for model in manifest.models:
                cell(model, "sigma", sigma, seed, tr, sigma)
            base = majority_vote_baseline(tr.raw_labels, tr.label_scale)
            add("majority_vote", "sigma", sigma, seed, evaluate(base, te))
            add("kellerman", "sigma", sigma, seed, kell)
    return rows


# argument parsing ---------------------------------------------------------

def _manifest_from_args(args) -> ExperimentManifest:
    if args.manifest:
        m = ExperimentManifest.from_text(Path(args.manifest).read_text(encoding="utf-8"))
    else:
        m = ExperimentManifest()
    updates = {}
    if getattr(args, "scenario", None):
        updates["scenario"] = args.scenario
        if not args.p:
            updates["p"] = SCENARIOS[args.scenario]
    if getattr(args, "p", None):
        updates["p"] = parse_floats(args.p)
    if getattr(args, "sizes", None):
        updates["sizes"] = parse_size_range(args.sizes)
    if getattr(args, "samples", None) is not None:
        updates["samples"] = args.samples
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "budget", None) is not None:
        updates["budget"] = args.budget
    if getattr(args, "max_exact_n", None) is not None:
        updates["max_exact_n"] = args.max_exact_n
    if updates:
        m = ExperimentManifest(**{**m.__dict__, **updates})
    return m


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eccnbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", default=None)

    g = sub.add_parser("generate", help="generate an exactly labelled ER dataset")
    common(g)
    g.add_argument("--manifest")
    g.add_argument("--scenario", choices=sorted(SCENARIOS))
    g.add_argument("--p", help="comma-separated edge probabilities")
    g.add_argument("--sizes", help="vertex counts, e.g. 6-10")
    g.add_argument("--samples", type=int)
    g.add_argument("--budget", type=int, help="exact-solver node budget per graph")
    g.add_argument("--max-exact-n", type=int, dest="max_exact_n")

    s = sub.add_parser("solve", help="solve ECCN for every graph in a file")
    common(s)
    s.add_argument("graphs")
    s.add_argument("--method", choices=("exact", "kellerman", "both"), default="exact")
    s.add_argument("--budget", type=int)

    b = sub.add_parser("bounds", help="sample-complexity bound report")
    common(b)
    b.add_argument("-a", action="append", help="layer width(s); repeat or comma-separate")
    b.add_argument("-b", type=int, help="maximum input length")
    b.add_argument("--graph", action="store_true", help="size-adaptive graph mode")
    b.add_argument("-n", type=int, help="maximum graph size (graph mode)")
    b.add_argument("-d", type=int, default=1, help="recurrent layers (graph mode)")
    b.add_argument("--eps", type=float, default=0.1)
    b.add_argument("--delta", type=float, default=0.1)
    b.add_argument("--csv", action="store_true")
    b.add_argument("--diagnostic", action="store_true",
                   help="also report the n^2+3n+3 prefactor variant for d=1")

    t = sub.add_parser("train", help="train a model on a dataset")
    common(t)
    t.add_argument("--dataset", required=True)
    t.add_argument("--config")
    t.add_argument("--history")

    e = sub.add_parser("eval", help="evaluate a checkpoint against the baselines")
    common(e)
    e.add_argument("--dataset", required=True)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--config")

    r = sub.add_parser("report", help="training-size / noise sweeps as long-form CSV")
    common(r)
    r.add_argument("--manifest", required=True)
    return parser


def _config(args) -> TrainConfig:
    cfg = TrainConfig.load(args.config) if getattr(args, "config", None) else TrainConfig()
    if args.seed is not None:
        cfg = TrainConfig(**{**cfg.__dict__, "seed": args.seed})
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            if not args.out:
                raise UsageError("generate requires --out")
            cmd_generate(_manifest_from_args(args), args.out, args.workers)
        elif args.command == "solve":
            rows = cmd_solve(args.graphs, args.method, args.budget)
            _emit(_csv_text(SOLVE_COLUMNS, rows), args.out)
            exact = [r for r in rows if r[2] == "exact"]
            if exact and all(r[5] == "unsolved" for r in exact):
                print("eccnbench: exact solver budget exhausted on every graph", file=sys.stderr)
                return EXIT_BUDGET
        elif args.command == "bounds":
            _emit(cmd_bounds(args), args.out)
        elif args.command == "train":
            if not args.out:
                raise UsageError("train requires --out for the checkpoint")
            result = cmd_train(args.dataset, _config(args), args.out, args.history)
            print(f"best epoch {result.best_epoch}, validation mse {result.best_val_mse!r}",
                  file=sys.stderr)
        elif args.command == "eval":
            rows = cmd_eval(args.dataset, args.checkpoint, _config(args))
            _emit(_csv_text(EVAL_COLUMNS, rows), args.out)
        elif args.command == "report":
            manifest = ExperimentManifest.from_text(Path(args.manifest).read_text(encoding="utf-8"))
            rows = run_sweep(manifest, args.workers)
            _emit(_csv_text(REPORT_COLUMNS, rows), args.out)
    except UsageError as exc:
        print(f"eccnbench: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExhausted as exc:
        print(f"eccnbench: no record solvable: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (GraphParseError, DataError, checkpoint.CheckpointError, FileNotFoundError,
            TrainingDiverged, OSError) as exc:
        print(f"eccnbench: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"eccnbench: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
