import csv
import io

import numpy as np
import pytest

from conftest import die_graph, k5_with_tail
from eccnbench import checkpoint
from eccnbench.cli import REPORT_COLUMNS, main
from eccnbench.data import LabeledDataset, Record, load_dataset, split_dataset
from eccnbench.graphs import encode_record, er_generate
from eccnbench.rnn import init_rnn, zeros_like_params
from eccnbench.solvers import exact_eccn


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


# generate -----------------------------------------------------------------

def test_generate_labels_verified(tmp_path, capsys):
    out = tmp_path / "d.txt"
    code, _, err = run(capsys, "generate", "--sizes", "4-6", "--p", "0.5", "--samples", 100,
                       "--seed", 3, "--out", out)
    assert code == 0 and "dropped 0" in err
    ds = load_dataset(out)
    assert len(ds) == 100 and ds.n_max == 6
    assert out.read_text().startswith("#eccn-dataset v1 n_max=6 ")
    for r in ds.records:
        assert r.eccn == exact_eccn(r.graph)[0]


def test_generate_worker_count_invariant(tmp_path, capsys):
    blobs = []
    for workers in (1, 8):
        out = tmp_path / f"w{workers}.txt"
        code, _, _ = run(capsys, "generate", "--scenario", "mixed", "--sizes", "5-8",
                         "--samples", 200, "--seed", 11, "--workers", workers, "--out", out)
        assert code == 0
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1]


def test_generate_p_zero(tmp_path, capsys):
    out = tmp_path / "z.txt"
    assert run(capsys, "generate", "--p", "0", "--sizes", "3-6", "--samples", 30, "--out", out)[0] == 0
    assert not load_dataset(out).raw_labels.any()


def test_generate_budget_exhausted(tmp_path, capsys):
    out = tmp_path / "b.txt"
    code, _, err = run(capsys, "generate", "--p", "0.9", "--sizes", "9-10", "--samples", 10,
                       "--budget", 1, "--out", out)
    assert code == 3 and "dropped 10" in err
    assert not out.exists()


def test_generate_rejects_intractable_sizes(tmp_path, capsys):
    code, _, err = run(capsys, "generate", "--sizes", "12-14", "--out", tmp_path / "x")
    assert code == 1 and "max_exact_n" in err


# solve --------------------------------------------------------------------

@pytest.fixture
def reference_file(tmp_path):
    path = tmp_path / "reference.txt"
    path.write_text("# left, right\n" + encode_record(k5_with_tail()) + "\n" + encode_record(die_graph()) + "\n")
    return path


def test_solve_reference_graphs(reference_file, capsys):
    code, out, _ = run(capsys, "solve", reference_file)
    assert code == 0
    rows = rows_of(out)
    assert [(r["cover_size"], r["validity"]) for r in rows] == [("3", "valid"), ("5", "valid")]


def test_solve_both_methods(tmp_path, capsys):
    path = tmp_path / "g.txt"
    path.write_text("".join(encode_record(er_generate(8, 0.5, s)) + "\n" for s in range(30)))
    code, out, _ = run(capsys, "solve", path, "--method", "both")
    assert code == 0
    rows = rows_of(out)
    by_id = {}
    for r in rows:
        assert r["validity"] == "valid"
        by_id.setdefault(r["graph_id"], {})[r["method"]] = int(r["cover_size"])
    assert len(by_id) == 30
    assert all(v["kellerman"] >= v["exact"] for v in by_id.values())


def test_solve_parse_error_names_line(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("3\t111\n3\t11\n")
    code, _, err = run(capsys, "solve", path)
    assert code == 2 and "line 2" in err


def test_solve_budget_everywhere(tmp_path, capsys):
    path = tmp_path / "hard.txt"
    path.write_text(encode_record(er_generate(12, 0.5, 1)) + "\n")
    code, out, _ = run(capsys, "solve", path, "--budget", 1)
    assert code == 3 and rows_of(out)[0]["validity"] == "unsolved"


# bounds -------------------------------------------------------------------

def test_bounds_graph_mode(capsys):
    code, out, _ = run(capsys, "bounds", "--graph", "-n", 10, "-d", 1, "--eps", 0.1, "--delta", 0.1)
    assert code == 0 and "(5.82 %)" in out
    code, out, _ = run(capsys, "bounds", "--graph", "-n", 11, "--diagnostic")
    assert code == 0 and "(0.00963 %)" in out and "n^2+3n+3" in out


def test_bounds_shape_mode(capsys):
    code, out, _ = run(capsys, "bounds", "-a", 1, "-b", 1)
    assert code == 0
    lines = dict(line.split(None, 1) for line in out.splitlines() if line.startswith(("W ", "T ")))
    assert "5" == lines["W"].split()[-1] and "13" == lines["T"].split()[-1]
    code, out, _ = run(capsys, "bounds", "-a", "2,2", "-b", 4, "--csv")
    row = rows_of(out)[0]
    assert (row["W"], row["T"], row["d"]) == ("19", "105", "2")


def test_bounds_usage_errors(capsys):
    assert run(capsys, "bounds", "-a", 1, "-b", 1, "--eps", 0)[0] == 1
    assert run(capsys, "bounds", "--graph")[0] == 1
    with pytest.raises(SystemExit) as info:
        main(["bounds", "--eps", "x"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 1


# train / eval -------------------------------------------------------------

def _constant_dataset(path, n_max=4, label=1, count=60):
    records = [Record(er_generate(3 + k % 2, 0.5, k), label) for k in range(count)]
    LabeledDataset(tuple(records), n_max, float(n_max * n_max // 4)).save(path)


def test_train_then_eval_constant(tmp_path, capsys):
    data, cfg = tmp_path / "c.txt", tmp_path / "cfg.txt"
    _constant_dataset(data)
    cfg.write_text("learning_rate=0.01\nbatch_size=16\nmax_epochs=200\npatience=200\n")
    ckpt, hist = tmp_path / "m.ckpt", tmp_path / "h.csv"
    code, _, err = run(capsys, "train", "--dataset", data, "--config", cfg, "--out", ckpt,
                       "--history", hist)
    assert code == 0 and "best epoch" in err
    assert hist.read_text().startswith("epoch,train_mse,val_mse,best_flag\n")
    code, out, _ = run(capsys, "eval", "--dataset", data, "--checkpoint", ckpt, "--config", cfg)
    rows = {r["model"]: r for r in rows_of(out)}
    assert code == 0
    assert float(rows["constrained_rnn"]["test_mse"]) <= 1e-4
    assert float(rows["majority_vote"]["test_mse"]) == 0.0
    assert "kellerman" in rows


def test_eval_zero_checkpoint(tmp_path, capsys):
    data = tmp_path / "d.txt"
    assert run(capsys, "generate", "--sizes", "3-5", "--samples", 50, "--out", data)[0] == 0
    ckpt = tmp_path / "zero.ckpt"
    checkpoint.save(ckpt, zeros_like_params(init_rnn(5, 0)))
    code, out, _ = run(capsys, "eval", "--dataset", data, "--checkpoint", ckpt)
    assert code == 0
    rows = {r["model"]: r for r in rows_of(out)}
    te = split_dataset(load_dataset(data), 0)[2]
    assert float(rows["constrained_rnn"]["test_mse"]) == pytest.approx(np.mean(te.labels**2), abs=1e-15)
    assert int(rows["majority_vote"]["n_test"]) == len(te)


def test_eval_shape_mismatch(tmp_path, capsys):
    data = tmp_path / "d.txt"
    _constant_dataset(data)
    ckpt = tmp_path / "wide.ckpt"
    checkpoint.save(ckpt, init_rnn(6, 0))
    assert run(capsys, "eval", "--dataset", data, "--checkpoint", ckpt)[0] == 2


def test_missing_files(tmp_path, capsys):
    assert run(capsys, "eval", "--dataset", tmp_path / "nope", "--checkpoint", tmp_path / "x")[0] == 2
    assert run(capsys, "train", "--dataset", tmp_path / "nope", "--out", tmp_path / "m")[0] == 2


# report -------------------------------------------------------------------

def test_report_sigma_sweep(tmp_path, capsys):
    manifest = tmp_path / "m.txt"
    manifest.write_text(
        "scenario=mixed\nsizes=4-5\nsamples=80\nseed=2\nsigmas=0,0.05,0.1\n"
        "train_sizes=20,999\nmodels=constrained_rnn\nmax_epochs=3\npatience=3\nlearning_rate=0.01\n"
    )
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}.csv"
        assert run(capsys, "report", "--manifest", manifest, "--out", out)[0] == 0
        outs.append(out.read_text())
    assert outs[0] == outs[1]
    rows = rows_of(outs[0])
    assert tuple(rows[0].keys()) == REPORT_COLUMNS
    for model in ("constrained_rnn", "majority_vote", "kellerman"):
        sig = [r for r in rows if r["model"] == model and r["sweep"] == "sigma"]
        assert [r["sweep_value"] for r in sig] == ["0.0", "0.05", "0.1"]
        assert all(r["status"] == "ok" for r in sig)
    # an impossible sweep point is recorded as failed, not dropped
    failed = [r for r in rows if r["sweep_value"] == "999"]
    assert failed and all(r["status"].startswith("failed") for r in failed)
