import numpy as np
import pytest

from eccnbench import checkpoint
from eccnbench.bounds import param_count_multi, param_count_single
from eccnbench.graphs import Graph, flatten
from eccnbench.rnn import (
    FeedForwardParams,
    MultiLayerRnnParams,
    SingleLayerRnnParams,
    constraint_violations,
    forward_ffn,
    forward_multi,
    forward_single,
    init_ffn,
    init_params,
    init_rnn,
    project_capped_simplex,
    project_constraints,
    project_l1_ball,
    trainable,
    zeros_like_params,
)
from oracles import ffn_loops, project_capped_simplex_brute, project_l1_brute, rnn_loops


def _layers(p):
    m = p.as_multi() if isinstance(p, SingleLayerRnnParams) else p
    return [(l.W, l.U[0], l.b, l.h0) for l in m.layers], m.wo, float(m.bo)


def test_zero_params_output_bo():
    p = zeros_like_params(init_rnn(3, 0))
    p.bo = np.array(0.3)
    assert forward_single(p, np.ones(9)) == pytest.approx(0.3)


def test_single_vertex_extreme():
    # n = 1: input is the single diagonal zero; b = 1/2, wo = 1/2, bo = 1/2 -> 0.75
    p = SingleLayerRnnParams(np.zeros((1, 1)), np.zeros((1, 1)), np.array([0.5]), np.zeros(1),
                             np.array([0.5]), np.array(0.5))
    assert forward_single(p, flatten(Graph.empty(1), 1)) == pytest.approx(0.75)
    p.W[0, 0] = 0.25
    # with a longer input h grows toward the fixed point 2/3 but stays below 1
    assert forward_single(p, np.zeros(25), size_adaptive=False) < 1.0


def test_size_adaptive_rejects_wrong_length():
    with pytest.raises(ValueError):
        forward_single(init_rnn(3, 0), np.zeros(8))


def test_single_equals_one_layer_multi():
    rng = np.random.default_rng(5)
    for seed in range(50):
        p = init_rnn(4, seed)
        x = rng.integers(0, 2, 16)
        assert forward_single(p, x) == forward_multi(p.as_multi(), x)


@pytest.mark.parametrize("widths", [3, (3, 3), (3, 3, 3)])
def test_constrained_outputs_in_unit_interval(widths):
    rng = np.random.default_rng(1)
    for seed in range(2000):
        p = init_rnn(widths, seed)
        a = 3
        X = rng.integers(0, 2, (8, a * a)).astype(float)
        out = p.predict_batch(X)
        assert np.all((out >= 0) & (out <= 1))


def test_check_bounds_flag_passes_on_constrained():
    p = init_rnn((4, 4), 3)
    forward_multi(p, np.ones(16), check_bounds=True)


def test_rnn_matches_loop_oracle():
    rng = np.random.default_rng(2)
    for case in range(100):
        widths = tuple(int(a) for a in rng.integers(1, 5, size=1 + case % 3))
        p = init_rnn(widths, case, constrained=case % 2 == 0)
        x = rng.integers(0, 2, widths[0] ** 2)
        layers, wo, bo = _layers(p)
        assert forward_multi(p, x) == pytest.approx(rnn_loops(layers, wo, bo, x), abs=1e-12)


def test_ffn_matches_loop_oracle():
    rng = np.random.default_rng(3)
    for case in range(100):
        dim = int(rng.integers(1, 17))
        p = init_ffn(dim, case, hidden=(5, 4, 3))
        for b in p.biases:
            b[:] = rng.normal(size=b.shape)
        x = rng.integers(0, 2, dim)
        assert forward_ffn(p, x) == pytest.approx(ffn_loops(p.weights, p.biases, x), abs=1e-12)


def test_ffn_shape_validation():
    with pytest.raises(ValueError):
        FeedForwardParams([np.zeros((2, 3))] * 4, [np.zeros(3)] * 4)


def test_projection_w_column_example():
    assert project_l1_ball(np.array([0.5, 0.0]), 0.25).tolist() == [0.25, 0.0]


def test_projection_idempotent_and_feasible():
    rng = np.random.default_rng(4)
    for seed in range(200):
        p = init_rnn((3, 2), seed, constrained=False)
        p.constrained = True
        q = project_constraints(p)
        assert constraint_violations(q) == []
        r = project_constraints(q)
        for k, v in q.tensors().items():
            assert np.array_equal(v, r.tensors()[k])
    v = rng.normal(size=6) * 0.01
    assert np.array_equal(project_l1_ball(v, 1.0), v)


def test_projection_vs_brute_force():
    rng = np.random.default_rng(6)
    for _ in range(300):
        d = int(rng.integers(1, 7))
        v = rng.normal(size=d)
        r = float(rng.uniform(0.05, 1.0))
        assert np.allclose(project_l1_ball(v, r), project_l1_brute(v, r), atol=1e-8)
        assert np.allclose(project_capped_simplex(v, r), project_capped_simplex_brute(v, r), atol=1e-8)


def test_unconstrained_projection_is_identity():
    p = init_rnn(3, 0, constrained=False)
    assert project_constraints(p.as_multi()) is not None
    q = project_constraints(p)
    assert np.array_equal(q.W, p.W)


def test_init_deterministic():
    a, b = init_rnn((3, 2), 9), init_rnn((3, 2), 9)
    for k, v in a.tensors().items():
        assert np.array_equal(v, b.tensors()[k])
    c = init_rnn((3, 2), 10)
    assert not np.array_equal(a.wo, c.wo)


def test_constrained_inits_feasible():
    for seed in range(1000):
        p = init_rnn(1 + seed % 6, seed)
        assert constraint_violations(p) == []
        assert not p.h0.any()


@pytest.mark.parametrize("a", [1, 16, 256])
def test_init_shapes(a):
    p = init_rnn(a, 0)
    assert p.W.shape == (a, a) and p.U.shape == (1, a) and p.b.shape == (a,)
    assert p.wo.shape == (a,) and np.shape(p.bo) == ()


def test_init_params_dispatch():
    assert isinstance(init_params(4, 0), SingleLayerRnnParams)
    assert isinstance(init_params((4, 4), 0, "unconstrained"), MultiLayerRnnParams)
    assert isinstance(init_params(("ffn", 9), 0), FeedForwardParams)
    with pytest.raises(ValueError):
        init_params(4, 0, "other")


def _trainable_entries(p):
    return sum(v.size for k, v in p.tensors().items() if trainable(k))


def test_param_counts_match_tensors():
    for a in range(1, 17):
        assert _trainable_entries(init_rnn(a, 0)) == param_count_single(a)
    for widths in [(1, 1), (2, 3), (4, 1, 2), (8, 8, 8)]:
        assert _trainable_entries(init_rnn(widths, 0)) == param_count_multi(widths)


@pytest.mark.parametrize("make", [
    lambda: init_rnn(5, 1),
    lambda: init_rnn((3, 4), 2, constrained=False),
    lambda: init_ffn(16, 3),
])
def test_checkpoint_roundtrip(tmp_path, make):
    p = make()
    path = tmp_path / "m.ckpt"
    checkpoint.save(path, p, {"note": "x"})
    q, meta = checkpoint.load(path)
    assert type(q) is type(p) and q.constrained == p.constrained
    assert meta["note"] == "x"
    for k, v in p.tensors().items():
        assert np.array_equal(v, q.tensors()[k]) and v.dtype == q.tensors()[k].dtype


def test_checkpoint_rejects_garbage():
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.loads(b"not a checkpoint")
    blob = checkpoint.dumps(init_rnn(2, 0))
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.loads(blob[:-3])
