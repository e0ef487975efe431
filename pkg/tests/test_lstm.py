import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from efslstm.data import WindowedDataset
from efslstm.errors import DimensionError, NumericError, UsageError
from efslstm.lstm import (
    Genome,
    PARAM_ORDER,
    convert,
    evaluate_all,
    evaluate_objective,
    flatten,
    forward_pass,
    kernel_layout,
    run_sequence,
    step_batch,
    weight_count,
)


def _dataset(X, y):
    X = np.asarray(X, dtype=float)
    return WindowedDataset([f"f{j}" for j in range(X.shape[1])], X, y)


def test_weight_count_examples():
    assert weight_count(2, 1) == 22
    assert weight_count(1, 1) == 18
    assert weight_count(36, 2) == 323


@given(st.integers(1, 40), st.integers(1, 8))
def test_weight_count_matches_cell_sum(q, u):
    assert weight_count(q, u) == oracles.z_by_cells(q, u)


def test_convert_layout_q2_u1():
    p = convert(np.arange(22.0), 2, 1)
    np.testing.assert_array_equal(p.wxi, [[0, 1]])
    np.testing.assert_array_equal(p.wxf, [[2, 3]])
    np.testing.assert_array_equal(p.wxo, [[6, 7]])
    np.testing.assert_array_equal(p.bxi, [8])
    np.testing.assert_array_equal(p.bho, [19])
    np.testing.assert_array_equal(p.wo, [20])
    assert p.bo == 21.0


def test_convert_matches_oracle_slicing():
    q, u = 3, 2
    w = np.random.default_rng(0).normal(size=weight_count(q, u))
    p = convert(w, q, u)
    ref = oracles.split_weights(w, q, u)
    for name in PARAM_ORDER:
        np.testing.assert_array_equal(np.asarray(getattr(p, name)), np.asarray(ref[name]))


def test_convert_rejects_wrong_length():
    with pytest.raises(DimensionError, match="z=18"):
        convert(np.arange(1.0, 15.0), 1, 1)


@settings(max_examples=50)
@given(st.integers(1, 10), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_flatten_inverts_convert(q, u, seed):
    w = np.random.default_rng(seed).normal(size=weight_count(q, u))
    np.testing.assert_array_equal(flatten(convert(w, q, u)), w)


def test_kernel_layout_matches_stacked_params():
    q, u = 4, 3
    w = np.random.default_rng(5).normal(size=weight_count(q, u))
    fast = kernel_layout(w, q, u)
    slow = convert(w, q, u).stacked()
    for a, b in zip(fast, slow):
        np.testing.assert_array_equal(a, b)


def test_genome_recovers_hidden_units():
    for q, u in [(1, 1), (5, 2), (36, 2), (7, 4)]:
        g = Genome(np.ones(q, bool), np.zeros(weight_count(q, u)))
        assert g.hidden_units() == u
    with pytest.raises(DimensionError):
        Genome(np.ones(3, bool), np.zeros(10)).hidden_units()


def test_genome_is_immutable():
    g = Genome([1, 0], np.zeros(weight_count(2, 1)))
    with pytest.raises(ValueError):
        g.weights[0] = 1.0
    with pytest.raises(ValueError):
        g.mask[0] = False


def test_zero_network_outputs_zero():
    p = convert(np.zeros(weight_count(3, 2)), 3, 2)
    y = forward_pass(p, [True] * 3, np.random.default_rng(0).normal(size=(7, 3)))
    np.testing.assert_array_equal(y, np.zeros(7))


def test_bias_only_output():
    w = np.zeros(weight_count(3, 2))
    w[-1] = 0.5
    y = forward_pass(convert(w, 3, 2), [True] * 3, np.ones((5, 3)))
    np.testing.assert_array_equal(y, np.full(5, 0.5))


def test_all_false_mask_equals_zero_event_weights():
    q, u = 3, 2
    rng = np.random.default_rng(3)
    w = rng.normal(size=weight_count(q, u))
    X = rng.normal(size=(12, q))
    masked = forward_pass(convert(w, q, u), [False] * q, X)
    w0 = w.copy()
    w0[: 4 * q * u] = 0.0
    unmasked = forward_pass(convert(w0, q, u), [True] * q, X)
    np.testing.assert_array_equal(masked, unmasked)


def test_single_cell_example_frozen():
    # values produced by the loop oracle before the engine existed
    w = np.array([0.1] * 16 + [1.0, 0.0])
    y = forward_pass(convert(w, 1, 1), [True], [[1.0], [-1.0]])
    np.testing.assert_allclose(y, [0.09524118849708932, 0.0763359171694736], rtol=0, atol=1e-12)
    ref = oracles.lstm_reference(w, 1, 1, [True], [[1.0], [-1.0]])
    np.testing.assert_allclose(y, ref, rtol=0, atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_forward_matches_oracle(seed):
    r = random.Random(seed)
    q, u = r.randint(1, 6), r.randint(1, 3)
    w = [r.uniform(-3, 3) for _ in range(weight_count(q, u))]
    mask = [r.random() < 0.6 for _ in range(q)]
    X = oracles.random_matrix(r, 20, q)
    y = forward_pass(convert(w, q, u), mask, X)
    np.testing.assert_allclose(y, oracles.lstm_reference(w, q, u, mask, X), rtol=0, atol=1e-12)


def test_run_sequence_states_continue_the_sequence():
    q, u = 2, 2
    rng = np.random.default_rng(9)
    p = convert(rng.normal(size=weight_count(q, u)), q, u)
    X = rng.normal(size=(10, q))
    y, H, C = run_sequence(p, [True, True], X)
    y2, _, _ = run_sequence(p, [True, True], X[6:], H[5], C[5])
    np.testing.assert_allclose(y2, y[6:], rtol=0, atol=1e-14)


def test_step_batch_matches_sequence():
    q, u = 3, 2
    rng = np.random.default_rng(2)
    p = convert(rng.normal(size=weight_count(q, u)), q, u)
    X = rng.normal(size=(8, q))
    y, H, C = run_sequence(p, [True] * 3, X)
    ys, Hs, Cs = step_batch(p, [True] * 3, X[1:], H[:-1], C[:-1])
    np.testing.assert_allclose(ys, y[1:], rtol=0, atol=1e-14)
    np.testing.assert_allclose(Hs, H[1:], rtol=0, atol=1e-14)


def test_wrong_input_width_is_a_dimension_error():
    p = convert(np.zeros(weight_count(3, 1)), 3, 1)
    with pytest.raises(DimensionError):
        forward_pass(p, [True] * 3, np.zeros((4, 2)))


def test_nonfinite_input_reports_sample_index():
    p = convert(np.full(weight_count(1, 1), 0.1), 1, 1)
    X = np.array([[0.1], [0.2], [np.nan], [0.3]])
    with pytest.raises(NumericError) as info:
        forward_pass(p, [True], X)
    assert info.value.sample_index == 2


def test_objective_rmse_examples():
    g = Genome([True], np.zeros(weight_count(1, 1)))
    ds = _dataset([[0.0], [0.0]], [3.0, 4.0])
    assert evaluate_objective(g, ds) == pytest.approx(3.5355339059327378, abs=1e-15)
    assert evaluate_objective(g, _dataset([[1.0]], [0.0])) == 0.0


def test_objective_matches_oracle_rmse():
    r = random.Random(4)
    q, u = 4, 2
    w = [r.uniform(-2, 2) for _ in range(weight_count(q, u))]
    mask = [True, False, True, True]
    X = oracles.random_matrix(r, 10, q)
    y = [r.random() for _ in range(10)]
    ref = oracles.rmse_reference(oracles.lstm_reference(w, q, u, mask, X), y)
    assert evaluate_objective(Genome(mask, w), _dataset(X, y)) == pytest.approx(ref, abs=1e-12)


def test_objective_rejects_empty_partition():
    g = Genome([True], np.zeros(weight_count(1, 1)))
    with pytest.raises(UsageError):
        evaluate_objective(g, _dataset(np.zeros((0, 1)), []))


def test_evaluate_all_examples():
    q = 2
    zero = Genome([True, True], np.zeros(weight_count(q, 2)))
    part = _dataset(np.random.default_rng(0).random((6, q)), np.full(6, 0.5))
    np.testing.assert_array_equal(evaluate_all(zero, [part, part]), [0.5, 0.5])

    rng = np.random.default_rng(8)
    g = Genome(rng.random(q) < 0.5, rng.normal(size=weight_count(q, 2)))
    parts = [_dataset(rng.random((7 + k, q)), rng.random(7 + k)) for k in range(5)]
    obj = evaluate_all(g, parts)
    assert obj[0] == obj[0]
    np.testing.assert_array_equal(obj, [evaluate_objective(g, p) for p in parts])
    same = evaluate_all(g, [parts[1], parts[1]])
    assert same[0] == same[1]
