"""The numba kernels and the numpy fallback must agree."""
import numpy as np
import pytest

from efslstm import kernels
from efslstm.lstm import convert, weight_count

pytestmark = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


def _net(seed, q=4, u=3):
    rng = np.random.default_rng(seed)
    p = convert(rng.normal(size=weight_count(q, u)), q, u)
    mask = rng.random(q) < 0.7
    return rng, p.stacked(), mask


@pytest.mark.parametrize("seed", range(5))
def test_lstm_sequence(seed):
    rng, st, mask = _net(seed)
    X = rng.normal(size=(30, 4))
    h0, c0 = rng.normal(size=3), rng.normal(size=3)
    a = kernels.lstm_sequence_numpy(*st, mask, X, h0, c0)
    b = kernels.lstm_sequence_numba(*st, mask, X, h0, c0)
    for x, y in zip(a[:3], b[:3]):
        np.testing.assert_allclose(x, y, rtol=0, atol=1e-13)
    assert a[3] == b[3] == -1


def test_step_batch_and_partition_sse():
    rng, st, mask = _net(11)
    X = rng.normal(size=(9, 4))
    H, C = rng.normal(size=(9, 3)), rng.normal(size=(9, 3))
    a = kernels.lstm_step_batch_numpy(*st, mask, X, H, C)
    b = kernels.lstm_step_batch_numba(*st, mask, X, H, C)
    for x, y in zip(a[:3], b[:3]):
        np.testing.assert_allclose(x, y, rtol=0, atol=1e-13)
    y = rng.random(9)
    starts = np.array([0, 3, 9], dtype=np.int64)
    sa, _ = kernels.lstm_partition_sse_numpy(*st, mask, X, y, starts)
    sb, _ = kernels.lstm_partition_sse_numba(*st, mask, X, y, starts)
    np.testing.assert_allclose(sa, sb, rtol=1e-13, atol=0)


def test_nonfinite_index_agrees():
    rng, st, mask = _net(1, q=2, u=1)
    mask[:] = True
    X = rng.normal(size=(6, 2))
    X[4, 0] = np.nan
    z = np.zeros(1)
    assert kernels.lstm_sequence_numpy(*st, mask, X, z, z)[3] == 4
    assert kernels.lstm_sequence_numba(*st, mask, X, z, z)[3] == 4


def test_domination_matrix():
    F = np.random.default_rng(0).integers(0, 3, size=(25, 3)).astype(float)
    np.testing.assert_array_equal(kernels.domination_matrix_numpy(F), kernels.domination_matrix_numba(F))


def test_best_split():
    rng = np.random.default_rng(2)
    X = rng.random((60, 4))
    X[:, 2] = np.round(X[:, 2], 1)
    y = X[:, 2] * 3 + rng.normal(0, 0.1, 60)
    feats = np.arange(4, dtype=np.int64)
    a = kernels.best_split_numpy(X, y, feats, 5)
    b = kernels.best_split_numba(X, y, feats, 5)
    assert a[0] == b[0] == 2
    assert a[1] == pytest.approx(b[1], abs=1e-15)
    assert a[2] == pytest.approx(b[2], rel=1e-12)


def test_hv_sweep():
    P = np.random.default_rng(3).random((40, 5))
    ref = np.ones(5)
    assert kernels.hv_sweep_numpy(P, ref) == pytest.approx(kernels.hv_sweep_numba(P, ref), rel=1e-12)


def test_backend_name():
    assert kernels.backend() in ("numba", "numpy")


def test_numpy_fallback_selected_by_environment():
    import os
    import subprocess
    import sys

    code = ("from efslstm import kernels, lstm; import numpy as np; "
            "p = lstm.convert(np.full(lstm.weight_count(2, 1), 0.1), 2, 1); "
            "print(kernels.backend(), lstm.forward_pass(p, [True, True], [[1.0, 2.0]])[0])")
    env = dict(os.environ, EFSLSTM_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, value = out.stdout.split()
    assert backend == "numpy"
    p = convert(np.full(weight_count(2, 1), 0.1), 2, 1)
    from efslstm.lstm import forward_pass

    assert float(value) == pytest.approx(forward_pass(p, [True, True], [[1.0, 2.0]])[0], abs=1e-15)
