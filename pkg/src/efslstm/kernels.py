"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba implementations are selected at import time unless the
environment variable ``EFSLSTM_DISABLE_NUMBA`` is set to a truthy value
(``1``, ``true``, ``yes``, ``on``) or numba cannot be imported. Both paths
implement identical arithmetic in float64; results agree to rounding.

Gate arrays are stacked in the order (ignore input, forget, learn input,
output), so ``Wx[0]`` is the ignore-input event matrix, ``Wx[1]`` the
forget-gate one, and so on.
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return deco


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


USE_NUMBA = HAVE_NUMBA and not _env_flag("EFSLSTM_DISABLE_NUMBA")

GATE_I, GATE_F, GATE_L, GATE_O = 0, 1, 2, 3


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# LSTM: numpy fallback
# ---------------------------------------------------------------------------


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_sequence_numpy(Wx, bx, Wh, bh, wo, bo, mask, X, h0, c0):
    """Run the masked cell over every row of ``X`` starting from (h0, c0).

    Returns ``(y, H, C, bad)``; ``H[j]``/``C[j]`` are the states after row j
    and ``bad`` is the first row producing a non-finite value (-1 if none).
    """
    l = X.shape[0]
    u = wo.shape[0]
    y = np.zeros(l)
    H = np.zeros((l, u))
    C = np.zeros((l, u))
    Xm = np.where(mask, X, 0.0)
    with np.errstate(over="ignore", invalid="ignore"):
        # (l, 4, u) event contributions, computed once per call
        ev = np.einsum("guq,lq->lgu", Wx, Xm) + bx
        h = h0.astype(np.float64).copy()
        c = c0.astype(np.float64).copy()
        for j in range(l):
            a = (Wh @ h + bh) + ev[j]
            f = _sigmoid(a[GATE_F]) * c
            i = _sigmoid(a[GATE_I]) * np.tanh(a[GATE_L])
            c = f + i
            h = _sigmoid(a[GATE_O]) * np.tanh(c)
            out = wo @ h + bo
            if not (math.isfinite(out) and np.isfinite(c).all()):
                return y, H, C, j
            y[j] = out
            H[j] = h
            C[j] = c
    return y, H, C, -1


def lstm_step_batch_numpy(Wx, bx, Wh, bh, wo, bo, mask, X, H0, C0):
    """Advance N independent cell states by one row each."""
    Xm = np.where(mask, X, 0.0)
    with np.errstate(over="ignore", invalid="ignore"):
        a = np.einsum("gvu,nu->ngv", Wh, H0) + bh + (np.einsum("guq,nq->ngu", Wx, Xm) + bx)
        f = _sigmoid(a[:, GATE_F]) * C0
        i = _sigmoid(a[:, GATE_I]) * np.tanh(a[:, GATE_L])
        C = f + i
        H = _sigmoid(a[:, GATE_O]) * np.tanh(C)
        y = H @ wo + bo
    ok = np.isfinite(y) & np.isfinite(C).all(axis=1)
    bad = -1 if ok.all() else int(np.argmin(ok))
    return y, H, C, bad


def lstm_partition_sse_numpy(Wx, bx, Wh, bh, wo, bo, mask, X, target, starts):
    """Sum of squared errors per partition; state resets at each start."""
    n = starts.shape[0] - 1
    sse = np.zeros(n)
    u = wo.shape[0]
    for k in range(n):
        a, b = starts[k], starts[k + 1]
        y, _, _, bad = lstm_sequence_numpy(
            Wx, bx, Wh, bh, wo, bo, mask, X[a:b], np.zeros(u), np.zeros(u)
        )
        if bad >= 0:
            return sse, a + bad
        d = y - target[a:b]
        sse[k] = float(d @ d)
    return sse, -1


# ---------------------------------------------------------------------------
# LSTM: numba
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _sig(x):
    return 1.0 / (1.0 + math.exp(-x))


@njit(cache=True, nogil=True)
def _cell_step(Wx, bx, Wh, bh, wo, bo, mask, x, h, c, a, h_new, c_new):
    u = wo.shape[0]
    q = x.shape[0]
    for g in range(4):
        for r in range(u):
            hid = 0.0
            for k in range(u):
                hid += Wh[g, r, k] * h[k]
            ev = 0.0
            for k in range(q):
                if mask[k]:
                    ev += Wx[g, r, k] * x[k]
            a[g, r] = (hid + bh[g, r]) + (ev + bx[g, r])
    out = 0.0
    for r in range(u):
        f = _sig(a[1, r]) * c[r]
        i = _sig(a[0, r]) * math.tanh(a[2, r])
        c_new[r] = f + i
        h_new[r] = _sig(a[3, r]) * math.tanh(c_new[r])
    for r in range(u):
        out += wo[r] * h_new[r]
    return out + bo


@njit(cache=True, nogil=True)
def _finite_state(out, c):
    if not math.isfinite(out):
        return False
    for r in range(c.shape[0]):
        if not math.isfinite(c[r]):
            return False
    return True


@njit(cache=True, nogil=True)
def lstm_sequence_numba(Wx, bx, Wh, bh, wo, bo, mask, X, h0, c0):
    l = X.shape[0]
    u = wo.shape[0]
    y = np.zeros(l)
    H = np.zeros((l, u))
    C = np.zeros((l, u))
    a = np.empty((4, u))
    h = h0.copy()
    c = c0.copy()
    hn = np.empty(u)
    cn = np.empty(u)
    for j in range(l):
        out = _cell_step(Wx, bx, Wh, bh, wo, bo, mask, X[j], h, c, a, hn, cn)
        if not _finite_state(out, cn):
            return y, H, C, j
        h[:] = hn
        c[:] = cn
        y[j] = out
        H[j] = h
        C[j] = c
    return y, H, C, -1


@njit(cache=True, nogil=True)
def lstm_step_batch_numba(Wx, bx, Wh, bh, wo, bo, mask, X, H0, C0):
    n = X.shape[0]
    u = wo.shape[0]
    y = np.zeros(n)
    H = np.zeros((n, u))
    C = np.zeros((n, u))
    a = np.empty((4, u))
    bad = -1
    for j in range(n):
        out = _cell_step(Wx, bx, Wh, bh, wo, bo, mask, X[j], H0[j], C0[j], a, H[j], C[j])
        y[j] = out
        if bad < 0 and not _finite_state(out, C[j]):
            bad = j
    return y, H, C, bad


@njit(cache=True, nogil=True)
def lstm_partition_sse_numba(Wx, bx, Wh, bh, wo, bo, mask, X, target, starts):
    n = starts.shape[0] - 1
    u = wo.shape[0]
    sse = np.zeros(n)
    a = np.empty((4, u))
    h = np.zeros(u)
    c = np.zeros(u)
    hn = np.empty(u)
    cn = np.empty(u)
    for k in range(n):
        h[:] = 0.0
        c[:] = 0.0
        acc = 0.0
        for j in range(starts[k], starts[k + 1]):
            out = _cell_step(Wx, bx, Wh, bh, wo, bo, mask, X[j], h, c, a, hn, cn)
            if not _finite_state(out, cn):
                return sse, j
            h[:] = hn
            c[:] = cn
            d = out - target[j]
            acc += d * d
        sse[k] = acc
    return sse, -1


# ---------------------------------------------------------------------------
# Pareto dominance
# ---------------------------------------------------------------------------


def domination_matrix_numpy(F):
    """``D[a, b]`` is True when row a Pareto-dominates row b (minimisation)."""
    le = (F[:, None, :] <= F[None, :, :]).all(axis=2)
    lt = (F[:, None, :] < F[None, :, :]).any(axis=2)
    return le & lt


@njit(cache=True, nogil=True)
def domination_matrix_numba(F):
    N, n = F.shape
    D = np.zeros((N, N), dtype=np.bool_)
    for a in range(N):
        for b in range(N):
            if a == b:
                continue
            better = False
            worse = False
            for k in range(n):
                if F[a, k] < F[b, k]:
                    better = True
                elif F[a, k] > F[b, k]:
                    worse = True
                    break
            D[a, b] = better and not worse
    return D


# ---------------------------------------------------------------------------
# Regression tree split search
# ---------------------------------------------------------------------------


def best_split_numpy(X, y, features, min_leaf):
    """Best variance-reducing split over ``features``.

    Returns ``(feature, threshold, gain_score)`` with feature -1 when no
    split leaves at least ``min_leaf`` rows on both sides. The score is
    ``sL**2/nL + sR**2/nR``; maximising it minimises the children's SSE.
    """
    n = y.shape[0]
    best_f, best_t, best_s = -1, 0.0, -np.inf
    if n < 2 * min_leaf:
        return best_f, best_t, best_s
    for f in features:
        order = np.argsort(X[:, f], kind="mergesort")
        xs = X[order, f]
        cs = np.cumsum(y[order])
        total = cs[-1]
        k = np.arange(min_leaf, n - min_leaf + 1)
        valid = xs[k - 1] < xs[k]
        if not valid.any():
            continue
        kv = k[valid]
        sl = cs[kv - 1]
        sr = total - sl
        score = sl * sl / kv + sr * sr / (n - kv)
        j = int(np.argmax(score))
        if score[j] > best_s:
            best_s = float(score[j])
            best_f = int(f)
            lo, hi = xs[kv[j] - 1], xs[kv[j]]
            t = 0.5 * (lo + hi)
            best_t = float(lo if t >= hi else t)
    return best_f, best_t, best_s


@njit(cache=True, nogil=True)
def best_split_numba(X, y, features, min_leaf):
    n = y.shape[0]
    best_f = -1
    best_t = 0.0
    best_s = -np.inf
    if n < 2 * min_leaf:
        return best_f, best_t, best_s
    for f in features:
        order = np.argsort(X[:, f], kind="mergesort")
        xs = X[order, f]
        cs = np.cumsum(y[order])
        total = cs[n - 1]
        loc_s = -np.inf
        loc_k = -1
        for k in range(min_leaf, n - min_leaf + 1):
            if not xs[k - 1] < xs[k]:
                continue
            sl = cs[k - 1]
            sr = total - sl
            s = sl * sl / k + sr * sr / (n - k)
            if s > loc_s:
                loc_s = s
                loc_k = k
        if loc_k >= 0 and loc_s > best_s:
            best_s = loc_s
            best_f = f
            lo = xs[loc_k - 1]
            hi = xs[loc_k]
            t = 0.5 * (lo + hi)
            best_t = lo if t >= hi else t
    return best_f, best_t, best_s


# ---------------------------------------------------------------------------
# Packed forest traversal
# ---------------------------------------------------------------------------


def forest_predict_numpy(roots, feature, threshold, left, right, value, X):
    """Per-tree predictions, shape (n_trees, n_rows)."""
    out = np.empty((roots.shape[0], X.shape[0]))
    rows = np.arange(X.shape[0])
    for t, root in enumerate(roots):
        node = np.full(X.shape[0], root, dtype=np.int64)
        active = feature[node] >= 0
        while active.any():
            nd = node[active]
            go_left = X[rows[active], feature[nd]] <= threshold[nd]
            node[active] = np.where(go_left, left[nd], right[nd])
            active = feature[node] >= 0
        out[t] = value[node]
    return out


@njit(cache=True, nogil=True)
def forest_predict_numba(roots, feature, threshold, left, right, value, X):
    T = roots.shape[0]
    N = X.shape[0]
    out = np.empty((T, N))
    for t in range(T):
        for r in range(N):
            node = roots[t]
            while feature[node] >= 0:
                if X[r, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[t, r] = value[node]
    return out


# ---------------------------------------------------------------------------
# Hypervolume (dimension sweep over the last objective)
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _leq_all(a, b):
    for k in range(a.shape[0]):
        if a[k] > b[k]:
            return False
    return True


@njit(cache=True, nogil=True)
def hv_sweep_numba(P, ref):
    """Exact hypervolume of points that all lie strictly below ``ref``."""
    n, d = P.shape
    if n == 0:
        return 0.0
    if d == 1:
        lo = P[0, 0]
        for i in range(1, n):
            lo = min(lo, P[i, 0])
        return ref[0] - lo
    if d == 2:
        order = np.argsort(P[:, 0], kind="mergesort")
        hv = 0.0
        prev = ref[1]
        i = 0
        while i < n:
            # among equal first coordinates only the lowest second one matters
            x = P[order[i], 0]
            y = P[order[i], 1]
            j = i + 1
            while j < n and P[order[j], 0] == x:
                y = min(y, P[order[j], 1])
                j += 1
            if y < prev:
                hv += (ref[0] - x) * (prev - y)
                prev = y
            i = j
        return hv
    order = np.argsort(P[:, d - 1], kind="mergesort")
    buf = np.empty((n, d - 1))
    cnt = 0
    hv = 0.0
    sub_ref = ref[: d - 1].copy()
    for i in range(n):
        p = P[order[i], : d - 1]
        dominated = False
        for a in range(cnt):
            if _leq_all(buf[a], p):
                dominated = True
                break
        if not dominated:
            k = 0
            for a in range(cnt):
                if not _leq_all(p, buf[a]):
                    buf[k] = buf[a]
                    k += 1
            buf[k] = p
            cnt = k + 1
        z_next = P[order[i + 1], d - 1] if i + 1 < n else ref[d - 1]
        depth = z_next - P[order[i], d - 1]
        if depth > 0:
            hv += hv_sweep_numba(buf[:cnt].copy(), sub_ref) * depth
    return hv


def hv_sweep_numpy(P, ref):
    n, d = P.shape
    if n == 0:
        return 0.0
    if d == 1:
        return float(ref[0] - P[:, 0].min())
    if d == 2:
        order = np.lexsort((P[:, 1], P[:, 0]))
        hv = 0.0
        prev = ref[1]
        for x, y in P[order]:
            if y < prev:
                hv += (ref[0] - x) * (prev - y)
                prev = y
        return hv
    P = P[np.argsort(P[:, -1], kind="mergesort")]
    hv = 0.0
    active = np.empty((0, d - 1))
    for i in range(n):
        p = P[i, :-1]
        if not np.any(np.all(active <= p, axis=1)):
            active = np.vstack([active[~np.all(p <= active, axis=1)], p])
        z_next = P[i + 1, -1] if i + 1 < n else ref[-1]
        depth = z_next - P[i, -1]
        if depth > 0:
            hv += hv_sweep_numpy(active, ref[:-1]) * depth
    return hv


if USE_NUMBA:
    lstm_sequence = lstm_sequence_numba
    lstm_step_batch = lstm_step_batch_numba
    lstm_partition_sse = lstm_partition_sse_numba
    domination_matrix = domination_matrix_numba
    best_split = best_split_numba
    forest_predict = forest_predict_numba
    hv_sweep = hv_sweep_numba
else:
    lstm_sequence = lstm_sequence_numpy
    lstm_step_batch = lstm_step_batch_numpy
    lstm_partition_sse = lstm_partition_sse_numpy
    domination_matrix = domination_matrix_numpy
    best_split = best_split_numpy
    forest_predict = forest_predict_numpy
    hv_sweep = hv_sweep_numpy
