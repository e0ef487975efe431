"""Genome decoding and the masked LSTM forward pass used as the MOEA objective."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import kernels
from .errors import DimensionError, NumericError, UsageError

if TYPE_CHECKING:
    from .data import WindowedDataset

# Extraction order of the 18 parameter blocks inside a flat weight vector.
PARAM_ORDER = (
    "wxi", "wxf", "wxl", "wxo",
    "bxi", "bxf", "bxl", "bxo",
    "whi", "whf", "whl", "who",
    "bhi", "bhf", "bhl", "bho",
    "wo", "bo",
)


def weight_count(q: int, u: int) -> int:
    """Length of the flat weight vector for q inputs and u hidden units."""
    if q < 1 or u < 1:
        raise UsageError(f"q and u must be positive, got q={q}, u={u}")
    return 4 * (q * u + u * u + 2 * u) + u + 1


def block_shapes(q: int, u: int) -> list[tuple[str, tuple[int, ...]]]:
    shapes: list[tuple[str, tuple[int, ...]]] = []
    shapes += [(name, (u, q)) for name in PARAM_ORDER[0:4]]
    shapes += [(name, (u,)) for name in PARAM_ORDER[4:8]]
    shapes += [(name, (u, u)) for name in PARAM_ORDER[8:12]]
    shapes += [(name, (u,)) for name in PARAM_ORDER[12:16]]
    shapes += [("wo", (u,)), ("bo", ())]
    return shapes


@dataclass(frozen=True)
class Genome:
    """One MOEA individual: feature mask plus flat LSTM weight vector."""

    mask: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool).ravel()
        weights = np.array(self.weights, dtype=np.float64).ravel()
        mask.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "weights", weights)

    @property
    def q(self) -> int:
        return self.mask.shape[0]

    @property
    def z(self) -> int:
        return self.weights.shape[0]

    def hidden_units(self) -> int:
        """Recover u from (q, z); raises if z is not a valid size for q."""
        q = self.q
        # z = 4u^2 + (4q + 9)u + 1
        a, b, c = 4.0, 4.0 * q + 9.0, 1.0 - self.z
        u = int(round((-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)))
        if u < 1 or weight_count(q, u) != self.z:
            raise DimensionError(f"weight vector of length {self.z} fits no hidden size for q={q}")
        return u

    def params(self, u: int | None = None) -> "LstmParams":
        return convert(self.weights, self.q, self.hidden_units() if u is None else u)

    def __eq__(self, other):
        if not isinstance(other, Genome):
            return NotImplemented
        return np.array_equal(self.mask, other.mask) and np.array_equal(self.weights, other.weights)

    __hash__ = None


@dataclass(frozen=True)
class LstmParams:
    wxi: np.ndarray
    wxf: np.ndarray
    wxl: np.ndarray
    wxo: np.ndarray
    bxi: np.ndarray
    bxf: np.ndarray
    bxl: np.ndarray
    bxo: np.ndarray
    whi: np.ndarray
    whf: np.ndarray
    whl: np.ndarray
    who: np.ndarray
    bhi: np.ndarray
    bhf: np.ndarray
    bhl: np.ndarray
    bho: np.ndarray
    wo: np.ndarray
    bo: float
    _stacked: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        stacked = (
            np.ascontiguousarray(np.stack([self.wxi, self.wxf, self.wxl, self.wxo]), dtype=np.float64),
            np.ascontiguousarray(np.stack([self.bxi, self.bxf, self.bxl, self.bxo]), dtype=np.float64),
            np.ascontiguousarray(np.stack([self.whi, self.whf, self.whl, self.who]), dtype=np.float64),
            np.ascontiguousarray(np.stack([self.bhi, self.bhf, self.bhl, self.bho]), dtype=np.float64),
            np.ascontiguousarray(self.wo, dtype=np.float64),
            float(self.bo),
        )
        object.__setattr__(self, "_stacked", stacked)

    @property
    def q(self) -> int:
        return self.wxi.shape[1]

    @property
    def u(self) -> int:
        return self.wxi.shape[0]

    def stacked(self) -> tuple:
        """(Wx, bx, Wh, bh, wo, bo) in the kernel layout."""
        return self._stacked


def convert(weights: Sequence[float], q: int, u: int) -> LstmParams:
    """Slice a flat weight vector into the 18 LSTM blocks, row-major."""
    w = np.asarray(weights, dtype=np.float64).ravel()
    z = weight_count(q, u)
    if w.shape[0] != z:
        raise DimensionError(f"expected z={z} weights for q={q}, u={u}, got {w.shape[0]}")
    blocks = {}
    pos = 0
    for name, shape in block_shapes(q, u):
        size = int(np.prod(shape, dtype=np.int64))
        chunk = w[pos:pos + size]
        blocks[name] = float(chunk[0]) if shape == () else chunk.reshape(shape).copy()
        pos += size
    return LstmParams(**blocks)


def kernel_layout(weights: np.ndarray, q: int, u: int) -> tuple:
    """(Wx, bx, Wh, bh, wo, bo) as views of the flat vector, skipping LstmParams.

    Gate blocks are stored consecutively in (i, f, l, o) order, so each group
    of four is one reshape.
    """
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if w.shape[0] != weight_count(q, u):
        raise DimensionError(f"expected z={weight_count(q, u)} weights for q={q}, u={u}, got {w.shape[0]}")
    a = 4 * q * u
    b = a + 4 * u
    c = b + 4 * u * u
    d = c + 4 * u
    return (
        w[:a].reshape(4, u, q),
        w[a:b].reshape(4, u),
        w[b:c].reshape(4, u, u),
        w[c:d].reshape(4, u),
        w[d:d + u],
        float(w[d + u]),
    )


def flatten(params: LstmParams) -> np.ndarray:
    """Inverse of :func:`convert`."""
    parts = [np.atleast_1d(np.asarray(getattr(params, name), dtype=np.float64)).ravel()
             for name in PARAM_ORDER]
    return np.concatenate(parts)


def _check_inputs(params: LstmParams, mask, inputs) -> tuple[np.ndarray, np.ndarray]:
    mask = np.asarray(mask, dtype=bool).ravel()
    X = np.ascontiguousarray(inputs, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"inputs must be 2-D, got shape {X.shape}")
    if X.shape[1] != params.q or mask.shape[0] != params.q:
        raise DimensionError(
            f"network expects q={params.q} inputs; got {X.shape[1]} columns and mask of {mask.shape[0]}"
        )
    return mask, X


def run_sequence(params: LstmParams, mask, inputs, h0=None, c0=None):
    """Forward pass that also returns the hidden and cell state after each row."""
    mask, X = _check_inputs(params, mask, inputs)
    u = params.u
    h0 = np.zeros(u) if h0 is None else np.asarray(h0, dtype=np.float64)
    c0 = np.zeros(u) if c0 is None else np.asarray(c0, dtype=np.float64)
    y, H, C, bad = kernels.lstm_sequence(*params.stacked(), mask, X, h0, c0)
    if bad >= 0:
        raise NumericError(f"non-finite LSTM state at sample {bad}", bad)
    return y, H, C


def forward_pass(params: LstmParams, mask, inputs) -> np.ndarray:
    """Model output for every row of ``inputs``; state starts at zero and carries across rows."""
    return run_sequence(params, mask, inputs)[0]


def step_batch(params: LstmParams, mask, inputs, H, C):
    """One step for N independent (h, c) states; returns (y, H', C')."""
    mask, X = _check_inputs(params, mask, inputs)
    H = np.ascontiguousarray(H, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    y, H2, C2, bad = kernels.lstm_step_batch(*params.stacked(), mask, X, H, C)
    if bad >= 0:
        raise NumericError(f"non-finite LSTM state at sample {bad}", bad)
    return y, H2, C2


def evaluate_objective(genome: Genome, partition: "WindowedDataset", u: int | None = None) -> float:
    """RMSE of the genome's network on one partition."""
    if partition.n_rows == 0:
        raise UsageError("cannot evaluate on an empty partition")
    params = genome.params(u)
    mask, X = _check_inputs(params, genome.mask, partition.rows)
    target = np.ascontiguousarray(partition.targets, dtype=np.float64)
    starts = np.array([0, X.shape[0]], dtype=np.int64)
    sse, bad = kernels.lstm_partition_sse(*params.stacked(), mask, X, target, starts)
    if bad >= 0:
        raise NumericError(f"non-finite LSTM state at sample {bad}", int(bad))
    return float(np.sqrt(sse[0] / X.shape[0]))


class PartitionBundle:
    """Partitions packed into contiguous arrays for the fused objective kernel."""

    def __init__(self, partitions: Sequence["WindowedDataset"]):
        if len(partitions) < 2:
            raise UsageError(f"need at least 2 partitions, got {len(partitions)}")
        for k, p in enumerate(partitions):
            if p.n_rows == 0:
                raise UsageError(f"partition {k} is empty")
        qs = {p.rows.shape[1] for p in partitions}
        if len(qs) != 1:
            raise DimensionError(f"partitions disagree on feature count: {sorted(qs)}")
        self.q = qs.pop()
        self.X = np.ascontiguousarray(np.vstack([p.rows for p in partitions]), dtype=np.float64)
        self.y = np.ascontiguousarray(np.concatenate([p.targets for p in partitions]), dtype=np.float64)
        sizes = [p.n_rows for p in partitions]
        self.starts = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        self.sizes = np.asarray(sizes, dtype=np.float64)

    @property
    def n(self) -> int:
        return self.sizes.shape[0]

    def evaluate(self, genome: Genome, u: int | None = None) -> np.ndarray:
        if genome.q != self.q:
            raise DimensionError(f"genome has q={genome.q}, partitions have q={self.q}")
        u = genome.hidden_units() if u is None else u
        sse, bad = kernels.lstm_partition_sse(
            *kernel_layout(genome.weights, self.q, u), genome.mask, self.X, self.y, self.starts
        )
        if bad >= 0:
            raise NumericError(f"non-finite LSTM state at sample {bad}", int(bad))
        return np.sqrt(sse / self.sizes)


def evaluate_all(genome: Genome, partitions, u: int | None = None) -> np.ndarray:
    """Objective vector: one RMSE per partition, state reset between partitions."""
    bundle = partitions if isinstance(partitions, PartitionBundle) else PartitionBundle(partitions)
    return bundle.evaluate(genome, u)
