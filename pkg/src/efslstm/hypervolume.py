"""Exact hypervolume by dimension sweep, plus a monotone archive tracker."""
from __future__ import annotations

import numpy as np

from . import kernels


def hypervolume(front, reference) -> float:
    """Lebesgue measure of the union of boxes [p, reference] (minimisation).

    Points that do not strictly dominate the reference are ignored; an empty
    effective front has hypervolume 0.
    """
    ref = np.asarray(reference, dtype=np.float64).ravel()
    P = np.asarray(front, dtype=np.float64)
    if P.size == 0:
        return 0.0
    P = P.reshape(-1, ref.shape[0])
    P = P[np.all(P < ref, axis=1)]
    if P.shape[0] == 0:
        return 0.0
    return float(kernels.hv_sweep(np.ascontiguousarray(P), ref))


class HypervolumeArchive:
    """Unbounded archive of nondominated objective vectors with running hypervolume.

    Each accepted point adds its exact exclusive contribution, so the tracked
    value never decreases.
    """

    def __init__(self, reference):
        self.reference = np.asarray(reference, dtype=np.float64).ravel()
        self.points = np.empty((0, self.reference.shape[0]))
        self.value = 0.0

    def __len__(self) -> int:
        return self.points.shape[0]

    def add(self, point) -> float:
        p = np.asarray(point, dtype=np.float64).ravel()
        ref = self.reference
        if not np.all(p < ref):
            return 0.0
        A = self.points
        if A.shape[0] and np.any(np.all(A <= p, axis=1)):
            return 0.0
        own = float(np.prod(ref - p))
        overlap = hypervolume(np.maximum(A, p), ref) if A.shape[0] else 0.0
        gain = max(own - overlap, 0.0)
        self.value += gain
        self.points = np.vstack([A[~np.all(p <= A, axis=1)], p])
        return gain

    def update(self, points) -> float:
        for p in np.atleast_2d(np.asarray(points, dtype=np.float64)):
            self.add(p)
        return self.value
