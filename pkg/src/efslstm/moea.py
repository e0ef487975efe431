"""NSGA-II over genomes made of a binary feature mask and real LSTM weights.

Mask genes use half uniform crossover and bit-flip mutation, weight genes
use simulated binary crossover and polynomial mutation. Survival is the
usual (P + P) elitist truncation by nondominated rank, then crowding
distance.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import UsageError
from .hypervolume import HypervolumeArchive
from .lstm import Genome, PartitionBundle, weight_count

log = logging.getLogger(__name__)

THREADS_ENV = "EFSLSTM_THREADS"


@dataclass(frozen=True)
class MoeaConfig:
    population_size: int = 50
    generations: int = 100
    crossover_prob: float = 1.0
    mutation_prob: float = 1.0
    n_objectives: int | None = None
    seed: int = 0
    sbx_eta: float = 15.0
    pm_eta: float = 20.0
    real_bounds: tuple[float, float] = (-5.0, 5.0)
    hidden_units: int = 2
    sbx_gene_prob: float = 0.5
    hv_reference: tuple[float, ...] | None = None
    log_interval: int = 100
    threads: int | None = None

    def validate(self, n_partitions: int | None = None) -> None:
        P = self.population_size
        if P < 2 or P % 2:
            raise UsageError(f"population_size must be an even count > 1, got {P}")
        if self.generations < 1:
            raise UsageError(f"generations must be >= 1, got {self.generations}")
        for name in ("crossover_prob", "mutation_prob", "sbx_gene_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise UsageError(f"{name} must lie in [0, 1], got {v}")
        if self.sbx_eta <= 0 or self.pm_eta <= 0:
            raise UsageError("sbx_eta and pm_eta must be positive")
        lo, hi = self.real_bounds
        if not lo < hi:
            raise UsageError(f"real_bounds must satisfy low < high, got {self.real_bounds}")
        if self.hidden_units < 1:
            raise UsageError(f"hidden_units must be positive, got {self.hidden_units}")
        n = self.n_objectives
        if n is not None and n < 2:
            raise UsageError(f"n_objectives must be >= 2, got {n}")
        if n is not None and n_partitions is not None and n != n_partitions:
            raise UsageError(f"n_objectives={n} but {n_partitions} partitions were given")
        if self.hv_reference is not None and n is not None and len(self.hv_reference) != n:
            raise UsageError("hv_reference length must equal the number of objectives")

    def resolved_threads(self) -> int:
        if self.threads is not None:
            return max(1, int(self.threads))
        env = os.environ.get(THREADS_ENV, "").strip()
        return max(1, int(env)) if env else 1


@dataclass
class ParetoFront:
    """Nondominated genomes and their objective vectors."""

    members: list[tuple[Genome, np.ndarray]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def genomes(self) -> list[Genome]:
        return [g for g, _ in self.members]

    @property
    def objectives(self) -> np.ndarray:
        return np.array([f for _, f in self.members])

    def is_valid(self) -> bool:
        F = self.objectives
        return len(self) > 0 and not kernels.domination_matrix_numpy(F).any()

    def to_dict(self) -> dict:
        return {
            "members": [
                {
                    "mask": g.mask.astype(int).tolist(),
                    "weights": g.weights.tolist(),
                    "objectives": np.asarray(f).tolist(),
                }
                for g, f in self.members
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParetoFront":
        return cls([
            (Genome(m["mask"], m["weights"]), np.asarray(m["objectives"], dtype=np.float64))
            for m in d["members"]
        ])


class MoeaResult(NamedTuple):
    front: ParetoFront
    hypervolume: np.ndarray


# ---------------------------------------------------------------------------
# Sorting and diversity
# ---------------------------------------------------------------------------


def _as_matrix(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        F = points.astype(np.float64, copy=False)
    else:
        lengths = {len(p) for p in points}
        if len(lengths) > 1:
            raise UsageError(f"objective vectors have mixed lengths {sorted(lengths)}")
        F = np.asarray(points, dtype=np.float64)
    if F.ndim == 1:
        F = F.reshape(-1, 1) if F.size else F.reshape(0, 0)
    return np.ascontiguousarray(F)


def nondominated_sort(points) -> list[list[int]]:
    """Partition point indices into successive nondominated fronts."""
    F = _as_matrix(points)
    N = F.shape[0]
    if N == 0:
        return []
    D = kernels.domination_matrix(F)
    count = D.sum(axis=0).astype(np.int64)
    assigned = np.zeros(N, dtype=bool)
    fronts = []
    while not assigned.all():
        current = np.flatnonzero((count == 0) & ~assigned)
        fronts.append(current.tolist())
        assigned[current] = True
        count -= D[current].sum(axis=0)
    return fronts


def crowding_distance(front) -> np.ndarray:
    """NSGA-II crowding distance; boundary members of each objective are infinite."""
    F = _as_matrix(front)
    N, n = F.shape
    d = np.zeros(N)
    if N <= 2:
        d[:] = np.inf
        return d
    for m in range(n):
        order = np.argsort(F[:, m], kind="mergesort")
        lo, hi = F[order[0], m], F[order[-1], m]
        if hi == lo:
            continue
        d[order[0]] = d[order[-1]] = np.inf
        d[order[1:-1]] += (F[order[2:], m] - F[order[:-2], m]) / (hi - lo)
    return d


def rank_and_crowding(F: np.ndarray) -> tuple[list[list[int]], np.ndarray, np.ndarray]:
    fronts = nondominated_sort(F)
    rank = np.empty(F.shape[0], dtype=np.int64)
    crowd = np.empty(F.shape[0])
    for r, idx in enumerate(fronts):
        rank[idx] = r
        crowd[idx] = crowding_distance(F[idx])
    return fronts, rank, crowd


def survive(F: np.ndarray, size: int) -> np.ndarray:
    """Indices of the ``size`` survivors by rank, then descending crowding distance."""
    chosen: list[int] = []
    for idx in nondominated_sort(F):
        if len(chosen) + len(idx) <= size:
            chosen.extend(idx)
            if len(chosen) == size:
                break
            continue
        cd = crowding_distance(F[idx])
        order = np.argsort(-cd, kind="mergesort")
        chosen.extend(np.asarray(idx)[order[: size - len(chosen)]].tolist())
        break
    return np.asarray(chosen, dtype=np.int64)


def binary_tournament(rank: np.ndarray, crowd: np.ndarray, rng: np.random.Generator) -> int:
    i, j = rng.integers(rank.shape[0], size=2)
    if rank[i] != rank[j]:
        return int(i if rank[i] < rank[j] else j)
    return int(j if crowd[j] > crowd[i] else i)


# ---------------------------------------------------------------------------
# Variation operators
# ---------------------------------------------------------------------------


def hux(mask_a: np.ndarray, mask_b: np.ndarray, rng: np.random.Generator):
    """Swap exactly floor(d/2) of the d differing bits, chosen at random."""
    a, b = mask_a.copy(), mask_b.copy()
    diff = np.flatnonzero(a != b)
    k = diff.size // 2
    if k:
        swap = rng.permutation(diff)[:k]
        a[swap], b[swap] = mask_b[swap], mask_a[swap]
    return a, b


def sbx_spread(u, eta: float):
    """Spread factor beta of simulated binary crossover for uniform draws u."""
    u = np.asarray(u, dtype=np.float64)
    e = 1.0 / (eta + 1.0)
    with np.errstate(divide="ignore"):
        return np.where(u <= 0.5, (2.0 * u) ** e, (1.0 / (2.0 * (1.0 - u))) ** e)


def sbx(x1, x2, eta: float, bounds, rng: np.random.Generator, gene_prob: float = 0.5):
    """Simulated binary crossover with clipping to ``bounds``.

    Draw order: one per-gene apply draw vector, then one uniform vector.
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    apply = rng.random(x1.shape) < gene_prob
    u = rng.random(x1.shape)
    beta = sbx_spread(u, eta)
    mean = 0.5 * (x1 + x2)
    half = 0.5 * beta * (x2 - x1)
    apply &= np.abs(x1 - x2) > 1e-14
    c1 = np.where(apply, mean - half, x1)
    c2 = np.where(apply, mean + half, x2)
    lo, hi = bounds
    return np.clip(c1, lo, hi), np.clip(c2, lo, hi)


def polynomial_mutation(x, u, eta: float, bounds):
    """Bounded polynomial mutation of every entry of x given uniform draws u."""
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    lo, hi = bounds
    span = hi - lo
    d1 = (x - lo) / span
    d2 = (hi - x) / span
    p = 1.0 / (eta + 1.0)
    left = (2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)) ** p - 1.0
    right = 1.0 - (2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)) ** p
    dq = np.where(u < 0.5, left, right)
    return np.clip(x + dq * span, lo, hi)


def crossover(parent_a: Genome, parent_b: Genome, config: MoeaConfig, rng: np.random.Generator):
    """HUX on masks and SBX on weights, applied together with probability p_c."""
    if parent_a.q != parent_b.q or parent_a.z != parent_b.z:
        raise UsageError("parents have incompatible dimensions")
    if rng.random() >= config.crossover_prob:
        return parent_a, parent_b
    ma, mb = hux(parent_a.mask, parent_b.mask, rng)
    wa, wb = sbx(parent_a.weights, parent_b.weights, config.sbx_eta, config.real_bounds, rng,
                 config.sbx_gene_prob)
    return Genome(ma, wa), Genome(mb, wb)


def mutate(genome: Genome, config: MoeaConfig, rng: np.random.Generator) -> Genome:
    """Bit flips at rate 1/q and polynomial mutation at rate 1/z, gated by p_m."""
    if rng.random() >= config.mutation_prob:
        return genome
    q, z = genome.q, genome.z
    flips = rng.random(q) < 1.0 / q
    mask = genome.mask ^ flips
    hit = rng.random(z) < 1.0 / z
    u = rng.random(z)
    mutated = polynomial_mutation(genome.weights, u, config.pm_eta, config.real_bounds)
    weights = np.where(hit, mutated, genome.weights)
    return Genome(mask, weights)


def random_genome(q: int, z: int, config: MoeaConfig, rng: np.random.Generator) -> Genome:
    lo, hi = config.real_bounds
    return Genome(rng.random(q) < 0.5, rng.uniform(lo, hi, z))


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def _evaluate_batch(evaluate, genomes, threads: int) -> np.ndarray:
    if threads > 1 and len(genomes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.array(list(pool.map(evaluate, genomes)))
    return np.array([evaluate(g) for g in genomes])


def evolve(
    q: int,
    z: int,
    evaluate: Callable[[Genome], np.ndarray],
    config: MoeaConfig,
    n_objectives: int,
    initial: Sequence[Genome] | None = None,
) -> MoeaResult:
    """Run NSGA-II for any genome evaluator returning an objective vector.

    The hypervolume trace holds, after every generation, the hypervolume of
    all nondominated vectors evaluated so far against the reference point.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    P = config.population_size
    threads = config.resolved_threads()
    ref = config.hv_reference or (1.0,) * n_objectives
    archive = HypervolumeArchive(ref)

    pop = list(initial) if initial is not None else [random_genome(q, z, config, rng) for _ in range(P)]
    if len(pop) != P:
        raise UsageError(f"initial population has {len(pop)} members, expected {P}")
    F = _evaluate_batch(evaluate, pop, threads)
    archive.update(F)
    _, rank, crowd = rank_and_crowding(F)
    trace = np.empty(config.generations)

    for gen in range(config.generations):
        offspring: list[Genome] = []
        for _ in range(P // 2):
            a = pop[binary_tournament(rank, crowd, rng)]
            b = pop[binary_tournament(rank, crowd, rng)]
            c1, c2 = crossover(a, b, config, rng)
            offspring.append(mutate(c1, config, rng))
            offspring.append(mutate(c2, config, rng))
        F_off = _evaluate_batch(evaluate, offspring, threads)
        archive.update(F_off)
        pool = pop + offspring
        F_pool = np.vstack([F, F_off])
        keep = survive(F_pool, P)
        pop = [pool[i] for i in keep]
        F = F_pool[keep]
        _, rank, crowd = rank_and_crowding(F)
        trace[gen] = archive.value
        if config.log_interval and (gen + 1) % config.log_interval == 0:
            log.info(
                "generation %d: hypervolume=%.6f best=%s",
                gen + 1, archive.value, np.array2string(F.min(axis=0), precision=5),
            )

    members = []
    for i in np.flatnonzero(rank == 0):
        g = pop[i]
        if any(g == other for other, _ in members):
            continue
        members.append((g, F[i].copy()))
    return MoeaResult(ParetoFront(members), trace)


def run_moea(partitions, config: MoeaConfig) -> MoeaResult:
    """Evolve LSTM genomes whose objectives are the RMSE on each partition."""
    bundle = partitions if isinstance(partitions, PartitionBundle) else PartitionBundle(partitions)
    config.validate(bundle.n)
    u = config.hidden_units
    q = bundle.q
    z = weight_count(q, u)
    return evolve(q, z, lambda g: bundle.evaluate(g, u), config, bundle.n)
