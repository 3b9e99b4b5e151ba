"""Bottleneck-then-cost-optimal assignment of values to curve positions.

Given normalized values y and the template-curve targets z at the grid
positions j/(n-1), the fit picks the permutation that is minimal first in
the maximum |y[i] - z[j]| over its pairs and minimal second in the sum.
It does so in three steps:

1. build the dense matrix of absolute deviations,
2. binary-search the sorted, deduplicated deviation values (the threshold
   ladder) for the smallest threshold at which a perfect matching exists,
   deciding each probe with Hopcroft-Karp (O(E * sqrt(V))),
3. solve a minimum-cost perfect matching restricted to edges at or below
   that threshold with an exact assignment solver.

All threshold comparisons are exact float comparisons: thresholds are
drawn from the same float set as the matrix entries, so no epsilon is
needed anywhere. A permutation-enumerating oracle (`brute_force_fit`)
ships alongside for verification on small instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import linear_sum_assignment

from .feature_model import normalize
from .template_curve import TemplateCurve, sample_positions

__all__ = [
    "FitterError",
    "LengthMismatchError",
    "EmptyInputError",
    "InfeasibleThresholdError",
    "BruteForceSizeError",
    "DeviationMatrix",
    "ThresholdLadder",
    "Matching",
    "FitResult",
    "deviation_matrix",
    "threshold_ladder",
    "perfect_matching_exists",
    "find_min_threshold",
    "min_cost_perfect_matching",
    "fit",
    "brute_force_fit",
    "BRUTE_FORCE_MAX",
]

#: largest instance brute_force_fit will enumerate (n! permutations).
BRUTE_FORCE_MAX = 10


class FitterError(ValueError):
    """Base class for fitting problems."""


class LengthMismatchError(FitterError):
    """Values and position targets have different lengths."""


class EmptyInputError(FitterError):
    """No values were given."""


class InfeasibleThresholdError(FitterError):
    """No perfect matching exists within the given threshold."""


class BruteForceSizeError(FitterError):
    """Instance too large to enumerate."""


@dataclass(frozen=True)
class DeviationMatrix:
    """Absolute deviations |y[i] - z[j]| between values and position targets."""

    y: np.ndarray
    z: np.ndarray
    entries: np.ndarray

    @property
    def n(self) -> int:
        return len(self.y)


@dataclass(frozen=True)
class ThresholdLadder:
    """Every distinct deviation value, strictly ascending."""

    thresholds: np.ndarray

    def __len__(self) -> int:
        return len(self.thresholds)

    def __getitem__(self, k: int) -> float:
        return float(self.thresholds[k])


@dataclass(frozen=True)
class Matching:
    """A perfect matching as (value index, position index) pairs."""

    pairs: frozenset[tuple[int, int]]


@dataclass(frozen=True)
class FitResult:
    """A fitted ordering: ordering[j] is the index of the value placed at
    position j, with its per-position deviations and their maximum/sum."""

    ordering: np.ndarray
    d_min: float
    deviations: np.ndarray
    total_cost: float


def deviation_matrix(
    y: np.ndarray | list[float], z: np.ndarray | list[float]
) -> DeviationMatrix:
    """Build the n-by-n deviation matrix from values y and targets z.

    Both vectors must be nonempty, equal length, and lie in [0, 1].
    """
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if y.size == 0 or z.size == 0:
        raise EmptyInputError("values and targets must be nonempty")
    if y.shape != z.shape or y.ndim != 1:
        raise LengthMismatchError(
            f"values and targets must be equal-length vectors, got {y.shape} and {z.shape}"
        )
    for label, vec in (("values", y), ("targets", z)):
        if not np.isfinite(vec).all():
            raise FitterError(f"{label} contain non-finite entries")
        if vec.min() < 0.0 or vec.max() > 1.0:
            raise FitterError(f"{label} must lie in [0, 1]; got range "
                              f"[{vec.min()}, {vec.max()}]")
    entries = np.abs(y[:, None] - z[None, :])
    return DeviationMatrix(y=y, z=z, entries=entries)


def threshold_ladder(matrix: DeviationMatrix) -> ThresholdLadder:
    """All distinct deviation values, sorted ascending."""
    return ThresholdLadder(thresholds=np.unique(matrix.entries))


@njit(cache=True)
def _hopcroft_karp(indptr, indices, n):  # pragma: no cover - compiled
    """Maximum-cardinality matching size on a bipartite graph in CSR form.

    Standard Hopcroft-Karp: BFS builds the layer structure from the free
    left vertices, then an iterative DFS with per-vertex arc cursors
    augments along vertex-disjoint shortest paths. Worst case
    O(E * sqrt(V)).
    """
    inf = np.iinfo(np.int64).max
    pair_u = np.full(n, -1, np.int64)
    pair_v = np.full(n, -1, np.int64)
    dist = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    stack = np.empty(n + 1, np.int64)
    via = np.empty(n + 1, np.int64)
    cursor = np.empty(n, np.int64)
    matched = 0
    while True:
        head = 0
        tail = 0
        for u in range(n):
            if pair_u[u] == -1:
                dist[u] = 0
                queue[tail] = u
                tail += 1
            else:
                dist[u] = inf
        layer_reaches_free = False
        while head < tail:
            u = queue[head]
            head += 1
            for k in range(indptr[u], indptr[u + 1]):
                w = pair_v[indices[k]]
                if w == -1:
                    layer_reaches_free = True
                elif dist[w] == inf:
                    dist[w] = dist[u] + 1
                    queue[tail] = w
                    tail += 1
        if not layer_reaches_free:
            break
        for u in range(n):
            cursor[u] = indptr[u]
        for start in range(n):
            if pair_u[start] != -1:
                continue
            top = 0
            stack[0] = start
            while top >= 0:
                u = stack[top]
                moved = False
                while cursor[u] < indptr[u + 1]:
                    v = indices[cursor[u]]
                    cursor[u] += 1
                    w = pair_v[v]
                    if w == -1:
                        # free right vertex: flip the whole path on the stack
                        via[top] = v
                        for i in range(top, -1, -1):
                            pair_u[stack[i]] = via[i]
                            pair_v[via[i]] = stack[i]
                        matched += 1
                        top = -1
                        moved = True
                        break
                    elif dist[w] == dist[u] + 1:
                        via[top] = v
                        top += 1
                        stack[top] = w
                        moved = True
                        break
                if not moved:
                    dist[u] = inf
                    top -= 1
    return matched


def _edges_csr(entries: np.ndarray, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """CSR adjacency of the bipartite graph with an edge wherever
    entries[i][j] <= threshold (exact comparison)."""
    mask = entries <= threshold
    n = entries.shape[0]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(mask.sum(axis=1), out=indptr[1:])
    indices = np.nonzero(mask)[1].astype(np.int64)
    return indptr, indices


def perfect_matching_exists(matrix: DeviationMatrix, threshold: float) -> bool:
    """Whether a perfect matching exists using only edges at or below the
    threshold. Decided exactly by Hopcroft-Karp."""
    threshold = float(threshold)
    if not np.isfinite(threshold) or threshold < 0.0:
        raise ValueError(f"threshold must be finite and >= 0, got {threshold!r}")
    indptr, indices = _edges_csr(matrix.entries, threshold)
    return _hopcroft_karp(indptr, indices, matrix.n) == matrix.n


def find_min_threshold(matrix: DeviationMatrix) -> float:
    """Smallest deviation value at which a perfect matching exists.

    Binary search over the threshold ladder; the result is always an exact
    element of the ladder. The ladder maximum admits the complete bipartite
    graph, so a feasible entry always exists.
    """
    ladder = threshold_ladder(matrix).thresholds
    a = 0
    b = len(ladder) - 1
    while a != b:
        p = a + (b - a) // 2
        if perfect_matching_exists(matrix, float(ladder[p])):
            b = p
        else:
            a = p + 1
    return float(ladder[a])


def min_cost_perfect_matching(matrix: DeviationMatrix, d_min: float) -> Matching:
    """Minimum-total-deviation perfect matching restricted to edges at or
    below d_min, solved exactly (Jonker-Volgenant class, O(n^3)).

    Raises InfeasibleThresholdError if no perfect matching fits under d_min.
    """
    d_min = float(d_min)
    if not np.isfinite(d_min) or d_min < 0.0:
        raise ValueError(f"threshold must be finite and >= 0, got {d_min!r}")
    costs = np.where(matrix.entries <= d_min, matrix.entries, np.inf)
    try:
        rows, cols = linear_sum_assignment(costs)
    except ValueError as exc:
        raise InfeasibleThresholdError(
            f"no perfect matching exists within threshold {d_min!r}"
        ) from exc
    return Matching(pairs=frozenset(zip(rows.tolist(), cols.tolist())))


def _result_from_ordering(
    ordering: np.ndarray, d_min: float, matrix: DeviationMatrix
) -> FitResult:
    deviations = matrix.entries[ordering, np.arange(matrix.n)]
    return FitResult(
        ordering=ordering,
        d_min=d_min,
        deviations=deviations,
        total_cost=float(deviations.sum()),
    )


def fit(
    values: np.ndarray | list[float],
    curve: TemplateCurve,
    *,
    pre_normalized: bool = False,
) -> FitResult:
    """Order values so they trace the curve: bottleneck-optimal first,
    total-deviation-optimal second.

    Values are min-max normalized unless ``pre_normalized`` is set (a
    testing bypass; the values must then already lie in [0, 1]). A single
    value is placed at the only position without any matching.

    Ties are resolved deterministically, but only (d_min, total_cost) is
    contract-stable; the specific permutation among equally optimal ones
    may change between versions.
    """
    arr = np.asarray(values, dtype=np.float64)
    if pre_normalized:
        if arr.size == 0:
            raise EmptyInputError("values must be nonempty")
        if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
            raise FitterError("pre-normalized values must be finite and lie in [0, 1]")
        y = arr
    else:
        y = normalize(arr)
    z = sample_positions(curve, len(y))
    if len(y) == 1:
        deviation = float(abs(y[0] - z[0]))
        return FitResult(
            ordering=np.array([0], dtype=np.int64),
            d_min=deviation,
            deviations=np.array([deviation]),
            total_cost=deviation,
        )
    matrix = deviation_matrix(y, z)
    d_min = find_min_threshold(matrix)
    matching = min_cost_perfect_matching(matrix, d_min)
    ordering = np.empty(matrix.n, dtype=np.int64)
    for i, j in matching.pairs:
        ordering[j] = i
    return _result_from_ordering(ordering, d_min, matrix)


def brute_force_fit(
    y: np.ndarray | list[float], z: np.ndarray | list[float]
) -> FitResult:
    """Exhaustive oracle: enumerate every permutation and keep the one
    minimizing (max deviation, total deviation), ties broken by the
    lexicographically smallest ordering vector.

    Limited to n <= 10; intended for verifying `fit` on small instances.
    """
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if y.size == 0:
        raise EmptyInputError("values must be nonempty")
    if y.shape != z.shape or y.ndim != 1:
        raise LengthMismatchError(
            f"values and targets must be equal-length vectors, got {y.shape} and {z.shape}"
        )
    n = len(y)
    if n > BRUTE_FORCE_MAX:
        raise BruteForceSizeError(f"brute force is capped at n={BRUTE_FORCE_MAX}, got {n}")
    yl = y.tolist()
    zl = z.tolist()
    best: tuple[float, float, tuple[int, ...]] | None = None
    for perm in itertools.permutations(range(n)):
        deviations = [abs(yl[perm[j]] - zl[j]) for j in range(n)]
        key = (max(deviations), sum(deviations), perm)
        if best is None or key < best:
            best = key
    assert best is not None
    max_dev, _, perm = best
    ordering = np.array(perm, dtype=np.int64)
    matrix_entries = np.abs(y[:, None] - z[None, :])
    deviations = matrix_entries[ordering, np.arange(n)]
    return FitResult(
        ordering=ordering,
        d_min=max_dev,
        deviations=deviations,
        total_cost=float(deviations.sum()),
    )
