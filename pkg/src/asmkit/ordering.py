"""Assembly-order prediction from an instruction/part similarity matrix.

Instruction features with a patch axis are max-pooled first; the resulting
square similarity matrix is converted into a permutation by exact maximum
assignment with a deterministic lexicographic tie-break.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidArgumentError, ParseError


@dataclass(frozen=True)
class OrderResult:
    """Predicted assembly order plus its permutation-matrix projection."""

    order: tuple[int, ...]
    permutation_matrix: np.ndarray
    total_similarity: float

    def __post_init__(self):
        m = np.asarray(self.permutation_matrix, dtype=np.int64)
        m.flags.writeable = False
        object.__setattr__(self, "permutation_matrix", m)


def maxpool_patches(instr_feats) -> np.ndarray:
    """Reduce (n, k, d) instruction features to (n, d) by elementwise max."""
    arr = np.asarray(instr_feats, dtype=np.float64)
    if arr.ndim != 3:
        raise InvalidArgumentError(f"expected (n, k, d) features, got shape {arr.shape}")
    if arr.shape[1] == 0:
        raise InvalidArgumentError("patch axis is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("features contain non-finite values")
    return arr.max(axis=1)


def _check_similarity(sim) -> np.ndarray:
    arr = np.asarray(sim, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise InvalidArgumentError(f"similarity matrix must be square, got {arr.shape}")
    if np.any(np.isnan(arr)) or not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("similarity matrix contains NaN or infinite entries")
    return arr


def hungarian_match(sim) -> OrderResult:
    """Permutation maximizing the total similarity, ties broken toward the
    lexicographically smallest order.

    The base assignment comes from an exact solver on the negated matrix; the
    tie-break then fixes rows in turn to the smallest column that still
    admits an optimal completion, so equal-similarity inputs resolve
    deterministically (an all-constant matrix yields the identity).
    """
    arr = _check_similarity(sim)
    n = arr.shape[0]
    cost = -arr

    def best(sub_cost: np.ndarray) -> float:
        rows, cols = linear_sum_assignment(sub_cost)
        return float(sub_cost[rows, cols].sum())

    optimum = best(cost)
    order: list[int] = []
    free_cols = list(range(n))
    committed = 0.0
    for row in range(n):
        remaining_rows = np.arange(row + 1, n)
        for idx, col in enumerate(list(free_cols)):
            candidate = committed + cost[row, col]
            rest_cols = free_cols[:idx] + free_cols[idx + 1 :]
            tail = (
                best(cost[np.ix_(remaining_rows, rest_cols)]) if rest_cols else 0.0
            )
            if candidate + tail <= optimum + 1e-9 * (1.0 + abs(optimum)):
                order.append(col)
                free_cols = rest_cols
                committed = candidate
                break
        else:  # pragma: no cover - solver guarantees a feasible column
            raise InvalidArgumentError("assignment search failed to complete")
    matrix = order_to_matrix(order)
    return OrderResult(tuple(order), matrix, float(arr[np.arange(n), order].sum()))


def order_to_matrix(order) -> np.ndarray:
    """Binary matrix with M[i, order[i]] = 1."""
    arr = np.asarray(order, dtype=np.int64)
    n = arr.shape[0]
    if arr.ndim != 1 or sorted(arr.tolist()) != list(range(n)):
        raise InvalidArgumentError(f"not a permutation: {order!r}")
    m = np.zeros((n, n), dtype=np.int64)
    m[np.arange(n), arr] = 1
    return m


def matrix_to_order(matrix) -> tuple[int, ...]:
    """Inverse of order_to_matrix; validates one 1 per row and column."""
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidArgumentError("permutation matrix must be square")
    if not np.array_equal(np.sort(np.unique(m)), np.array([0, 1])) and not np.all(m == 1):
        if not (m.size == 1 and m.flat[0] == 1):
            raise InvalidArgumentError("matrix entries must be 0/1")
    if np.any(m.sum(axis=0) != 1) or np.any(m.sum(axis=1) != 1):
        raise InvalidArgumentError("matrix must have exactly one 1 per row and column")
    return tuple(int(np.argmax(row)) for row in m)


def load_similarity_matrix(path) -> np.ndarray:
    """Read a plain-text matrix: one row per line, whitespace-separated."""
    path = Path(path)
    rows: list[list[float]] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        token = line.split("#", 1)[0].strip()
        if not token:
            continue
        try:
            rows.append([float(x) for x in token.split()])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no matrix rows found")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ParseError(f"{path}: ragged rows (expected width {width})")
    return np.asarray(rows, dtype=np.float64)
