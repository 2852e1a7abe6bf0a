"""Pairwise-comparison weighting (AHP) and weight rebalancing."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .model import QualityModel

SAATY_MIN = 1.0 / 9.0
SAATY_MAX = 9.0
RECIPROCAL_RTOL = 1e-9
POWER_TOL = 1e-10
POWER_MAX_ITER = 1000
CR_WARNING_LEVEL = 0.1
CI_ROUNDOFF = 1e-12

RANDOM_INDEX = {1: 0.0, 2: 0.0, 3: 0.58, 4: 0.90, 5: 1.12, 6: 1.24, 7: 1.32, 8: 1.41, 9: 1.45, 10: 1.49}


class MatrixError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


class WeightMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class ComparisonMatrix:
    node_id: str
    items: tuple[str, ...]
    entries: tuple[tuple[float, ...], ...]

    def as_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=float)


@dataclass(frozen=True)
class WeightVector:
    node_id: str
    weights: Mapping[str, float]


def check_matrix(matrix: ComparisonMatrix) -> None:
    """Raise :class:`MatrixError` unless the matrix is a reciprocal Saaty-scale matrix."""
    n = len(matrix.items)
    if n < 2:
        raise MatrixError(f"{matrix.node_id}: need at least two items to compare")
    if len(set(matrix.items)) != n:
        raise MatrixError(f"{matrix.node_id}: duplicate items")
    if len(matrix.entries) != n or any(len(row) != n for row in matrix.entries):
        raise MatrixError(f"{matrix.node_id}: matrix must be {n}x{n}")
    a = matrix.entries
    for i in range(n):
        if a[i][i] != 1.0:
            raise MatrixError(f"{matrix.node_id}: diagonal entry {i} must be 1")
        for j in range(n):
            x = a[i][j]
            if not math.isfinite(x) or x <= 0:
                raise MatrixError(f"{matrix.node_id}: entry ({i},{j}) must be positive")
            # 1/9 is not exact in binary, so allow the reciprocal tolerance at the bounds
            if x > SAATY_MAX * (1 + RECIPROCAL_RTOL) or x < SAATY_MIN * (1 - RECIPROCAL_RTOL):
                raise MatrixError(
                    f"{matrix.node_id}: Saaty scale bound exceeded at ({i},{j}): {x:g} not in [1/9, 9]"
                )
            if not math.isclose(a[j][i], 1.0 / x, rel_tol=RECIPROCAL_RTOL):
                raise MatrixError(f"{matrix.node_id}: entries ({i},{j}) and ({j},{i}) are not reciprocal")


def derive_weights(matrix: ComparisonMatrix) -> tuple[WeightVector, float]:
    """Principal eigenvector by power iteration, plus the lambda-max estimate.

    Iterates ``w <- A w / sum(A w)`` from the uniform vector until successive
    iterates differ by less than ``POWER_TOL`` in max-norm.
    """
    check_matrix(matrix)
    a = matrix.as_array()
    n = a.shape[0]
    w = np.full(n, 1.0 / n)
    for _ in range(POWER_MAX_ITER):
        nxt = a @ w
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - w)) < POWER_TOL:
            w = nxt
            break
        w = nxt
    else:
        raise ConvergenceError(
            f"{matrix.node_id}: power iteration did not converge in {POWER_MAX_ITER} iterations"
        )
    lambda_max = float(w @ (a @ w) / (w @ w))
    weights = {item: float(x) for item, x in zip(matrix.items, w)}
    return WeightVector(matrix.node_id, weights), lambda_max


def consistency_ratio(lambda_max: float, n: int) -> float:
    if n < 2:
        raise ValueError("consistency ratio needs n >= 2")
    if n > 10:
        raise ValueError(f"consistency ratio supports at most 10 items (got {n})")
    if n <= 2:
        return 0.0
    # lambda_max >= n for reciprocal matrices; deviations this small are rounding
    ci = (lambda_max - n) / (n - 1)
    if ci < CI_ROUNDOFF:
        return 0.0
    return ci / RANDOM_INDEX[n]


# ---------------------------------------------------------------------------
# comparison files


def comparison_from_dict(raw: Mapping) -> ComparisonMatrix:
    """Build a matrix from its JSON form, filling the lower triangle by reciprocity.

    Rows may be full (lower entries given or ``null``) or upper-triangular
    (row ``i`` lists columns ``i..n-1``).
    """
    try:
        node_id = raw["nodeId"]
        items = tuple(raw["items"])
        rows = raw["entries"]
    except (KeyError, TypeError):
        raise MatrixError("comparison needs 'nodeId', 'items' and 'entries'") from None
    n = len(items)
    if not isinstance(rows, list) or len(rows) != n:
        raise MatrixError(f"{node_id}: expected {n} rows of entries")
    full: list[list[float | None]] = [[None] * n for _ in range(n)]
    for i, row in enumerate(rows):
        if not isinstance(row, list):
            raise MatrixError(f"{node_id}: row {i} is not an array")
        if len(row) == n:
            cells = list(enumerate(row))
        elif len(row) == n - i:
            cells = [(i + k, v) for k, v in enumerate(row)]
        else:
            raise MatrixError(f"{node_id}: row {i} has {len(row)} entries")
        for j, v in cells:
            if v is None:
                continue
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise MatrixError(f"{node_id}: entry ({i},{j}) is not a number")
            full[i][j] = float(v)
    for i in range(n):
        full[i][i] = 1.0 if full[i][i] is None else full[i][i]
        for j in range(i + 1, n):
            if full[i][j] is None and full[j][i] is None:
                raise MatrixError(f"{node_id}: entry ({i},{j}) missing")
            if full[i][j] is None:
                full[i][j] = 1.0 / full[j][i] if full[j][i] else math.inf
            if full[j][i] is None:
                full[j][i] = 1.0 / full[i][j] if full[i][j] else math.inf
    return ComparisonMatrix(node_id, items, tuple(tuple(r) for r in full))  # type: ignore[arg-type]


def load_comparisons(document: str) -> list[ComparisonMatrix]:
    raw = json.loads(document)
    if isinstance(raw, dict):
        raw = [raw]
    return [comparison_from_dict(r) for r in raw]


# ---------------------------------------------------------------------------
# rebalancing


def _local_normalize(weights: Mapping[str, float]) -> dict[str, float]:
    total = math.fsum(weights.values())
    if total <= 0:
        raise ValueError("cannot normalize a weight vector summing to 0")
    scaled = {k: v / total for k, v in weights.items()}
    # let the largest weight absorb the float residue so the sum lands within an ulp or two of 1
    largest = max(scaled, key=lambda k: scaled[k])
    scaled[largest] = 1.0 - math.fsum(v for k, v in scaled.items() if k != largest)
    return scaled


RebalanceStrategy = Callable[[Mapping[str, float]], dict]

STRATEGIES: dict[str, RebalanceStrategy] = {"local-normalize": _local_normalize}


def rebalance(
    model: QualityModel, vectors: Sequence[WeightVector], strategy: str = "local-normalize"
) -> QualityModel:
    """Write weight vectors onto their nodes after applying a rebalancing strategy.

    Aspect vectors replace ``child_weights``; impact vectors replace
    ``measure_weights``. Only ``local-normalize`` ships; other strategies can
    be registered in :data:`STRATEGIES`.
    """
    try:
        apply = STRATEGIES[strategy]
    except KeyError:
        raise ValueError(f"unknown rebalancing strategy {strategy!r}") from None
    aspects = {a.id: a for a in model.aspects}
    impacts = {i.id: i for i in model.impacts}
    factors = {f.id: f for f in model.factors}
    for vec in vectors:
        if vec.node_id in aspects:
            a = aspects[vec.node_id]
            expected = set(a.children) | set(a.impacts)
            if set(vec.weights) != expected:
                raise WeightMismatchError(
                    f"{vec.node_id}: weights for {sorted(vec.weights)} but children are {sorted(expected)}"
                )
            aspects[a.id] = replace(a, child_weights=apply(vec.weights))
        elif vec.node_id in impacts:
            imp = impacts[vec.node_id]
            expected = set(factors[imp.factor].measures) if imp.factor in factors else set()
            if set(vec.weights) != expected:
                raise WeightMismatchError(
                    f"{vec.node_id}: weights for {sorted(vec.weights)} but measures are {sorted(expected)}"
                )
            impacts[imp.id] = replace(imp, measure_weights=apply(vec.weights))
        else:
            raise WeightMismatchError(f"{vec.node_id}: not an aspect or impact")
    return replace(
        model,
        aspects=tuple(aspects[a.id] for a in model.aspects),
        impacts=tuple(impacts[i.id] for i in model.impacts),
    )
