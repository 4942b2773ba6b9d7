"""Pairwise finite-difference lower bound on the Lipschitz constant.

For every unordered pair (i, j) and output c the slope
|F[i, c] - F[j, c]| / ||x_i - x_j||_2 is formed; the estimate is the largest
slope over pairs and classes. Distances are accumulated coordinate by
coordinate in index order, so a naive double loop written the same way gives
bit-identical slopes. Ties resolve to the lexicographically first (i, j).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

from numba import njit, prange  # noqa: E402

log = logging.getLogger(__name__)

DUPLICATE_THRESHOLD = 1e-9
ZERO_THRESHOLD = 1e-12
ROW_BLOCK = 32
COL_BLOCK = 256


class DegenerateDataError(ValueError):
    pass


@dataclass(frozen=True)
class LipEstimate:
    L_emp: float
    per_class: np.ndarray
    witness: list[tuple[int, int]]  # (-1, -1) when a class never had a positive slope
    n_pairs_skipped: int
    n: int


@njit(parallel=True, cache=True)
def _blocked_scan(F, X, threshold, row_block, col_block):
    n, d = X.shape
    C = F.shape[1]
    row_best = np.zeros((n, C))
    row_arg = np.full((n, C), -1, dtype=np.int64)
    skipped = np.zeros(n, dtype=np.int64)
    n_blocks = (n + row_block - 1) // row_block
    for blk in prange(n_blocks):
        i0 = blk * row_block
        i1 = min(n, i0 + row_block)
        for j0 in range(i0, n, col_block):
            j1 = min(n, j0 + col_block)
            for i in range(i0, i1):
                for j in range(max(j0, i + 1), j1):
                    s = 0.0
                    for k in range(d):
                        t = X[i, k] - X[j, k]
                        s += t * t
                    dist = math.sqrt(s)
                    if dist < threshold:
                        skipped[i] += 1
                        continue
                    for c in range(C):
                        q = abs(F[i, c] - F[j, c]) / dist
                        # column tiles visit j in increasing order per row
                        if q > row_best[i, c]:
                            row_best[i, c] = q
                            row_arg[i, c] = j
    return row_best, row_arg, skipped


def pairwise_lip(outputs, X, threshold: float = DUPLICATE_THRESHOLD,
                 row_block: int = ROW_BLOCK, col_block: int = COL_BLOCK) -> LipEstimate:
    F = np.ascontiguousarray(outputs, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    if F.ndim == 1:
        F = F[:, None]
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if F.shape[0] != n:
        raise ValueError(f"{F.shape[0]} output rows for {n} inputs")
    if n < 2:
        raise DegenerateDataError("need at least two samples")
    row_best, row_arg, skipped = _blocked_scan(F, X, threshold, row_block, col_block)
    n_skipped = int(skipped.sum())
    if n_skipped == n * (n - 1) // 2:
        raise DegenerateDataError("every pair is a near-duplicate")

    C = F.shape[1]
    per_class = np.zeros(C)
    witness = [(-1, -1)] * C
    for i in range(n):  # sequential merge: strict '>' keeps the first row attaining the max
        for c in range(C):
            if row_best[i, c] > per_class[c]:
                per_class[c] = row_best[i, c]
                witness[c] = (i, int(row_arg[i, c]))
    return LipEstimate(float(per_class.max()), per_class, witness, n_skipped, n)


def model_lipschitz(model, X) -> LipEstimate:
    """Estimate on tanh-squashed network outputs over the rows of X."""
    from .trainer import predict_squashed

    return pairwise_lip(predict_squashed(model, X), X)


@dataclass(frozen=True)
class LowerBoundCheck:
    L_emp: float
    L_true: float
    passed: bool
    tight: bool | None = None


def lip_lower_bound_check(f, X, expect_tight: bool = False, slack: float = 1e-10,
                          tight_tol: float = 1e-9) -> LowerBoundCheck:
    """L_emp <= the predictor's exact Lipschitz constant (and equality if expected)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != f.input_dim:
        X = X.reshape(-1, f.input_dim)
    est = pairwise_lip(f.eval(X), X)
    L = float(f.lipschitz_bound)
    tight = abs(est.L_emp - L) <= tight_tol if expect_tight else None
    ok = est.L_emp <= L + slack and (tight is not False)
    return LowerBoundCheck(est.L_emp, L, ok, tight)


def filter_zero_estimates(records: Sequence, threshold: float = ZERO_THRESHOLD):
    """Drop records whose L_emp is (numerically) zero or missing.

    Returns (kept, dropped_log, all_dropped) where the log holds (n, width) per drop.
    """
    kept, dropped = [], []
    for r in records:
        value = r.L_emp
        if value is None or not math.isfinite(value) or value < threshold:
            dropped.append((r.n, r.width))
            log.info("dropping zero Lipschitz estimate at n=%d width=%d", r.n, r.width)
        else:
            kept.append(r)
    all_dropped = bool(records) and not kept
    if all_dropped:
        log.warning("all %d records had zero Lipschitz estimates", len(records))
    return kept, dropped, all_dropped
