"""Acyclicity functional and rank-tolerant least squares."""

from __future__ import annotations

import numpy as np


def acyclicity_value(A, max_terms: int = 500) -> float:
    """Return ``Tr(exp(A * A)) - d``.

    The exponential is summed as its power series, dropping the k=0 term
    (which contributes exactly ``d``). B = A*A is nonnegative, so every term
    is nonnegative and for a binary acyclic matrix every term is exactly
    zero: the result is 0.0 bit-for-bit iff the graph has no directed cycle.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"acyclicity_value: expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("acyclicity_value: matrix has non-finite entries")
    d = A.shape[0]
    B = A * A
    rho = float(B.sum(axis=1).max()) if d else 0.0
    term = np.eye(d)
    total = 0.0
    for k in range(1, max_terms + 1):
        term = term @ B / k
        total += float(np.trace(term))
        if k < d:
            continue
        norm = float(term.sum(axis=1).max())
        if norm == 0.0:
            break
        ratio = rho / (k + 1)
        if ratio < 0.5 and d * norm * ratio / (1.0 - ratio) <= 1e-16 * total:
            break
    return total


def least_squares(targets, design) -> tuple[np.ndarray, float]:
    """Minimum-norm least-squares fit of ``targets`` on the columns of
    ``design``; returns ``(coefficients, rss)``. Collinear designs are fine.
    """
    y = np.asarray(targets, dtype=np.float64)
    D = np.asarray(design, dtype=np.float64)
    if D.ndim == 1:
        D = D[:, None]
    if y.ndim != 1 or D.ndim != 2 or D.shape[0] != y.shape[0]:
        raise ValueError(
            f"least_squares: targets shape {y.shape} does not match design shape {D.shape}"
        )
    if y.shape[0] < 1:
        raise ValueError("least_squares: need at least one observation")
    if D.shape[1] == 0:
        return np.zeros(0), float(y @ y)
    coef, *_ = np.linalg.lstsq(D, y, rcond=None)
    r = y - D @ coef
    return coef, float(r @ r)
