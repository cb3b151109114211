"""Graph recovery metrics: FDR, TPR and structural Hamming distance.

Edges are directed. A reversed edge is one false positive (the estimated
edge) and one missed true edge, and costs 1 in SHD, which counts node
pairs whose status (absent, i->j, j->i, both) differs between the graphs.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class GraphMetrics:
    fdr: float
    tpr: float
    shd: int
    true_positives: int
    false_positives: int
    false_negatives: int
    reversed_edges: int
    predicted_edges: int
    true_edges: int

    def to_dict(self) -> dict:
        return asdict(self)


def _as_graph(A, name: str) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} adjacency must be square, got shape {A.shape}")
    if not np.isin(A, (0, 1)).all():
        raise ValueError(f"{name} adjacency must be binary")
    if np.any(np.diag(A)):
        raise ValueError(f"{name} adjacency has a nonzero diagonal")
    return A.astype(bool)


def compute_metrics(estimated, truth) -> GraphMetrics:
    E = _as_graph(estimated, "estimated")
    T = _as_graph(truth, "truth")
    if E.shape != T.shape:
        raise ValueError(f"dimension mismatch: estimated is {E.shape[0]}x{E.shape[0]}, "
                         f"truth is {T.shape[0]}x{T.shape[0]}")
    tp = int(np.sum(E & T))
    fp = int(np.sum(E & ~T))
    fn = int(np.sum(T & ~E))
    reversed_ = int(np.sum(E & T.T & ~T))
    n_pred = int(E.sum())
    n_true = int(T.sum())
    # pair status differs when either orientation differs
    upper = np.triu(np.ones(E.shape, dtype=bool), k=1)
    differs = (E != T) | (E.T != T.T)
    shd = int(np.sum(differs & upper))
    fdr = fp / n_pred if n_pred else 0.0
    tpr = tp / n_true if n_true else 0.0
    return GraphMetrics(float(fdr), float(tpr), shd, tp, fp, fn, reversed_, n_pred, n_true)
