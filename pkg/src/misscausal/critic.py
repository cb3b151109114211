"""Value network, BIC-style graph score and the penalised reward."""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import numcore as nc
from .imputer import glorot, zeros_param
from .numcore import RngStream, Tensor, acyclicity_value, least_squares

RSS_FLOOR = 1e-12
BASES = ("linear", "quadratic")


@dataclass
class VNetParams:
    W1: Tensor  # (k, v)
    b1: Tensor
    W2: Tensor  # (v, 1)
    b2: Tensor

    def tensors(self) -> list[Tensor]:
        return [self.W1, self.b1, self.W2, self.b2]

    def named(self) -> dict[str, Tensor]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}


def init_vnet(k: int, rng: RngStream, hidden: int = 64) -> VNetParams:
    return VNetParams(glorot(k, hidden, rng), zeros_param(hidden), glorot(hidden, 1, rng), zeros_param(1))


def vnet_forward(feat, params: VNetParams) -> Tensor:
    """One value per node: ``fc2(relu(fc1(feat_i)))``, shape (d,)."""
    feat = nc.as_tensor(feat)
    if feat.ndim != 2 or feat.shape[1] != params.W1.shape[0]:
        raise nc.ShapeError("vnet_forward", feat.shape, params.W1.shape)
    h = nc.relu(feat @ params.W1 + params.b1)
    out = h @ params.W2 + params.b2
    return nc.reshape(out, (feat.shape[0],))


class RssCache:
    """Residual sums of squares keyed by (node, parent bitmask).

    The cache is bound to one data matrix through a content hash; binding a
    different matrix empties it. Rebinding the same read-only array object
    skips the hash.
    """

    def __init__(self):
        self.table: dict[tuple[int, int], float] = {}
        self.hits = 0
        self.misses = 0
        self.data_key: str | None = None
        self._frozen = None

    @staticmethod
    def fingerprint(X: np.ndarray, basis: str) -> str:
        h = hashlib.blake2b(digest_size=16)
        h.update(basis.encode())
        h.update(str(X.shape).encode())
        h.update(np.ascontiguousarray(X, dtype=np.float64).tobytes())
        return h.hexdigest()

    def bind(self, X: np.ndarray, basis: str = "linear") -> None:
        if self._frozen is not None and X is self._frozen[0] and basis == self._frozen[1]:
            return
        key = self.fingerprint(X, basis)
        if key != self.data_key:
            self.table.clear()
            self.data_key = key
        self._frozen = (X, basis) if not X.flags.writeable else None

    def __len__(self) -> int:
        return len(self.table)


def _check_adjacency(A) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {A.shape}")
    if not np.isin(A, (0, 1)).all():
        raise ValueError("adjacency must be binary")
    if np.any(np.diag(A)):
        raise ValueError("adjacency must have a zero diagonal")
    return A.astype(np.int8)


def node_rss(X: np.ndarray, node: int, parents, basis: str = "linear") -> float:
    n = X.shape[0]
    cols = [np.ones(n)]
    if len(parents):
        P = X[:, list(parents)]
        cols.append(P * P if basis == "quadratic" else P)
    design = np.column_stack(cols)
    return least_squares(X[:, node], design)[1]


def score_from_rss(rss_total: float, n: int, d: int, n_edges: int) -> float:
    return n * d * math.log(max(rss_total, RSS_FLOOR) / (n * d)) + math.log(n) * n_edges


def bic_score(A, X, cache: RssCache | None = None, basis: str = "linear") -> tuple[float, list[float]]:
    """``S = n d log(sum_i RSS_i / (n d)) + log(n) * #edges``.

    RSS_i comes from regressing column i on an intercept and its parents
    (squared parent values for ``basis="quadratic"``). Returns S together
    with the per-node RSS list.
    """
    if basis not in BASES:
        raise ValueError(f"unknown basis {basis!r}")
    A = _check_adjacency(A)
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if A.shape[0] != d:
        raise ValueError(f"adjacency is {A.shape[0]}x{A.shape[0]} but data has {d} columns")
    if cache is not None:
        cache.bind(X, basis)
    rss = []
    weights = 1 << np.arange(d, dtype=np.int64)
    for i in range(d):
        col = A[:, i]
        if cache is None:
            rss.append(node_rss(X, i, np.nonzero(col)[0], basis))
            continue
        key = (i, int(col.astype(np.int64) @ weights))
        value = cache.table.get(key)
        if value is None:
            cache.misses += 1
            value = node_rss(X, i, np.nonzero(col)[0], basis)
            cache.table[key] = value
        else:
            cache.hits += 1
        rss.append(value)
    return score_from_rss(float(sum(rss)), n, d, int(A.sum())), rss


@dataclass
class RewardBreakdown:
    score: float
    h: float
    is_dag: bool
    reward: float
    edge_count: int

    def as_dict(self) -> dict:
        return {"score": self.score, "h": self.h, "is_dag": self.is_dag,
                "reward": self.reward, "edge_count": self.edge_count}


def compute_reward(A, X, lambda1: float, lambda2: float, cache: RssCache | None = None,
                   basis: str = "linear") -> RewardBreakdown:
    """``reward = -(S + lambda1 * [A cyclic] + lambda2 * h(A))``."""
    S, _ = bic_score(A, X, cache, basis)
    A = np.asarray(A)
    h = acyclicity_value(A)
    is_dag = h == 0.0
    reward = -(S + lambda1 * (0.0 if is_dag else 1.0) + lambda2 * h)
    return RewardBreakdown(S, h, bool(is_dag), reward, int(A.sum()))


def _is_acyclic(A: np.ndarray) -> bool:
    return acyclicity_value(A) == 0.0


def exhaustive_best_graph(X, basis: str = "linear", rel_tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """Brute-force minimiser of the score over all DAGs with d <= 4.

    Scores within ``rel_tol`` of each other count as tied; ties go to fewer
    edges, then to the lexicographically smallest flattened adjacency.
    """
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    if d > 4:
        raise ValueError(f"exhaustive_best_graph: d={d} exceeds the enumeration limit of 4")
    pairs = [(i, j) for i in range(d) for j in range(d) if i != j]
    cache = RssCache()
    best: tuple[float, int, tuple, np.ndarray] | None = None
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        A = np.zeros((d, d), dtype=np.int8)
        for (i, j), b in zip(pairs, bits):
            A[i, j] = b
        if not _is_acyclic(A):
            continue
        S, _ = bic_score(A, X, cache, basis)
        cand = (S, int(A.sum()), tuple(A.ravel()), A)
        if best is None:
            best = cand
            continue
        tol = rel_tol * max(1.0, abs(best[0]))
        if S < best[0] - tol or (abs(S - best[0]) <= tol and cand[1:3] < best[1:3]):
            best = cand
    assert best is not None
    return best[3], best[0]
