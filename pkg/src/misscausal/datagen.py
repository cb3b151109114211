"""Synthetic DAGs, structural-equation sampling, MCAR masking and CSV I/O."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .numcore import RngStream, acyclicity_value

SCHEMES = ("upper_triangular_permuted", "bernoulli")
# edge probability used by the upper_triangular_permuted scheme
UPPER_TRIANGULAR_P = 0.5


class DatasetError(ValueError):
    pass


@dataclass
class GroundTruthGraph:
    adjacency: np.ndarray  # int8, row i -> column j
    edge_weights: np.ndarray

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=np.int8)
        self.edge_weights = np.asarray(self.edge_weights, dtype=np.float64)
        if self.adjacency.shape != self.edge_weights.shape:
            raise ValueError("adjacency and edge_weights must have the same shape")
        if np.any(np.diag(self.adjacency)):
            raise ValueError("ground-truth graph has a self-loop")
        if np.any((self.edge_weights != 0) != (self.adjacency != 0)):
            raise ValueError("edge weights must be nonzero exactly on edges")

    @property
    def d(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum())


def topological_order(adjacency: np.ndarray) -> list[int]:
    """Kahn's algorithm; raises ``ValueError`` on a cycle."""
    A = np.asarray(adjacency) != 0
    d = A.shape[0]
    indeg = A.sum(axis=0).astype(int)
    ready = [j for j in range(d) if indeg[j] == 0]
    order = []
    while ready:
        i = ready.pop(0)
        order.append(i)
        for j in np.nonzero(A[i])[0]:
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(int(j))
    if len(order) != d:
        raise ValueError("graph contains a directed cycle")
    return order


def _draw_weights(mask: np.ndarray, rng: RngStream, low: float, high: float) -> np.ndarray:
    magnitude = rng.uniform(low, high, size=mask.shape)
    sign = np.where(rng.random(mask.shape) < 0.5, -1.0, 1.0)
    return np.where(mask != 0, sign * magnitude, 0.0)


def generate_dag(
    d: int,
    rng: RngStream,
    scheme: str = "bernoulli",
    p: float = 0.2,
    weight_range: tuple[float, float] = (0.5, 2.0),
) -> GroundTruthGraph:
    """Random DAG: strictly-upper-triangular Bernoulli draws under a random
    node permutation, with weights uniform on ``[-hi, -lo] U [lo, hi]``.

    ``scheme="upper_triangular_permuted"`` fixes ``p`` at 0.5.
    """
    if d < 2:
        raise ValueError(f"generate_dag: need d >= 2, got {d}")
    if scheme not in SCHEMES:
        raise ValueError(f"generate_dag: unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if scheme == "upper_triangular_permuted":
        p = UPPER_TRIANGULAR_P
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"generate_dag: edge probability must lie in [0, 1], got {p}")
    upper = np.triu(rng.random((d, d)) < p, k=1).astype(np.int8)
    perm = rng.permutation(d)
    adj = upper[np.ix_(perm, perm)]
    weights = _draw_weights(adj, rng, *weight_range)
    return GroundTruthGraph(adj, weights)


def graph_from_edges(
    d: int,
    edges: Iterable[tuple[int, int]],
    rng: RngStream,
    weight_range: tuple[float, float] = (0.5, 2.0),
) -> GroundTruthGraph:
    adj = np.zeros((d, d), dtype=np.int8)
    for i, j in edges:
        adj[i, j] = 1
    if acyclicity_value(adj) != 0.0:
        raise ValueError("graph_from_edges: edge list contains a cycle")
    return GroundTruthGraph(adj, _draw_weights(adj, rng, *weight_range))


def simulate_sem(
    graph: GroundTruthGraph,
    n: int,
    rng: RngStream | None = None,
    func: str = "linear",
    noise: str = "gaussian",
    sigma: float = 1.0,
    exponent: float = 3.0,
    noise_values: np.ndarray | None = None,
) -> np.ndarray:
    """Sample ``n`` rows of ``x_i = f_i(parents) + noise_i`` in topological order.

    ``noise_values`` (n x d) bypasses the noise draw entirely.
    """
    if n < 1:
        raise ValueError("simulate_sem: n must be >= 1")
    if sigma < 0:
        raise ValueError("simulate_sem: sigma must be >= 0")
    if func not in ("linear", "quadratic"):
        raise ValueError(f"simulate_sem: unknown func {func!r}")
    if noise not in ("gaussian", "non_gaussian_power"):
        raise ValueError(f"simulate_sem: unknown noise {noise!r}")
    order = topological_order(graph.adjacency)
    d = graph.d
    if noise_values is None:
        if rng is None:
            raise ValueError("simulate_sem: rng is required unless noise_values is given")
        z = rng.normal(0.0, 1.0, size=(n, d)) * sigma
        if noise == "non_gaussian_power":
            z = np.sign(z) * np.abs(z) ** exponent
    else:
        z = np.asarray(noise_values, dtype=np.float64).reshape(n, d)
    W = graph.edge_weights
    X = np.zeros((n, d))
    for i in order:
        parents = np.nonzero(graph.adjacency[:, i])[0]
        if len(parents):
            inputs = X[:, parents]
            if func == "quadratic":
                inputs = inputs * inputs
            X[:, i] = inputs @ W[parents, i]
        X[:, i] += z[:, i]
    return X


@dataclass
class MaskedDataset:
    """Observations with a missingness mask (1 = observed).

    Unobserved cells of ``X`` hold NaN. Anything that reads them without
    consulting ``M`` first gets NaN back, which surfaces the bug.
    """

    X: np.ndarray
    M: np.ndarray
    column_names: list[str] = field(default_factory=list)
    min_observed: int = field(default=2, repr=False, compare=False)

    def __post_init__(self):
        self.X = np.array(self.X, dtype=np.float64)
        self.M = np.asarray(self.M, dtype=np.int8)
        if self.X.ndim != 2 or self.X.shape != self.M.shape:
            raise DatasetError(f"X shape {self.X.shape} and mask shape {self.M.shape} differ")
        if not self.column_names:
            self.column_names = [f"x{j}" for j in range(self.X.shape[1])]
        if len(self.column_names) != self.X.shape[1]:
            raise DatasetError("column_names length does not match the number of columns")
        self.X[self.M == 0] = np.nan
        if np.any(~np.isfinite(self.X[self.M == 1])):
            raise DatasetError("observed entries must be finite")
        self.check_coverage(self.min_observed)

    def check_coverage(self, minimum: int = 2) -> None:
        """Raise DatasetError naming the first column with fewer than
        ``minimum`` observed entries."""
        counts = self.M.sum(axis=0)
        for j, c in enumerate(counts):
            if c < minimum:
                raise DatasetError(
                    f"column {self.column_names[j]!r} has {int(c)} observed entries; need at least {minimum}"
                )

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def missing_fraction(self) -> float:
        return float(1.0 - self.M.mean())

    def filled(self, value=0.0) -> np.ndarray:
        """Copy of X with unobserved cells replaced by ``value`` (scalar,
        per-column vector or full matrix)."""
        fill = np.broadcast_to(np.asarray(value, dtype=np.float64), self.X.shape)
        return np.where(self.M == 1, self.X, fill)

    def column_means(self) -> np.ndarray:
        return np.array([self.X[self.M[:, j] == 1, j].mean() for j in range(self.d)])

    def column_stds(self) -> np.ndarray:
        """Population standard deviation of the observed entries."""
        return np.array([self.X[self.M[:, j] == 1, j].std() for j in range(self.d)])

    def column_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([self.X[self.M[:, j] == 1, j].min() for j in range(self.d)])
        hi = np.array([self.X[self.M[:, j] == 1, j].max() for j in range(self.d)])
        return lo, hi

    def rows(self, idx) -> "MaskedDataset":
        return MaskedDataset(self.X[idx], self.M[idx], list(self.column_names), min_observed=0)


def apply_missingness(
    X: np.ndarray,
    rate: float,
    rng: RngStream,
    column_names: Sequence[str] | None = None,
) -> MaskedDataset:
    """Mask every cell independently with probability ``rate`` (MCAR)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"apply_missingness: rate must lie in [0, 1), got {rate}")
    X = np.asarray(X, dtype=np.float64)
    M = (rng.random(X.shape) >= rate).astype(np.int8)
    return MaskedDataset(X, M, list(column_names) if column_names else [])


def standardize(ds: MaskedDataset) -> MaskedDataset:
    """Centre each column and divide by its population sd, using observed
    entries only. Constant columns are centred but not scaled."""
    mu = ds.column_means()
    sd = ds.column_stds()
    sd = np.where(sd > 0, sd, 1.0)
    X = (ds.filled(0.0) - mu) / sd
    return MaskedDataset(X, ds.M.copy(), list(ds.column_names), min_observed=ds.min_observed)


# -- CSV ----------------------------------------------------------------------
def format_float(x: float) -> str:
    # repr round-trips float64 exactly
    return repr(float(x))


def write_csv(path, X: np.ndarray, column_names: Sequence[str], M: np.ndarray | None = None,
              missing_token: str = "") -> None:
    X = np.asarray(X)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(column_names)
        for i in range(X.shape[0]):
            w.writerow(
                format_float(X[i, j]) if M is None or M[i, j] else missing_token
                for j in range(X.shape[1])
            )


def write_dataset_csv(path, ds: MaskedDataset, missing_token: str = "") -> None:
    write_csv(path, ds.X, ds.column_names, ds.M, missing_token)


def load_csv(path, missing_token: str = "", min_observed: int = 1) -> MaskedDataset:
    """Read a header + rows CSV; cells equal to ``missing_token`` are masked.

    Files are accepted as long as every column has ``min_observed`` values;
    the stricter two-per-column requirement is checked where it matters
    (masking, pretraining, training).
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    d = len(header)
    body = rows[1:]
    if not body:
        raise DatasetError(f"{path}: no data rows")
    X = np.zeros((len(body), d))
    M = np.ones((len(body), d), dtype=np.int8)
    for i, row in enumerate(body):
        if len(row) != d:
            raise DatasetError(f"{path}: row {i + 1} has {len(row)} cells, expected {d}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell == missing_token:
                M[i, j] = 0
                X[i, j] = np.nan
                continue
            try:
                value = float(cell)
            except ValueError:
                raise DatasetError(
                    f"{path}: cannot parse cell at row {i + 1}, column {j + 1} ({header[j]!r}): {cell!r}"
                ) from None
            if not math.isfinite(value):
                raise DatasetError(f"{path}: non-finite value at row {i + 1}, column {j + 1}")
            X[i, j] = value
    return MaskedDataset(X, M, header, min_observed=min_observed)
