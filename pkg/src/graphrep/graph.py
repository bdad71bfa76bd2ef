"""Similarity graph over embedded points: kNN edges, Gaussian weights,
symmetric normalization."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from graphrep import kernels
from graphrep.errors import InvalidConfigError, InvalidStateError, ValidationError

ISOLATED_TOL = 1e-12


@dataclass(frozen=True)
class GraphConfig:
    k: int = 10
    # None selects the median heuristic, a float is a fixed bandwidth sigma
    sigma: float | None = None

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise InvalidConfigError(f"k must be a positive integer, got {self.k!r}")
        if self.sigma is not None and not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidConfigError(f"fixed sigma must be finite and > 0, got {self.sigma!r}")


@dataclass
class Graph:
    n: int
    edges: np.ndarray  # (m, 2) int64, i < j, lexicographically sorted
    weights: np.ndarray  # (m,)
    sq_dists: np.ndarray  # (m,) D_ij on each edge
    sigma_sq: float
    degrees: np.ndarray  # (n,)

    @property
    def isolated(self) -> np.ndarray:
        return self.degrees < ISOLATED_TOL

    def dense_weights(self) -> np.ndarray:
        W = np.zeros((self.n, self.n))
        i, j = self.edges.T
        W[i, j] = self.weights
        W[j, i] = self.weights
        return W


@dataclass
class NormalizedOperator:
    matrix: sparse.csr_matrix  # symmetric n×n
    values: np.ndarray  # S_ij per edge, aligned with Graph.edges
    isolated: np.ndarray  # bool (n,)


def pairwise_sq_dists(Z, backend=None) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] < 2:
        raise ValidationError(f"need at least two points, got shape {Z.shape}")
    if not np.all(np.isfinite(Z)):
        raise ValidationError("embedding contains non-finite values")
    return kernels.pairwise_sq_dists(Z, backend=backend)


def knn_edges(D, k, backend=None) -> np.ndarray:
    """Union-symmetrized kNN edge list, shape (m, 2), rows (i, j) with i < j."""
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    if int(k) != k or not 1 <= k <= n - 1:
        raise InvalidConfigError(f"k must lie in [1, n-1] = [1, {n - 1}], got {k}")
    nbrs = kernels.knn_select(D, int(k), backend=backend)
    rows = np.repeat(np.arange(n, dtype=np.int64), int(k))
    cols = nbrs.ravel()
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    keys = np.unique(lo * n + hi)
    return np.stack([keys // n, keys % n], axis=1).astype(np.int64)


def resolve_sigma(D, edges, sigma=None) -> float:
    """Bandwidth squared: ``sigma**2`` if fixed, else the median edge distance."""
    edges = np.asarray(edges)
    if edges.size == 0:
        raise InvalidStateError("cannot resolve bandwidth on an empty edge set")
    if sigma is not None:
        return float(sigma) ** 2
    med = float(np.median(D[edges[:, 0], edges[:, 1]]))
    return med if med > 0 else 1.0


def gaussian_weights(D, edges, sigma_sq) -> Graph:
    if not sigma_sq > 0:
        raise InvalidConfigError(f"sigma_sq must be > 0, got {sigma_sq}")
    D = np.asarray(D, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    n = D.shape[0]
    d_e = D[edges[:, 0], edges[:, 1]]
    w = np.exp(-d_e / sigma_sq)
    return Graph(n, edges, w, d_e, float(sigma_sq), degrees_of(n, edges, w))


def degrees_of(n, edges, weights) -> np.ndarray:
    return np.bincount(edges[:, 0], weights=weights, minlength=n) + np.bincount(
        edges[:, 1], weights=weights, minlength=n
    )


def sym_normalize(graph: Graph) -> NormalizedOperator:
    g = graph.degrees
    isolated = g < ISOLATED_TOL
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    live = ~(isolated[i] | isolated[j])
    vals = np.zeros_like(graph.weights)
    vals[live] = graph.weights[live] / np.sqrt(g[i[live]] * g[j[live]])
    S = sparse.coo_matrix(
        (np.concatenate([vals, vals]), (np.concatenate([i, j]), np.concatenate([j, i]))),
        shape=(graph.n, graph.n),
    ).tocsr()
    return NormalizedOperator(S, vals, isolated)


def build_graph(Z, cfg: GraphConfig, edges=None, sigma_sq=None, backend=None):
    """Distances, edges and weights in one go.

    Passing ``edges`` and ``sigma_sq`` reuses a frozen selection, which is how
    the gradient is defined (edge choice and bandwidth held constant).
    Returns ``(graph, D)``.
    """
    D = pairwise_sq_dists(Z, backend=backend)
    if edges is None:
        edges = knn_edges(D, cfg.k, backend=backend)
    if sigma_sq is None:
        sigma_sq = resolve_sigma(D, edges, cfg.sigma)
    return gaussian_weights(D, edges, sigma_sq), D


def dump_edges(graph: Graph, path) -> None:
    lines = [
        f"{i} {j} {format(float(w), '.17g')}\n"
        for (i, j), w in zip(graph.edges.tolist(), graph.weights)
    ]
    Path(path).write_text("".join(lines), encoding="utf-8")
