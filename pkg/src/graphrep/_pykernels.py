"""NumPy implementations of the inner loops, used when the extension is absent."""

import numpy as np

_BLOCK = 512


def pairwise_sq_dists(Z):
    n = Z.shape[0]
    D = np.empty((n, n), dtype=np.float64)
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        diff = Z[start:stop, None, :] - Z[None, :, :]
        D[start:stop] = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(D, 0.0)
    return D


def knn_select(D, k):
    masked = D.copy()
    np.fill_diagonal(masked, np.inf)
    # stable sort keeps equal distances in index order
    return np.ascontiguousarray(np.argsort(masked, axis=1, kind="stable")[:, :k]).astype(np.int64)


def edge_weight_grad(edges, s_vals, degrees, G, Fp, alpha, tiny):
    i, j = edges[:, 0], edges[:, 1]
    B = alpha * (np.einsum("eq,eq->e", G[i], Fp[j]) + np.einsum("eq,eq->e", G[j], Fp[i]))
    n = degrees.shape[0]
    bs = B * s_vals
    r = np.bincount(i, weights=bs, minlength=n) + np.bincount(j, weights=bs, minlength=n)
    active = (degrees[i] >= tiny) & (degrees[j] >= tiny)
    dw = np.zeros_like(B)
    gi, gj = degrees[i][active], degrees[j][active]
    dw[active] = (
        B[active] / np.sqrt(gi * gj) - r[i][active] / (2.0 * gi) - r[j][active] / (2.0 * gj)
    )
    return dw


def scatter_point_grad(edges, dD, Z):
    i, j = edges[:, 0], edges[:, 1]
    contrib = (2.0 * dD)[:, None] * (Z[i] - Z[j])
    dZ = np.zeros_like(Z)
    np.add.at(dZ, i, contrib)
    np.add.at(dZ, j, -contrib)
    return dZ
