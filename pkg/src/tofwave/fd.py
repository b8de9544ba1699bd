"""Finite-difference stencils and block operators on interleaved 2-vector fields.

A field on N nodes is an (N, 2) array. Sparse operators act on the interior
nodes 1..N-2 (homogeneous Dirichlet ends), flattened as [u1_1, u2_1, u1_2, ...].
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

# sixth-order central first-derivative weights for offsets 1, 2, 3
_C6 = np.array([3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0])


def d1_central(v: np.ndarray, h: float) -> np.ndarray:
    """Second-order centered first derivative at interior nodes (ends set to 0)."""
    out = np.zeros_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    return out


def d2_central(v: np.ndarray, h: float) -> np.ndarray:
    """Three-point second derivative at interior nodes (ends set to 0)."""
    out = np.zeros_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h)
    return out


def d1_high_order(v: np.ndarray, h: float) -> np.ndarray:
    """Sixth-order centered first derivative, second order in the last three nodes."""
    out = np.gradient(v, h, axis=0, edge_order=2)
    n = v.shape[0]
    if n > 6:
        acc = np.zeros_like(v[3:-3])
        for k, w in enumerate(_C6, start=1):
            acc += w * (v[3 + k : n - 3 + k] - v[3 - k : n - 3 - k])
        out[3:-3] = acc / h
    return out


def block_tridiagonal(diag_blocks: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> sparse.csc_matrix:
    """Sparse matrix with (n, 2, 2) diagonal blocks and constant 2x2 off-diagonal blocks.

    Row block j couples to j-1 through `lower` and to j+1 through `upper`.
    """
    n = diag_blocks.shape[0]
    rows, cols, vals = [], [], []
    base = 2 * np.arange(n)
    for a in range(2):
        for b in range(2):
            rows.append(base + a)
            cols.append(base + b)
            vals.append(diag_blocks[:, a, b])
            if n > 1:
                rows.append(base[1:] + a)
                cols.append(base[:-1] + b)
                vals.append(np.full(n - 1, lower[a, b]))
                rows.append(base[:-1] + a)
                cols.append(base[1:] + b)
                vals.append(np.full(n - 1, upper[a, b]))
    M = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(2 * n, 2 * n)
    )
    return M.tocsc()


def linear_operator(A: np.ndarray, c: float, h: float, diag_terms: np.ndarray) -> sparse.csc_matrix:
    """A D2 + c D1 + diag_terms on interior nodes with homogeneous Dirichlet ends.

    diag_terms has shape (n_interior, 2, 2) and carries the zeroth-order coefficient.
    """
    I2 = np.eye(2)
    diag = diag_terms - 2.0 * A / (h * h)
    lower = A / (h * h) - c / (2.0 * h) * I2
    upper = A / (h * h) + c / (2.0 * h) * I2
    return block_tridiagonal(diag, lower, upper)


def flatten_interior(v: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(v[1:-1]).reshape(-1)


def embed_interior(x: np.ndarray, n_points: int) -> np.ndarray:
    out = np.zeros((n_points, 2))
    out[1:-1] = x.reshape(-1, 2)
    return out
