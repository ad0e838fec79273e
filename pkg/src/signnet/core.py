"""Dense float64 helpers and seeded random streams.

Vectors and matrices are plain ``numpy`` arrays of dtype float64. The helpers
here validate shapes and finiteness at API boundaries and provide the one
matrix-vector product the rest of the package relies on.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "ShapeError",
    "as_vec",
    "as_mat",
    "matvec",
    "matvec_batch",
    "add",
    "make_rng",
    "split_rng",
]


_SMALL = 4096


class ShapeError(ValueError):
    """Raised when array shapes do not compose."""


def as_vec(v, name="vector"):
    """Return ``v`` as a finite, non-empty 1-D float64 array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ShapeError(f"{name} must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_mat(m, name="matrix"):
    """Return ``m`` as a finite 2-D float64 array."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ShapeError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def matvec_batch(m, xs):
    """Compute ``xs @ m.T`` with a fixed, data-independent summation order.

    Products are accumulated column by column, left to right, using only
    elementwise IEEE operations. Every row of ``xs`` therefore goes through
    the same sequence of roundings, which makes the product exactly monotone
    in ``xs`` when ``m`` is non-negative. BLAS kernels give no such promise
    (their blocking can depend on alignment and batch size).

    Parameters
    ----------
    m : (rows, cols) ndarray
    xs : (batch, cols) ndarray

    Returns
    -------
    (batch, rows) ndarray
    """
    if xs.shape[1] != m.shape[1]:
        raise ShapeError(
            f"cannot multiply matrix of shape {m.shape} with inputs of shape {xs.shape}"
        )
    if xs.shape[0] * m.shape[0] <= _SMALL:
        # Same left-to-right order as the loop below, in a single ufunc call.
        return np.add.accumulate(xs[:, None, :] * m[None, :, :], axis=2)[:, :, -1]
    out = xs[:, 0:1] * m[:, 0]
    for j in range(1, m.shape[1]):
        out += xs[:, j : j + 1] * m[:, j]
    return out


def matvec(m, v):
    """Matrix-vector product ``m @ v`` (see :func:`matvec_batch` for ordering)."""
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ShapeError(f"cannot multiply matrix of shape {m.shape} with vector of shape {v.shape}")
    return matvec_batch(m, v[None, :])[0]


def add(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"cannot add vectors of shapes {a.shape} and {b.shape}")
    return a + b


def make_rng(seed=0):
    """Counter-based (Philox) generator; identical streams on every platform."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def split_rng(rng, n):
    """Independent child generators for parallel work, one per worker."""
    return rng.spawn(n)
