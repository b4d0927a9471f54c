"""Primitives for embeddings on the unit hypersphere.

Everything here works in float64. Ingested float32 data is widened on entry.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyInput, NonFinite, ZeroVector

ZERO_NORM = 1e-12


@dataclass(frozen=True)
class EmbeddingSet:
    """``n`` row vectors of a common dimension ``d`` with optional labels.

    Rows are stored as given; use :meth:`from_raw` to project onto the sphere.
    """

    rows: np.ndarray
    labels: Optional[tuple] = field(default=None)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim == 1:
            rows = rows[None, :]
        if rows.ndim != 2:
            raise DimensionMismatch(f"expected a 2-D array, got shape {rows.shape}")
        rows = np.ascontiguousarray(rows)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != rows.shape[0]:
                raise DimensionMismatch(
                    f"{len(labels)} labels for {rows.shape[0]} rows")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def from_raw(cls, vectors, labels: Optional[Sequence] = None) -> "EmbeddingSet":
        return cls(normalize_rows(vectors), labels)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def __len__(self):
        return self.n

    def subset(self, index) -> "EmbeddingSet":
        index = np.asarray(index)
        labels = None
        if self.labels is not None:
            labels = [self.labels[i] for i in np.arange(self.n)[index]]
        return EmbeddingSet(self.rows[index], labels)


def as_rows(x) -> np.ndarray:
    """Return ``x`` as a 2-D float64 array (accepts EmbeddingSet or array-like)."""
    if isinstance(x, EmbeddingSet):
        return x.rows
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D array, got shape {arr.shape}")
    return arr


def normalize(v) -> np.ndarray:
    """Project a single vector onto the unit sphere.

    Raises ZeroVector when ``||v|| <= 1e-12``.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {v.shape}")
    if v.shape[0] < 2:
        raise DimensionMismatch("embeddings need dimension >= 2")
    if not np.all(np.isfinite(v)):
        raise NonFinite("vector has non-finite entries")
    norm = np.linalg.norm(v)
    if norm <= ZERO_NORM:
        raise ZeroVector(f"cannot normalize vector with norm {norm:.3g}")
    return v / norm


def normalize_rows(x) -> np.ndarray:
    """Row-wise :func:`normalize` for an ``n x d`` array."""
    x = as_rows(x)
    if x.shape[1] < 2:
        raise DimensionMismatch("embeddings need dimension >= 2")
    if not np.all(np.isfinite(x)):
        raise NonFinite("array has non-finite entries")
    norms = np.linalg.norm(x, axis=1)
    bad = np.flatnonzero(norms <= ZERO_NORM)
    if bad.size:
        raise ZeroVector(f"rows {bad.tolist()[:10]} have (near-)zero norm")
    return x / norms[:, None]


def cosine_matrix(a, b) -> np.ndarray:
    """Dot products between the rows of ``a`` (n x d) and ``b`` (m x d).

    For unit rows these are cosine similarities; entries are clamped to
    [-1, 1] to absorb rounding.
    """
    a = as_rows(a)
    b = as_rows(b)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"dimension {a.shape[1]} vs {b.shape[1]}")
    return np.clip(a @ b.T, -1.0, 1.0)


def log_sum_exp(xs, axis=None):
    """Stable ``log(sum(exp(xs)))`` along ``axis`` (all entries when None).

    Shifts by the maximum before exponentiating, so inputs up to +-1e4 are safe.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.size == 0 or (axis is not None and xs.shape[axis] == 0):
        raise EmptyInput("log_sum_exp of an empty sequence")
    if not np.all(np.isfinite(xs)):
        raise NonFinite("log_sum_exp requires finite inputs")
    m = np.max(xs, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(xs - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)
