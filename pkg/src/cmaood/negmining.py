"""Negative-label mining: keep the candidates farthest from the ID label set."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DimensionMismatch, EmptyInput, EtaOutOfRange
from .sphere import EmbeddingSet, as_rows, cosine_matrix


@dataclass(frozen=True)
class NegMiningConfig:
    eta: float = 0.05
    m: int = 10_000

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise EtaOutOfRange(f"eta must lie in (0, 1], got {self.eta}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")


@dataclass(frozen=True)
class NegativeLabelSet:
    embeddings: EmbeddingSet
    labels: Tuple[str, ...]
    distances: np.ndarray      # non-increasing
    indices: np.ndarray        # positions in the candidate corpus


def percentile(xs, eta: float) -> float:
    """Linear-interpolation percentile at fractional rank ``eta * (K - 1)``
    of the ascending sort."""
    if not 0 < eta <= 1:
        raise EtaOutOfRange(f"eta must lie in (0, 1], got {eta}")
    xs = np.sort(np.asarray(xs, dtype=np.float64).ravel())
    if xs.size == 0:
        raise EmptyInput("percentile of an empty sequence")
    rank = eta * (xs.size - 1)
    lo = math.floor(rank)
    hi = min(lo + 1, xs.size - 1)
    frac = rank - lo
    return float(xs[lo] + frac * (xs[hi] - xs[lo]))


def _percentile_rows(values: np.ndarray, eta: float) -> np.ndarray:
    # Row-wise version of percentile(); same arithmetic, vectorized.
    values = np.sort(values, axis=1)
    k = values.shape[1]
    rank = eta * (k - 1)
    lo = math.floor(rank)
    hi = min(lo + 1, k - 1)
    frac = rank - lo
    return values[:, lo] + frac * (values[:, hi] - values[:, lo])


def candidate_distances(candidates, id_texts, eta: float) -> np.ndarray:
    """``d_i = percentile_eta({-cos(candidate_i, id_k)}_k)`` for every candidate."""
    cand = as_rows(candidates)
    ids = as_rows(id_texts)
    if cand.shape[0] == 0 or ids.shape[0] == 0:
        raise EmptyInput("need at least one candidate and one ID label")
    if cand.shape[1] != ids.shape[1]:
        raise DimensionMismatch(f"dimension {cand.shape[1]} vs {ids.shape[1]}")
    if not 0 < eta <= 1:
        raise EtaOutOfRange(f"eta must lie in (0, 1], got {eta}")
    return _percentile_rows(-cosine_matrix(cand, ids), eta)


def mine_negatives(candidates: EmbeddingSet, id_texts, config: NegMiningConfig = NegMiningConfig(),
                   labels=None) -> NegativeLabelSet:
    """Select the ``config.m`` candidates with the largest percentile distance.

    Output is sorted by distance, descending; equal distances keep corpus
    order. Labels come from ``labels`` or ``candidates.labels``, falling back
    to the corpus index.
    """
    rows = as_rows(candidates)
    dist = candidate_distances(rows, id_texts, config.eta)
    order = np.argsort(-dist, kind="stable")[:min(config.m, rows.shape[0])]
    if labels is None:
        labels = getattr(candidates, "labels", None)
    if labels is None:
        labels = [str(i) for i in range(rows.shape[0])]
    chosen = tuple(labels[i] for i in order)
    return NegativeLabelSet(EmbeddingSet(rows[order], chosen), chosen, dist[order], order)
