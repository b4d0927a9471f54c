"""Post-hoc OoD scores on image embeddings: MCM and NegLabel (optionally grouped).

Higher scores mean "more in-distribution". All scores are evaluated in the log
domain so that ``tau = 0.01`` with thousands of negatives cannot overflow.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, EmptyIdSet, EmptyNegativeSet, TooManyGroups
from .sphere import as_rows, cosine_matrix, log_sum_exp

METHODS = ("mcm", "neglabel", "neglabel-grouped")


@dataclass(frozen=True)
class ScoreConfig:
    temperature_mcm: float = 1.0
    temperature_neglabel: float = 0.01
    groups: int = 100
    grouping_enabled: bool = False

    def __post_init__(self):
        if self.temperature_mcm <= 0 or self.temperature_neglabel <= 0:
            raise ValueError("temperatures must be positive")
        if self.groups < 1:
            raise ValueError("groups must be >= 1")


@dataclass(frozen=True)
class ScoreVector:
    scores: np.ndarray
    method: str
    config: dict

    def __len__(self):
        return len(self.scores)


def _sims(images, texts, empty_error, what):
    texts = as_rows(texts)
    if texts.shape[0] == 0:
        raise empty_error(f"{what} text set is empty")
    images = as_rows(images)
    if images.shape[1] != texts.shape[1]:
        raise DimensionMismatch(f"dimension {images.shape[1]} vs {texts.shape[1]}")
    return cosine_matrix(images, texts)


def _neglabel_rows(id_sims, neg_sims, tau):
    a = log_sum_exp(id_sims / tau, axis=1)
    b = log_sum_exp(neg_sims / tau, axis=1)
    # logistic(a - b), split by sign so the score keeps full precision near 0 and 1
    d = b - a
    e = np.exp(-np.abs(d))
    return np.where(d <= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def neglabel_score(image, id_texts, neg_texts, tau: float = 0.01) -> float:
    """ID evidence over ID-plus-negative evidence, each a sum of ``exp(sim/tau)``."""
    image = np.asarray(image, dtype=np.float64)[None, :]
    id_sims = _sims(image, id_texts, EmptyIdSet, "ID")
    neg_sims = _sims(image, neg_texts, EmptyNegativeSet, "negative")
    return float(_neglabel_rows(id_sims, neg_sims, tau)[0])


def split_groups(m: int, groups: int):
    """Contiguous index ranges of sizes ``ceil(m/G)`` first, then ``floor(m/G)``."""
    if groups < 1:
        raise ValueError("groups must be >= 1")
    if groups > m:
        raise TooManyGroups(f"{groups} groups for {m} negatives")
    return np.array_split(np.arange(m), groups)


def _grouped_rows(id_sims, neg_sims, tau, groups):
    parts = split_groups(neg_sims.shape[1], groups)
    per_group = [_neglabel_rows(id_sims, neg_sims[:, g], tau) for g in parts]
    return np.mean(per_group, axis=0)


def neglabel_score_grouped(image, id_texts, neg_texts, tau: float = 0.01,
                           groups: int = 100) -> float:
    """Mean NegLabel score over ``groups`` contiguous slices of the negatives
    (which should be in mined order)."""
    image = np.asarray(image, dtype=np.float64)[None, :]
    id_sims = _sims(image, id_texts, EmptyIdSet, "ID")
    neg_sims = _sims(image, neg_texts, EmptyNegativeSet, "negative")
    return float(_grouped_rows(id_sims, neg_sims, tau, groups)[0])


def _mcm_rows(id_sims, tau):
    logits = id_sims / tau
    return np.exp(np.max(logits, axis=1) - log_sum_exp(logits, axis=1))


def mcm_score(image, id_texts, tau: float = 1.0) -> float:
    """Maximum softmax probability over the ID class similarities."""
    image = np.asarray(image, dtype=np.float64)[None, :]
    return float(_mcm_rows(_sims(image, id_texts, EmptyIdSet, "ID"), tau)[0])


def score_batch(images, id_texts, neg_texts=None, config: ScoreConfig = ScoreConfig(),
                method: str = "neglabel", tau: Optional[float] = None) -> ScoreVector:
    """Score every row of ``images``; order is preserved.

    ``method="neglabel"`` honours ``config.grouping_enabled``; pass
    ``"neglabel-grouped"`` to force grouping. ``tau`` overrides the
    method's configured temperature.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if method == "neglabel" and config.grouping_enabled:
        method = "neglabel-grouped"
    images = as_rows(images)
    snapshot = asdict(config)
    if images.shape[0] == 0:
        return ScoreVector(np.zeros(0), method, snapshot)
    if method == "mcm":
        t = config.temperature_mcm if tau is None else tau
        scores = _mcm_rows(_sims(images, id_texts, EmptyIdSet, "ID"), t)
    else:
        if neg_texts is None:
            raise EmptyNegativeSet(f"method {method!r} needs negative texts")
        t = config.temperature_neglabel if tau is None else tau
        id_sims = _sims(images, id_texts, EmptyIdSet, "ID")
        neg_sims = _sims(images, neg_texts, EmptyNegativeSet, "negative")
        if method == "neglabel":
            scores = _neglabel_rows(id_sims, neg_sims, t)
        else:
            scores = _grouped_rows(id_sims, neg_sims, t, config.groups)
    snapshot["tau"] = t
    return ScoreVector(scores, method, snapshot)
