"""Detection metrics (AUROC, FPR at a TPR target) and hyperspherical gap
diagnostics (uniformity / alignment variants)."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .errors import EmptyInput, EmptyPairPopulation, NoCompetitors, NonFinite, SizeMismatch
from .sphere import as_rows, log_sum_exp

REPORT_FORMAT_VERSION = 1


def _scores(xs, name):
    xs = np.asarray(xs, dtype=np.float64).ravel()
    if xs.size == 0:
        raise EmptyInput(f"{name} scores are empty")
    if not np.all(np.isfinite(xs)):
        raise NonFinite(f"{name} scores contain non-finite values")
    return xs


def auroc(id_scores, ood_scores) -> float:
    """Mann-Whitney estimate: P(id > ood) + 0.5 * P(id == ood).

    ID is the positive class, so higher scores should mean more ID-like.
    """
    pos = _scores(id_scores, "ID")
    neg = np.sort(_scores(ood_scores, "OoD"))
    below = np.searchsorted(neg, pos, side="left")
    not_above = np.searchsorted(neg, pos, side="right")
    # integer counts keep ties exact: 2 * wins + ties
    doubled = int(np.sum(below + not_above))
    return doubled / (2.0 * pos.size * neg.size)


def fpr_at_tpr(id_scores, ood_scores, tpr_target: float = 0.95):
    """FPR at the largest observed ID score that keeps ``ceil(tpr * n_id)`` ID
    scores at or above it. Returns ``(fpr, threshold)``."""
    if not 0 < tpr_target <= 1:
        raise ValueError("tpr_target must lie in (0, 1]")
    pos = np.sort(_scores(id_scores, "ID"))[::-1]
    neg = _scores(ood_scores, "OoD")
    # guard against 0.95 * n landing a hair above an integer
    k = max(1, math.ceil(tpr_target * pos.size - 1e-9))
    threshold = float(pos[k - 1])
    return float(np.mean(neg >= threshold)), threshold


def roc_points(id_scores, ood_scores):
    """(fpr, tpr) at every distinct observed threshold, from strictest down.

    Starts at (0, 0) and ends at (1, 1).
    """
    pos = _scores(id_scores, "ID")
    neg = _scores(ood_scores, "OoD")
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    pos_sorted, neg_sorted = np.sort(pos), np.sort(neg)
    tpr = (pos.size - np.searchsorted(pos_sorted, thresholds, side="left")) / pos.size
    fpr = (neg.size - np.searchsorted(neg_sorted, thresholds, side="left")) / neg.size
    return np.concatenate([[0.0], fpr]), np.concatenate([[0.0], tpr])


@dataclass(frozen=True)
class DetectionReport:
    fpr_at_95_tpr: float
    auroc: float
    threshold_used: float
    n_id: int
    n_ood: int

    COLUMNS = ("fpr_at_95_tpr", "auroc", "threshold_used", "n_id", "n_ood")

    def to_dict(self) -> dict:
        d = {"format_version": REPORT_FORMAT_VERSION}
        d.update(asdict(self))
        return d


def detection_report(id_scores, ood_scores, tpr_target: float = 0.95) -> DetectionReport:
    fpr, thr = fpr_at_tpr(id_scores, ood_scores, tpr_target)
    return DetectionReport(fpr, auroc(id_scores, ood_scores), thr,
                           int(np.size(id_scores)), int(np.size(ood_scores)))


class PairMode(str, Enum):
    ALL = "all"           # unordered pairs i < j of left (+ right, if given)
    INTRA = "intra"       # unordered pairs within left only
    CROSS = "cross"       # every (left, right) combination
    MATCHED = "matched"   # positional (left_k, right_k) pairs


def _sq_dists(a, b):
    d = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
         - 2.0 * (a @ b.T))
    return np.maximum(d, 0.0)


def _neg_log_mean_exp(values) -> float:
    return -(log_sum_exp(values) - math.log(values.size))


def uniformity(left, right=None, mode="all") -> float:
    """``-log mean exp(-2 ||e_i - e_j||^2)`` over the pair population of ``mode``.

    Self-pairs never enter ALL/INTRA; CROSS includes positional matches.
    """
    mode = PairMode(mode)
    a = as_rows(left)
    if mode in (PairMode.ALL, PairMode.INTRA):
        pts = a if (mode is PairMode.INTRA or right is None) else np.vstack([a, as_rows(right)])
        n = pts.shape[0]
        if n < 2:
            raise EmptyPairPopulation("need at least two embeddings")
        iu = np.triu_indices(n, k=1)
        d2 = _sq_dists(pts, pts)[iu]
    else:
        if right is None:
            raise EmptyPairPopulation(f"{mode.value} mode needs a right-hand set")
        b = as_rows(right)
        if a.shape[0] == 0 or b.shape[0] == 0:
            raise EmptyPairPopulation("empty embedding set")
        if mode is PairMode.CROSS:
            d2 = _sq_dists(a, b).ravel()
        else:
            if a.shape != b.shape:
                raise SizeMismatch(f"matched mode needs equal shapes, got {a.shape} vs {b.shape}")
            d2 = np.sum((a - b) ** 2, axis=1)
    return _neg_log_mean_exp(-2.0 * d2)


def alignment(id_images, id_texts, other_texts=None, labels=None) -> float:
    """``-mean_i(||i_i - t_i||^2 - min_j ||i_i - t_j||^2)``.

    With ``other_texts=None`` the competitors are the other ID texts (j != i,
    and additionally any j sharing i's label when ``labels`` is given). Otherwise
    every row of ``other_texts`` competes.
    """
    imgs = as_rows(id_images)
    txts = as_rows(id_texts)
    if imgs.shape != txts.shape:
        raise SizeMismatch(f"images {imgs.shape} vs texts {txts.shape}")
    if imgs.shape[0] == 0:
        raise EmptyInput("no ID pairs")
    matched = np.sum((imgs - txts) ** 2, axis=1)
    if other_texts is None:
        d2 = _sq_dists(imgs, txts)
        excluded = np.eye(imgs.shape[0], dtype=bool)
        if labels is not None:
            labels = np.asarray(labels)
            excluded |= labels[:, None] == labels[None, :]
        if np.any(np.all(excluded, axis=1)):
            raise NoCompetitors("some ID image has no competing ID text")
        best = np.min(np.where(excluded, np.inf, d2), axis=1)
    else:
        others = as_rows(other_texts)
        if others.shape[0] == 0:
            raise NoCompetitors("competitor text set is empty")
        best = np.min(_sq_dists(imgs, others), axis=1)
    return float(-np.mean(matched - best))


@dataclass(frozen=True)
class GapReport:
    uni_all: float
    uni_i: float
    uni_t: float
    uni_cm: float
    uni_cmm: float
    align_id: float
    align_ood: float

    COLUMNS = ("uni_all", "uni_i", "uni_t", "uni_cm", "uni_cmm", "align_id", "align_ood")

    def to_dict(self) -> dict:
        d = {"format_version": REPORT_FORMAT_VERSION}
        d.update(asdict(self))
        return d


def gap_report(id_images, id_texts, ood_texts, labels=None) -> GapReport:
    """All seven modality-gap quantities for positionally matched ID pairs."""
    return GapReport(
        uni_all=uniformity(id_images, id_texts, PairMode.ALL),
        uni_i=uniformity(id_images, mode=PairMode.INTRA),
        uni_t=uniformity(id_texts, mode=PairMode.INTRA),
        uni_cm=uniformity(id_images, id_texts, PairMode.CROSS),
        uni_cmm=uniformity(id_images, id_texts, PairMode.MATCHED),
        align_id=alignment(id_images, id_texts, labels=labels),
        align_ood=alignment(id_images, id_texts, ood_texts),
    )
