"""Contrastive image-text loss with the cross-modal alignment (CMA) regularizer.

With ``kappa = 1 / tau`` and logits ``L[k, j] = kappa * (i_k . t_j)`` the
per-pair terms are::

    clip_image[k] = logsumexp_j L[k, j] - L[k, k]
    clip_text[k]  = logsumexp_j L[j, k] - L[k, k]
    cma_image[k]  = -logsumexp_j L[k, j]
    cma_text[k]   = -logsumexp_j L[j, k]

and the objective is ``mean(clip_image + clip_text) / 2 + lam * mean(cma_image
+ cma_text) / 2``. Setting ``lam = 0`` gives the plain symmetric CLIP loss.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateBatch, DimensionMismatch, EmptyInput, NonFiniteSimilarity
from .sphere import as_rows, cosine_matrix, log_sum_exp, normalize_rows

DEFAULT_MAX_INVERSE_SCALE = 100.0


@dataclass(frozen=True)
class Temperature:
    """Temperature stored as a log inverse scale ``s`` with ``1/tau = exp(s)``.

    ``exp(s)`` may not exceed ``max_inverse_scale``; training projects ``s``
    back under the cap after every update.
    """

    log_inverse_scale: float = math.log(DEFAULT_MAX_INVERSE_SCALE)
    learnable: bool = True
    max_inverse_scale: float = DEFAULT_MAX_INVERSE_SCALE

    def __post_init__(self):
        s = float(self.log_inverse_scale)
        if not math.isfinite(s):
            raise ValueError("log_inverse_scale must be finite")
        if math.exp(s) > self.max_inverse_scale * (1 + 1e-12):
            raise ValueError(
                f"1/tau = {math.exp(s):.6g} exceeds cap {self.max_inverse_scale}")
        object.__setattr__(self, "log_inverse_scale", s)

    @classmethod
    def from_tau(cls, tau: float, learnable: bool = True,
                 max_inverse_scale: float = DEFAULT_MAX_INVERSE_SCALE) -> "Temperature":
        if tau <= 0:
            raise ValueError("tau must be positive")
        return cls(-math.log(tau), learnable, max_inverse_scale)

    @property
    def inverse_scale(self) -> float:
        return min(math.exp(self.log_inverse_scale), self.max_inverse_scale)

    @property
    def tau(self) -> float:
        return 1.0 / self.inverse_scale

    def replace(self, log_inverse_scale: float) -> "Temperature":
        cap = math.log(self.max_inverse_scale)
        return Temperature(min(log_inverse_scale, cap), self.learnable,
                           self.max_inverse_scale)


@dataclass(frozen=True)
class CmaConfig:
    lam: float = 0.0
    temperature: Temperature = Temperature()

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lambda must be >= 0")


@dataclass(frozen=True)
class PairedBatch:
    """``B`` positionally matched image/text unit embeddings.

    ``image_norms``/``text_norms`` hold the norms of the raw vectors the unit
    rows were normalized from, so gradients can be pulled back through the
    normalization. They default to ones (rows were already unit length).
    """

    images: np.ndarray
    texts: np.ndarray
    image_norms: Optional[np.ndarray] = None
    text_norms: Optional[np.ndarray] = None

    def __post_init__(self):
        images = as_rows(self.images)
        texts = as_rows(self.texts)
        if images.shape[0] == 0 or texts.shape[0] == 0:
            raise DegenerateBatch("batch must hold at least one pair")
        if images.shape != texts.shape:
            raise DimensionMismatch(f"images {images.shape} vs texts {texts.shape}")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "texts", texts)
        for name in ("image_norms", "text_norms"):
            norms = getattr(self, name)
            norms = np.ones(images.shape[0]) if norms is None else np.asarray(norms, float)
            object.__setattr__(self, name, norms)

    @classmethod
    def from_raw(cls, raw_images, raw_texts) -> "PairedBatch":
        raw_images = as_rows(raw_images)
        raw_texts = as_rows(raw_texts)
        return cls(normalize_rows(raw_images), normalize_rows(raw_texts),
                   np.linalg.norm(raw_images, axis=1), np.linalg.norm(raw_texts, axis=1))

    @property
    def size(self) -> int:
        return self.images.shape[0]


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    clip_image_terms: np.ndarray
    clip_text_terms: np.ndarray
    cma_image_terms: np.ndarray
    cma_text_terms: np.ndarray


def _logits(batch: PairedBatch, temperature: Temperature) -> np.ndarray:
    logits = temperature.inverse_scale * cosine_matrix(batch.images, batch.texts)
    if not np.all(np.isfinite(logits)):
        raise NonFiniteSimilarity("similarity logits are not finite")
    return logits


def _row_col_lse(logits):
    return log_sum_exp(logits, axis=1), log_sum_exp(logits, axis=0)


def clip_loss(batch: PairedBatch, temperature: Temperature) -> LossBreakdown:
    """Symmetric image-to-text / text-to-image cross-entropy over the batch.

    The CMA fields of the result are filled with the regularizer terms so a
    single pass yields every per-pair quantity.
    """
    logits = _logits(batch, temperature)
    row_lse, col_lse = _row_col_lse(logits)
    diag = np.diagonal(logits)
    img = row_lse - diag
    txt = col_lse - diag
    total = float(np.sum(img + txt) / (2 * batch.size))
    return LossBreakdown(total, img, txt, -row_lse, -col_lse)


def cma_regularizer(batch: PairedBatch, temperature: Temperature):
    """Per-pair alignment terms ``(image_terms, text_terms)``."""
    logits = _logits(batch, temperature)
    row_lse, col_lse = _row_col_lse(logits)
    return -row_lse, -col_lse


def cma_objective(batch: PairedBatch, config: CmaConfig) -> LossBreakdown:
    parts = clip_loss(batch, config.temperature)
    reg = np.sum(parts.cma_image_terms + parts.cma_text_terms)
    total = parts.total + float(config.lam * reg / (2 * batch.size))
    return LossBreakdown(total, parts.clip_image_terms, parts.clip_text_terms,
                         parts.cma_image_terms, parts.cma_text_terms)


def cma_objective_rewritten(batch: PairedBatch, config: CmaConfig) -> float:
    """The same objective with the regularizer folded into the log-partition:
    each term becomes ``-L[k, k] + (1 - lam) * logsumexp``."""
    logits = _logits(batch, config.temperature)
    row_lse, col_lse = _row_col_lse(logits)
    diag = np.diagonal(logits)
    keep = 1.0 - config.lam
    per_image = -diag + keep * row_lse
    per_text = -diag + keep * col_lse
    return float(np.sum(per_image + per_text) / (2 * batch.size))


def unit_gradients(images, texts, lam: float, inverse_scale: float):
    """Objective value and its gradient w.r.t. unit embeddings and ``1/tau``.

    Returns ``(total, d_images, d_texts, d_inverse_scale)``. This is the shared
    backward pass used by both :func:`loss_gradients` and the encoder model.
    """
    sims = cosine_matrix(images, texts)
    logits = inverse_scale * sims
    if not np.all(np.isfinite(logits)):
        raise NonFiniteSimilarity("similarity logits are not finite")
    b = sims.shape[0]
    row_lse, col_lse = _row_col_lse(logits)
    diag = np.diagonal(logits)
    clip_total = float(np.sum((row_lse - diag) + (col_lse - diag)) / (2 * b))
    total = clip_total + float(lam * np.sum(-row_lse + -col_lse) / (2 * b))

    p_row = np.exp(logits - row_lse[:, None])
    p_col = np.exp(logits - col_lse[None, :])
    d_logits = (1.0 - lam) * (p_row + p_col)
    d_logits[np.diag_indices(b)] -= 2.0
    d_logits /= 2 * b

    d_sims = inverse_scale * d_logits
    d_images = d_sims @ as_rows(texts)
    d_texts = d_sims.T @ as_rows(images)
    d_inverse_scale = float(np.sum(d_logits * sims))
    return total, d_images, d_texts, d_inverse_scale


def sphere_pullback(d_unit, unit, norms):
    """Chain rule through ``u = x / ||x||``: ``dx = (I - u u^T) du / ||x||``."""
    radial = np.sum(d_unit * unit, axis=1, keepdims=True)
    return (d_unit - radial * unit) / np.asarray(norms)[:, None]


def loss_gradients(batch: PairedBatch, config: CmaConfig):
    """Gradient of :func:`cma_objective` total.

    Returns ``(d_images, d_texts, d_log_inverse_scale)`` where the embedding
    gradients are w.r.t. the raw (pre-normalization) vectors described by
    ``batch.image_norms``/``batch.text_norms``. A frozen temperature reports 0.
    """
    temp = config.temperature
    _, d_img, d_txt, d_kappa = unit_gradients(
        batch.images, batch.texts, config.lam, temp.inverse_scale)
    d_images = sphere_pullback(d_img, batch.images, batch.image_norms)
    d_texts = sphere_pullback(d_txt, batch.texts, batch.text_norms)
    d_s = temp.inverse_scale * d_kappa if temp.learnable else 0.0
    return d_images, d_texts, d_s


def log_marginal_estimate(image, texts, temperature: Temperature) -> float:
    """Batch estimate of ``log q(i)`` up to the (never evaluated) vMF constant:
    ``logsumexp_t (i . t) / tau`` over the given texts."""
    texts = as_rows(texts)
    if texts.shape[0] == 0:
        raise EmptyInput("need at least one text")
    image = np.asarray(image, dtype=np.float64)
    sims = cosine_matrix(image[None, :], texts)[0]
    return log_sum_exp(temperature.inverse_scale * sims)
