"""Toy dual encoder: one tanh hidden layer per modality, then L2 normalization."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict

import numpy as np

from .errors import DimensionMismatch, ZeroVector
from .losses import Temperature, sphere_pullback, unit_gradients
from .sphere import ZERO_NORM, EmbeddingSet, as_rows

MODALITIES = ("image", "text")
TENSOR_NAMES = ("W1", "b1", "W2", "b2")


@dataclass(frozen=True)
class ModalityParams:
    W1: np.ndarray  # h x q
    b1: np.ndarray  # h
    W2: np.ndarray  # d x h
    b2: np.ndarray  # d

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def output_dim(self) -> int:
        return self.W2.shape[0]


@dataclass(frozen=True)
class EncoderParams:
    image: ModalityParams
    text: ModalityParams
    temperature: Temperature = Temperature()

    def __post_init__(self):
        if self.image.output_dim != self.text.output_dim:
            raise DimensionMismatch("image and text encoders disagree on output dim")

    def modality(self, name: str) -> ModalityParams:
        if name not in MODALITIES:
            raise ValueError(f"unknown modality {name!r}")
        return getattr(self, name)

    def tensors(self) -> Dict[str, np.ndarray]:
        """Flat ``{"image.W1": ..., "text.b2": ..., "log_inverse_scale": ...}``."""
        out = {}
        for m in MODALITIES:
            p = getattr(self, m)
            for t in TENSOR_NAMES:
                out[f"{m}.{t}"] = getattr(p, t)
        out["log_inverse_scale"] = np.array(self.temperature.log_inverse_scale)
        return out

    def with_tensors(self, tensors: Dict[str, np.ndarray]) -> "EncoderParams":
        mods = {m: ModalityParams(*(np.asarray(tensors[f"{m}.{t}"], dtype=np.float64)
                                    for t in TENSOR_NAMES))
                for m in MODALITIES}
        temp = self.temperature.replace(float(tensors["log_inverse_scale"]))
        return EncoderParams(mods["image"], mods["text"], temp)


def init_params(input_dim: int, hidden_dim: int = 64, embed_dim: int = 16,
                rng=None, temperature: Temperature = Temperature(),
                text_input_dim: int = None) -> EncoderParams:
    """Gaussian fan-in initialization, zero biases."""
    rng = np.random.default_rng(rng)
    dims = {"image": input_dim, "text": text_input_dim or input_dim}
    mods = {}
    for m in MODALITIES:
        q = dims[m]
        mods[m] = ModalityParams(
            rng.standard_normal((hidden_dim, q)) / np.sqrt(q),
            np.zeros(hidden_dim),
            rng.standard_normal((embed_dim, hidden_dim)) / np.sqrt(hidden_dim),
            np.zeros(embed_dim),
        )
    return EncoderParams(mods["image"], mods["text"], temperature)


def _forward(p: ModalityParams, x: np.ndarray):
    x = as_rows(x)
    if x.shape[1] != p.input_dim:
        raise DimensionMismatch(f"features have dim {x.shape[1]}, encoder expects {p.input_dim}")
    hidden = np.tanh(x @ p.W1.T + p.b1)
    z = hidden @ p.W2.T + p.b2
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms <= ZERO_NORM):
        raise ZeroVector("encoder output has (near-)zero norm")
    return z / norms[:, None], (x, hidden, norms)


def _backward(p: ModalityParams, cache, unit, d_unit) -> ModalityParams:
    x, hidden, norms = cache
    dz = sphere_pullback(d_unit, unit, norms)
    dh = dz @ p.W2
    dpre = dh * (1.0 - hidden ** 2)
    return ModalityParams(dpre.T @ x, dpre.sum(axis=0), dz.T @ hidden, dz.sum(axis=0))


def encoder_forward(params: EncoderParams, modality: str, features,
                    labels=None) -> EmbeddingSet:
    """Encode a batch of raw features into unit embeddings."""
    unit, _ = _forward(params.modality(modality), features)
    return EmbeddingSet(unit, labels)


def objective_and_gradients(params: EncoderParams, image_features, text_features,
                            lam: float):
    """CMA objective of the encoded pairs and its gradient w.r.t. every tensor.

    Returns ``(total, grads)`` with ``grads`` keyed like
    :meth:`EncoderParams.tensors`. The temperature gradient is zero when it is
    frozen.
    """
    img_unit, img_cache = _forward(params.image, image_features)
    txt_unit, txt_cache = _forward(params.text, text_features)
    temp = params.temperature
    total, d_img, d_txt, d_kappa = unit_gradients(img_unit, txt_unit, lam,
                                                  temp.inverse_scale)
    grads = {}
    for name, p, cache, unit, du in (("image", params.image, img_cache, img_unit, d_img),
                                     ("text", params.text, txt_cache, txt_unit, d_txt)):
        g = _backward(p, cache, unit, du)
        for t in TENSOR_NAMES:
            grads[f"{name}.{t}"] = getattr(g, t)
    d_s = temp.inverse_scale * d_kappa if temp.learnable else 0.0
    grads["log_inverse_scale"] = np.array(d_s)
    return total, grads


def freeze_temperature(params: EncoderParams, frozen: bool = True) -> EncoderParams:
    return replace(params, temperature=replace(params.temperature, learnable=not frozen))
