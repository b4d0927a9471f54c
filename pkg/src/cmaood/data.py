"""Synthetic paired-modality data with disjoint ID, OoD and candidate classes.

Each class owns a latent direction on the unit sphere. Images are a fixed random
linear map of that direction plus Gaussian noise; the class's canonical text
feature is an independent linear map of the same direction without noise.
Noisy per-sample captions use the text map plus text noise.

A separate pretraining split covers every class (including OoD and candidate
classes) with image/caption pairs, standing in for web-scale pretraining.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import InvalidSpec


@dataclass(frozen=True)
class SyntheticSpec:
    latent_dim: int = 16
    input_dim: int = 32
    num_id_classes: int = 16
    num_ood_classes: int = 16
    num_candidate_classes: int = 200
    train_per_class: int = 100
    val_per_class: int = 20
    test_per_class: int = 50
    pretrain_per_class: int = 20
    noise_sigma_image: float = 1.0
    noise_sigma_text: float = 0.5
    seed: int = 0

    def __post_init__(self):
        counts = ("latent_dim", "input_dim", "num_id_classes", "num_ood_classes",
                  "num_candidate_classes", "train_per_class", "val_per_class",
                  "test_per_class")
        for name in counts:
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidSpec(f"{name} must be a positive integer, got {value!r}")
        if int(self.pretrain_per_class) != self.pretrain_per_class or self.pretrain_per_class < 0:
            raise InvalidSpec("pretrain_per_class must be a non-negative integer")
        if self.latent_dim < 2:
            raise InvalidSpec("latent_dim must be >= 2")
        for name in ("noise_sigma_image", "noise_sigma_text"):
            if not getattr(self, name) >= 0:
                raise InvalidSpec(f"{name} must be >= 0")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidSpec("seed must fit in an unsigned 64-bit integer")

    @property
    def num_classes(self) -> int:
        return self.num_id_classes + self.num_ood_classes + self.num_candidate_classes


@dataclass
class SyntheticDataset:
    spec: SyntheticSpec
    image_map: np.ndarray          # q x p
    text_map: np.ndarray           # q x p
    latent: np.ndarray             # num_classes x p, rows in [ID | OoD | candidate] order
    id_train: np.ndarray
    id_train_labels: np.ndarray
    id_train_captions: np.ndarray  # noisy per-sample text features
    id_val: np.ndarray
    id_val_labels: np.ndarray
    id_test: np.ndarray
    id_test_labels: np.ndarray
    ood_test: np.ndarray
    ood_test_labels: np.ndarray    # indices into the OoD class list
    pretrain_images: np.ndarray    # every class (ID, OoD, candidate), noisy captions
    pretrain_captions: np.ndarray
    pretrain_labels: np.ndarray    # global class index
    id_prototypes: np.ndarray
    ood_prototypes: np.ndarray
    candidate_prototypes: np.ndarray
    id_names: List[str] = field(default_factory=list)
    ood_names: List[str] = field(default_factory=list)
    candidate_names: List[str] = field(default_factory=list)

    def latent_for(self, group: str) -> np.ndarray:
        c, o = self.spec.num_id_classes, self.spec.num_ood_classes
        return {"id": self.latent[:c], "ood": self.latent[c:c + o],
                "candidate": self.latent[c + o:]}[group]


def class_names(prefix: str, n: int) -> List[str]:
    width = max(3, len(str(n - 1)))
    return [f"{prefix}_{k:0{width}d}" for k in range(n)]


def _sample(rng, mapping, latent, per_class, sigma):
    n_classes = latent.shape[0]
    labels = np.repeat(np.arange(n_classes), per_class)
    means = latent[labels] @ mapping.T
    noise = rng.standard_normal(means.shape)
    return means + sigma * noise, labels


def generate_synthetic(spec: SyntheticSpec) -> SyntheticDataset:
    """Draw a dataset; identical specs give bit-identical output."""
    rng = np.random.default_rng(spec.seed)
    p, q = spec.latent_dim, spec.input_dim
    image_map = rng.standard_normal((q, p))
    text_map = rng.standard_normal((q, p))
    latent = rng.standard_normal((spec.num_classes, p))
    latent /= np.linalg.norm(latent, axis=1, keepdims=True)

    c, o = spec.num_id_classes, spec.num_ood_classes
    id_latent, ood_latent, cand_latent = latent[:c], latent[c:c + o], latent[c + o:]
    s_img = spec.noise_sigma_image

    id_train, train_labels = _sample(rng, image_map, id_latent, spec.train_per_class, s_img)
    captions, _ = _sample(rng, text_map, id_latent, spec.train_per_class,
                          spec.noise_sigma_text)
    id_val, val_labels = _sample(rng, image_map, id_latent, spec.val_per_class, s_img)
    id_test, test_labels = _sample(rng, image_map, id_latent, spec.test_per_class, s_img)
    ood_test, ood_labels = _sample(rng, image_map, ood_latent, spec.test_per_class, s_img)
    pre_images, pre_labels = _sample(rng, image_map, latent, spec.pretrain_per_class, s_img)
    pre_captions, _ = _sample(rng, text_map, latent, spec.pretrain_per_class,
                              spec.noise_sigma_text)

    return SyntheticDataset(
        spec=spec, image_map=image_map, text_map=text_map, latent=latent,
        id_train=id_train, id_train_labels=train_labels, id_train_captions=captions,
        id_val=id_val, id_val_labels=val_labels,
        id_test=id_test, id_test_labels=test_labels,
        ood_test=ood_test, ood_test_labels=ood_labels,
        pretrain_images=pre_images, pretrain_captions=pre_captions,
        pretrain_labels=pre_labels,
        id_prototypes=id_latent @ text_map.T,
        ood_prototypes=ood_latent @ text_map.T,
        candidate_prototypes=cand_latent @ text_map.T,
        id_names=class_names("id", c), ood_names=class_names("ood", o),
        candidate_names=class_names("cand", spec.num_candidate_classes),
    )

