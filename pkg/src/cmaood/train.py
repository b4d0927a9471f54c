"""Mini-batch fine-tuning of the toy dual encoder with the CMA objective."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .data import SyntheticDataset
from .encoder import EncoderParams, encoder_forward, init_params, objective_and_gradients
from .errors import EmptyInput, InsufficientData
from .losses import Temperature
from .sphere import as_rows, cosine_matrix

DEFAULT_LEARNING_RATES = (1e-4, 1e-5, 1e-6)
DEFAULT_LAMBDAS = (1e-1, 1e-2, 1e-3)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 512
    learning_rate: float = 1e-3
    lam: float = 0.0
    max_epochs: int = 30
    patience: int = 5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    hidden_dim: int = 64
    embed_dim: int = 16
    init_inverse_scale: float = 100.0
    learnable_temperature: bool = True
    pair_with: str = "prototype"   # or "caption": per-sample noisy text features
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 0 or self.learning_rate < 0 or self.lam < 0:
            raise ValueError("max_epochs, learning_rate and lam must be >= 0")
        if self.pair_with not in ("prototype", "caption"):
            raise ValueError("pair_with must be 'prototype' or 'caption'")

    def temperature(self) -> Temperature:
        return Temperature(math.log(self.init_inverse_scale), self.learnable_temperature)


class Adam:
    """Adam with bias correction and optional decoupled weight decay."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.lr, self.beta1, self.beta2 = lr, beta1, beta2
        self.eps, self.weight_decay = eps, weight_decay
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]):
        self.t += 1
        out = {}
        for name, p in params.items():
            g = grads[name]
            m = self.beta1 * self.m.get(name, np.zeros_like(p)) + (1 - self.beta1) * g
            v = self.beta2 * self.v.get(name, np.zeros_like(p)) + (1 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            update = m_hat / (np.sqrt(v_hat) + self.eps)
            if self.weight_decay and name != "log_inverse_scale":
                update = update + self.weight_decay * p
            out[name] = p - self.lr * update
        return out


def accuracy_from_embeddings(image_emb, labels, prototype_emb) -> float:
    """Fraction of rows whose most similar prototype is their label.

    ``np.argmax`` resolves ties to the lowest class index.
    """
    image_emb = as_rows(image_emb)
    labels = np.asarray(labels)
    if image_emb.shape[0] == 0:
        raise EmptyInput("no samples to score")
    pred = np.argmax(cosine_matrix(image_emb, prototype_emb), axis=1)
    return float(np.mean(pred == labels))


def id_accuracy(params: EncoderParams, features, labels, prototype_features) -> float:
    """ID classification accuracy of encoded images against encoded class texts."""
    if as_rows(features).shape[0] == 0:
        raise EmptyInput("no samples to score")
    img = encoder_forward(params, "image", features)
    proto = encoder_forward(params, "text", prototype_features)
    return accuracy_from_embeddings(img, labels, proto)


def epoch_batches(n: int, batch_size: int, rng) -> List[np.ndarray]:
    """Shuffled index batches; a trailing batch smaller than 2 is dropped."""
    order = rng.permutation(n)
    batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    return [b for b in batches if len(b) >= 2]


def training_pairs(dataset: SyntheticDataset, config: TrainConfig):
    if config.pair_with == "caption":
        return dataset.id_train, dataset.id_train_captions
    return dataset.id_train, dataset.id_prototypes[dataset.id_train_labels]


def fit(images, texts, val_features, val_labels, val_prototypes, config: TrainConfig,
        init: EncoderParams = None) -> Tuple[EncoderParams, List[dict]]:
    """Optimize the CMA objective on fixed ``(image, text)`` feature pairs.

    After each epoch the image encoder is scored on the validation split
    against the encoded prototypes; the best snapshot (earliest among equal
    accuracies) is returned after ``patience`` epochs without improvement.
    History holds ``epoch``, ``loss`` (mean batch loss), ``val_acc`` and
    ``batch_losses`` per completed epoch.
    """
    images, texts = as_rows(images), as_rows(texts)
    n = images.shape[0]
    if n < config.batch_size:
        raise InsufficientData(f"{n} training pairs < batch size {config.batch_size}")

    rng = np.random.default_rng(config.seed)
    if init is None:
        init = init_params(images.shape[1], config.hidden_dim, config.embed_dim,
                           rng=rng, temperature=config.temperature(),
                           text_input_dim=texts.shape[1])
    params = init
    optimizer = Adam(config.learning_rate, config.beta1, config.beta2, config.eps,
                     config.weight_decay)
    best, best_acc, since_best = init, -1.0, 0
    history = []
    for epoch in range(1, config.max_epochs + 1):
        losses = []
        for idx in epoch_batches(n, config.batch_size, rng):
            loss, grads = objective_and_gradients(params, images[idx], texts[idx], config.lam)
            losses.append(loss)
            params = params.with_tensors(optimizer.step(params.tensors(), grads))
        acc = id_accuracy(params, val_features, val_labels, val_prototypes)
        history.append({"epoch": epoch, "loss": float(np.mean(losses)),
                        "val_acc": acc, "batch_losses": losses})
        if acc > best_acc:
            best, best_acc, since_best = params, acc, 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break
    return best, history


def train(dataset: SyntheticDataset, config: TrainConfig,
          init: EncoderParams = None) -> Tuple[EncoderParams, List[dict]]:
    """Fine-tune on the ID training split with early stopping on ID validation
    accuracy. Starts from ``init`` (e.g. a :func:`pretrain` result) or a fresh
    seeded initialization."""
    images, texts = training_pairs(dataset, config)
    return fit(images, texts, dataset.id_val, dataset.id_val_labels,
               dataset.id_prototypes, config, init)


def pretrain(dataset: SyntheticDataset, config: TrainConfig) -> Tuple[EncoderParams, List[dict]]:
    """Contrastive pretraining on image/caption pairs from every class.

    This plays the role of the web-scale pretrained model: the text encoder
    sees OoD and candidate concepts here, never during fine-tuning.
    """
    return fit(dataset.pretrain_images, dataset.pretrain_captions, dataset.id_val,
               dataset.id_val_labels, dataset.id_prototypes, config)


@dataclass
class SweepResult:
    config: TrainConfig
    params: EncoderParams
    history: List[dict]

    @property
    def val_acc(self) -> float:
        return max((h["val_acc"] for h in self.history), default=float("nan"))


def sweep(dataset: SyntheticDataset, base: TrainConfig,
          learning_rates: Sequence[float] = DEFAULT_LEARNING_RATES,
          lambdas: Sequence[float] = DEFAULT_LAMBDAS) -> Tuple[SweepResult, List[SweepResult]]:
    """Grid search selecting the run with the best ID validation accuracy.

    Ties go to the earlier grid point (learning rates outer, lambdas inner).
    """
    runs = []
    for lr, lam in itertools.product(learning_rates, lambdas):
        cfg = replace(base, learning_rate=lr, lam=lam)
        params, history = train(dataset, cfg)
        runs.append(SweepResult(cfg, params, history))
    best = runs[0]
    for r in runs[1:]:
        if r.val_acc > best.val_acc:
            best = r
    return best, runs
