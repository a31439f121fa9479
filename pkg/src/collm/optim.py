"""Rectified Adam, cross-entropy loss, and the training loop.

The training recipe: RAdam at learning rate 1e-3, 50 epochs, batch size
32, early stopping on validation macro-F1 with best-weights restoration,
dropout on the hidden FCN layers. A stratified slice of the training
data serves as the validation set; test data is never touched during
training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from collm.data import EmbeddingDataset, PairedDataset, stratified_split
from collm.errors import ConfigError, DataError, NumericsError
from collm.metrics import compute_metrics
from collm.models import ArchitectureSpec, Checkpoint, instantiate
from collm.rng import derive_streams


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    val_fraction: float = 0.1
    patience: int = 5
    dropout: float = 0.2
    seed: int = 0
    precision: str = "f32"

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be positive, got {self.batch_size}")
        if not (0.0 <= self.val_fraction < 0.5):
            raise ConfigError(
                f"validation fraction must be in [0, 0.5), got {self.val_fraction}"
            )
        if self.patience < 0:
            raise ConfigError(f"patience must be >= 0, got {self.patience}")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.precision not in ("f32", "f64"):
            raise ConfigError(f"precision must be f32 or f64, got {self.precision!r}")

    @property
    def dtype(self):
        return np.float32 if self.precision == "f32" else np.float64


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_accuracy: float | None
    val_macro_f1: float | None


def cross_entropy(logits: np.ndarray, labels) -> float:
    """Mean negative log-likelihood of the true class, via log-sum-exp."""
    loss, _ = cross_entropy_with_grad(logits, labels, want_grad=False)
    return loss


def cross_entropy_with_grad(logits: np.ndarray, labels, want_grad: bool = True):
    logits = np.asarray(logits)
    if logits.ndim != 2:
        raise DataError(f"logits must be (B, classes), got {logits.shape}")
    labels = np.asarray(labels)
    if labels.ndim != 1 or len(labels) != logits.shape[0]:
        raise DataError(
            f"labels must be one class id per row, got {labels.shape} "
            f"for logits {logits.shape}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        bad = labels[(labels < 0) | (labels >= logits.shape[1])][0]
        raise DataError(f"label {bad} outside [0, {logits.shape[1]})")
    m = logits.max(axis=1, keepdims=True)
    shifted = logits - m
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True)) + m
    n = logits.shape[0]
    rows = np.arange(n)
    loss = float(np.mean(lse[rows, 0] - logits[rows, labels]))
    if not want_grad:
        return loss, None
    probs = np.exp(logits - lse)
    probs[rows, labels] -= 1.0
    return loss, probs / n


class RAdam:
    """Rectified Adam.

    Moment recurrences are Adam's; the step is rectified once the
    variance of the adaptive learning rate is tractable:

        m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2
        rho_inf = 2/(1-b2) - 1
        rho_t = rho_inf - 2*t*b2^t / (1-b2^t)
        if rho_t > 4:  theta -= lr * r_t * m_hat / (sqrt(v_hat) + eps)
            with r_t = sqrt(((rho_t-4)(rho_t-2)rho_inf) /
                            ((rho_inf-4)(rho_inf-2)rho_t))
        else:          theta -= lr * m_hat

    where m_hat, v_hat are the bias-corrected moments.
    """

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._moments: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        t = self.t
        b1, b2 = self.beta1, self.beta2
        rho_inf = 2.0 / (1.0 - b2) - 1.0
        b2t = b2 ** t
        rho_t = rho_inf - 2.0 * t * b2t / (1.0 - b2t)
        bc1 = 1.0 - b1 ** t
        bc2 = 1.0 - b2t
        rectified = rho_t > 4.0
        if rectified:
            r_t = math.sqrt(
                ((rho_t - 4.0) * (rho_t - 2.0) * rho_inf)
                / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t)
            )
        for name in sorted(params):
            g = grads[name]
            if g is None:
                raise NumericsError(f"no gradient for tensor {name!r}")
            if not np.all(np.isfinite(g)):
                raise NumericsError(f"non-finite gradient in tensor {name!r}")
            theta = params[name]
            if name not in self._moments:
                self._moments[name] = (
                    np.zeros_like(theta), np.zeros_like(theta)
                )
            m, v = self._moments[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / bc1
            if rectified:
                v_hat = v / bc2
                theta -= self.lr * r_t * m_hat / (np.sqrt(v_hat) + self.eps)
            else:
                theta -= self.lr * m_hat


def _dataset_views(dataset):
    if isinstance(dataset, PairedDataset):
        return [dataset.vectors_a, dataset.vectors_b], dataset.labels, dataset.language
    if isinstance(dataset, EmbeddingDataset):
        return [dataset.vectors], dataset.labels, dataset.language
    raise DataError(f"cannot train on {type(dataset).__name__}")


def train(spec: ArchitectureSpec, dataset, cfg: TrainConfig = TrainConfig()):
    """Train the architecture on one language's data.

    Returns the best checkpoint (by validation macro-F1 when a
    validation slice exists, else the final weights) and the per-epoch
    history. Fixed seed means bitwise-identical results.
    """
    xs, labels, language = _dataset_views(dataset)
    dims = [x.shape[1] for x in xs]
    if dims != spec.input_dims():
        raise ConfigError(
            f"dataset dimensions {dims} do not match the architecture's "
            f"{spec.input_dims()}"
        )
    present = np.unique(labels)
    if len(present) < 2:
        raise DataError(
            f"training data contains only class {present.tolist()}; "
            "both classes are required"
        )
    init_rng, split_rng, shuffle_rng, dropout_rng = derive_streams(cfg.seed, 4)
    net = instantiate(spec, dtype=cfg.dtype, dropout_rate=cfg.dropout,
                      init_rng=init_rng)
    train_idx, val_idx = stratified_split(labels, cfg.val_fraction, split_rng)
    xs = [np.asarray(x, dtype=cfg.dtype) for x in xs]
    val_xs = [x[val_idx] for x in xs]
    val_y = labels[val_idx]
    opt = RAdam(lr=cfg.lr)
    history: list[EpochStats] = []
    best_f1 = -np.inf
    best_state = None
    bad_epochs = 0
    for epoch in range(1, cfg.epochs + 1):
        order = train_idx[shuffle_rng.permutation(len(train_idx))]
        loss_sum = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            logits = net.forward([x[batch] for x in xs], training=True,
                                 rng=dropout_rng)
            loss, dlogits = cross_entropy_with_grad(logits, labels[batch])
            if not math.isfinite(loss):
                raise NumericsError(
                    f"non-finite training loss at epoch {epoch}"
                )
            net.backward(dlogits)
            opt.step(net.params(), net.grads())
            loss_sum += loss * len(batch)
        train_loss = loss_sum / len(order)
        val_acc = val_f1 = None
        if len(val_idx):
            logits = net.forward(val_xs, training=False)
            preds = (logits[:, 1] > logits[:, 0]).astype(np.int64)
            report = compute_metrics(val_y, preds)
            val_acc, val_f1 = report.accuracy, report.macro_f1
        history.append(EpochStats(epoch, train_loss, val_acc, val_f1))
        if val_f1 is not None:
            if val_f1 > best_f1:
                best_f1 = val_f1
                best_state = net.state_copy()
                bad_epochs = 0
            else:
                bad_epochs += 1
                if bad_epochs > cfg.patience:
                    break
    if best_state is None:
        best_state = net.state_copy()
    tensors = {k: v.astype(np.float32) for k, v in best_state.items()}
    ckpt = Checkpoint(spec=spec, tensors=tensors, languages=(language,),
                      merge_count=1, seed=cfg.seed)
    return ckpt, history
