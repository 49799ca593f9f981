"""Training: composite loss, step-decay schedule, Adam, and the epoch loop.

The loss is omega * MSE(endpoints) + (1 - omega) * CE(class) + lambda * sum(w^2),
where the L2 term covers convolution kernels and FC weight matrices only.
Frames without a crossing contribute zero to the MSE term (mask weight 0).
"""

import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import tensor as T
from .data import LabeledFrame, augment, center_crop, load_frame, read_manifest
from .network import LYTNet, NetworkConfig, Parameters, build_lytnet
from .tensor import ShapeError, Tensor, no_grad


@dataclass
class TrainConfig:
    omega: float = 0.5                       # loss mixing weight
    weight_decay: float = 1e-5               # lambda of the L2 term
    lr_initial: float = 1e-3
    lr_decay_epochs: Tuple[int, ...] = (150, 400, 650)
    lr_decay_factor: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 8
    epochs: int = 300
    seed: int = 0
    folds: int = 5
    width_multiplier: float = 1.0
    input_height: int = 576
    input_width: int = 768
    augment: bool = True
    flip_prob: float = 0.5
    checkpoint_interval: int = 0             # epochs between checkpoints; 0 = final only
    stop_at_accuracy: Optional[float] = None
    stop_at_loss: Optional[float] = None

    def validate(self):
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError(f"omega must lie in [0,1], got {self.omega}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")
        if self.folds < 2:
            raise ValueError(f"fold count must be at least 2, got {self.folds}")
        return self

    def network_config(self) -> NetworkConfig:
        return NetworkConfig(
            width_multiplier=self.width_multiplier,
            input_height=self.input_height,
            input_width=self.input_width,
        )


def lr_schedule(epoch: int, initial: float = 1e-3,
                decay_epochs: Sequence[int] = (150, 400, 650),
                factor: float = 0.1) -> float:
    """Step decay: ``initial`` scaled by ``factor`` at each epoch threshold."""
    if epoch < 0:
        raise ValueError(f"epoch must be non-negative, got {epoch}")
    lr = initial
    for boundary in decay_epochs:
        if epoch >= boundary:
            lr *= factor
    return lr


def loss(logits: Tensor, endpoints_pred: Tensor, labels, endpoints_true,
         omega: float = 0.5, lam: float = 0.0,
         parameters: Optional[Parameters] = None, crossing_mask=None) -> Tensor:
    """Composite scalar loss over a batch.

    ``crossing_mask`` (N,) of 0/1 masks the MSE term of crossing-free frames;
    the regularizer needs ``parameters`` when ``lam`` > 0.
    """
    mse_term = T.mse(endpoints_pred, endpoints_true, sample_weight=crossing_mask)
    ce_term = T.cross_entropy(logits, labels)
    total = T.add(T.mul(mse_term, omega), T.mul(ce_term, 1.0 - omega))
    if lam > 0.0:
        if parameters is None:
            raise ValueError("lam > 0 requires the parameter collection")
        reg = None
        for _, p in parameters.decay_items():
            sq = T.sum_squares(p)
            reg = sq if reg is None else T.add(reg, sq)
        if reg is not None:
            total = T.add(total, T.mul(reg, lam))
    return total


class AdamState:
    """First/second moment buffers and the shared step counter."""

    def __init__(self, params: Parameters):
        self.m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.step = 0


def adam_step(params: Parameters, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update, in place; missing grads count as zero."""
    state.step += 1
    bc1 = 1.0 - beta1 ** state.step
    bc2 = 1.0 - beta2 ** state.step
    for name, p in params.items():
        g = p.grad
        if g is None:
            continue
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.data.shape} for {name!r}")
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def _batch_arrays(frames: Sequence[LabeledFrame]):
    x = np.stack([f.image for f in frames]).astype(np.float32)
    labels = np.array([f.class_index for f in frames], dtype=np.int64)
    endpoints = np.array([f.endpoints for f in frames], dtype=np.float32)
    mask = np.array([1.0 if f.has_crossing else 0.0 for f in frames], dtype=np.float32)
    return x, labels, endpoints, mask


def _l2_value(params: Parameters) -> float:
    return float(sum(float((t.data.astype(np.float64) ** 2).sum())
                     for _, t in params.decay_items()))


def evaluate_metrics(net: LYTNet, frames: Sequence[LabeledFrame], config: TrainConfig):
    """Inference-mode loss and accuracy over a frame list."""
    n = len(frames)
    correct = 0
    mse_sum = 0.0
    ce_sum = 0.0
    with no_grad():
        for start in range(0, n, config.batch_size):
            chunk = frames[start:start + config.batch_size]
            x, labels, endpoints, mask = _batch_arrays(chunk)
            logits, pred = net.forward(x, training=False)
            correct += int((logits.data.argmax(axis=1) == labels).sum())
            mse_sum += T.mse(pred, endpoints, sample_weight=mask).item() * len(chunk)
            ce_sum += T.cross_entropy(logits, labels).item() * len(chunk)
    mse_mean = mse_sum / n
    ce_mean = ce_sum / n
    total = (config.omega * mse_mean + (1.0 - config.omega) * ce_mean
             + config.weight_decay * _l2_value(net.parameters))
    return {"loss": total, "accuracy": correct / n, "mse": mse_mean, "ce": ce_mean}


def _prepare(frame: LabeledFrame, rng, config: TrainConfig) -> LabeledFrame:
    ch, cw = config.input_height, config.input_width
    if config.augment:
        return augment(frame, rng, ch, cw, config.flip_prob)
    _, h, w = frame.image.shape
    if (h, w) == (ch, cw):
        return frame
    return center_crop(frame, ch, cw)


def train(manifest, config: TrainConfig, base_dir=None,
          weights_out=None, metrics_out=None, progress=None):
    """Run the optimization loop over a manifest.

    Returns (net, metrics) where metrics is one dict per epoch with keys
    epoch / loss / accuracy / lr. Writes LYTW checkpoints and a JSONL metrics
    log when paths are given. Deterministic under config.seed.
    """
    config.validate()
    records = read_manifest(manifest)
    if not records:
        raise ValueError("manifest contains no records")
    if base_dir is None:
        import os

        base_dir = os.path.dirname(os.path.abspath(manifest))
    frames = [load_frame(rec, base_dir) for rec in records]

    rng = np.random.default_rng(config.seed)
    net, params = build_lytnet(config.network_config(), seed=config.seed)
    state = AdamState(params)
    metrics: List[dict] = []

    n = len(frames)
    for epoch in range(config.epochs):
        lr = lr_schedule(epoch, config.lr_initial, config.lr_decay_epochs,
                         config.lr_decay_factor)
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            chunk = [_prepare(frames[i], rng, config) for i in order[start:start + config.batch_size]]
            x, labels, endpoints, mask = _batch_arrays(chunk)
            logits, pred = net.forward(x, training=True)
            batch_loss = loss(logits, pred, labels, endpoints,
                              omega=config.omega, lam=config.weight_decay,
                              parameters=params, crossing_mask=mask)
            params.zero_grad()
            batch_loss.backward()
            adam_step(params, state, lr, config.beta1, config.beta2, config.eps)

        stats = evaluate_metrics(net, frames, config)
        entry = {"epoch": epoch, "loss": stats["loss"],
                 "accuracy": stats["accuracy"], "lr": lr}
        metrics.append(entry)
        if progress is not None:
            progress(entry)
        if (config.checkpoint_interval and weights_out
                and (epoch + 1) % config.checkpoint_interval == 0):
            net.save(weights_out)
        if (config.stop_at_accuracy is not None and config.stop_at_loss is not None
                and entry["accuracy"] >= config.stop_at_accuracy
                and entry["loss"] <= config.stop_at_loss):
            break

    if weights_out:
        net.save(weights_out)
    if metrics_out:
        with open(metrics_out, "w", encoding="utf-8") as f:
            for entry in metrics:
                f.write(json.dumps(entry) + "\n")
    return net, metrics
