"""Weighted reconstruction training of the autoencoder.

Two per-pixel weighting schemes fight the heavy class imbalance (occupied
pixels are a few percent of the data):

* inverse class ratio: alpha_i = 1 - B_c/B for pixel i's class c. With one
  rare class this converges to weight 1/2 on the two common classes and 1
  on the rare one.
* independent class MSE: alpha_i = 1/B_c, so each present class contributes
  exactly its own mean squared error to the total.

Counts are taken per sample from that sample's label image. The objective
adds lambda * sum(w^2) over convolution kernels, and the optimizer is Adam.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import SplitData, apply_dihedral, draw_dihedral, label_classes
from .errors import DegenerateCounts, Divergence, ShapeMismatch
from .grid import DEFAULT_TAU, FREE, OCCUPIED, UNKNOWN
from .nn.model import AeModel, head_to_prob

INVERSE_CLASS_RATIO = "inverse_class_ratio"
INDEPENDENT_CLASS_MSE = "independent_class_mse"
SCHEMES = (INVERSE_CLASS_RATIO, INDEPENDENT_CLASS_MSE)


@dataclass
class LossConfig:
    scheme: str = INVERSE_CLASS_RATIO
    lam: float = 1e-4
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 16
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    augment: bool = True

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2 (batch norm)")


def class_weights_inverse_ratio(counts):
    """(w_free, w_unknown, w_occupied) = 1 - B_c/B."""
    b_f, b_u, b_o, b = counts
    if b <= 0:
        raise DegenerateCounts("label has no pixels")
    if b_f + b_u + b_o != b:
        raise DegenerateCounts("class counts do not sum to the pixel count")
    return (1.0 - b_f / b, 1.0 - b_u / b, 1.0 - b_o / b)


def class_weights_independent(counts):
    """(w_free, w_unknown, w_occupied) = 1/B_c, 0 for absent classes."""
    b_f, b_u, b_o, b = counts
    if b <= 0:
        raise DegenerateCounts("label has no pixels")
    if b_f + b_u + b_o != b:
        raise DegenerateCounts("class counts do not sum to the pixel count")
    return tuple(1.0 / c if c > 0 else 0.0 for c in (b_f, b_u, b_o))


def pixel_weights(scheme: str, counts, classes: np.ndarray) -> np.ndarray:
    """Per-pixel alpha image from class counts and a class map."""
    if scheme == INVERSE_CLASS_RATIO:
        w_f, w_u, w_o = class_weights_inverse_ratio(counts)
    elif scheme == INDEPENDENT_CLASS_MSE:
        w_f, w_u, w_o = class_weights_independent(counts)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    alpha = np.empty(classes.shape, dtype=np.float64)
    alpha[classes == FREE] = w_f
    alpha[classes == UNKNOWN] = w_u
    alpha[classes == OCCUPIED] = w_o
    return alpha


def weighted_loss(pred, label, alpha, weight_arrays, lam):
    """Weighted squared error plus L2: returns (loss, d loss / d pred)."""
    if pred.shape != label.shape or pred.shape != alpha.shape:
        raise ShapeMismatch("pred, label and alpha shapes differ")
    diff = pred - label
    loss = float(np.sum(alpha * diff * diff))
    loss += lam * sum(float((w ** 2).sum()) for w in weight_arrays)
    return loss, 2.0 * alpha * diff


class Adam:
    def __init__(self, lr, beta1=0.5, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m, self.v = {}, {}
        self.t = 0

    def step(self, named_params, grads):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for name, arr in named_params:
            g = grads.get(name)
            if g is None:
                continue
            m = self.m.setdefault(name, np.zeros_like(arr, dtype=np.float64))
            v = self.v.setdefault(name, np.zeros_like(arr, dtype=np.float64))
            m[...] = self.beta1 * m + (1.0 - self.beta1) * g
            v[...] = self.beta2 * v + (1.0 - self.beta2) * g * g
            arr -= (self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)).astype(arr.dtype)


def _epoch_metrics(sq_sums, counts):
    return tuple(float(s / c) if c else float("nan")
                 for s, c in zip(sq_sums, counts))


def train(model: AeModel, data: SplitData, loss_cfg: LossConfig,
          train_cfg: TrainConfig, log_path=None) -> list:
    """Train in place; returns one history row per epoch.

    Raises Divergence if the loss goes non-finite; the model keeps the last
    finite parameter state (the offending update is never applied).
    """
    n = len(data)
    if n == 0:
        raise DegenerateCounts("training split is empty")
    side = data.inputs.shape[1]
    opt = Adam(train_cfg.lr, train_cfg.beta1, train_cfg.beta2, train_cfg.eps)
    named = [(name, arr) for name, arr, _ in model.parameters()]
    weight_names = {name for name, _, is_w in model.parameters() if is_w}
    history = []

    for epoch in range(train_cfg.epochs):
        order = np.random.default_rng([train_cfg.seed, epoch]).permutation(n)
        ep_loss = 0.0
        sq = [0.0, 0.0, 0.0]
        cnt = [0, 0, 0]
        n_batches = 0
        for start in range(0, n, train_cfg.batch_size):
            idx = order[start:start + train_cfg.batch_size]
            if len(idx) < 2:
                continue  # batch norm needs at least two samples
            xb = np.empty((len(idx), 1, side, side), dtype=np.float32)
            yb = np.empty((len(idx), 1, side, side), dtype=np.float32)
            alpha = np.empty((len(idx), 1, side, side), dtype=np.float64)
            for k, i in enumerate(idx):
                x, y = data.inputs[i], data.labels[i]
                if train_cfg.augment:
                    rng = np.random.default_rng([train_cfg.seed, epoch, int(i)])
                    elem = draw_dihedral(rng)
                    x = apply_dihedral(x, *elem)
                    y = apply_dihedral(y, *elem)
                xb[k, 0] = x
                yb[k, 0] = y
                classes = label_classes(y, loss_cfg.tau)
                alpha[k, 0] = pixel_weights(loss_cfg.scheme,
                                            tuple(data.counts[i]), classes)

            logits = model.forward(xb, train=True)
            pred = head_to_prob(logits)
            loss, dpred = weighted_loss(pred, yb.astype(np.float64),
                                        alpha / len(idx),
                                        model.weight_arrays(), loss_cfg.lam)
            if not np.isfinite(loss):
                raise Divergence(
                    f"loss became {loss} at epoch {epoch}; model holds the "
                    f"last finite state")
            dlogits = (dpred * (1.0 - pred ** 2) / 2.0).astype(np.float32)
            model.backward(dlogits)
            grads = model.gradients()
            if loss_cfg.lam:
                for name, arr, is_w in model.parameters():
                    if is_w:
                        grads[name] = grads[name] + 2.0 * loss_cfg.lam * arr
            opt.step(named, grads)

            ep_loss += loss
            n_batches += 1
            classes_b = label_classes(yb, loss_cfg.tau)
            err = (pred - yb) ** 2
            for j, cls in enumerate((FREE, UNKNOWN, OCCUPIED)):
                mask = classes_b == cls
                sq[j] += float(err[mask].sum())
                cnt[j] += int(mask.sum())

        free_mse, unknown_mse, occupied_mse = _epoch_metrics(sq, cnt)
        history.append({
            "epoch": epoch,
            "loss": ep_loss / max(n_batches, 1),
            "free_mse": free_mse,
            "unknown_mse": unknown_mse,
            "occupied_mse": occupied_mse,
        })

    if log_path is not None:
        with open(log_path, "w", newline="") as f:
            writer = csv.DictWriter(
                f, fieldnames=["epoch", "loss", "free_mse", "unknown_mse",
                               "occupied_mse"])
            writer.writeheader()
            writer.writerows(history)
    return history
