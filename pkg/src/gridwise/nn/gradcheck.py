"""Finite-difference verification of the analytic gradients.

Runs the full training objective (weighted squared error on tanh(x/2)
outputs plus L2 on the kernel weights) through the model twice per
parameter element with central differences and compares against one
analytic backward pass. Meant for float64 models at tiny sizes.

Caveat: LeakyReLU is non-smooth at 0 and batch norm amplifies the probe
step by 1/std, so a batch that parks a pre-activation within ~1e-4 of the
kink makes the central difference straddle it and report a false mismatch.
Use a batch whose pre-activations stay clear of 0 (or shrink h).
"""

import numpy as np

from .model import AeModel, head_to_prob


def _loss(model: AeModel, x, labels, alpha, lam):
    logits = model.forward(x, train=True)
    pred = head_to_prob(logits)
    data = float(np.sum(alpha * (pred - labels) ** 2)) / x.shape[0]
    reg = lam * sum(float((w ** 2).sum()) for w in model.weight_arrays())
    return data + reg, pred


def analytic_gradients(model: AeModel, x, labels, alpha, lam):
    """One forward/backward pass; returns (loss, {name: grad})."""
    loss, pred = _loss(model, x, labels, alpha, lam)
    dpred = 2.0 * alpha * (pred - labels) / x.shape[0]
    dlogits = dpred * (1.0 - pred ** 2) / 2.0
    model.backward(dlogits.astype(x.dtype))
    grads = model.gradients()
    weights = {name for name, _, is_w in model.parameters() if is_w}
    full = {}
    for name, arr, _ in model.parameters():
        if name not in grads:
            continue  # running statistics carry no gradient
        g = grads[name].astype(np.float64).copy()
        if name in weights:
            g += 2.0 * lam * arr
        full[name] = g
    return loss, full


def gradient_check(model: AeModel, x, labels, alpha, lam=1e-4, h=1e-5):
    """Max relative error between analytic and central-difference gradients
    over every trainable parameter element."""
    _, analytic = analytic_gradients(model, x, labels, alpha, lam)
    worst = 0.0
    params = {name: arr for name, arr, _ in model.parameters()}
    for name, grad in analytic.items():
        arr = params[name]
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up, _ = _loss(model, x, labels, alpha, lam)
            flat[i] = keep - h
            down, _ = _loss(model, x, labels, alpha, lam)
            flat[i] = keep
            numeric = (up - down) / (2.0 * h)
            denom = max(abs(gflat[i]), abs(numeric), 1e-6)
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst
