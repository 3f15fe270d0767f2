"""Differentiable layers with explicit forward/backward passes.

Each layer caches what its backward pass needs, exposes ``params()`` and
``grads()`` dicts, and reports which parameters are subject to weight decay
via ``weight_keys()``. The transposed convolution is the exact adjoint of
the convolution with the same geometry, so <conv(x), y> == <x, tconv(y)>
holds to rounding error.
"""

import numpy as np

from .. import kernels
from ..errors import ShapeMismatch

INIT_STD = 0.02  # scaled-normal init


class Conv2d:
    def __init__(self, c_in, c_out, kernel, stride, pad, rng, dtype=np.float32):
        self.c_in, self.c_out = c_in, c_out
        self.kernel, self.stride, self.pad = kernel, stride, pad
        self.w = rng.normal(0.0, INIT_STD,
                            (c_out, c_in, kernel, kernel)).astype(dtype)
        self.b = np.zeros(c_out, dtype=dtype)
        self.dw = self.db = None
        self._x = None

    def out_size(self, size):
        return (size + 2 * self.pad - self.kernel) // self.stride + 1

    def forward(self, x, train=False):
        if x.ndim != 4 or x.shape[1] != self.c_in:
            raise ShapeMismatch(f"conv expects [N,{self.c_in},H,W], got {x.shape}")
        self._x = x
        y = kernels.conv_gather(x, self.w, self.stride, self.pad)
        return y + self.b[None, :, None, None]

    def backward(self, dy):
        self.db = dy.sum(axis=(0, 2, 3))
        self.dw = kernels.conv_wgrad(self._x, dy, self.stride, self.pad, self.kernel)
        return kernels.conv_scatter(dy, self.w, self.stride, self.pad,
                                    self._x.shape[2], self._x.shape[3])

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.dw, "b": self.db}

    def weight_keys(self):
        return ("w",)


class TConv2d:
    """Transposed convolution: scatter through a [c_in, c_out, k, k] kernel."""

    def __init__(self, c_in, c_out, kernel, stride, pad, rng, dtype=np.float32):
        self.c_in, self.c_out = c_in, c_out
        self.kernel, self.stride, self.pad = kernel, stride, pad
        self.w = rng.normal(0.0, INIT_STD,
                            (c_in, c_out, kernel, kernel)).astype(dtype)
        self.b = np.zeros(c_out, dtype=dtype)
        self.dw = self.db = None
        self._x = None

    def out_size(self, size):
        return (size - 1) * self.stride - 2 * self.pad + self.kernel

    def forward(self, x, train=False):
        if x.ndim != 4 or x.shape[1] != self.c_in:
            raise ShapeMismatch(f"tconv expects [N,{self.c_in},H,W], got {x.shape}")
        self._x = x
        y = kernels.conv_scatter(x, self.w, self.stride, self.pad,
                                 self.out_size(x.shape[2]), self.out_size(x.shape[3]))
        return y + self.b[None, :, None, None]

    def backward(self, dy):
        self.db = dy.sum(axis=(0, 2, 3))
        self.dw = kernels.conv_wgrad(dy, self._x, self.stride, self.pad, self.kernel)
        return kernels.conv_gather(dy, self.w, self.stride, self.pad)

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.dw, "b": self.db}

    def weight_keys(self):
        return ("w",)


class BatchNorm2d:
    def __init__(self, channels, momentum=0.9, eps=1e-5, dtype=np.float32):
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.dgamma = self.dbeta = None
        self._cache = None

    def forward(self, x, train=False):
        if x.shape[1] != self.channels:
            raise ShapeMismatch(f"batchnorm expects {self.channels} channels")
        if train:
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            self.running_mean[...] = (self.momentum * self.running_mean
                                      + (1.0 - self.momentum) * mean)
            self.running_var[...] = (self.momentum * self.running_var
                                     + (1.0 - self.momentum) * var)
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
        self._cache = (xhat, inv_std, train)
        return self.gamma[None, :, None, None] * xhat + self.beta[None, :, None, None]

    def backward(self, dy):
        xhat, inv_std, train = self._cache
        self.dgamma = (dy * xhat).sum(axis=(0, 2, 3))
        self.dbeta = dy.sum(axis=(0, 2, 3))
        g = (self.gamma * inv_std)[None, :, None, None]
        if not train:
            return dy * g
        m = dy.shape[0] * dy.shape[2] * dy.shape[3]
        sum_dy = self.dbeta[None, :, None, None]
        sum_dy_xhat = self.dgamma[None, :, None, None]
        return (g / m) * (m * dy - sum_dy - xhat * sum_dy_xhat)

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta,
                "running_mean": self.running_mean, "running_var": self.running_var}

    def grads(self):
        return {"gamma": self.dgamma, "beta": self.dbeta}

    def weight_keys(self):
        return ()


class LeakyReLU:
    def __init__(self, slope=0.2):
        self.slope = slope
        self._mask = None

    def forward(self, x, train=False):
        self._mask = x > 0
        return np.where(self._mask, x, self.slope * x)

    def backward(self, dy):
        return np.where(self._mask, dy, self.slope * dy)

    def params(self):
        return {}

    def grads(self):
        return {}

    def weight_keys(self):
        return ()
