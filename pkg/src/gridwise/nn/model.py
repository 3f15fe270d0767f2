"""The convolutional autoencoder: strided conv encoder, mirrored
transposed-conv decoder, and a stride-1 convolution head that cleans up
deconvolution checkerboard artifacts and reduces to one logits channel.

Every encoder/decoder stage is conv (kernel 4, stride 2, pad 1) ->
batch norm -> LeakyReLU(0.2); the head (kernel 3, stride 1, pad 1) has no
normalization or activation so the output stays an unbounded log-odds map.
Logits convert to [-1, 1] occupancy values via tanh(x/2), which matches
2*sigmoid(x) - 1, so predictions fuse directly into log-odds grids.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch, VersionMismatch
from .layers import BatchNorm2d, Conv2d, LeakyReLU, TConv2d

FULL_CHANNELS = (16, 32, 64, 128)
DESK_CHANNELS = (8, 16, 32, 64)


@dataclass
class AeConfig:
    side: int = 64
    in_channels: int = 1
    channels: tuple = DESK_CHANNELS
    leaky_slope: float = 0.2
    dtype: str = "float32"

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        if self.side % (2 ** len(self.channels)) != 0:
            raise ShapeMismatch(
                f"side {self.side} not divisible by 2^{len(self.channels)}")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    def to_json(self) -> dict:
        return {"side": self.side, "in_channels": self.in_channels,
                "channels": list(self.channels),
                "leaky_slope": self.leaky_slope, "dtype": self.dtype}

    @classmethod
    def from_json(cls, obj) -> "AeConfig":
        obj = dict(obj)
        obj["channels"] = tuple(obj["channels"])
        return cls(**obj)


def head_to_prob(logits):
    """Logits to [-1, 1] occupancy values: tanh(x/2) == 2*sigmoid(x) - 1."""
    return np.tanh(np.asarray(logits) / 2.0)


class AeModel:
    def __init__(self, config: AeConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        dt = config.np_dtype
        slope = config.leaky_slope
        self.layers = []  # (name, layer)

        c_prev = config.in_channels
        for i, c in enumerate(config.channels):
            self.layers.append((f"enc{i}.conv", Conv2d(c_prev, c, 4, 2, 1, rng, dt)))
            self.layers.append((f"enc{i}.bn", BatchNorm2d(c, dtype=dt)))
            self.layers.append((f"enc{i}.act", LeakyReLU(slope)))
            c_prev = c
        dec_out = list(config.channels[:-1][::-1]) + [config.channels[0]]
        for i, c in enumerate(dec_out):
            self.layers.append((f"dec{i}.tconv", TConv2d(c_prev, c, 4, 2, 1, rng, dt)))
            self.layers.append((f"dec{i}.bn", BatchNorm2d(c, dtype=dt)))
            self.layers.append((f"dec{i}.act", LeakyReLU(slope)))
            c_prev = c
        self.layers.append(("head", Conv2d(c_prev, 1, 3, 1, 1, rng, dt)))

    def forward(self, x, train=False):
        cfg = self.config
        if x.ndim != 4 or x.shape[1] != cfg.in_channels or x.shape[2] != x.shape[3]:
            raise ShapeMismatch(f"expected [N,{cfg.in_channels},S,S], got {x.shape}")
        if x.shape[2] != cfg.side:
            raise ShapeMismatch(f"model is built for side {cfg.side}, "
                                f"got {x.shape[2]}")
        out = np.ascontiguousarray(x, dtype=cfg.np_dtype)
        for _, layer in self.layers:
            out = layer.forward(out, train=train)
        return out

    def backward(self, dlogits):
        grad = dlogits
        for _, layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def parameters(self):
        """Yield (name, array, is_weight) in a stable order."""
        for lname, layer in self.layers:
            wkeys = layer.weight_keys()
            for pname, arr in layer.params().items():
                yield f"{lname}.{pname}", arr, pname in wkeys

    def gradients(self):
        """name -> gradient array for every parameter that has one."""
        out = {}
        for lname, layer in self.layers:
            for pname, arr in layer.grads().items():
                out[f"{lname}.{pname}"] = arr
        return out

    def weight_arrays(self):
        return [arr for _, arr, is_w in self.parameters() if is_w]

    def state_copy(self):
        return {name: arr.copy() for name, arr, _ in self.parameters()}

    def load_state(self, state):
        for name, arr, _ in self.parameters():
            arr[...] = state[name]


# ---------------------------------------------------------------------------
# persistence: magic "AENN", version, layer table, then f32 blobs

_MAGIC = b"AENN"
_VERSION = 1


def save_params(model: AeModel, path) -> None:
    entries = [(name, arr) for name, arr, _ in model.parameters()]
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", _VERSION, len(entries)))
        for name, arr in entries:
            blob = name.encode()
            f.write(struct.pack("<H", len(blob)))
            f.write(blob)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        for _, arr in entries:
            f.write(arr.astype("<f4").tobytes())


def load_params(model: AeModel, path) -> None:
    """Load parameters saved by save_params into a matching architecture."""
    with open(path, "rb") as f:
        data = f.read()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(data):
            raise VersionMismatch(f"{path}: truncated parameter file")
        chunk = data[off:off + n]
        off += n
        return chunk

    if take(4) != _MAGIC:
        raise VersionMismatch(f"{path}: bad magic")
    version, count = struct.unpack("<II", take(8))
    if version != _VERSION:
        raise VersionMismatch(f"{path}: unsupported version {version}")
    table = []
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = take(nlen).decode()
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        table.append((name, shape))

    own = {name: arr for name, arr, _ in model.parameters()}
    if len(own) != count:
        raise ShapeMismatch(
            f"{path}: file has {count} parameters, model has {len(own)}")
    loaded = {}
    for name, shape in table:
        n = int(np.prod(shape)) if shape else 1
        raw = np.frombuffer(take(4 * n), dtype="<f4").reshape(shape)
        loaded[name] = raw
    if off != len(data):
        raise VersionMismatch(f"{path}: {len(data) - off} trailing bytes")
    for name, raw in loaded.items():
        if name not in own:
            raise ShapeMismatch(f"{path}: unknown parameter {name!r}")
        if own[name].shape != raw.shape:
            raise ShapeMismatch(
                f"{path}: {name} has shape {raw.shape}, model expects "
                f"{own[name].shape}")
    for name, raw in loaded.items():
        own[name][...] = raw.astype(own[name].dtype)
