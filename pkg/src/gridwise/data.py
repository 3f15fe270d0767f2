"""Training pairs: rasterized scans matched with label patches, dihedral
augmentation, class-pixel accounting, and on-disk dataset format.

Labels stay continuous: a log-odds patch maps to y = tanh(l/2) in [-1, 1].
Class membership (free / unknown / occupied) for loss weighting is taken
from the stored float32 label image by thresholding at +-tanh(tau/2), which
keeps the counts exactly consistent with what the training loop recomputes.

On-disk layout: ``manifest.json`` plus one ``<split>.f32`` blob per split,
little-endian float32, row-major [N, 2, side, side] with channel 0 the
input image and channel 1 the label.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateSplit, LengthMismatch
from .grid import DEFAULT_TAU, FREE, OCCUPIED, OccupancyGrid, Pose2D
from .sensors import DEFAULT_V_THRESH, filter_moving, rasterize


def label_from_grid(patch: OccupancyGrid) -> np.ndarray:
    """Log-odds patch to a float32 label image in [-1, 1]."""
    return np.tanh(patch.cells / 2.0).astype(np.float32)


def label_classes(label: np.ndarray, tau: float = DEFAULT_TAU) -> np.ndarray:
    """Per-pixel class of a [-1, 1] label image; boundaries read unknown."""
    thresh = math.tanh(tau / 2.0)
    out = np.zeros(label.shape, dtype=np.int8)
    out[label < -thresh] = FREE
    out[label > thresh] = OCCUPIED
    return out


def class_counts(classes: np.ndarray) -> tuple:
    """(B_f, B_u, B_o, B) pixel counts of a class image."""
    b_f = int(np.count_nonzero(classes == FREE))
    b_o = int(np.count_nonzero(classes == OCCUPIED))
    b = classes.size
    return b_f, b - b_f - b_o, b_o, b


@dataclass
class PatchPair:
    """One training sample: input image, label image, provenance."""

    input: np.ndarray   # float32 {-1, +1} [side, side]
    label: np.ndarray   # float32 [-1, 1] [side, side]
    pose: Pose2D
    counts: tuple       # (B_f, B_u, B_o, B)
    world_seed: int

    def __post_init__(self):
        if self.input.shape != self.label.shape:
            raise ValueError("input and label sides differ")
        if sum(self.counts[:3]) != self.counts[3] or self.counts[3] != self.label.size:
            raise ValueError("inconsistent class counts")


def make_pairs(scans: list, label_patches: list, trajectory,
               world_seed: int, tau: float = DEFAULT_TAU,
               v_thresh: float = DEFAULT_V_THRESH) -> list:
    """Pair motion-filtered, rasterized scans with label patches, 1:1."""
    if not (len(scans) == len(label_patches) == len(trajectory)):
        raise LengthMismatch(
            f"{len(scans)} scans, {len(label_patches)} labels, "
            f"{len(trajectory)} poses")
    pairs = []
    for scan, patch, pose in zip(scans, label_patches, trajectory.poses):
        side = patch.width
        window = side * patch.resolution
        image = rasterize(filter_moving(scan, v_thresh), side, window)
        label = label_from_grid(patch)
        counts = class_counts(label_classes(label, tau))
        pairs.append(PatchPair(image.normalized(), label, pose, counts, world_seed))
    return pairs


# ---------------------------------------------------------------------------
# augmentation: the dihedral group of the square

def apply_dihedral(a: np.ndarray, quarter_turns: int, flip_h: bool,
                   flip_v: bool) -> np.ndarray:
    """Rotate by multiples of 90 degrees, then optional horizontal and
    vertical flips. Works on [H, W] or [..., H, W] arrays."""
    out = np.rot90(a, quarter_turns, axes=(-2, -1))
    if flip_h:
        out = np.flip(out, axis=-1)
    if flip_v:
        out = np.flip(out, axis=-2)
    return np.ascontiguousarray(out)


def draw_dihedral(rng) -> tuple:
    return int(rng.integers(0, 4)), bool(rng.random() < 0.5), bool(rng.random() < 0.5)


def augment(pair: PatchPair, rng) -> PatchPair:
    """Apply one random dihedral element to input AND label; counts are a
    pixel permutation away, hence unchanged."""
    k, fh, fv = draw_dihedral(rng)
    return PatchPair(apply_dihedral(pair.input, k, fh, fv),
                     apply_dihedral(pair.label, k, fh, fv),
                     pair.pose, pair.counts, pair.world_seed)


# ---------------------------------------------------------------------------
# persistence

@dataclass
class SplitData:
    inputs: np.ndarray    # [N, side, side] float32
    labels: np.ndarray    # [N, side, side] float32
    counts: np.ndarray    # [N, 4] int64
    world_seeds: np.ndarray
    poses: list

    def __len__(self):
        return self.inputs.shape[0]


def split_save(pairs: list, train_fraction: float, out_dir,
               extra_meta: dict = None) -> dict:
    """Split by world seed (never by frame) and write the dataset."""
    if not pairs:
        raise DegenerateSplit("no pairs to split")
    seeds = sorted({p.world_seed for p in pairs})
    n_train = int(round(train_fraction * len(seeds)))
    if n_train <= 0 or n_train >= len(seeds):
        raise DegenerateSplit(
            f"fraction {train_fraction} leaves an empty split over "
            f"{len(seeds)} worlds")
    train_seeds = set(seeds[:n_train])

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    side = pairs[0].input.shape[0]
    manifest = {"side": side, "splits": {}}
    if extra_meta:
        manifest.update(extra_meta)
    for split, member in (("train", True), ("test", False)):
        chosen = [p for p in pairs if (p.world_seed in train_seeds) == member]
        blob = np.stack(
            [np.stack([p.input, p.label]) for p in chosen]).astype("<f4")
        (out_dir / f"{split}.f32").write_bytes(blob.tobytes())
        manifest["splits"][split] = {
            "file": f"{split}.f32",
            "count": len(chosen),
            "world_seeds": sorted({p.world_seed for p in chosen}),
            "samples": [
                {"world_seed": p.world_seed,
                 "pose": [p.pose.x, p.pose.y, p.pose.heading],
                 "counts": list(p.counts)}
                for p in chosen
            ],
        }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True))
    return manifest


def load_split(dataset_dir, split: str) -> SplitData:
    dataset_dir = Path(dataset_dir)
    manifest = json.loads((dataset_dir / "manifest.json").read_text())
    side = manifest["side"]
    info = manifest["splits"][split]
    raw = np.frombuffer((dataset_dir / info["file"]).read_bytes(), dtype="<f4")
    arr = raw.reshape(info["count"], 2, side, side).astype(np.float32)
    counts = np.array([s["counts"] for s in info["samples"]], dtype=np.int64)
    seeds = np.array([s["world_seed"] for s in info["samples"]], dtype=np.int64)
    poses = [Pose2D(*s["pose"]) for s in info["samples"]]
    return SplitData(arr[:, 0], arr[:, 1], counts.reshape(-1, 4), seeds, poses)


def load_manifest(dataset_dir) -> dict:
    return json.loads((Path(dataset_dir) / "manifest.json").read_text())
