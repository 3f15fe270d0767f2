"""Run a trained inverse sensor model frame by frame, stitch the predicted
log-odds patches into a world-anchored map, and score the results.

Predicted logits are fused raw (no per-patch scaling): the network head
emits log-odds, and log-odds fusion is plain clamped addition. Evaluation
works in the [-1, 1] label scale (tanh(x/2) of the logits).
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import label_classes, label_from_grid
from .errors import (GeometryMismatch, LengthMismatch, SensorKindMismatch,
                     ShapeMismatch)
from .grid import (DEFAULT_TAU, FREE, OCCUPIED, UNKNOWN, OccupancyGrid,
                   fuse_grid, trinarize)
from .nn.model import AeConfig, AeModel, load_params, save_params
from .sensors import DEFAULT_V_THRESH, Scan, filter_moving, rasterize
from .world import Trajectory


@dataclass
class ModelMeta:
    """Companion record tying a parameter file to its imaging geometry."""

    sensor: str
    side: int
    window: float
    scheme: str
    config: AeConfig
    tau: float = DEFAULT_TAU
    v_thresh: float = DEFAULT_V_THRESH

    @property
    def resolution(self) -> float:
        return self.window / self.side

    def to_json(self) -> dict:
        return {"sensor": self.sensor, "side": self.side, "window": self.window,
                "scheme": self.scheme, "config": self.config.to_json(),
                "tau": self.tau, "v_thresh": self.v_thresh}

    @classmethod
    def from_json(cls, obj: dict) -> "ModelMeta":
        obj = dict(obj)
        obj["config"] = AeConfig.from_json(obj["config"])
        return cls(**obj)


def save_model(model: AeModel, meta: ModelMeta, path) -> None:
    path = Path(path)
    save_params(model, path)
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(meta.to_json(), indent=1, sort_keys=True))


def load_model(path):
    path = Path(path)
    meta = ModelMeta.from_json(
        json.loads(path.with_suffix(path.suffix + ".json").read_text()))
    model = AeModel(meta.config, seed=0)
    load_params(model, path)
    return model, meta


def predict_patch(model: AeModel, meta: ModelMeta, scan: Scan) -> OccupancyGrid:
    """Vehicle-centered log-odds patch predicted from one scan."""
    if scan.sensor_kind != meta.sensor:
        raise SensorKindMismatch(
            f"model was trained on {meta.sensor}, scan is {scan.sensor_kind}")
    if meta.side != meta.config.side:
        raise ShapeMismatch("meta side and model config side differ")
    image = rasterize(filter_moving(scan, meta.v_thresh), meta.side, meta.window)
    x = image.normalized()[None, None]
    logits = model.forward(x, train=False)[0, 0].astype(np.float64)
    if not np.all(np.isfinite(logits)):
        raise ShapeMismatch("model emitted non-finite logits")
    return OccupancyGrid.vehicle_patch(meta.side, meta.resolution, logits)


def stitch_patches(patches: list, trajectory: Trajectory, map_spec) -> OccupancyGrid:
    """Fold vehicle patches into a world-anchored map along a trajectory."""
    if len(patches) != len(trajectory):
        raise LengthMismatch(f"{len(patches)} patches vs {len(trajectory)} poses")
    grid = map_spec.empty_grid()
    for patch, pose in zip(patches, trajectory.poses):
        fuse_grid(grid, patch, pose)
    return grid


def stitch(model: AeModel, meta: ModelMeta, scans: list,
           trajectory: Trajectory, map_spec) -> OccupancyGrid:
    if len(scans) != len(trajectory):
        raise LengthMismatch(f"{len(scans)} scans vs {len(trajectory)} poses")
    patches = [predict_patch(model, meta, scan) for scan in scans]
    return stitch_patches(patches, trajectory, map_spec)


# ---------------------------------------------------------------------------
# metrics

def per_class_mse(preds, labels, tau: float = DEFAULT_TAU) -> dict:
    """Mean squared error per label class over a whole set, in [-1,1] scale.

    preds/labels are arrays (or lists of arrays) of [-1, 1] values. Classes
    come from the labels; absent classes report None rather than 0.
    """
    preds = np.asarray(preds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if preds.shape != labels.shape:
        raise ShapeMismatch("prediction/label shapes differ")
    classes = label_classes(labels, tau)
    err = (preds - labels) ** 2
    out = {}
    for key, cls in (("free_mse", FREE), ("unknown_mse", UNKNOWN),
                     ("occupied_mse", OCCUPIED)):
        mask = classes == cls
        n = int(mask.sum())
        out[key] = float(err[mask].sum() / n) if n else None
    return out


def constant_unknown_mse(labels, tau: float = DEFAULT_TAU) -> dict:
    """Baseline: the all-unknown predictor scores the class-mean of label^2."""
    labels = np.asarray(labels, dtype=np.float64)
    return per_class_mse(np.zeros_like(labels), labels, tau)


def grids_to_label_scale(patches) -> np.ndarray:
    return np.stack([label_from_grid(p) for p in patches]).astype(np.float64)


def map_agreement(pred_map: OccupancyGrid, gt_map: OccupancyGrid,
                  tau: float = DEFAULT_TAU):
    """(occupied IoU, free IoU, 3x3 confusion counts) over cells where the
    ground truth is not unknown. Empty unions read as perfect agreement."""
    if (pred_map.width != gt_map.width or pred_map.height != gt_map.height
            or abs(pred_map.resolution - gt_map.resolution) > 1e-9
            or not np.allclose(pred_map.origin, gt_map.origin)):
        raise GeometryMismatch("maps do not share geometry")
    pred = trinarize(pred_map, tau)
    gt = trinarize(gt_map, tau)
    domain = gt != 0
    ious = {}
    for name, cls in (("occupied", OCCUPIED), ("free", FREE)):
        inter = int(np.count_nonzero((pred == cls) & (gt == cls) & domain))
        union = int(np.count_nonzero(((pred == cls) | (gt == cls)) & domain))
        ious[name] = inter / union if union else 1.0
    confusion = np.zeros((3, 3), dtype=np.int64)
    for g in (-1, 0, 1):
        for p in (-1, 0, 1):
            confusion[g + 1, p + 1] = int(
                np.count_nonzero((gt == g) & (pred == p) & domain))
    return ious["occupied"], ious["free"], confusion
