"""Ideal inverse sensor model: single-shot occupancy estimates from lidar
scans, accumulation into world-anchored maps, and label-patch cutting.

Per detection, cells strictly between the sensor cell and the endpoint cell
collect free evidence and the endpoint cell collects occupied evidence.
Rays are clipped to the patch window and to ``max_range``; a clipped ray
contributes free evidence along its in-window portion and no endpoint.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import LengthMismatch, WrongSensor
from .grid import L_MAX, OccupancyGrid, Pose2D, fuse_grid, extract_patch, vehicle_to_cell
from .sensors import LIDAR, Scan
from .world import Trajectory

# Asymmetric evidence: a miss is weaker than a hit (p ~ 0.4 vs ~ 0.85).
DEFAULT_L_FREE = -0.41
DEFAULT_L_OCC = 1.73


@dataclass
class IdealIsmParams:
    l_free: float = DEFAULT_L_FREE
    l_occ: float = DEFAULT_L_OCC
    max_range: float = 20.0

    def __post_init__(self):
        if not (self.l_free < 0.0 < self.l_occ):
            raise ValueError("need l_free < 0 < l_occ")


def bresenham_cells(start, end) -> list:
    """8-connected integer line from start to end, inclusive, in order."""
    path = kernels.bresenham_line(int(start[0]), int(start[1]),
                                  int(end[0]), int(end[1]))
    return [tuple(rc) for rc in path]


def single_shot_grid(scan: Scan, params: IdealIsmParams, side: int,
                     resolution: float) -> OccupancyGrid:
    """Vehicle-centered occupancy estimate of one lidar scan."""
    if scan.sensor_kind != LIDAR:
        raise WrongSensor("the ideal inverse sensor model expects lidar scans")
    grid = OccupancyGrid.vehicle_patch(side, resolution)
    if not scan.detections:
        return grid
    r, az, _, _ = scan.arrays()
    x = r * np.cos(az)
    y = r * np.sin(az)
    bound = side * resolution / 2.0 - resolution * 1e-6
    with np.errstate(divide="ignore"):
        tx = np.where(np.abs(x) > bound, bound / np.abs(x), 1.0)
        ty = np.where(np.abs(y) > bound, bound / np.abs(y), 1.0)
    t = np.minimum(np.minimum(tx, ty), np.minimum(1.0, params.max_range / r))
    occ = t >= 1.0
    rows, cols = vehicle_to_cell(x * t, y * t, side, resolution)
    r0, c0 = vehicle_to_cell(0.0, 0.0, side, resolution)
    kernels.ism_splat(grid.cells, int(r0), int(c0), rows, cols, occ,
                      params.l_free, params.l_occ, L_MAX)
    return grid


def accumulate_map(scans: list, trajectory: Trajectory, params: IdealIsmParams,
                   map_spec: "MapSpec", shot_side: int = None) -> OccupancyGrid:
    """Fold single-shot estimates into a world-anchored map, in time order."""
    if len(scans) != len(trajectory):
        raise LengthMismatch(f"{len(scans)} scans vs {len(trajectory)} poses")
    grid = map_spec.empty_grid()
    if shot_side is None:
        shot_side = 2 * math.ceil(params.max_range / map_spec.resolution) + 4
    for scan, pose in zip(scans, trajectory.poses):
        shot = single_shot_grid(scan, params, shot_side, map_spec.resolution)
        fuse_grid(grid, shot, pose)
    return grid


def cut_labels(grid: OccupancyGrid, trajectory: Trajectory, side: int):
    """One vehicle-aligned label patch per pose.

    Poses whose patch footprint misses the map are skipped; returns
    (patches, skipped_indices).
    """
    from .errors import OutOfBounds

    patches, skipped = [], []
    for i, pose in enumerate(trajectory.poses):
        try:
            patches.append(extract_patch(grid, pose, side))
        except OutOfBounds:
            skipped.append(i)
    return patches, skipped


@dataclass
class MapSpec:
    """Geometry of a world-anchored map; origin is the NW corner."""

    width: int
    height: int
    resolution: float
    origin: tuple

    @classmethod
    def from_bounds(cls, bounds, resolution: float, margin: float = 0.0) -> "MapSpec":
        xmin, ymin, xmax, ymax = bounds
        width = math.ceil((xmax - xmin + 2 * margin) / resolution)
        height = math.ceil((ymax - ymin + 2 * margin) / resolution)
        return cls(width, height, resolution, (xmin - margin, ymax + margin))

    def empty_grid(self) -> OccupancyGrid:
        return OccupancyGrid(self.width, self.height, self.resolution, self.origin)
