"""Log-odds occupancy grids: probability algebra, evidential fusion and
vehicle-centered patch extraction/insertion.

Cell values are log-odds of occupancy (0 = unknown = p 0.5), clamped to
[-L_MAX, L_MAX]. Measurements fuse by addition in the log-odds domain, so
fusion is commutative and order independent up to the clamp.

Array convention (shared by maps, patches and sensor images): row 0 is the
north edge, column 0 the west edge; ``origin`` is the world coordinate of
the outer (north-west) corner of cell (0, 0). Cell (r, c) covers
x in [ox + c*res, ox + (c+1)*res) and y in (oy - (r+1)*res, oy - r*res].

Vehicle-centered patches use the same array convention in the vehicle frame:
the vehicle sits at the patch center, +x maps to increasing column and +y to
decreasing row. Rotated extraction and insertion resample nearest-neighbor
on cell centers in both directions, which makes the heading-0 round trip
(extract, then fuse into an empty map at the same pose) exact.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import OutOfBounds, ResolutionMismatch

L_MAX = 50.0
PROB_EPS = 1e-6
# Trinarization threshold: |log-odds| <= tau reads as unknown. logit(0.75).
DEFAULT_TAU = math.log(3.0)

FREE, UNKNOWN, OCCUPIED = -1, 0, 1


def normalize_heading(heading: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    h = heading % (2.0 * math.pi)
    if h > math.pi:
        h -= 2.0 * math.pi
    return h


@dataclass
class Pose2D:
    """Planar vehicle pose in world coordinates (meters, radians)."""

    x: float
    y: float
    heading: float

    def __post_init__(self):
        self.heading = normalize_heading(self.heading)


@dataclass
class OccupancyGrid:
    """A world-anchored (or vehicle-anchored, for patches) log-odds grid."""

    width: int
    height: int
    resolution: float
    origin: tuple[float, float]
    cells: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("grid dimensions must be positive")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.cells is None:
            self.cells = np.zeros((self.height, self.width), dtype=np.float64)
        else:
            self.cells = np.asarray(self.cells, dtype=np.float64)
            if self.cells.shape != (self.height, self.width):
                raise ValueError("cells shape does not match width/height")
            if not np.all(np.isfinite(self.cells)):
                raise ValueError("grid cells must be finite")
        self.origin = (float(self.origin[0]), float(self.origin[1]))

    @classmethod
    def vehicle_patch(cls, side: int, resolution: float, cells=None) -> "OccupancyGrid":
        """A vehicle-centered patch grid (origin at the NW corner in the
        vehicle frame)."""
        half = side * resolution / 2.0
        return cls(side, side, resolution, (-half, half), cells)

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        col = math.floor((x - self.origin[0]) / self.resolution)
        row = math.floor((self.origin[1] - y) / self.resolution)
        return row, col

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        x = self.origin[0] + (col + 0.5) * self.resolution
        y = self.origin[1] - (row + 0.5) * self.resolution
        return x, y

    def contains_cell(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.width, self.height, self.resolution,
                             self.origin, self.cells.copy())

    def probabilities(self) -> np.ndarray:
        return logit_to_prob(self.cells)


def prob_to_logit(p):
    """ln(p / (1-p)); p is clamped to [PROB_EPS, 1-PROB_EPS] first."""
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return np.log(p / (1.0 - p))


def logit_to_prob(l):
    """Inverse of prob_to_logit: 1 / (1 + exp(-l))."""
    return 1.0 / (1.0 + np.exp(-np.asarray(l, dtype=np.float64)))


def fuse_cell(prior, update):
    """Evidential fusion of two log-odds beliefs: clamped addition."""
    return np.clip(prior + update, -L_MAX, L_MAX)


def trinarize(grid, tau: float = DEFAULT_TAU) -> np.ndarray:
    """Classify cells into FREE (-1), UNKNOWN (0), OCCUPIED (+1).

    Boundary values (|log-odds| == tau exactly) read as unknown.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    cells = grid.cells if isinstance(grid, OccupancyGrid) else np.asarray(grid)
    out = np.zeros(cells.shape, dtype=np.int8)
    out[cells < -tau] = FREE
    out[cells > tau] = OCCUPIED
    return out


# ---------------------------------------------------------------------------
# vehicle-frame pixel mapping (shared with scan rasterization)

def vehicle_to_cell(x, y, side: int, resolution: float):
    """Map vehicle-frame points to patch (row, col); arrays in, arrays out."""
    half = side * resolution / 2.0
    col = np.floor((np.asarray(x) + half) / resolution).astype(np.int64)
    row = side - 1 - np.floor((np.asarray(y) + half) / resolution).astype(np.int64)
    return row, col


def patch_cell_center(row, col, side: int, resolution: float):
    """Vehicle-frame center of a patch cell."""
    half = side * resolution / 2.0
    x = (np.asarray(col) + 0.5) * resolution - half
    y = (side - np.asarray(row) - 0.5) * resolution - half
    return x, y


# ---------------------------------------------------------------------------
# rotated patch transfer

def _footprint_corners(pose: Pose2D, side: int, resolution: float) -> np.ndarray:
    half = side * resolution / 2.0
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    corners = []
    for vx, vy in ((-half, -half), (half, -half), (half, half), (-half, half)):
        corners.append((pose.x + c * vx - s * vy, pose.y + s * vx + c * vy))
    return np.array(corners)


def _rects_overlap(corners_a: np.ndarray, corners_b: np.ndarray) -> bool:
    # Separating-axis test between two convex quads.
    for quad in (corners_a, corners_b):
        for i in range(4):
            ex = quad[(i + 1) % 4, 0] - quad[i, 0]
            ey = quad[(i + 1) % 4, 1] - quad[i, 1]
            ax, ay = -ey, ex
            pa = corners_a @ (ax, ay)
            pb = corners_b @ (ax, ay)
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True


def _map_corners(grid: OccupancyGrid) -> np.ndarray:
    ox, oy = grid.origin
    x1 = ox + grid.width * grid.resolution
    y1 = oy - grid.height * grid.resolution
    return np.array([(ox, y1), (x1, y1), (x1, oy), (ox, oy)])


def extract_patch(grid: OccupancyGrid, pose: Pose2D, side_cells: int) -> OccupancyGrid:
    """Cut a vehicle-centered, heading-aligned patch out of a map.

    Cells whose centers fall outside the map read as unknown (0). Raises
    OutOfBounds when the patch footprint is disjoint from the map.
    """
    if side_cells <= 0:
        raise ValueError("side_cells must be positive")
    if not _rects_overlap(_footprint_corners(pose, side_cells, grid.resolution),
                          _map_corners(grid)):
        raise OutOfBounds(f"patch at ({pose.x:.2f}, {pose.y:.2f}) lies outside the map")
    out = kernels.extract_patch_cells(
        grid.cells, grid.origin[0], grid.origin[1], grid.resolution,
        pose.x, pose.y, math.cos(pose.heading), math.sin(pose.heading),
        side_cells)
    return OccupancyGrid.vehicle_patch(side_cells, grid.resolution, out)


def fuse_grid(target: OccupancyGrid, source: OccupancyGrid, pose: Pose2D) -> int:
    """Fuse a vehicle-anchored source patch into a world-anchored target.

    Every target cell whose center falls inside the transformed source
    accumulates the nearest source cell's log-odds. Returns the number of
    source cells whose centers land outside the target (skipped evidence).
    """
    if abs(target.resolution - source.resolution) > 1e-9:
        raise ResolutionMismatch(
            f"target res {target.resolution} != source res {source.resolution}")
    res = target.resolution
    side = source.width
    cos_h, sin_h = math.cos(pose.heading), math.sin(pose.heading)

    corners = _footprint_corners(pose, side, res)
    ox, oy = target.origin
    r_lo = max(0, math.floor((oy - corners[:, 1].max()) / res) - 1)
    r_hi = min(target.height, math.ceil((oy - corners[:, 1].min()) / res) + 1)
    c_lo = max(0, math.floor((corners[:, 0].min() - ox) / res) - 1)
    c_hi = min(target.width, math.ceil((corners[:, 0].max() - ox) / res) + 1)
    if r_lo < r_hi and c_lo < c_hi:
        kernels.fuse_patch_cells(
            target.cells, ox, oy, res, source.cells,
            pose.x, pose.y, cos_h, sin_h, r_lo, r_hi, c_lo, c_hi, L_MAX)

    # forward-map source cell centers to count evidence falling off the map
    rows, cols = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    xv, yv = patch_cell_center(rows, cols, side, res)
    wx = pose.x + cos_h * xv - sin_h * yv
    wy = pose.y + sin_h * xv + cos_h * yv
    col = np.floor((wx - ox) / res)
    row = np.floor((oy - wy) / res)
    outside = (row < 0) | (row >= target.height) | (col < 0) | (col >= target.width)
    return int(outside.sum())
