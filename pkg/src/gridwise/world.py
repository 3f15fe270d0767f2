"""Procedural 2D urban worlds and geometric ray queries.

A World is a set of static line segments (each tagged with a reflectivity
in [0, 1]) plus a few moving objects, inside an axis-aligned bounding box.
Worlds are built around a free east-west street corridor so that a vehicle
trajectory can be threaded through them; the sides of the street are
populated with parked-car rectangles, building facades broken by alley
gaps, and polyline wall arcs, according to a scene-mix weighting.

Everything here is deterministic in (seed, spec) and immutable once built.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import InvalidSpec, LengthMismatch, NoPath
from .grid import Pose2D, normalize_heading

DEFAULT_BOUNDS = (0.0, 0.0, 120.0, 60.0)
MIN_CLEARANCE = 1.5


@dataclass
class Mover:
    """A moving object: a line-segment extent carried along a piecewise-
    linear track at constant speed."""

    track_t: np.ndarray      # strictly increasing timestamps [k]
    track_xy: np.ndarray     # waypoints [k, 2]
    extent: np.ndarray       # segment endpoints relative to track position [2, 2]
    speed: float
    reflectivity: float = 0.9

    def position(self, t: float) -> np.ndarray:
        return np.array([
            np.interp(t, self.track_t, self.track_xy[:, 0]),
            np.interp(t, self.track_t, self.track_xy[:, 1]),
        ])

    def velocity(self, t: float) -> np.ndarray:
        if t <= self.track_t[0] or t >= self.track_t[-1]:
            return np.zeros(2)
        i = int(np.searchsorted(self.track_t, t, side="right")) - 1
        i = min(max(i, 0), len(self.track_t) - 2)
        dt = self.track_t[i + 1] - self.track_t[i]
        return (self.track_xy[i + 1] - self.track_xy[i]) / dt

    def segment_at(self, t: float) -> np.ndarray:
        p = self.position(t)
        return np.concatenate([p + self.extent[0], p + self.extent[1]])


@dataclass
class World:
    segments: np.ndarray       # [n, 4] x1 y1 x2 y2
    reflectivity: np.ndarray   # [n]
    movers: list
    bounds: tuple              # (xmin, ymin, xmax, ymax)
    seed: int

    def __post_init__(self):
        self.segments = np.asarray(self.segments, dtype=np.float64).reshape(-1, 4)
        self.reflectivity = np.asarray(self.reflectivity, dtype=np.float64)
        if np.any(self.reflectivity < 0) or np.any(self.reflectivity > 1):
            raise ValueError("reflectivity must lie in [0, 1]")
        for m in self.movers:
            if m.speed <= 0.5:
                raise ValueError("mover speed must exceed 0.5 m/s")

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "bounds": list(self.bounds),
            "segments": [
                {"p": list(map(float, s)), "reflectivity": float(r)}
                for s, r in zip(self.segments, self.reflectivity)
            ],
            "movers": [
                {
                    "track_t": m.track_t.tolist(),
                    "track_xy": m.track_xy.tolist(),
                    "extent": m.extent.tolist(),
                    "speed": m.speed,
                    "reflectivity": m.reflectivity,
                }
                for m in self.movers
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "World":
        segs = np.array([e["p"] for e in obj["segments"]], dtype=np.float64).reshape(-1, 4)
        refl = np.array([e["reflectivity"] for e in obj["segments"]], dtype=np.float64)
        movers = [
            Mover(np.array(m["track_t"], dtype=np.float64),
                  np.array(m["track_xy"], dtype=np.float64),
                  np.array(m["extent"], dtype=np.float64),
                  float(m["speed"]), float(m["reflectivity"]))
            for m in obj["movers"]
        ]
        return cls(segs, refl, movers, tuple(obj["bounds"]), int(obj["seed"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path) -> "World":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class SceneSpec:
    """Scene-mix weights; relative odds of each feature type per street block."""

    parked_cars: float = 1.0
    alleys: float = 1.0
    arcs: float = 0.5
    max_movers: int = 3

    def weights(self) -> np.ndarray:
        w = np.array([self.parked_cars, self.alleys, self.arcs], dtype=np.float64)
        if np.any(w < 0):
            raise InvalidSpec("scene weights must be non-negative")
        if w.sum() <= 0:
            raise InvalidSpec("at least one scene weight must be positive")
        return w / w.sum()

    def to_json(self) -> dict:
        return {"parked_cars": self.parked_cars, "alleys": self.alleys,
                "arcs": self.arcs, "max_movers": self.max_movers}

    @classmethod
    def from_json(cls, obj: dict) -> "SceneSpec":
        return cls(**obj)


def _car_rect(rng, cx, cy, along_x=True):
    """Four segments forming a parked-car outline, emitted in order."""
    length = rng.uniform(4.0, 5.0)
    width = rng.uniform(1.8, 2.0)
    if not along_x:
        length, width = width, length
    hx, hy = length / 2.0, width / 2.0
    corners = [(cx - hx, cy - hy), (cx + hx, cy - hy),
               (cx + hx, cy + hy), (cx - hx, cy + hy)]
    segs = []
    for i in range(4):
        x1, y1 = corners[i]
        x2, y2 = corners[(i + 1) % 4]
        segs.append((x1, y1, x2, y2))
    refl = rng.uniform(0.6, 0.95)
    return segs, [refl] * 4


def _parked_car_row(rng, x0, x1, y, side_sign):
    segs, refl = [], []
    cy = y + side_sign * rng.uniform(1.2, 1.8)
    x = x0 + 2.5
    while x + 5.2 < x1:
        s, r = _car_rect(rng, x + 2.5, cy)
        segs.extend(s)
        refl.extend(r)
        x += 5.0 + rng.uniform(0.6, 2.0)
    return segs, refl


def _alley_facade(rng, x0, x1, y, side_sign, depth_limit):
    """A building facade parallel to the street with 1-2 alley gaps, plus
    short perpendicular alley walls at the gap mouths."""
    segs, refl = [], []
    fy = y + side_sign * rng.uniform(4.0, min(8.0, depth_limit))
    span = x1 - x0
    n_gaps = 1 if span < 18 or rng.random() < 0.5 else 2
    gap_ws = [rng.uniform(2.0, 4.0) for _ in range(n_gaps)]
    # place gaps away from the facade ends
    usable = span - sum(gap_ws) - 2.0 * (n_gaps + 1)
    if usable <= 0:
        n_gaps, gap_ws = 1, [min(2.0, span / 3)]
    cuts = sorted(rng.uniform(x0 + 2.0, x1 - 2.0 - max(gap_ws), size=n_gaps))
    r = rng.uniform(0.3, 0.7)
    cursor = x0
    for cut, gw in zip(cuts, gap_ws):
        if cut - cursor > 0.5:
            segs.append((cursor, fy, cut, fy))
            refl.append(r)
        alley_len = rng.uniform(3.0, 6.0)
        for gx in (cut, cut + gw):
            segs.append((gx, fy, gx, fy + side_sign * alley_len))
            refl.append(r)
        cursor = cut + gw
    if x1 - cursor > 0.5:
        segs.append((cursor, fy, x1, fy))
        refl.append(r)
    return segs, refl


def _wall_arc(rng, x0, x1, y, side_sign, depth_limit):
    """Polyline approximation of a curved wall (roundabout edge, corner).

    The arc center sits beyond the wall and the sampled half faces the
    street, so the polyline bulges toward the road and stays in bounds.
    """
    radius = rng.uniform(5.0, min(10.0, (x1 - x0) / 2.0))
    cx = rng.uniform(x0 + radius, x1 - radius)
    cy = y + side_sign * (rng.uniform(3.0, min(6.0, depth_limit)) + radius)
    span = rng.uniform(math.pi / 2.0, math.pi)
    start = rng.uniform(0.0, math.pi - span)
    if side_sign > 0:
        start += math.pi  # sample the half of the circle facing the street
    n = 12
    angles = start + np.linspace(0.0, span, n + 1)
    xs = cx + radius * np.cos(angles)
    ys = cy + radius * np.sin(angles)
    r = rng.uniform(0.3, 0.8)
    segs = [(xs[i], ys[i], xs[i + 1], ys[i + 1]) for i in range(n)]
    return segs, [r] * n


def generate_world(seed: int, spec: SceneSpec = None,
                   bounds: tuple = DEFAULT_BOUNDS) -> World:
    """Build a deterministic synthetic street scene for (seed, spec)."""
    spec = spec or SceneSpec()
    weights = spec.weights()
    rng = np.random.default_rng(seed)
    xmin, ymin, xmax, ymax = bounds
    street_y = (ymin + ymax) / 2.0 + rng.uniform(-3.0, 3.0)
    street_half = 4.5

    segs, refl = [], []
    for side_sign in (+1, -1):
        edge_y = street_y + side_sign * street_half
        depth_limit = (ymax - edge_y - 2.0) if side_sign > 0 else (edge_y - ymin - 2.0)
        x = xmin + 4.0
        while x < xmax - 16.0:
            block = rng.uniform(14.0, 26.0)
            x1 = min(x + block, xmax - 4.0)
            kind = rng.choice(3, p=weights)
            if kind == 0:
                s, r = _parked_car_row(rng, x, x1, edge_y, side_sign)
            elif kind == 1:
                s, r = _alley_facade(rng, x, x1, edge_y, side_sign, depth_limit)
            else:
                s, r = _wall_arc(rng, x, x1, edge_y, side_sign, depth_limit)
            for (sx1, sy1, sx2, sy2), rr in zip(s, r):
                if (xmin <= sx1 <= xmax and xmin <= sx2 <= xmax
                        and ymin <= sy1 <= ymax and ymin <= sy2 <= ymax):
                    segs.append((sx1, sy1, sx2, sy2))
                    refl.append(rr)
            x = x1 + rng.uniform(1.0, 3.0)

    movers = []
    n_movers = int(rng.integers(0, spec.max_movers + 1))
    for _ in range(n_movers):
        speed = rng.uniform(1.5, 8.0)
        lane = street_y + rng.uniform(-2.0, 2.0)
        forward = rng.random() < 0.5
        x_a, x_b = (xmin + 2.0, xmax - 2.0) if forward else (xmax - 2.0, xmin + 2.0)
        start_delay = rng.uniform(0.0, 10.0)
        duration = abs(x_b - x_a) / speed
        track_t = np.array([start_delay, start_delay + duration])
        track_xy = np.array([[x_a, lane], [x_b, lane]])
        extent = np.array([[-2.0, 0.0], [2.0, 0.0]])
        movers.append(Mover(track_t, track_xy, extent, speed))

    return World(np.array(segs, dtype=np.float64).reshape(-1, 4),
                 np.array(refl, dtype=np.float64), movers, bounds, seed)


# ---------------------------------------------------------------------------
# ray queries

@dataclass
class RayHit:
    range: float
    reflectivity: float
    is_mover: bool
    radial_velocity: float  # positive = receding from the ray origin


def raycast(world: World, origin, angle: float, max_range: float,
            time: float = 0.0):
    """Nearest intersection along a ray, or None.

    Static hits carry radial velocity exactly 0; mover hits carry the
    projection of the mover velocity on the ray direction.
    """
    if max_range <= 0:
        raise ValueError("max_range must be positive")
    ox, oy = float(origin[0]), float(origin[1])
    dir_x = np.array([np.cos(angle)])
    dir_y = np.array([np.sin(angle)])
    best, idx = kernels.segment_hits(ox, oy, dir_x, dir_y, world.segments, max_range)
    best, idx = float(best[0]), int(idx[0])
    hit = None
    if idx >= 0:
        hit = RayHit(best, float(world.reflectivity[idx]), False, 0.0)
    for m in world.movers:
        seg = m.segment_at(time).reshape(1, 4)
        r, j = kernels.segment_hits(ox, oy, dir_x, dir_y, seg, max_range)
        if j[0] >= 0 and r[0] < (hit.range if hit else np.inf):
            v = m.velocity(time)
            radial = float(v[0] * dir_x[0] + v[1] * dir_y[0])
            hit = RayHit(float(r[0]), m.reflectivity, True, radial)
    return hit


def sweep(world: World, origin, angles: np.ndarray, max_range: float,
          time: float = 0.0):
    """Vectorized raycast over many angles from one origin.

    Returns (ranges, reflectivity, is_mover, radial_velocity) arrays with
    range = +inf where nothing is hit.
    """
    ox, oy = float(origin[0]), float(origin[1])
    dir_x, dir_y = np.cos(angles), np.sin(angles)
    ranges, idx = kernels.segment_hits(ox, oy, dir_x, dir_y, world.segments, max_range)
    n = len(angles)
    if world.segments.shape[0]:
        refl = np.where(idx >= 0, world.reflectivity[np.clip(idx, 0, None)], 0.0)
    else:
        refl = np.zeros(n)
    is_mover = np.zeros(n, dtype=bool)
    radial = np.zeros(n)
    for m in world.movers:
        seg = m.segment_at(time).reshape(1, 4)
        r, j = kernels.segment_hits(ox, oy, dir_x, dir_y, seg, max_range)
        closer = (j >= 0) & (r < ranges)
        if np.any(closer):
            v = m.velocity(time)
            ranges = np.where(closer, r, ranges)
            refl = np.where(closer, m.reflectivity, refl)
            radial = np.where(closer, v[0] * dir_x + v[1] * dir_y, radial)
            is_mover |= closer
    return ranges, refl, is_mover, radial


# ---------------------------------------------------------------------------
# trajectories

@dataclass
class Trajectory:
    """Time-ordered vehicle poses plus odometry noise parameters."""

    times: np.ndarray
    poses: list
    trans_sigma: float = 0.0
    rot_sigma: float = 0.0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        if len(self.times) != len(self.poses):
            raise LengthMismatch("times and poses differ in length")
        if len(self.times) > 1:
            if np.any(np.diff(self.times) <= 0):
                raise ValueError("timestamps must be strictly increasing")
            for a, b in zip(self.poses, self.poses[1:]):
                if math.hypot(b.x - a.x, b.y - a.y) > 2.0:
                    raise ValueError("consecutive pose spacing exceeds 2 m")

    def __len__(self):
        return len(self.poses)

    def save(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["t", "x", "y", "heading"])
            for t, p in zip(self.times, self.poses):
                writer.writerow([repr(float(t)), repr(p.x), repr(p.y), repr(p.heading)])

    @classmethod
    def load(cls, path) -> "Trajectory":
        times, poses = [], []
        with open(path, newline="") as f:
            for rec in csv.DictReader(f):
                times.append(float(rec["t"]))
                poses.append(Pose2D(float(rec["x"]), float(rec["y"]),
                                    float(rec["heading"])))
        return cls(np.array(times), poses)

    def noised(self, rng) -> "Trajectory":
        """Random-walk odometry perturbation of the ground-truth poses."""
        if self.trans_sigma == 0 and self.rot_sigma == 0:
            return self
        dx = dy = dh = 0.0
        poses = []
        for p in self.poses:
            dx += rng.normal(0.0, self.trans_sigma)
            dy += rng.normal(0.0, self.trans_sigma)
            dh += rng.normal(0.0, self.rot_sigma)
            poses.append(Pose2D(p.x + dx, p.y + dy, p.heading + dh))
        return Trajectory(self.times.copy(), poses, self.trans_sigma, self.rot_sigma)


def _segment_clearance(world: World, x: float, y: float) -> float:
    """Distance from a point to the nearest static segment."""
    if world.segments.shape[0] == 0:
        return np.inf
    p1 = world.segments[:, 0:2]
    p2 = world.segments[:, 2:4]
    d = p2 - p1
    rel = np.array([x, y]) - p1
    denom = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.divide(np.einsum("ij,ij->i", rel, d), denom,
                          out=np.zeros_like(denom), where=denom > 0), 0.0, 1.0)
    closest = p1 + t[:, None] * d
    return float(np.min(np.hypot(closest[:, 0] - x, closest[:, 1] - y)))


def generate_trajectory(world: World, seed: int, step: float = 1.0,
                        speed: float = 5.0) -> Trajectory:
    """Thread a drivable path through the world's street corridor.

    Scans candidate east-west lines for one with enough clearance, then adds
    a gentle seeded lateral wobble. Raises NoPath when no line through the
    world keeps MIN_CLEARANCE from every static segment.
    """
    if not (0.1 < step <= 2.0):
        raise ValueError("step must lie in (0.1, 2] m")
    rng = np.random.default_rng([seed, world.seed])
    xmin, ymin, xmax, ymax = world.bounds
    x0, x1 = xmin + 4.0, xmax - 4.0

    candidates = np.arange(ymin + 4.0, ymax - 4.0 + 1e-9, 0.5)
    mid = (ymin + ymax) / 2.0
    candidates = candidates[np.argsort(np.abs(candidates - mid), kind="stable")]
    chosen = None
    for y in candidates:
        probe = np.arange(x0, x1 + 1e-9, 0.5)
        clear = min(_segment_clearance(world, float(px), float(y)) for px in probe)
        if clear >= MIN_CLEARANCE + 0.6:
            chosen = (float(y), float(clear))
            break
    if chosen is None:
        raise NoPath(f"no east-west corridor with {MIN_CLEARANCE} m clearance")
    y_line, clear = chosen

    # lateral wobble, bounded so spacing stays in [0.5, 1.5] * step and <= 2 m
    slope_cap = math.sqrt(min(1.5, 2.0 / step) ** 2 - 1.0) * 0.5
    wavelength = rng.uniform(25.0, 40.0)
    amp = min(0.5 * (clear - MIN_CLEARANCE), slope_cap * wavelength / (2 * math.pi))
    phase = rng.uniform(0.0, 2 * math.pi)

    xs = np.arange(x0, x1 + 1e-9, step)
    for attempt_amp in (amp, 0.0):
        ys = y_line + attempt_amp * np.sin(2 * math.pi * xs / wavelength + phase)
        headings = np.arctan2(np.gradient(ys, xs), np.ones_like(xs))
        poses = [Pose2D(float(x), float(y), float(h))
                 for x, y, h in zip(xs, ys, headings)]
        if all(_segment_clearance(world, p.x, p.y) >= MIN_CLEARANCE for p in poses):
            break
    else:
        raise NoPath("no pose sequence kept the required clearance")
    times = np.arange(len(poses)) * (step / speed)
    return Trajectory(times, poses)
