"""gridwise: learned dense inverse sensor models on synthetic radar/LiDAR
data, fused into large-scale log-odds occupancy maps."""

from .grid import (DEFAULT_TAU, L_MAX, OccupancyGrid, Pose2D, extract_patch,
                   fuse_cell, fuse_grid, logit_to_prob, prob_to_logit,
                   trinarize)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TAU", "L_MAX", "OccupancyGrid", "Pose2D", "extract_patch",
    "fuse_cell", "fuse_grid", "logit_to_prob", "prob_to_logit", "trinarize",
    "__version__",
]
