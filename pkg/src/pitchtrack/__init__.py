"""Soccer player tracking-by-detection with self-supervised labeling tools."""

from .core import BBox, Detection, FrameDetections, center, iou, iou_matrix, soft_nms
from .matching import FORBIDDEN, Assignment, CostMatrix, solve_assignment
from .tracker import Track, Tracker, TrackerConfig, TrackState

__all__ = [
    "BBox",
    "Detection",
    "FrameDetections",
    "center",
    "iou",
    "iou_matrix",
    "soft_nms",
    "FORBIDDEN",
    "Assignment",
    "CostMatrix",
    "solve_assignment",
    "Track",
    "Tracker",
    "TrackerConfig",
    "TrackState",
]
