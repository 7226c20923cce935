"""Box geometry, detection containers and detection post-processing.

Boxes are stored corner-form ``(x_min, y_min, x_max, y_max)`` in pixel
coordinates with the origin at the top-left of the image. Conversion to the
left/top/width/height layout of MOT files happens only in :mod:`pitchtrack.mot`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DegenerateBox

__all__ = [
    "BBox",
    "Detection",
    "FrameDetections",
    "iou",
    "iou_matrix",
    "center",
    "boxes_to_array",
    "soft_nms",
    "filter_by_confidence",
]


@dataclass(frozen=True, slots=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise DegenerateBox(f"non-finite box coordinates {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise DegenerateBox(f"box has no area: {coords}")

    @classmethod
    def from_xywh(cls, left: float, top: float, width: float, height: float) -> "BBox":
        return cls(left, top, left + width, top + height)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def to_xywh(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.width, self.height)

    def scaled(self, s: float) -> "BBox":
        return BBox(self.x_min * s, self.y_min * s, self.x_max * s, self.y_max * s)

    def shifted(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def clipped(self, width: int, height: int) -> Optional["BBox"]:
        """Clip to ``[0, width] x [0, height]``; ``None`` if nothing is left."""
        x0, y0 = max(self.x_min, 0.0), max(self.y_min, 0.0)
        x1, y1 = min(self.x_max, float(width)), min(self.y_max, float(height))
        if x0 >= x1 or y0 >= y1:
            return None
        return BBox(x0, y0, x1, y1)

    def pixel_slice(self, width: int, height: int) -> tuple[slice, slice]:
        """Row/column slices of the integer pixels covered by the box.

        A pixel ``(r, c)`` is covered when its unit square intersects the
        box, clipped to the image. Slices may be empty.
        """
        c0 = min(max(int(math.floor(self.x_min)), 0), width)
        c1 = min(max(int(math.ceil(self.x_max)), 0), width)
        r0 = min(max(int(math.floor(self.y_min)), 0), height)
        r1 = min(max(int(math.ceil(self.y_max)), 0), height)
        return slice(r0, r1), slice(c0, c1)


@dataclass(frozen=True, slots=True)
class Detection:
    frame: int
    bbox: BBox
    confidence: float = 1.0
    embedding_key: Optional[tuple[int, int]] = None

    def __post_init__(self) -> None:
        if self.frame < 0:
            raise ValueError(f"negative frame index {self.frame}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class FrameDetections:
    frame: int
    items: tuple[Detection, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))
        for d in self.items:
            if d.frame != self.frame:
                raise ValueError(f"detection of frame {d.frame} inside frame {self.frame}")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def boxes(self) -> list[BBox]:
        return [d.bbox for d in self.items]

    @classmethod
    def from_boxes(
        cls, frame: int, boxes: Iterable[BBox], confidences: Optional[Iterable[float]] = None
    ) -> "FrameDetections":
        boxes = list(boxes)
        confs = [1.0] * len(boxes) if confidences is None else list(confidences)
        return cls(frame, tuple(Detection(frame, b, c) for b, c in zip(boxes, confs)))


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def boxes_to_array(boxes: Sequence[BBox]) -> np.ndarray:
    if not boxes:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IOU between two ``(n, 4)`` and ``(m, 4)`` corner-form arrays."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return inter / union


def center(b: BBox) -> tuple[float, float]:
    return ((b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0)


def _rank_key(det: Detection, score: float) -> tuple[float, int, float, float]:
    # highest score first; ties by frame, then x_min, then y_min
    return (-score, det.frame, det.bbox.x_min, det.bbox.y_min)


def soft_nms(
    dets: FrameDetections,
    iou_gate: float = 0.3,
    score_floor: float = 0.001,
    method: str = "linear",
    sigma: float = 0.5,
) -> FrameDetections:
    """Soft non-maximum suppression.

    The highest-scoring remaining box is selected repeatedly. With the
    ``"linear"`` method every remaining box whose IOU with the selected box
    exceeds ``iou_gate`` has its score multiplied by ``1 - IOU``. The
    ``"gaussian"`` method multiplies every remaining box by
    ``exp(-IOU**2 / sigma)`` regardless of the gate. Boxes whose score drops
    below ``score_floor`` are discarded.

    Returns:
        Detections with decayed confidences, sorted by descending confidence.
        Box coordinates are never modified.
    """
    if not 0.0 < iou_gate <= 1.0:
        raise ValueError("iou_gate must lie in (0, 1]")
    if not 0.0 <= score_floor < 1.0:
        raise ValueError("score_floor must lie in [0, 1)")
    if method not in ("linear", "gaussian"):
        raise ValueError(f"unknown soft-NMS method {method!r}")

    pool = [[d, d.confidence] for d in dets.items if d.confidence >= score_floor]
    kept: list[Detection] = []
    while pool:
        best_i = min(range(len(pool)), key=lambda i: _rank_key(pool[i][0], pool[i][1]))
        best, best_score = pool.pop(best_i)
        kept.append(replace(best, confidence=best_score))
        for entry in pool:
            overlap = iou(best.bbox, entry[0].bbox)
            if method == "linear":
                if overlap > iou_gate:
                    entry[1] *= 1.0 - overlap
            else:
                entry[1] *= math.exp(-(overlap * overlap) / sigma)
        pool = [e for e in pool if e[1] >= score_floor]

    kept.sort(key=lambda d: _rank_key(d, d.confidence))
    return FrameDetections(dets.frame, tuple(kept))


def filter_by_confidence(dets: FrameDetections, sigma: float) -> FrameDetections:
    """Keep detections with confidence strictly above ``sigma``."""
    if not 0.0 <= sigma <= 1.0:
        raise ValueError("sigma must lie in [0, 1]")
    return FrameDetections(dets.frame, tuple(d for d in dets.items if d.confidence > sigma))
