"""Playing-field mask estimation.

Images are ``(H, W, 3)`` uint8 arrays in RGB order; masks are ``(H, W)``
boolean arrays. Thresholds follow the OpenCV HSV convention (hue 0-179)
unless ``hue_max=360`` is passed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import cv2
import numpy as np

from .core import BBox, FrameDetections
from .errors import EmptyMask

log = logging.getLogger(__name__)

GREEN_LOWER = (15, 50, 50)
GREEN_UPPER = (70, 255, 255)


@dataclass
class FieldMaskConfig:
    lower: tuple[int, int, int] = GREEN_LOWER
    upper: tuple[int, int, int] = GREEN_UPPER
    hue_max: int = 180
    epsilon_frac: float = 0.01
    max_angle_deg: float = 30.0
    bottom_band: float = 0.4
    min_length_frac: float = 0.3
    max_line_gap: int = 10
    auto_lines: bool = False
    min_overlap: float = 0.3

    def __post_init__(self) -> None:
        if self.hue_max not in (180, 360):
            raise ValueError("hue_max must be 180 or 360")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("lower threshold exceeds upper threshold")
        if not 0.0 <= self.min_overlap <= 1.0:
            raise ValueError("min_overlap must lie in [0, 1]")
        if not 0.0 < self.bottom_band <= 1.0:
            raise ValueError("bottom_band must lie in (0, 1]")


@dataclass(frozen=True)
class Polygon:
    vertices: np.ndarray  # (k, 2) integer x, y

    def __post_init__(self) -> None:
        if len(self.vertices) < 3:
            raise ValueError("a polygon needs at least three vertices")

    def __len__(self) -> int:
        return len(self.vertices)


def to_hsv(img: np.ndarray) -> np.ndarray:
    return cv2.cvtColor(np.ascontiguousarray(img, dtype=np.uint8), cv2.COLOR_RGB2HSV)


def green_mask(
    img: np.ndarray,
    lower: tuple[int, int, int] = GREEN_LOWER,
    upper: tuple[int, int, int] = GREEN_UPPER,
    hue_max: int = 180,
) -> np.ndarray:
    """Pixels whose HSV value falls inside ``[lower, upper]`` (inclusive)."""
    if hue_max == 360:
        lower = (lower[0] / 2.0, lower[1], lower[2])
        upper = (upper[0] / 2.0, upper[1], upper[2])
    hsv = to_hsv(img)
    lo = np.array(lower, dtype=np.float64)
    hi = np.array(upper, dtype=np.float64)
    return np.all((hsv >= lo) & (hsv <= hi), axis=2)


def largest_component(m: np.ndarray) -> np.ndarray:
    """Keep the largest 4-connected component (ties: lowest label in raster order)."""
    m = np.asarray(m, dtype=bool)
    if not m.any():
        return np.zeros_like(m)
    n, labels, stats, _ = cv2.connectedComponentsWithStats(m.astype(np.uint8), connectivity=4)
    areas = stats[1:, cv2.CC_STAT_AREA]
    best = 1 + int(np.argmax(areas))
    return labels == best


def approx_polygon(m: np.ndarray, epsilon: Optional[float] = None) -> Polygon:
    """Trace the largest component's outer boundary and simplify it.

    The simplification is Douglas-Peucker with tolerance ``epsilon`` pixels
    (default: 1% of the image diagonal).

    Raises:
        EmptyMask: when no bit is set.
    """
    comp = largest_component(m)
    if not comp.any():
        raise EmptyMask("cannot build a polygon from an empty mask")
    if epsilon is None:
        epsilon = 0.01 * math.hypot(*comp.shape)
    contours, _ = cv2.findContours(comp.astype(np.uint8), cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_NONE)
    contour = max(contours, key=lambda c: (cv2.contourArea(c), len(c)))
    approx = cv2.approxPolyDP(contour, float(epsilon), True).reshape(-1, 2)
    if len(approx) < 3:
        approx = contour.reshape(-1, 2)
    if len(approx) < 3:
        # single pixel or one-pixel-wide sliver: fall back to its bounding rectangle
        ys, xs = np.nonzero(comp)
        x0, x1, y0, y1 = xs.min(), xs.max(), ys.min(), ys.max()
        approx = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    return Polygon(approx.astype(np.int32))


def fill_polygon(poly: Polygon, shape: tuple[int, int]) -> np.ndarray:
    canvas = np.zeros(shape[:2], dtype=np.uint8)
    cv2.fillPoly(canvas, [poly.vertices.reshape(-1, 1, 2).astype(np.int32)], 1)
    return canvas.astype(bool)


def detect_lines(line_mask: np.ndarray, cfg: FieldMaskConfig) -> list[tuple[float, float, float, float]]:
    """Segments from a probabilistic Hough transform as ``(x1, y1, x2, y2)``."""
    binary = (np.asarray(line_mask) != 0).astype(np.uint8) * 255
    if not binary.any():
        return []
    width = binary.shape[1]
    min_len = max(2, int(round(cfg.min_length_frac * width)))
    votes = max(10, min_len // 2)
    lines = cv2.HoughLinesP(binary, 1, np.pi / 180, votes, minLineLength=min_len, maxLineGap=cfg.max_line_gap)
    if lines is None:
        return []
    return [tuple(float(v) for v in ln) for ln in np.asarray(lines).reshape(-1, 4)]


def select_bottom_line(
    segments: list[tuple[float, float, float, float]], shape: tuple[int, int], cfg: FieldMaskConfig
) -> Optional[tuple[float, float, float, float]]:
    height, width = shape[:2]
    best = None
    best_y = -math.inf
    for x1, y1, x2, y2 in segments:
        length = math.hypot(x2 - x1, y2 - y1)
        angle = math.degrees(math.atan2(abs(y2 - y1), abs(x2 - x1)))
        mid_y = (y1 + y2) / 2.0
        if angle > cfg.max_angle_deg:
            continue
        if mid_y < (1.0 - cfg.bottom_band) * height:
            continue
        if length < cfg.min_length_frac * width:
            continue
        if mid_y > best_y:
            best, best_y = (x1, y1, x2, y2), mid_y
    return best


def bottom_line_cut(
    m: np.ndarray, line_mask: np.ndarray, cfg: Optional[FieldMaskConfig] = None
) -> np.ndarray:
    """Clear mask pixels strictly below the lowest qualifying field line.

    Returns ``m`` unchanged (as a copy) when no Hough segment passes the
    angle, position and length filters.
    """
    cfg = cfg or FieldMaskConfig()
    m = np.asarray(m, dtype=bool).copy()
    line = select_bottom_line(detect_lines(line_mask, cfg), m.shape, cfg)
    if line is None:
        return m
    x1, y1, x2, y2 = line
    height, width = m.shape
    xs = np.arange(width, dtype=np.float64)
    if x2 == x1:
        y_at = np.full(width, max(y1, y2))
    else:
        y_at = y1 + (y2 - y1) * (xs - x1) / (x2 - x1)
    rows = np.arange(height, dtype=np.float64)[:, None]
    m[rows > y_at[None, :]] = False
    log.debug("bottom line cut at %s", line)
    return m


def line_mask_from_luminance(
    img: np.ndarray, region: np.ndarray, max_saturation: int = 60, min_value: int = 180
) -> np.ndarray:
    """Whitish pixels inside the bounding rectangle of ``region``.

    Stand-in for a learned line extractor when no line mask is supplied.
    """
    out = np.zeros(img.shape[:2], dtype=bool)
    ys, xs = np.nonzero(region)
    if ys.size == 0:
        return out
    hsv = to_hsv(img)
    white = (hsv[..., 1] <= max_saturation) & (hsv[..., 2] >= min_value)
    r0, r1, c0, c1 = ys.min(), ys.max() + 1, xs.min(), xs.max() + 1
    out[r0:r1, c0:c1] = white[r0:r1, c0:c1]
    return out


def compute_field_mask(
    img: np.ndarray, line_mask: Optional[np.ndarray] = None, cfg: Optional[FieldMaskConfig] = None
) -> np.ndarray:
    """Green filter, largest component, filled polygon, optional bottom-line cut.

    Raises:
        EmptyMask: when the image has no green component.
    """
    cfg = cfg or FieldMaskConfig()
    green = green_mask(img, cfg.lower, cfg.upper, cfg.hue_max)
    comp = largest_component(green)
    if not comp.any():
        raise EmptyMask("no green component in image")
    eps = cfg.epsilon_frac * math.hypot(*comp.shape)
    field = fill_polygon(approx_polygon(comp, eps), comp.shape)
    if line_mask is None and cfg.auto_lines:
        line_mask = line_mask_from_luminance(img, comp)
    if line_mask is not None:
        field = bottom_line_cut(field, line_mask, cfg)
    return field


def field_overlap(b: BBox, m: np.ndarray) -> float:
    """Fraction of the box's (clipped) pixels whose mask bit is set."""
    height, width = m.shape[:2]
    rs, cs = b.pixel_slice(width, height)
    patch = m[rs, cs]
    if patch.size == 0:
        return 0.0
    return float(np.count_nonzero(patch)) / patch.size


def filter_by_field(dets: FrameDetections, m: np.ndarray, min_overlap: float = 0.3) -> FrameDetections:
    if not 0.0 <= min_overlap <= 1.0:
        raise ValueError("min_overlap must lie in [0, 1]")
    kept = tuple(d for d in dets.items if field_overlap(d.bbox, m) >= min_overlap)
    return FrameDetections(dets.frame, kept)
