"""Synthetic soccer-like scenarios: ground truth, noisy detections, renders.

Players perform a reflecting random walk inside the field region (everything
below a gray crowd band at the top of the image). Renders are flat-shaded:
a green field, the gray band and one solid, non-green color per player.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import cv2
import numpy as np

from .core import BBox, Detection, FrameDetections
from .errors import InfeasibleSpec

FIELD_RGB = (40, 140, 40)
CROWD_RGB = (128, 128, 128)

# (hue, saturation, value) in OpenCV units; every entry lands in its own bin
# of the default 8x8x4 histogram and outside the green threshold box.
_PLAYER_HUES = (5, 80, 101, 124, 146, 169)
_PLAYER_SATS = (250, 150)
_PLAYER_VALS = (250, 150)

GroundTruth = dict[int, list[tuple[int, BBox]]]  # track id -> [(frame, box)]


@dataclass
class ScenarioSpec:
    width: int = 1280
    height: int = 720
    frame_count: int = 250
    player_count: int = 22
    box_width: tuple[int, int] = (12, 20)
    box_height: tuple[int, int] = (28, 48)
    max_speed: float = 1.5
    direction_change_prob: float = 0.05
    crowd_band_height: int = 120
    field_margin: int = 8
    avoid_collisions: bool = False
    seed: int = 0
    first_frame: int = 1

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if self.frame_count < 0 or self.player_count < 0:
            raise ValueError("counts must be non-negative")
        if self.max_speed < 0:
            raise ValueError("max_speed must be non-negative")
        if not 0.0 <= self.direction_change_prob <= 1.0:
            raise ValueError("direction_change_prob must lie in [0, 1]")
        if self.box_width[0] > self.box_width[1] or self.box_height[0] > self.box_height[1]:
            raise ValueError("size ranges must be (min, max)")
        if min(self.box_width[0], self.box_height[0]) < 1:
            raise ValueError("player boxes must be at least one pixel")

    @property
    def frames(self) -> range:
        return range(self.first_frame, self.first_frame + self.frame_count)

    @property
    def field_bounds(self) -> tuple[float, float, float, float]:
        """Region players' boxes must stay inside: ``(x0, y0, x1, y1)``."""
        m = self.field_margin
        return (float(m), float(self.crowd_band_height + m), float(self.width - m), float(self.height - m))


@dataclass
class NoiseSpec:
    miss_prob: float = 0.0
    fp_rate: float = 0.0
    jitter_sigma: float = 0.0
    tp_confidence: tuple[float, float] = (0.7, 1.0)
    fp_confidence: tuple[float, float] = (0.1, 0.6)
    occlusion_merge: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.miss_prob <= 1.0:
            raise ValueError("miss_prob must lie in [0, 1]")
        if self.fp_rate < 0 or self.jitter_sigma < 0:
            raise ValueError("fp_rate and jitter_sigma must be non-negative")
        for lo, hi in (self.tp_confidence, self.fp_confidence):
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError("confidence ranges must satisfy 0 <= lo <= hi <= 1")

    @classmethod
    def perfect(cls) -> "NoiseSpec":
        """Identity corruption: every ground-truth box with confidence 1."""
        return cls(tp_confidence=(1.0, 1.0))


def _overlaps(a: Sequence[float], b: Sequence[float]) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def generate_scenario(spec: ScenarioSpec) -> GroundTruth:
    """Random-walk ground-truth tracks, one per player, ids starting at 1.

    Raises:
        InfeasibleSpec: when the players cannot be placed inside the field.
    """
    x0, y0, x1, y1 = spec.field_bounds
    if spec.player_count == 0:
        return {}
    if x1 - x0 < spec.box_width[1] or y1 - y0 < spec.box_height[1]:
        raise InfeasibleSpec("largest player box does not fit inside the field region")
    max_area = spec.box_width[1] * spec.box_height[1]
    if spec.player_count * max_area > (x1 - x0) * (y1 - y0) * (0.5 if spec.avoid_collisions else 1.0):
        raise InfeasibleSpec("too many players for the field area")

    rng = np.random.default_rng(spec.seed)
    sizes = np.column_stack(
        (
            rng.integers(spec.box_width[0], spec.box_width[1] + 1, spec.player_count),
            rng.integers(spec.box_height[0], spec.box_height[1] + 1, spec.player_count),
        )
    ).astype(np.float64)
    pos = np.zeros((spec.player_count, 2))
    for p in range(spec.player_count):
        w, h = sizes[p]
        for _ in range(1000):
            cand = (rng.uniform(x0, x1 - w), rng.uniform(y0, y1 - h))
            if not spec.avoid_collisions or not any(
                _overlaps((cand[0], cand[1], cand[0] + w, cand[1] + h), (*pos[q], *(pos[q] + sizes[q])))
                for q in range(p)
            ):
                break
        else:
            raise InfeasibleSpec("could not place players without overlap")
        pos[p] = cand

    def draw_velocity() -> np.ndarray:
        speed = rng.uniform(0.0, spec.max_speed)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        return np.array([speed * math.cos(angle), speed * math.sin(angle)])

    vel = np.array([draw_velocity() for _ in range(spec.player_count)])
    lo = np.array([x0, y0])
    gt: GroundTruth = {p + 1: [] for p in range(spec.player_count)}
    for i, f in enumerate(spec.frames):
        if i > 0:
            for p in range(spec.player_count):
                if rng.random() < spec.direction_change_prob:
                    vel[p] = draw_velocity()
                hi = np.array([x1, y1]) - sizes[p]
                nxt = pos[p] + vel[p]
                for axis in range(2):
                    if nxt[axis] < lo[axis]:
                        nxt[axis] = 2 * lo[axis] - nxt[axis]
                        vel[p, axis] = -vel[p, axis]
                    elif nxt[axis] > hi[axis]:
                        nxt[axis] = 2 * hi[axis] - nxt[axis]
                        vel[p, axis] = -vel[p, axis]
                nxt = np.clip(nxt, lo, hi)
                if spec.avoid_collisions:
                    box = (*nxt, *(nxt + sizes[p]))
                    if any(
                        _overlaps(box, (*pos[q], *(pos[q] + sizes[q]))) for q in range(spec.player_count) if q != p
                    ):
                        vel[p] = -vel[p]
                        continue
                pos[p] = nxt
        for p in range(spec.player_count):
            x, y = pos[p]
            w, h = sizes[p]
            gt[p + 1].append((f, BBox(float(x), float(y), float(x + w), float(y + h))))
    return gt


def gt_frames(gt: GroundTruth) -> dict[int, list[tuple[int, BBox]]]:
    out: dict[int, list[tuple[int, BBox]]] = {}
    for tid in sorted(gt):
        for f, b in gt[tid]:
            out.setdefault(f, []).append((tid, b))
    return out


def _merge_overlapping(boxes: list[BBox]) -> list[BBox]:
    groups = [[b] for b in boxes]
    merged = True
    while merged:
        merged = False
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                ui = _union(groups[i])
                uj = _union(groups[j])
                if _overlaps(ui.as_tuple(), uj.as_tuple()):
                    groups[i].extend(groups.pop(j))
                    merged = True
                    break
            if merged:
                break
    return [_union(g) for g in groups]


def _union(boxes: list[BBox]) -> BBox:
    return BBox(
        min(b.x_min for b in boxes),
        min(b.y_min for b in boxes),
        max(b.x_max for b in boxes),
        max(b.y_max for b in boxes),
    )


def _jitter(box: BBox, sigma: float, rng: np.random.Generator, width: int, height: int) -> BBox:
    x_min, y_min, x_max, y_max = np.array(box.as_tuple()) + rng.normal(0.0, sigma, 4)
    x_min, x_max = np.clip([x_min, x_max], 0.0, width)
    y_min, y_max = np.clip([y_min, y_max], 0.0, height)
    if x_max - x_min < 1.0:
        x_min, x_max = box.x_min, box.x_max
    if y_max - y_min < 1.0:
        y_min, y_max = box.y_min, box.y_max
    return BBox(float(x_min), float(y_min), float(x_max), float(y_max))


def corrupt_detections(
    gt: GroundTruth, noise: NoiseSpec, seed: int, spec: Optional[ScenarioSpec] = None
) -> dict[int, FrameDetections]:
    """Noisy detector output derived from ground truth.

    Each ground-truth box is dropped with ``miss_prob``; survivors get
    Gaussian corner jitter and a true-positive confidence; a Poisson number
    of false positives is placed uniformly inside the field per frame.
    """
    spec = spec or ScenarioSpec()
    rng = np.random.default_rng(seed)
    per_frame = gt_frames(gt)
    frames = sorted(set(spec.frames) | set(per_frame))
    x0, y0, x1, y1 = spec.field_bounds
    out: dict[int, FrameDetections] = {}
    for f in frames:
        kept = [b for _, b in per_frame.get(f, []) if not rng.random() < noise.miss_prob]
        if noise.occlusion_merge:
            kept = _merge_overlapping(kept)
        dets = []
        for b in kept:
            if noise.jitter_sigma > 0:
                b = _jitter(b, noise.jitter_sigma, rng, spec.width, spec.height)
            conf = float(rng.uniform(*noise.tp_confidence))
            dets.append(Detection(f, b, conf))
        for _ in range(int(rng.poisson(noise.fp_rate)) if noise.fp_rate > 0 else 0):
            w = float(rng.integers(spec.box_width[0], spec.box_width[1] + 1))
            h = float(rng.integers(spec.box_height[0], spec.box_height[1] + 1))
            x = rng.uniform(x0, max(x0, x1 - w))
            y = rng.uniform(y0, max(y0, y1 - h))
            dets.append(Detection(f, BBox(float(x), float(y), float(x + w), float(y + h)), float(rng.uniform(*noise.fp_confidence))))
        out[f] = FrameDetections(f, tuple(dets))
    return out


def player_palette() -> list[tuple[int, int, int]]:
    hsv = np.array(
        [[(h, s, v) for h in _PLAYER_HUES for s in _PLAYER_SATS for v in _PLAYER_VALS]], dtype=np.uint8
    )
    rgb = cv2.cvtColor(hsv, cv2.COLOR_HSV2RGB)[0]
    return [tuple(int(c) for c in px) for px in rgb]


_PALETTE = player_palette()


def player_color(track_id: int) -> tuple[int, int, int]:
    return _PALETTE[(track_id - 1) % len(_PALETTE)]


def field_region(spec: ScenarioSpec) -> np.ndarray:
    """Ground-truth field raster of a render: everything below the crowd band."""
    m = np.zeros((spec.height, spec.width), dtype=bool)
    m[spec.crowd_band_height :, :] = True
    return m


def _pixel_rect(b: BBox, width: int, height: int) -> tuple[slice, slice]:
    c0 = min(max(int(round(b.x_min)), 0), width)
    c1 = min(max(int(round(b.x_max)), 0), width)
    r0 = min(max(int(round(b.y_min)), 0), height)
    r1 = min(max(int(round(b.y_max)), 0), height)
    return slice(r0, r1), slice(c0, c1)


def render_frame(
    spec: ScenarioSpec,
    positions: Sequence[tuple[int, BBox]],
    colors: Optional[dict[int, tuple[int, int, int]]] = None,
) -> np.ndarray:
    """RGB image with the field, the crowd band and one rectangle per player.

    Args:
        positions: ``(track_id, box)`` pairs; drawn in the given order.
        colors: Optional per-track color override.
    """
    img = np.empty((spec.height, spec.width, 3), dtype=np.uint8)
    img[:] = FIELD_RGB
    img[: spec.crowd_band_height] = CROWD_RGB
    for tid, b in positions:
        rs, cs = _pixel_rect(b, spec.width, spec.height)
        img[rs, cs] = (colors or {}).get(tid, player_color(tid))
    return img


def render_sequence(spec: ScenarioSpec, gt: GroundTruth) -> dict[int, np.ndarray]:
    per_frame = gt_frames(gt)
    return {f: render_frame(spec, per_frame.get(f, [])) for f in spec.frames}


def perfect_detections(gt: GroundTruth, spec: ScenarioSpec) -> dict[int, FrameDetections]:
    return corrupt_detections(gt, NoiseSpec.perfect(), 0, spec)


def inject_duplicate(
    dets: dict[int, FrameDetections], source_index: int, frames: Sequence[int], offset: tuple[float, float] = (1.0, 0.0)
) -> dict[int, FrameDetections]:
    """Add a shifted copy of one detection in each of ``frames``.

    Creates a spatial-association ambiguity: the copy overlaps the original
    above any usual IOU gate.
    """
    out = dict(dets)
    for f in frames:
        fd = out[f]
        src = fd.items[source_index]
        dup = replace(src, bbox=src.bbox.shifted(*offset))
        out[f] = FrameDetections(f, fd.items + (dup,))
    return out
