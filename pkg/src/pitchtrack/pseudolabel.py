"""Automatic label correction and re-ID training data generation.

* :func:`correct_annotations` turns raw teacher detections of one frame into
  labels: confidence threshold, field filtering, then blob-based recovery of
  missed players.
* :func:`generate_reid_tracks` and :func:`sample_triplet_batch` build
  identity batches from spatially associated trajectories.
* :func:`rescale_pad_augment` is the random down-scaling augmentation.
"""

from __future__ import annotations

import csv
import enum
import logging
import statistics
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import cv2
import numpy as np

from .core import BBox, FrameDetections, filter_by_confidence, iou_matrix, boxes_to_array
from .errors import FormatError, InsufficientTracks
from .fieldmask import filter_by_field, green_mask
from .tracker import Track, Tracker, TrackerConfig

log = logging.getLogger(__name__)


class Provenance(str, enum.Enum):
    TEACHER = "teacher"
    BLOB = "blob-added"


@dataclass(frozen=True)
class Label:
    bbox: BBox
    provenance: Provenance = Provenance.TEACHER


@dataclass
class LabelSet:
    frames: dict[int, list[Label]] = field(default_factory=dict)

    def boxes(self, frame: int) -> list[BBox]:
        return [lab.bbox for lab in self.frames.get(frame, [])]

    def count(self, provenance: Optional[Provenance] = None) -> int:
        return sum(1 for labs in self.frames.values() for lab in labs if provenance in (None, lab.provenance))


@dataclass
class PseudoLabelConfig:
    sigma: float = 0.8
    min_field_overlap: float = 0.3
    blob_area_ratio: tuple[float, float] = (0.3, 3.0)
    blob_area_abs: tuple[float, float] = (100.0, 5000.0)
    blob_max_iou: float = 0.2
    aspect_range: tuple[float, float] = (1.0, 4.5)
    min_non_green: float = 0.3
    tau_iou: float = 0.7
    min_track_len: int = 5
    k_tracks: int = 5
    t_samples: int = 10
    min_scale: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 <= self.sigma <= 1.0:
            raise ValueError("sigma must lie in [0, 1]")
        if not 0.0 < self.min_scale <= 1.0:
            raise ValueError("min_scale must lie in (0, 1]")
        if self.blob_area_ratio[0] > self.blob_area_ratio[1] or self.blob_area_abs[0] > self.blob_area_abs[1]:
            raise ValueError("area ranges must be (min, max)")
        if self.k_tracks < 1 or self.t_samples < 1:
            raise ValueError("batch dimensions must be positive")


# name -> min_scale used for the teacher fine-tuning and the student training
MIN_SCALE_PRESETS = {"teacher": 0.5, "student": 0.1}

Verifier = Callable[[np.ndarray, BBox, Optional[int]], bool]


class HeuristicVerifier:
    """Accepts upright, mostly non-green boxes.

    A box passes when ``height / width`` lies in ``aspect_range`` and at least
    ``min_non_green`` of its pixels fall outside the green threshold box.
    """

    def __init__(self, aspect_range: tuple[float, float] = (1.0, 4.5), min_non_green: float = 0.3):
        self.aspect_range = aspect_range
        self.min_non_green = min_non_green

    def __call__(self, img: np.ndarray, b: BBox, frame: Optional[int] = None) -> bool:
        ratio = b.height / b.width
        if not self.aspect_range[0] <= ratio <= self.aspect_range[1]:
            return False
        rs, cs = b.pixel_slice(img.shape[1], img.shape[0])
        patch = img[rs, cs]
        if patch.size == 0:
            return False
        non_green = 1.0 - float(green_mask(patch).mean())
        return non_green >= self.min_non_green


def verify_candidate(img: np.ndarray, b: BBox) -> bool:
    return HeuristicVerifier()(img, b)


class VerdictFileVerifier:
    """Verdicts read from a CSV file with rows ``frame,x,y,w,h,accept``.

    Boxes are matched on integer-rounded coordinates; unknown boxes get
    ``default``.
    """

    def __init__(self, path, default: bool = False):
        self.default = default
        self.verdicts: dict[tuple[int, int, int, int, int], bool] = {}
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].startswith("#"):
                    continue
                try:
                    frame, x, y, w, h = (float(v) for v in row[:5])
                    accept = row[5].strip().lower() in ("1", "true", "yes")
                except (ValueError, IndexError) as exc:
                    raise FormatError(f"{path}:{lineno}: {exc}") from None
                self.verdicts[self._key(int(frame), BBox.from_xywh(x, y, w, h))] = accept

    @staticmethod
    def _key(frame: int, b: BBox) -> tuple[int, int, int, int, int]:
        x, y, w, h = b.to_xywh()
        return (frame, round(x), round(y), round(w), round(h))

    def __call__(self, img: np.ndarray, b: BBox, frame: Optional[int] = None) -> bool:
        return self.verdicts.get(self._key(frame if frame is not None else -1, b), self.default)


def blob_candidates(img: np.ndarray, mask: np.ndarray) -> list[BBox]:
    """Enclosing boxes of 4-connected non-green blobs inside the field mask."""
    blobs = (np.asarray(mask, dtype=bool) & ~green_mask(img)).astype(np.uint8)
    if not blobs.any():
        return []
    n, _, stats, _ = cv2.connectedComponentsWithStats(blobs, connectivity=4)
    out = []
    for k in range(1, n):
        x, y, w, h = (int(v) for v in stats[k, :4])
        out.append(BBox(float(x), float(y), float(x + w), float(y + h)))
    return out


def detect_missed_players(
    img: np.ndarray,
    mask: np.ndarray,
    existing: Sequence[BBox],
    cfg: Optional[PseudoLabelConfig] = None,
    verifier: Optional[Verifier] = None,
    frame: Optional[int] = None,
) -> list[BBox]:
    """Player-sized non-green blobs not already covered by a detection.

    A blob's box is a candidate when its area lies within
    ``blob_area_ratio`` times the median area of ``existing`` (or within
    ``blob_area_abs`` when there is nothing to compare to) and its IOU with
    every existing box is below ``blob_max_iou``. Candidates must then pass
    ``verifier``.
    """
    cfg = cfg or PseudoLabelConfig()
    verifier = verifier or HeuristicVerifier(cfg.aspect_range, cfg.min_non_green)
    if existing:
        med = statistics.median(b.area for b in existing)
        lo, hi = cfg.blob_area_ratio[0] * med, cfg.blob_area_ratio[1] * med
    else:
        lo, hi = cfg.blob_area_abs
    cands = [b for b in blob_candidates(img, mask) if lo <= b.area <= hi]
    if existing and cands:
        ious = iou_matrix(boxes_to_array(cands), boxes_to_array(list(existing)))
        cands = [b for b, row in zip(cands, ious) if row.max() < cfg.blob_max_iou]
    return [b for b in cands if verifier(img, b, frame)]


def correct_annotations(
    dets: FrameDetections,
    img: np.ndarray,
    mask: np.ndarray,
    cfg: Optional[PseudoLabelConfig] = None,
    verifier: Optional[Verifier] = None,
) -> list[Label]:
    """Threshold, drop off-field boxes and add recovered players for one frame."""
    cfg = cfg or PseudoLabelConfig()
    kept = filter_by_field(filter_by_confidence(dets, cfg.sigma), mask, cfg.min_field_overlap)
    labels = [Label(d.bbox, Provenance.TEACHER) for d in kept.items]
    added = detect_missed_players(img, mask, [lab.bbox for lab in labels], cfg, verifier, dets.frame)
    if added:
        log.debug("frame %d: %d missed players added", dets.frame, len(added))
    return labels + [Label(b, Provenance.BLOB) for b in added]


def generate_reid_tracks(
    seq: Iterable[FrameDetections], tau_iou: float = 0.7, min_len: int = 5, image_width: float = 1280.0
) -> list[Track]:
    """Spatial-only trajectories longer than ``min_len`` frames."""
    cfg = TrackerConfig(sigma_track=0.0, tau_iou=tau_iou, n_reid=0, min_track_len=min_len + 1)
    tracker = Tracker(cfg, image_width)
    for fd in seq:
        tracker.step(fd)
    return tracker.finalize()


@dataclass(frozen=True)
class ReIDSample:
    track_id: int
    frame: int
    bbox: BBox


@dataclass(frozen=True)
class ReIDBatch:
    samples: tuple[ReIDSample, ...]
    k_tracks: int
    t_samples: int

    def __post_init__(self) -> None:
        ids = [s.track_id for s in self.samples]
        if len(set(ids)) != self.k_tracks:
            raise ValueError("batch must hold exactly k_tracks identities")
        if any(ids.count(i) != self.t_samples for i in set(ids)):
            raise ValueError("every identity needs exactly t_samples samples")

    def __len__(self) -> int:
        return len(self.samples)


def _as_rng(rng: Union[np.random.Generator, int, None]) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def sample_triplet_batch(
    tracks: Sequence[Track], k_tracks: int, t_samples: int, rng: Union[np.random.Generator, int, None] = None
) -> ReIDBatch:
    """Draw ``k_tracks`` tracks, then ``t_samples`` detections from each.

    Raises:
        InsufficientTracks: when fewer than ``k_tracks`` tracks have at least
            ``t_samples`` entries.
    """
    rng = _as_rng(rng)
    eligible = [t for t in tracks if len(t) >= t_samples]
    if len(eligible) < k_tracks:
        raise InsufficientTracks(f"{len(eligible)} tracks with >= {t_samples} entries, need {k_tracks}")
    chosen = rng.choice(len(eligible), size=k_tracks, replace=False)
    samples = []
    for ti in chosen:
        track = eligible[int(ti)]
        picks = np.sort(rng.choice(len(track), size=t_samples, replace=False))
        samples.extend(ReIDSample(track.id, track.entries[p].frame, track.entries[p].bbox) for p in picks)
    return ReIDBatch(tuple(samples), k_tracks, t_samples)


def rescale_pad_augment(
    img: np.ndarray,
    labels: Sequence[BBox],
    min_scale: float,
    rng: Union[np.random.Generator, int, None] = None,
    scale: Optional[float] = None,
    random_offset: bool = False,
) -> tuple[np.ndarray, list[BBox], float]:
    """Shrink by a random factor in ``[min_scale, 1]`` and zero-pad back to size.

    The shrunk image is pasted at the top-left corner (or at a random offset
    with ``random_offset``); boxes are scaled and shifted accordingly.
    ``scale`` forces the factor.
    """
    if not 0.0 < min_scale <= 1.0:
        raise ValueError("min_scale must lie in (0, 1]")
    rng = _as_rng(rng)
    if scale is None:
        scale = 1.0 if min_scale == 1.0 else float(rng.uniform(min_scale, 1.0))
    height, width = img.shape[:2]
    if scale == 1.0:
        return img.copy(), list(labels), 1.0
    new_w = max(1, int(round(width * scale)))
    new_h = max(1, int(round(height * scale)))
    small = cv2.resize(img, (new_w, new_h), interpolation=cv2.INTER_LINEAR)
    ox = int(rng.integers(0, width - new_w + 1)) if random_offset else 0
    oy = int(rng.integers(0, height - new_h + 1)) if random_offset else 0
    canvas = np.zeros_like(img)
    canvas[oy : oy + new_h, ox : ox + new_w] = small
    return canvas, [b.scaled(scale).shifted(ox, oy) for b in labels], scale
