"""Two-stage tracking-by-detection.

Each frame is processed in order:

1. detections at or below ``sigma_track`` are dropped;
2. spatial association links a detection to an active track when the
   track's last box is the *unique* previous box overlapping it above
   ``tau_iou`` (a previous box claimed by several detections links none);
3. active tracks left without a detection are deactivated;
4. remaining detections are matched to deactivated tracks by a gated
   Hungarian assignment on a mixed appearance/center-distance cost;
5. still-unmatched detections open new tracks;
6. deactivated tracks unseen for more than ``n_reid`` frames are killed.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import BBox, FrameDetections, boxes_to_array, iou_matrix
from .errors import MissingEmbedding, OutOfOrderFrame
from .matching import CostMatrix, solve_assignment

log = logging.getLogger(__name__)


class TrackState(enum.Enum):
    ACTIVE = "active"
    DEACTIVATED = "deactivated"
    KILLED = "killed"


@dataclass
class TrackEntry:
    frame: int
    bbox: BBox
    confidence: float = 1.0
    embedding: Optional[np.ndarray] = None

    @property
    def center(self) -> tuple[float, float]:
        b = self.bbox
        return ((b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0)


@dataclass
class Track:
    id: int
    entries: list[TrackEntry] = field(default_factory=list)
    state: TrackState = TrackState.ACTIVE
    age: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    def append(self, entry: TrackEntry) -> None:
        if self.entries and entry.frame <= self.entries[-1].frame:
            raise OutOfOrderFrame(f"track {self.id}: frame {entry.frame} after {self.entries[-1].frame}")
        self.entries.append(entry)

    @property
    def last(self) -> TrackEntry:
        return self.entries[-1]

    @property
    def frames(self) -> list[int]:
        return [e.frame for e in self.entries]

    @property
    def boxes(self) -> list[BBox]:
        return [e.bbox for e in self.entries]


@dataclass
class TrackerConfig:
    sigma_track: float = 0.5
    tau_iou: float = 0.7
    n_reid: int = 10
    alpha: float = 0.03
    d_visual_max: float = 4.0
    d_spatial_max_frac: float = 1.0 / 16.0
    k_last: int = 5
    min_track_len: int = 5

    def __post_init__(self) -> None:
        if not 0.0 < self.tau_iou < 1.0:
            raise ValueError("tau_iou must lie in (0, 1)")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.n_reid < 0:
            raise ValueError("n_reid must be non-negative")
        if self.k_last < 1:
            raise ValueError("k_last must be at least 1")
        if not 0.0 <= self.sigma_track <= 1.0:
            raise ValueError("sigma_track must lie in [0, 1]")
        if self.d_visual_max <= 0 or self.d_spatial_max_frac <= 0:
            raise ValueError("distance gates must be positive")
        if self.min_track_len < 0:
            raise ValueError("min_track_len must be non-negative")


@dataclass(frozen=True)
class SpatialResult:
    matches: list[tuple[int, int]]  # (prev_idx, cur_idx)
    leftovers: list[int]
    lost: list[int]


def spatial_associate(prev: Sequence[BBox], cur: Sequence[BBox], tau_iou: float) -> SpatialResult:
    if not prev or not cur:
        return SpatialResult([], list(range(len(cur))), list(range(len(prev))))
    above = iou_matrix(boxes_to_array(prev), boxes_to_array(cur)) > tau_iou
    per_prev = above.sum(axis=1)
    per_cur = above.sum(axis=0)
    ok = above & (per_prev[:, None] == 1) & (per_cur[None, :] == 1)
    js, is_ = np.nonzero(ok)
    matches = sorted(zip(js.tolist(), is_.tolist()), key=lambda p: p[1])
    matched_prev = {j for j, _ in matches}
    matched_cur = {i for _, i in matches}
    return SpatialResult(
        matches,
        [i for i in range(len(cur)) if i not in matched_cur],
        [j for j in range(len(prev)) if j not in matched_prev],
    )


def _tail(track: Track, k_last: int) -> list[TrackEntry]:
    tail = track.entries[-k_last:]
    if any(e.embedding is None for e in tail):
        raise MissingEmbedding(f"track {track.id} has entries without embeddings")
    return tail


def track_cost(box: BBox, embedding, track: Track, cfg: TrackerConfig) -> float:
    """Mean mixed cost against the last ``k_last`` entries of ``track``."""
    if embedding is None:
        raise MissingEmbedding("detection has no embedding")
    emb = np.asarray(embedding, dtype=np.float64)
    cx, cy = (box.x_min + box.x_max) / 2.0, (box.y_min + box.y_max) / 2.0
    total = 0.0
    tail = _tail(track, cfg.k_last)
    for e in tail:
        ex, ey = e.center
        d_vis = float(np.linalg.norm(emb - e.embedding))
        d_sp = math.hypot(cx - ex, cy - ey)
        total += cfg.alpha * d_vis + (1.0 - cfg.alpha) * d_sp
    return total / len(tail)


def _centers(boxes: np.ndarray) -> np.ndarray:
    return np.column_stack(((boxes[:, 0] + boxes[:, 2]) / 2.0, (boxes[:, 1] + boxes[:, 3]) / 2.0))


def reid_associate(
    deactivated: Sequence[Track],
    boxes: Sequence[BBox],
    embeddings: Optional[np.ndarray],
    cfg: TrackerConfig,
    image_width: float,
) -> list[tuple[int, int]]:
    """Match leftover detections to deactivated tracks.

    Returns:
        ``(track_idx, box_idx)`` pairs indexing ``deactivated`` and ``boxes``.
        Pairs failing ``D_spatial < d_spatial_max_frac * image_width`` or
        ``D_visual < d_visual_max`` against the track's most recent entry are
        never returned.
    """
    if not deactivated or not boxes:
        return []
    if embeddings is None:
        raise MissingEmbedding("re-identification needs detection embeddings")
    embs = np.asarray(embeddings, dtype=np.float64).reshape(len(boxes), -1)
    det_centers = _centers(boxes_to_array(boxes))
    d_spatial_max = cfg.d_spatial_max_frac * image_width

    n_t, n_d = len(deactivated), len(boxes)
    cost = np.zeros((n_t, n_d))
    allowed = np.zeros((n_t, n_d), dtype=bool)
    for ti, track in enumerate(deactivated):
        tail = _tail(track, cfg.k_last)
        t_centers = np.array([e.center for e in tail])
        t_embs = np.stack([e.embedding for e in tail])
        if t_embs.shape[1] != embs.shape[1]:
            raise MissingEmbedding(f"track {track.id} embeddings have dimension {t_embs.shape[1]}")
        d_sp = np.linalg.norm(det_centers[:, None, :] - t_centers[None, :, :], axis=2)
        d_vis = np.linalg.norm(embs[:, None, :] - t_embs[None, :, :], axis=2)
        cost[ti] = (cfg.alpha * d_vis + (1.0 - cfg.alpha) * d_sp).mean(axis=1)
        # gates use the most recent entry
        allowed[ti] = (d_sp[:, -1] < d_spatial_max) & (d_vis[:, -1] < cfg.d_visual_max)
    if not allowed.any():
        return []
    return list(solve_assignment(CostMatrix(cost, allowed)).pairs)


class Tracker:
    """Stateful tracker; feed frames in strictly increasing order.

    Args:
        cfg: Tracker parameters.
        image_width: Image width in pixels, used by the spatial re-ID gate.
    """

    def __init__(self, cfg: Optional[TrackerConfig] = None, image_width: float = 1280.0):
        self.cfg = cfg or TrackerConfig()
        self.image_width = float(image_width)
        self.tracks: dict[int, Track] = {}
        self.active: list[Track] = []
        self.deactivated: list[Track] = []
        self.next_id = 1
        self.frame: Optional[int] = None

    def _new_track(self, entry: TrackEntry) -> Track:
        t = Track(self.next_id, [entry])
        self.tracks[t.id] = t
        self.next_id += 1
        return t

    def step(self, frame: FrameDetections, embeddings=None) -> list[Optional[int]]:
        """Advance by one frame.

        Args:
            frame: Detections of the new frame.
            embeddings: Optional ``(n, D)`` array aligned with ``frame.items``.

        Returns:
            Track id per input detection (``None`` for detections dropped by
            the confidence threshold).
        """
        f = frame.frame
        if self.frame is not None and f <= self.frame:
            raise OutOfOrderFrame(f"frame {f} received after frame {self.frame}")
        self.frame = f
        cfg = self.cfg
        if embeddings is not None:
            embeddings = np.asarray(embeddings, dtype=np.float64)
            if len(embeddings) != len(frame.items):
                raise ValueError("embeddings must align with the frame's detections")

        ids: list[Optional[int]] = [None] * len(frame.items)
        kept = [i for i, d in enumerate(frame.items) if d.confidence > cfg.sigma_track]
        boxes = [frame.items[i].bbox for i in kept]

        def entry(k: int) -> TrackEntry:
            src = kept[k]
            emb = None if embeddings is None else embeddings[src]
            return TrackEntry(f, frame.items[src].bbox, frame.items[src].confidence, emb)

        # tracks that missed skipped frames are already lost
        stale = [t for t in self.active if t.last.frame < f - 1]
        for t in stale:
            t.state = TrackState.DEACTIVATED
            self.deactivated.append(t)
        self.active = [t for t in self.active if t.last.frame >= f - 1]

        spatial = spatial_associate([t.last.bbox for t in self.active], boxes, cfg.tau_iou)
        still_active = []
        for j, k in spatial.matches:
            track = self.active[j]
            track.append(entry(k))
            ids[kept[k]] = track.id
            still_active.append(track)
        for j in spatial.lost:
            track = self.active[j]
            track.state = TrackState.DEACTIVATED
            self.deactivated.append(track)

        for t in self.deactivated:
            t.age = f - t.last.frame
        eligible = [t for t in self.deactivated if t.age <= cfg.n_reid]
        leftovers = spatial.leftovers
        reid_pairs: list[tuple[int, int]] = []
        if eligible and leftovers:
            left_emb = None if embeddings is None else embeddings[[kept[k] for k in leftovers]]
            reid_pairs = reid_associate(eligible, [boxes[k] for k in leftovers], left_emb, cfg, self.image_width)
        revived = set()
        taken = set()
        for ti, li in reid_pairs:
            track = eligible[ti]
            k = leftovers[li]
            track.append(entry(k))
            track.state = TrackState.ACTIVE
            track.age = 0
            ids[kept[k]] = track.id
            still_active.append(track)
            revived.add(track.id)
            taken.add(k)
            log.debug("frame %d: track %d re-identified", f, track.id)

        for k in leftovers:
            if k in taken:
                continue
            track = self._new_track(entry(k))
            ids[kept[k]] = track.id
            still_active.append(track)

        remaining = []
        for t in self.deactivated:
            if t.id in revived:
                continue
            t.age += 1
            if t.age > cfg.n_reid:
                t.state = TrackState.KILLED
            else:
                remaining.append(t)
        self.deactivated = remaining
        self.active = sorted(still_active, key=lambda t: t.id)
        return ids

    def finalize(self) -> list[Track]:
        """All tracks with at least ``min_track_len`` entries, sorted by id."""
        return [t for _, t in sorted(self.tracks.items()) if len(t) >= self.cfg.min_track_len]

    def run(
        self, frames: Iterable[FrameDetections], embeddings: Optional[Iterable] = None
    ) -> list[Track]:
        emb_iter = iter(embeddings) if embeddings is not None else None
        for fd in frames:
            self.step(fd, None if emb_iter is None else next(emb_iter))
        return self.finalize()


def interpolate_gaps(track: Track) -> list[TrackEntry]:
    """Entries with linearly interpolated boxes filling frame gaps.

    For display only; interpolated entries carry no embedding and confidence 0.
    """
    out: list[TrackEntry] = []
    for a, b in zip(track.entries, track.entries[1:]):
        out.append(a)
        gap = b.frame - a.frame
        for s in range(1, gap):
            w = s / gap
            box = BBox(*((1 - w) * p + w * q for p, q in zip(a.bbox.as_tuple(), b.bbox.as_tuple())))
            out.append(TrackEntry(a.frame + s, box, 0.0, None))
    if track.entries:
        out.append(track.entries[-1])
    return out
