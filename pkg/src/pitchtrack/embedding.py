"""Appearance embeddings and the batch-hard triplet loss.

Two providers are available: :class:`HistogramEmbedder` computes a unit-norm
HSV color histogram from image pixels, and :class:`ExternalEmbeddings` serves
vectors produced elsewhere (e.g. by a detector's ROI features) from a CSV
file with rows ``frame,det_index,v0,...,v{D-1}``.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence

import cv2
import numpy as np

from .core import BBox
from .errors import DegenerateBox, DimensionMismatch, FormatError, MissingKey

# Gate default for externally supplied (DNN) embeddings.
EXTERNAL_VISUAL_GATE = 4.0


class EmbeddingProvider(Protocol):
    dim: int
    distance_scale: float

    @property
    def default_visual_gate(self) -> float: ...


class HistogramEmbedder:
    """Joint HSV histogram of a box's pixels, scaled to unit Euclidean norm.

    Args:
        bins: Bin counts for hue, saturation and value.
        gate_fraction: Fraction of ``distance_scale`` used as the default
            visual gate for the tracker.
    """

    def __init__(self, bins: tuple[int, int, int] = (8, 8, 4), gate_fraction: float = 0.8):
        if any(b < 1 for b in bins):
            raise ValueError("histogram bins must be positive")
        self.bins = tuple(int(b) for b in bins)
        self.dim = self.bins[0] * self.bins[1] * self.bins[2]
        # unit vectors with disjoint support are sqrt(2) apart
        self.distance_scale = math.sqrt(2.0)
        self.gate_fraction = gate_fraction

    @property
    def default_visual_gate(self) -> float:
        return self.gate_fraction * self.distance_scale

    def embed(self, img: np.ndarray, b: BBox) -> np.ndarray:
        height, width = img.shape[:2]
        rs, cs = b.pixel_slice(width, height)
        patch = img[rs, cs]
        if patch.size == 0:
            raise DegenerateBox(f"box {b.as_tuple()} has no pixels inside the image")
        hsv = cv2.cvtColor(np.ascontiguousarray(patch), cv2.COLOR_RGB2HSV).reshape(-1, 3).astype(np.int64)
        hb, sb, vb = self.bins
        idx = ((hsv[:, 0] * hb // 180) * sb + hsv[:, 1] * sb // 256) * vb + hsv[:, 2] * vb // 256
        hist = np.bincount(idx, minlength=self.dim).astype(np.float64)
        return hist / np.linalg.norm(hist)

    def embed_boxes(self, img: np.ndarray, boxes: Sequence[BBox]) -> np.ndarray:
        out = np.zeros((len(boxes), self.dim))
        for i, b in enumerate(boxes):
            out[i] = self.embed(img, b)
        return out


def embed_histogram(img: np.ndarray, b: BBox, bins: tuple[int, int, int] = (8, 8, 4)) -> np.ndarray:
    return HistogramEmbedder(bins).embed(img, b)


class ExternalEmbeddings:
    """Embedding store keyed by ``(frame, detection index)``."""

    distance_scale = EXTERNAL_VISUAL_GATE

    def __init__(self, dim: Optional[int] = None):
        self.dim = dim
        self._store: dict[tuple[int, int], np.ndarray] = {}

    @property
    def default_visual_gate(self) -> float:
        return EXTERNAL_VISUAL_GATE

    def __len__(self) -> int:
        return len(self._store)

    def __contains__(self, key) -> bool:
        return key in self._store

    def add(self, frame: int, det_index: int, vector: Iterable[float]) -> None:
        vec = np.asarray(list(vector), dtype=np.float64)
        if self.dim is None:
            self.dim = vec.size
        elif vec.size != self.dim:
            raise DimensionMismatch(f"expected {self.dim} values, got {vec.size} at ({frame}, {det_index})")
        if not np.all(np.isfinite(vec)):
            raise FormatError(f"non-finite embedding at ({frame}, {det_index})")
        self._store[(int(frame), int(det_index))] = vec

    def get(self, frame: int, det_index: int) -> np.ndarray:
        try:
            return self._store[(frame, det_index)]
        except KeyError:
            raise MissingKey(f"no embedding for frame {frame}, detection {det_index}") from None

    def for_frame(self, frame: int, count: int) -> np.ndarray:
        if count == 0:
            return np.zeros((0, self.dim or 0))
        return np.stack([self.get(frame, i) for i in range(count)])

    def keys(self):
        return sorted(self._store)


def load_external_embeddings(path) -> ExternalEmbeddings:
    store = ExternalEmbeddings()
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                frame, idx = int(row[0]), int(row[1])
                values = [float(v) for v in row[2:]]
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            if not values:
                raise FormatError(f"{path}:{lineno}: row has no embedding values")
            store.add(frame, idx, values)
    return store


def write_embeddings(path, rows: Iterable[tuple[int, int, np.ndarray]]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for frame, idx, vec in rows:
            w.writerow([frame, idx, *(f"{v:.8g}" for v in vec)])


def visual_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"embedding shapes {a.shape} and {b.shape} differ")
    return float(np.linalg.norm(a - b))


def pairwise_distances(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def triplet_loss(embeddings, labels: Sequence, margin: float = 2.0) -> float:
    """Batch-hard triplet loss summed over every anchor.

    For each anchor the hardest positive is the farthest sample sharing its
    label (the anchor itself included) and the hardest negative the closest
    sample with another label; the anchor contributes
    ``max(0, margin + d_pos - d_neg)``.
    """
    labels = np.asarray(labels)
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != labels.shape[0]:
        raise DimensionMismatch("embeddings must be (N, D) with one label per row")
    if np.unique(labels).size < 2:
        raise ValueError("triplet loss needs at least two identities")
    dist = pairwise_distances(x)
    same = labels[:, None] == labels[None, :]
    hardest_pos = np.where(same, dist, -np.inf).max(axis=1)
    hardest_neg = np.where(same, np.inf, dist).min(axis=1)
    return float(np.maximum(margin + hardest_pos - hardest_neg, 0.0).sum())


def batch_triplet_loss(batch, lookup, margin: float = 2.0) -> float:
    """Triplet loss over a :class:`~pitchtrack.pseudolabel.ReIDBatch`.

    ``lookup(sample)`` returns the embedding vector of one batch sample.
    """
    vecs = [np.asarray(lookup(s), dtype=np.float64) for s in batch.samples]
    dims = {v.shape for v in vecs}
    if len(dims) > 1:
        raise DimensionMismatch(f"mixed embedding shapes {sorted(dims)}")
    return triplet_loss(np.stack(vecs), [s.track_id for s in batch.samples], margin)
