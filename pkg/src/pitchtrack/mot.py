"""Text file formats.

All box files use the MOT Challenge layout, one box per line::

    frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z

Frames are 1-based and raw detections carry id ``-1``. Label files written
by the pseudo-labeling stage put a provenance code in the eighth column
(1 = teacher detection, 2 = blob-added). Re-ID batch manifests are CSV files
with rows ``track_id,frame,x,y,w,h``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .core import BBox, Detection, FrameDetections
from .errors import DegenerateBox, FormatError

PROVENANCE_CODES = {"teacher": 1, "blob-added": 2}


@dataclass(frozen=True)
class MotRow:
    frame: int
    id: int
    bbox: BBox
    conf: float = 1.0
    tag: int = -1


def _fmt(v: float) -> str:
    return f"{v:.4f}"


def format_row(row: MotRow) -> str:
    x, y, w, h = row.bbox.to_xywh()
    return f"{row.frame},{row.id},{_fmt(x)},{_fmt(y)},{_fmt(w)},{_fmt(h)},{_fmt(row.conf)},{row.tag},-1,-1"


def write_rows(path, rows: Iterable[MotRow]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for row in rows:
            fh.write(format_row(row) + "\n")


def _int(text: str) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(v)


def read_rows(path) -> list[MotRow]:
    """Parse a MOT file.

    Blank lines and lines starting with ``#`` are skipped.

    Raises:
        FormatError: on malformed rows, frames below 1 or degenerate boxes.
    """
    rows = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = [p.strip() for p in text.split(",")]
            if len(parts) < 6:
                raise FormatError(f"{path}:{lineno}: expected at least 6 columns, got {len(parts)}")
            try:
                frame, tid = _int(parts[0]), _int(parts[1])
                x, y, w, h = (float(p) for p in parts[2:6])
                conf = float(parts[6]) if len(parts) > 6 else 1.0
                tag = _int(parts[7]) if len(parts) > 7 else -1
                box = BBox.from_xywh(x, y, w, h)
            except (ValueError, DegenerateBox) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            if frame < 1:
                raise FormatError(f"{path}:{lineno}: frames are 1-based, got {frame}")
            rows.append(MotRow(frame, tid, box, conf, tag))
    return rows


def read_detections(path) -> dict[int, FrameDetections]:
    """Detections per frame, in file order; the id column is ignored."""
    per_frame: dict[int, list[Detection]] = {}
    for r in read_rows(path):
        if not 0.0 <= r.conf <= 1.0:
            raise FormatError(f"{path}: confidence {r.conf} outside [0, 1] in frame {r.frame}")
        per_frame.setdefault(r.frame, []).append(Detection(r.frame, r.bbox, r.conf))
    return {f: FrameDetections(f, tuple(d)) for f, d in sorted(per_frame.items())}


def write_detections(path, dets: Mapping[int, FrameDetections]) -> None:
    write_rows(path, (MotRow(f, -1, d.bbox, d.confidence) for f in sorted(dets) for d in dets[f].items))


def read_tracks(path) -> dict[int, list[tuple[int, BBox]]]:
    """Identity-labeled boxes per frame (ground truth or tracker output)."""
    out: dict[int, list[tuple[int, BBox]]] = {}
    for r in read_rows(path):
        out.setdefault(r.frame, []).append((r.id, r.bbox))
    return dict(sorted(out.items()))


def read_boxes(path) -> dict[int, list[BBox]]:
    """Boxes per frame, ignoring ids (detection ground truth)."""
    return {f: [b for _, b in items] for f, items in read_tracks(path).items()}


def read_scored(path) -> dict[int, list[tuple[BBox, float]]]:
    out: dict[int, list[tuple[BBox, float]]] = {}
    for r in read_rows(path):
        out.setdefault(r.frame, []).append((r.bbox, r.conf))
    return dict(sorted(out.items()))


def write_tracks(path, tracks: Iterable) -> None:
    """Write :class:`~pitchtrack.tracker.Track` objects, ordered by frame then id."""
    rows = [MotRow(e.frame, t.id, e.bbox, e.confidence) for t in tracks for e in t.entries]
    rows.sort(key=lambda r: (r.frame, r.id))
    write_rows(path, rows)


def write_frames(path, frames: Mapping[int, Sequence[tuple[int, BBox]]]) -> None:
    """Write ``{frame: [(id, box)]}``, ordered by frame then id."""
    write_rows(path, (MotRow(f, tid, b) for f in sorted(frames) for tid, b in sorted(frames[f], key=lambda p: p[0])))


def write_labels(path, labels) -> None:
    """Write a :class:`~pitchtrack.pseudolabel.LabelSet` as id-less ground truth."""
    rows = []
    for f in sorted(labels.frames):
        for lab in labels.frames[f]:
            rows.append(MotRow(f, -1, lab.bbox, 1.0, PROVENANCE_CODES[lab.provenance.value]))
    write_rows(path, rows)


def read_labels(path):
    from .pseudolabel import Label, LabelSet, Provenance

    by_code = {code: Provenance(name) for name, code in PROVENANCE_CODES.items()}
    out = LabelSet()
    for r in read_rows(path):
        if r.tag not in by_code:
            raise FormatError(f"{path}: unknown provenance code {r.tag} in frame {r.frame}")
        out.frames.setdefault(r.frame, []).append(Label(r.bbox, by_code[r.tag]))
    return out


def write_reid_manifest(path, batch) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["track_id", "frame", "x", "y", "w", "h"])
        for s in batch.samples:
            w.writerow([s.track_id, s.frame, *(_fmt(v) for v in s.bbox.to_xywh())])


def read_reid_manifest(path, k_tracks: int, t_samples: int):
    from .pseudolabel import ReIDBatch, ReIDSample

    samples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["track_id", "frame", "x", "y", "w", "h"]:
            raise FormatError(f"{path}: unexpected manifest header {header}")
        for lineno, row in enumerate(reader, start=2):
            try:
                tid, frame = int(row[0]), int(row[1])
                box = BBox.from_xywh(*(float(v) for v in row[2:6]))
            except (ValueError, IndexError, DegenerateBox) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            samples.append(ReIDSample(tid, frame, box))
    try:
        return ReIDBatch(tuple(samples), k_tracks, t_samples)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
