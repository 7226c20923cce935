"""Detection (AP, precision/recall/F1) and tracking (MOTA, IDF1) metrics.

Ground truth and hypotheses are passed per frame:

* detection metrics take ``{frame: [BBox, ...]}`` for ground truth and
  ``{frame: [(BBox, confidence), ...]}`` (or :class:`Detection` items) for
  detections;
* tracking metrics take ``{frame: [(track_id, BBox), ...]}`` on both sides.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import BBox, Detection, boxes_to_array, iou_matrix
from .matching import CostMatrix, solve_assignment

IdFrames = Mapping[int, Sequence[tuple[int, BBox]]]


@dataclass
class MetricsReport:
    ap: float = float("nan")
    precision: float = float("nan")
    recall: float = float("nan")
    f1: float = float("nan")
    mota: float = float("nan")
    fp: int = 0
    fn: int = 0
    idsw: int = 0
    gt_count: int = 0
    idf1: float = float("nan")
    idtp: int = 0
    idfp: int = 0
    idfn: int = 0

    def merged(self, other: "MetricsReport") -> "MetricsReport":
        """Sum tracking counts and recompute the tracking rates."""
        out = MetricsReport(
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            idsw=self.idsw + other.idsw,
            gt_count=self.gt_count + other.gt_count,
            idtp=self.idtp + other.idtp,
            idfp=self.idfp + other.idfp,
            idfn=self.idfn + other.idfn,
        )
        out.mota = _mota_rate(out.fn, out.fp, out.idsw, out.gt_count)
        out.idf1 = _idf1_rate(out.idtp, out.idfp, out.idfn)
        return out

    @staticmethod
    def csv_header() -> str:
        return ",".join(["sequence"] + [f.name for f in fields(MetricsReport)])

    def csv_row(self, name: str) -> str:
        vals = []
        for k, v in asdict(self).items():
            vals.append(f"{v:.6f}" if isinstance(v, float) else str(v))
        return ",".join([name] + vals)

    def table(self, mode: str) -> str:
        if mode == "det":
            rows = [("AP", self.ap), ("Precision", self.precision), ("Recall", self.recall), ("F1", self.f1)]
        else:
            rows = [
                ("MOTA", self.mota),
                ("IDF1", self.idf1),
                ("FP", self.fp),
                ("FN", self.fn),
                ("IDSW", self.idsw),
                ("GT", self.gt_count),
                ("IDTP", self.idtp),
                ("IDFP", self.idfp),
                ("IDFN", self.idfn),
            ]
        lines = []
        for name, v in rows:
            text = f"{100 * v:6.2f}" if isinstance(v, float) else f"{v:6d}"
            lines.append(f"{name:<10}{text}")
        return "\n".join(lines)


def _mota_rate(fn: int, fp: int, idsw: int, gt: int) -> float:
    return 1.0 - (fn + fp + idsw) / gt if gt else float("nan")


def _idf1_rate(idtp: int, idfp: int, idfn: int) -> float:
    denom = 2 * idtp + idfp + idfn
    return 2 * idtp / denom if denom else float("nan")


def _scored(item) -> tuple[BBox, float]:
    if isinstance(item, Detection):
        return item.bbox, item.confidence
    box, conf = item
    return box, float(conf)


def _match_detections(gt, dets, iou_thresh: float, conf_thresh: float | None = None):
    """Greedy VOC matching; returns (is_tp flags in ranked order, gt count)."""
    records = []
    for frame, items in dets.items():
        for order, item in enumerate(items):
            box, conf = _scored(item)
            if conf_thresh is not None and not conf > conf_thresh:
                continue
            records.append((-conf, frame, order, box))
    records.sort(key=lambda r: r[:3])

    gt_arrays = {f: boxes_to_array(list(b)) for f, b in gt.items()}
    used = {f: np.zeros(len(a), dtype=bool) for f, a in gt_arrays.items()}
    n_gt = sum(len(a) for a in gt_arrays.values())
    flags = np.zeros(len(records), dtype=bool)
    for r, (_, frame, _, box) in enumerate(records):
        g = gt_arrays.get(frame)
        if g is None or len(g) == 0:
            continue
        ious = iou_matrix(np.array([box.as_tuple()]), g)[0]
        ious[used[frame]] = -1.0
        k = int(np.argmax(ious))
        if ious[k] >= iou_thresh:
            flags[r] = True
            used[frame][k] = True
    return flags, n_gt


def average_precision(gt, dets, iou_thresh: float = 0.5) -> float:
    """All-point interpolated VOC average precision."""
    flags, n_gt = _match_detections(gt, dets, iou_thresh)
    if n_gt == 0 or flags.size == 0:
        return 0.0
    tp = np.cumsum(flags)
    fp = np.cumsum(~flags)
    recall = tp / n_gt
    precision = tp / (tp + fp)
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def precision_recall_f1(gt, dets, iou_thresh: float = 0.5, conf_thresh: float = 0.5) -> tuple[float, float, float]:
    flags, n_gt = _match_detections(gt, dets, iou_thresh, conf_thresh)
    tp = int(flags.sum())
    p = tp / flags.size if flags.size else 0.0
    r = tp / n_gt if n_gt else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def _frame_arrays(frames: IdFrames, f: int) -> tuple[list[int], np.ndarray]:
    items = sorted(frames.get(f, ()), key=lambda it: it[0])
    return [int(i) for i, _ in items], boxes_to_array([b for _, b in items])


def mota(gt: IdFrames, hyp: IdFrames, iou_thresh: float = 0.5) -> tuple[float, int, int, int]:
    """CLEAR-MOT accuracy.

    Returns:
        ``(MOTA, FP, FN, IDSW)``; MOTA is NaN when there is no ground truth.
    """
    fp = fn = idsw = gt_count = 0
    carried: dict[int, int] = {}  # gt id -> hyp id matched in the previous frame
    last_hyp: dict[int, int] = {}  # gt id -> last hyp id it was ever matched to
    present = set(gt) | set(hyp)
    # every frame of the span counts, so a gap breaks correspondences
    for f in range(min(present), max(present) + 1) if present else ():
        g_ids, g_boxes = _frame_arrays(gt, f)
        h_ids, h_boxes = _frame_arrays(hyp, f)
        gt_count += len(g_ids)
        ious = iou_matrix(g_boxes, h_boxes) if g_ids and h_ids else np.zeros((len(g_ids), len(h_ids)))
        h_index = {h: j for j, h in enumerate(h_ids)}

        pairs: list[tuple[int, int]] = []
        g_used = set()
        h_used = set()
        for gi, gid in enumerate(g_ids):
            hid = carried.get(gid)
            j = h_index.get(hid) if hid is not None else None
            if j is not None and j not in h_used and ious[gi, j] >= iou_thresh:
                pairs.append((gi, j))
                g_used.add(gi)
                h_used.add(j)

        g_rest = [i for i in range(len(g_ids)) if i not in g_used]
        h_rest = [j for j in range(len(h_ids)) if j not in h_used]
        if g_rest and h_rest:
            sub = ious[np.ix_(g_rest, h_rest)]
            result = solve_assignment(CostMatrix(1.0 - sub, sub >= iou_thresh))
            for a, b in result.pairs:
                gi, j = g_rest[a], h_rest[b]
                gid, hid = g_ids[gi], h_ids[j]
                if gid in last_hyp and last_hyp[gid] != hid:
                    idsw += 1
                pairs.append((gi, j))

        fn += len(g_ids) - len(pairs)
        fp += len(h_ids) - len(pairs)
        carried = {g_ids[gi]: h_ids[j] for gi, j in pairs}
        last_hyp.update(carried)
    return _mota_rate(fn, fp, idsw, gt_count), fp, fn, idsw


def identity_overlaps(gt: IdFrames, hyp: IdFrames, iou_thresh: float = 0.5):
    """Per-identity box counts and pairwise co-detected frame counts."""
    g_len: dict[int, int] = {}
    h_len: dict[int, int] = {}
    overlap: dict[tuple[int, int], int] = {}
    for f in sorted(set(gt) | set(hyp)):
        g_ids, g_boxes = _frame_arrays(gt, f)
        h_ids, h_boxes = _frame_arrays(hyp, f)
        for g in g_ids:
            g_len[g] = g_len.get(g, 0) + 1
        for h in h_ids:
            h_len[h] = h_len.get(h, 0) + 1
        if g_ids and h_ids:
            hits = iou_matrix(g_boxes, h_boxes) >= iou_thresh
            for a, b in zip(*np.nonzero(hits)):
                key = (g_ids[a], h_ids[b])
                overlap[key] = overlap.get(key, 0) + 1
    return g_len, h_len, overlap


def idf1(gt: IdFrames, hyp: IdFrames, iou_thresh: float = 0.5) -> tuple[float, int, int, int]:
    """Identity F1 from the optimal global gt-to-hypothesis identity mapping.

    Returns:
        ``(IDF1, IDTP, IDFP, IDFN)``.
    """
    g_len, h_len, overlap = identity_overlaps(gt, hyp, iou_thresh)
    total_gt, total_hyp = sum(g_len.values()), sum(h_len.values())
    idtp = 0
    if g_len and h_len and overlap:
        g_ids, h_ids = sorted(g_len), sorted(h_len)
        m = np.zeros((len(g_ids), len(h_ids)))
        gi = {g: i for i, g in enumerate(g_ids)}
        hi = {h: j for j, h in enumerate(h_ids)}
        for (g, h), c in overlap.items():
            m[gi[g], hi[h]] = c
        result = solve_assignment(CostMatrix(m.max() - m))
        idtp = int(sum(m[a, b] for a, b in result.pairs))
    idfn = total_gt - idtp
    idfp = total_hyp - idtp
    return _idf1_rate(idtp, idfp, idfn), idtp, idfp, idfn


def evaluate_tracking(gt: IdFrames, hyp: IdFrames, iou_thresh: float = 0.5) -> MetricsReport:
    m, fp, fn, idsw = mota(gt, hyp, iou_thresh)
    f1, idtp, idfp, idfn = idf1(gt, hyp, iou_thresh)
    gt_count = sum(len(v) for v in gt.values())
    return MetricsReport(mota=m, fp=fp, fn=fn, idsw=idsw, gt_count=gt_count, idf1=f1, idtp=idtp, idfp=idfp, idfn=idfn)


def evaluate_detections(gt, dets, iou_thresh: float = 0.5, conf_thresh: float = 0.5) -> MetricsReport:
    ap = average_precision(gt, dets, iou_thresh)
    p, r, f1 = precision_recall_f1(gt, dets, iou_thresh, conf_thresh)
    gt_count = sum(len(v) for v in gt.values())
    return MetricsReport(ap=ap, precision=p, recall=r, f1=f1, gt_count=gt_count)


def tracks_to_frames(tracks: Iterable) -> dict[int, list[tuple[int, BBox]]]:
    """Convert :class:`~pitchtrack.tracker.Track` objects to per-frame form."""
    out: dict[int, list[tuple[int, BBox]]] = {}
    for t in tracks:
        for e in t.entries:
            out.setdefault(e.frame, []).append((t.id, e.bbox))
    return out
