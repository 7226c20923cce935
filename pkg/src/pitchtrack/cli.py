"""Command-line interface.

Exit codes: 0 on success, 1 for usage or configuration errors, 2 for data
errors (unreadable or malformed inputs). Set ``PITCHTRACK_LOG_LEVEL`` (e.g.
``DEBUG``) to change log verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import cv2
import numpy as np

from . import images, mot
from .config import Config, ConfigError, load_config
from .core import BBox, FrameDetections, soft_nms
from .embedding import HistogramEmbedder, load_external_embeddings, write_embeddings
from .errors import MissingKey, PitchTrackError
from .fieldmask import compute_field_mask
from .metrics import MetricsReport, evaluate_detections, evaluate_tracking
from .pseudolabel import (
    LabelSet,
    Provenance,
    VerdictFileVerifier,
    correct_annotations,
    generate_reid_tracks,
    rescale_pad_augment,
    sample_triplet_batch,
)
from .synth import corrupt_detections, field_region, generate_scenario, gt_frames, render_frame
from .tracker import Track, TrackEntry, Tracker, interpolate_gaps

log = logging.getLogger("pitchtrack")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
LOG_ENV = "PITCHTRACK_LOG_LEVEL"

# BGR-agnostic bright colors for overlays; ids are hashed into this list
OVERLAY_PALETTE = [
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200), (245, 130, 48),
    (145, 30, 180), (70, 240, 240), (240, 50, 230), (210, 245, 60), (250, 190, 212),
    (0, 128, 128), (220, 190, 255), (170, 110, 40), (255, 250, 200), (128, 0, 0),
    (170, 255, 195), (128, 128, 0), (255, 215, 180), (0, 0, 128), (255, 255, 255),
]


class UsageError(PitchTrackError):
    """Arguments are inconsistent or a precondition of the command is unmet."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def overlay_color(track_id: int) -> tuple[int, int, int]:
    return OVERLAY_PALETTE[zlib.crc32(str(track_id).encode()) % len(OVERLAY_PALETTE)]


def _config(args) -> Config:
    return load_config(args.config, args.set or ())


def _frame_range(*frame_sets) -> range:
    frames = set().union(*frame_sets)
    if not frames:
        return range(0)
    return range(min(frames), max(frames) + 1)


def _image_for(frames: dict[int, Path], f: int) -> np.ndarray:
    if f not in frames:
        raise MissingKey(f"no image for frame {f}")
    return images.read_image(frames[f])


def _histogram_embedder(cfg: Config) -> HistogramEmbedder:
    return HistogramEmbedder(cfg.embedding.bins, cfg.embedding.gate_fraction)


# --- track -----------------------------------------------------------------


def cmd_track(args) -> int:
    cfg = _config(args)
    dets = mot.read_detections(args.detections)
    if not dets:
        mot.write_rows(args.output, [])
        log.info("no detections; wrote empty result %s", args.output)
        return EXIT_OK

    provider = "external" if args.embeddings else cfg.embedding.provider
    store = frames = embedder = None
    if provider == "external":
        if not args.embeddings:
            raise UsageError("the external embedding provider needs --embeddings")
        store = load_external_embeddings(args.embeddings)
        gate = cfg.tracker.d_visual_max
    else:
        if not args.images:
            raise UsageError("track needs --embeddings or --images to compute appearance embeddings")
        embedder = _histogram_embedder(cfg)
        gate = cfg.embedding.visual_gate if cfg.embedding.visual_gate is not None else embedder.default_visual_gate
    if args.images:
        frames = images.list_frames(args.images)

    width = args.image_width
    if frames:
        width = images.read_image(next(iter(frames.values()))).shape[1]
    tracker = Tracker(replace(cfg.tracker, d_visual_max=gate), width)
    pre = cfg.preprocess
    for f in _frame_range(dets, frames or {}):
        fd = dets.get(f, FrameDetections(f))
        fd = FrameDetections(f, tuple(replace(d, embedding_key=(f, i)) for i, d in enumerate(fd.items)))
        if pre.soft_nms:
            fd = soft_nms(fd, pre.iou_gate, pre.score_floor, pre.method, pre.sigma)
        if not fd.items:
            emb = None
        elif store is not None:
            emb = np.stack([store.get(*d.embedding_key) for d in fd.items])
        else:
            emb = embedder.embed_boxes(_image_for(frames, f), fd.boxes)
        tracker.step(fd, emb)
    tracks = tracker.finalize()
    mot.write_tracks(args.output, tracks)
    log.info("%d tracks written to %s", len(tracks), args.output)
    return EXIT_OK


# --- eval ------------------------------------------------------------------


def _restrict(data: dict, lo: int, hi: int) -> dict:
    return {f: v for f, v in data.items() if lo <= f <= hi}


def _evaluate_pair(gt_path, res_path, mode: str, iou_thresh: float, conf_thresh: float):
    """Load one (gt, result) pair, align frame ranges and evaluate it."""
    if mode == "mot":
        gt, res = mot.read_tracks(gt_path), mot.read_tracks(res_path)
    else:
        gt, res = mot.read_boxes(gt_path), mot.read_scored(res_path)
    warning = None
    if gt and res:
        g_range, r_range = (min(gt), max(gt)), (min(res), max(res))
        if g_range != r_range:
            lo, hi = max(g_range[0], r_range[0]), min(g_range[1], r_range[1])
            warning = f"{res_path}: frames {r_range} differ from ground truth {g_range}; evaluating {lo}..{hi}"
            gt, res = _restrict(gt, lo, hi), _restrict(res, lo, hi)
    if mode == "mot":
        report = evaluate_tracking(gt, res, iou_thresh)
    else:
        report = evaluate_detections(gt, res, iou_thresh, conf_thresh)
    return report, warning, gt, res


def cmd_eval(args) -> int:
    cfg = _config(args)
    gt_path, res_path = Path(args.gt), Path(args.result)
    if gt_path.is_dir() != res_path.is_dir():
        raise UsageError("gt and result must both be files or both be directories")
    if gt_path.is_dir():
        names = sorted(p.name for p in res_path.glob("*.txt"))
        missing = [n for n in names if not (gt_path / n).exists()]
        if missing:
            raise UsageError(f"no ground truth for {', '.join(missing)}")
        pairs = [(n, gt_path / n, res_path / n) for n in names]
    else:
        pairs = [(res_path.stem, gt_path, res_path)]
    if not pairs:
        raise UsageError(f"no result files in {res_path}")

    jobs = [(g, r, args.mode, cfg.metrics.iou_thresh, cfg.metrics.conf_thresh) for _, g, r in pairs]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(_evaluate_pair, *zip(*jobs)))
    else:
        results = [_evaluate_pair(*job) for job in jobs]

    rows = []
    for (name, _, _), (report, warning, _, _) in zip(pairs, results):
        if warning:
            log.warning(warning)
        rows.append((name, report))
    if len(rows) > 1:
        if args.mode == "mot":
            total = rows[0][1]
            for _, r in rows[1:]:
                total = total.merged(r)
        else:
            # detections are pooled across sequences before ranking
            gt_all, res_all = {}, {}
            for (name, _, _), (_, _, gt, res) in zip(pairs, results):
                gt_all.update({(name, f): v for f, v in gt.items()})
                res_all.update({(name, f): v for f, v in res.items()})
            total = evaluate_detections(gt_all, res_all, cfg.metrics.iou_thresh, cfg.metrics.conf_thresh)
        rows.append(("total", total))

    print(rows[-1][1].table(args.mode))
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        with open(args.output, "w") as fh:
            fh.write(MetricsReport.csv_header() + "\n")
            for name, r in rows:
                fh.write(r.csv_row(name) + "\n")
    return EXIT_OK


# --- fieldmask -------------------------------------------------------------


def cmd_fieldmask(args) -> int:
    cfg = _config(args)
    frames = images.list_frames(args.images)
    lines = images.list_frames(args.line_masks) if args.line_masks else {}
    fm = replace(cfg.fieldmask, auto_lines=cfg.fieldmask.auto_lines or args.auto_lines)
    for f, path in frames.items():
        line_mask = images.read_mask(lines[f]) if f in lines else None
        mask = compute_field_mask(images.read_image(path), line_mask, fm)
        images.write_mask(Path(args.output) / images.frame_name(f), mask)
    log.info("%d field masks written to %s", len(frames), args.output)
    return EXIT_OK


# --- pseudolabel -----------------------------------------------------------


def _field_mask_for(f: int, img: np.ndarray, masks: dict[int, Path], cfg: Config) -> np.ndarray:
    if f in masks:
        return images.read_mask(masks[f])
    return compute_field_mask(img, None, cfg.fieldmask)


def cmd_pseudolabel(args) -> int:
    cfg = _config(args)
    dets = mot.read_detections(args.detections)
    frames = images.list_frames(args.images)
    masks = images.list_frames(args.masks) if args.masks else {}
    verifier = VerdictFileVerifier(args.verdicts) if args.verdicts else None
    labels = LabelSet()
    for f, path in frames.items():
        img = images.read_image(path)
        mask = _field_mask_for(f, img, masks, cfg)
        labels.frames[f] = correct_annotations(dets.get(f, FrameDetections(f)), img, mask, cfg.pseudolabel, verifier)
    mot.write_labels(args.output, labels)
    log.info(
        "%d labels (%d blob-added) written to %s",
        labels.count(),
        labels.count(Provenance.BLOB),
        args.output,
    )
    if args.augment_dir:
        _export_augmented(args.augment_dir, frames, labels, cfg)
    return EXIT_OK


def _export_augmented(out_dir, frames: dict[int, Path], labels: LabelSet, cfg: Config) -> None:
    """Write rescaled copies of every frame with their relabeled boxes.

    Output frames are renumbered from 1; ``index.csv`` maps each one back to
    its source frame and scale factor.
    """
    aug = cfg.augment
    rng = np.random.default_rng(aug.seed)
    min_scale = aug.resolved_min_scale()
    out_dir = Path(out_dir)
    rows, index = [], ["frame,source_frame,scale"]
    n = 0
    for f, path in frames.items():
        img = images.read_image(path)
        for _ in range(aug.copies):
            n += 1
            canvas, boxes, scale = rescale_pad_augment(img, labels.boxes(f), min_scale, rng, random_offset=aug.random_offset)
            images.write_image(out_dir / "frames" / images.frame_name(n), canvas)
            rows.extend(mot.MotRow(n, -1, b) for b in boxes)
            index.append(f"{n},{f},{scale:.6f}")
    mot.write_rows(out_dir / "labels.txt", rows)
    (out_dir / "index.csv").write_text("\n".join(index) + "\n")


# --- reid-dataset ----------------------------------------------------------


def cmd_reid_dataset(args) -> int:
    cfg = _config(args)
    dets = mot.read_detections(args.detections)
    frames = images.list_frames(args.images) if args.images else {}
    width = args.image_width
    if frames:
        width = images.read_image(next(iter(frames.values()))).shape[1]
    seq = [dets.get(f, FrameDetections(f)) for f in _frame_range(dets)]
    pl = cfg.pseudolabel
    tracks = generate_reid_tracks(seq, pl.tau_iou, pl.min_track_len, width)
    out = Path(args.output)
    mot.write_tracks(out / "tracks.txt", tracks)
    rng = np.random.default_rng(cfg.reid_dataset.seed)
    needed: set[tuple[int, int, BBox]] = set()
    for b in range(cfg.reid_dataset.batches):
        batch = sample_triplet_batch(tracks, pl.k_tracks, pl.t_samples, rng)
        mot.write_reid_manifest(out / f"batch_{b:03d}.csv", batch)
        needed.update((s.track_id, s.frame, s.bbox) for s in batch.samples)
    if frames:
        cache: dict[int, np.ndarray] = {}
        for tid, f, box in sorted(needed, key=lambda s: (s[1], s[0])):
            if f not in cache:
                cache.clear()
                cache[f] = _image_for(frames, f)
            img = cache[f]
            rs, cs = box.pixel_slice(img.shape[1], img.shape[0])
            images.write_image(out / "crops" / str(tid) / images.frame_name(f), img[rs, cs])
    log.info("%d tracks, %d batches written to %s", len(tracks), cfg.reid_dataset.batches, out)
    return EXIT_OK


# --- synth -----------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = _config(args)
    spec = cfg.synth if args.seed is None else replace(cfg.synth, seed=args.seed)
    gt = generate_scenario(spec)
    dets = corrupt_detections(gt, cfg.noise, spec.seed, spec)
    out = Path(args.output)
    per_frame = gt_frames(gt)
    mot.write_frames(out / "gt.txt", per_frame)
    mot.write_detections(out / "det.txt", dets)
    if args.render:
        for f in spec.frames:
            images.write_image(out / "frames" / images.frame_name(f), render_frame(spec, per_frame.get(f, [])))
        images.write_mask(out / "field.png", field_region(spec))
    log.info("synthetic sequence (seed %d) written to %s", spec.seed, out)
    return EXIT_OK


# --- embed -----------------------------------------------------------------


def cmd_embed(args) -> int:
    cfg = _config(args)
    dets = mot.read_detections(args.detections)
    frames = images.list_frames(args.images)
    embedder = _histogram_embedder(cfg)
    rows = []
    for f, fd in dets.items():
        if not fd.items:
            continue
        vecs = embedder.embed_boxes(_image_for(frames, f), fd.boxes)
        rows.extend((f, i, v) for i, v in enumerate(vecs))
    write_embeddings(args.output, rows)
    return EXIT_OK


# --- overlay ---------------------------------------------------------------


def _tracks_from_frames(per_frame: dict[int, list[tuple[int, BBox]]]) -> list[Track]:
    tracks: dict[int, Track] = {}
    for f in sorted(per_frame):
        for tid, b in per_frame[f]:
            tracks.setdefault(tid, Track(tid)).append(TrackEntry(f, b))
    return [tracks[t] for t in sorted(tracks)]


def cmd_overlay(args) -> int:
    per_frame = mot.read_tracks(args.tracks)
    if args.interpolate:
        filled: dict[int, list[tuple[int, BBox]]] = {}
        for t in _tracks_from_frames(per_frame):
            for e in interpolate_gaps(t):
                filled.setdefault(e.frame, []).append((t.id, e.bbox))
        per_frame = filled
    frames = images.list_frames(args.images)
    for f, path in frames.items():
        img = images.read_image(path).copy()
        for tid, b in sorted(per_frame.get(f, []), key=lambda p: p[0]):
            color = overlay_color(tid)
            p0 = (int(round(b.x_min)), int(round(b.y_min)))
            p1 = (int(round(b.x_max)) - 1, int(round(b.y_max)) - 1)
            cv2.rectangle(img, p0, p1, color, args.thickness)
            cv2.putText(img, str(tid), (p0[0], max(p0[1] - 3, 10)), cv2.FONT_HERSHEY_SIMPLEX, 0.4, color, 1)
        images.write_image(Path(args.output) / images.frame_name(f), img)
    return EXIT_OK


# --- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")

    parser = _Parser(prog="pitchtrack", description="Soccer player tracking and self-labeling tools.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("track", parents=[common], help="link detections into tracks")
    p.add_argument("detections", help="MOT detection file")
    p.add_argument("-o", "--output", required=True, help="MOT result file")
    p.add_argument("--images", help="frame directory (histogram embeddings)")
    p.add_argument("--embeddings", help="external embedding CSV")
    p.add_argument("--image-width", type=int, default=1280, help="width used for the spatial gate without images")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", parents=[common], help="detection or tracking metrics")
    p.add_argument("gt", help="ground-truth file or directory")
    p.add_argument("result", help="result file or directory (files matched by name)")
    p.add_argument("--mode", choices=("det", "mot"), default="mot")
    p.add_argument("-o", "--output", help="CSV report")
    p.add_argument("--workers", type=int, default=1, help="parallel sequences")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fieldmask", parents=[common], help="estimate field masks")
    p.add_argument("images")
    p.add_argument("-o", "--output", required=True, help="mask directory")
    p.add_argument("--line-masks", help="directory of line masks aligned by frame")
    p.add_argument("--auto-lines", action="store_true", help="derive line masks from luminance")
    p.set_defaults(func=cmd_fieldmask)

    p = sub.add_parser("pseudolabel", parents=[common], help="correct teacher detections into labels")
    p.add_argument("detections")
    p.add_argument("images")
    p.add_argument("-o", "--output", required=True, help="label file")
    p.add_argument("--masks", help="precomputed field masks")
    p.add_argument("--verdicts", help="CSV verdicts for blob candidates")
    p.add_argument("--augment-dir", help="also export rescaled training copies here")
    p.set_defaults(func=cmd_pseudolabel)

    p = sub.add_parser("reid-dataset", parents=[common], help="build re-ID triplet batches")
    p.add_argument("detections")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--images", help="frame directory; crops are written when given")
    p.add_argument("--image-width", type=int, default=1280)
    p.set_defaults(func=cmd_reid_dataset)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic sequence")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="overrides synth.seed")
    p.add_argument("--render", action="store_true", help="also write frames and the field mask")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("embed", parents=[common], help="histogram embeddings for detections")
    p.add_argument("detections")
    p.add_argument("images")
    p.add_argument("-o", "--output", required=True, help="embedding CSV")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("overlay", parents=[common], help="draw tracks on frames")
    p.add_argument("tracks")
    p.add_argument("images")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--interpolate", action="store_true", help="fill track gaps for display")
    p.add_argument("--thickness", type=int, default=1)
    p.set_defaults(func=cmd_overlay)
    return parser


def _setup_logging() -> None:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"pitchtrack {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PitchTrackError, OSError) as exc:
        print(f"pitchtrack {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
