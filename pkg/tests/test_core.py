import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pitchtrack.core import (
    BBox,
    Detection,
    FrameDetections,
    boxes_to_array,
    center,
    filter_by_confidence,
    iou,
    iou_matrix,
    soft_nms,
)
from pitchtrack.errors import DegenerateBox

from oracles import box_iou


@st.composite
def boxes(draw, lo=0.0, hi=100.0):
    x0 = draw(st.floats(lo, hi - 1, allow_nan=False))
    y0 = draw(st.floats(lo, hi - 1, allow_nan=False))
    w = draw(st.floats(0.5, 50, allow_nan=False))
    h = draw(st.floats(0.5, 50, allow_nan=False))
    return BBox(x0, y0, x0 + w, y0 + h)


def test_bbox_rejects_degenerate():
    with pytest.raises(DegenerateBox):
        BBox(0, 0, 0, 5)
    with pytest.raises(DegenerateBox):
        BBox(0, 5, 5, 1)
    with pytest.raises(DegenerateBox):
        BBox(0, 0, math.inf, 5)


def test_bbox_xywh_round_trip():
    b = BBox.from_xywh(2.5, 3.0, 10.0, 4.0)
    assert b.as_tuple() == (2.5, 3.0, 12.5, 7.0)
    assert b.to_xywh() == (2.5, 3.0, 10.0, 4.0)
    assert b.area == 40.0


def test_iou_examples():
    a = BBox(0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, BBox(20, 20, 30, 30)) == 0.0
    assert iou(a, BBox(5, 0, 15, 10)) == pytest.approx(1 / 3)


def test_center_examples():
    assert center(BBox(0, 0, 10, 10)) == (5, 5)
    assert center(BBox(2, 4, 6, 8)) == (4, 6)
    assert center(BBox(0, 0, 1, 1)) == (0.5, 0.5)


@given(boxes(), boxes())
def test_iou_symmetric_bounded(a, b):
    v = iou(a, b)
    assert v == pytest.approx(iou(b, a))
    assert 0.0 <= v <= 1.0
    assert v == pytest.approx(box_iou(a.as_tuple(), b.as_tuple()), abs=1e-12)


@st.composite
def grid_boxes(draw):
    x0, y0 = draw(st.integers(0, 40)), draw(st.integers(0, 40))
    return BBox(x0 / 4, y0 / 4, (x0 + draw(st.integers(1, 40))) / 4, (y0 + draw(st.integers(1, 40))) / 4)


@given(grid_boxes(), grid_boxes())
def test_iou_one_iff_identical(a, b):
    assert iou(a, a) == pytest.approx(1.0)
    if a != b:
        assert iou(a, b) < 1.0


@given(st.lists(boxes(), min_size=0, max_size=6), st.lists(boxes(), min_size=0, max_size=6))
def test_iou_matrix_matches_scalar(xs, ys):
    m = iou_matrix(boxes_to_array(xs), boxes_to_array(ys))
    assert m.shape == (len(xs), len(ys))
    for i, a in enumerate(xs):
        for j, b in enumerate(ys):
            assert m[i, j] == pytest.approx(iou(a, b), abs=1e-12)


def _frame(boxes_confs, frame=1):
    return FrameDetections(frame, tuple(Detection(frame, b, c) for b, c in boxes_confs))


def test_soft_nms_single_unchanged():
    fd = _frame([(BBox(0, 0, 10, 10), 0.7)])
    assert soft_nms(fd).items == fd.items


def test_soft_nms_linear_decay():
    a, b = BBox(0, 0, 10, 10), BBox(0, 0, 10, 5)
    assert iou(a, b) == 0.5
    out = soft_nms(_frame([(a, 0.9), (b, 0.8)]), iou_gate=0.3)
    assert [d.confidence for d in out.items] == [0.9, pytest.approx(0.4)]


def test_soft_nms_disjoint_unchanged():
    fd = _frame([(BBox(0, 0, 10, 10), 0.9), (BBox(50, 50, 60, 60), 0.8)])
    assert [d.confidence for d in soft_nms(fd).items] == [0.9, 0.8]


def test_soft_nms_empty_and_floor():
    assert soft_nms(FrameDetections(3)).items == ()
    a = BBox(0, 0, 10, 10)
    out = soft_nms(_frame([(a, 0.9), (BBox(0, 0, 10, 9.9), 0.5)]), score_floor=0.01)
    assert len(out) == 1


def test_soft_nms_tie_break_is_positional():
    fd = _frame([(BBox(50, 0, 60, 10), 0.5), (BBox(0, 0, 10, 10), 0.5)])
    out = soft_nms(fd)
    assert [d.bbox.x_min for d in out.items] == [0, 50]


def test_soft_nms_gaussian():
    a, b = BBox(0, 0, 10, 10), BBox(0, 0, 10, 5)
    out = soft_nms(_frame([(a, 0.9), (b, 0.8)]), method="gaussian", sigma=0.5)
    assert out.items[1].confidence == pytest.approx(0.8 * math.exp(-0.25 / 0.5))


def test_soft_nms_preserves_embedding_key():
    d = Detection(1, BBox(0, 0, 10, 10), 0.9, embedding_key=(1, 0))
    assert soft_nms(FrameDetections(1, (d,))).items[0].embedding_key == (1, 0)


scored = st.lists(st.tuples(boxes(), st.floats(0.0, 1.0)), max_size=8)


@given(scored, st.floats(0.05, 1.0))
def test_soft_nms_never_increases_or_moves(items, gate):
    fd = _frame(items)
    out = soft_nms(fd, iou_gate=gate)
    originals = {}
    for d in fd.items:
        originals.setdefault(d.bbox, []).append(d.confidence)
    for d in out.items:
        assert d.bbox in originals
        assert d.confidence <= max(originals[d.bbox]) + 1e-12
    confs = [d.confidence for d in out.items]
    assert confs == sorted(confs, reverse=True)


@given(scored)
def test_soft_nms_gate_one_is_identity_on_confidences(items):
    fd = _frame(items)
    out = soft_nms(fd, iou_gate=1.0, score_floor=0.0)
    assert sorted(d.confidence for d in out.items) == sorted(d.confidence for d in fd.items)


def test_filter_by_confidence_examples():
    fd = _frame([(BBox(0, 0, 1, 1), 0.9), (BBox(0, 0, 2, 2), 0.7)])
    assert len(filter_by_confidence(fd, 0.0)) == 2
    assert [d.confidence for d in filter_by_confidence(fd, 0.8).items] == [0.9]
    assert len(filter_by_confidence(fd, 1.0)) == 0


@given(scored, st.floats(0.0, 1.0))
def test_filter_by_confidence_subsequence(items, sigma):
    fd = _frame(items)
    out = list(filter_by_confidence(fd, sigma).items)
    it = iter(fd.items)
    assert all(any(d is x for x in it) for d in out)
    assert all(d.confidence > sigma for d in out)


def test_frame_detections_rejects_foreign_frame():
    with pytest.raises(ValueError):
        FrameDetections(1, (Detection(2, BBox(0, 0, 1, 1)),))


def test_detection_confidence_range():
    with pytest.raises(ValueError):
        Detection(0, BBox(0, 0, 1, 1), 1.5)


def test_pixel_slice_clips():
    rs, cs = BBox(-5, 2.5, 3.2, 20).pixel_slice(10, 10)
    assert (rs.start, rs.stop, cs.start, cs.stop) == (2, 10, 0, 4)
    assert BBox(0, 0, 1, 1).clipped(10, 10) == BBox(0, 0, 1, 1)
    assert BBox(20, 20, 30, 30).clipped(10, 10) is None


def test_boxes_to_array_empty():
    assert boxes_to_array([]).shape == (0, 4)
    assert iou_matrix(boxes_to_array([]), np.zeros((2, 4)) + [0, 0, 1, 1]).shape == (0, 2)
