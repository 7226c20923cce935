import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pitchtrack.core import BBox, Detection, FrameDetections
from pitchtrack.errors import EmptyMask
from pitchtrack.fieldmask import (
    FieldMaskConfig,
    approx_polygon,
    bottom_line_cut,
    compute_field_mask,
    field_overlap,
    fill_polygon,
    filter_by_field,
    green_mask,
    largest_component,
    line_mask_from_luminance,
)
from pitchtrack.synth import FIELD_RGB, ScenarioSpec, field_region, generate_scenario, gt_frames, render_frame

GREEN = (0, 255, 0)
GRAY = (128, 128, 128)


def _image(h, w, color):
    img = np.empty((h, w, 3), np.uint8)
    img[:] = color
    return img


def test_green_mask_examples():
    assert green_mask(_image(8, 8, GREEN)).all()
    assert not green_mask(_image(8, 8, GRAY)).any()
    img = _image(8, 8, GRAY)
    img[:, :4] = GREEN
    m = green_mask(img)
    assert m[:, :4].all() and not m[:, 4:].any()


def test_green_mask_hue_360_convention():
    img = _image(4, 4, FIELD_RGB)  # hue 60 in OpenCV units, 120 degrees
    assert green_mask(img, (30, 50, 50), (140, 255, 255), hue_max=360).all()
    assert not green_mask(img, (130, 50, 50), (140, 255, 255), hue_max=360).any()


def test_largest_component_examples():
    m = np.zeros((30, 30), bool)
    m[2:12, 2:12] = True
    assert np.array_equal(largest_component(m), m)
    m2 = m.copy()
    m2[20:22, 20:25] = True
    assert np.array_equal(largest_component(m2), m)
    assert not largest_component(np.zeros((5, 5), bool)).any()


def test_largest_component_is_four_connected():
    m = np.zeros((6, 6), bool)
    m[0:2, 0:2] = True
    m[2:5, 2:5] = True  # touches the first block only diagonally
    out = largest_component(m)
    assert out.sum() == 9


def test_approx_polygon_rectangle():
    m = np.zeros((50, 80), bool)
    m[10:40, 20:70] = True
    poly = approx_polygon(m, 2.0)
    assert len(poly) == 4
    assert sorted(map(tuple, poly.vertices.tolist())) == [(20, 10), (20, 39), (69, 10), (69, 39)]
    assert np.array_equal(fill_polygon(poly, m.shape), m)


def test_approx_polygon_noisy_rectangle():
    m = np.zeros((60, 90), bool)
    m[10:50, 10:80] = True
    m[10, 30] = False
    m[49, 55] = False
    m[25:27, 80] = True
    assert len(approx_polygon(m, 3.0)) == 4


def test_approx_polygon_l_shape():
    m = np.zeros((60, 60), bool)
    m[5:55, 5:20] = True
    m[40:55, 5:55] = True
    assert len(approx_polygon(m, 2.0)) == 6


def test_approx_polygon_empty():
    with pytest.raises(EmptyMask):
        approx_polygon(np.zeros((5, 5), bool))


def test_bottom_line_cut_examples():
    h, w = 100, 200
    m = np.ones((h, w), bool)
    assert np.array_equal(bottom_line_cut(m, np.zeros((h, w), np.uint8)), m)
    lines = np.zeros((h, w), np.uint8)
    lines[90, :] = 255
    out = bottom_line_cut(m, lines)
    assert out[:91].all() and not out[91:].any()
    vertical = np.zeros((h, w), np.uint8)
    vertical[:, 100] = 255
    assert np.array_equal(bottom_line_cut(m, vertical), m)


def test_bottom_line_cut_ignores_upper_and_short_lines():
    h, w = 100, 200
    m = np.ones((h, w), bool)
    upper = np.zeros((h, w), np.uint8)
    upper[20, :] = 255
    assert bottom_line_cut(m, upper).all()
    short = np.zeros((h, w), np.uint8)
    short[90, 10:40] = 255
    assert bottom_line_cut(m, short).all()


def test_compute_field_mask_examples():
    assert compute_field_mask(_image(20, 30, GREEN)).all()
    with pytest.raises(EmptyMask):
        compute_field_mask(_image(20, 30, GRAY))


def test_compute_field_mask_synthetic_render():
    spec = ScenarioSpec(frame_count=1, seed=3)
    gt = gt_frames(generate_scenario(spec))
    img = render_frame(spec, gt[1])
    truth = field_region(spec)
    mask = compute_field_mask(img)
    assert (mask == truth).mean() >= 0.99


def test_compute_field_mask_with_line_mask():
    img = _image(100, 200, GREEN)
    lines = np.zeros((100, 200), np.uint8)
    lines[80, :] = 255
    out = compute_field_mask(img, lines)
    assert out[:81].all() and not out[81:].any()


def test_auto_lines_uses_luminance_fallback():
    img = _image(100, 200, GREEN)
    img[85, :] = (255, 255, 255)
    comp = green_mask(img)
    assert line_mask_from_luminance(img, comp)[85].all()
    out = compute_field_mask(img, cfg=FieldMaskConfig(auto_lines=True))
    assert not out[86:].any() and out[:85].all()


def test_final_mask_inside_filled_polygon_of_green_component():
    spec = ScenarioSpec(frame_count=1, seed=5)
    img = render_frame(spec, gt_frames(generate_scenario(spec))[1])
    comp = largest_component(green_mask(img))
    filled = fill_polygon(approx_polygon(comp, 0.01 * np.hypot(*comp.shape)), comp.shape)
    mask = compute_field_mask(img)
    assert not (mask & ~filled).any()


def test_field_overlap_examples():
    m = np.zeros((20, 20), bool)
    m[:, :10] = True
    assert field_overlap(BBox(0, 0, 5, 5), m) == 1.0
    assert field_overlap(BBox(12, 0, 18, 5), m) == 0.0
    assert field_overlap(BBox(5, 0, 15, 10), m) == 0.5
    assert field_overlap(BBox(-10, -10, -1, -1), m) == 0.0


def test_filter_by_field_examples():
    m = np.zeros((20, 20), bool)
    m[:, :10] = True
    fd = FrameDetections(
        1,
        (
            Detection(1, BBox(8, 0, 18, 10)),  # overlap 0.2
            Detection(1, BBox(0, 0, 5, 5)),  # overlap 1.0
        ),
    )
    assert [d.bbox.x_min for d in filter_by_field(fd, m).items] == [0]
    assert filter_by_field(fd, m, 0.0) == fd


@given(
    st.integers(0, 19), st.integers(0, 19), st.integers(1, 10), st.integers(1, 10),
    st.lists(st.tuples(st.integers(0, 19), st.integers(0, 19)), max_size=50),
)
def test_field_overlap_monotone(x, y, w, h, removed):
    m = np.ones((20, 20), bool)
    b = BBox(x, y, x + w, y + h)
    before = field_overlap(b, m)
    for r, c in removed:
        m[r, c] = False
        now = field_overlap(b, m)
        assert now <= before
        before = now
