import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bbinit.core import (
    BinaryMask,
    BoundingBox,
    as_image,
    axis_aligned_hull,
    crop_context,
    rasterize_bbox,
    scale_bbox_area,
)
from bbinit.errors import InvalidInputError


def brute_raster(bbox, W, H):
    out = np.zeros((H, W), dtype=bool)
    for r in range(H):
        for c in range(W):
            cx, cy = c + 0.5, r + 0.5
            out[r, c] = bbox.x <= cx < bbox.x + bbox.w and bbox.y <= cy < bbox.y + bbox.h
    return out


def test_bbox_validation():
    with pytest.raises(InvalidInputError):
        BoundingBox(0, 0, 0, 5)
    with pytest.raises(InvalidInputError):
        BoundingBox(0, 0, 5, -1)
    with pytest.raises(InvalidInputError):
        BoundingBox(float("nan"), 0, 5, 5)
    b = BoundingBox(1, 2, 3, 4)
    assert b.centre == (2.5, 4.0)
    assert str(b) == "1,2,3,4"


def test_as_image_rejects_bad_shapes():
    with pytest.raises(InvalidInputError):
        as_image(np.zeros((4, 4)))
    with pytest.raises(InvalidInputError):
        as_image(np.full((2, 2, 3), 300))
    assert as_image(np.zeros((2, 2, 3), dtype=int)).dtype == np.uint8


def test_mask_values_checked():
    with pytest.raises(InvalidInputError):
        BinaryMask(np.array([[0, 2]]))
    m = BinaryMask(np.array([[0, 1]]))
    assert m.count == 1 and m.width == 2 and m.height == 1
    with pytest.raises(ValueError):
        m.labels[0, 0] = True


def test_hull_examples():
    assert axis_aligned_hull([(0, 0), (4, 0), (4, 2), (0, 2)]) == BoundingBox(0, 0, 4, 2)
    assert axis_aligned_hull([(1, 1), (3, 5), (5, 2)]) == BoundingBox(1, 1, 4, 4)
    with pytest.raises(InvalidInputError):
        axis_aligned_hull([(2, 2), (2, 2), (2, 2)])
    with pytest.raises(InvalidInputError):
        axis_aligned_hull([(0, 0), (1, 1)])
    with pytest.raises(InvalidInputError):
        axis_aligned_hull([(0, 0), (1, np.inf), (2, 2)])


def test_hull_permutation_invariant(rng):
    pts = rng.uniform(-10, 10, size=(5, 2))
    ref = axis_aligned_hull(pts)
    for perm in itertools.permutations(range(5)):
        assert axis_aligned_hull(pts[list(perm)]) == ref


def test_crop_examples():
    frame = np.zeros((100, 100, 3), dtype=np.uint8)
    sc = crop_context(frame, BoundingBox(40, 40, 20, 20))
    assert sc.crop_origin == (30, 30)
    assert sc.extent == (40, 40)
    assert sc.bbox_local == BoundingBox(10, 10, 20, 20)

    sc = crop_context(np.zeros((50, 50, 3), dtype=np.uint8), BoundingBox(0, 0, 30, 30))
    assert sc.crop_origin == (0, 0)
    assert sc.extent == (45, 45)

    with pytest.raises(InvalidInputError):
        crop_context(frame, BoundingBox(200, 200, 10, 10))


def test_crop_rounds_outward():
    frame = np.zeros((40, 40, 3), dtype=np.uint8)
    sc = crop_context(frame, BoundingBox(10.3, 10.3, 5.2, 5.2))
    # ideal crop [7.7, 18.1) -> [7, 19)
    assert sc.crop_origin == (7, 7)
    assert sc.extent == (12, 12)


@given(
    x=st.floats(-30, 90),
    y=st.floats(-30, 90),
    w=st.floats(0.5, 60),
    h=st.floats(0.5, 60),
)
def test_crop_inside_frame_and_box_recovered(x, y, w, h):
    frame = np.zeros((60, 80, 3), dtype=np.uint8)
    b = BoundingBox(x, y, w, h)
    if not b.intersects(80, 60):
        with pytest.raises(InvalidInputError):
            crop_context(frame, b)
        return
    sc = crop_context(frame, b)
    x0, y0 = sc.crop_origin
    cw, ch = sc.extent
    assert x0 >= 0 and y0 >= 0 and x0 + cw <= 80 and y0 + ch <= 60
    back = sc.bbox_local.translate(x0, y0)
    assert math.isclose(back.x, b.x, abs_tol=1e-9) and math.isclose(back.y, b.y, abs_tol=1e-9)
    assert (back.w, back.h) == (b.w, b.h)


def test_scale_examples():
    b = BoundingBox(0, 0, 10, 10)
    assert scale_bbox_area(b, 1.0) == b
    assert scale_bbox_area(b, 0.25) == BoundingBox(2.5, 2.5, 5, 5)
    s = scale_bbox_area(BoundingBox(10, 20, 8, 6), 1.7)
    assert s.w == pytest.approx(10.4307, abs=1e-4)
    assert s.h == pytest.approx(7.8230, abs=1e-4)
    assert s.centre == pytest.approx((14, 23))
    with pytest.raises(InvalidInputError):
        scale_bbox_area(b, 0)


@given(rho=st.floats(0.1, 2.0), x=st.floats(-50, 50), w=st.floats(0.1, 100))
def test_scale_round_trip(rho, x, w):
    b = BoundingBox(x, -x, w, 2 * w)
    r = scale_bbox_area(scale_bbox_area(b, rho), 1 / rho)
    for a, e in zip((r.x, r.y, r.w, r.h), (b.x, b.y, b.w, b.h)):
        assert math.isclose(a, e, rel_tol=1e-9, abs_tol=1e-9)
    assert math.isclose(scale_bbox_area(b, rho).area, rho * b.area, rel_tol=1e-12)


def test_rasterize_examples():
    m = rasterize_bbox(BoundingBox(0, 0, 2, 2), (4, 4))
    assert m.count == 4 and m.labels[:2, :2].all()
    m = rasterize_bbox(BoundingBox(-5, -5, 3, 3), (4, 4))
    assert m.count == 0  # covers [-5, -2)
    m = rasterize_bbox(BoundingBox(-2, -2, 3, 3), (4, 4))
    assert m.labels[0, 0] and m.count == 1
    assert rasterize_bbox(BoundingBox(10, 10, 2, 2), (4, 4)).count == 0


@given(
    x=st.floats(-4, 8),
    y=st.floats(-4, 8),
    w=st.floats(0.1, 10),
    h=st.floats(0.1, 10),
)
def test_rasterize_matches_brute_force(x, y, w, h):
    b = BoundingBox(x, y, w, h)
    np.testing.assert_array_equal(rasterize_bbox(b, (6, 5)).labels, brute_raster(b, 6, 5))


def test_embed_and_to_frame():
    frame = np.zeros((20, 30, 3), dtype=np.uint8)
    sc = crop_context(frame, BoundingBox(24, 2, 6, 6))
    labels = np.ones(sc.crop.shape[:2], dtype=bool)
    full = sc.to_frame(labels)
    assert full.labels.shape == (20, 30)
    assert full.count == labels.size
    x0, y0 = sc.crop_origin
    assert full.labels[y0, x0] and not full.labels[19, 0]
