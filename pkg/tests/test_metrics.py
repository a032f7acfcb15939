import numpy as np
import pytest

from bbinit.core import BinaryMask, BoundingBox, rasterize_bbox
from bbinit.errors import InvalidInputError
from bbinit.metrics import baseline_entire_bb, dsc_from_iou, iou, iou_bb


def brute_counts(G, P, B):
    inter = union = inter_b = union_b = 0
    for g, p, b in zip(G.ravel(), P.ravel(), B.ravel()):
        inter += g and p
        union += g or p
        inter_b += g and p and b
        union_b += (g or p) and b
    return (inter / union if union else 1.0), (inter_b / union_b if union_b else 1.0)


def test_random_triples_match_counting(rng):
    for _ in range(100):
        G, P, B = (rng.random((3, 8, 8)) < rng.uniform(0.05, 0.95, (3, 1, 1)))
        a, b = brute_counts(G, P, B)
        assert iou(BinaryMask(G), BinaryMask(P)) == a
        assert iou_bb(BinaryMask(G), BinaryMask(P), BinaryMask(B)) == b


def test_iou_examples():
    G = np.zeros((6, 6), bool)
    G[1:3, 1:3] = True
    P = np.roll(G, 1, axis=1)
    assert iou(BinaryMask(G), BinaryMask(P)) == pytest.approx(2 / 6, abs=1e-15)
    assert iou(BinaryMask(G), BinaryMask(G)) == 1.0
    assert iou(BinaryMask(G), BinaryMask(np.roll(G, 3, axis=0))) == 0.0
    empty = BinaryMask(np.zeros((6, 6), bool))
    assert iou(empty, empty) == 1.0


def test_iou_properties(rng):
    for _ in range(50):
        G, P = BinaryMask(rng.random((7, 9)) < 0.4), BinaryMask(rng.random((7, 9)) < 0.4)
        v = iou(G, P)
        assert v == iou(P, G) and 0 <= v <= 1
        full = BinaryMask(np.ones((7, 9), bool))
        assert iou_bb(G, P, full) == v


def test_outside_box_ignored():
    G = np.zeros((10, 10), bool)
    G[2:6, 2:6] = True
    G[8:, 8:] = True
    B = rasterize_bbox(BoundingBox(2, 2, 4, 4), (10, 10))
    assert iou_bb(BinaryMask(G), B, B) == 1.0


def test_extent_mismatch():
    with pytest.raises(InvalidInputError):
        iou(BinaryMask(np.zeros((4, 4), bool)), BinaryMask(np.zeros((4, 5), bool)))
    with pytest.raises(InvalidInputError):
        iou(BinaryMask(np.zeros((4, 4), bool)), BinaryMask(np.zeros((4, 4), bool), origin=(1, 0)))


def test_dsc_values():
    assert dsc_from_iou(0) == 0
    assert dsc_from_iou(1) == 1
    assert abs(dsc_from_iou(0.5) - 2 / 3) <= 1e-12
    assert abs(dsc_from_iou(0.579) - 1.158 / 1.579) <= 1e-12
    assert round(dsc_from_iou(0.579), 4) == 0.7334
    with pytest.raises(InvalidInputError):
        dsc_from_iou(1.2)


def test_dsc_dominates_iou():
    phi = np.linspace(0, 1, 1001)
    d = np.array([dsc_from_iou(p) for p in phi])
    assert (d >= phi).all()
    assert (d[1:-1] > phi[1:-1]).all()


def test_baseline_examples():
    box = BoundingBox(2, 2, 6, 4)
    G = rasterize_bbox(box, (12, 10))
    assert baseline_entire_bb(G, box, (12, 10)) == (1.0, 1.0)
    half = np.zeros((10, 12), bool)
    half[2:6, 2:5] = True
    assert baseline_entire_bb(BinaryMask(half), box, (12, 10)) == (0.5, 0.5)


def test_baseline_seventy_percent():
    box = BoundingBox(10, 10, 20, 10)
    G = np.zeros((40, 40), bool)
    G[10:20, 10:24] = True
    phi_all, phi_bb = baseline_entire_bb(BinaryMask(G), box, (40, 40))
    assert phi_bb == pytest.approx(0.7) and phi_all == pytest.approx(0.7)
