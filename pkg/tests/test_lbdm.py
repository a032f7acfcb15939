import math

import numpy as np
import pytest

from bbinit.core import BoundingBox, crop_context, rasterize_bbox, scale_bbox_area
from bbinit.errors import ConvergenceError, DegenerateScribbleError, InvalidInputError
from bbinit.lbdm import (
    BACKGROUND,
    OBJECT,
    UNKNOWN,
    AlphaMatte,
    LbdmConfig,
    assemble_system,
    coefficient_matrix,
    lbdm_segment,
    local_coefficients,
    make_scribble,
    smoothness_matrix,
    solve_alpha,
    threshold_alpha,
)
from bbinit.metrics import iou
from bbinit.synthetic import square_scene


def dense_assembly(crop, scribble, lam, c, window=1):
    """(I - F)(I - F)^T + C built from explicit per-pixel inverses."""
    H, W = scribble.shape
    n = H * W
    x = np.concatenate([crop.reshape(n, 3) / 255.0, np.ones((n, 1))], axis=1)
    F = np.zeros((n, n))
    for i in range(n):
        yi, xi = divmod(i, W)
        nb = [
            (yi + dy) * W + xi + dx
            for dy in range(-window, window + 1)
            for dx in range(-window, window + 1)
            if (dy, dx) != (0, 0) and 0 <= yi + dy < H and 0 <= xi + dx < W
        ]
        Xi = x[nb]
        F[nb, i] = np.linalg.inv(Xi @ Xi.T + lam * np.eye(len(nb))) @ Xi @ x[i]
    M = np.eye(n) - F
    labelled = (scribble != UNKNOWN).ravel()
    A = M @ M.T + np.diag(np.where(labelled, c, 0.0))
    b = np.where(scribble.ravel() == OBJECT, c, 0.0)
    return A, b


def random_instance(rng):
    H, W = rng.integers(5, 13, size=2)
    crop = rng.integers(0, 256, size=(H, W, 3), dtype=np.uint8)
    box = BoundingBox(W / 4, H / 4, W / 2, H / 2)
    scribble = make_scribble(box, (W, H), 0.5, 1.5)
    cfg = LbdmConfig(
        rho_minus=0.5, rho_plus=1.5, lam=float(10 ** rng.uniform(-6, 0)), window=int(rng.integers(1, 3))
    )
    return crop, scribble, cfg


# scribbles


def test_scribble_example_counts():
    box = BoundingBox(20, 20, 20, 20)
    s = make_scribble(box, (80, 80), 0.81, 1.21)
    yy, xx = np.mgrid[0:80, 0:80] + 0.5
    inner = (np.abs(xx - 30) < 9) & (np.abs(yy - 30) < 9)
    outer = (np.abs(xx - 30) < 11) & (np.abs(yy - 30) < 11)
    assert inner.sum() == 18 * 18 and outer.sum() == 22 * 22
    assert (s == OBJECT).sum() == inner.sum()
    assert (s == UNKNOWN).sum() == (outer & ~inner).sum()
    assert (s == BACKGROUND).sum() == (~outer).sum()
    np.testing.assert_array_equal(s == OBJECT, inner)
    np.testing.assert_array_equal(s == BACKGROUND, ~outer)


def test_scribble_regions_match_scaled_boxes(rng):
    for _ in range(20):
        W, H = rng.integers(10, 60, size=2)
        box = BoundingBox(*rng.uniform(1, 5, 2), *rng.uniform(4, 9, 2))
        rm, rp = rng.uniform(0.3, 0.95), rng.uniform(1.05, 2.0)
        s = make_scribble(box, (W, H), rm, rp)
        inner = rasterize_bbox(scale_bbox_area(box, rm), (W, H)).labels
        outer = rasterize_bbox(scale_bbox_area(box, rp), (W, H)).labels
        np.testing.assert_array_equal(s == OBJECT, inner)
        np.testing.assert_array_equal(s == BACKGROUND, ~outer)


def test_degenerate_scribble():
    with pytest.raises(DegenerateScribbleError):
        make_scribble(BoundingBox(10.2, 10.2, 1, 1), (30, 30), 0.1, 1.5)


def test_rho_plus_out_of_range():
    with pytest.raises(InvalidInputError):
        make_scribble(BoundingBox(10, 10, 20, 20), (60, 60), 0.25, 4)
    with pytest.raises(InvalidInputError):
        LbdmConfig(rho_plus=4)
    with pytest.raises(InvalidInputError):
        LbdmConfig(tau=0.3)
    with pytest.raises(InvalidInputError):
        LbdmConfig(lam=0)


# local coefficients


def test_constant_neighbours_sum_to_one():
    x = np.array([0.3, 0.6, 0.2, 1.0])
    f = local_coefficients(np.tile(x, (8, 1)), x, 1e-7)
    assert abs(f.sum() - 1) < 1e-3


def test_large_lambda_shrinks_to_zero(rng):
    Xi, xi = rng.random((8, 4)), rng.random(4)
    assert np.abs(local_coefficients(Xi, xi, 1e12)).max() < 1e-10


def test_matches_explicit_inverse(rng):
    for _ in range(10):
        Xi, xi = rng.random((8, 4)), rng.random(4)
        expected = np.linalg.inv(Xi @ Xi.T + 0.01 * np.eye(8)) @ Xi @ xi
        np.testing.assert_allclose(local_coefficients(Xi, xi, 0.01), expected, atol=1e-9)


# system assembly


def test_dense_assembly_single_unknown(rng):
    crop = rng.integers(0, 256, size=(5, 5, 3), dtype=np.uint8)
    scribble = np.full((5, 5), BACKGROUND, dtype=np.uint8)
    scribble[:, 3:] = OBJECT
    scribble[2, 2] = UNKNOWN
    cfg = LbdmConfig(lam=1e-2)
    sys_ = assemble_system(crop, scribble, cfg)
    A, b = dense_assembly(crop, scribble, cfg.lam, cfg.c)
    np.testing.assert_allclose(sys_.A.toarray(), A, atol=1e-9)
    np.testing.assert_array_equal(sys_.b, b)
    # nonzero pattern of the centre row equals the hand-built one
    row = 12
    assert set(sys_.A[row].indices[sys_.A[row].data != 0]) == set(np.flatnonzero(np.abs(A[row]) > 1e-14))
    matte = solve_alpha(sys_, cfg)
    assert abs(matte.alpha[2, 2] - np.linalg.solve(A, b)[row]) <= 1e-6


def test_dense_assembly_7x7_window(rng):
    crop = rng.integers(0, 256, size=(9, 8, 3), dtype=np.uint8)
    scribble = make_scribble(BoundingBox(2, 2, 4, 5), (8, 9), 0.5, 1.5)
    cfg = LbdmConfig(rho_minus=0.5, rho_plus=1.5, lam=1e-3, window=3)
    A, _ = dense_assembly(crop, scribble, cfg.lam, cfg.c, window=3)
    np.testing.assert_allclose(assemble_system(crop, scribble, cfg).A.toarray(), A, atol=1e-9)


def test_symmetric_and_psd(rng):
    for _ in range(5):
        crop = rng.integers(0, 256, size=(10, 10, 3), dtype=np.uint8)
        s = make_scribble(BoundingBox(3, 3, 4, 4), (10, 10), 0.5, 1.5)
        A = assemble_system(crop, s, LbdmConfig(rho_minus=0.5, rho_plus=1.5)).A
        assert abs(A - A.T).max() < 1e-10
        for _ in range(20):
            v = rng.normal(size=100)
            assert v @ (A @ v) >= -1e-8
        labelled = (s != UNKNOWN).ravel()
        assert (A.diagonal()[labelled] > 0).all()


def test_shape_mismatch():
    with pytest.raises(InvalidInputError):
        assemble_system(np.zeros((4, 4, 3), np.uint8), np.zeros((4, 5), np.uint8), LbdmConfig())


# solve


def test_all_background_is_zero(rng):
    crop = rng.integers(0, 256, size=(3, 3, 3), dtype=np.uint8)
    sys_ = assemble_system(crop, np.full((3, 3), BACKGROUND, np.uint8), LbdmConfig())
    assert not sys_.b.any()
    matte = solve_alpha(sys_)
    assert not matte.alpha.any() and matte.iterations == 0


def test_dense_solve_equivalence(rng):
    # tighter stopping rule than the default; see the equivalence note in the README
    worst = 0.0
    for _ in range(30):
        crop, scribble, cfg = random_instance(rng)
        cfg = LbdmConfig(**{**cfg.__dict__, "cg_tol": 1e-10})
        sys_ = assemble_system(crop, scribble, cfg)
        dense = np.linalg.solve(sys_.A.toarray(), sys_.b)
        worst = max(worst, np.abs(solve_alpha(sys_, cfg).alpha.ravel() - dense).max())
    assert worst <= 1e-6


def test_default_tolerance_residual_and_fidelity(rng):
    for _ in range(30):
        crop, scribble, cfg = random_instance(rng)
        sys_ = assemble_system(crop, scribble, cfg)
        matte = solve_alpha(sys_, cfg)
        x = matte.alpha.ravel()
        assert np.linalg.norm(sys_.A @ x - sys_.b) <= cfg.cg_tol * np.linalg.norm(sys_.b)
        labelled = scribble != UNKNOWN
        target = (scribble == OBJECT).astype(float)
        assert np.abs(matte.alpha - target)[labelled].max() <= 0.01


def test_fidelity_on_square_scenes():
    for size in (20, 40):
        frame, bbox, _ = square_scene(size, noise=5.0, seed=size)
        scene = crop_context(frame, bbox)
        cfg = LbdmConfig()
        s = make_scribble(scene.bbox_local, scene.extent, cfg.rho_minus, cfg.rho_plus)
        a = solve_alpha(assemble_system(scene.crop, s, cfg), cfg).alpha
        lab = s != UNKNOWN
        assert np.abs(a - (s == OBJECT))[lab].max() <= 0.01


def test_iteration_cap_raises(rng):
    crop, scribble, cfg = random_instance(rng)
    cfg = LbdmConfig(**{**cfg.__dict__, "cg_max_iters": 1, "cg_tol": 1e-12})
    with pytest.raises(ConvergenceError) as info:
        solve_alpha(assemble_system(crop, scribble, cfg), cfg)
    assert info.value.residual > 0


# thresholding


def test_constant_matte_gives_empty_mask():
    m = AlphaMatte(np.full((10, 10), 0.5))
    for tau in (0.5, 0.85, 1.0):
        assert not threshold_alpha(m, BoundingBox(2, 2, 6, 6), tau).labels.any()


def test_inner_square_quantile():
    a = np.zeros((20, 20))
    box = BoundingBox(0, 0, 20, 20)
    # 240 of 400 box pixels = 60%, 160 zeros
    a[2:18, 2:17] = 1.0
    m = AlphaMatte(a)
    # index floor(0.3 * 400) = 120 is a zero: t = 0, the square survives
    np.testing.assert_array_equal(threshold_alpha(m, box, 0.7).labels, a > 0)
    # index floor(0.5 * 400) = 200 is a one: t = 1, nothing exceeds it
    assert not threshold_alpha(m, box, 0.5).labels.any()


def test_fraction_without_ties(rng):
    for _ in range(50):
        a = rng.random((15, 17))
        box = BoundingBox(*rng.uniform(0, 4, 2), *rng.uniform(5, 11, 2))
        tau = rng.uniform(0.5, 1.0)
        B = rasterize_bbox(box, (17, 15)).labels
        mask = threshold_alpha(AlphaMatte(a), box, tau).labels
        n = B.sum()
        frac = (mask & B).sum() / n
        assert tau - 2 / n <= frac <= tau + 2 / n


def test_empty_box_interior():
    with pytest.raises(InvalidInputError):
        threshold_alpha(AlphaMatte(np.zeros((5, 5))), BoundingBox(1.6, 1.6, 0.3, 0.3), 0.8)


def test_quantile_index_convention():
    # 100 distinct values; tau 0.8 keeps the values above index 20
    a = np.arange(100, dtype=float).reshape(10, 10)
    mask = threshold_alpha(AlphaMatte(a), BoundingBox(0, 0, 10, 10), 0.8).labels
    assert mask.sum() == 79 and mask.ravel()[21:].all()
    assert math.floor((1 - 0.8) * 100 + 1e-9) == 20


# pipeline


@pytest.mark.parametrize("size", [20, 40, 80])
def test_square_scene_iou(size):
    frame, bbox, gt = square_scene(size)
    assert iou(gt, lbdm_segment(frame, bbox, LbdmConfig(0.8, 1.2, 0.85, 1e-2))) >= 0.95


def test_uniform_frame_matches_dense_solve():
    frame = np.full((20, 20, 3), 128, np.uint8)
    bbox = BoundingBox(5, 5, 10, 10)
    cfg = LbdmConfig(cg_tol=1e-10)
    scene = crop_context(frame, bbox)
    s = make_scribble(scene.bbox_local, scene.extent, cfg.rho_minus, cfg.rho_plus)
    sys_ = assemble_system(scene.crop, s, cfg)
    dense = AlphaMatte(np.linalg.solve(sys_.A.toarray(), sys_.b).reshape(s.shape))
    expected = scene.to_frame(threshold_alpha(dense, scene.bbox_local, cfg.tau).labels)
    got = lbdm_segment(frame, bbox, cfg)
    np.testing.assert_array_equal(got.labels, expected.labels)
    B = rasterize_bbox(bbox, (20, 20)).labels
    inner = rasterize_bbox(scale_bbox_area(bbox, cfg.rho_minus), (20, 20)).labels
    assert (got.labels & inner).sum() == inner.sum()
    assert (got.labels & B).sum() <= cfg.tau * B.sum() + 1


def test_window_sizes_agree():
    frame, bbox, _ = square_scene(40)
    m3 = lbdm_segment(frame, bbox, LbdmConfig(window=1))
    m7 = lbdm_segment(frame, bbox, LbdmConfig(window=3))
    assert iou(m3, m7) >= 0.9


def test_interior_columns_reproduce_constants():
    # a full window has more neighbours than features, so the fit reproduces the constant term
    rng = np.random.default_rng(3)
    crop = rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
    sums = np.asarray(coefficient_matrix(crop, 1e-8).sum(axis=0)).reshape(8, 8)
    assert np.abs(sums[1:-1, 1:-1] - 1).max() < 1e-3
    L = smoothness_matrix(crop, 1e-8)
    assert abs(L - L.T).max() < 1e-10
