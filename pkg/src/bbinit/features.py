"""Per-superpixel descriptors: colour histograms, dense SIFT and LBP.

All descriptors are computed on a cropped RGB image. SIFT and LBP are
evaluated independently on the R, G and B channels and concatenated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

FEATURE_KINDS = ("rgb", "lab", "sift", "lbp")
FEATURE_DIMS = {"rgb": 512, "lab": 512, "sift": 384, "lbp": 30}

HIST_BINS = 8
LAB_RANGES = ((0.0, 100.0), (-110.0, 110.0), (-110.0, 110.0))

SIFT_CELL = 4
SIFT_GRID = 4
SIFT_ORIENTATIONS = 8
SIFT_CLIP = 0.2

LBP_POINTS = 8
LBP_RADIUS = 2
LBP_WINDOW = 5

# sRGB (D65) -> XYZ
_RGB2XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
# reference white is the image of sRGB white, so white maps to a = b = 0 exactly
_WHITE = _RGB2XYZ.sum(axis=1)


def srgb_to_lab(rgb) -> np.ndarray:
    """Convert sRGB values in [0, 255] (any leading shape) to CIELAB."""
    c = np.asarray(rgb, dtype=float) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _RGB2XYZ.T / _WHITE
    eps = (6 / 29) ** 3
    f = np.where(xyz > eps, np.cbrt(xyz), xyz / (3 * (6 / 29) ** 2) + 4 / 29)
    L = 116 * f[..., 1] - 16
    a = 500 * (f[..., 0] - f[..., 1])
    b = 200 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def _bin_indices(values, space, bins):
    """Joint histogram bin for each row of ``values`` (N x 3)."""
    if space == "rgb":
        idx = np.floor(np.asarray(values, dtype=float) * bins / 256.0).astype(int)
    elif space == "lab":
        lab = srgb_to_lab(values)
        idx = np.empty(lab.shape, dtype=int)
        for ch, (lo, hi) in enumerate(LAB_RANGES):
            v = np.clip(lab[:, ch], lo, hi)
            idx[:, ch] = np.floor((v - lo) / (hi - lo) * bins).astype(int)
    else:
        raise InvalidInputError(f"unknown colour space {space!r}")
    idx = np.clip(idx, 0, bins - 1)
    return (idx[:, 0] * bins + idx[:, 1]) * bins + idx[:, 2]


def colour_histogram(crop, pixels, space="rgb", bins_per_channel=HIST_BINS) -> np.ndarray:
    """L1-normalised joint colour histogram of the selected pixels.

    ``pixels`` is a boolean mask over the crop or an array of flat indices.
    """
    flat = np.asarray(crop).reshape(-1, 3)
    sel = np.asarray(pixels)
    values = flat[sel.ravel()] if sel.dtype == bool else flat[sel]
    if len(values) == 0:
        raise InvalidInputError("cannot build a histogram from an empty pixel set")
    b = _bin_indices(values, space, bins_per_channel)
    hist = np.bincount(b, minlength=bins_per_channel**3).astype(float)
    return hist / hist.sum()


def superpixel_histograms(crop, labels, n, space="rgb", bins_per_channel=HIST_BINS):
    """One histogram row per superpixel, computed in a single pass."""
    nb = bins_per_channel**3
    b = _bin_indices(np.asarray(crop).reshape(-1, 3), space, bins_per_channel)
    counts = np.bincount(labels.ravel() * nb + b, minlength=n * nb).reshape(n, nb).astype(float)
    return counts / counts.sum(axis=1, keepdims=True)


def superpixel_centroids(labels, n) -> np.ndarray:
    """Mean pixel position of every superpixel, rounded to the nearest pixel, as (x, y)."""
    rows, cols = np.indices(labels.shape)
    cnt = np.bincount(labels.ravel(), minlength=n)
    cx = np.bincount(labels.ravel(), weights=cols.ravel(), minlength=n) / cnt
    cy = np.bincount(labels.ravel(), weights=rows.ravel(), minlength=n) / cnt
    # round half up so the choice does not depend on banker's rounding
    return np.stack([np.floor(cx + 0.5), np.floor(cy + 0.5)], axis=1).astype(int)


def _check_centre(shape, centre):
    x, y = centre
    if not (0 <= x < shape[1] and 0 <= y < shape[0]):
        raise InvalidInputError(f"centre {centre} outside {shape[1]}x{shape[0]} crop")


# --- dense SIFT ---------------------------------------------------------


def _sift_spatial_weights():
    """(16 cells, 256 patch pixels) bilinear weights of pixels onto cell centres."""
    size = SIFT_CELL * SIFT_GRID
    pos = (np.arange(size) + 0.5) / SIFT_CELL - 0.5
    w1 = np.maximum(0.0, 1.0 - np.abs(pos[None, :] - np.arange(SIFT_GRID)[:, None]))
    # w1[cell, px]; outer product over rows and columns
    return np.einsum("ar,bc->abrc", w1, w1).reshape(SIFT_GRID**2, size * size)


_SIFT_W = _sift_spatial_weights()


def _gradients(channel):
    gy, gx = np.gradient(np.asarray(channel, dtype=float))
    mag = np.hypot(gx, gy)
    ori = np.mod(np.arctan2(gy, gx), 2 * np.pi)
    return mag, ori


def _sift_from_gradients(mag, ori, centre):
    H, W = mag.shape
    half = SIFT_CELL * SIFT_GRID // 2
    x, y = centre
    rows = np.arange(y - half, y + half)
    cols = np.arange(x - half, x + half)
    inside = ((rows >= 0) & (rows < H))[:, None] & ((cols >= 0) & (cols < W))[None, :]
    rr = np.clip(rows, 0, H - 1)
    cc = np.clip(cols, 0, W - 1)
    m = np.where(inside, mag[np.ix_(rr, cc)], 0.0).ravel()
    o = ori[np.ix_(rr, cc)].ravel() * SIFT_ORIENTATIONS / (2 * np.pi)
    o0 = np.floor(o).astype(int)
    frac = o - o0
    ow = np.zeros((m.size, SIFT_ORIENTATIONS))
    idx = np.arange(m.size)
    np.add.at(ow, (idx, o0 % SIFT_ORIENTATIONS), m * (1 - frac))
    np.add.at(ow, (idx, (o0 + 1) % SIFT_ORIENTATIONS), m * frac)
    desc = (_SIFT_W @ ow).ravel()
    return _normalise_sift(desc)


def _normalise_sift(desc):
    n = np.linalg.norm(desc)
    if n < 1e-12:
        return np.zeros_like(desc)
    desc = np.minimum(desc / n, SIFT_CLIP)
    desc = desc / np.linalg.norm(desc)
    # sparse patches can rise above the clip again after renormalising
    return np.minimum(desc, SIFT_CLIP)


def dense_sift_at(crop, centre) -> np.ndarray:
    """384-d descriptor (128 per RGB channel) of the 16x16 patch at ``centre = (x, y)``."""
    crop = np.asarray(crop)
    _check_centre(crop.shape, centre)
    return np.concatenate(
        [_sift_from_gradients(*_gradients(crop[..., ch]), centre) for ch in range(3)]
    )


# --- LBP ------------------------------------------------------------------


def _lbp_offsets(P=LBP_POINTS, R=LBP_RADIUS):
    ang = 2 * np.pi * np.arange(P) / P
    # rounding makes the axis-aligned neighbours land exactly on pixels
    return np.round(-R * np.sin(ang), 5), np.round(R * np.cos(ang), 5)


def lbp_codes(channel, P=LBP_POINTS, R=LBP_RADIUS) -> np.ndarray:
    """Rotation-invariant uniform (riu2) LBP code of every pixel, in [0, P + 1].

    A neighbour at least as bright as the centre sets its bit. Neighbour
    samples are bilinearly interpolated with coordinates clamped to the image.
    """
    img = np.asarray(channel, dtype=float)
    H, W = img.shape
    rows, cols = np.indices((H, W))
    dr, dc = _lbp_offsets(P, R)
    bits = np.empty((P, H, W), dtype=bool)
    for p in range(P):
        r = np.clip(rows + dr[p], 0, H - 1)
        c = np.clip(cols + dc[p], 0, W - 1)
        r0 = np.floor(r).astype(int)
        c0 = np.floor(c).astype(int)
        r1 = np.minimum(r0 + 1, H - 1)
        c1 = np.minimum(c0 + 1, W - 1)
        fr, fc = r - r0, c - c0
        v00, v01 = img[r0, c0], img[r0, c1]
        v10, v11 = img[r1, c0], img[r1, c1]
        # difference form keeps constant patches exact
        val = v00 + fc * (v01 - v00) + fr * (v10 - v00) + fr * fc * (v11 - v10 - v01 + v00)
        bits[p] = val - img >= 0
    transitions = (bits != np.roll(bits, 1, axis=0)).sum(axis=0)
    ones = bits.sum(axis=0)
    return np.where(transitions <= 2, ones, P + 1)


def _lbp_hist(codes, centre, P=LBP_POINTS):
    H, W = codes.shape
    x, y = centre
    half = LBP_WINDOW // 2
    rr = np.clip(np.arange(y - half, y + half + 1), 0, H - 1)
    cc = np.clip(np.arange(x - half, x + half + 1), 0, W - 1)
    win = codes[np.ix_(rr, cc)].ravel()
    return np.bincount(win, minlength=P + 2) / win.size


def lbp_at(crop, centre) -> np.ndarray:
    """30-d descriptor: a 10-bin riu2 code histogram over the 5x5 window, per channel."""
    crop = np.asarray(crop)
    _check_centre(crop.shape, centre)
    return np.concatenate([_lbp_hist(lbp_codes(crop[..., ch]), centre) for ch in range(3)])


# --- per-superpixel extraction ------------------------------------------------


def superpixel_features(crop, spmap, kind) -> np.ndarray:
    """``(N_sp, d)`` feature matrix for every superpixel of ``spmap``."""
    crop = np.asarray(crop)
    labels, n = spmap.labels, spmap.n_superpixels
    if kind in ("rgb", "lab"):
        return superpixel_histograms(crop, labels, n, kind)
    centres = superpixel_centroids(labels, n)
    if kind == "sift":
        grads = [_gradients(crop[..., ch]) for ch in range(3)]
        return np.array(
            [np.concatenate([_sift_from_gradients(m, o, c) for m, o in grads]) for c in centres]
        )
    if kind == "lbp":
        codes = [lbp_codes(crop[..., ch]) for ch in range(3)]
        return np.array([np.concatenate([_lbp_hist(cd, c) for cd in codes]) for c in centres])
    raise InvalidInputError(f"unknown feature kind {kind!r}; expected one of {FEATURE_KINDS}")


def dump_features_csv(path, features, kind) -> None:
    """Debug dump: header names the feature kind, one row per superpixel."""
    features = np.asarray(features)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["superpixel"] + [f"{kind}_{i}" for i in range(features.shape[1])])
        for j, row in enumerate(features):
            w.writerow([j] + [repr(float(v)) for v in row])


# --- standardisation ------------------------------------------------------------


@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.mean.shape[0]:
            raise InvalidInputError(
                f"feature dimension {X.shape[-1]} does not match stats ({self.mean.shape[0]})"
            )
        scale = np.where(self.std < 1e-12, 1.0, self.std)
        return (X - self.mean) / scale


def standardize(X):
    """Zero-mean, unit-variance columns (population std).

    Constant columns are only centred. Returns the standardised matrix and the
    statistics needed to transform further points the same way.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InvalidInputError("standardisation needs at least 2 rows")
    mean = X.mean(axis=0)
    # exact centre for constant columns, so re-applying the stats gives exact zeros
    mean = np.where(np.ptp(X, axis=0) == 0, X[0], mean)
    stats = StandardizationStats(mean, X.std(axis=0))
    return stats.apply(X), stats
