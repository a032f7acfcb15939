"""SLIC0 oversegmentation and the background/unknown split by box containment."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .core import BinaryMask, BoundingBox, CroppedScene, as_image, crop_context, rasterize_bbox
from .errors import InvalidInputError
from .features import srgb_to_lab

PIXELS_PER_SUPERPIXEL = 50
MIN_SUPERPIXELS = 100
MAX_SUPERPIXELS = 500
DEFAULT_MAX_ITERS = 10
INITIAL_COLOUR_NORM = 10.0


@dataclass(frozen=True)
class SuperpixelMap:
    labels: np.ndarray
    n_superpixels: int

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.n_superpixels)


@dataclass(frozen=True)
class BBoxPartition:
    background_ids: np.ndarray
    unknown_ids: np.ndarray


def target_superpixel_count(crop_pixels: int) -> int:
    """About 50 pixels per superpixel, clamped to [100, 500]."""
    if crop_pixels < 1:
        raise InvalidInputError("crop must contain at least one pixel")
    n = math.floor(crop_pixels / PIXELS_PER_SUPERPIXEL + 0.5)
    return int(min(max(n, MIN_SUPERPIXELS), MAX_SUPERPIXELS))


def _grid_shape(W, H, n_target):
    """Seed grid ``(nx, ny)`` with about ``n_target`` cells of aspect within [2/3, 3/2].

    Rounding ``W / S`` and ``H / S`` separately can miss the target by 10%;
    instead the count closest to the target is chosen (larger on ties), then
    the squarest cells.
    """
    best = None
    for ny in range(1, H + 1):
        for nx in {max(1, min(W, n_target // ny)), max(1, min(W, -(-n_target // ny)))}:
            aspect = (W / nx) / (H / ny)
            if not 2 / 3 <= aspect <= 3 / 2:
                continue
            if n_target >= MIN_SUPERPIXELS and not MIN_SUPERPIXELS <= nx * ny <= max(n_target, MAX_SUPERPIXELS):
                continue
            key = (abs(nx * ny - n_target), -nx * ny, abs(math.log(aspect)))
            if best is None or key < best[0]:
                best = (key, nx, ny)
    if best is None:
        # extreme aspect ratios: fall back to independent rounding
        step = math.sqrt(H * W / n_target)
        return max(1, min(W, round(W / step))), max(1, min(H, round(H / step)))
    return best[1], best[2]


def _grid_seeds(lab, n_target):
    H, W = lab.shape[:2]
    step = math.sqrt(H * W / n_target)
    nx, ny = _grid_shape(W, H, n_target)
    xs = np.floor((np.arange(nx) + 0.5) * W / nx).astype(int)
    ys = np.floor((np.arange(ny) + 0.5) * H / ny).astype(int)
    sy, sx = np.meshgrid(ys, xs, indexing="ij")
    sy, sx = sy.ravel(), sx.ravel()

    # nudge each seed to the lowest-gradient pixel of its 3x3 neighbourhood
    pad = np.pad(lab, ((1, 1), (1, 1), (0, 0)), mode="edge")
    grad = ((pad[1:-1, 2:] - pad[1:-1, :-2]) ** 2).sum(-1) + ((pad[2:, 1:-1] - pad[:-2, 1:-1]) ** 2).sum(-1)
    gpad = np.pad(grad, 1, mode="constant", constant_values=np.inf)
    best = np.full(sy.shape, np.inf)
    by, bx = sy.copy(), sx.copy()
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            g = gpad[sy + dy + 1, sx + dx + 1]
            better = g < best
            best = np.where(better, g, best)
            by = np.where(better, sy + dy, by)
            bx = np.where(better, sx + dx, bx)
    return by, bx, step


def _cluster(lab, n_target, max_iters):
    H, W = lab.shape[:2]
    by, bx, step = _grid_seeds(lab, n_target)
    k = len(by)
    centres = np.column_stack([lab[by, bx], bx.astype(float), by.astype(float)])
    colour_norm2 = np.full(k, INITIAL_COLOUR_NORM**2)
    inv_s2 = 1.0 / step**2
    reach = max(1, math.ceil(step))

    rows, cols = np.indices((H, W))
    # pixels outside every search window keep their previous label
    labels = np.zeros((H, W), dtype=np.int64)
    dist = np.empty((H, W))
    dc2_all = np.empty((H, W))

    for _ in range(max_iters):
        dist.fill(np.inf)
        for j in range(k):
            cx, cy = centres[j, 3], centres[j, 4]
            x0, x1 = max(0, int(cx) - reach), min(W, int(cx) + reach + 1)
            y0, y1 = max(0, int(cy) - reach), min(H, int(cy) + reach + 1)
            win = lab[y0:y1, x0:x1]
            dc2 = ((win - centres[j, :3]) ** 2).sum(-1)
            ds2 = (cols[y0:y1, x0:x1] - cx) ** 2 + (rows[y0:y1, x0:x1] - cy) ** 2
            d = dc2 / colour_norm2[j] + ds2 * inv_s2
            sub = dist[y0:y1, x0:x1]
            upd = d < sub
            sub[upd] = d[upd]
            labels[y0:y1, x0:x1][upd] = j
            dc2_all[y0:y1, x0:x1][upd] = dc2[upd]

        unreached = np.isinf(dist)
        if unreached.any():
            # recompute colour distance to the (kept) previous cluster
            lj = labels[unreached]
            dc2_all[unreached] = ((lab[unreached] - centres[lj, :3]) ** 2).sum(-1)

        flat = labels.ravel()
        cnt = np.bincount(flat, minlength=k)
        used = cnt > 0
        for c, vals in enumerate((lab[..., 0], lab[..., 1], lab[..., 2], cols, rows)):
            s = np.bincount(flat, weights=vals.ravel(), minlength=k)
            centres[used, c] = s[used] / cnt[used]
        # SLIC0: per-cluster colour normaliser from the last assignment, floored at 1
        maxd = np.zeros(k)
        np.maximum.at(maxd, flat, dc2_all.ravel())
        colour_norm2 = np.maximum(maxd, 1.0)
        # an emptied cluster restarts at the worst-fitting pixel
        empty = np.flatnonzero(~used)
        if empty.size:
            worst = _worst_pixels(dist, flat, cnt, empty.size)
            centres[empty] = np.column_stack([lab.reshape(-1, 3)[worst], cols.ravel()[worst], rows.ravel()[worst]])
            colour_norm2[empty] = INITIAL_COLOUR_NORM**2

    # clusters still empty after the last assignment each take one pixel, so no seed is lost
    cnt = np.bincount(labels.ravel(), minlength=k)
    empty = np.flatnonzero(cnt == 0)
    if empty.size:
        worst = _worst_pixels(dist, labels.ravel(), cnt, empty.size)
        labels.ravel()[worst] = empty
    return labels


def _worst_pixels(dist, flat, cnt, n):
    """The ``n`` pixels farthest from their centre, never emptying a cluster."""
    d = np.where(np.isfinite(dist.ravel()), dist.ravel(), -1.0)
    remaining = cnt.copy()
    out = []
    for i in np.argsort(-d, kind="stable"):
        if remaining[flat[i]] > 1:
            remaining[flat[i]] -= 1
            out.append(i)
            if len(out) == n:
                break
    return np.array(out, dtype=np.int64)


def _enforce_connectivity(labels):
    """Merge every non-largest 4-connected piece of a label into a neighbour.

    The receiving neighbour is the adjacent superpixel with the most pixels,
    ties going to the smaller label. Returns labels renumbered 0..N-1 in
    raster order of first appearance.
    """
    H, W = labels.shape
    n = H * W
    idx = np.arange(n).reshape(H, W)
    same_h = labels[:, 1:] == labels[:, :-1]
    same_v = labels[1:, :] == labels[:-1, :]
    src = np.concatenate([idx[:, :-1][same_h], idx[:-1, :][same_v]])
    dst = np.concatenate([idx[:, 1:][same_h], idx[1:, :][same_v]])
    graph = coo_matrix((np.ones(src.size, dtype=np.int8), (src, dst)), shape=(n, n))
    ncomp, comp = connected_components(graph, directed=False)
    comp = comp.reshape(H, W)

    comp_size = np.bincount(comp.ravel(), minlength=ncomp)
    comp_label = np.empty(ncomp, dtype=np.int64)
    comp_label[comp.ravel()] = labels.ravel()

    # keep the largest piece of each label (first component id on ties)
    order = np.lexsort((np.arange(ncomp), -comp_size, comp_label))
    first = np.ones(ncomp, dtype=bool)
    first[1:] = comp_label[order][1:] != comp_label[order][:-1]
    kept = np.zeros(ncomp, dtype=bool)
    kept[order[first]] = True

    if not kept.all():
        diff_h = comp[:, 1:] != comp[:, :-1]
        diff_v = comp[1:, :] != comp[:-1, :]
        a = np.concatenate([comp[:, :-1][diff_h], comp[:-1, :][diff_v]])
        b = np.concatenate([comp[:, 1:][diff_h], comp[1:, :][diff_v]])
        pairs = np.unique(np.concatenate([np.column_stack([a, b]), np.column_stack([b, a])]), axis=0)
        orphans = set(np.flatnonzero(~kept).tolist())
        neighbours = {o: [] for o in orphans}
        for u, v in pairs:
            if u in neighbours:
                neighbours[u].append(v)
        label_size = np.bincount(comp_label[kept], weights=comp_size[kept], minlength=labels.max() + 1)
        while orphans:
            progressed = False
            for o in sorted(orphans):
                cands = {int(comp_label[v]) for v in neighbours[o] if kept[v]}
                if not cands:
                    continue
                target = min(cands, key=lambda lb: (-label_size[lb], lb))
                comp_label[o] = target
                label_size[target] += comp_size[o]
                kept[o] = True
                orphans.discard(o)
                progressed = True
            if not progressed:  # pragma: no cover - a 4-connected grid always progresses
                raise RuntimeError("connectivity enforcement stalled")
        labels = comp_label[comp]

    _, first_idx, inverse = np.unique(labels.ravel(), return_index=True, return_inverse=True)
    rank = np.empty(first_idx.size, dtype=np.int64)
    rank[np.argsort(first_idx, kind="stable")] = np.arange(first_idx.size)
    return rank[inverse].reshape(H, W), first_idx.size


def slic0_segment(crop, n_target: int, max_iters: int = DEFAULT_MAX_ITERS) -> SuperpixelMap:
    """Oversegment ``crop`` into roughly ``n_target`` compact, connected superpixels.

    k-means in (L, a, b, x, y) with distance ``dc^2 / m_k^2 + ds^2 / S^2`` where
    ``S`` is the seed spacing and ``m_k`` is cluster k's largest colour distance
    from the previous iteration (10 before the first).
    """
    crop = as_image(crop)
    H, W = crop.shape[:2]
    if n_target < 1:
        raise InvalidInputError("n_target must be at least 1")
    if n_target > H * W:
        raise InvalidInputError(f"cannot make {n_target} superpixels from {H * W} pixels")
    if max_iters < 1:
        raise InvalidInputError("max_iters must be at least 1")
    lab = srgb_to_lab(crop)
    labels = _cluster(lab, n_target, max_iters)
    labels, n = _enforce_connectivity(labels)
    return SuperpixelMap(labels, n)


def partition_by_bbox(spmap: SuperpixelMap, bbox_local: BoundingBox) -> BBoxPartition:
    """Superpixels with no pixel centre inside the box are background; the rest unknown."""
    inside = rasterize_bbox(bbox_local, (spmap.width, spmap.height)).labels
    touched = np.zeros(spmap.n_superpixels, dtype=bool)
    touched[np.unique(spmap.labels[inside])] = True
    return BBoxPartition(np.flatnonzero(~touched), np.flatnonzero(touched))


def mask_from_superpixels(spmap: SuperpixelMap, object_ids) -> BinaryMask:
    ids = np.asarray(sorted(object_ids) if isinstance(object_ids, (set, frozenset)) else object_ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= spmap.n_superpixels):
        raise InvalidInputError(f"superpixel ids must lie in [0, {spmap.n_superpixels})")
    return BinaryMask(np.isin(spmap.labels, ids))


def superpixel_boundaries(labels) -> np.ndarray:
    """Pixels with a 4-neighbour carrying a different label."""
    labels = np.asarray(labels)
    b = np.zeros(labels.shape, dtype=bool)
    dh = labels[:, 1:] != labels[:, :-1]
    dv = labels[1:, :] != labels[:-1, :]
    b[:, 1:] |= dh
    b[:, :-1] |= dh
    b[1:, :] |= dv
    b[:-1, :] |= dv
    return b


@dataclass(frozen=True)
class SuperpixelScene:
    """A cropped frame with its superpixels and their box partition."""

    scene: CroppedScene
    spmap: SuperpixelMap
    partition: BBoxPartition

    def to_frame(self, object_ids) -> BinaryMask:
        return self.scene.to_frame(mask_from_superpixels(self.spmap, object_ids).labels)


def prepare_superpixel_scene(frame, bbox: BoundingBox, max_iters: int = DEFAULT_MAX_ITERS) -> SuperpixelScene:
    """Crop around the box, oversegment, and split superpixels by the box."""
    scene = crop_context(frame, bbox)
    h, w = scene.crop.shape[:2]
    spmap = slic0_segment(scene.crop, min(target_superpixel_count(h * w), h * w), max_iters)
    return SuperpixelScene(scene, spmap, partition_by_bbox(spmap, scene.bbox_local))
