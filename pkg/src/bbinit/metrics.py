"""Overlap measures between predicted and ground-truth masks."""

from __future__ import annotations

from .core import BinaryMask, BoundingBox, rasterize_bbox
from .errors import InvalidInputError


def _check_same_frame(*masks: BinaryMask):
    ref = masks[0]
    for m in masks[1:]:
        if m.labels.shape != ref.labels.shape or m.origin != ref.origin:
            raise InvalidInputError(
                f"mask extents differ: {ref.width}x{ref.height}@{ref.origin} vs {m.width}x{m.height}@{m.origin}"
            )


def iou(G: BinaryMask, P: BinaryMask) -> float:
    """Jaccard index ``|G & P| / |G | P|``; two empty masks score 1."""
    _check_same_frame(G, P)
    union = int((G.labels | P.labels).sum())
    if union == 0:
        return 1.0
    return int((G.labels & P.labels).sum()) / union


def iou_bb(G: BinaryMask, P: BinaryMask, B: BinaryMask) -> float:
    """Jaccard index restricted to the box region ``B``."""
    _check_same_frame(G, P, B)
    union = int(((G.labels | P.labels) & B.labels).sum())
    if union == 0:
        return 1.0
    return int((G.labels & P.labels & B.labels).sum()) / union


def dsc_from_iou(phi: float) -> float:
    """Dice coefficient equivalent to an IoU value."""
    if not 0 <= phi <= 1:
        raise InvalidInputError(f"IoU must lie in [0, 1], got {phi}")
    return 2 * phi / (1 + phi)


def baseline_entire_bb(G: BinaryMask, bbox: BoundingBox, extent) -> tuple[float, float]:
    """Scores of predicting the whole box as object: ``(phi_all, phi_bb)``."""
    B = rasterize_bbox(bbox, extent)
    return iou(G, B), iou_bb(G, B, B)
