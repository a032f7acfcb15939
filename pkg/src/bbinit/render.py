"""Mask overlays for inspection."""

from __future__ import annotations

import numpy as np

from .core import BinaryMask, as_image
from .errors import InvalidInputError

TINT = np.array([0, 255, 0], dtype=np.uint16)
OUTLINE = np.array([255, 255, 0], dtype=np.uint8)


def mask_boundary(labels) -> np.ndarray:
    """Object pixels with a 4-neighbour outside the object. The frame edge does not count."""
    m = np.asarray(labels, dtype=bool)
    inner = m.copy()
    inner[1:, :] &= m[:-1, :]
    inner[:-1, :] &= m[1:, :]
    inner[:, 1:] &= m[:, :-1]
    inner[:, :-1] &= m[:, 1:]
    return m & ~inner


def overlay(image, mask: BinaryMask) -> np.ndarray:
    """Object pixels blended half-and-half with a green tint, boundary drawn in yellow."""
    img = as_image(image)
    H, W = img.shape[:2]
    if mask.origin != (0, 0) or mask.labels.shape != (H, W):
        raise InvalidInputError(f"mask is {mask.width}x{mask.height} but image is {W}x{H}")
    out = img.copy()
    m = mask.labels
    # integer blend, rounding halves up
    out[m] = ((img[m].astype(np.uint16) + TINT + 1) // 2).astype(np.uint8)
    out[mask_boundary(m)] = OUTLINE
    return out
