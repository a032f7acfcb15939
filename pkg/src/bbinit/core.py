"""Geometry, image and mask primitives shared by every segmentation method.

Images are ``(height, width, 3)`` ``uint8`` arrays in RGB order. Boxes live in
real-valued image coordinates with ``x`` to the right and ``y`` downward; a
pixel ``(col, row)`` belongs to a box when its centre ``(col + 0.5, row + 0.5)``
lies in the half-open rectangle ``[x, x + w) x [y, y + h)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError


def _readonly(a):
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


def as_image(pixels) -> np.ndarray:
    """Validate and return an ``(H, W, 3)`` uint8 RGB array."""
    img = np.asarray(pixels)
    if img.ndim != 3 or img.shape[2] != 3:
        raise InvalidInputError(f"expected an (H, W, 3) RGB array, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise InvalidInputError("image must be at least 1x1")
    if img.dtype != np.uint8:
        if np.any(img < 0) or np.any(img > 255):
            raise InvalidInputError("RGB channels must lie in [0, 255]")
        img = img.astype(np.uint8)
    return img


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.x, self.y, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidInputError(f"non-finite bounding box {vals}")
        if self.w <= 0 or self.h <= 0:
            raise InvalidInputError(f"bounding box needs w > 0 and h > 0, got w={self.w}, h={self.h}")
        # normalise to plain floats so equality and hashing behave
        for name, v in zip("xywh", vals):
            object.__setattr__(self, name, float(v))

    @property
    def centre(self) -> tuple[float, float]:
        return self.x + self.w / 2, self.y + self.h / 2

    @property
    def area(self) -> float:
        return self.w * self.h

    def translate(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.x + dx, self.y + dy, self.w, self.h)

    def intersects(self, width: int, height: int) -> bool:
        """True when the box overlaps the extent ``[0, width) x [0, height)``."""
        return self.x < width and self.x + self.w > 0 and self.y < height and self.y + self.h > 0

    def __str__(self):
        return f"{self.x:g},{self.y:g},{self.w:g},{self.h:g}"


@dataclass(frozen=True)
class BinaryMask:
    """Object (1) / background (0) labels placed at ``origin`` in a frame."""

    labels: np.ndarray
    origin: tuple[int, int] = (0, 0)

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise InvalidInputError(f"mask labels must be 2-d, got shape {labels.shape}")
        if labels.dtype != bool:
            if not np.isin(labels, (0, 1)).all():
                raise InvalidInputError("mask labels must be 0 or 1")
            labels = labels.astype(bool)
        object.__setattr__(self, "labels", _readonly(labels))
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def count(self) -> int:
        return int(self.labels.sum())

    def embed(self, extent: tuple[int, int]) -> "BinaryMask":
        """Place the mask in a frame of ``extent = (width, height)``.

        Parts falling outside the frame are dropped; uncovered frame pixels
        are background.
        """
        W, H = extent
        out = np.zeros((H, W), dtype=bool)
        dx, dy = self.origin
        x0, y0 = max(dx, 0), max(dy, 0)
        x1, y1 = min(dx + self.width, W), min(dy + self.height, H)
        if x1 > x0 and y1 > y0:
            out[y0:y1, x0:x1] = self.labels[y0 - dy : y1 - dy, x0 - dx : x1 - dx]
        return BinaryMask(out)


@dataclass(frozen=True)
class CroppedScene:
    crop: np.ndarray
    crop_origin: tuple[int, int]
    bbox_local: BoundingBox
    frame_extent: tuple[int, int] = field(default=(0, 0))

    def __post_init__(self):
        object.__setattr__(self, "crop", _readonly(self.crop))

    @property
    def extent(self) -> tuple[int, int]:
        return self.crop.shape[1], self.crop.shape[0]

    def to_frame(self, labels) -> BinaryMask:
        """Re-embed crop-local labels into full-frame coordinates."""
        return BinaryMask(labels, self.crop_origin).embed(self.frame_extent)


def axis_aligned_hull(points) -> BoundingBox:
    """Smallest axis-aligned box containing a polygon's vertices."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise InvalidInputError("a polygon needs at least 3 (x, y) points")
    if not np.isfinite(pts).all():
        raise InvalidInputError("polygon has non-finite coordinates")
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    return BoundingBox(lo[0], lo[1], hi[0] - lo[0], hi[1] - lo[1])


def crop_context(frame, bbox: BoundingBox) -> CroppedScene:
    """Cut a region twice the box size, centred on the box, out of ``frame``.

    The ideal region is clamped to the frame and rounded outward to whole
    pixels; nothing is padded.
    """
    frame = as_image(frame)
    H, W = frame.shape[:2]
    if not bbox.intersects(W, H):
        raise InvalidInputError(f"bounding box {bbox} lies outside the {W}x{H} frame")
    cx, cy = bbox.centre
    x0 = max(0, math.floor(cx - bbox.w))
    y0 = max(0, math.floor(cy - bbox.h))
    x1 = min(W, math.ceil(cx + bbox.w))
    y1 = min(H, math.ceil(cy + bbox.h))
    return CroppedScene(
        crop=frame[y0:y1, x0:x1],
        crop_origin=(x0, y0),
        bbox_local=bbox.translate(-x0, -y0),
        frame_extent=(W, H),
    )


def scale_bbox_area(bbox: BoundingBox, rho: float) -> BoundingBox:
    """Scale both sides by ``sqrt(rho)`` about the centre, so area scales by ``rho``."""
    if not rho > 0:
        raise InvalidInputError(f"area ratio must be positive, got {rho}")
    s = math.sqrt(rho)
    cx, cy = bbox.centre
    w, h = bbox.w * s, bbox.h * s
    return BoundingBox(cx - w / 2, cy - h / 2, w, h)


def bbox_pixel_ranges(bbox: BoundingBox, extent: tuple[int, int]) -> tuple[int, int, int, int]:
    """Column/row index ranges ``(c0, c1, r0, r1)`` of pixels whose centres are in the box."""
    W, H = extent
    # centre i + 0.5 in [x, x + w)  <=>  i in [ceil(x - 0.5), ceil(x + w - 0.5))
    c0 = min(max(math.ceil(bbox.x - 0.5), 0), W)
    c1 = min(max(math.ceil(bbox.x + bbox.w - 0.5), 0), W)
    r0 = min(max(math.ceil(bbox.y - 0.5), 0), H)
    r1 = min(max(math.ceil(bbox.y + bbox.h - 0.5), 0), H)
    return c0, max(c0, c1), r0, max(r0, r1)


def rasterize_bbox(bbox: BoundingBox, extent: tuple[int, int]) -> BinaryMask:
    W, H = extent
    if W < 1 or H < 1:
        raise InvalidInputError(f"extent must be positive, got {extent}")
    c0, c1, r0, r1 = bbox_pixel_ranges(bbox, extent)
    labels = np.zeros((H, W), dtype=bool)
    labels[r0:r1, c0:c1] = True
    return BinaryMask(labels)
