"""PNG and region-file reading/writing."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .core import BinaryMask, BoundingBox, axis_aligned_hull
from .errors import InvalidInputError


def read_image(path) -> np.ndarray:
    """Load an image file as an ``(H, W, 3)`` uint8 RGB array."""
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise InvalidInputError(f"cannot read image {path}: {exc}") from exc


def image_size(path) -> tuple[int, int]:
    """``(width, height)`` from the file header, without decoding pixels."""
    with PILImage.open(path) as im:
        return im.size


def write_image(path, img) -> None:
    PILImage.fromarray(np.asarray(img, dtype=np.uint8), mode="RGB").save(path)


def read_mask(path) -> BinaryMask:
    """Grayscale mask; any non-zero value is object."""
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            arr = np.asarray(im.convert("L"))
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise InvalidInputError(f"cannot read mask {path}: {exc}") from exc
    return BinaryMask(arr > 0)


def write_mask(path, mask: BinaryMask) -> None:
    out = np.where(mask.labels, 255, 0).astype(np.uint8)
    PILImage.fromarray(out, mode="L").save(path)


def write_label_map(path, labels) -> None:
    """Superpixel labels as a 16-bit grayscale PNG."""
    labels = np.asarray(labels)
    if labels.max(initial=0) > 65535:
        raise InvalidInputError("too many labels for a 16-bit PNG")
    PILImage.fromarray(labels.astype(np.uint16)).save(path)


def read_label_map(path) -> np.ndarray:
    with PILImage.open(path) as im:
        return np.asarray(im).astype(np.int64)


def write_matte(path, alpha) -> None:
    """Alpha matte clamped to [0, 1] and stored as 16-bit grayscale."""
    a = np.clip(np.asarray(alpha, dtype=float), 0.0, 1.0)
    PILImage.fromarray(np.round(a * 65535).astype(np.uint16)).save(path)


def parse_region(text: str) -> BoundingBox:
    """Parse ``"x,y,w,h"`` or an 8-number VOT polygon ``"x1,y1,...,x4,y4"``."""
    parts = [p for p in text.replace("\t", ",").replace(" ", ",").split(",") if p]
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise InvalidInputError(f"unparsable region {text!r}") from None
    if len(vals) == 4:
        return BoundingBox(*vals)
    if len(vals) >= 6 and len(vals) % 2 == 0:
        return axis_aligned_hull(np.reshape(vals, (-1, 2)))
    raise InvalidInputError(f"region needs 4 or 8 numbers, got {len(vals)}: {text!r}")


def read_regions(path) -> list[BoundingBox]:
    """One region per non-empty line."""
    lines = Path(path).read_text().splitlines()
    out = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            out.append(parse_region(line.strip()))
        except InvalidInputError as exc:
            raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
    return out
