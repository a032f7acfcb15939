"""Synthetic scenes and a tiny on-disk dataset for demos and tests."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import BinaryMask, BoundingBox
from .files import write_image, write_mask

RED = (220, 30, 30)
BLUE = (30, 40, 200)


def square_scene(size: int, margin: float = 0.05, noise: float = 0.0, seed: int = 0):
    """Red ``size`` square centred on a blue frame three times as wide.

    Returns ``(frame, bbox, gt)``; the box exceeds the square by
    ``margin * size`` on every side.
    """
    W = 3 * size
    frame = np.empty((W, W, 3), dtype=float)
    frame[:] = BLUE
    frame[size : 2 * size, size : 2 * size] = RED
    if noise > 0:
        frame += np.random.default_rng(seed).normal(0, noise, frame.shape)
    frame = np.clip(np.rint(frame), 0, 255).astype(np.uint8)
    gt = np.zeros((W, W), dtype=bool)
    gt[size : 2 * size, size : 2 * size] = True
    m = margin * size
    bbox = BoundingBox(size - m, size - m, size + 2 * m, size + 2 * m)
    return frame, bbox, BinaryMask(gt)


def write_square_dataset(root, sizes_per_sequence=((24, 28, 32), (30, 26)), margin: float = 0.05, noise: float = 8.0) -> Path:
    """Write one sequence per entry of ``sizes_per_sequence`` in the on-disk dataset layout."""
    root = Path(root)
    for s, sizes in enumerate(sizes_per_sequence):
        seq = root / f"seq{s + 1}"
        (seq / "frames").mkdir(parents=True, exist_ok=True)
        (seq / "masks").mkdir(parents=True, exist_ok=True)
        lines = []
        for i, size in enumerate(sizes):
            frame, bbox, gt = square_scene(size, margin, noise, seed=100 * s + i)
            name = f"{i + 1:08d}.png"
            write_image(seq / "frames" / name, frame)
            write_mask(seq / "masks" / name, gt)
            lines.append(str(bbox))
        (seq / "groundtruth.txt").write_text("\n".join(lines) + "\n")
    return root
