"""Oversegment the context crop around a box and label superpixels by position."""

import sys
from pathlib import Path

import numpy as np

from bbinit.files import write_image, write_label_map
from bbinit.render import overlay
from bbinit.core import BinaryMask
from bbinit.superpixel import prepare_superpixel_scene, superpixel_boundaries
from bbinit.synthetic import square_scene

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)

frame, bbox, gt = square_scene(40, noise=6.0)  # 120x120 frame, red square in the middle
sp = prepare_superpixel_scene(frame, bbox)  # crop twice the box, run SLIC0 on it
print("crop", sp.scene.crop.shape[:2], "superpixels", sp.spmap.n_superpixels)

# superpixels wholly outside the box are background, the rest are unknown
print("background", sp.partition.background_ids.size, "unknown", sp.partition.unknown_ids.size)

edges = superpixel_boundaries(sp.spmap.labels)
write_label_map(out / "superpixels.png", sp.spmap.labels)
write_image(out / "superpixel_edges.png", overlay(sp.scene.crop, BinaryMask(edges)))
print("mean superpixel size", np.mean(sp.spmap.sizes()).round(1))
