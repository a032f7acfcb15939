"""Sample-based background model.

Every superpixel is summarised by ``s`` RGB values drawn with replacement from
its pixels. An unknown superpixel is background when, for some background
model, more than a fraction ``eta`` of its samples lie within colour radius
``R`` of at least one sample of that model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BinaryMask, BoundingBox
from .errors import InsufficientBackgroundError, InvalidInputError
from .superpixel import DEFAULT_MAX_ITERS, SuperpixelMap, SuperpixelScene, prepare_superpixel_scene

DEFAULT_RADIUS = 20.0


@dataclass(frozen=True)
class SampleModel:
    samples: np.ndarray
    source_id: int

    def __post_init__(self):
        s = np.array(self.samples, dtype=float).reshape(-1, 3)
        if len(s) < 1:
            raise InvalidInputError("a sample model needs at least one sample")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def size(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class SbbmConfig:
    delta: float = 0.5
    eta: float = 0.8
    radius: float = DEFAULT_RADIUS
    seed: int = 0
    slic_max_iters: int = DEFAULT_MAX_ITERS

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise InvalidInputError(f"delta must lie in (0, 1], got {self.delta}")
        if not 0 < self.eta <= 1:
            raise InvalidInputError(f"eta must lie in (0, 1], got {self.eta}")
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise InvalidInputError(f"radius must be positive, got {self.radius}")
        if self.slic_max_iters < 1:
            raise InvalidInputError("slic_max_iters must be at least 1")


def build_model(spmap: SuperpixelMap, crop, sp_id: int, s: int, rng: np.random.Generator) -> SampleModel:
    """Draw ``s`` pixels uniformly, with replacement, from superpixel ``sp_id``."""
    if s < 1:
        raise InvalidInputError("sample count must be at least 1")
    pixels = np.asarray(crop).reshape(-1, 3)[spmap.labels.ravel() == sp_id]
    if len(pixels) == 0:
        raise InvalidInputError(f"superpixel {sp_id} is empty")
    return SampleModel(pixels[rng.integers(0, len(pixels), size=s)], int(sp_id))


def pixel_match(x, model: SampleModel, radius: float) -> int:
    """1 if some sample is strictly closer than ``radius`` to ``x``."""
    if not radius > 0:
        raise InvalidInputError("radius must be positive")
    d2 = ((model.samples - np.asarray(x, dtype=float)) ** 2).sum(axis=1)
    return int(d2.min() < radius * radius)


def _match_flags(query, background, radius):
    """Per query sample: does any background sample lie strictly inside ``radius``?"""
    d2 = ((query[:, None, :] - background[None, :, :]) ** 2).sum(-1)
    return (d2 < radius * radius).any(axis=1)


def model_match(query: SampleModel, background: SampleModel, radius: float) -> float:
    """Fraction of the query's samples that match the background model."""
    if not radius > 0:
        raise InvalidInputError("radius must be positive")
    return float(_match_flags(query.samples, background.samples, radius).mean())


def match_matrix(queries, backgrounds, radius: float, chunk_elems: int = 4_000_000) -> np.ndarray:
    """``q[u, b]`` for every query/background model pair (all models of one size)."""
    q = np.empty((len(queries), len(backgrounds)))
    if not len(queries) or not len(backgrounds):
        return q
    bg = np.stack([b.samples for b in backgrounds])  # (B, s, 3)
    r2 = radius * radius
    s = bg.shape[1]
    step = max(1, chunk_elems // (s * s))
    for u, qm in enumerate(queries):
        x = qm.samples
        for b0 in range(0, len(bg), step):
            blk = bg[b0 : b0 + step]
            d2 = ((x[None, :, None, :] - blk[:, None, :, :]) ** 2).sum(-1)
            q[u, b0 : b0 + step] = (d2 < r2).any(axis=2).mean(axis=1)
    return q


def sample_count(spmap: SuperpixelMap, delta: float) -> int:
    """``s = delta * mean superpixel size``, at least one sample."""
    mean_size = spmap.width * spmap.height / spmap.n_superpixels
    return max(1, math.floor(delta * mean_size + 0.5))


def build_scene_models(sp: SuperpixelScene, delta: float, seed: int):
    """Sample models for the background and unknown superpixels of a scene.

    One generator is consumed in ascending superpixel-id order, so the draws
    depend only on the seed and the superpixel map, and match what
    :func:`build_model` produces when called in that order.
    """
    s = sample_count(sp.spmap, delta)
    rng = np.random.default_rng(seed)
    flat_labels = sp.spmap.labels.ravel()
    order = np.argsort(flat_labels, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(sp.spmap.sizes())])
    pixels = np.asarray(sp.scene.crop).reshape(-1, 3)
    models = []
    for j in range(sp.spmap.n_superpixels):
        own = pixels[order[bounds[j] : bounds[j + 1]]]
        models.append(SampleModel(own[rng.integers(0, len(own), size=s)], j))
    bg = [models[j] for j in sp.partition.background_ids]
    unk = [models[j] for j in sp.partition.unknown_ids]
    return bg, unk


def classify_scene(sp: SuperpixelScene, config: SbbmConfig, q=None) -> np.ndarray:
    """Ids of unknown superpixels that match no background model."""
    if sp.partition.background_ids.size == 0:
        raise InsufficientBackgroundError("no superpixel lies wholly outside the bounding box")
    unk_ids = sp.partition.unknown_ids
    if q is None:
        bg, unk = build_scene_models(sp, config.delta, config.seed)
        q = match_matrix(unk, bg, config.radius)
    if unk_ids.size == 0:
        return unk_ids
    is_background = (q > config.eta).any(axis=1)
    return unk_ids[~is_background]


def sbbm_segment(frame, bbox: BoundingBox, config: SbbmConfig | None = None) -> BinaryMask:
    config = config or SbbmConfig()
    sp = prepare_superpixel_scene(frame, bbox, config.slic_max_iters)
    return sp.to_frame(classify_scene(sp, config))
