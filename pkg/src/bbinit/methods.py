"""Method registry: config construction and per-frame evaluation with stage reuse.

A :class:`FrameEvaluator` scores many parameter settings on one frame. Stages
that do not depend on a parameter (superpixels, features, the smoothness
matrix, the matte) are computed once and reused across settings that share
them; results are identical to calling the ``*_segment`` functions directly.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import fields

import numpy as np

from .core import BinaryMask, BoundingBox, crop_context, rasterize_bbox
from .errors import InvalidInputError
from .features import superpixel_features
from .lbdm import LbdmConfig, assemble_system, make_scribble, smoothness_matrix, solve_alpha, threshold_alpha
from .metrics import iou, iou_bb
from .ocsvm import OcsvmConfig
from .ocsvm import classify_scene as ocsvm_classify
from .sbbm import SbbmConfig, build_scene_models, match_matrix
from .sbbm import classify_scene as sbbm_classify
from .superpixel import prepare_superpixel_scene

METHODS = ("ocsvm", "sbbm", "lbdm", "entire-bb")

_CONFIGS = {"ocsvm": OcsvmConfig, "sbbm": SbbmConfig, "lbdm": LbdmConfig}

# external parameter names that differ from the config field names
_ALIASES = {"lambda": "lam"}


def make_config(method: str, params: dict | None = None):
    """Validated config object for ``method`` (``None`` for the entire-box baseline)."""
    params = dict(params or {})
    if method == "entire-bb":
        if params:
            raise InvalidInputError(f"entire-bb takes no parameters, got {sorted(params)}")
        return None
    if method not in _CONFIGS:
        raise InvalidInputError(f"unknown method {method!r}; expected one of {METHODS}")
    cls = _CONFIGS[method]
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, val in params.items():
        name = _ALIASES.get(key, key)
        if name not in names:
            raise InvalidInputError(f"unknown {method} parameter {key!r}")
        kwargs[name] = val
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise InvalidInputError(str(exc)) from None


def segment(method: str, frame, bbox: BoundingBox, params: dict | None = None) -> BinaryMask:
    """Full-frame object mask from any registered method."""
    return FrameEvaluator(method, frame, bbox).predict(params or {})


class _Lru:
    def __init__(self, size):
        self.size = size
        self.data = OrderedDict()

    def get(self, key, make):
        if key in self.data:
            self.data.move_to_end(key)
            return self.data[key]
        val = make()
        self.data[key] = val
        if len(self.data) > self.size:
            self.data.popitem(last=False)
        return val


def stage_order(method: str, params: dict):
    """Sort key grouping settings that share expensive stages."""
    c = make_config(method, params)
    if method == "lbdm":
        return (c.window, c.lam, c.rho_minus, c.rho_plus, c.c, c.cg_tol, c.cg_max_iters, c.tau)
    if method == "sbbm":
        return (c.slic_max_iters, c.seed, c.delta, c.radius, c.eta)
    if method == "ocsvm":
        return (c.slic_max_iters, c.feature, c.nu, c.gamma, c.tol)
    return ()


class FrameEvaluator:
    def __init__(self, method: str, frame, bbox: BoundingBox, gt: BinaryMask | None = None):
        if method not in METHODS:
            raise InvalidInputError(f"unknown method {method!r}; expected one of {METHODS}")
        self.method = method
        self.frame = np.asarray(frame)
        self.bbox = bbox
        self.gt = gt
        self.extent = (self.frame.shape[1], self.frame.shape[0])
        self._cache = _Lru(4)

    def _stage(self, key, make):
        return self._cache.get(key, make)

    def predict(self, params: dict) -> BinaryMask:
        cfg = make_config(self.method, params)
        if self.method == "entire-bb":
            return rasterize_bbox(self.bbox, self.extent)
        if self.method == "ocsvm":
            sp = self._stage(("sp", cfg.slic_max_iters), lambda: prepare_superpixel_scene(self.frame, self.bbox, cfg.slic_max_iters))
            feats = self._stage(
                ("feat", cfg.slic_max_iters, cfg.feature),
                lambda: superpixel_features(sp.scene.crop, sp.spmap, cfg.feature),
            )
            return sp.to_frame(ocsvm_classify(sp, feats, cfg))
        if self.method == "sbbm":
            sp = self._stage(("sp", cfg.slic_max_iters), lambda: prepare_superpixel_scene(self.frame, self.bbox, cfg.slic_max_iters))
            if sp.partition.background_ids.size == 0:
                return sp.to_frame(sbbm_classify(sp, cfg))  # raises

            def make_q():
                bg, unk = build_scene_models(sp, cfg.delta, cfg.seed)
                return match_matrix(unk, bg, cfg.radius)

            q = self._stage(("q", cfg.slic_max_iters, cfg.seed, cfg.delta, cfg.radius), make_q)
            return sp.to_frame(sbbm_classify(sp, cfg, q=q))
        # lbdm
        scene = self._stage(("scene",), lambda: crop_context(self.frame, self.bbox))
        L = self._stage(("L", cfg.lam, cfg.window), lambda: smoothness_matrix(scene.crop, cfg.lam, cfg.window))

        def make_matte():
            scribble = make_scribble(scene.bbox_local, scene.extent, cfg.rho_minus, cfg.rho_plus)
            return solve_alpha(assemble_system(scene.crop, scribble, cfg, smoothness=L), cfg)

        matte = self._stage(
            ("matte", cfg.lam, cfg.window, cfg.rho_minus, cfg.rho_plus, cfg.c, cfg.cg_tol, cfg.cg_max_iters), make_matte
        )
        return scene.to_frame(threshold_alpha(matte, scene.bbox_local, cfg.tau).labels)

    def score(self, params: dict) -> tuple[float, float]:
        """``(phi_all, phi_bb)`` of the prediction against the ground truth."""
        if self.gt is None:
            raise InvalidInputError("no ground-truth mask to score against")
        P = self.predict(params)
        B = rasterize_bbox(self.bbox, self.extent)
        return iou(self.gt, P), iou_bb(self.gt, P, B)
