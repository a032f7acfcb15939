"""Dataset ingestion, parameter sweeps and leave-one-video-out cross-validation.

Dataset layout::

    root/<sequence>/frames/00000001.png ...
    root/<sequence>/groundtruth.txt      one region per frame (4 or 8 numbers)
    root/<sequence>/masks/00000001.png   grayscale, 0 = background, 255 = object
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import BoundingBox
from .errors import DatasetError, InvalidInputError
from .files import image_size, read_image, read_mask, read_regions
from .methods import METHODS, FrameEvaluator, make_config, stage_order

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
MEASURES = ("all", "bb")
CACHE_ENV = "BBINIT_CACHE"
CACHE_VERSION = 1


@dataclass(frozen=True)
class Frame:
    sequence: str
    index: int
    image_path: Path
    region: BoundingBox
    mask_path: Path

    @property
    def key(self) -> str:
        return f"{self.sequence}/{self.image_path.name}"

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.image_path.read_bytes())
        h.update(self.mask_path.read_bytes())
        h.update(repr((self.region.x, self.region.y, self.region.w, self.region.h)).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class Sequence:
    name: str
    frames: tuple[Frame, ...]


@dataclass(frozen=True)
class Dataset:
    root: Path
    sequences: tuple[Sequence, ...]

    def selected_frames(self) -> list[Frame]:
        return [f for seq in self.sequences for f in select_frames(seq)]


def load_dataset(root) -> Dataset:
    """Read and validate a VOT-style directory tree."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    sequences = []
    for seq_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        gt_file = seq_dir / "groundtruth.txt"
        frames_dir = seq_dir / "frames"
        masks_dir = seq_dir / "masks"
        if not gt_file.is_file():
            raise DatasetError(f"missing region file {gt_file}")
        if not frames_dir.is_dir():
            raise DatasetError(f"missing frames directory {frames_dir}")
        images = sorted(p for p in frames_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        if not images:
            raise DatasetError(f"no frames in {frames_dir}")
        try:
            regions = read_regions(gt_file)
        except InvalidInputError as exc:
            raise DatasetError(f"unparsable regions in {gt_file}: {exc}") from None
        if len(regions) != len(images):
            raise DatasetError(f"{gt_file} has {len(regions)} regions for {len(images)} frames")
        frames = []
        for i, (img, region) in enumerate(zip(images, regions)):
            mask = masks_dir / (img.stem + ".png")
            if not mask.is_file():
                raise DatasetError(f"missing mask {mask}")
            try:
                isize, msize = image_size(img), image_size(mask)
            except OSError as exc:
                raise DatasetError(f"unreadable file in {seq_dir}: {exc}") from None
            if isize != msize:
                raise DatasetError(f"mask {mask} is {msize[0]}x{msize[1]} but frame {img} is {isize[0]}x{isize[1]}")
            frames.append(Frame(seq_dir.name, i, img, region, mask))
        sequences.append(Sequence(seq_dir.name, tuple(frames)))
    if not sequences:
        raise DatasetError(f"no sequences found under {root}")
    return Dataset(root, tuple(sequences))


def frame_indices(length: int) -> list[int]:
    """First, middle and last index, duplicates removed."""
    if length < 1:
        raise InvalidInputError("sequence has no frames")
    return list(dict.fromkeys([0, (length - 1) // 2, length - 1]))


def select_frames(seq: Sequence) -> list[Frame]:
    return [seq.frames[i] for i in frame_indices(len(seq.frames))]


# --- parameter grids ----------------------------------------------------------------


@dataclass(frozen=True)
class ParamGrid:
    method: str
    axes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInputError(f"unknown method {self.method!r}; expected one of {METHODS}")
        for name, vals in self.axes.items():
            if not isinstance(vals, (list, tuple)) or len(vals) == 0:
                raise InvalidInputError(f"grid axis {name!r} must be a non-empty list")
        if self.method != "entire-bb" and not self.axes:
            raise InvalidInputError("grid has no axes")
        # validate every value against the method's legal range
        for name, vals in self.axes.items():
            for v in vals:
                make_config(self.method, {name: v})

    @property
    def size(self) -> int:
        return int(np.prod([len(v) for v in self.axes.values()])) if self.axes else 1

    def points(self) -> list[dict]:
        """Cartesian product in deterministic order (last axis fastest)."""
        names = list(self.axes)
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.axes[n] for n in names))]

    @classmethod
    def from_dict(cls, d: dict) -> "ParamGrid":
        try:
            return cls(d["method"], dict(d.get("axes", {})))
        except KeyError:
            raise InvalidInputError("grid needs a 'method' key") from None

    @classmethod
    def load(cls, path) -> "ParamGrid":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"grid file {path} is not valid JSON: {exc}") from None

    def to_dict(self) -> dict:
        return {"method": self.method, "axes": {k: list(v) for k, v in self.axes.items()}}


def preset_grid(method: str) -> ParamGrid:
    """The full cross-validation grid shipped for ``method``."""
    path = Path(__file__).parent / "presets" / f"{method}.json"
    if not path.is_file():
        raise InvalidInputError(f"no preset grid for {method!r}")
    return ParamGrid.load(path)


# --- score cache -------------------------------------------------------------------


class ScoreCache:
    """One small JSON file per (method, params, frame content) entry.

    Writes go through a temporary file and ``os.replace`` so concurrent
    writers never expose partial entries.
    """

    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(method: str, params: dict, frame_hash: str) -> str:
        blob = json.dumps([CACHE_VERSION, method, sorted(params.items()), frame_hash], sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    def _path(self, key):
        return self.dir / key[:2] / f"{key}.json"

    def get(self, key):
        try:
            return json.loads(self._path(key).read_text())
        except (FileNotFoundError, json.JSONDecodeError):
            return None

    def put(self, key, entry):
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(entry, fh)
        os.replace(tmp, path)


# --- grid evaluation --------------------------------------------------------------


@dataclass
class ScoreTable:
    method: str
    measure: str
    params: list
    frames: list  # frame keys "sequence/filename"
    sequences: list  # sequence name of each frame
    phi_all: np.ndarray  # (n_params, n_frames)
    phi_bb: np.ndarray
    errors: dict = field(default_factory=dict)  # "p,f" -> message
    cache_hits: int = 0
    cache_misses: int = 0

    def scores(self, measure: str | None = None) -> np.ndarray:
        measure = measure or self.measure
        if measure not in MEASURES:
            raise InvalidInputError(f"measure must be one of {MEASURES}")
        return self.phi_all if measure == "all" else self.phi_bb

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "measure": self.measure,
            "params": self.params,
            "frames": self.frames,
            "sequences": self.sequences,
            "phi_all": self.phi_all.tolist(),
            "phi_bb": self.phi_bb.tolist(),
            "errors": self.errors,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreTable":
        return cls(
            d["method"], d["measure"], d["params"], d["frames"], d["sequences"],
            np.array(d["phi_all"], dtype=float), np.array(d["phi_bb"], dtype=float), dict(d.get("errors", {})),
        )


def _evaluate_frame(method, frame: Frame, params_list, cache_dir):
    """Score every parameter setting on one frame. Returns (scores, errors, hits, misses)."""
    cache = ScoreCache(cache_dir) if cache_dir else None
    fhash = frame.content_hash() if cache else None
    n = len(params_list)
    out = np.zeros((n, 2))
    errors = {}
    hits = misses = 0
    todo = []
    for p, params in enumerate(params_list):
        if cache:
            entry = cache.get(ScoreCache.key(method, params, fhash))
            if entry is not None:
                out[p] = entry["phi_all"], entry["phi_bb"]
                if entry.get("error"):
                    errors[p] = entry["error"]
                hits += 1
                continue
        todo.append(p)
    if todo:
        evaluator = FrameEvaluator(method, read_image(frame.image_path), frame.region, read_mask(frame.mask_path))
        for p in sorted(todo, key=lambda p: stage_order(method, params_list[p])):
            err = None
            try:
                out[p] = evaluator.score(params_list[p])
            except Exception as exc:  # a failed run scores 0 and the sweep goes on
                err = f"{type(exc).__name__}: {exc}"
                out[p] = 0.0, 0.0
                errors[p] = err
            misses += 1
            if cache:
                cache.put(
                    ScoreCache.key(method, params_list[p], fhash),
                    {"phi_all": float(out[p, 0]), "phi_bb": float(out[p, 1]), "error": err},
                )
    return out, errors, hits, misses


def grid_evaluate(dataset: Dataset, method: str, grid: ParamGrid, measure: str = "all", workers: int = 1, cache_dir=None) -> ScoreTable:
    """Score every grid point on every selected frame.

    ``cache_dir`` defaults to ``$BBINIT_CACHE``; without either, nothing is cached.
    """
    if grid.method != method:
        raise InvalidInputError(f"grid is for {grid.method!r}, not {method!r}")
    if measure not in MEASURES:
        raise InvalidInputError(f"measure must be one of {MEASURES}")
    frames = dataset.selected_frames()
    if not frames:
        raise InvalidInputError("dataset has no frames")
    cache_dir = cache_dir or os.environ.get(CACHE_ENV) or None
    params_list = grid.points()
    P, F = len(params_list), len(frames)
    phi_all = np.zeros((P, F))
    phi_bb = np.zeros((P, F))
    errors = {}
    hits = misses = 0

    args = [(method, fr, params_list, cache_dir) for fr in frames]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate_frame, *zip(*args)))
    else:
        results = [_evaluate_frame(*a) for a in args]
    for f, (scores, errs, h, m) in enumerate(results):
        phi_all[:, f] = scores[:, 0]
        phi_bb[:, f] = scores[:, 1]
        for p, msg in errs.items():
            errors[f"{p},{f}"] = msg
        hits += h
        misses += m
    if errors:
        log.warning("%d of %d runs failed and were scored 0", len(errors), P * F)
    return ScoreTable(
        method, measure, params_list, [fr.key for fr in frames], [fr.sequence for fr in frames],
        phi_all, phi_bb, errors, hits, misses,
    )


# --- cross-validation -----------------------------------------------------------------


@dataclass
class CvReport:
    method: str
    measure: str
    folds: list
    overall_mean: float
    overall_phi_all: float
    overall_phi_bb: float
    wall_clock_s: float = 0.0

    def to_dict(self) -> dict:
        # timing is left out so identical runs serialise identically
        return {
            "method": self.method,
            "measure": self.measure,
            "n_folds": len(self.folds),
            "overall_mean": self.overall_mean,
            "overall_phi_all": self.overall_phi_all,
            "overall_phi_bb": self.overall_phi_bb,
            "folds": self.folds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def summary(self) -> str:
        lines = [
            f"method {self.method}, selection measure phi_{self.measure}, {len(self.folds)} folds",
            f"{'sequence':<24} {'phi_all':>8} {'phi_bb':>8}  selected",
        ]
        for fold in self.folds:
            lines.append(
                f"{fold['sequence']:<24} {fold['phi_all']:8.3f} {fold['phi_bb']:8.3f}  {json.dumps(fold['selected_params'])}"
            )
        lines.append(f"{'mean':<24} {self.overall_phi_all:8.3f} {self.overall_phi_bb:8.3f}")
        lines.append(f"wall clock {self.wall_clock_s:.1f} s")
        return "\n".join(lines)


def loo_cv(table: ScoreTable, dataset: Dataset | None = None, measure: str | None = None) -> CvReport:
    """Leave-one-sequence-out selection of parameters.

    For each held-out sequence the parameters with the best mean score over
    all other sequences' frames are chosen (first grid point on ties) and
    applied to the held-out frames. With a single sequence there is nothing to
    train on and the first grid point is used.
    """
    measure = measure or table.measure
    S = table.scores(measure)
    if S.shape[0] == 0 or S.shape[1] == 0:
        raise InvalidInputError("score table is empty")
    seqs = np.array(table.sequences)
    order = [s.name for s in dataset.sequences] if dataset is not None else list(dict.fromkeys(table.sequences))
    folds = []
    held_all, held_bb = [], []
    for name in order:
        test = seqs == name
        if not test.any():
            raise InvalidInputError(f"score table has no frames for sequence {name!r}")
        train = ~test
        if train.any():
            train_mean = S[:, train].mean(axis=1)
            best = int(np.argmax(train_mean))
            tm = float(train_mean[best])
        else:
            best, tm = 0, None
        fa = table.phi_all[best, test]
        fb = table.phi_bb[best, test]
        held_all.extend(fa.tolist())
        held_bb.extend(fb.tolist())
        folds.append(
            {
                "sequence": name,
                "selected_index": best,
                "selected_params": table.params[best],
                "train_mean": tm,
                "frames": [k for k, t in zip(table.frames, test) if t],
                "frame_phi_all": fa.tolist(),
                "frame_phi_bb": fb.tolist(),
                "phi_all": float(fa.mean()),
                "phi_bb": float(fb.mean()),
            }
        )
    ov_all = float(np.mean(held_all))
    ov_bb = float(np.mean(held_bb))
    return CvReport(table.method, measure, folds, ov_all if measure == "all" else ov_bb, ov_all, ov_bb)


def run_cv(dataset: Dataset, grid: ParamGrid, measure: str = "all", workers: int = 1, cache_dir=None):
    """Sweep then cross-validate; returns ``(table, report)``."""
    t0 = time.perf_counter()
    table = grid_evaluate(dataset, grid.method, grid, measure, workers, cache_dir)
    report = loo_cv(table, dataset, measure)
    report.wall_clock_s = time.perf_counter() - t0
    return table, report
