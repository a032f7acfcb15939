"""Segment an object from its bounding box with superpixel classifiers or alpha matting."""

__version__ = "0.1.0"

from .core import BinaryMask, BoundingBox, CroppedScene, axis_aligned_hull, crop_context, rasterize_bbox, scale_bbox_area
from .errors import (
    BBInitError,
    ConvergenceError,
    DatasetError,
    DegenerateScribbleError,
    InsufficientBackgroundError,
    InvalidInputError,
)
from .evaluation import CvReport, Dataset, ParamGrid, ScoreTable, grid_evaluate, load_dataset, loo_cv, preset_grid, select_frames
from .features import standardize, superpixel_features
from .lbdm import LbdmConfig, lbdm_segment
from .methods import METHODS, segment
from .metrics import baseline_entire_bb, dsc_from_iou, iou, iou_bb
from .ocsvm import OcsvmConfig, decision_function, ocsvm_segment, train_ocsvm
from .render import overlay
from .sbbm import SbbmConfig, sbbm_segment
from .superpixel import slic0_segment
