"""One-class SVM (RBF kernel) trained by SMO, and the superpixel segmentation built on it.

The dual is solved in its normalised form::

    minimise   1/2 sum_ij a_i a_j k(x_i, x_j)
    subject to 0 <= a_i <= 1 / (nu N),  sum_i a_i = 1

and a point is an inlier when ``sum_i a_i k(sv_i, x) - rho >= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .core import BinaryMask, BoundingBox
from .errors import ConvergenceError, InsufficientBackgroundError, InvalidInputError
from .features import FEATURE_KINDS, StandardizationStats, standardize, superpixel_features
from .superpixel import DEFAULT_MAX_ITERS, SuperpixelScene, prepare_superpixel_scene

SMO_TOL = 1e-3
SMO_MAX_ITER = 10_000_000


@dataclass(frozen=True)
class OcsvmModel:
    support_vectors: np.ndarray
    alphas: np.ndarray
    rho: float
    gamma: float
    nu: float
    stats: StandardizationStats | None = None
    n_iter: int = 0
    kkt_gap: float = 0.0
    objective: float = 0.0


def _check_gamma(gamma):
    if not (math.isfinite(gamma) and gamma > 0):
        raise InvalidInputError(f"gamma must be positive and finite, got {gamma}")


def rbf_kernel(x, y, gamma: float) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise InvalidInputError(f"dimension mismatch: {x.shape} vs {y.shape}")
    _check_gamma(gamma)
    d = x - y
    return float(np.exp(-gamma * np.dot(d, d)))


def rbf_gram(A, B, gamma: float) -> np.ndarray:
    """Kernel matrix between the rows of ``A`` and ``B``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[1] != B.shape[1]:
        raise InvalidInputError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    # direct differences keep identical rows at distance exactly 0
    return np.exp(-gamma * cdist(A, B, "sqeuclidean"))


def train_ocsvm(X, nu: float, gamma: float, tol: float = SMO_TOL, max_iter: int = SMO_MAX_ITER, stats=None) -> OcsvmModel:
    """Fit the one-class dual by SMO with maximal-violating-pair selection."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InvalidInputError("training needs at least 2 samples")
    if not 0 < nu < 1:
        raise InvalidInputError(f"nu must lie in (0, 1), got {nu}")
    _check_gamma(gamma)
    N = X.shape[0]
    C = 1.0 / (nu * N)
    K = rbf_gram(X, X, gamma)

    # feasible start: as many variables at the upper bound as fit, remainder on the next
    alpha = np.zeros(N)
    m = min(int(math.floor(nu * N)), N)
    while m > 0 and m * C > 1.0:
        m -= 1
    alpha[:m] = C
    if m < N:
        alpha[m] = 1.0 - m * C
    G = K @ alpha

    n_iter = 0
    gap = np.inf
    while True:
        up = alpha < C
        low = alpha > 0
        i = int(np.argmin(np.where(up, G, np.inf)))
        j = int(np.argmax(np.where(low, G, -np.inf)))
        # gap measured with multipliers summing to nu*N (the LIBSVM scaling)
        gap = (G[j] - G[i]) * nu * N
        if gap < tol:
            break
        if n_iter >= max_iter:
            raise ConvergenceError(f"SMO did not converge in {max_iter} iterations (KKT gap {gap:.3g})", gap)
        quad = K[i, i] + K[j, j] - 2 * K[i, j]
        if quad <= 0:
            quad = 1e-12
        t = (G[j] - G[i]) / quad
        room_i, room_j = C - alpha[i], alpha[j]
        if t >= room_i or t >= room_j:
            t = min(room_i, room_j)
            if room_i <= room_j:
                alpha[i] = C
                alpha[j] -= t
            else:
                alpha[i] += t
                alpha[j] = 0.0
        else:
            alpha[i] += t
            alpha[j] -= t
        G += t * (K[:, i] - K[:, j])
        n_iter += 1

    sv = alpha > 0
    dec = K[:, sv] @ alpha[sv]
    free = sv & (alpha < C)
    if free.any():
        vals = dec[free]
        rho = float(vals[0]) if np.ptp(vals) == 0 else float(vals.mean())
    else:
        at_upper = dec[alpha >= C]
        at_zero = dec[~sv]
        ends = [v for v in (at_upper.max() if at_upper.size else None, at_zero.min() if at_zero.size else None) if v is not None]
        rho = float(np.mean(ends))
    return OcsvmModel(
        support_vectors=X[sv].copy(),
        alphas=alpha[sv].copy(),
        rho=rho,
        gamma=float(gamma),
        nu=float(nu),
        stats=stats,
        n_iter=n_iter,
        kkt_gap=float(gap),
        objective=float(0.5 * alpha @ K @ alpha),
    )


def decision_function(model: OcsvmModel, X) -> np.ndarray:
    """Scores for a batch of (already standardised) rows; >= 0 means inlier."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.support_vectors.shape[1]:
        raise InvalidInputError(
            f"dimension mismatch: model has {model.support_vectors.shape[1]}, input {X.shape[1]}"
        )
    return rbf_gram(X, model.support_vectors, model.gamma) @ model.alphas - model.rho


def decide(model: OcsvmModel, x) -> tuple[float, str]:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidInputError("decide takes a single feature vector")
    score = float(decision_function(model, x)[0])
    return score, "inlier" if score >= 0 else "outlier"


@dataclass(frozen=True)
class OcsvmConfig:
    feature: str = "rgb"
    nu: float = 0.3
    gamma: float = 1.0
    slic_max_iters: int = DEFAULT_MAX_ITERS
    tol: float = SMO_TOL

    def __post_init__(self):
        if self.feature not in FEATURE_KINDS:
            raise InvalidInputError(f"feature must be one of {FEATURE_KINDS}, got {self.feature!r}")
        if not 0 < self.nu < 1:
            raise InvalidInputError(f"nu must lie in (0, 1), got {self.nu}")
        _check_gamma(self.gamma)
        if self.slic_max_iters < 1:
            raise InvalidInputError("slic_max_iters must be at least 1")


def classify_scene(sp: SuperpixelScene, features, config: OcsvmConfig) -> np.ndarray:
    """Ids of unknown superpixels the background model rejects."""
    bg, unk = sp.partition.background_ids, sp.partition.unknown_ids
    if bg.size < 2:
        raise InsufficientBackgroundError(f"only {bg.size} background superpixel(s); need at least 2")
    Xb, stats = standardize(features[bg])
    model = train_ocsvm(Xb, config.nu, config.gamma, tol=config.tol, stats=stats)
    if unk.size == 0:
        return unk
    scores = decision_function(model, stats.apply(features[unk]))
    return unk[scores < 0]


def ocsvm_segment(frame, bbox: BoundingBox, config: OcsvmConfig | None = None) -> BinaryMask:
    """Full-frame object mask: superpixels inside the box that look unlike the background."""
    config = config or OcsvmConfig()
    sp = prepare_superpixel_scene(frame, bbox, config.slic_max_iters)
    feats = superpixel_features(sp.scene.crop, sp.spmap, config.feature)
    return sp.to_frame(classify_scene(sp, feats, config))
