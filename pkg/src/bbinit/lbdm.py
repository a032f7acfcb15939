"""Learning-based digital matting driven by scribbles generated from the box.

Each pixel's alpha is modelled as a ridge-regression combination of its
window neighbours' alphas. Stacking the coefficient vectors column-wise into
``F`` gives the quadratic energy

    alpha^T (I - F)(I - F)^T alpha + (alpha - alpha_hat)^T C (alpha - alpha_hat)

whose minimiser solves ``((I - F)(I - F)^T + C) alpha = C alpha_hat``. The
contracted box is labelled object, everything outside the expanded box
background, and the matte is cut at the threshold that fills a fraction
``tau`` of the box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .cg import jacobi_pcg
from .core import BinaryMask, BoundingBox, as_image, bbox_pixel_ranges, crop_context, rasterize_bbox, scale_bbox_area
from .errors import DegenerateScribbleError, InvalidInputError

BACKGROUND, UNKNOWN, OBJECT = 0, 1, 2

DEFAULT_C = 800.0
DEFAULT_CG_TOL = 1e-6
DEFAULT_CG_MAX_ITERS = 50_000
_BATCH = 4096


@dataclass(frozen=True)
class LbdmConfig:
    rho_minus: float = 0.8
    rho_plus: float = 1.2
    tau: float = 0.85
    lam: float = 1e-2
    c: float = DEFAULT_C
    window: int = 1
    cg_tol: float = DEFAULT_CG_TOL
    cg_max_iters: int = DEFAULT_CG_MAX_ITERS

    def __post_init__(self):
        _check_rhos(self.rho_minus, self.rho_plus)
        if not 0.5 <= self.tau <= 1:
            raise InvalidInputError(f"tau must lie in [0.5, 1], got {self.tau}")
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise InvalidInputError(f"lambda must be positive, got {self.lam}")
        if not (math.isfinite(self.c) and self.c > 0):
            raise InvalidInputError(f"c must be positive, got {self.c}")
        if int(self.window) != self.window or self.window < 1:
            raise InvalidInputError(f"window half-width must be a positive integer, got {self.window}")
        if not self.cg_tol > 0:
            raise InvalidInputError("cg_tol must be positive")
        if self.cg_max_iters < 1:
            raise InvalidInputError("cg_max_iters must be at least 1")


@dataclass(frozen=True)
class AlphaMatte:
    alpha: np.ndarray
    iterations: int = 0
    residual: float = 0.0

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float)
        if not np.isfinite(a).all():
            raise InvalidInputError("alpha matte contains non-finite values")
        a.flags.writeable = False
        object.__setattr__(self, "alpha", a)

    def clamped(self) -> np.ndarray:
        return np.clip(self.alpha, 0.0, 1.0)


@dataclass(frozen=True)
class SparseSystem:
    A: sp.csr_matrix
    b: np.ndarray
    shape: tuple[int, int]


def _check_rhos(rho_minus, rho_plus):
    if not 0 < rho_minus < 1:
        raise InvalidInputError(f"rho_minus must lie in (0, 1), got {rho_minus}")
    if not 1 < rho_plus <= 2:
        raise InvalidInputError(f"rho_plus must lie in (1, 2], got {rho_plus}")


def make_scribble(bbox_local: BoundingBox, extent, rho_minus: float, rho_plus: float) -> np.ndarray:
    """Tri-valued label image: OBJECT inside the contracted box, BACKGROUND
    outside the expanded box, UNKNOWN between."""
    _check_rhos(rho_minus, rho_plus)
    W, H = extent
    if not bbox_local.intersects(W, H):
        raise InvalidInputError(f"box {bbox_local} does not overlap the {W}x{H} crop")
    inner = rasterize_bbox(scale_bbox_area(bbox_local, rho_minus), extent).labels
    if not inner.any():
        raise DegenerateScribbleError(
            f"contracted box (rho_minus={rho_minus}) covers no pixel centre; the object scribble is empty"
        )
    outer = rasterize_bbox(scale_bbox_area(bbox_local, rho_plus), extent).labels
    labels = np.full((H, W), BACKGROUND, dtype=np.uint8)
    labels[outer] = UNKNOWN
    labels[inner] = OBJECT
    return labels


def local_coefficients(Xi, xi, lam: float) -> np.ndarray:
    """Ridge coefficients ``(Xi Xi^T + lam I)^-1 Xi xi`` for one pixel.

    ``Xi`` is ``m x (d + 1)`` (neighbour features with a trailing 1) and ``xi``
    the centre pixel's ``d + 1`` vector.
    """
    Xi = np.asarray(Xi, dtype=float)
    xi = np.asarray(xi, dtype=float)
    G = Xi @ Xi.T + lam * np.eye(Xi.shape[0])
    return np.linalg.solve(G, Xi @ xi)


def _axis_patterns(n, r):
    """Group positions along one axis by their in-bounds offset range."""
    groups = {}
    for p in range(n):
        key = (max(-r, -p), min(r, n - 1 - p))
        groups.setdefault(key, []).append(p)
    return groups


def coefficient_matrix(crop, lam: float, window: int = 1) -> sp.csc_matrix:
    """``F`` with column ``i`` holding pixel i's coefficients at its neighbours' rows.

    Windows are truncated at the crop border, so edge pixels have fewer
    neighbours; the centre pixel is never its own neighbour.
    """
    crop = as_image(crop)
    H, W = crop.shape[:2]
    n = H * W
    feats = np.concatenate([crop.reshape(n, 3) / 255.0, np.ones((n, 1))], axis=1)
    rows_out, cols_out, vals_out = [], [], []
    for (ylo, yhi), ys in _axis_patterns(H, window).items():
        for (xlo, xhi), xs in _axis_patterns(W, window).items():
            offs = [(dy, dx) for dy in range(ylo, yhi + 1) for dx in range(xlo, xhi + 1) if (dy, dx) != (0, 0)]
            if not offs:
                continue
            delta = np.array([dy * W + dx for dy, dx in offs])
            centres = (np.asarray(ys)[:, None] * W + np.asarray(xs)[None, :]).ravel()
            m = len(offs)
            eye = lam * np.eye(m)
            for s in range(0, centres.size, _BATCH):
                c = centres[s : s + _BATCH]
                nb = c[:, None] + delta[None, :]
                Xn = feats[nb]  # (g, m, 4)
                G = Xn @ Xn.transpose(0, 2, 1) + eye
                rhs = Xn @ feats[c][:, :, None]
                f = np.linalg.solve(G, rhs)[..., 0]
                rows_out.append(nb.ravel())
                cols_out.append(np.repeat(c, m))
                vals_out.append(f.ravel())
    if not rows_out:
        return sp.csc_matrix((n, n))
    return sp.csc_matrix(
        (np.concatenate(vals_out), (np.concatenate(rows_out), np.concatenate(cols_out))), shape=(n, n)
    )


def smoothness_matrix(crop, lam: float, window: int = 1) -> sp.csr_matrix:
    """``(I - F)(I - F)^T`` for the crop."""
    crop = as_image(crop)
    n = crop.shape[0] * crop.shape[1]
    M = (sp.identity(n, format="csc") - coefficient_matrix(crop, lam, window)).tocsr()
    L = (M @ M.T).tocsr()
    # exact symmetry regardless of summation order in the product
    return ((L + L.T) * 0.5).tocsr()


def assemble_system(crop, scribble, config: LbdmConfig, smoothness=None) -> SparseSystem:
    crop = as_image(crop)
    scribble = np.asarray(scribble)
    if scribble.shape != crop.shape[:2]:
        raise InvalidInputError(f"scribble shape {scribble.shape} does not match crop {crop.shape[:2]}")
    L = smoothness if smoothness is not None else smoothness_matrix(crop, config.lam, config.window)
    labelled = (scribble != UNKNOWN).ravel()
    cdiag = np.where(labelled, config.c, 0.0)
    alpha_hat = (scribble == OBJECT).ravel().astype(float)
    A = (L + sp.diags(cdiag)).tocsr()
    return SparseSystem(A, cdiag * alpha_hat, scribble.shape)


def solve_alpha(system: SparseSystem, config: LbdmConfig | None = None) -> AlphaMatte:
    config = config or LbdmConfig()
    x, it, res = jacobi_pcg(system.A, system.b, tol=config.cg_tol, max_iter=config.cg_max_iters)
    return AlphaMatte(x.reshape(system.shape), it, res)


def threshold_alpha(matte: AlphaMatte, bbox_local: BoundingBox, tau: float) -> BinaryMask:
    """Object wherever alpha exceeds the value that leaves a fraction ``tau`` of the box above it.

    The threshold is the box's alpha values sorted ascending, indexed at
    ``floor((1 - tau) * |V|)``. Pixels outside the box are kept if they exceed it.
    """
    if not 0.5 <= tau <= 1:
        raise InvalidInputError(f"tau must lie in [0.5, 1], got {tau}")
    a = matte.alpha
    c0, c1, r0, r1 = bbox_pixel_ranges(bbox_local, (a.shape[1], a.shape[0]))
    V = np.sort(a[r0:r1, c0:c1].ravel())
    if V.size == 0:
        raise InvalidInputError("bounding box contains no pixel centre")
    # small epsilon so e.g. (1 - 0.8) * 100 does not floor to 19
    k = min(V.size - 1, math.floor((1.0 - tau) * V.size + 1e-9))
    return BinaryMask(a > V[k])


def lbdm_segment(frame, bbox: BoundingBox, config: LbdmConfig | None = None) -> BinaryMask:
    config = config or LbdmConfig()
    scene = crop_context(frame, bbox)
    scribble = make_scribble(scene.bbox_local, scene.extent, config.rho_minus, config.rho_plus)
    matte = solve_alpha(assemble_system(scene.crop, scribble, config), config)
    return scene.to_frame(threshold_alpha(matte, scene.bbox_local, config.tau).labels)
