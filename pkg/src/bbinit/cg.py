"""Jacobi-preconditioned conjugate gradient for sparse SPD systems."""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError


def jacobi_pcg(A, b, tol=1e-6, max_iter=10_000, x0=None):
    """Solve ``A x = b`` for symmetric positive (semi)definite ``A``.

    Stops once the true relative residual ``|b - A x| / |b|`` is at most
    ``tol``. The recurrence residual is re-synchronised with the true one
    whenever it claims convergence, so returned solutions always satisfy the
    bound. Returns ``(x, iterations, relative_residual)``.

    Raises ConvergenceError after ``max_iter`` iterations.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    norm_b = np.linalg.norm(b)
    if norm_b == 0:
        return np.zeros(n), 0, 0.0

    d = np.asarray(A.diagonal(), dtype=float)
    inv_d = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 1.0)

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    it = 0
    while True:
        res = np.linalg.norm(r) / norm_b
        if res <= tol:
            # guard against drift between the recurrence and the true residual
            r = b - A @ x
            res = np.linalg.norm(r) / norm_b
            if res <= tol:
                return x, it, float(res)
            z = inv_d * r
            p = z.copy()
            rz = r @ z
        if it >= max_iter:
            raise ConvergenceError(
                f"conjugate gradient did not converge in {max_iter} iterations "
                f"(relative residual {res:.3g})",
                float(res),
            )
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            # direction in the null space; restart from the current residual
            r = b - A @ x
            z = inv_d * r
            p = z.copy()
            rz = r @ z
            if np.linalg.norm(r) / norm_b <= tol:
                continue
            raise ConvergenceError("conjugate gradient broke down (non-positive curvature)", float(res))
        step = rz / pAp
        x += step * p
        r -= step * Ap
        z = inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
