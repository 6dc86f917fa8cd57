"""Dense real matrix spectral primitives: SVD and largest-singular-value estimation.

Matrices are plain float64 ``numpy`` arrays (2-D, row-major). ``svd`` is the
production factorization used inside training loops; ``jacobi_svd`` is an
independent one-sided Jacobi implementation kept for cross-checking on the
small (<= 256 wide) matrices that occur here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Singular values below RANK_CLAMP * sigma_1 are treated as exact zeros.
RANK_CLAMP = 1e-12


class ValidationError(ValueError):
    """Input violates a documented precondition."""


def as_matrix(w, name: str = "matrix") -> np.ndarray:
    """Validate and convert `w` to a finite float64 2-D array."""
    a = np.asarray(w, dtype=np.float64)
    if a.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValidationError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains non-finite entries")
    return a


@dataclass
class SvdResult:
    """W = u @ diag(sigma) @ v.T with orthonormal columns in u and v.

    sigma is descending and non-negative; r = min(rows, cols).
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


def svd(w) -> SvdResult:
    """Full thin SVD of a dense real matrix.

    Values below ``RANK_CLAMP * sigma_1`` are clamped to zero so rank
    queries are stable against roundoff.
    """
    a = as_matrix(w)
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError:
        # LAPACK's iterative driver can fail on valid finite matrices;
        # the one-sided Jacobi route always converges at these sizes.
        return jacobi_svd(a)
    if s.size and s[0] > 0.0:
        s = np.where(s < RANK_CLAMP * s[0], 0.0, s)
    return SvdResult(u=u, sigma=s, v=vh.T)


def rank(result: SvdResult) -> int:
    return int(np.count_nonzero(result.sigma))


def jacobi_svd(w, tol: float = 1e-14, max_sweeps: int = 60) -> SvdResult:
    """One-sided Jacobi SVD (rotations orthogonalize column pairs of W).

    Independent of the LAPACK route; quadratically convergent and accurate
    for the small dense matrices used in this artifact. Columns of the
    rotated matrix become sigma_j * u_j; V accumulates the rotations.
    """
    a = as_matrix(w).copy()
    transposed = a.shape[0] < a.shape[1]
    if transposed:
        a = a.T.copy()
    m, n = a.shape
    v = np.eye(n)

    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                app = a[:, p] @ a[:, p]
                aqq = a[:, q] @ a[:, q]
                apq = a[:, p] @ a[:, q]
                denom = np.sqrt(app * aqq)
                if denom == 0.0 or abs(apq) <= tol * denom:
                    continue
                off = max(off, abs(apq) / denom)
                zeta = (aqq - app) / (2.0 * apq)
                t = np.sign(zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                col_p = a[:, p].copy()
                a[:, p] = c * col_p - s * a[:, q]
                a[:, q] = s * col_p + c * a[:, q]
                col_p = v[:, p].copy()
                v[:, p] = c * col_p - s * v[:, q]
                v[:, q] = s * col_p + c * v[:, q]
        if off <= tol:
            break

    sigma = np.linalg.norm(a, axis=0)
    order = np.argsort(sigma)[::-1]
    sigma = sigma[order]
    a = a[:, order]
    v = v[:, order]

    u = np.zeros((m, n))
    cutoff = RANK_CLAMP * sigma[0] if sigma[0] > 0 else 0.0
    zero_cols = []
    for j in range(n):
        if sigma[j] > cutoff:
            u[:, j] = a[:, j] / sigma[j]
        else:
            sigma[j] = 0.0
            zero_cols.append(j)
    if zero_cols:
        u = _complete_orthonormal(u, zero_cols)

    if transposed:
        u, v = v, u
    return SvdResult(u=u, sigma=sigma, v=v)


def _complete_orthonormal(u: np.ndarray, zero_cols: list[int]) -> np.ndarray:
    """Fill null-space columns so u keeps orthonormal columns."""
    m = u.shape[0]
    filled = [u[:, j] for j in range(u.shape[1]) if j not in zero_cols]
    for j in zero_cols:
        for k in range(m):
            cand = np.zeros(m)
            cand[k] = 1.0
            for b in filled:
                cand -= (b @ cand) * b
            norm = np.linalg.norm(cand)
            if norm > 1e-8:
                cand /= norm
                u[:, j] = cand
                filled.append(cand)
                break
    return u


@dataclass
class PowerIterState:
    """Persistent left-vector estimate for warm-started power iteration."""

    u_vec: np.ndarray

    def copy(self) -> "PowerIterState":
        return PowerIterState(u_vec=self.u_vec.copy())


def init_power_state(rows: int, rng: np.random.Generator) -> PowerIterState:
    u = rng.standard_normal(rows)
    norm = np.linalg.norm(u)
    while norm < 1e-12:  # astronomically unlikely, but keep the invariant
        u = rng.standard_normal(rows)
        norm = np.linalg.norm(u)
    return PowerIterState(u_vec=u / norm)


def spectral_norm(w, state: PowerIterState, iters: int = 1) -> tuple[float, PowerIterState]:
    """Largest-singular-value estimate of `w` by power iteration.

    Returns the estimate and the updated state; one warm iteration per
    training step tracks sigma_1 closely, 200 cold iterations recover it to
    1e-4 when the top two singular values are separated.
    """
    a = as_matrix(w)
    if iters < 1:
        raise ValidationError("iters must be >= 1")
    if a.shape[0] != state.u_vec.shape[0]:
        raise ValidationError(
            f"state dimension {state.u_vec.shape[0]} does not match rows {a.shape[0]}"
        )
    u = state.u_vec
    v = None
    for _ in range(iters):
        v = a.T @ u
        nv = np.linalg.norm(v)
        if nv < 1e-300:
            return 0.0, state.copy()
        v = v / nv
        u = a @ v
        nu = np.linalg.norm(u)
        if nu < 1e-300:
            return 0.0, state.copy()
        u = u / nu
    sigma = float(u @ (a @ v))
    return max(sigma, 0.0), PowerIterState(u_vec=u)
