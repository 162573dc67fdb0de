"""Small dense cone and least-squares routines shared by kkt and cq.

All functions work on plain matrices whose columns are tangent vectors in
ambient coordinates; callers translate to and from the geometric types.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np
from scipy.optimize import linprog, nnls

RANK_TOL = 1e-8


def orthonormal_range(A: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of the column space of A (empty matrix allowed)."""
    if A.size == 0:
        return np.zeros((A.shape[0], 0))
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return u[:, :rank]


def sign_constrained_lstsq(
    G: np.ndarray, H: np.ndarray, b: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Minimize |G mu + H lam - b| over mu >= 0, lam free.

    The free part is eliminated by projecting onto the orthogonal
    complement of col(H); the sign-constrained part is solved by NNLS.
    Returns (mu, lam, residual_vector) with residual = G mu + H lam - b.
    """
    n = b.shape[0]
    G = G.reshape(n, -1)
    H = H.reshape(n, -1)
    Q = orthonormal_range(H)

    def project_out(v):
        return v - Q @ (Q.T @ v) if Q.shape[1] else v

    if G.shape[1]:
        PG = np.column_stack([project_out(G[:, j]) for j in range(G.shape[1])])
        mu, _ = nnls(PG, project_out(b))
    else:
        mu = np.zeros(0)
    if H.shape[1]:
        lam, *_ = np.linalg.lstsq(H, b - G @ mu, rcond=None)
    else:
        lam = np.zeros(0)
    residual = G @ mu + H @ lam - b
    return mu, lam, residual


def smallest_singular_value(cols: np.ndarray) -> Tuple[float, float]:
    """(sigma_min, sigma_max) of a matrix of column vectors; (inf, 0) if empty."""
    if cols.size == 0 or cols.shape[1] == 0:
        return np.inf, 0.0
    s = np.linalg.svd(cols, compute_uv=False)
    return float(s[-1]), float(s[0])


def rank_threshold(sigma_max: float, rank_tol: float = RANK_TOL) -> float:
    """Rank cut, relative to sigma_max when that exceeds 1, absolute otherwise."""
    return rank_tol * max(1.0, sigma_max)


def columns_independent(cols: np.ndarray, rank_tol: float = RANK_TOL) -> Tuple[bool, float]:
    """Linear independence of the columns via the smallest singular value."""
    smin, smax = smallest_singular_value(cols)
    if cols.size == 0 or cols.shape[1] == 0:
        return True, np.inf
    if cols.shape[1] > cols.shape[0]:
        return False, smin
    return smin > rank_threshold(smax, rank_tol), smin


def strict_inward_direction(
    G_rows: np.ndarray, H_rows: np.ndarray
) -> Optional[np.ndarray]:
    """Feasible point of {v : G_rows v <= -1, H_rows v = 0}, or None.

    This is the zero-objective LP form of the strict-inward-direction
    condition; the -1 right-hand side replaces strict inequalities.  The
    returned v is polished to satisfy the equalities to machine precision.
    """
    d = G_rows.shape[1] if G_rows.size else H_rows.shape[1]
    if G_rows.size == 0 and H_rows.size == 0:
        return np.zeros(d)
    kwargs = {}
    if G_rows.size:
        kwargs["A_ub"] = G_rows
        kwargs["b_ub"] = -np.ones(G_rows.shape[0])
    if H_rows.size:
        kwargs["A_eq"] = H_rows
        kwargs["b_eq"] = np.zeros(H_rows.shape[0])
    res = linprog(np.zeros(d), bounds=[(None, None)] * d, method="highs", **kwargs)
    if res.status == 2:  # infeasible
        return None
    if not res.success:
        raise RuntimeError(f"LP solver failed with status {res.status}: {res.message}")
    v = res.x
    if H_rows.size:
        Q = orthonormal_range(H_rows.T)
        if Q.shape[1]:
            v = v - Q @ (Q.T @ v)
        # Polishing may nudge an inequality margin; verify it survived.
        if G_rows.size and np.max(G_rows @ v) > -0.5:
            return None
    return v


def nonzero_positive_combination(
    G: np.ndarray, H: np.ndarray, residual_tol: float = 1e-10
) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Nonzero (mu >= 0, lam) with G mu + H lam = 0, normalized to unit norm.

    Returns None when (mu, lam) = 0 is the only solution.  Dependent
    equality gradients alone already yield a solution with mu = 0.
    """
    n = G.shape[0] if G.size else H.shape[0]
    G = G.reshape(n, -1)
    H = H.reshape(n, -1)

    if H.shape[1]:
        u, s, vt = np.linalg.svd(H, full_matrices=False)
        smin = s[-1] if s.size else 0.0
        if H.shape[1] > H.shape[0] or smin <= rank_threshold(float(s[0]) if s.size else 0.0):
            lam = vt[-1]
            mu = np.zeros(G.shape[1])
            return _normalized(mu, lam)

    if not G.shape[1]:
        return None

    Q = orthonormal_range(H)
    PG = G - Q @ (Q.T @ G) if Q.shape[1] else G
    # Search the slice sum(mu) = 1 of the cone {mu >= 0} for a null vector
    # of PG; the normalization row is weighted so NNLS cannot trade it away.
    rho = 1e3
    A = np.vstack([PG, rho * np.ones((1, G.shape[1]))])
    b = np.concatenate([np.zeros(n), [rho]])
    mu, _ = nnls(A, b)
    if mu.sum() < 0.5:
        return None
    if H.shape[1]:
        lam, *_ = np.linalg.lstsq(H, -G @ mu, rcond=None)
    else:
        lam = np.zeros(0)
    scale = float(np.linalg.norm(np.concatenate([mu, lam])))
    if scale == 0.0 or np.linalg.norm(G @ mu + H @ lam) > residual_tol * scale:
        return None
    return _normalized(mu, lam)


def _normalized(mu: np.ndarray, lam: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    scale = float(np.linalg.norm(np.concatenate([mu, lam])))
    return mu / scale, lam / scale
