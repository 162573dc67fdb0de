"""Constraint-qualification certificates and the tangent-cone sampling oracle.

LICQ is a rank test on the active gradients.  The strict-inward-direction
condition is decided twice: as a small dense LP feasibility problem in the
tangent frame (primal) and as positive linear independence of the active
gradients (dual); strong duality makes the two verdicts agree, which the
test suite checks on every instance.

The tangent cone itself is not computable in general, so only a sampling
oracle is provided: feasible sequences are generated by projecting
perturbed points back onto the feasible set and difference quotients are
extrapolated in a chart.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import _cones
from .kkt import Multipliers, gradient_columns
from .manifold import (
    GeometryError,
    Point,
    TangentVector,
    exp,
    make_chart,
    chart_forward,
    random_tangent,
    same_point,
    tangent_basis,
    tangent_project,
)
from .problem import (
    ActiveSet,
    BallField,
    ConstrainedProblem,
    DEFAULT_ACT_TOL,
    InfeasiblePointError,
    active_set,
    is_feasible,
)

logger = logging.getLogger("manikkt")

DEFAULT_RANK_TOL = 1e-8
DEFAULT_LIN_TOL = 1e-9


def _require_feasible(prob: ConstrainedProblem, p: Point, tol: float) -> None:
    rep = is_feasible(prob, p, tol)
    if not rep.feasible:
        raise InfeasiblePointError(
            f"constraint qualifications are defined at feasible points only "
            f"(violation {rep.max_violation:.3e})"
        )


def check_licq(
    prob: ConstrainedProblem,
    p: Point,
    act_tol: float = DEFAULT_ACT_TOL,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> Tuple[bool, float]:
    """Linear independence of the equality and active inequality gradients.

    Returns the verdict and the smallest singular value of the gradient
    matrix (inf when no constraint is active).  The rank cut is relative
    to the largest singular value once that exceeds 1.
    """
    _require_feasible(prob, p, act_tol)
    act = active_set(prob, p, act_tol)
    G, H = gradient_columns(prob, p, list(act.active))
    cols = np.hstack([H, G])
    independent, sigma_min = _cones.columns_independent(cols, rank_tol)
    return independent and cols.shape[1] <= prob.manifold.intrinsic_dim, sigma_min


def check_mfcq(
    prob: ConstrainedProblem,
    p: Point,
    act_tol: float = DEFAULT_ACT_TOL,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> Tuple[bool, Optional[TangentVector]]:
    """Primal test: independent equality gradients plus a strictly inward vector.

    The vector v solves <grad g_i, v> <= -1 on the active set and
    <grad h_j, v> = 0, found by LP feasibility in the tangent frame.  Its
    magnitude carries no meaning (the -1 threshold is a normalization of
    the strict inequality) and it is returned unscaled.
    """
    _require_feasible(prob, p, act_tol)
    act = active_set(prob, p, act_tol)
    G, H = gradient_columns(prob, p, list(act.active))
    if prob.q:
        eq_ok, _ = _cones.columns_independent(H, rank_tol)
        if not eq_ok or prob.q > prob.manifold.intrinsic_dim:
            return False, None
    F = tangent_basis(p)
    v = _cones.strict_inward_direction((G.T @ F), (H.T @ F))
    if v is None:
        return False, None
    return True, TangentVector(p, F @ v)


def mfcq_dual_check(
    prob: ConstrainedProblem,
    p: Point,
    act_tol: float = DEFAULT_ACT_TOL,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> Tuple[bool, Optional[Multipliers]]:
    """Dual test: positive linear independence of the constraint gradients.

    Searches for nonzero (mu, lam) with mu >= 0 on the active set,
    mu = 0 elsewhere, and sum mu_i grad g_i + sum lam_j grad h_j = 0.
    Such a solution (returned unit-normalized, residual <= 1e-10) refutes
    the strict-inward-direction condition; its absence together with
    full-rank equality gradients certifies it.
    """
    _require_feasible(prob, p, act_tol)
    act = active_set(prob, p, act_tol)
    G, H = gradient_columns(prob, p, list(act.active))
    found = _cones.nonzero_positive_combination(G, H)
    if found is None:
        return True, None
    mu = np.zeros(prob.m)
    mu[list(act.active)] = found[0]
    return False, Multipliers(mu, found[1])


def linearizing_cone_contains(
    prob: ConstrainedProblem,
    p: Point,
    v: TangentVector,
    act_tol: float = DEFAULT_ACT_TOL,
    tol: float = DEFAULT_LIN_TOL,
) -> bool:
    """Membership of v in the linearizing cone at p.

    True iff <grad g_i, v> <= tol for every active i and
    |<grad h_j, v>| <= tol for every j.
    """
    if not same_point(p, v.base):
        raise GeometryError("direction must be based at the query point")
    act = active_set(prob, p, act_tol)
    for i in act.active:
        if prob.inequalities[i].gradient(p).vec @ v.vec > tol:
            return False
    for h in prob.equalities:
        if abs(h.gradient(p).vec @ v.vec) > tol:
            return False
    return True


def _restore_feasibility(
    prob: ConstrainedProblem,
    q: Point,
    feas_tol: float,
    max_iter: int,
) -> Optional[Point]:
    """Pull a nearby point onto the feasible set.

    A violated ball alone uses the closed-form geodesic projection and
    other lone inequalities a Newton step to their zero level set; when
    equalities are involved, one least-norm Gauss-Newton step targets all
    violated constraints simultaneously.
    """
    from .solver import project_ball

    for _ in range(max_iter):
        viol_vals = []
        viol_grads = []
        for h in prob.equalities:
            val = h.value(q)
            if abs(val) > feas_tol:
                viol_vals.append(val)
                viol_grads.append(h.gradient(q).vec)
        worst, worst_val = -1, feas_tol
        for i, g in enumerate(prob.inequalities):
            val = g.value(q)
            if val > worst_val:
                worst, worst_val = i, val
        if worst < 0 and not viol_vals:
            return q
        if not viol_vals:
            g = prob.inequalities[worst]
            if isinstance(g, BallField):
                q = project_ball(g.center, g.radius, q)
                continue
            grad = g.gradient(q)
            denom = float(grad.vec @ grad.vec)
            if denom < 1e-16:
                return None
            q = exp(q, TangentVector(q, -(worst_val / denom) * grad.vec))
            continue
        if worst >= 0:
            viol_vals.append(worst_val)
            viol_grads.append(prob.inequalities[worst].gradient(q).vec)
        J = np.column_stack(viol_grads)
        delta, *_ = np.linalg.lstsq(J.T, -np.asarray(viol_vals), rcond=None)
        if not np.all(np.isfinite(delta)) or np.linalg.norm(delta) < 1e-17:
            return None
        q = exp(q, tangent_project(q, delta))
    return None


def sample_tangent_cone(
    prob: ConstrainedProblem,
    p: Point,
    n_samples: int = 200,
    seed: int = 0,
    t0: float = 0.05,
    n_levels: int = 6,
    act_tol: float = DEFAULT_ACT_TOL,
) -> List[TangentVector]:
    """Monte Carlo oracle for members of the tangent cone at p.

    For each random direction, feasible points near exp_p(t u) are found
    at dyadically shrinking scales t, their chart difference quotients are
    formed, and the two finest levels are Richardson-extrapolated.
    Accuracy is O(t_min^2) plus the restoration tolerance, so membership
    checks downstream should allow a tolerance of that order.

    Deterministic per (inputs, seed).  When no feasible neighbors can be
    produced at all, returns an empty list after logging a diagnostic.
    """
    _require_feasible(prob, p, act_tol)
    rng = np.random.default_rng(seed)
    chart = make_chart(p)
    F = chart.frame_matrix
    ts = [t0 * 0.5**j for j in range(n_levels)]
    feas_tol = 1e-12
    samples: List[TangentVector] = []
    failures = 0
    for _ in range(n_samples):
        vec = None
        for _attempt in range(8):
            u = random_tangent(p, rng, unit=True)
            quotients = []
            for t in ts:
                q = _restore_feasibility(prob, exp(p, TangentVector(p, t * u.vec)), feas_tol, 60)
                if q is None:
                    break
                quotients.append(chart_forward(chart, q) / t)
            if len(quotients) == len(ts):
                vec = 2.0 * quotients[-1] - quotients[-2]
                break
        if vec is None:
            failures += 1
            continue
        samples.append(TangentVector(p, F @ vec))
    if not samples:
        logger.warning(
            "sample_tangent_cone: no feasible neighbors found for any of %d "
            "directions (seed %d); returning an empty list",
            n_samples,
            seed,
        )
    elif failures:
        logger.info("sample_tangent_cone: %d of %d directions failed restoration", failures, n_samples)
    return samples


@dataclass(frozen=True)
class CQReport:
    """Bundle of constraint-qualification certificates at a point.

    Construction enforces the implication chain: a report claiming LICQ
    without the strict-inward-direction condition is rejected outright.
    """

    licq: bool
    sigma_min: float
    mfcq: bool
    mfcq_vector: Optional[TangentVector]
    dual_violation: Optional[Multipliers]
    equality_rank_ok: bool
    active_set: ActiveSet
    tolerances: dict
    seed: Optional[int] = None

    def __post_init__(self):
        if self.licq and not self.mfcq:
            raise RuntimeError(
                "inconsistent report: LICQ certified but the strict-inward "
                "condition failed; this contradicts the implication chain"
            )

    def as_dict(self) -> dict:
        return {
            "licq": self.licq,
            "sigma_min": self.sigma_min if np.isfinite(self.sigma_min) else None,
            "mfcq": self.mfcq,
            "mfcq_vector": None if self.mfcq_vector is None else self.mfcq_vector.vec.tolist(),
            "dual_violation": None if self.dual_violation is None else self.dual_violation.as_dict(),
            "equality_rank_ok": self.equality_rank_ok,
            "active_set": self.active_set.as_dict(),
            "tolerances": dict(self.tolerances),
            "seed": self.seed,
        }


def cq_report(
    prob: ConstrainedProblem,
    p: Point,
    act_tol: float = DEFAULT_ACT_TOL,
    rank_tol: float = DEFAULT_RANK_TOL,
    seed: Optional[int] = None,
) -> CQReport:
    """Run every certificate at p and assemble one report."""
    licq, sigma_min = check_licq(prob, p, act_tol, rank_tol)
    mfcq, vector = check_mfcq(prob, p, act_tol, rank_tol)
    _, violation = mfcq_dual_check(prob, p, act_tol, rank_tol)
    if prob.q:
        _, H = gradient_columns(prob, p, [])
        eq_ok, _ = _cones.columns_independent(H, rank_tol)
        eq_ok = eq_ok and prob.q <= prob.manifold.intrinsic_dim
    else:
        eq_ok = True
    return CQReport(
        licq=licq,
        sigma_min=sigma_min,
        mfcq=mfcq,
        mfcq_vector=vector,
        dual_violation=violation,
        equality_rank_ok=eq_ok,
        active_set=active_set(prob, p, act_tol),
        tolerances={"act_tol": act_tol, "rank_tol": rank_tol, "lin_tol": DEFAULT_LIN_TOL},
        seed=seed,
    )
