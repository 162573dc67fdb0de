"""Lagrangian machinery: residuals, multiplier recovery, and the structure
of the multiplier set.

Cotangent vectors are represented throughout by their metric-dual
gradients, so deciding whether multipliers exist amounts to membership of
-grad f(p) in the finitely generated cone spanned by the active inequality
gradients (nonnegative weights) and equality gradients (free weights).
That membership is solved as a sign-constrained least-squares problem; when
it fails, the residual direction is upgraded to an explicitly certified
improving direction (the Farkas alternative).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import _cones
from .manifold import Point, TangentVector, inner, tangent_project
from .problem import (
    ActiveSet,
    ConstrainedProblem,
    DEFAULT_ACT_TOL,
    InfeasiblePointError,
    ScalarField,
    active_set,
    is_feasible,
)

DEFAULT_KKT_TOL = 1e-9  # on the norm of the Lagrangian gradient
WITNESS_EQ_TOL = 1e-10
STRUCTURE_SIZE_CAP = 12


class DegenerateGradientError(ValueError):
    """All active constraint gradients vanish; multipliers are unidentifiable."""


@dataclass(frozen=True)
class Multipliers:
    """Inequality multipliers mu (length m) and equality multipliers lam (length q)."""

    mu: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=float))

    def as_dict(self) -> dict:
        return {"mu": self.mu.tolist(), "lambda": self.lam.tolist()}


@dataclass(frozen=True)
class KKTReport:
    """Residuals of the KKT system at a point, with a certificate.

    Exactly one of ``multipliers`` / ``farkas_witness`` is set by
    :func:`find_multipliers`; ``kkt_residual`` evaluates caller-supplied
    multipliers and carries them through.
    """

    stationarity_sq: float
    feas_violation: float
    compl_violation: float
    multipliers: Optional[Multipliers]
    farkas_witness: Optional[TangentVector]
    active_set: ActiveSet
    tolerances: dict

    def as_dict(self) -> dict:
        return {
            "stationarity_sq": self.stationarity_sq,
            "feas_violation": self.feas_violation,
            "compl_violation": self.compl_violation,
            "mu": None if self.multipliers is None else self.multipliers.mu.tolist(),
            "lambda": None if self.multipliers is None else self.multipliers.lam.tolist(),
            "farkas_witness": None
            if self.farkas_witness is None
            else self.farkas_witness.vec.tolist(),
            "active_set": self.active_set.as_dict(),
            "tolerances": dict(self.tolerances),
        }


def _check_dims(prob: ConstrainedProblem, mult: Multipliers) -> None:
    if mult.mu.shape != (prob.m,) or mult.lam.shape != (prob.q,):
        raise ValueError(
            f"multiplier dimensions ({mult.mu.shape[0]}, {mult.lam.shape[0]}) "
            f"do not match problem ({prob.m}, {prob.q})"
        )


def lagrangian_value(prob: ConstrainedProblem, p: Point, mult: Multipliers) -> float:
    """f(p) + mu . g(p) + lam . h(p)."""
    _check_dims(prob, mult)
    val = prob.objective.value(p)
    val += sum(m * g.value(p) for m, g in zip(mult.mu, prob.inequalities))
    val += sum(l * h.value(p) for l, h in zip(mult.lam, prob.equalities))
    return float(val)


def lagrangian_gradient(prob: ConstrainedProblem, p: Point, mult: Multipliers) -> TangentVector:
    """grad f(p) + sum_i mu_i grad g_i(p) + sum_j lam_j grad h_j(p)."""
    _check_dims(prob, mult)
    acc = np.array(prob.objective.gradient(p).vec)
    for m, g in zip(mult.mu, prob.inequalities):
        acc += m * g.gradient(p).vec
    for l, h in zip(mult.lam, prob.equalities):
        acc += l * h.gradient(p).vec
    return TangentVector(p, acc)


def gradient_columns(
    prob: ConstrainedProblem, p: Point, indices
) -> Tuple[np.ndarray, np.ndarray]:
    """(G, H): active inequality and equality gradients as ambient columns."""
    n = prob.manifold.ambient_dim
    G = np.column_stack([prob.inequalities[i].gradient(p).vec for i in indices]) if indices else np.zeros((n, 0))
    H = np.column_stack([h.gradient(p).vec for h in prob.equalities]) if prob.q else np.zeros((n, 0))
    return G, H


def raw_least_squares_multipliers(
    prob: ConstrainedProblem, p: Point
) -> Tuple[np.ndarray, np.ndarray]:
    """Unconstrained least-squares multiplier estimate over all constraints.

    Minimizes |grad f + sum mu_i grad g_i + sum lam_j grad h_j| with no
    sign restriction and no activity gating; this is the raw trace
    quantity, which may go negative while an iterate drifts away from the
    constraint center.  Minimum-norm solution on degenerate systems.
    """
    G, H = gradient_columns(prob, p, list(range(prob.m)))
    A = np.hstack([G, H])
    if A.shape[1] == 0:
        return np.zeros(0), np.zeros(0)
    sol, *_ = np.linalg.lstsq(A, -prob.objective.gradient(p).vec, rcond=None)
    return sol[: prob.m], sol[prob.m :]


def estimate_multipliers(
    prob: ConstrainedProblem, p: Point, act_tol: float = DEFAULT_ACT_TOL
) -> Multipliers:
    """Least-squares multipliers restricted to the active set, mu >= 0.

    Generalizes the single-constraint closed form
    mu = -<grad g, grad f> / <grad g, grad g> (clipped at zero) to several
    constraints via sign-constrained least squares; inactive mu_i are 0.
    """
    act = active_set(prob, p, act_tol)
    if not act.active and prob.q == 0:
        return Multipliers(np.zeros(prob.m), np.zeros(0))
    G, H = gradient_columns(prob, p, list(act.active))
    col_norms = [np.linalg.norm(c) for c in np.hstack([G, H]).T]
    if col_norms and max(col_norms) <= 1e-14:
        raise DegenerateGradientError(
            "all active constraint gradients vanish at this point"
        )
    mu_act, lam, _ = _cones.sign_constrained_lstsq(G, H, -prob.objective.gradient(p).vec)
    mu = np.zeros(prob.m)
    mu[list(act.active)] = mu_act
    return Multipliers(mu, lam)


def kkt_residual(
    prob: ConstrainedProblem,
    p: Point,
    mult: Multipliers,
    act_tol: float = DEFAULT_ACT_TOL,
) -> KKTReport:
    """Evaluate the KKT system at (p, mult).

    stationarity_sq is the squared metric norm of the Lagrangian gradient;
    feasibility and complementarity violations are max norms.  Negative
    mu_i count toward the complementarity violation.
    """
    _check_dims(prob, mult)
    grad_l = lagrangian_gradient(prob, p, mult)
    feas = is_feasible(prob, p, act_tol)
    compl = 0.0
    for m, g in zip(mult.mu, prob.inequalities):
        compl = max(compl, abs(m * g.value(p)), max(0.0, -m))
    return KKTReport(
        stationarity_sq=inner(grad_l, grad_l),
        feas_violation=feas.max_violation,
        compl_violation=compl,
        multipliers=mult,
        farkas_witness=None,
        active_set=active_set(prob, p, act_tol),
        tolerances={"act_tol": act_tol},
    )


def _witness_direction(
    prob: ConstrainedProblem,
    p: Point,
    residual: np.ndarray,
    mu_act: np.ndarray,
    G: np.ndarray,
    H: np.ndarray,
) -> TangentVector:
    """Improving direction certifying that no multipliers exist.

    The base direction is the negative least-squares residual,
    re-orthogonalized against the support columns: the raw residual is
    orthogonal to them only up to solver noise, and that error times a
    large multiplier can drown the |r|^2 descent margin.  When a strictly
    inward direction exists it is blended in to make the active inequality
    margins strictly negative without losing descent.
    """
    support = np.hstack([G[:, mu_act > 0], H]) if G.size or H.size else np.zeros((residual.shape[0], 0))
    Q = _cones.orthonormal_range(support)
    d = -(residual - Q @ (Q.T @ residual)) if Q.shape[1] else -residual
    v = _cones.strict_inward_direction(G.T, H.T)
    if v is not None and np.linalg.norm(v) > 0:
        grad_f = prob.objective.gradient(p).vec
        d_sq = float(d @ d)
        tau = 0.5 * d_sq / (1.0 + max(0.0, float(grad_f @ v)))
        d = d + tau * v
    return tangent_project(p, d)


def find_multipliers(
    prob: ConstrainedProblem,
    p: Point,
    act_tol: float = DEFAULT_ACT_TOL,
    kkt_tol: float = DEFAULT_KKT_TOL,
) -> KKTReport:
    """Decide whether -grad f(p) lies in the polar of the linearizing cone.

    Solves the sign-constrained least-squares problem over multipliers on
    the active set.  If the best stationarity norm is within ``kkt_tol``
    the multipliers are returned; otherwise a Farkas witness direction is
    extracted and certified by direct inequality checks.

    Raises
    ------
    InfeasiblePointError
        If p is infeasible within ``act_tol``; check feasibility first.
    """
    feas = is_feasible(prob, p, act_tol)
    if not feas.feasible:
        raise InfeasiblePointError(
            f"point is infeasible (violation {feas.max_violation:.3e}); "
            "check feasibility before searching for multipliers"
        )
    act = active_set(prob, p, act_tol)
    G, H = gradient_columns(prob, p, list(act.active))
    grad_f = prob.objective.gradient(p).vec
    mu_act, lam, residual = _cones.sign_constrained_lstsq(G, H, -grad_f)
    stationarity_sq = float(residual @ residual)
    tolerances = {"act_tol": act_tol, "kkt_tol": kkt_tol}

    if stationarity_sq <= kkt_tol**2:
        mu = np.zeros(prob.m)
        mu[list(act.active)] = mu_act
        mult = Multipliers(mu, lam)
        report = kkt_residual(prob, p, mult, act_tol)
        return KKTReport(
            stationarity_sq=report.stationarity_sq,
            feas_violation=report.feas_violation,
            compl_violation=report.compl_violation,
            multipliers=mult,
            farkas_witness=None,
            active_set=act,
            tolerances=tolerances,
        )

    witness = _witness_direction(prob, p, residual, mu_act, G, H)
    margins_ok, _ = certify_witness(prob, p, witness, act_tol)
    if not margins_ok:
        raise RuntimeError(
            "witness certification failed: the point sits between the "
            "multiplier tolerance and the numerical noise floor; tighten "
            "the solve or relax kkt_tol"
        )
    return KKTReport(
        stationarity_sq=stationarity_sq,
        feas_violation=feas.max_violation,
        compl_violation=0.0,
        multipliers=None,
        farkas_witness=witness,
        active_set=act,
        tolerances=tolerances,
    )


def certify_witness(
    prob: ConstrainedProblem,
    p: Point,
    d: TangentVector,
    act_tol: float = DEFAULT_ACT_TOL,
) -> Tuple[bool, dict]:
    """Direct inequality checks for a Farkas witness.

    Valid iff <grad g_i, d> <= tol for every active i, |<grad h_j, d>| <=
    1e-10, and <grad f, d> < 0.  Returns the verdict and the achieved
    margins, including the strict inequality margin delta on the active
    constraints.
    """
    act = active_set(prob, p, act_tol)
    g_margins = [inner(prob.inequalities[i].gradient(p), d) for i in act.active]
    h_margins = [abs(inner(h.gradient(p), d)) for h in prob.equalities]
    descent = inner(prob.objective.gradient(p), d)
    ok = (
        all(m <= WITNESS_EQ_TOL for m in g_margins)
        and all(m <= WITNESS_EQ_TOL for m in h_margins)
        and descent < 0
    )
    delta = -max(g_margins) if g_margins else np.inf
    return ok, {"delta": delta, "descent": descent, "h_margins": h_margins}


@dataclass(frozen=True)
class MultiplierSetAnalysis:
    """Structure of the multiplier polyhedron at a feasible point.

    kind is one of "empty", "singleton", "bounded_polytope", "unbounded".
    ``multipliers`` is the singleton member or a particular solution;
    ``vertices`` lists the polytope vertices (sorted lexicographically);
    ``recession`` is a unit recession direction in the unbounded case.
    """

    kind: str
    multipliers: Optional[Multipliers] = None
    vertices: Optional[List[Multipliers]] = None
    recession: Optional[Multipliers] = None


def multiplier_set_analysis(
    prob: ConstrainedProblem,
    p: Point,
    f_override: Optional[ScalarField] = None,
    act_tol: float = DEFAULT_ACT_TOL,
    kkt_tol: float = DEFAULT_KKT_TOL,
) -> MultiplierSetAnalysis:
    """Classify the set of multipliers at p for the given objective.

    Empty when no multipliers exist; singleton iff the active and equality
    gradients are linearly independent; unbounded iff a nonzero
    nonnegative combination of them vanishes (that combination is the
    recession direction); bounded polytope otherwise, with vertices
    enumerated over support patterns of the active multipliers.

    The verdict concerns the supplied objective only; it does not decide
    any constraint qualification by itself.
    """
    if f_override is not None:
        prob = prob.with_objective(f_override)
    if prob.m + prob.q > STRUCTURE_SIZE_CAP:
        raise ValueError(
            f"m + q = {prob.m + prob.q} exceeds the vertex-enumeration cap "
            f"({STRUCTURE_SIZE_CAP})"
        )
    report = find_multipliers(prob, p, act_tol, kkt_tol)
    if report.multipliers is None:
        return MultiplierSetAnalysis(kind="empty")

    act = report.active_set
    G, H = gradient_columns(prob, p, list(act.active))
    independent, _ = _cones.columns_independent(np.hstack([G, H]))
    if independent:
        return MultiplierSetAnalysis(kind="singleton", multipliers=report.multipliers)

    ray = _cones.nonzero_positive_combination(G, H)
    if ray is not None:
        mu_dir = np.zeros(prob.m)
        mu_dir[list(act.active)] = ray[0]
        recession = Multipliers(mu_dir, ray[1])
        return MultiplierSetAnalysis(
            kind="unbounded", multipliers=report.multipliers, recession=recession
        )

    vertices = _enumerate_vertices(prob, p, act, G, H, kkt_tol)
    return MultiplierSetAnalysis(
        kind="bounded_polytope", multipliers=report.multipliers, vertices=vertices
    )


def _enumerate_vertices(
    prob: ConstrainedProblem,
    p: Point,
    act: ActiveSet,
    G: np.ndarray,
    H: np.ndarray,
    kkt_tol: float,
) -> List[Multipliers]:
    """Vertices of {(mu_A, lam) : G mu_A + H lam = -grad f, mu_A >= 0}.

    A vertex fixes a subset of the mu_A to zero and solves uniquely on the
    remaining columns; candidates with dependent columns, inconsistent
    systems, or negative entries are dropped.
    """
    grad_f = prob.objective.gradient(p).vec
    b = -grad_f
    n_act = G.shape[1]
    res_tol = max(10 * kkt_tol, 1e-12) * max(1.0, float(np.linalg.norm(grad_f)))
    found = []
    for mask in range(1 << n_act):
        keep = [i for i in range(n_act) if mask & (1 << i)]
        cols = np.hstack([G[:, keep], H]) if keep or H.shape[1] else np.zeros((G.shape[0], 0))
        if cols.shape[1] == 0:
            if np.linalg.norm(b) <= res_tol:
                found.append((np.zeros(n_act), np.zeros(0)))
            continue
        independent, _ = _cones.columns_independent(cols)
        if not independent:
            continue
        sol, *_ = np.linalg.lstsq(cols, b, rcond=None)
        if np.linalg.norm(cols @ sol - b) > res_tol:
            continue
        mu_keep = sol[: len(keep)]
        if np.any(mu_keep < -1e-10):
            continue
        mu_a = np.zeros(n_act)
        mu_a[keep] = np.maximum(mu_keep, 0.0)
        found.append((mu_a, sol[len(keep) :]))

    unique = []
    for mu_a, lam in found:
        full = np.concatenate([mu_a, lam])
        if not any(np.max(np.abs(full - v)) <= 1e-8 for v in unique):
            unique.append(full)
    unique.sort(key=lambda v: tuple(v))
    vertices = []
    for v in unique:
        mu = np.zeros(prob.m)
        mu[list(act.active)] = v[:n_act]
        vertices.append(Multipliers(mu, v[n_act:]))
    return vertices
