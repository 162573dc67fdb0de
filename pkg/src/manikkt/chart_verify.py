"""Cross-checks through normal-coordinate charts.

Transcribing the problem into chart coordinates turns it into an ordinary
Euclidean program whose local minimizers, derivatives, and qualification
verdicts must match the intrinsic ones.  This module provides that
transcription, a finite-difference gradient oracle, and a consistency
check that runs the KKT and qualification tests intrinsically and through
two charts.

Chart-side derivatives use the exact chain rule with the analytic chart
Jacobian; only ``fd_gradient_check`` differentiates numerically, since its
whole purpose is to be independent of the analytic gradients under test.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from . import _cones
from .kkt import Multipliers, gradient_columns
from .manifold import (
    Chart,
    Point,
    TangentVector,
    chart_backward,
    chart_forward,
    exp_differential,
)
from .problem import ConstrainedProblem, DEFAULT_ACT_TOL, ScalarField, active_set


@dataclass(frozen=True)
class TranscribedProblem:
    """The problem written in chart coordinates by composing with the inverse map."""

    chart: Chart
    f_x: Callable[[np.ndarray], float]
    g_x: Tuple[Callable[[np.ndarray], float], ...]
    h_x: Tuple[Callable[[np.ndarray], float], ...]


def transcribe(prob: ConstrainedProblem, chart: Chart) -> TranscribedProblem:
    """Compose every field of the problem with the inverse chart map."""

    def pull(field: ScalarField) -> Callable[[np.ndarray], float]:
        return lambda x: field.value(chart_backward(chart, x))

    return TranscribedProblem(
        chart,
        pull(prob.objective),
        tuple(pull(g) for g in prob.inequalities),
        tuple(pull(h) for h in prob.equalities),
    )


def chart_jacobian(chart: Chart, x: np.ndarray) -> np.ndarray:
    """Jacobian of the inverse chart map at x, (ambient_dim, intrinsic_dim).

    Column k is the pushforward of the k-th frame vector through exp at
    velocity sum x_j frame_j.  At x = 0 this is the frame itself.
    """
    x = np.asarray(x, dtype=float)
    v = TangentVector(chart.base, chart.frame_matrix @ x)
    return np.column_stack(
        [exp_differential(chart.base, v, f) for f in chart.frame]
    )


def fd_gradient_check(
    field: ScalarField,
    p: Point,
    chart: Chart,
    h: Optional[float] = None,
) -> float:
    """Relative error between the analytic gradient and a finite-difference one.

    Central differences of the transcribed value function at
    chart_forward(p) give a coordinate covector; it is pushed back through
    the frame and compared to the analytic Riemannian gradient in the
    metric norm.  The comparison is exact (up to FD error) when the chart
    is based at p, which is how the oracle is meant to be used; away from
    the base the frame push-back picks up curvature terms of order
    dist(base, p)^2.

    The step is scaled per coordinate as h * max(1, |x_k|), default
    h = 1e-6.  A stencil leaving the chart domain raises through the
    inverse map.
    """
    x = chart_forward(chart, p)
    base_h = 1e-6 if h is None else h
    value = lambda y: field.value(chart_backward(chart, y))
    d = x.shape[0]
    cov = np.zeros(d)
    for k in range(d):
        step = base_h * max(1.0, abs(x[k]))
        e = np.zeros(d)
        e[k] = step
        cov[k] = (value(x + e) - value(x - e)) / (2 * step)
    fd_vec = chart.frame_matrix @ cov
    analytic = field.gradient(p).vec
    return float(np.linalg.norm(fd_vec - analytic) / max(np.linalg.norm(analytic), 1e-14))


def _chart_covectors(
    prob: ConstrainedProblem, p: Point, chart: Chart, active
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Coordinate covectors of f, active g, h at p, plus the pullback metric.

    Covector of a field: B(x)^T grad(p) with B the chart Jacobian (chain
    rule); metric: B^T B (identity at the chart base).
    """
    x = chart_forward(chart, p)
    B = chart_jacobian(chart, x)
    G, H = gradient_columns(prob, p, list(active))
    c_f = B.T @ prob.objective.gradient(p).vec
    C_g = B.T @ G
    C_h = B.T @ H
    metric = B.T @ B
    return c_f, C_g, C_h, metric


def _stationarity_through_chart(c_f, C_g, C_h, metric):
    """Best Riemannian stationarity norm over multipliers, in chart coordinates.

    The metric is eliminated by whitening with its inverse square root, so
    the Euclidean residual norm of the whitened system equals the
    Riemannian norm of the Lagrangian gradient.
    """
    w, V = np.linalg.eigh(metric)
    W = V @ np.diag(1.0 / np.sqrt(w)) @ V.T
    mu, lam, residual = _cones.sign_constrained_lstsq(W @ C_g, W @ C_h, -W @ c_f)
    return float(np.linalg.norm(residual)), mu, lam


def _intrinsic_stationarity(prob, p, active):
    G, H = gradient_columns(prob, p, list(active))
    mu, lam, residual = _cones.sign_constrained_lstsq(G, H, -prob.objective.gradient(p).vec)
    return float(np.linalg.norm(residual)), mu, lam


def _licq_on_rows(rows: np.ndarray, intrinsic_dim: int, rank_tol: float) -> Tuple[bool, float]:
    independent, sigma_min = _cones.columns_independent(rows.T, rank_tol)
    return independent and rows.shape[0] <= intrinsic_dim, sigma_min


@dataclass(frozen=True)
class CrossChartReport:
    """Side-by-side intrinsic and chart-transcribed verdicts at one point."""

    stationarity_intrinsic: float
    stationarity_chart_a: float
    stationarity_chart_b: float
    licq: Tuple[bool, bool, bool]
    sigma_min: Tuple[float, float, float]
    mfcq: Tuple[bool, bool, bool]
    multipliers_intrinsic: Multipliers
    multipliers_chart_a: Multipliers
    multipliers_chart_b: Multipliers
    norm_rel_dev: float
    norms_agree: bool
    verdicts_consistent: bool

    @property
    def consistent(self) -> bool:
        return self.verdicts_consistent and self.norms_agree

    def as_dict(self) -> dict:
        return {
            "stationarity": {
                "intrinsic": self.stationarity_intrinsic,
                "chart_a": self.stationarity_chart_a,
                "chart_b": self.stationarity_chart_b,
            },
            "licq": list(self.licq),
            "sigma_min": list(self.sigma_min),
            "mfcq": list(self.mfcq),
            "norm_rel_dev": self.norm_rel_dev,
            "consistent": self.consistent,
        }


def cross_chart_consistency(
    prob: ConstrainedProblem,
    p: Point,
    chart_a: Chart,
    chart_b: Chart,
    act_tol: float = DEFAULT_ACT_TOL,
    rank_tol: float = 1e-8,
) -> CrossChartReport:
    """Compare KKT stationarity and CQ verdicts intrinsically and through two charts.

    Qualification verdicts must be identical in all three computations;
    the stationarity norms must agree to 1e-9 relative (norms below 1e-12
    are treated as equal).  Multipliers are chart-independent scalars and
    are reported from all three paths.

    Note sigma_min is frame- and base-dependent for charts away from p;
    only the boolean verdicts are comparable across different base points.
    """
    act = active_set(prob, p, act_tol).active
    d = prob.manifold.intrinsic_dim

    n_i, mu_i, lam_i = _intrinsic_stationarity(prob, p, act)
    G, H = gradient_columns(prob, p, list(act))
    licq_i, smin_i = _licq_on_rows(np.hstack([H, G]).T, d, rank_tol)
    mfcq_i = _cones.strict_inward_direction(G.T, H.T) is not None

    sides = []
    for chart in (chart_a, chart_b):
        c_f, C_g, C_h, metric = _chart_covectors(prob, p, chart, act)
        n_c, mu_c, lam_c = _stationarity_through_chart(c_f, C_g, C_h, metric)
        licq_c, smin_c = _licq_on_rows(np.hstack([C_h, C_g]).T, d, rank_tol)
        mfcq_c = _cones.strict_inward_direction(C_g.T, C_h.T) is not None
        sides.append((n_c, licq_c, smin_c, mfcq_c, mu_c, lam_c))

    norms = [n_i, sides[0][0], sides[1][0]]
    lo, hi = min(norms), max(norms)
    norm_rel_dev = 0.0 if hi == 0.0 else (hi - lo) / hi
    # Three independent least-squares routes agree relatively only down to
    # the rounding floor of the gradient data; below it absolute agreement
    # is the meaningful test.
    scale = max(
        [np.linalg.norm(prob.objective.gradient(p).vec)]
        + [np.linalg.norm(g.gradient(p).vec) for g in prob.inequalities]
        + [np.linalg.norm(h.gradient(p).vec) for h in prob.equalities]
    )
    norms_agree = (hi - lo) <= 1e-9 * hi + 1e-13 * max(1.0, scale)
    verdicts_ok = (
        licq_i == sides[0][1] == sides[1][1] and mfcq_i == sides[0][3] == sides[1][3]
    )

    def pad(mu_act, lam):
        mu = np.zeros(prob.m)
        mu[list(act)] = mu_act
        return Multipliers(mu, lam)

    return CrossChartReport(
        stationarity_intrinsic=n_i,
        stationarity_chart_a=sides[0][0],
        stationarity_chart_b=sides[1][0],
        licq=(licq_i, sides[0][1], sides[1][1]),
        sigma_min=(smin_i, sides[0][2], sides[1][2]),
        mfcq=(mfcq_i, sides[0][3], sides[1][3]),
        multipliers_intrinsic=pad(mu_i, lam_i),
        multipliers_chart_a=pad(sides[0][4], sides[0][5]),
        multipliers_chart_b=pad(sides[1][4], sides[1][5]),
        norm_rel_dev=norm_rel_dev,
        norms_agree=norms_agree,
        verdicts_consistent=verdicts_ok,
    )
