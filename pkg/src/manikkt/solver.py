"""Projected gradient descent over a geodesic ball, and plain gradient descent.

The update is p <- proj(exp_p(-s grad f(p))) with a fixed step size; the
projection onto the ball around c maps p to exp_c(b log_c p) with
b = min(r / d(p, c), 1).  Each iterate records the objective, the raw
least-squares multiplier estimate, and the squared norm of the Lagrangian
gradient at that estimate, which doubles as the stopping criterion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .kkt import Multipliers, kkt_residual, raw_least_squares_multipliers
from .manifold import AntipodalError, Point, Sphere, TangentVector, dist, exp, log
from .problem import BallField, ConstrainedProblem, ScalarField

STAGNATION_TOL = 1e-16
STAGNATION_SPAN = 10


class SolverError(RuntimeError):
    """Numerical failure inside the descent loop (e.g. an antipodal iterate)."""


@dataclass(frozen=True)
class SolverConfig:
    step: float = 0.5
    max_iters: int = 1000
    stop_tol: float = 1e-14  # on the squared Lagrangian gradient norm
    act_tol: float = 1e-8
    record_trace: bool = True

    def __post_init__(self):
        if not (self.step > 0 and self.max_iters > 0 and self.stop_tol > 0 and self.act_tol > 0):
            raise ValueError("all solver parameters must be positive")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    f_val: float
    n_sq: float
    mu_est: np.ndarray


@dataclass(frozen=True)
class Trace:
    """Iteration history with the final point and the reason for stopping."""

    records: List[IterationRecord]
    final_point: Point
    converged: bool
    stop_reason: str  # "tolerance" | "max_iters" | "error"

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    def to_csv(self) -> str:
        lines = ["k,f,n_sq,mu"]
        for rec in self.records:
            mu = ";".join(repr(float(v)) for v in rec.mu_est)
            lines.append(f"{rec.k},{repr(rec.f_val)},{repr(rec.n_sq)},{mu}")
        return "\n".join(lines) + "\n"


def project_ball(c: Point, r: float, p: Point) -> Point:
    """Closed-form projection onto the geodesic ball of radius r around c.

    Points inside the ball are fixed; outside points map to the boundary
    along the geodesic toward c.  On the sphere r must be in (0, pi/2) and
    p must not be antipodal to c.
    """
    if isinstance(c.manifold, Sphere):
        if not (0.0 < r < math.pi / 2):
            raise ValueError(f"sphere ball radius must be in (0, pi/2), got {r}")
    elif not r > 0:
        raise ValueError(f"ball radius must be positive, got {r}")
    d = dist(p, c)
    if d <= r:
        return p
    b = r / d
    return exp(c, TangentVector(c, b * log(c, p).vec))


def _ball_of(prob: ConstrainedProblem) -> BallField:
    if prob.m != 1 or prob.q != 0 or not isinstance(prob.inequalities[0], BallField):
        raise ValueError(
            "projected descent covers exactly one geodesic-ball inequality "
            "and no equalities; use the verification modules for general "
            "constraint sets"
        )
    return prob.inequalities[0]


def _evaluate(prob: ConstrainedProblem, p: Point, act_tol: float) -> Tuple[float, float, np.ndarray]:
    """(f, n_sq, raw multiplier estimate) at p; n_sq uses the raw estimate."""
    mu_raw, lam_raw = raw_least_squares_multipliers(prob, p)
    report = kkt_residual(prob, p, Multipliers(mu_raw, lam_raw), act_tol)
    return prob.objective.value(p), report.stationarity_sq, mu_raw


def projected_gradient_descent(
    prob: ConstrainedProblem, cfg: SolverConfig, p0: Point
) -> Trace:
    """Fixed-step projected gradient descent for a single-ball problem.

    p0 may be infeasible; the first projection restores feasibility.  The
    trace records the raw (unclipped) multiplier estimate at every
    iterate so sign transients stay visible; certification downstream
    uses the clipped estimate.
    """
    ball = _ball_of(prob)
    return _descent_loop(
        prob,
        cfg,
        p0,
        project=lambda p: project_ball(ball.center, ball.radius, p),
        record_initial=False,  # p0 may be infeasible; the first record is post-projection
    )


def gradient_descent(objective: ScalarField, cfg: SolverConfig, p0: Point) -> Trace:
    """Unconstrained fixed-step gradient descent (no projection).

    The k = 0 state at p0 is recorded, so a start at a stationary point
    converges immediately.
    """
    prob = ConstrainedProblem(objective.manifold, objective)
    return _descent_loop(prob, cfg, p0, project=None, record_initial=True)


def _descent_loop(prob, cfg, p0, project, record_initial) -> Trace:
    p = p0
    records: List[IterationRecord] = []

    def push(k: int, f_val: float, n_sq: float, mu: np.ndarray) -> None:
        rec = IterationRecord(k, f_val, n_sq, mu)
        if cfg.record_trace or not records:
            records.append(rec)
        else:
            records[-1] = rec

    try:
        flat_streak = 0
        prev_f = None
        if record_initial:
            f_val, n_sq, mu = _evaluate(prob, p, cfg.act_tol)
            push(0, f_val, n_sq, mu)
            if n_sq <= cfg.stop_tol:
                return Trace(records, p, True, "tolerance")
            prev_f = f_val
        for k in range(1, cfg.max_iters + 1):
            step = TangentVector(p, -cfg.step * prob.objective.gradient(p).vec)
            p = exp(p, step)
            if project is not None:
                p = project(p)
            f_val, n_sq, mu = _evaluate(prob, p, cfg.act_tol)
            push(k, f_val, n_sq, mu)
            if n_sq <= cfg.stop_tol:
                return Trace(records, p, True, "tolerance")
            if prev_f is not None:
                flat_streak = flat_streak + 1 if abs(f_val - prev_f) <= STAGNATION_TOL else 0
            prev_f = f_val
            if flat_streak >= STAGNATION_SPAN:
                # Guarantees termination when the criterion cycles in float
                # noise; reported in the max_iters class.
                return Trace(records, p, False, "max_iters")
    except AntipodalError as err:
        raise SolverError(f"iterate {len(records)} hit an antipodal configuration: {err}") from err
    return Trace(records, p, False, "max_iters")
