"""Constrained problems as scalar fields on a manifold.

A problem is an objective plus lists of inequality (g <= 0) and equality
(h = 0) constraints, each a differentiable scalar field carrying its own
Riemannian gradient.  Builders cover the constrained center-of-mass
instance: the mean-squared-distance objective and the geodesic-ball
constraint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence, Tuple

import numpy as np

from .manifold import (
    GeometryError,
    Manifold,
    Point,
    Sphere,
    TangentVector,
    dist,
    log,
    make_chart,
    chart_backward,
    tangent_basis,
)

DEFAULT_ACT_TOL = 1e-8


class InfeasiblePointError(ValueError):
    """Operation requires a feasible point; check feasibility first."""


@dataclass(frozen=True)
class ScalarField:
    """A C^1 function on the manifold with an explicit Riemannian gradient.

    ``value`` maps Point -> float and ``gradient`` maps Point ->
    TangentVector based at its argument.  Fields built from finite
    differences are flagged ``certified_gradient=False`` and must not be
    used where an analytic gradient is required.
    """

    manifold: Manifold
    value: Callable[[Point], float]
    gradient: Callable[[Point], TangentVector]
    certified_gradient: bool = True

    def scaled(self, alpha: float) -> "ScalarField":
        """The field alpha * self (gradient scales linearly)."""
        return ScalarField(
            self.manifold,
            lambda p: alpha * self.value(p),
            lambda p: TangentVector(p, alpha * self.gradient(p).vec),
            certified_gradient=self.certified_gradient,
        )


def field_with_fd_gradient(
    manifold: Manifold, value: Callable[[Point], float], h: float = 1e-6
) -> ScalarField:
    """Wrap a value function with a central finite-difference gradient.

    The gradient is computed through a normal chart centered at the query
    point.  Marked non-certified: use only as a fallback, never as the
    analytic side of a gradient check.
    """

    def gradient(p: Point) -> TangentVector:
        F = tangent_basis(p)
        chart = make_chart(p)
        d = F.shape[1]
        g = np.zeros(d)
        for k in range(d):
            e = np.zeros(d)
            e[k] = h
            g[k] = (value(chart_backward(chart, e)) - value(chart_backward(chart, -e))) / (2 * h)
        return TangentVector(p, chart.frame_matrix @ g)

    return ScalarField(manifold, value, gradient, certified_gradient=False)


@dataclass(frozen=True)
class ConstrainedProblem:
    """Objective f with inequalities g_i <= 0 and equalities h_j = 0."""

    manifold: Manifold
    objective: ScalarField
    inequalities: Tuple[ScalarField, ...] = ()
    equalities: Tuple[ScalarField, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        object.__setattr__(self, "equalities", tuple(self.equalities))
        for f in (self.objective, *self.inequalities, *self.equalities):
            if f.manifold != self.manifold:
                raise GeometryError("all fields of a problem must share its manifold")

    @property
    def m(self) -> int:
        return len(self.inequalities)

    @property
    def q(self) -> int:
        return len(self.equalities)

    def with_objective(self, objective: ScalarField) -> "ConstrainedProblem":
        return replace(self, objective=objective)


@dataclass(frozen=True)
class ActiveSet:
    """Indices (0-based) of inequalities active at a point, |g_i| <= tolerance."""

    active: Tuple[int, ...]
    inactive: Tuple[int, ...]
    tolerance: float

    def as_dict(self) -> dict:
        return {
            "active": list(self.active),
            "inactive": list(self.inactive),
            "tolerance": self.tolerance,
        }


def active_set(prob: ConstrainedProblem, p: Point, tol: float = DEFAULT_ACT_TOL) -> ActiveSet:
    """Classify inequality constraints by activity at p.

    Indices with g_i(p) > tol are infeasible; they land in ``inactive``
    here and are reported by :func:`is_feasible`.
    """
    if tol <= 0:
        raise ValueError("activity tolerance must be positive")
    act = []
    inact = []
    for i, g in enumerate(prob.inequalities):
        (act if abs(g.value(p)) <= tol else inact).append(i)
    return ActiveSet(tuple(act), tuple(inact), tol)


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    max_violation: float
    inequality_violations: np.ndarray  # max(0, g_i(p))
    equality_violations: np.ndarray  # |h_j(p)|


def is_feasible(prob: ConstrainedProblem, p: Point, tol: float = DEFAULT_ACT_TOL) -> FeasibilityReport:
    """Feasibility of p within tol, with per-constraint violations."""
    if tol <= 0:
        raise ValueError("feasibility tolerance must be positive")
    gv = np.array([max(0.0, g.value(p)) for g in prob.inequalities])
    hv = np.array([abs(h.value(p)) for h in prob.equalities])
    worst = max(float(np.max(gv, initial=0.0)), float(np.max(hv, initial=0.0)))
    return FeasibilityReport(worst <= tol, worst, gv, hv)


def frechet_objective(data: Sequence[Point]) -> ScalarField:
    """Mean squared geodesic distance to the data points.

    value(p) = (1/N) sum_i d(p, d_i)^2, gradient(p) = -(2/N) sum_i log_p(d_i).
    Evaluation at a point antipodal to some datum raises through log.
    """
    data = tuple(data)
    if not data:
        raise ValueError("need at least one data point")
    manifold = data[0].manifold
    for d in data:
        if d.manifold != manifold:
            raise GeometryError("data points must share one manifold")
    n = len(data)

    def value(p: Point) -> float:
        return sum(dist(p, d) ** 2 for d in data) / n

    def gradient(p: Point) -> TangentVector:
        acc = np.zeros(manifold.ambient_dim)
        for d in data:
            acc += log(p, d).vec
        return TangentVector(p, -2.0 / n * acc)

    return ScalarField(manifold, value, gradient)


@dataclass(frozen=True)
class BallField(ScalarField):
    """Geodesic-ball constraint g(p) = d(p, center)^2 - radius^2.

    Carries its center and radius so the solver can apply the closed-form
    projection.
    """

    center: Point = None  # type: ignore[assignment]
    radius: float = 0.0


def ball_constraint(c: Point, r: float) -> BallField:
    """Constraint field for the geodesic ball of radius r around c.

    gradient(p) = -2 log_p(c).  On the sphere r must lie in (0, pi/2) so
    the ball is geodesically convex.
    """
    if isinstance(c.manifold, Sphere):
        if not (0.0 < r < math.pi / 2):
            raise ValueError(f"sphere ball radius must be in (0, pi/2), got {r}")
    elif not r > 0:
        raise ValueError(f"ball radius must be positive, got {r}")

    def value(p: Point) -> float:
        return dist(p, c) ** 2 - r * r

    def gradient(p: Point) -> TangentVector:
        return TangentVector(p, -2.0 * log(p, c).vec)

    return BallField(c.manifold, value, gradient, True, c, r)


def linear_field(a, offset: float, manifold: Manifold) -> ScalarField:
    """Restriction of the affine ambient function <a, p> - offset.

    On the sphere its Riemannian gradient is the tangent projection of a;
    used to build great-circle equality constraints.
    """
    a = np.asarray(a, dtype=float)

    def value(p: Point) -> float:
        return float(a @ p.coords) - offset

    def gradient(p: Point) -> TangentVector:
        from .manifold import tangent_project

        return tangent_project(p, a)

    return ScalarField(manifold, value, gradient)
