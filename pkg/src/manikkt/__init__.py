"""Constrained optimization on embedded manifolds with KKT and CQ certificates.

Geometry for Euclidean space and the unit sphere, scalar-field problems
with analytic Riemannian gradients, projected gradient descent over
geodesic balls, multiplier recovery with Farkas witnesses, LICQ/MFCQ
certificates, and chart-transcription cross-checks.
"""

from .manifold import (
    AntipodalError,
    Chart,
    ChartDomainError,
    Euclidean,
    GeometryError,
    Point,
    Sphere,
    TangentVector,
    chart_backward,
    chart_forward,
    dist,
    exp,
    inner,
    log,
    make_chart,
    norm,
    random_point,
    random_tangent,
    tangent_basis,
    tangent_project,
)
from .problem import (
    ActiveSet,
    BallField,
    ConstrainedProblem,
    FeasibilityReport,
    InfeasiblePointError,
    ScalarField,
    active_set,
    ball_constraint,
    field_with_fd_gradient,
    frechet_objective,
    is_feasible,
    linear_field,
)
from .kkt import (
    DegenerateGradientError,
    KKTReport,
    Multipliers,
    MultiplierSetAnalysis,
    certify_witness,
    estimate_multipliers,
    find_multipliers,
    kkt_residual,
    lagrangian_gradient,
    lagrangian_value,
    multiplier_set_analysis,
    raw_least_squares_multipliers,
)
from .cq import (
    CQReport,
    check_licq,
    check_mfcq,
    cq_report,
    linearizing_cone_contains,
    mfcq_dual_check,
    sample_tangent_cone,
)
from .solver import (
    IterationRecord,
    SolverConfig,
    SolverError,
    Trace,
    gradient_descent,
    project_ball,
    projected_gradient_descent,
)
from .chart_verify import (
    CrossChartReport,
    TranscribedProblem,
    cross_chart_consistency,
    fd_gradient_check,
    transcribe,
)

__all__ = [name for name in dir() if not name.startswith("_")]
