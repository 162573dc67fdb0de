"""Embedded geometry for Euclidean space and the unit sphere.

Points and tangent vectors are stored in ambient coordinates.  The sphere
S^n sits in R^{n+1} with the metric inherited from the ambient dot product,
so geodesics are great circles and all maps below have closed forms.
Charts are normal coordinates: the log map at a base point expressed in an
orthonormal tangent frame.

Everything here is a pure function of immutable values; there is no shared
mutable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.linalg import null_space

# Dot products within this band of -1 count as antipodal (no unique geodesic).
ANTIPODAL_TOL = 1e-9
# Geodesic angles below this are treated as coincident points.
COINCIDENT_TOL = 1e-9
BASE_MATCH_TOL = 1e-12
TANGENCY_TOL = 1e-10


class GeometryError(ValueError):
    """Invalid geometric input: mismatched manifolds or broken invariants."""


class AntipodalError(GeometryError):
    """Antipodal sphere points: the connecting geodesic is not unique."""


class ChartDomainError(GeometryError):
    """Point or coordinate vector outside the chart's validity radius."""


@dataclass(frozen=True)
class Euclidean:
    """Flat space R^dim.  Ambient and intrinsic coordinates coincide."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise GeometryError(f"Euclidean dimension must be >= 1, got {self.dim}")

    @property
    def ambient_dim(self) -> int:
        return self.dim

    @property
    def intrinsic_dim(self) -> int:
        return self.dim


@dataclass(frozen=True)
class Sphere:
    """Unit sphere S^{ambient_dim - 1} embedded in R^ambient_dim."""

    ambient_dim: int

    def __post_init__(self):
        if self.ambient_dim < 2:
            raise GeometryError(
                f"sphere ambient dimension must be >= 2, got {self.ambient_dim}"
            )

    @property
    def intrinsic_dim(self) -> int:
        return self.ambient_dim - 1


Manifold = Union[Euclidean, Sphere]


def _as_locked_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise GeometryError(f"expected a 1-d coordinate vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("coordinates must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Point:
    """A manifold point in ambient coordinates.

    Sphere points are renormalized to unit length on construction.
    """

    manifold: Manifold
    coords: np.ndarray

    def __post_init__(self):
        arr = _as_locked_array(self.coords)
        if arr.shape[0] != self.manifold.ambient_dim:
            raise GeometryError(
                f"point has {arr.shape[0]} coordinates, manifold needs "
                f"{self.manifold.ambient_dim}"
            )
        if isinstance(self.manifold, Sphere):
            nrm = np.linalg.norm(arr)
            if nrm < 1e-14:
                raise GeometryError("cannot normalize a zero vector onto the sphere")
            arr = _as_locked_array(arr / nrm)
        object.__setattr__(self, "coords", arr)


@dataclass(frozen=True, eq=False)
class TangentVector:
    """An ambient vector tagged with its base point.

    On the sphere the vector must be orthogonal to the base point
    (tangency within 1e-10); use :func:`tangent_project` to repair inputs.
    """

    base: Point
    vec: np.ndarray

    def __post_init__(self):
        arr = _as_locked_array(self.vec)
        if arr.shape != self.base.coords.shape:
            raise GeometryError("tangent vector and base point dimensions differ")
        if isinstance(self.base.manifold, Sphere):
            normal = abs(float(arr @ self.base.coords))
            if normal > TANGENCY_TOL * max(1.0, float(np.linalg.norm(arr))):
                raise GeometryError(
                    f"vector is not tangent at its base (normal component {normal:.3e})"
                )
        object.__setattr__(self, "vec", arr)


def same_point(p: Point, q: Point, tol: float = BASE_MATCH_TOL) -> bool:
    """Whether two points agree on the same manifold within ``tol``."""
    return p.manifold == q.manifold and bool(
        np.max(np.abs(p.coords - q.coords)) <= tol
    )


def _require_same_manifold(p: Point, q: Point) -> None:
    if p.manifold != q.manifold:
        raise GeometryError(f"points live on different manifolds: {p.manifold} vs {q.manifold}")


def _require_base(p: Point, v: TangentVector) -> None:
    if not same_point(p, v.base):
        raise GeometryError("tangent vector based at a different point")


def inner(u: TangentVector, v: TangentVector) -> float:
    """Riemannian inner product; the ambient dot product for both manifolds."""
    if not same_point(u.base, v.base):
        raise GeometryError("incompatible tangent spaces: vectors have different base points")
    return float(u.vec @ v.vec)


def norm(v: TangentVector) -> float:
    return float(np.linalg.norm(v.vec))


def exp(p: Point, v: TangentVector) -> Point:
    """Geodesic exponential: follow the geodesic with initial velocity v for unit time.

    Euclidean: ``p + v``.  Sphere: ``cos(|v|) p + sin(|v|) v/|v|``.
    """
    _require_base(p, v)
    if isinstance(p.manifold, Euclidean):
        return Point(p.manifold, p.coords + v.vec)
    theta = float(np.linalg.norm(v.vec))
    if theta == 0.0:
        return p
    return Point(p.manifold, math.cos(theta) * p.coords + math.sin(theta) * v.vec / theta)


def log(p: Point, q: Point) -> TangentVector:
    """Inverse of :func:`exp`: initial velocity of the geodesic from p to q.

    Sphere formula ``theta (q - cos(theta) p) / sin(theta)`` with
    ``theta = arccos(<p, q>)``; antipodal pairs are rejected because the
    geodesic is not unique.
    """
    _require_same_manifold(p, q)
    if isinstance(p.manifold, Euclidean):
        return TangentVector(p, q.coords - p.coords)
    c = float(np.clip(p.coords @ q.coords, -1.0, 1.0))
    if c <= -1.0 + ANTIPODAL_TOL:
        raise AntipodalError("antipodal points: geodesic is not unique")
    theta = math.acos(c)
    if theta < COINCIDENT_TOL:
        # First-order limit: the tangent-projected difference.
        diff = q.coords - p.coords
        return TangentVector(p, diff - (diff @ p.coords) * p.coords)
    w = theta / math.sin(theta) * (q.coords - c * p.coords)
    # Remove rounding drift off the tangent plane.
    w = w - (w @ p.coords) * p.coords
    return TangentVector(p, w)


def dist(p: Point, q: Point) -> float:
    """Geodesic distance; ``arccos(<p, q>)`` on the sphere."""
    _require_same_manifold(p, q)
    if isinstance(p.manifold, Euclidean):
        return float(np.linalg.norm(q.coords - p.coords))
    return math.acos(float(np.clip(p.coords @ q.coords, -1.0, 1.0)))


def tangent_project(p: Point, w) -> TangentVector:
    """Orthogonal projection of an ambient vector onto the tangent space at p."""
    arr = np.asarray(w, dtype=float)
    if arr.shape[0] != p.manifold.ambient_dim:
        raise GeometryError("ambient vector has the wrong dimension")
    if isinstance(p.manifold, Sphere):
        arr = arr - (arr @ p.coords) * p.coords
    return TangentVector(p, arr)


def exp_differential(p: Point, v: TangentVector, w: TangentVector) -> np.ndarray:
    """Differential of ``exp_p`` at velocity v applied to w (ambient vector).

    On the sphere the radial component of w rides along the great circle
    while orthogonal components are scaled by sin(|v|)/|v| (the constant-
    curvature Jacobi field).  Euclidean: w unchanged.
    """
    _require_base(p, v)
    _require_base(p, w)
    if isinstance(p.manifold, Euclidean):
        return np.array(w.vec)
    theta = float(np.linalg.norm(v.vec))
    if theta < 1e-12:
        return np.array(w.vec)
    v_hat = v.vec / theta
    w_r = float(v_hat @ w.vec)
    w_perp = w.vec - w_r * v_hat
    return (-math.sin(theta) * p.coords + math.cos(theta) * v_hat) * w_r + (
        math.sin(theta) / theta
    ) * w_perp


def tangent_basis(p: Point) -> np.ndarray:
    """Deterministic orthonormal basis of the tangent space, as an
    (ambient_dim, intrinsic_dim) matrix of column vectors."""
    if isinstance(p.manifold, Euclidean):
        return np.eye(p.manifold.dim)
    return null_space(p.coords.reshape(1, -1))


def random_point(manifold: Manifold, rng: np.random.Generator) -> Point:
    return Point(manifold, rng.standard_normal(manifold.ambient_dim))


def random_tangent(p: Point, rng: np.random.Generator, unit: bool = False) -> TangentVector:
    v = tangent_project(p, rng.standard_normal(p.manifold.ambient_dim))
    if unit:
        n = norm(v)
        if n < 1e-14:
            return random_tangent(p, rng, unit=True)
        return TangentVector(p, v.vec / n)
    return v


@dataclass(frozen=True)
class Chart:
    """Normal coordinates centered at ``base``.

    ``chart_forward`` maps a point p to the coefficients of log_base(p) in
    the orthonormal frame; ``chart_backward`` inverts via exp.  On the
    sphere the radius must stay below pi so exp is injective on the domain.
    """

    base: Point
    frame: tuple
    radius: float

    def __post_init__(self):
        d = self.base.manifold.intrinsic_dim
        if len(self.frame) != d:
            raise GeometryError(f"frame needs {d} vectors, got {len(self.frame)}")
        for f in self.frame:
            if not isinstance(f, TangentVector) or not same_point(f.base, self.base):
                raise GeometryError("frame vectors must be tangent at the chart base")
        F = self.frame_matrix
        gram = F.T @ F
        if np.max(np.abs(gram - np.eye(d))) > TANGENCY_TOL:
            raise GeometryError("chart frame is not orthonormal")
        if not self.radius > 0:
            raise GeometryError("chart radius must be positive")
        if isinstance(self.base.manifold, Sphere) and not self.radius < math.pi:
            raise GeometryError("sphere chart radius must be < pi")
        object.__setattr__(self, "frame", tuple(self.frame))

    @property
    def frame_matrix(self) -> np.ndarray:
        """(ambient_dim, intrinsic_dim) matrix with frame vectors as columns."""
        return np.stack([f.vec for f in self.frame], axis=1)


def make_chart(
    base: Point,
    radius: Optional[float] = None,
    frame_seed: Optional[int] = None,
) -> Chart:
    """Build a normal-coordinate chart at ``base``.

    The default frame comes from a deterministic orthonormal basis; passing
    ``frame_seed`` rotates it by a seeded random orthogonal matrix so tests
    can exercise frame independence.  Default radius: pi/2 on the sphere,
    unbounded on Euclidean space.
    """
    if radius is None:
        radius = math.pi / 2 if isinstance(base.manifold, Sphere) else math.inf
    F = tangent_basis(base)
    if frame_seed is not None:
        rng = np.random.default_rng(frame_seed)
        d = F.shape[1]
        q, r = np.linalg.qr(rng.standard_normal((d, d)))
        q = q * np.sign(np.diag(r))  # fix QR sign ambiguity
        F = F @ q
    frame = tuple(TangentVector(base, F[:, k]) for k in range(F.shape[1]))
    return Chart(base, frame, radius)


def chart_forward(chart: Chart, p: Point) -> np.ndarray:
    """Normal coordinates of p: coefficients of log_base(p) in the frame."""
    d = dist(chart.base, p)
    if not d < chart.radius:
        raise ChartDomainError(
            f"point at distance {d:.6g} outside chart radius {chart.radius:.6g}"
        )
    v = log(chart.base, p)
    return chart.frame_matrix.T @ v.vec


def chart_backward(chart: Chart, x) -> Point:
    """Inverse chart map: exp of the frame combination of x."""
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if not r < chart.radius:
        raise ChartDomainError(
            f"coordinates of norm {r:.6g} outside chart radius {chart.radius:.6g}"
        )
    v = TangentVector(chart.base, chart.frame_matrix @ x)
    return exp(chart.base, v)
