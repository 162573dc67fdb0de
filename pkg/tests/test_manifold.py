"""Geometry primitives: metric, exp/log, distance, tangent projection, charts."""

import math

import numpy as np
import pytest

import manikkt as mk

S2 = mk.Sphere(3)
NORTH = mk.Point(S2, [0.0, 0.0, 1.0])


def test_inner_unit_vector():
    u = mk.TangentVector(NORTH, [1.0, 0.0, 0.0])
    assert mk.inner(u, u) == 1.0


def test_inner_orthogonal():
    u = mk.TangentVector(NORTH, [1.0, 0.0, 0.0])
    v = mk.TangentVector(NORTH, [0.0, 1.0, 0.0])
    assert mk.inner(u, v) == 0.0


def test_inner_bilinear():
    u = mk.TangentVector(NORTH, [2.0, 0.0, 0.0])
    v = mk.TangentVector(NORTH, [3.0, 0.0, 0.0])
    assert mk.inner(u, v) == 6.0


def test_inner_base_mismatch():
    u = mk.TangentVector(NORTH, [1.0, 0.0, 0.0])
    other = mk.Point(S2, [1.0, 0.0, 0.0])
    v = mk.TangentVector(other, [0.0, 1.0, 0.0])
    with pytest.raises(mk.GeometryError):
        mk.inner(u, v)


def test_exp_zero_velocity():
    v = mk.TangentVector(NORTH, [0.0, 0.0, 0.0])
    q = mk.exp(NORTH, v)
    np.testing.assert_allclose(q.coords, NORTH.coords, atol=0)


def test_exp_quarter_turn():
    v = mk.TangentVector(NORTH, [math.pi / 2, 0.0, 0.0])
    q = mk.exp(NORTH, v)
    np.testing.assert_allclose(q.coords, [1.0, 0.0, 0.0], atol=1e-15)


def test_exp_euclidean_addition():
    E = mk.Euclidean(2)
    p = mk.Point(E, [1.0, 2.0])
    q = mk.exp(p, mk.TangentVector(p, [0.5, -1.0]))
    np.testing.assert_allclose(q.coords, [1.5, 1.0], atol=0)


def test_log_at_same_point():
    v = mk.log(NORTH, NORTH)
    assert mk.norm(v) == 0.0


def test_log_quarter_turn_inverse():
    q = mk.Point(S2, [1.0, 0.0, 0.0])
    v = mk.log(NORTH, q)
    np.testing.assert_allclose(v.vec, [math.pi / 2, 0.0, 0.0], atol=1e-15)


def test_exp_log_round_trip_seeded():
    rng = np.random.default_rng(7)
    for manifold in (S2, mk.Sphere(5), mk.Euclidean(3)):
        for _ in range(100):
            p = mk.random_point(manifold, rng)
            u = mk.random_tangent(p, rng, unit=True)
            q = mk.exp(p, u)  # |v| = 1 < pi
            back = mk.log(p, q)
            assert np.max(np.abs(back.vec - u.vec)) <= 1e-10
            again = mk.exp(p, back)
            assert np.max(np.abs(again.coords - q.coords)) <= 1e-10


def test_log_antipodal_error():
    south = mk.Point(S2, [0.0, 0.0, -1.0])
    with pytest.raises(mk.AntipodalError):
        mk.log(NORTH, south)


def test_dist_examples():
    assert mk.dist(NORTH, NORTH) == 0.0
    q = mk.Point(S2, [1.0, 0.0, 0.0])
    assert abs(mk.dist(NORTH, q) - math.pi / 2) <= 1e-15
    south = mk.Point(S2, [0.0, 0.0, -1.0])
    assert abs(mk.dist(NORTH, south) - math.pi) <= 1e-15
    assert mk.dist(q, NORTH) == mk.dist(NORTH, q)


def test_tangent_project():
    w = mk.tangent_project(NORTH, [1.0, 1.0, 1.0])
    np.testing.assert_allclose(w.vec, [1.0, 1.0, 0.0], atol=0)
    again = mk.tangent_project(NORTH, w.vec)
    np.testing.assert_allclose(again.vec, w.vec, atol=0)
    zero = mk.tangent_project(NORTH, NORTH.coords)
    assert mk.norm(zero) == 0.0


def test_metric_compatibility_unit_speed():
    rng = np.random.default_rng(11)
    for _ in range(50):
        p = mk.random_point(S2, rng)
        u = mk.random_tangent(p, rng, unit=True)
        t = rng.uniform(0.0, math.pi - 1e-6)
        q = mk.exp(p, mk.TangentVector(p, t * u.vec))
        assert abs(mk.dist(p, q) - t) <= 1e-10


def test_sphere_point_renormalized():
    p = mk.Point(S2, [3.0, 4.0, 0.0])
    np.testing.assert_allclose(p.coords, [0.6, 0.8, 0.0], atol=1e-15)
    with pytest.raises(mk.GeometryError):
        mk.Point(S2, [0.0, 0.0, 0.0])


def test_tangency_enforced():
    with pytest.raises(mk.GeometryError):
        mk.TangentVector(NORTH, [0.0, 0.0, 1.0])


def test_tangency_preserved_by_operations():
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = mk.random_point(S2, rng)
        q = mk.random_point(S2, rng)
        if p.coords @ q.coords <= -1 + 1e-6:
            continue
        v = mk.log(p, q)
        assert abs(v.vec @ p.coords) <= 1e-10
        w = mk.tangent_project(p, rng.standard_normal(3))
        assert abs(w.vec @ p.coords) <= 1e-10


def std_chart(base=NORTH, radius=math.pi / 2):
    frame = (mk.TangentVector(base, [1.0, 0.0, 0.0]), mk.TangentVector(base, [0.0, 1.0, 0.0]))
    return mk.Chart(base, frame, radius)


def test_chart_center_maps_to_origin():
    chart = std_chart()
    np.testing.assert_allclose(mk.chart_forward(chart, NORTH), [0.0, 0.0], atol=0)
    back = mk.chart_backward(chart, [0.0, 0.0])
    np.testing.assert_allclose(back.coords, NORTH.coords, atol=0)


def test_chart_backward_quarter_turn():
    chart = std_chart(radius=math.pi - 1e-9)
    q = mk.chart_backward(chart, [math.pi / 2, 0.0])
    np.testing.assert_allclose(q.coords, [1.0, 0.0, 0.0], atol=1e-15)


def test_chart_radial_isometry_seeded():
    rng = np.random.default_rng(21)
    for _ in range(100):
        base = mk.random_point(S2, rng)
        chart = mk.make_chart(base, radius=1.4)
        u = mk.random_tangent(base, rng, unit=True)
        t = rng.uniform(0.0, 1.3)
        p = mk.exp(base, mk.TangentVector(base, t * u.vec))
        x = mk.chart_forward(chart, p)
        assert abs(np.linalg.norm(x) - mk.dist(base, p)) <= 1e-10


def test_chart_round_trip_seeded():
    rng = np.random.default_rng(22)
    for manifold in (S2, mk.Sphere(5)):
        for _ in range(100):
            base = mk.random_point(manifold, rng)
            chart = mk.make_chart(base, radius=1.5, frame_seed=int(rng.integers(1000)))
            p = mk.exp(base, mk.TangentVector(base, 1.2 * mk.random_tangent(base, rng, unit=True).vec))
            x = mk.chart_forward(chart, p)
            back = mk.chart_backward(chart, x)
            assert np.max(np.abs(back.coords - p.coords)) <= 1e-10
            x2 = mk.chart_forward(chart, back)
            assert np.max(np.abs(x2 - x)) <= 1e-10


def test_chart_domain_errors():
    chart = std_chart(radius=0.5)
    far = mk.Point(S2, [1.0, 0.0, 0.0])
    with pytest.raises(mk.ChartDomainError):
        mk.chart_forward(chart, far)
    with pytest.raises(mk.ChartDomainError):
        mk.chart_backward(chart, [0.6, 0.0])


def test_chart_validation():
    bad_frame = (mk.TangentVector(NORTH, [1.0, 0.0, 0.0]), mk.TangentVector(NORTH, [1.0, 0.0, 0.0]))
    with pytest.raises(mk.GeometryError):
        mk.Chart(NORTH, bad_frame, 1.0)
    good = (mk.TangentVector(NORTH, [1.0, 0.0, 0.0]), mk.TangentVector(NORTH, [0.0, 1.0, 0.0]))
    with pytest.raises(mk.GeometryError):
        mk.Chart(NORTH, good, math.pi)  # sphere charts need radius < pi
    with pytest.raises(mk.GeometryError):
        mk.Chart(NORTH, good, -1.0)


def test_make_chart_deterministic():
    a = mk.make_chart(NORTH, frame_seed=5)
    b = mk.make_chart(NORTH, frame_seed=5)
    np.testing.assert_array_equal(a.frame_matrix, b.frame_matrix)


def test_chart_transition_regularity():
    # Transition between overlapping normal charts: invertible, well conditioned.
    rng = np.random.default_rng(9)
    chart_a = mk.make_chart(NORTH, radius=math.pi / 2)
    nearby = mk.exp(NORTH, mk.TangentVector(NORTH, 0.3 * chart_a.frame[0].vec))
    chart_b = mk.make_chart(nearby, radius=math.pi / 2)

    def transition(x):
        return mk.chart_forward(chart_b, mk.chart_backward(chart_a, x))

    h = 1e-6
    for _ in range(20):
        x = 0.5 * rng.standard_normal(2)
        jac = np.zeros((2, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            jac[:, k] = (transition(x + e) - transition(x - e)) / (2 * h)
        assert np.linalg.cond(jac) < 1e6
        # Invertibility: composing with the reverse transition returns x.
        y = transition(x)
        x_back = mk.chart_forward(chart_a, mk.chart_backward(chart_b, y))
        assert np.max(np.abs(x_back - x)) <= 1e-9


def test_exp_differential_matches_finite_differences():
    rng = np.random.default_rng(31)
    for manifold in (S2, mk.Sphere(5)):
        for _ in range(25):
            p = mk.random_point(manifold, rng)
            v = mk.TangentVector(p, rng.uniform(0.1, 1.4) * mk.random_tangent(p, rng, unit=True).vec)
            w = mk.random_tangent(p, rng)
            h = 1e-6
            plus = mk.exp(p, mk.TangentVector(p, v.vec + h * w.vec))
            minus = mk.exp(p, mk.TangentVector(p, v.vec - h * w.vec))
            fd = (plus.coords - minus.coords) / (2 * h)
            analytic = mk.manifold.exp_differential(p, v, w)
            assert np.max(np.abs(fd - analytic)) <= 1e-8
