"""Shared instance builders for the test suite.

Everything is seeded through an explicit numpy Generator so every test is
deterministic.  Constraints are built to be exactly active (or safely
inactive) at a designated point, which lets tests plant multipliers and
qualification verdicts by construction.
"""

import numpy as np

import manikkt as mk


def active_ball(p, r, rng, direction=None):
    """Ball constraint whose boundary passes exactly through p."""
    if direction is None:
        direction = mk.random_tangent(p, rng, unit=True)
    center = mk.exp(p, mk.TangentVector(p, r * direction.vec))
    return mk.ball_constraint(center, r)


def inactive_ball(p, rng, r=0.8, margin=0.4):
    """Ball constraint containing p strictly in its interior."""
    direction = mk.random_tangent(p, rng, unit=True)
    center = mk.exp(p, mk.TangentVector(p, (r - margin) * direction.vec))
    return mk.ball_constraint(center, r)


def equality_through(p, rng):
    """Linear-restriction equality that vanishes at p with nonzero gradient."""
    for _ in range(20):
        a = rng.standard_normal(p.manifold.ambient_dim)
        field = mk.linear_field(a, float(a @ p.coords), p.manifold)
        if mk.norm(field.gradient(p)) > 0.3:
            return field
    raise RuntimeError("could not build a non-degenerate equality")


def objective_with_gradient(manifold, gradient_at, value_at=None):
    """Scalar field with a prescribed gradient function (value defaults to 0)."""
    return mk.ScalarField(
        manifold,
        value_at if value_at is not None else (lambda p: 0.0),
        gradient_at,
    )


def planted_multiplier_problem(manifold, rng, n_active, n_eq, mu=None, lam=None):
    """Problem whose objective gradient is exactly -sum mu_i grad g_i - sum lam_j grad h_j.

    All constraints are active at the returned point and their gradients
    are linearly independent, so the planted multipliers are the unique
    KKT certificate there.  Returns (problem, point, mu, lam).
    """
    d = manifold.intrinsic_dim
    assert n_active + n_eq <= d
    for _ in range(50):
        p = mk.random_point(manifold, rng)
        balls = [active_ball(p, rng.uniform(0.2, 0.7), rng) for _ in range(n_active)]
        eqs = [equality_through(p, rng) for _ in range(n_eq)]
        cols = np.column_stack(
            [g.gradient(p).vec for g in balls] + [h.gradient(p).vec for h in eqs]
        ) if (n_active + n_eq) else np.zeros((manifold.ambient_dim, 0))
        if cols.shape[1]:
            s = np.linalg.svd(cols, compute_uv=False)
            if s[-1] < 0.1:
                continue
        if mu is None:
            mu = rng.uniform(0.2, 2.0, size=n_active)
        if lam is None:
            lam = rng.uniform(-1.5, 1.5, size=n_eq)

        def grad_f(q, balls=balls, eqs=eqs, mu=mu, lam=lam):
            acc = np.zeros(q.manifold.ambient_dim)
            for m_i, g in zip(mu, balls):
                acc -= m_i * g.gradient(q).vec
            for l_j, h in zip(lam, eqs):
                acc -= l_j * h.gradient(q).vec
            return mk.tangent_project(q, acc)

        objective = objective_with_gradient(manifold, grad_f)
        prob = mk.ConstrainedProblem(manifold, objective, tuple(balls), tuple(eqs))
        return prob, p, np.asarray(mu, dtype=float), np.asarray(lam, dtype=float)
    raise RuntimeError("could not build a well-conditioned planted instance")


def planted_witness_problem(manifold, rng, n_active, n_eq=0):
    """Problem at whose point no multipliers exist.

    The objective gradient is the negative of a strictly inward direction
    d (all active <grad g_i, d> < 0, <grad h_j, d> = 0), so -grad f = d
    cannot be a nonnegative combination of the constraint gradients.
    Returns (problem, point, d).
    """
    d_dim = manifold.intrinsic_dim
    assert n_active + n_eq < d_dim or (n_eq == 0 and n_active <= d_dim)
    for _ in range(100):
        p = mk.random_point(manifold, rng)
        balls = [active_ball(p, rng.uniform(0.2, 0.7), rng) for _ in range(n_active)]
        eqs = [equality_through(p, rng) for _ in range(n_eq)]
        G = np.column_stack([g.gradient(p).vec for g in balls]) if balls else None
        H = np.column_stack([h.gradient(p).vec for h in eqs]) if eqs else None
        direction = mk.random_tangent(p, rng, unit=True).vec
        if H is not None:
            q, _ = np.linalg.qr(H)
            direction = direction - q @ (q.T @ direction)
            nrm = np.linalg.norm(direction)
            if nrm < 0.3:
                continue
            direction = direction / nrm
        if G is not None and np.max(G.T @ direction) > -0.2:
            continue

        def grad_f(pt, d_vec=direction, base=p):
            # Constant ambient direction, projected; equals -d at the base point.
            return mk.tangent_project(pt, -d_vec)

        objective = objective_with_gradient(manifold, grad_f)
        prob = mk.ConstrainedProblem(manifold, objective, tuple(balls), tuple(eqs))
        return prob, p, mk.TangentVector(p, direction)
    raise RuntimeError("could not build a planted witness instance")


def grid_classify(prob, p, radius=6.0, n=61):
    """Brute-force verdict on the multiplier set: (nonempty, bounded).

    Dense grid over (mu restricted to the active set, lam); a gridpoint is
    a solution when the Lagrangian gradient norm falls below a cut scaled
    to the grid spacing.  Boundedness: no solution touches the grid shell.
    """
    import math

    act = mk.active_set(prob, p).active
    G, H = mk.kkt.gradient_columns(prob, p, list(act))
    M = np.hstack([G, H])
    r0 = prob.objective.gradient(p).vec
    k = M.shape[1]
    assert 1 <= k <= 3
    h = 2 * radius / (n - 1)
    axes = []
    for j in range(k):
        if j < len(act):
            axes.append(np.linspace(0.0, radius, (n + 1) // 2))
        else:
            axes.append(np.linspace(-radius, radius, n))
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=1)
    resid = X @ M.T + r0
    norms = np.linalg.norm(resid, axis=1)
    smax = np.linalg.svd(M, compute_uv=False)[0]
    cut = 0.75 * h * smax * math.sqrt(k)
    sols = norms <= cut
    if not np.any(sols):
        return False, True
    shell = np.max(np.abs(X[sols]), axis=1) >= radius - 2 * h
    return True, not np.any(shell)


def seeded_cq_instance(rng):
    """Random feasible instance for qualification tests.

    Mixes manifolds, constraint counts, and deliberate degeneracies
    (duplicated gradients, opposite gradients, too many actives) so both
    verdicts occur.
    """
    manifold = [mk.Sphere(3), mk.Sphere(5), mk.Euclidean(3)][int(rng.integers(3))]
    p = mk.random_point(manifold, rng)
    d = manifold.intrinsic_dim
    n_active = int(rng.integers(0, d + 1))
    n_inactive = int(rng.integers(0, 2))
    n_eq = int(rng.integers(0, max(1, d - n_active)))
    balls = [active_ball(p, rng.uniform(0.2, 0.7), rng) for _ in range(n_active)]
    balls += [inactive_ball(p, rng) for _ in range(n_inactive)]
    eqs = [equality_through(p, rng) for _ in range(n_eq)]
    flavor = rng.random()
    if flavor < 0.2 and balls:
        balls.append(balls[0])  # duplicated gradient kills independence
    elif flavor < 0.35:
        # Opposite active gradients kill the strict inward direction.
        u = mk.random_tangent(p, rng, unit=True)
        r1, r2 = rng.uniform(0.2, 0.6, size=2)
        balls.append(active_ball(p, r1, rng, direction=u))
        balls.append(active_ball(p, r2, rng, direction=mk.TangentVector(p, -u.vec)))
    objective = mk.frechet_objective([mk.random_point(manifold, rng) for _ in range(3)])
    rng.shuffle(balls)
    return mk.ConstrainedProblem(manifold, objective, tuple(balls), tuple(eqs)), p
