"""Command-line front end.

Subcommands: ``gen-data`` (seeded spherical-cap samples), ``solve`` (the
constrained center-of-mass pipeline with trace CSV and result JSON),
``kkt-check`` and ``cq-check`` (certificates for a given point).

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
error, 5 KKT witness found, 6 infeasible point.  Diagnostics go to stderr
only, controlled by MANIKKT_LOG in {off, info, debug}; all machine output
(JSON with sorted keys, CSV with shortest round-trip floats) is
deterministic for a fixed config and seed.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from .cq import cq_report, mfcq_dual_check
from .chart_verify import cross_chart_consistency
from .kkt import find_multipliers
from .manifold import (
    AntipodalError,
    Euclidean,
    GeometryError,
    Manifold,
    Point,
    Sphere,
    TangentVector,
    dist,
    exp,
    make_chart,
    tangent_basis,
)
from .problem import (
    ConstrainedProblem,
    InfeasiblePointError,
    active_set,
    ball_constraint,
    frechet_objective,
)
from .solver import SolverConfig, SolverError, Trace, gradient_descent, project_ball, projected_gradient_descent

logger = logging.getLogger("manikkt")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_WITNESS = 5
EXIT_INFEASIBLE = 6


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


class NumericError(Exception):
    pass


def parse_real(text: str) -> float:
    """Float literal, optionally using 'pi' with * and / (e.g. 'pi/6')."""
    try:
        return float(text)
    except ValueError:
        pass
    tokens = re.split(r"([*/])", text.replace(" ", ""))
    try:
        def atom(t: str) -> float:
            return math.pi if t.lower() == "pi" else float(t)

        val = atom(tokens[0])
        for op, t in zip(tokens[1::2], tokens[2::2]):
            val = val * atom(t) if op == "*" else val / atom(t)
        return val
    except (ValueError, IndexError, ZeroDivisionError) as err:
        raise ConfigError(f"cannot parse number {text!r}: {err}") from err


def parse_vector(text: str) -> np.ndarray:
    return np.array([parse_real(part) for part in text.split(",")])


@dataclass
class GenSpec:
    seed: int
    n: int
    center: np.ndarray
    cap_radius: float


@dataclass
class RunConfig:
    """One experiment: manifold, data source, constraints, solver settings, outputs.

    ``constraints`` holds (center, radius) pairs, one per ``[constraint*]``
    section in section-name order; the solve command requires exactly one,
    while the certification commands accept several.
    """

    manifold: Manifold
    data_file: Optional[str]
    generator: Optional[GenSpec]
    constraints: List[tuple]
    solver: SolverConfig
    trace_path: Optional[str]
    result_path: Optional[str]


def load_config(path: str) -> RunConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")

    def get(section: str, key: str, default: Optional[str]) -> Optional[str]:
        return parser.get(section, key, fallback=default)

    kind = (get("manifold", "kind", "sphere") or "sphere").lower()
    if kind == "sphere":
        manifold: Manifold = Sphere(int(get("manifold", "ambient_dim", "3")))
    elif kind == "euclidean":
        manifold = Euclidean(int(get("manifold", "dim", "2")))
    else:
        raise ConfigError(f"unknown manifold kind {kind!r}")

    data_file = get("data", "file", None)
    generator = None
    if data_file is None:
        if not isinstance(manifold, Sphere) or manifold.ambient_dim != 3:
            raise ConfigError("the data generator is defined on the 2-sphere; supply a data file")
        cap_radius = parse_real(get("data", "cap_radius", "1.0"))
        if not (0.0 < cap_radius < math.pi / 2):
            raise ConfigError(f"generator cap radius must be in (0, pi/2), got {cap_radius}")
        generator = GenSpec(
            seed=int(get("data", "seed", "0")),
            n=int(get("data", "n", "120")),
            center=parse_vector(get("data", "center", "0,0,1")),
            cap_radius=cap_radius,
        )
        if generator.n < 1:
            raise ConfigError("data generator needs n >= 1")

    try:
        constraints = []
        sections = sorted(s for s in parser.sections() if s.startswith("constraint"))
        if not sections:
            sections = ["constraint"]
        for section in sections:
            center = Point(manifold, parse_vector(get(section, "center", "0.4319,0.2592,0.8639")))
            radius = parse_real(get(section, "radius", "pi/6"))
            constraints.append((center, radius))
        solver = SolverConfig(
            step=parse_real(get("solver", "step", "0.5")),
            max_iters=int(get("solver", "max_iters", "1000")),
            stop_tol=parse_real(get("solver", "stop_tol", "1e-14")),
            act_tol=parse_real(get("solver", "act_tol", "1e-8")),
        )
    except (GeometryError, ValueError) as err:
        raise ConfigError(str(err)) from err

    return RunConfig(
        manifold=manifold,
        data_file=data_file,
        generator=generator,
        constraints=constraints,
        solver=solver,
        trace_path=get("output", "trace", None),
        result_path=get("output", "result", None),
    )


def sample_cap(seed: int, n: int, center: Point, cap_radius: float) -> List[Point]:
    """Uniform samples on the spherical cap around ``center``.

    Colatitude via the inverse CDF of the cap-uniform density, longitude
    uniform in the tangent frame at the center; deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    F = tangent_basis(center)
    points = []
    for _ in range(n):
        u1, u2 = rng.random(), rng.random()
        theta = math.acos(1.0 - u1 * (1.0 - math.cos(cap_radius)))
        phi = 2.0 * math.pi * u2
        v = theta * (math.cos(phi) * F[:, 0] + math.sin(phi) * F[:, 1])
        points.append(exp(center, TangentVector(center, v)))
    return points


def write_points_csv(points: List[Point], path: str) -> None:
    with open(path, "w", newline="") as fh:
        for p in points:
            fh.write(",".join(repr(float(c)) for c in p.coords) + "\n")


def load_points(path: str, manifold: Manifold) -> List[Point]:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise DataError(f"cannot read data file {path!r}: {err}") from err
    try:
        if path.endswith(".json"):
            rows = json.loads(text)
        else:
            rows = [
                [float(cell) for cell in line.split(",")]
                for line in text.splitlines()
                if line.strip()
            ]
        points = [Point(manifold, row) for row in rows]
    except (ValueError, GeometryError, json.JSONDecodeError) as err:
        raise DataError(f"malformed data in {path!r}: {err}") from err
    if not points:
        raise DataError(f"no data points in {path!r}")
    return points


def _json_dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _point_list(p: Point) -> list:
    return [float(c) for c in p.coords]


def cmd_gen_data(args: argparse.Namespace) -> int:
    center_arr = parse_vector(args.center)
    if center_arr.shape[0] != 3:
        raise ConfigError("gen-data samples the 2-sphere; --center needs 3 components")
    radius = parse_real(args.radius)
    if not (0.0 < radius < math.pi / 2):
        raise ConfigError(f"cap radius must be in (0, pi/2), got {radius}")
    if args.n < 1:
        raise ConfigError("need n >= 1")
    center = Point(Sphere(3), center_arr)
    points = sample_cap(args.seed, args.n, center, radius)
    try:
        write_points_csv(points, args.out)
    except OSError as err:
        raise DataError(f"cannot write {args.out!r}: {err}") from err
    logger.info("wrote %d cap samples to %s", len(points), args.out)
    return EXIT_OK


def _get_data(config: RunConfig) -> List[Point]:
    if config.data_file is not None:
        return load_points(config.data_file, config.manifold)
    gen = config.generator
    return sample_cap(gen.seed, gen.n, Point(config.manifold, gen.center), gen.cap_radius)


def _format_trace(trace: Trace, digits: int) -> str:
    lines = [f"{'k':>4} {'f':>{digits + 8}} {'n_sq':>{digits + 8}} {'mu':>{digits + 8}}"]
    for rec in trace.records:
        mu = rec.mu_est[0] if rec.mu_est.size else float("nan")
        lines.append(
            f"{rec.k:>4} {rec.f_val:>{digits + 8}.{digits}f} "
            f"{rec.n_sq:>{digits + 8}.{digits}e} {mu:>{digits + 8}.{digits}e}"
        )
    return "\n".join(lines)


def cmd_solve(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if len(config.constraints) != 1:
        raise ConfigError("solve needs exactly one [constraint] section")
    center, radius = config.constraints[0]
    data = _get_data(config)
    objective = frechet_objective(data)
    try:
        prob = ConstrainedProblem(config.manifold, objective, (ball_constraint(center, radius),))
    except ValueError as err:
        raise ConfigError(str(err)) from err
    p0 = data[0]

    try:
        unconstrained = gradient_descent(objective, config.solver, p0)
        constrained = projected_gradient_descent(prob, config.solver, p0)
        p_bar = unconstrained.final_point
        p_star = constrained.final_point
        proj_mean = project_ball(center, radius, p_bar)
    except (SolverError, AntipodalError) as err:
        raise NumericError(str(err)) from err

    final = constrained.final
    act = active_set(prob, p_star, config.solver.act_tol)
    result = {
        "active": bool(act.active),
        "converged": constrained.converged,
        "dist_p_star_to_proj_mean": dist(p_star, proj_mean),
        "iterations": final.k,
        "mu": float(final.mu_est[0]),
        "n_sq": final.n_sq,
        "p_bar": _point_list(p_bar),
        "p_star": _point_list(p_star),
        "proj_mean": _point_list(proj_mean),
        "stop_reason": constrained.stop_reason,
        "f_star": final.f_val,
    }

    try:
        trace_path = args.trace or config.trace_path
        if trace_path:
            Path(trace_path).write_text(constrained.to_csv())
        result_path = args.out or config.result_path
        if result_path:
            Path(result_path).write_text(_json_dump(result))
    except OSError as err:
        raise DataError(f"cannot write output: {err}") from err

    if args.digits:
        print(_format_trace(constrained, args.digits))
    print(_json_dump(result), end="")
    return EXIT_OK


def _point_from_arg(text: str, manifold: Manifold) -> Point:
    arr = parse_vector(text)
    try:
        return Point(manifold, arr)
    except GeometryError as err:
        raise ConfigError(str(err)) from err


def _problem_from_config(config: RunConfig) -> ConstrainedProblem:
    data = _get_data(config)
    objective = frechet_objective(data)
    try:
        balls = tuple(ball_constraint(c, r) for c, r in config.constraints)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    return ConstrainedProblem(config.manifold, objective, balls)


def cmd_kkt_check(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    prob = _problem_from_config(config)
    p = _point_from_arg(args.point, config.manifold)
    try:
        report = find_multipliers(prob, p, config.solver.act_tol)
    except InfeasiblePointError as err:
        print(_json_dump({"error": "infeasible", "detail": str(err)}), end="")
        return EXIT_INFEASIBLE
    print(_json_dump(report.as_dict()), end="")
    return EXIT_OK if report.multipliers is not None else EXIT_WITNESS


def cmd_cq_check(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    prob = _problem_from_config(config)
    p = _point_from_arg(args.point, config.manifold)
    act_tol = config.solver.act_tol
    try:
        report = cq_report(prob, p, act_tol)
        mfcq_dual_ok, _ = mfcq_dual_check(prob, p, act_tol)
    except InfeasiblePointError as err:
        print(_json_dump({"error": "infeasible", "detail": str(err)}), end="")
        return EXIT_INFEASIBLE

    chart_a = make_chart(p)
    offset = TangentVector(p, (math.pi / 8) * chart_a.frame[0].vec)
    chart_b = make_chart(exp(p, offset))
    chart_rep = cross_chart_consistency(prob, p, chart_a, chart_b, act_tol)

    dual_agrees = (report.mfcq == (mfcq_dual_ok and report.equality_rank_ok))
    out = report.as_dict()
    out["charts"] = chart_rep.as_dict()
    out["primal_dual_agree"] = dual_agrees
    print(_json_dump(out), end="")
    return EXIT_OK if dual_agrees and chart_rep.consistent else EXIT_NUMERIC


def _configure_logging() -> None:
    level_name = os.environ.get("MANIKKT_LOG", "off").lower()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logger.addHandler(handler)
    if level_name == "debug":
        logger.setLevel(logging.DEBUG)
    elif level_name == "info":
        logger.setLevel(logging.INFO)
    else:
        logger.setLevel(logging.CRITICAL + 1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manikkt",
        description="Constrained center-of-mass solver and KKT/CQ certification on the sphere",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="sample points uniformly on a spherical cap")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--center", required=True, help="comma-separated cap center, e.g. 0,0,1")
    gen.add_argument("--radius", required=True, help="cap radius in (0, pi/2); 'pi/6' works")
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen_data)

    solve = sub.add_parser("solve", help="run the constrained center-of-mass pipeline")
    solve.add_argument("--config", required=True)
    solve.add_argument("--trace", help="trace CSV path (overrides config)")
    solve.add_argument("--out", help="result JSON path (overrides config)")
    solve.add_argument("--digits", type=int, help="also print the iteration table with D digits")
    solve.set_defaults(func=cmd_solve)

    kkt = sub.add_parser("kkt-check", help="certify KKT conditions at a point")
    kkt.add_argument("--config", required=True)
    kkt.add_argument("--point", required=True, help="comma-separated ambient coordinates")
    kkt.set_defaults(func=cmd_kkt_check)

    cq = sub.add_parser("cq-check", help="certify constraint qualifications at a point")
    cq.add_argument("--config", required=True)
    cq.add_argument("--point", required=True, help="comma-separated ambient coordinates")
    cq.set_defaults(func=cmd_cq_check)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, SolverError, AntipodalError, GeometryError) as err:
        print(f"numerical error: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
