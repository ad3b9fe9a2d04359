"""Loading and saving of scenarios, controls, and results.

Scenario files are JSON (see README for the schema).  Trajectories and
controls are CSV.  All writes go through a temp-file-then-rename so a
crash never leaves a half-written artifact behind.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile

import numpy as np

from .model import CurveKind, CurvePiece, ObstacleTrajectory, Scenario
from .parametrization import ControlParams
from .penalty import PenaltyConfig
from .simulate import Trajectory
from .solver import SolveReport, SolverConfig


class ScenarioFormatError(ValueError):
    """Malformed scenario file; the message names the offending field."""


def atomic_write_text(path: str, text: str) -> None:
    """Write a file via temp-then-rename in the destination directory."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ScenarioFormatError(f"missing field '{key}' in {where}")
    return obj[key]


def _vector(value, length: int, where: str) -> tuple:
    try:
        vec = tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"field {where} is not a number list") from exc
    if len(vec) != length:
        raise ScenarioFormatError(
            f"field {where} needs {length} entries, got {len(vec)}"
        )
    return vec


def _piece_to_dict(piece: CurvePiece) -> dict:
    return {
        "kind": piece.kind.value,
        "domain": [piece.t_lo, piece.t_hi],
        "coefficients": {
            k: list(v) if isinstance(v, (tuple, list)) else v
            for k, v in piece.coefficients.items()
        },
    }


def _piece_from_dict(d: dict, where: str) -> CurvePiece:
    kind_name = _require(d, "kind", where)
    try:
        kind = CurveKind(kind_name)
    except ValueError as exc:
        raise ScenarioFormatError(
            f"unknown curve kind {kind_name!r} in {where}"
        ) from exc
    domain = _vector(_require(d, "domain", where), 2, f"{where}.domain")
    coefficients = _require(d, "coefficients", where)
    if not isinstance(coefficients, dict):
        raise ScenarioFormatError(f"field {where}.coefficients must be an object")
    coeffs = {
        k: tuple(float(x) for x in v) if isinstance(v, (list, tuple)) else float(v)
        for k, v in coefficients.items()
    }
    try:
        return CurvePiece(
            kind=kind, t_lo=domain[0], t_hi=domain[1], coefficients=coeffs
        )
    except ValueError as exc:
        raise ScenarioFormatError(f"{where}: {exc}") from exc


def _obstacle_from_dict(d: dict, where: str) -> ObstacleTrajectory:
    radius = float(_require(d, "safety_radius", where))
    if "pieces" in d:
        pieces = tuple(
            _piece_from_dict(pd, f"{where}.pieces[{i}]")
            for i, pd in enumerate(d["pieces"])
        )
    else:
        # Flat single-piece form: kind/coefficients/domain at top level.
        pieces = (_piece_from_dict(d, where),)
    try:
        return ObstacleTrajectory(pieces=pieces, safety_radius=radius)
    except ValueError as exc:
        raise ScenarioFormatError(f"{where}: {exc}") from exc


def scenario_to_dict(
    scenario: Scenario,
    penalty: PenaltyConfig | None = None,
    solver: SolverConfig | None = None,
) -> dict:
    if penalty is None:
        penalty = PenaltyConfig()
    if solver is None:
        solver = SolverConfig()
    return {
        "start": list(scenario.w0),
        "goal": list(scenario.w1),
        "initial_heading": scenario.theta0,
        "v_xy": scenario.v_xy,
        "hdot_max": scenario.hdot_max,
        "safety_radius": scenario.safety_radius,
        "segments": scenario.p,
        "t_hint": scenario.t_hint,
        "obstacles": [
            {
                "safety_radius": obs.safety_radius,
                "pieces": [_piece_to_dict(piece) for piece in obs.pieces],
            }
            for obs in scenario.obstacles
        ],
        "penalty": {
            "alpha": penalty.alpha,
            "beta": penalty.beta,
            "delta_schedule": list(penalty.delta_schedule),
            "eps_bar": penalty.eps_bar,
            "eps_min": penalty.eps_min,
        },
        "solver": {
            "seed": solver.rng_seed,
            "multistart": solver.multistart,
            "max_inner_iters": solver.max_inner_iters,
            "tolerances": {
                "grad": solver.grad_tol,
                "violation": penalty.violation_tol,
            },
        },
    }


def scenario_from_dict(d: dict):
    """Parse a scenario document.

    Returns (Scenario, PenaltyConfig, SolverConfig); penalty and solver
    sections are optional and fall back to defaults.
    """
    if not isinstance(d, dict):
        raise ScenarioFormatError("scenario document must be a JSON object")
    where = "scenario"
    start = _vector(_require(d, "start", where), 3, "start")
    goal = _vector(_require(d, "goal", where), 3, "goal")
    v_xy = float(_require(d, "v_xy", where))
    hdot_max = float(_require(d, "hdot_max", where))
    safety_radius = float(_require(d, "safety_radius", where))
    segments = int(d.get("segments", 10))
    theta0 = d.get("initial_heading")
    if theta0 is not None:
        theta0 = float(theta0)
    t_hint = d.get("t_hint")
    if t_hint is not None:
        t_hint = float(t_hint)
    obstacles_raw = d.get("obstacles", [])
    if not isinstance(obstacles_raw, list):
        raise ScenarioFormatError("field 'obstacles' must be a list")
    obstacles = tuple(
        _obstacle_from_dict(od, f"obstacles[{i}]")
        for i, od in enumerate(obstacles_raw)
    )

    pd = d.get("penalty", {})
    sd = d.get("solver", {})
    tolerances = sd.get("tolerances", {})
    try:
        penalty = PenaltyConfig(
            alpha=float(pd.get("alpha", 1.0)),
            beta=float(pd.get("beta", 1.0)),
            delta_schedule=tuple(
                pd.get("delta_schedule", PenaltyConfig().delta_schedule)
            ),
            eps_bar=float(pd.get("eps_bar", 0.1)),
            eps_min=float(pd.get("eps_min", 1e-9)),
            violation_tol=float(tolerances.get("violation", 1e-6)),
        )
        solver = SolverConfig(
            rng_seed=int(sd.get("seed", 0)),
            multistart=int(sd.get("multistart", 8)),
            max_inner_iters=int(sd.get("max_inner_iters", 500)),
            grad_tol=float(tolerances.get("grad", 1e-6)),
        )
        scenario = Scenario(
            w0=start,
            w1=goal,
            v_xy=v_xy,
            hdot_max=hdot_max,
            safety_radius=safety_radius,
            obstacles=obstacles,
            theta0=theta0,
            p=segments,
            t_hint=t_hint,
        )
    except ValueError as exc:
        raise ScenarioFormatError(str(exc)) from exc
    return scenario, penalty, solver


def load_scenario(path: str):
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as exc:
        raise ScenarioFormatError(f"cannot read scenario file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"scenario file is not valid JSON: {exc}") from exc
    return scenario_from_dict(doc)


def save_scenario(
    path: str,
    scenario: Scenario,
    penalty: PenaltyConfig | None = None,
    solver: SolverConfig | None = None,
) -> None:
    text = json.dumps(scenario_to_dict(scenario, penalty, solver), indent=2)
    atomic_write_text(path, text + "\n")


def write_trajectory_csv(path: str, scenario: Scenario, traj: Trajectory) -> None:
    """Sampled trajectory with per-obstacle clearances in signed meters.

    Clearance columns hold |w - w_i| - max(R, R_i); the cell is empty
    while the obstacle is out of its time domain.
    """
    buf = _io.StringIO()
    writer = csv.writer(buf)
    n_obs = len(scenario.obstacles)
    writer.writerow(
        ["s", "t", "x", "y", "z", "theta", "hdot"]
        + [f"clearance_{i + 1}" for i in range(n_obs)]
    )
    margins = [
        max(scenario.safety_radius, obs.safety_radius)
        for obs in scenario.obstacles
    ]
    for n in range(traj.s.size):
        row = [
            repr(float(traj.s[n])),
            repr(float(traj.t[n])),
            repr(float(traj.states[n, 0])),
            repr(float(traj.states[n, 1])),
            repr(float(traj.states[n, 2])),
            repr(float(traj.theta[n])),
            repr(float(traj.hdot[n])),
        ]
        for i in range(n_obs):
            margin_sq = traj.clearance_sq[i, n]
            if math.isnan(margin_sq):
                row.append("")
            else:
                dist = math.sqrt(max(margin_sq + margins[i] ** 2, 0.0))
                row.append(repr(dist - margins[i]))
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def write_controls_csv(path: str, params: ControlParams) -> None:
    """Per-segment controls and durations; dt_k = rho_k / p."""
    buf = _io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["k", "theta_k", "hdot_k", "rho_k", "dt_k"])
    p = params.p
    for k in range(p):
        writer.writerow(
            [
                k + 1,
                repr(float(params.theta[k])),
                repr(float(params.hdot[k])),
                repr(float(params.rho[k])),
                repr(float(params.rho[k]) / p),
            ]
        )
    atomic_write_text(path, buf.getvalue())


def read_controls_csv(path: str) -> tuple:
    """Read back a controls file; returns (theta, hdot, rho) arrays."""
    theta, hdot, rho = [], [], []
    with open(path) as f:
        reader = csv.DictReader(f)
        for row in reader:
            theta.append(float(row["theta_k"]))
            hdot.append(float(row["hdot_k"]))
            rho.append(float(row["rho_k"]))
    if not theta:
        raise ScenarioFormatError("controls file has no rows")
    return np.array(theta), np.array(hdot), np.array(rho)


def summary_dict(report: SolveReport, epsilon: float) -> dict:
    return {
        "T": report.horizon,
        "violation": report.violation,
        "terminal_miss": report.terminal_miss,
        "delta_used": report.delta_used,
        "epsilon": epsilon,
        "iterations": report.inner_iterations,
        "converged": report.converged,
        "per_delta_history": [
            {"delta": d, "T": t, "violation": v} for d, t, v in report.history
        ],
        "start_index": report.start_index,
        "seed": report.seed,
    }


def write_summary_json(path: str, report: SolveReport) -> None:
    text = json.dumps(summary_dict(report, report.params.epsilon), indent=2)
    atomic_write_text(path, text + "\n")
