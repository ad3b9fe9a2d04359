"""Command-line interface.

Subcommands:

* ``solve``           optimize a scenario, write trajectory/controls/summary
* ``simulate``        integrate a given controls file through a scenario
* ``check-gradient``  compare analytic and finite-difference gradients
* ``presets``         list built-in scenarios
* ``export-scenario`` write a built-in scenario as an editable JSON file

Exit codes: 0 success, 1 failed check, 2 solve did not converge,
3 malformed input.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys

import numpy as np

from . import io as dio
from .adjoint import fd_gradient_oracle, gradient, integrate_costate
from .parametrization import ControlParams, horizon
from .penalty import violation
from .scenarios import PRESET_NAMES, UnknownPresetError, kinematic_lower_bound, preset
from .simulate import IntegratorConfig, integrate_forward
from .solver import SolverConfig, solve

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_NOT_CONVERGED = 2
EXIT_BAD_INPUT = 3


def _load_problem(args):
    """Resolve --preset/--scenario into (scenario, penalty, solver)."""
    if args.scenario is not None:
        scenario, pcfg, scfg = dio.load_scenario(args.scenario)
    else:
        ps = preset(args.preset)
        scenario, pcfg, scfg = ps.scenario, ps.penalty, SolverConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["rng_seed"] = args.seed
    if getattr(args, "multistart", None) is not None:
        overrides["multistart"] = args.multistart
    if getattr(args, "max_inner_iters", None) is not None:
        overrides["max_inner_iters"] = args.max_inner_iters
    if overrides:
        scfg = dataclasses.replace(scfg, **overrides)
    return scenario, pcfg, scfg


def _integrator(args) -> IntegratorConfig:
    steps = getattr(args, "steps_per_segment", None)
    if steps is None:
        return IntegratorConfig()
    return IntegratorConfig(steps_per_segment=steps)


def _cmd_solve(args) -> int:
    scenario, pcfg, scfg = _load_problem(args)
    icfg = _integrator(args)
    report = solve(scenario, pcfg, scfg, icfg)
    os.makedirs(args.out, exist_ok=True)
    traj = integrate_forward(scenario, report.params, icfg)
    dio.write_trajectory_csv(
        os.path.join(args.out, "trajectory.csv"), scenario, traj
    )
    dio.write_controls_csv(
        os.path.join(args.out, "controls.csv"), report.params
    )
    dio.write_summary_json(os.path.join(args.out, "summary.json"), report)
    print(
        f"T={report.horizon:.6f} violation={report.violation:.3e} "
        f"miss={report.terminal_miss:.3e} delta={report.delta_used:g} "
        f"converged={report.converged}"
    )
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _cmd_simulate(args) -> int:
    scenario, pcfg, _ = _load_problem(args)
    theta, hdot, rho = dio.read_controls_csv(args.controls)
    if theta.size != scenario.p:
        raise dio.ScenarioFormatError(
            f"controls file has {theta.size} segments, scenario wants {scenario.p}"
        )
    params = ControlParams(theta=theta, hdot=hdot, rho=rho, epsilon=pcfg.eps_bar)
    icfg = _integrator(args)
    traj = integrate_forward(scenario, params, icfg)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "trajectory.csv")
    dio.write_trajectory_csv(path, scenario, traj)
    big_l = violation(scenario, params, traj)
    print(f"T={horizon(params):.6f} violation={big_l:.3e} wrote {path}")
    return EXIT_OK


def _cmd_check_gradient(args) -> int:
    scenario, pcfg, _ = _load_problem(args)
    icfg = _integrator(args)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    p = scenario.p
    worst = 0.0
    for _ in range(args.draws):
        params = ControlParams(
            theta=rng.uniform(-math.pi, math.pi, p),
            hdot=rng.uniform(-scenario.hdot_max, scenario.hdot_max, p),
            rho=rng.uniform(0.3, 2.0, p) * scenario.t_hint,
            epsilon=float(np.exp(rng.uniform(np.log(1e-3), np.log(pcfg.eps_bar)))),
        )
        if scenario.theta0 is not None:
            params.theta[0] = scenario.theta0
        delta = float(rng.choice(pcfg.delta_schedule))
        traj = integrate_forward(scenario, params, icfg)
        costate = integrate_costate(scenario, params, traj, pcfg)
        ana = gradient(scenario, params, traj, costate, pcfg, delta).to_vector()
        ref = fd_gradient_oracle(
            scenario, params, pcfg, delta, integrator_cfg=icfg
        ).to_vector()
        scale = np.maximum(np.abs(ref), 1e-6)
        worst = max(worst, float(np.max(np.abs(ana - ref) / scale)))
    print(f"max relative gradient error over {args.draws} draws: {worst:.3e}")
    if worst <= args.tol:
        return EXIT_OK
    return EXIT_CHECK_FAILED


def _cmd_presets(_args) -> int:
    for name in PRESET_NAMES:
        ps = preset(name)
        sc = ps.scenario
        print(
            f"{name}: {len(sc.obstacles)} obstacles, p={sc.p}, "
            f"lower bound T>={kinematic_lower_bound(sc):.4f}, "
            f"reference T={ps.reference_horizon}"
        )
    return EXIT_OK


def _cmd_export_scenario(args) -> int:
    ps = preset(args.preset)
    dio.save_scenario(args.out, ps.scenario, ps.penalty, SolverConfig())
    print(f"wrote {args.out}")
    return EXIT_OK


def _add_problem_args(sp, preset_required: bool = False) -> None:
    group = sp.add_mutually_exclusive_group(required=preset_required)
    group.add_argument("--preset", choices=PRESET_NAMES, help="built-in scenario")
    group.add_argument("--scenario", help="scenario JSON file")
    sp.add_argument(
        "--steps-per-segment",
        dest="steps_per_segment",
        type=int,
        default=None,
        help="integration steps per control segment",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dubinsopt",
        description=(
            "Time-optimal Dubins airplane trajectories around moving "
            "obstacles"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="optimize a scenario")
    _add_problem_args(sp, preset_required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--multistart", type=int, default=None)
    sp.add_argument("--max-inner-iters", dest="max_inner_iters", type=int)
    sp.set_defaults(func=_cmd_solve)

    sp = sub.add_parser("simulate", help="integrate a controls file")
    _add_problem_args(sp, preset_required=True)
    sp.add_argument(
        "--controls",
        "--params",
        dest="controls",
        required=True,
        help="controls CSV file",
    )
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser(
        "check-gradient", help="compare analytic and FD gradients"
    )
    _add_problem_args(sp, preset_required=True)
    sp.add_argument("--draws", type=int, default=20)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.set_defaults(func=_cmd_check_gradient)

    sp = sub.add_parser("presets", help="list built-in scenarios")
    sp.set_defaults(func=_cmd_presets)

    sp = sub.add_parser(
        "export-scenario", help="write a built-in scenario as JSON"
    )
    sp.add_argument("--preset", choices=PRESET_NAMES, required=True)
    sp.add_argument("--out", required=True, help="output JSON path")
    sp.set_defaults(func=_cmd_export_scenario)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (dio.ScenarioFormatError, UnknownPresetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
