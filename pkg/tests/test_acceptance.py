"""Acceptance criteria for the trajectory optimizer, one test each.

Run with ``pytest tests/test_acceptance.py -v`` to get a pass/fail line
per criterion.  Each test prints the measured values it judged, so a
red criterion shows the numbers behind it.
"""

import math
import time

import numpy as np
import pytest

from dubinsopt.adjoint import fd_gradient_oracle, gradient, integrate_costate
from dubinsopt.model import Scenario
from dubinsopt.parametrization import ControlParams, horizon, time_scale_map
from dubinsopt.penalty import PenaltyConfig, penalty_cost, stationary_epsilon
from dubinsopt.scenarios import preset
from dubinsopt.simulate import integrate_forward
from dubinsopt.solver import solve

RT2 = math.sqrt(2.0)


def _solve_preset(name):
    ps = preset(name)
    t0 = time.perf_counter()
    report = solve(ps.scenario, ps.penalty)
    elapsed = time.perf_counter() - t0
    traj = integrate_forward(ps.scenario, report.params)
    return ps, report, traj, elapsed


@pytest.fixture(scope="module")
def example1_run():
    return _solve_preset("example1")


@pytest.fixture(scope="module")
def example2_run():
    return _solve_preset("example2")


@pytest.fixture(scope="module")
def example3_run():
    return _solve_preset("example3")


def _per_obstacle_min_clearance(traj):
    """Min sampled clearance in signed meters, one entry per obstacle."""
    out = []
    for i in range(traj.clearance_sq.shape[0]):
        margin_sq = traj.clearance_sq[i]
        valid = margin_sq[~np.isnan(margin_sq)]
        if valid.size == 0:
            out.append(math.inf)
            continue
        # margin column stores dist^2 - 0.04 for the built-in scenarios
        out.append(float(np.sqrt(max(valid.min() + 0.04, 0.0)) - 0.2))
    return out


def test_criterion_1_example1_band_feasibility_runtime(example1_run):
    ps, report, traj, elapsed = example1_run
    clearances = _per_obstacle_min_clearance(traj)
    print(
        f"criterion 1: T={report.horizon:.5f} miss={report.terminal_miss:.2e} "
        f"min_clearances={['%.2e' % c for c in clearances]} "
        f"runtime={elapsed:.1f}s converged={report.converged}"
    )
    assert report.converged
    assert report.terminal_miss <= 1e-3
    assert all(c >= -1e-3 for c in clearances)
    assert elapsed <= 60.0
    assert 1.4142 <= report.horizon <= 1.45


def test_criterion_2_example2_band_and_separation(example2_run):
    ps, report, traj, elapsed = example2_run
    clearances = _per_obstacle_min_clearance(traj)
    # distance to the head-on intruder B(t) = (t, t, t) over its window
    margin_sq_b = traj.clearance_sq[1]
    valid = margin_sq_b[~np.isnan(margin_sq_b)]
    min_dist_b = float(np.sqrt(valid.min() + 0.04))
    print(
        f"criterion 2: T={report.horizon:.5f} miss={report.terminal_miss:.2e} "
        f"min_clearances={['%.2e' % c for c in clearances]} "
        f"min_dist_to_B={min_dist_b:.5f} converged={report.converged}"
    )
    assert report.converged
    assert report.terminal_miss <= 1e-3
    assert all(c >= -1e-3 for c in clearances)
    assert min_dist_b >= 0.2 - 1e-3
    assert 1.60 <= report.horizon <= 1.80


def test_criterion_3_example3_band_with_soft_schedule(example3_run):
    ps, report, traj, elapsed = example3_run
    clearances = _per_obstacle_min_clearance(traj)
    print(
        f"criterion 3: T={report.horizon:.5f} miss={report.terminal_miss:.2e} "
        f"min_clearances={['%.2e' % c for c in clearances]} "
        f"first_delta={ps.penalty.delta_schedule[0]:g} "
        f"converged={report.converged}"
    )
    assert ps.penalty.delta_schedule[0] == 10.0
    assert report.converged
    assert report.terminal_miss <= 1e-3
    assert all(c >= -1e-3 for c in clearances)
    assert 1.60 <= report.horizon <= 1.80


@pytest.mark.parametrize("name", ["example1", "example2", "example3"])
def test_criterion_4_gradient_check_hundred_draws(name):
    ps = preset(name)
    sc, pcfg = ps.scenario, ps.penalty
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        params = ControlParams(
            theta=rng.uniform(-math.pi, math.pi, sc.p),
            hdot=rng.uniform(-sc.hdot_max, sc.hdot_max, sc.p),
            rho=rng.uniform(0.3, 2.0, sc.p) * sc.t_hint,
            epsilon=float(
                np.exp(rng.uniform(math.log(1e-3), math.log(pcfg.eps_bar)))
            ),
        )
        delta = float(rng.choice(pcfg.delta_schedule))
        traj = integrate_forward(sc, params)
        costate = integrate_costate(sc, params, traj, pcfg)
        ana = gradient(sc, params, traj, costate, pcfg, delta).to_vector()
        ref = fd_gradient_oracle(sc, params, pcfg, delta).to_vector()
        scale = np.maximum(np.abs(ref), 1e-6)
        worst = max(worst, float(np.max(np.abs(ana - ref) / scale)))
    print(f"criterion 4 [{name}]: max rel gradient error {worst:.3e}")
    assert worst <= 1e-3


def test_criterion_5_no_report_beats_kinematics(
    example1_run, example2_run, example3_run
):
    lines = []
    for ps, report, _, _ in (example1_run, example2_run, example3_run):
        lines.append(f"{ps.name}: T={report.horizon:.6f}")
        if report.converged:
            assert report.horizon >= RT2 - 1e-6
    print("criterion 5: " + "; ".join(lines))


def test_criterion_6_time_map_structure():
    rng = np.random.default_rng(6)
    fd_step = 1e-7
    for _ in range(1000):
        p = int(rng.integers(1, 13))
        params = ControlParams(
            theta=np.zeros(p),
            hdot=np.zeros(p),
            rho=rng.uniform(0.05, 3.0, p),
            epsilon=0.05,
        )
        assert time_scale_map(params, 1.0) == horizon(params)
        grid = np.linspace(0.0, 1.0, 4 * p + 1)
        t = time_scale_map(params, grid)
        assert np.all(np.diff(t) >= 0.0)
        mids = (np.arange(p) + 0.5) / p
        slopes = (
            time_scale_map(params, mids + fd_step)
            - time_scale_map(params, mids - fd_step)
        ) / (2.0 * fd_step)
        assert np.allclose(slopes, params.rho, atol=1e-8)
    print("criterion 6: 1000 duration draws, exact endpoint + slopes ok")


def test_criterion_7_penalty_branch_arithmetic():
    cfg = PenaltyConfig()
    # smooth branch: T=1 flight that hits its goal dead on
    sc = Scenario(
        w0=(0.0, 0.0, 0.0),
        w1=(1.0, 0.0, 0.0),
        v_xy=1.0,
        hdot_max=1.0,
        safety_radius=0.2,
        obstacles=(),
        p=2,
    )
    params = ControlParams(
        theta=[0.0, 0.0], hdot=[0.0, 0.0], rho=[1.0, 1.0], epsilon=0.1
    )
    traj = integrate_forward(sc, params)
    smooth = penalty_cost(sc, params, traj, cfg, delta=50.0)
    assert smooth == pytest.approx(6.0, abs=1e-12)

    # collapsed epsilon, feasible: plain flight time
    params_low = params.copy()
    params_low.epsilon = 1e-9
    assert penalty_cost(sc, params_low, traj, cfg, 50.0) == 1.0

    # collapsed epsilon, infeasible: infinite
    sc_far = Scenario(
        w0=(0.0, 0.0, 0.0),
        w1=(1.0, 1.0, 1.0),
        v_xy=1.0,
        hdot_max=1.0,
        safety_radius=0.2,
        obstacles=(),
        p=2,
    )
    traj_far = integrate_forward(sc_far, params_low)
    assert penalty_cost(sc_far, params_low, traj_far, cfg, 50.0) == math.inf

    # stationary epsilon against a dense 1-D grid search
    for big_l, delta in [(1e-4, 50.0), (2e-3, 10.0)]:
        eps_grid = np.geomspace(1e-7, 1.0, 300001)
        profile = big_l / eps_grid + delta * eps_grid
        eps_best = eps_grid[int(np.argmin(profile))]
        closed = stationary_epsilon(big_l, cfg, delta)
        assert closed == pytest.approx(math.sqrt(big_l / delta), rel=1e-12)
        assert closed == pytest.approx(eps_best, rel=1e-3)
    print("criterion 7: branch arithmetic and stationary epsilon ok")


def test_criterion_8_obstacle_free_flight_is_straight():
    base = preset("example1")
    sc = base.scenario
    sc_free = Scenario(
        w0=sc.w0,
        w1=sc.w1,
        v_xy=sc.v_xy,
        hdot_max=sc.hdot_max,
        safety_radius=sc.safety_radius,
        obstacles=(),
        p=sc.p,
        t_hint=sc.t_hint,
    )
    report = solve(sc_free, base.penalty)
    traj = integrate_forward(sc_free, report.params)
    # cross-track distance from the planar diagonal x = y
    cross = np.abs(traj.states[:, 0] - traj.states[:, 1]) / RT2
    print(
        f"criterion 8: T={report.horizon:.6f} "
        f"max_cross_track={cross.max():.2e} converged={report.converged}"
    )
    assert report.converged
    assert report.horizon <= 1.43
    assert cross.max() <= 0.02
