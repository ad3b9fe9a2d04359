"""Tests for the analytic penalty gradient against finite differences."""

import math

import numpy as np
import pytest

from dubinsopt.adjoint import (
    Gradient,
    central_difference,
    fd_gradient_oracle,
    gradient,
    hamiltonian_h0,
    integrate_costate,
)
from dubinsopt.model import (
    ControlValue,
    CurveKind,
    CurvePiece,
    ObstacleTrajectory,
    Scenario,
)
from dubinsopt.parametrization import ControlParams
from dubinsopt.penalty import PenaltyConfig, stationary_epsilon, violation
from dubinsopt.scenarios import preset
from dubinsopt.simulate import integrate_forward

RT2 = math.sqrt(2.0)


def _parked_obstacle(point=(0.5, 0.5, 0.0), t_hi=10.0):
    piece = CurvePiece(
        kind=CurveKind.CONSTANT,
        t_lo=0.0,
        t_hi=t_hi,
        coefficients={"point": point},
    )
    return ObstacleTrajectory(pieces=(piece,), safety_radius=0.1)


def _diagonal_intruder(t_lo=0.1, t_hi=3.4):
    piece = CurvePiece(
        kind=CurveKind.LINE,
        t_lo=t_lo,
        t_hi=t_hi,
        coefficients={"origin": (0.0, 0.0, 0.0), "rate": (1.0, 1.0, 1.0)},
    )
    return ObstacleTrajectory(pieces=(piece,), safety_radius=0.1)


def _scenario(obstacles=(), p=4, theta0=None):
    return Scenario(
        w0=(0.0, 0.0, 0.0),
        w1=(1.0, 1.0, 1.0),
        v_xy=1.0,
        hdot_max=1.0,
        safety_radius=0.2,
        obstacles=obstacles,
        p=p,
        theta0=theta0,
    )


def _straight_flight(p=4, epsilon=0.05):
    return ControlParams(
        theta=np.full(p, math.pi / 4.0),
        hdot=np.full(p, 1.0 / RT2),
        rho=np.full(p, RT2),
        epsilon=epsilon,
    )


def _max_rel_err(analytic: Gradient, reference: Gradient) -> float:
    a = analytic.to_vector()
    r = reference.to_vector()
    return float(np.max(np.abs(a - r) / np.maximum(np.abs(r), 1e-6)))


# ---------------------------------------------------------------------------
# finite-difference helper


def test_central_difference_exact_on_quadratics():
    def fun(x):
        return float(x @ x - 3.0 * x[0])

    x = np.array([0.4, -1.3, 2.2])
    expected = 2.0 * x - np.array([3.0, 0.0, 0.0])
    for step in (1e-1, 1e-3, 1e-6):
        got = central_difference(fun, x, step)
        assert np.allclose(got, expected, atol=1e-7)


def test_central_difference_per_coordinate_steps():
    # Cubic term: the truncation error of the central quotient is
    # exactly step^2 per coordinate, so per-coordinate steps show up
    # directly in the per-coordinate errors.
    def fun(x):
        return float(np.sum(x**3))

    x = np.array([1.0, 1.0])
    steps = np.array([1e-2, 1e-4])
    got = central_difference(fun, x, steps)
    err = np.abs(got - 3.0 * x**2)
    assert err[0] == pytest.approx(1e-4, rel=1e-4)
    assert err[1] == pytest.approx(1e-8, rel=1e-2)


# ---------------------------------------------------------------------------
# running Hamiltonian hand cases


def test_hamiltonian_costate_dot_dynamics_x():
    sc = _scenario()
    params = _straight_flight()
    u = ControlValue(theta=0.0, hdot=0.3)
    val = hamiltonian_h0(
        0.1, np.zeros(3), u, 2.0, np.array([1.0, 0.0, 0.0]), sc, params,
        PenaltyConfig(),
    )
    assert val == pytest.approx(2.0, abs=1e-15)


def test_hamiltonian_costate_dot_dynamics_z():
    sc = _scenario()
    params = _straight_flight()
    u = ControlValue(theta=1.1, hdot=0.7)
    val = hamiltonian_h0(
        0.1, np.zeros(3), u, 1.0, np.array([0.0, 0.0, 1.0]), sc, params,
        PenaltyConfig(),
    )
    assert val == pytest.approx(0.7, abs=1e-15)


def test_hamiltonian_running_cost_at_obstacle_center():
    # Sitting exactly on the intruder: deficit = 0.2^2, squared is
    # 1.6e-3, weighted by eps^-1 rho = 1.
    sc = _scenario(obstacles=(_parked_obstacle(),))
    params = _straight_flight(epsilon=1.0)
    u = ControlValue(theta=0.0, hdot=0.0)
    val = hamiltonian_h0(
        0.25, np.array([0.5, 0.5, 0.0]), u, 1.0, np.zeros(3), sc, params,
        PenaltyConfig(),
    )
    assert val == pytest.approx(1.6e-3, abs=1e-15)


def test_hamiltonian_zero_when_clear_and_costate_free():
    sc = _scenario(obstacles=(_parked_obstacle(),))
    params = _straight_flight(epsilon=0.01)
    u = ControlValue(theta=0.4, hdot=-0.2)
    val = hamiltonian_h0(
        0.9, np.array([3.0, 3.0, 0.0]), u, 1.5, np.zeros(3), sc, params,
        PenaltyConfig(),
    )
    assert val == 0.0


# ---------------------------------------------------------------------------
# co-state structure


def test_costate_terminal_conditions():
    sc = _scenario(obstacles=(_diagonal_intruder(),))
    params = ControlParams(
        theta=[0.2, 0.9, 1.4, 0.4],
        hdot=[0.5, -0.2, 0.8, 0.1],
        rho=[1.0, 0.7, 1.3, 0.9],
        epsilon=0.02,
    )
    cfg = PenaltyConfig()
    traj = integrate_forward(sc, params)
    co = integrate_costate(sc, params, traj, cfg)
    lam_expected = (
        2.0 * params.epsilon ** (-cfg.alpha) * (traj.states[-1] - sc.w1)
    )
    assert np.allclose(co.lam[-1], lam_expected, atol=1e-12)
    assert co.mu[-1] == 0.0


def test_costate_constant_outside_active_window():
    # The intruder only exists for t in [0.1, 0.3]; the position
    # co-state must be flat wherever no weighted deficit pulls on it
    # (before the window it still carries the window's influence, but
    # sample-to-sample it only changes inside).
    sc = _scenario(obstacles=(_diagonal_intruder(t_lo=0.1, t_hi=0.3),))
    params = _straight_flight()
    cfg = PenaltyConfig()
    traj = integrate_forward(sc, params)
    co = integrate_costate(sc, params, traj, cfg)
    steps = np.diff(co.lam, axis=0)
    moved = np.any(steps != 0.0, axis=1)
    # diff[n] reflects the pull at sample n+1
    inside = (traj.t[1:] >= 0.05) & (traj.t[1:] <= 0.35)
    assert np.any(moved), "expected the window to bend the co-state"
    assert not np.any(moved & ~inside)


def test_costate_flat_without_obstacles():
    sc = _scenario()
    params = _straight_flight()
    traj = integrate_forward(sc, params)
    co = integrate_costate(sc, params, traj, PenaltyConfig())
    assert np.all(co.lam == co.lam[-1])
    assert np.all(co.mu == 0.0)


# ---------------------------------------------------------------------------
# analytic gradient closed-form checks


def test_gradient_obstacle_free_exact_arrival():
    # Clean arrival, no obstacles: the only cost left is the flight
    # time sum(rho)/p and the epsilon penalty delta * eps.
    sc = _scenario()
    params = _straight_flight()
    cfg = PenaltyConfig()
    delta = 50.0
    traj = integrate_forward(sc, params)
    co = integrate_costate(sc, params, traj, cfg)
    g = gradient(sc, params, traj, co, cfg, delta)
    assert np.allclose(g.d_rho, 1.0 / params.p, atol=1e-10)
    assert np.allclose(g.d_theta, 0.0, atol=1e-10)
    assert np.allclose(g.d_hdot, 0.0, atol=1e-10)
    assert g.d_epsilon == pytest.approx(delta * cfg.beta, abs=1e-9)


def test_gradient_epsilon_sign_change_at_stationary_point():
    # With alpha = beta = 1 the epsilon direction flips sign exactly at
    # sqrt(L / delta).
    sc = _scenario(obstacles=(_diagonal_intruder(),), p=10)
    cfg = PenaltyConfig()
    delta = 50.0
    base = ControlParams(
        theta=np.full(10, math.pi / 4.0),
        hdot=np.full(10, 1.0 / RT2),
        rho=np.full(10, RT2),
        epsilon=0.05,
    )
    traj = integrate_forward(sc, base)
    big_l = violation(sc, base, traj)
    assert big_l > 0.0
    eps_star = stationary_epsilon(big_l, cfg, delta)
    assert eps_star == pytest.approx(math.sqrt(big_l / delta), rel=1e-12)

    def d_eps_at(eps):
        p = base.copy()
        p.epsilon = eps
        t = integrate_forward(sc, p)
        co = integrate_costate(sc, p, t, cfg)
        return gradient(sc, p, t, co, cfg, delta).d_epsilon

    assert d_eps_at(0.3 * eps_star) < 0.0
    assert d_eps_at(0.7 * eps_star) < 0.0
    assert abs(d_eps_at(eps_star)) <= 1e-9 * delta
    assert d_eps_at(1.5 * eps_star) > 0.0
    assert d_eps_at(3.0 * eps_star) > 0.0


def test_gradient_matches_fd_on_fixed_asymmetric_case():
    sc = _scenario(
        obstacles=(_parked_obstacle(), _diagonal_intruder(0.2, 0.9))
    )
    rng = np.random.default_rng(5)
    params = ControlParams(
        theta=rng.uniform(-1.2, 1.2, 4),
        hdot=rng.uniform(-0.9, 0.9, 4),
        rho=rng.uniform(0.5, 1.2, 4),
        epsilon=0.02,
    )
    cfg = PenaltyConfig()
    delta = 100.0
    traj = integrate_forward(sc, params)
    co = integrate_costate(sc, params, traj, cfg)
    g = gradient(sc, params, traj, co, cfg, delta)
    fd = fd_gradient_oracle(sc, params, cfg, delta, step=1e-6)
    assert _max_rel_err(g, fd) <= 1e-6


def test_fd_error_shrinks_with_step():
    # Central differences carry O(step^2) truncation error, so halving
    # the step against the analytic gradient must tighten agreement.
    sc = _scenario(
        obstacles=(_parked_obstacle(), _diagonal_intruder(0.2, 0.9))
    )
    rng = np.random.default_rng(5)
    params = ControlParams(
        theta=rng.uniform(-1.2, 1.2, 4),
        hdot=rng.uniform(-0.9, 0.9, 4),
        rho=rng.uniform(0.5, 1.2, 4),
        epsilon=0.02,
    )
    cfg = PenaltyConfig()
    delta = 100.0
    traj = integrate_forward(sc, params)
    co = integrate_costate(sc, params, traj, cfg)
    g = gradient(sc, params, traj, co, cfg, delta)
    errs = [
        _max_rel_err(g, fd_gradient_oracle(sc, params, cfg, delta, step=s))
        for s in (3e-2, 1e-2, 3e-3, 1e-3)
    ]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] <= 5e-6


def _random_params(rng, scenario):
    p = scenario.p
    return ControlParams(
        theta=rng.uniform(-math.pi, math.pi, p),
        hdot=rng.uniform(-scenario.hdot_max, scenario.hdot_max, p),
        rho=rng.uniform(0.3, 2.0, p) * scenario.t_hint / 1.0,
        epsilon=float(np.exp(rng.uniform(math.log(1e-3), math.log(0.1)))),
    )


@pytest.mark.parametrize("preset_name", ["example1", "example2", "example3"])
def test_gradient_matches_fd_random_draws_on_presets(preset_name):
    ps = preset(preset_name)
    sc = ps.scenario
    cfg = ps.penalty
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(20):
        params = _random_params(rng, sc)
        delta = float(rng.choice(cfg.delta_schedule))
        traj = integrate_forward(sc, params)
        co = integrate_costate(sc, params, traj, cfg)
        g = gradient(sc, params, traj, co, cfg, delta)
        fd = fd_gradient_oracle(sc, params, cfg, delta, step=1e-6)
        worst = max(worst, _max_rel_err(g, fd))
    assert worst <= 1e-3


def test_gradient_matches_fd_with_pinned_initial_heading():
    # A pinned first heading changes the solver's packing, not the
    # gradient arithmetic; both vector layouts must agree with FD.
    sc = _scenario(obstacles=(_parked_obstacle(),), theta0=0.7)
    rng = np.random.default_rng(7)
    for _ in range(10):
        params = _random_params(rng, sc)
        params.theta[0] = sc.theta0
        cfg = PenaltyConfig()
        traj = integrate_forward(sc, params)
        co = integrate_costate(sc, params, traj, cfg)
        g = gradient(sc, params, traj, co, cfg, 100.0)
        fd = fd_gradient_oracle(sc, params, cfg, 100.0, step=1e-6)
        assert _max_rel_err(g, fd) <= 1e-3
        assert np.array_equal(
            g.to_vector(pinned_theta0=True), g.to_vector()[1:]
        )


def test_gradient_to_vector_layout():
    g = Gradient(
        d_theta=np.array([1.0, 2.0]),
        d_hdot=np.array([3.0, 4.0]),
        d_rho=np.array([5.0, 6.0]),
        d_epsilon=7.0,
    )
    assert np.array_equal(
        g.to_vector(), [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]
    )
    assert np.array_equal(
        g.to_vector(pinned_theta0=True), [2.0, 3.0, 4.0, 5.0, 6.0, 7.0]
    )
