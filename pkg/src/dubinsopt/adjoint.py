"""Co-state integration and analytic gradients of the penalty cost.

The co-state is the exact reverse-mode derivative of the discretized
cost, not a discretization of the continuous adjoint equation: the
backward recursion mirrors the forward quadrature term by term, so the
analytic gradient matches central finite differences to near machine
precision instead of only to integration order.

Two co-states are carried.  ``lam`` propagates sensitivity through the
vehicle position.  ``mu`` propagates sensitivity through the physical
clock: obstacle positions depend on t(s), which depends on the segment
durations, so moving obstacles feed the duration gradient through this
channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ControlValue, Scenario
from .parametrization import ControlParams, pack, time_scale_map, unpack
from .penalty import (
    PenaltyConfig,
    active_measures,
    measured_deficits,
    penalty_cost,
    sample_bounds,
    violation,
)
from .simulate import IntegratorConfig, Trajectory, integrate_forward


@dataclass(eq=False)
class CostateTrajectory:
    """Co-states on the forward sample grid.

    ``lam[n]`` is the derivative of the cost with respect to a
    perturbation of the state arriving at sample n+1 (for n < len-1);
    ``lam[-1]`` equals the terminal condition 2 eps^-alpha (H(1) - w1).
    ``mu`` is the matching clock co-state with mu[-1] = 0.
    """

    s: np.ndarray
    lam: np.ndarray
    mu: np.ndarray


@dataclass(eq=False)
class Gradient:
    """Penalty-cost gradient in the decision variables."""

    d_theta: np.ndarray
    d_hdot: np.ndarray
    d_rho: np.ndarray
    d_epsilon: float

    def to_vector(self, pinned_theta0: bool = False) -> np.ndarray:
        d_theta = self.d_theta[1:] if pinned_theta0 else self.d_theta
        return np.concatenate((d_theta, self.d_hdot, self.d_rho, [self.d_epsilon]))


def hamiltonian_h0(
    s: float,
    state: np.ndarray,
    u: ControlValue,
    rho_k: float,
    lam: np.ndarray,
    scenario: Scenario,
    params: ControlParams,
    cfg: PenaltyConfig,
) -> float:
    """Running Hamiltonian on the normalized clock.

    Co-state dotted with the rescaled dynamics plus the weighted
    clearance-deficit running cost of the penalty functional.
    """
    v = scenario.v_xy
    rhs = rho_k * np.array([v * math.cos(u.theta), v * math.sin(u.theta), u.hdot])
    value = float(np.asarray(lam, dtype=float) @ rhs)
    t = time_scale_map(params, float(s))
    weight = params.epsilon ** (-cfg.alpha) if params.epsilon > 0.0 else 0.0
    running = 0.0
    for obs in scenario.obstacles:
        pos = obs.position(t)
        if pos is None:
            continue
        d = np.asarray(state, dtype=float) - pos
        deficit = max(scenario.clearance_margin_sq(obs) - float(d @ d), 0.0)
        running += deficit * deficit
    return value + weight * rho_k * running


def _sample_sensitivities(
    scenario: Scenario,
    params: ControlParams,
    traj: Trajectory,
    cfg: PenaltyConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Direct derivatives of the weighted running cost at each sample.

    Returns (q, r): q[n] is d(eps^-alpha * L_running)/dH_n, r[n] the
    same with respect to the physical time t_n.
    """
    weight = params.epsilon ** (-cfg.alpha)
    q = np.zeros((traj.s.size, 3))
    r = np.zeros(traj.s.size)
    if not scenario.obstacles:
        return q, r
    g_all = measured_deficits(scenario, traj)
    w_all = active_measures(scenario, params, traj.s.size)
    for i, obs in enumerate(scenario.obstacles):
        coef = 4.0 * weight * w_all[i] * g_all[i]
        if not coef.any():
            continue
        d = traj.states - obs.position_clamped(traj.t)
        vel = obs.velocity_clamped(traj.t)
        q -= coef[:, None] * d
        r += coef * np.einsum("ij,ij->i", d, vel)
    return q, r


def integrate_costate(
    scenario: Scenario,
    params: ControlParams,
    traj: Trajectory,
    cfg: PenaltyConfig,
) -> CostateTrajectory:
    """Backward sweep accumulating the reverse-mode co-states."""
    q, r = _sample_sensitivities(scenario, params, traj, cfg)
    weight = params.epsilon ** (-cfg.alpha)
    lam_term = 2.0 * weight * (traj.states[-1] - scenario.w1)
    # Exclusive suffix sums: lam[n] = lam_term + sum_{m>n} q[m], built
    # from a reversed cumulative sum so that the terminal entries hit
    # their boundary conditions exactly rather than to rounding.
    suffix_q = np.cumsum(q[::-1], axis=0)[::-1]
    lam = lam_term + np.concatenate((suffix_q[1:], np.zeros((1, 3))))
    suffix_r = np.cumsum(r[::-1])[::-1]
    mu = np.concatenate((suffix_r[1:], [0.0]))
    return CostateTrajectory(s=traj.s.copy(), lam=lam, mu=mu)


def gradient(
    scenario: Scenario,
    params: ControlParams,
    traj: Trajectory,
    costate: CostateTrajectory,
    cfg: PenaltyConfig,
    delta: float,
) -> Gradient:
    """Analytic gradient of the smooth penalty branch (eps > 0)."""
    p = params.p
    m = traj.steps_per_segment
    h = 1.0 / (p * m)
    v = scenario.v_xy
    eps = params.epsilon
    weight = eps ** (-cfg.alpha)

    # Per-step co-state sums per segment; step n uses lam[n].
    lam_seg = costate.lam[:-1].reshape(p, m, 3).sum(axis=1)
    mu_seg = costate.mu[:-1].reshape(p, m).sum(axis=1)

    cos_t = np.cos(params.theta)
    sin_t = np.sin(params.theta)
    f = np.stack((v * cos_t, v * sin_t, params.hdot), axis=1)
    df_dtheta = np.stack((-v * sin_t, v * cos_t, np.zeros(p)), axis=1)

    d_theta = h * params.rho * np.einsum("kj,kj->k", lam_seg, df_dtheta)
    d_hdot = h * params.rho * lam_seg[:, 2]

    # Derivative of the active-measure weights in the durations.  Each
    # weight is a clipped difference of time-map values at the sample
    # slice boundaries, and d t(s) / d rho_k = clip(s p - k, 0, 1) / p;
    # the indicators pick out which boundary of the clipped overlap is
    # the moving one.  For always-active obstacles this reduces to the
    # per-segment trapezoid of the squared deficits.
    bounds = sample_bounds(traj.s.size)
    tb = time_scale_map(params, bounds)
    c_mat = np.clip(bounds[:, None] * p - np.arange(p)[None, :], 0.0, 1.0) / p
    d_meas = np.zeros(p)
    if scenario.obstacles:
        g_all = measured_deficits(scenario, traj)
        w_all = active_measures(scenario, params, traj.s.size)
        for i, obs in enumerate(scenario.obstacles):
            lo, hi = obs.domain
            g_sq = g_all[i] ** 2 * (w_all[i] > 0.0)
            d_meas += (g_sq * (tb[1:] < hi)) @ c_mat[1:]
            d_meas -= (g_sq * (tb[:-1] > lo)) @ c_mat[:-1]

    d_rho = (
        1.0 / p
        + weight * d_meas
        + h * np.einsum("kj,kj->k", lam_seg, f)
        + h * mu_seg
    )

    big_l = violation(scenario, params, traj)
    d_eps = -cfg.alpha * eps ** (-cfg.alpha - 1.0) * big_l
    d_eps += delta * cfg.beta * eps ** (cfg.beta - 1.0)

    return Gradient(
        d_theta=d_theta, d_hdot=d_hdot, d_rho=d_rho, d_epsilon=float(d_eps)
    )


def central_difference(fun, x: np.ndarray, step) -> np.ndarray:
    """Central finite differences of a scalar function, one coordinate
    at a time.  ``step`` is a scalar or a per-coordinate array."""
    x = np.asarray(x, dtype=float)
    steps = np.broadcast_to(np.asarray(step, dtype=float), x.shape)
    out = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = steps[i]
        out[i] = (fun(x + e) - fun(x - e)) / (2.0 * steps[i])
    return out


def fd_gradient_oracle(
    scenario: Scenario,
    params: ControlParams,
    cfg: PenaltyConfig,
    delta: float,
    step: float = 1e-6,
    integrator_cfg: IntegratorConfig | None = None,
) -> Gradient:
    """Finite-difference reference gradient of the penalty cost.

    Independent of the co-state machinery: it re-runs the forward
    model for central differences in every decision coordinate.  Used
    as ground truth for the analytic gradient.
    """
    p = params.p

    def fun(x: np.ndarray) -> float:
        trial = unpack(x, p, None)
        traj = integrate_forward(scenario, trial, integrator_cfg)
        return penalty_cost(scenario, trial, traj, cfg, delta)

    x0 = pack(params)
    # The cost carries eps to negative powers, so the eps step must be
    # relative to eps itself or the difference quotient's truncation
    # error scales like (step / eps)^2.
    steps = np.full(x0.size, step)
    if params.epsilon > 0.0:
        steps[-1] = step * params.epsilon
    g = central_difference(fun, x0, steps)
    return Gradient(
        d_theta=g[:p],
        d_hdot=g[p : 2 * p],
        d_rho=g[2 * p : 3 * p],
        d_epsilon=float(g[-1]),
    )
