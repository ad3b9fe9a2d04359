"""Exact penalty functional for the constrained time-optimal problem.

The constraint violation ``L`` aggregates the squared clearance
deficits along the flight plus the squared terminal miss.  The running
part is a measure-weighted quadrature: every sample owns a slice of the
physical-time axis, and its weight against an obstacle is how much of
that slice lies inside the obstacle's time domain.  Away from domain
boundaries this is the ordinary trapezoid rule with segment durations
folded in; at a boundary the weight tapers linearly instead of
switching, which keeps ``L`` continuous in the durations even though
the integrand switches on and off mid-flight.

The penalty cost is flight time plus ``eps^-alpha * L`` plus
``delta * eps^beta``, with the smoothing parameter eps itself a
decision variable.  Driving delta up forces eps down, and for large
enough delta the minimizer is exactly feasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Scenario
from .parametrization import ControlParams, horizon, time_scale_map
from .simulate import Trajectory


@dataclass(frozen=True)
class PenaltyConfig:
    alpha: float = 1.0
    beta: float = 1.0
    delta_schedule: tuple = (10.0, 1e2, 1e3, 1e4, 1e5, 1e6)
    eps_bar: float = 0.1
    eps_min: float = 1e-9
    violation_tol: float = 1e-6

    def __post_init__(self) -> None:
        if not 0.0 < self.beta <= self.alpha:
            raise ValueError("penalty exponents need 0 < beta <= alpha")
        sched = tuple(float(d) for d in self.delta_schedule)
        object.__setattr__(self, "delta_schedule", sched)
        if not sched or any(d <= 0.0 for d in sched):
            raise ValueError("delta schedule must be nonempty and positive")
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("delta schedule must be strictly increasing")
        if not 0.0 < self.eps_min < self.eps_bar:
            raise ValueError("need 0 < eps_min < eps_bar")
        if self.violation_tol <= 0.0:
            raise ValueError("violation tolerance must be positive")


def quadrature_weights(params: ControlParams, m: int) -> np.ndarray:
    """Per-sample trapezoid weights with segment durations folded in.

    Sample n inside segment k weighs ``rho_k * h`` (h the normalized
    step), segment-boundary samples half of that from each side.
    """
    p = params.p
    h = 1.0 / (p * m)
    template = np.full(m + 1, h)
    template[0] = template[-1] = 0.5 * h
    w = np.zeros(p * m + 1)
    for k in range(p):
        w[k * m : (k + 1) * m + 1] += params.rho[k] * template
    return w


def deficits(traj: Trajectory) -> np.ndarray:
    """Clearance deficits max(margin_sq_required - dist^2, 0) per
    obstacle and sample; zero where the obstacle is out of domain."""
    c = traj.clearance_sq
    return np.where(np.isnan(c), 0.0, np.maximum(-c, 0.0))


def sample_bounds(n_samples: int) -> np.ndarray:
    """Normalized-clock boundaries of the slice each sample owns.

    Sample n owns [bounds[n], bounds[n+1]]: half a grid step to either
    side, clipped to [0, 1].  The slices tile the whole flight.
    """
    n = n_samples - 1
    h = 1.0 / n
    return np.concatenate(([0.0], (np.arange(n) + 0.5) * h, [1.0]))


def active_measures(
    scenario: Scenario, params: ControlParams, n_samples: int
) -> np.ndarray:
    """Per-obstacle, per-sample quadrature weights, shape (n_obs, n).

    The weight of sample n against obstacle i is the amount of physical
    time the sample's slice of the grid spends inside the obstacle's
    domain.  For an obstacle active over the whole flight this equals
    the trapezoid weights of :func:`quadrature_weights`; near a domain
    boundary it tapers linearly to zero as the slice slides out, so the
    weighted quadrature stays continuous in the segment durations.  The
    taper is deliberately linear rather than smoothed: a taper whose
    slope vanished at zero overlap would also zero the gradient of a
    clearance violation parked inside it, leaving the optimizer blind
    to a real dip hiding just past an activation time.
    """
    tb = time_scale_map(params, sample_bounds(n_samples))
    out = np.empty((len(scenario.obstacles), n_samples))
    for i, obs in enumerate(scenario.obstacles):
        lo, hi = obs.domain
        out[i] = np.maximum(
            np.minimum(tb[1:], hi) - np.maximum(tb[:-1], lo), 0.0
        )
    return out


def measured_deficits(scenario: Scenario, traj: Trajectory) -> np.ndarray:
    """Clearance deficits with obstacle times clamped into the domain.

    Shape (n_obs, n_samples).  Unlike :func:`deficits` this is defined
    (and continuous) across domain boundaries; it is meant to be paired
    with :func:`active_measures`, whose weights vanish wherever the
    clamped value has no meaning.
    """
    out = np.empty((len(scenario.obstacles), traj.s.size))
    for i, obs in enumerate(scenario.obstacles):
        d = traj.states - obs.position_clamped(traj.t)
        dist_sq = np.einsum("ij,ij->i", d, d)
        out[i] = np.maximum(scenario.clearance_margin_sq(obs) - dist_sq, 0.0)
    return out


def terminal_miss(scenario: Scenario, traj: Trajectory) -> float:
    """Distance from the final state to the goal, in meters."""
    d = traj.states[-1] - scenario.w1
    return float(math.sqrt(d @ d))


def violation(
    scenario: Scenario, params: ControlParams, traj: Trajectory
) -> float:
    """Aggregate constraint violation L >= 0.

    Measure-weighted quadrature of the squared clearance deficits over
    the flight plus the squared terminal miss; zero exactly when every
    weighted clearance holds and the goal is hit.
    """
    running = 0.0
    if scenario.obstacles:
        g = measured_deficits(scenario, traj)
        w = active_measures(scenario, params, traj.s.size)
        running = float(np.sum(w * g * g))
    d = traj.states[-1] - scenario.w1
    return running + float(d @ d)


def penalty_cost(
    scenario: Scenario,
    params: ControlParams,
    traj: Trajectory,
    cfg: PenaltyConfig,
    delta: float,
) -> float:
    """Exact penalty value; +inf when eps has collapsed while still
    infeasible.

    eps at or below ``eps_min`` counts as zero, violations at or below
    ``violation_tol`` count as feasible.
    """
    big_l = violation(scenario, params, traj)
    t_total = horizon(params)
    eps = params.epsilon
    if eps <= cfg.eps_min:
        if big_l <= cfg.violation_tol:
            return t_total
        return math.inf
    return t_total + eps ** (-cfg.alpha) * big_l + delta * eps**cfg.beta


def stationary_epsilon(big_l: float, cfg: PenaltyConfig, delta: float) -> float:
    """Unconstrained minimizer of eps^-alpha L + delta eps^beta over
    eps > 0 (clipping to [eps_min, eps_bar] is the caller's business)."""
    if big_l <= 0.0:
        return cfg.eps_min
    return (cfg.alpha * big_l / (delta * cfg.beta)) ** (
        1.0 / (cfg.alpha + cfg.beta)
    )
