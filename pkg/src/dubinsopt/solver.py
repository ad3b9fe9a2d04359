"""Inner smooth solver and outer penalty-escalation loop.

The inner solver is a projected L-BFGS with backtracking line search on
the box constraints (climb rate, segment durations, eps).  It minimizes
the smooth penalty branch ``T + eps^-alpha L + delta eps^beta`` for all
eps in [eps_min, eps_bar]: the exact penalty's discounted branch at
eps = eps_min is a limit certificate, not an operating region, and
letting the line search see the discount would let it trade terminal
accuracy for time inside the violation tolerance.

The outer loop walks the delta schedule with warm starts and runs a
small multistart over perturbed initial guesses; straight-line initial
paths sit on symmetry saddles when an obstacle rides the same line, so
the perturbations are what break ties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Scenario, wrap_angle
from .parametrization import ControlParams, horizon, pack, unpack
from .penalty import PenaltyConfig, terminal_miss, violation
from .adjoint import gradient, integrate_costate
from .simulate import (
    IntegratorConfig,
    NonFiniteStateError,
    integrate_forward,
    min_clearance_m,
)


@dataclass(frozen=True)
class SolverConfig:
    max_inner_iters: int = 500
    grad_tol: float = 1e-6
    ftol_rel: float = 1e-10
    ls_backtrack: float = 0.5
    ls_sufficient_decrease: float = 1e-4
    lbfgs_memory: int = 10
    multistart: int = 8
    rng_seed: int = 0
    rho_min: float = 1e-6
    clearance_slack: float = 8e-4
    stage_repeats: int = 3

    def __post_init__(self) -> None:
        if not 0.0 < self.ls_backtrack < 1.0:
            raise ValueError("backtracking factor must be in (0, 1)")
        if not 0.0 < self.ls_sufficient_decrease < 1.0:
            raise ValueError("sufficient decrease must be in (0, 1)")
        if self.multistart < 1 or self.max_inner_iters < 1:
            raise ValueError("multistart and iteration budget must be >= 1")


@dataclass(eq=False)
class InnerResult:
    """Outcome of one smooth minimization at fixed delta.

    ``best_feasible`` is the lowest-horizon iterate visited during the
    minimization that already satisfies the problem's feasibility
    tolerances (violation, clearance slack, kinematic bound), kept
    separately because the penalty descent path routinely passes
    through such points on its way to over-satisfying the constraints.
    """

    params: ControlParams
    cost: float
    grad_norm: float
    iterations: int
    converged: bool
    stalled: bool
    best_feasible: ControlParams | None = None
    best_feasible_horizon: float = math.inf


@dataclass(eq=False)
class SolveReport:
    """Outcome of a full solve across the delta schedule."""

    params: ControlParams
    horizon: float
    violation: float
    terminal_miss: float
    delta_used: float
    inner_iterations: int
    converged: bool
    history: tuple
    start_index: int
    seed: int


class _Evaluator:
    """Caches the forward pass between cost and gradient calls and
    handles packing, bounds, and the smooth penalty branch.

    The internal optimization variable for eps is log(eps): near the
    stationary eps the curvature in eps itself scales like L / eps^3
    and dwarfs every other direction, while in log space it is L / eps,
    the same order as the rest of the problem.
    """

    def __init__(
        self,
        scenario: Scenario,
        pcfg: PenaltyConfig,
        icfg: IntegratorConfig,
        rho_min: float,
    ) -> None:
        self.scenario = scenario
        self.pcfg = pcfg
        self.icfg = icfg
        self.pinned = scenario.theta0 is not None
        p = scenario.p
        n_theta = p - 1 if self.pinned else p
        lo = np.concatenate(
            (
                np.full(n_theta, -np.inf),
                np.full(p, -scenario.hdot_max),
                np.full(p, rho_min),
                [math.log(pcfg.eps_min)],
            )
        )
        hi = np.concatenate(
            (
                np.full(n_theta, np.inf),
                np.full(p, scenario.hdot_max),
                np.full(p, np.inf),
                [math.log(pcfg.eps_bar)],
            )
        )
        self.lo = lo
        self.hi = hi
        self.n_theta = n_theta
        self.rho_block = slice(n_theta + p, n_theta + 2 * p)
        self._cache_key = None
        self._cache = None

    def pack(self, params: ControlParams) -> np.ndarray:
        x = pack(params, self.pinned)
        x[-1] = math.log(max(params.epsilon, self.pcfg.eps_min))
        return x

    def unpack(self, x: np.ndarray) -> ControlParams:
        theta0 = self.scenario.theta0 if self.pinned else None
        x = x.copy()
        x[-1] = math.exp(x[-1])
        return unpack(x, self.scenario.p, theta0)

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)

    def _forward(self, x: np.ndarray):
        key = x.tobytes()
        if key != self._cache_key:
            params = self.unpack(x)
            try:
                traj = integrate_forward(self.scenario, params, self.icfg)
                big_l = violation(self.scenario, params, traj)
            except NonFiniteStateError:
                traj = None
                big_l = math.inf
            self._cache_key = key
            self._cache = (params, traj, big_l)
        return self._cache

    def cost(self, x: np.ndarray, delta: float) -> float:
        params, traj, big_l = self._forward(x)
        if traj is None or not math.isfinite(big_l):
            return math.inf
        eps = params.epsilon
        return (
            horizon(params)
            + eps ** (-self.pcfg.alpha) * big_l
            + delta * eps**self.pcfg.beta
        )

    def grad(self, x: np.ndarray, delta: float) -> np.ndarray:
        params, traj, _ = self._forward(x)
        costate = integrate_costate(self.scenario, params, traj, self.pcfg)
        g = gradient(self.scenario, params, traj, costate, self.pcfg, delta)
        vec = g.to_vector(self.pinned)
        vec[-1] *= params.epsilon  # chain rule for the log coordinate
        return vec


def _lbfgs_direction(g: np.ndarray, memory: list) -> np.ndarray:
    """Two-loop recursion; returns the quasi-Newton descent direction."""
    q = g.copy()
    alphas = []
    for s, y, inv_sy in reversed(memory):
        a = inv_sy * (s @ q)
        alphas.append(a)
        q -= a * y
    s, y, _ = memory[-1]
    q *= (s @ y) / (y @ y)
    for (s, y, inv_sy), a in zip(memory, reversed(alphas)):
        b = inv_sy * (y @ q)
        q += (a - b) * s
    return -q


def _backtrack(
    ev: _Evaluator,
    x: np.ndarray,
    f: float,
    g: np.ndarray,
    d: np.ndarray,
    delta: float,
    cfg: SolverConfig,
    visit=None,
) -> tuple | None:
    """Armijo backtracking along ``d`` against the projected step.

    Returns ``(x_new, f_new)`` or None when no step length gives
    sufficient decrease (including when the projection absorbs the
    whole direction).  The floor is deliberately shallow: a step this
    small can only deliver sub-resolution progress, and failing fast
    lets the caller move on to its fallback directions.

    ``visit``, when given, is called with every trial point whose cost
    was evaluated — rejected trials included.  Rejection only means the
    step failed the decrease test; the point itself may still be the
    best feasible iterate seen, and the forward pass is already cached.
    """
    step = 1.0
    while step > 1e-10:
        x_new = ev.project(x + step * d)
        dx = x_new - x
        if not np.any(dx):
            return None
        slope = float(g @ dx)
        if slope < 0.0:
            f_new = ev.cost(x_new, delta)
            if visit is not None:
                visit(x_new)
            if f_new <= f + cfg.ls_sufficient_decrease * slope:
                return x_new, f_new
        step *= cfg.ls_backtrack
    return None


def minimize_inner(
    scenario: Scenario,
    start: ControlParams,
    cfg: SolverConfig,
    delta: float,
    pcfg: PenaltyConfig | None = None,
    icfg: IntegratorConfig | None = None,
) -> InnerResult:
    """Minimize the smooth penalty at fixed delta from ``start``.

    Monotone by construction: every accepted step satisfies an Armijo
    sufficient-decrease test against the projected step, and +inf trial
    costs simply fail the test.  Stalls (no acceptable step length)
    return the best point found so far, flagged.

    Every visited iterate is additionally screened against the
    feasibility tolerances, and the lowest-horizon one that passes is
    reported as ``best_feasible``: the penalty merit function keeps
    descending past such points toward exact constraint satisfaction,
    which costs horizon the caller never asked for.
    """
    if pcfg is None:
        pcfg = PenaltyConfig()
    if icfg is None:
        icfg = IntegratorConfig()
    ev = _Evaluator(scenario, pcfg, icfg, cfg.rho_min)
    lower = _kinematic_lower_bound(scenario)
    best_feasible: ControlParams | None = None
    best_horizon = math.inf

    def consider(x_vec: np.ndarray) -> None:
        nonlocal best_feasible, best_horizon
        cand, traj, big_l = ev._forward(x_vec)
        if traj is None or big_l > pcfg.violation_tol:
            return
        t_total = horizon(cand)
        if t_total < lower - 1e-6 or t_total >= best_horizon:
            return
        if min_clearance_m(scenario, traj) < -cfg.clearance_slack:
            return
        best_feasible = cand
        best_horizon = t_total

    x = ev.project(ev.pack(start))
    f = ev.cost(x, delta)
    if not math.isfinite(f):
        return InnerResult(
            params=ev.unpack(x),
            cost=f,
            grad_norm=math.inf,
            iterations=0,
            converged=False,
            stalled=True,
        )
    consider(x)
    g = ev.grad(x, delta)
    memory: list = []
    iters = 0
    stalled = False
    converged = False
    pg_norm = math.inf
    no_progress = 0
    frozen_mode = False

    while iters < cfg.max_inner_iters:
        pg = x - ev.project(x - g)
        pg_norm = float(np.max(np.abs(pg)))
        if pg_norm <= cfg.grad_tol:
            converged = True
            break

        # Direction chain: quasi-Newton, then steepest descent, then
        # steepest descent with durations frozen.  The last one exists
        # because the active-measure weights are only piecewise linear
        # in the durations: at a weight kink the gradient describes the
        # wrong side and duration steps stop paying off, while headings
        # and climb rates never move the sample times and stay smooth.
        # Escalate not just on line-search failure but also when the
        # accepted step makes no measurable progress, and once the
        # frozen direction is what works, keep leading with it instead
        # of re-failing the full chain every iteration.
        min_progress = cfg.ftol_rel * max(1.0, abs(f))
        frozen = -g
        frozen[ev.rho_block] = 0.0
        accepted = None
        if frozen_mode:
            accepted = _backtrack(ev, x, f, g, frozen, delta, cfg, consider)
            if accepted is None or f - accepted[1] <= min_progress:
                frozen_mode = False
        if not frozen_mode:
            if memory:
                d = _lbfgs_direction(g, memory)
                if d @ g < -1e-12 * np.linalg.norm(d) * np.linalg.norm(g):
                    trial = _backtrack(ev, x, f, g, d, delta, cfg, consider)
                    if trial is not None and (
                        accepted is None or trial[1] < accepted[1]
                    ):
                        accepted = trial
                if accepted is None or f - accepted[1] <= min_progress:
                    memory.clear()
            if accepted is None or f - accepted[1] <= min_progress:
                trial = _backtrack(ev, x, f, g, -g, delta, cfg, consider)
                if trial is not None and (
                    accepted is None or trial[1] < accepted[1]
                ):
                    accepted = trial
            if accepted is None or f - accepted[1] <= min_progress:
                trial = _backtrack(ev, x, f, g, frozen, delta, cfg, consider)
                if trial is not None and f - trial[1] > min_progress:
                    frozen_mode = True
                if trial is not None and (
                    accepted is None or trial[1] < accepted[1]
                ):
                    accepted = trial
        if accepted is None:
            stalled = True
            break
        x_new, f_new = accepted

        iters += 1
        # The Armijo test can accept steps whose decrease is below
        # float resolution; several of those in a row — with the whole
        # direction chain consulted — means the iterate is numerically
        # stationary for this landscape.
        if f - f_new <= min_progress:
            no_progress += 1
            if no_progress >= 3:
                x, f = x_new, f_new
                converged = True
                break
        else:
            no_progress = 0
        g_new = ev.grad(x_new, delta)
        s_vec = x_new - x
        y_vec = g_new - g
        sy = float(s_vec @ y_vec)
        if sy > 1e-10 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
            memory.append((s_vec, y_vec, 1.0 / sy))
            if len(memory) > cfg.lbfgs_memory:
                memory.pop(0)
        x, f, g = x_new, f_new, g_new

    params = ev.unpack(x)
    params.theta = np.array([wrap_angle(a) for a in params.theta])
    if best_feasible is not None:
        best_feasible = best_feasible.copy()
        best_feasible.theta = np.array(
            [wrap_angle(a) for a in best_feasible.theta]
        )
    return InnerResult(
        params=params,
        cost=f,
        grad_norm=pg_norm,
        iterations=iters,
        converged=converged,
        stalled=stalled,
        best_feasible=best_feasible,
        best_feasible_horizon=best_horizon,
    )


def initial_params(
    scenario: Scenario, rng: np.random.Generator | None = None
) -> ControlParams:
    """Goal-directed initial guess, optionally perturbed.

    Headings point at the goal, the climb rate matches the straight
    climb, durations come from the scenario's time hint.  Passing an
    rng adds uniform perturbations for multistart diversity.
    """
    p = scenario.p
    dx, dy, dz = scenario.w1 - scenario.w0
    planar = math.hypot(dx, dy)
    theta_goal = math.atan2(dy, dx) if planar > 0.0 else 0.0
    hdot_goal = 0.0
    if planar > 0.0:
        hdot_goal = dz * scenario.v_xy / planar
    hdot_goal = min(max(hdot_goal, -scenario.hdot_max), scenario.hdot_max)

    theta = np.full(p, theta_goal)
    hdot = np.full(p, hdot_goal)
    rho = np.full(p, scenario.t_hint)
    if rng is not None:
        theta = theta + rng.uniform(-1.2, 1.2, p)
        hdot = np.clip(
            hdot + rng.uniform(-0.6, 0.6, p),
            -scenario.hdot_max,
            scenario.hdot_max,
        )
        rho = rho * np.exp(rng.uniform(-0.3, 0.3, p))
    if scenario.theta0 is not None:
        theta[0] = scenario.theta0
    return ControlParams(theta=theta, hdot=hdot, rho=rho, epsilon=0.05)


def _kinematic_lower_bound(scenario: Scenario) -> float:
    dx, dy, _ = scenario.w1 - scenario.w0
    return math.hypot(dx, dy) / scenario.v_xy


def solve(
    scenario: Scenario,
    pcfg: PenaltyConfig | None = None,
    cfg: SolverConfig | None = None,
    icfg: IntegratorConfig | None = None,
) -> SolveReport:
    """Full solve: multistart over the delta escalation schedule.

    Each start walks the schedule with warm starts and stops once the
    violation is inside tolerance and the horizon respects the
    kinematic lower bound.  Returns the best feasible candidate (by
    horizon), or the least-infeasible one flagged ``converged=False``
    when the schedule is exhausted everywhere.
    """
    if pcfg is None:
        pcfg = PenaltyConfig()
    if cfg is None:
        cfg = SolverConfig()
    if icfg is None:
        icfg = IntegratorConfig()

    lower = _kinematic_lower_bound(scenario)
    best = None
    total_iters = 0

    for start_idx in range(cfg.multistart):
        rng = None
        if start_idx > 0:
            rng = np.random.default_rng(
                np.random.SeedSequence((cfg.rng_seed, start_idx))
            )
        params = initial_params(scenario, rng)
        history = []
        cand_iters = 0
        delta_used = pcfg.delta_schedule[0]
        incumbent: tuple[float, ControlParams] | None = None
        traj = None
        big_l = math.inf
        worst_clear = -math.inf
        best_t = math.inf
        if best is not None and best[0]:
            best_t = best[1]
        prev_stage = None
        final_delta = pcfg.delta_schedule[-1]
        for delta in pcfg.delta_schedule:
            # Mid-schedule stages run once: for an unconverged descent
            # the next, stiffer delta pushes the same way harder, so
            # escalation beats repetition.  Only the final stage is
            # repeated, to finish a descent that has nowhere to go.
            attempts = cfg.stage_repeats if delta == final_delta else 1
            for _ in range(attempts):
                res = minimize_inner(scenario, params, cfg, delta, pcfg, icfg)
                params = res.params
                cand_iters += res.iterations
                if res.best_feasible is not None and (
                    incumbent is None
                    or res.best_feasible_horizon < incumbent[0]
                ):
                    incumbent = (res.best_feasible_horizon, res.best_feasible)
                traj = integrate_forward(scenario, params, icfg)
                big_l = violation(scenario, params, traj)
                if (
                    incumbent is not None
                    or res.converged
                    or res.stalled
                    or big_l <= pcfg.violation_tol
                ):
                    break
            t_total = horizon(params)
            worst_clear = min_clearance_m(scenario, traj)
            history.append((delta, t_total, big_l))
            delta_used = delta
            # Harvested iterates already satisfy every feasibility
            # screen; pushing delta further only polishes the violation
            # past tolerance while the horizon drifts upward.
            if incumbent is not None:
                break
            # Integral feasibility alone still tolerates centimeter
            # clearance dips at isolated samples; keep escalating until
            # the worst sample is clean too.
            if (
                big_l <= pcfg.violation_tol
                and t_total >= lower - 1e-6
                and worst_clear >= -cfg.clearance_slack
            ):
                break
            if best_t < math.inf:
                # Another start already delivered a feasible answer, so
                # this one only matters if it can beat that horizon.
                # Once a start has settled into a basin (violation near
                # tolerance), escalation only pushes its horizon up —
                # at or above the incumbent means it never wins.
                if big_l <= 100.0 * pcfg.violation_tol and t_total >= best_t:
                    break
                # A parked dip — integral-feasible but pointwise dirty
                # and pinned across consecutive stages — only leaves
                # its basin under a violently large delta, and those
                # exits overshoot well past the incumbent horizon.
                parked = (
                    big_l <= pcfg.violation_tol
                    and prev_stage is not None
                    and abs(t_total - prev_stage[0]) <= 1e-5
                    and abs(worst_clear - prev_stage[1]) <= 1e-4
                )
                if parked:
                    break
            prev_stage = (t_total, worst_clear)
        total_iters += cand_iters
        if incumbent is not None:
            params = incumbent[1]
            traj = integrate_forward(scenario, params, icfg)
            big_l = violation(scenario, params, traj)
            worst_clear = min_clearance_m(scenario, traj)
        miss = terminal_miss(scenario, traj)
        t_total = horizon(params)
        feasible = (
            big_l <= pcfg.violation_tol
            and miss <= 1e-3
            and worst_clear >= -cfg.clearance_slack
        )
        candidate = (
            feasible,
            t_total,
            big_l,
            miss,
            params,
            delta_used,
            tuple(history),
            start_idx,
        )
        if best is None or _better(candidate, best):
            best = candidate
        # A feasible horizon this close to the kinematic bound cannot
        # be beaten enough to matter; skip the remaining starts.
        if best[0] and best[1] <= lower * 1.02:
            break

    feasible, t_total, big_l, miss, params, delta_used, history, start_idx = best
    return SolveReport(
        params=params,
        horizon=t_total,
        violation=big_l,
        terminal_miss=miss,
        delta_used=delta_used,
        inner_iterations=total_iters,
        converged=feasible,
        history=history,
        start_index=start_idx,
        seed=cfg.rng_seed,
    )


def _better(a: tuple, b: tuple) -> bool:
    """Candidate ordering: feasibility first, then horizon, then
    violation."""
    if a[0] != b[0]:
        return a[0]
    if a[0]:
        return a[1] < b[1]
    if a[2] != b[2]:
        return a[2] < b[2]
    return a[1] < b[1]
