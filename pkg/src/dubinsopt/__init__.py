"""Time-optimal Dubins airplane trajectories around moving obstacles.

The vehicle flies at fixed planar speed with steerable heading and
bounded climb rate; obstacles are points moving along known curves.
Controls are piecewise constant over a fixed number of segments whose
durations are decision variables (time scaling), and the clearance and
terminal constraints are folded into a smoothed exact penalty whose
weight is escalated until the solution is feasible.
"""

from .model import (
    ControlValue,
    CurveKind,
    CurvePiece,
    ObstacleTrajectory,
    Scenario,
    clearance,
    dynamics_rhs,
    obstacle_position,
    wrap_angle,
)
from .parametrization import (
    ControlParams,
    control_at,
    horizon,
    pack,
    segment_index,
    time_scale_map,
    unpack,
)
from .simulate import (
    IntegratorConfig,
    NonFiniteStateError,
    Trajectory,
    integrate_forward,
    min_clearance_m,
    path_length_xy,
)
from .penalty import (
    PenaltyConfig,
    penalty_cost,
    stationary_epsilon,
    terminal_miss,
    violation,
)
from .adjoint import (
    CostateTrajectory,
    Gradient,
    central_difference,
    fd_gradient_oracle,
    gradient,
    hamiltonian_h0,
    integrate_costate,
)
from .solver import (
    InnerResult,
    SolveReport,
    SolverConfig,
    initial_params,
    minimize_inner,
    solve,
)
from .scenarios import (
    PRESET_NAMES,
    ScenarioPreset,
    UnknownPresetError,
    kinematic_lower_bound,
    preset,
)

__version__ = "0.1.0"

__all__ = [
    "ControlValue",
    "CurveKind",
    "CurvePiece",
    "ObstacleTrajectory",
    "Scenario",
    "clearance",
    "dynamics_rhs",
    "obstacle_position",
    "wrap_angle",
    "ControlParams",
    "control_at",
    "horizon",
    "pack",
    "segment_index",
    "time_scale_map",
    "unpack",
    "IntegratorConfig",
    "NonFiniteStateError",
    "Trajectory",
    "integrate_forward",
    "min_clearance_m",
    "path_length_xy",
    "PenaltyConfig",
    "penalty_cost",
    "stationary_epsilon",
    "terminal_miss",
    "violation",
    "CostateTrajectory",
    "Gradient",
    "central_difference",
    "fd_gradient_oracle",
    "gradient",
    "hamiltonian_h0",
    "integrate_costate",
    "InnerResult",
    "SolveReport",
    "SolverConfig",
    "initial_params",
    "minimize_inner",
    "solve",
    "PRESET_NAMES",
    "ScenarioPreset",
    "UnknownPresetError",
    "kinematic_lower_bound",
    "preset",
]
