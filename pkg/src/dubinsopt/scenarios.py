"""Built-in scenarios and their reference values.

All three share the same flight task: from the origin to (1, 1, 1) at
unit planar speed, vehicle safety radius 0.2, obstacle radii 0.1, with
obstacles appearing at t = 0.1.  They differ in the obstacle motions:

* ``example1``: one intruder flying the diagonal with sinusoidal
  altitude, one flying a square-root arc in x that flattens out at
  t = 7/8 and continues along x = 1/2 afterwards.
* ``example2``: the sinusoidal intruder plus one flying straight along
  the vehicle's own diagonal.
* ``example3``: two straight-line intruders that both arrive at the
  goal at t = 1 and leave the scene there.

Intruders with a stated journey end drop out of the constraint set at
that moment; keeping them parked on the goal would contradict the
terminal condition for any arrival time.  Open-ended intruders stay
active until well past any plausible arrival (twice the horizon hint,
and at least 2 s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import CurveKind, CurvePiece, ObstacleTrajectory, Scenario
from .penalty import PenaltyConfig


class UnknownPresetError(ValueError):
    """Raised for a preset name that is not built in."""


PRESET_NAMES = ("example1", "example2", "example3")

_T_HINT = 1.2 * math.sqrt(2.0)
# Open-ended intruders get a domain cap far beyond any plausible
# arrival time; the curves are defined on finite windows.
_FAR_END = max(2.0 * _T_HINT, 2.0)
_APPEAR = 0.1


@dataclass(frozen=True, eq=False)
class ScenarioPreset:
    """A named scenario plus its reference solution values."""

    name: str
    scenario: Scenario
    penalty: PenaltyConfig
    reference_horizon: float
    reference_delta: float


def kinematic_lower_bound(scenario: Scenario) -> float:
    """Planar straight-line distance over planar speed.

    No admissible flight can beat this: the planar speed is pinned at
    v_xy regardless of heading or climb.
    """
    dx = scenario.w1[0] - scenario.w0[0]
    dy = scenario.w1[1] - scenario.w0[1]
    return math.hypot(dx, dy) / scenario.v_xy


def _sine_altitude_intruder() -> ObstacleTrajectory:
    """Diagonal flyer with altitude sin(pi t / 5)."""
    piece = CurvePiece(
        kind=CurveKind.SINE_ALT,
        t_lo=_APPEAR,
        t_hi=_FAR_END,
        coefficients={
            "xy_origin": (0.0, 0.0),
            "xy_rate": (1.0, 1.0),
            "z_amplitude": 1.0,
            "z_omega": math.pi / 5.0,
            "z_phase": 0.0,
            "z_offset": 0.0,
        },
    )
    return ObstacleTrajectory(pieces=(piece,), safety_radius=0.1)


def _swoop_intruder() -> ObstacleTrajectory:
    """Square-root arc in x with y = z = t.

    x(t) = 1/2 -+ sqrt(3/4 - 2 (t - 1/2)); the two branches meet where
    the radicand vanishes, at t = 7/8.  Past that point the radicand is
    clamped at zero and the intruder continues along (1/2, t, t).
    """
    common = {
        "x_center": 0.5,
        "radicand_const": 1.75,
        "radicand_rate": -2.0,
        "y_origin": 0.0,
        "y_rate": 1.0,
        "z_origin": 0.0,
        "z_rate": 1.0,
    }
    inbound = CurvePiece(
        kind=CurveKind.SQRT_ARC,
        t_lo=_APPEAR,
        t_hi=0.875,
        coefficients=dict(common, sign=-1.0),
    )
    outbound = CurvePiece(
        kind=CurveKind.SQRT_ARC,
        t_lo=0.875,
        t_hi=_FAR_END,
        coefficients=dict(common, sign=1.0),
    )
    return ObstacleTrajectory(pieces=(inbound, outbound), safety_radius=0.1)


def _line_intruder(origin, rate, t_hi) -> ObstacleTrajectory:
    piece = CurvePiece(
        kind=CurveKind.LINE,
        t_lo=_APPEAR,
        t_hi=t_hi,
        coefficients={"origin": tuple(origin), "rate": tuple(rate)},
    )
    return ObstacleTrajectory(pieces=(piece,), safety_radius=0.1)


def _base_scenario(obstacles) -> Scenario:
    return Scenario(
        w0=(0.0, 0.0, 0.0),
        w1=(1.0, 1.0, 1.0),
        v_xy=1.0,
        hdot_max=1.0,
        safety_radius=0.2,
        obstacles=tuple(obstacles),
        theta0=None,
        p=10,
        t_hint=_T_HINT,
    )


def _delta_schedule(first: float) -> tuple:
    """Geometric escalation from the reference delta up past 1e6."""
    schedule = [first]
    while schedule[-1] < 1e6:
        schedule.append(schedule[-1] * 10.0)
    return tuple(schedule)


def preset(name: str) -> ScenarioPreset:
    """Look up a built-in scenario by name."""
    if name == "example1":
        scenario = _base_scenario(
            [_sine_altitude_intruder(), _swoop_intruder()]
        )
        reference_horizon, reference_delta = 1.4159, 50.0
    elif name == "example2":
        scenario = _base_scenario(
            [
                _sine_altitude_intruder(),
                _line_intruder((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), _FAR_END),
            ]
        )
        reference_horizon, reference_delta = 1.7058, 50.0
    elif name == "example3":
        scenario = _base_scenario(
            [
                _line_intruder((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 1.0),
                _line_intruder((0.0, 0.0, 2.0), (1.0, 1.0, -1.0), 1.0),
            ]
        )
        reference_horizon, reference_delta = 1.7059, 10.0
    else:
        raise UnknownPresetError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"
        )
    penalty = PenaltyConfig(delta_schedule=_delta_schedule(reference_delta))
    return ScenarioPreset(
        name=name,
        scenario=scenario,
        penalty=penalty,
        reference_horizon=reference_horizon,
        reference_delta=reference_delta,
    )
