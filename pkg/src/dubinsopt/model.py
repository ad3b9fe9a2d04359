"""Vehicle kinematics, moving obstacles, and clearance geometry.

The vehicle is a fixed-speed Dubins airplane: it flies at a constant
planar speed ``v_xy`` with a freely steerable heading and a bounded
climb rate.  Obstacles are points moving along piecewise curves of a
small closed set of shapes; each carries its own safety radius, and the
separation requirement between vehicle and obstacle is the larger of
the two radii.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np


class ControlValue(NamedTuple):
    """One constant control sample: heading angle and climb rate."""

    theta: float
    hdot: float


def wrap_angle(theta: float) -> float:
    """Map an angle to the canonical range (-pi, pi]."""
    w = math.remainder(float(theta), 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


def dynamics_rhs(state: np.ndarray, u: ControlValue, v_xy: float) -> np.ndarray:
    """Time derivative of the position ``(x, y, z)``.

    The planar speed is pinned to ``v_xy``; the control only chooses its
    direction and the climb rate.  The state itself does not enter the
    right-hand side, which is what makes constant-control segments
    integrable exactly.
    """
    return np.array(
        [
            v_xy * math.cos(u.theta),
            v_xy * math.sin(u.theta),
            u.hdot,
        ]
    )


class CurveKind(str, Enum):
    """Closed set of obstacle curve shapes."""

    LINE = "line"
    CONSTANT = "constant"
    SINE_ALT = "sine_alt"
    SQRT_ARC = "sqrt_arc"


# Coefficient keys each curve kind requires (vector-valued entries are
# length-3 / length-2 sequences, everything else a scalar).
_REQUIRED_COEFFS = {
    CurveKind.LINE: ("origin", "rate"),
    CurveKind.CONSTANT: ("point",),
    CurveKind.SINE_ALT: (
        "xy_origin",
        "xy_rate",
        "z_amplitude",
        "z_omega",
        "z_phase",
        "z_offset",
    ),
    CurveKind.SQRT_ARC: (
        "x_center",
        "sign",
        "radicand_const",
        "radicand_rate",
        "y_origin",
        "y_rate",
        "z_origin",
        "z_rate",
    ),
}


@dataclass(frozen=True)
class CurvePiece:
    """One obstacle curve arc on the closed time window [t_lo, t_hi]."""

    kind: CurveKind
    t_lo: float
    t_hi: float
    coefficients: dict

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t_lo) and math.isfinite(self.t_hi)):
            raise ValueError("curve piece domain must be finite")
        if self.t_hi <= self.t_lo:
            raise ValueError(
                f"curve piece domain is empty: [{self.t_lo}, {self.t_hi}]"
            )
        kind = CurveKind(self.kind)
        object.__setattr__(self, "kind", kind)
        missing = [k for k in _REQUIRED_COEFFS[kind] if k not in self.coefficients]
        if missing:
            raise ValueError(f"{kind.value} piece missing coefficients {missing}")

    def position(self, t: np.ndarray) -> np.ndarray:
        """Evaluate the curve at times ``t`` (shape (n,) -> (n, 3))."""
        t = np.asarray(t, dtype=float)
        c = self.coefficients
        out = np.empty(t.shape + (3,))
        if self.kind is CurveKind.LINE:
            origin = np.asarray(c["origin"], dtype=float)
            rate = np.asarray(c["rate"], dtype=float)
            out[:] = origin + t[..., None] * rate
        elif self.kind is CurveKind.CONSTANT:
            out[:] = np.asarray(c["point"], dtype=float)
        elif self.kind is CurveKind.SINE_ALT:
            xy0 = np.asarray(c["xy_origin"], dtype=float)
            xyr = np.asarray(c["xy_rate"], dtype=float)
            out[..., 0] = xy0[0] + t * xyr[0]
            out[..., 1] = xy0[1] + t * xyr[1]
            out[..., 2] = (
                c["z_amplitude"] * np.sin(c["z_omega"] * t + c["z_phase"])
                + c["z_offset"]
            )
        elif self.kind is CurveKind.SQRT_ARC:
            radicand = np.maximum(c["radicand_const"] + c["radicand_rate"] * t, 0.0)
            out[..., 0] = c["x_center"] + c["sign"] * np.sqrt(radicand)
            out[..., 1] = c["y_origin"] + c["y_rate"] * t
            out[..., 2] = c["z_origin"] + c["z_rate"] * t
        else:  # pragma: no cover - CurveKind is a closed set
            raise ValueError(f"unknown curve kind {self.kind}")
        return out

    def velocity(self, t: np.ndarray) -> np.ndarray:
        """Time derivative of :meth:`position` at times ``t``."""
        t = np.asarray(t, dtype=float)
        c = self.coefficients
        out = np.zeros(t.shape + (3,))
        if self.kind is CurveKind.LINE:
            out[:] = np.asarray(c["rate"], dtype=float)
        elif self.kind is CurveKind.CONSTANT:
            pass
        elif self.kind is CurveKind.SINE_ALT:
            xyr = np.asarray(c["xy_rate"], dtype=float)
            out[..., 0] = xyr[0]
            out[..., 1] = xyr[1]
            out[..., 2] = (
                c["z_amplitude"] * c["z_omega"] * np.cos(c["z_omega"] * t + c["z_phase"])
            )
        elif self.kind is CurveKind.SQRT_ARC:
            radicand = c["radicand_const"] + c["radicand_rate"] * t
            # On the clamped flat of the arc the position is constant.
            pos = radicand > 0.0
            root = np.sqrt(np.where(pos, radicand, 1.0))
            out[..., 0] = np.where(
                pos, c["sign"] * 0.5 * c["radicand_rate"] / root, 0.0
            )
            out[..., 1] = c["y_rate"]
            out[..., 2] = c["z_rate"]
        else:  # pragma: no cover
            raise ValueError(f"unknown curve kind {self.kind}")
        return out


@dataclass(frozen=True, eq=False)
class ObstacleTrajectory:
    """A moving point obstacle with a safety radius.

    Pieces must be time-ordered, contiguous, and continuous at the
    junctions; outside the overall domain the obstacle is absent and
    imposes no constraint.
    """

    pieces: tuple
    safety_radius: float

    def __post_init__(self) -> None:
        pieces = tuple(self.pieces)
        object.__setattr__(self, "pieces", pieces)
        if not pieces:
            raise ValueError("obstacle needs at least one curve piece")
        if not (self.safety_radius > 0.0 and math.isfinite(self.safety_radius)):
            raise ValueError("safety radius must be positive and finite")
        for a, b in zip(pieces, pieces[1:]):
            if abs(b.t_lo - a.t_hi) > 1e-12:
                raise ValueError(
                    f"curve pieces not contiguous at t={a.t_hi} vs t={b.t_lo}"
                )
            pa = a.position(np.array([a.t_hi]))[0]
            pb = b.position(np.array([b.t_lo]))[0]
            if not np.all(np.abs(pa - pb) <= 1e-9):
                raise ValueError(
                    f"curve pieces disagree at junction t={a.t_hi}: {pa} vs {pb}"
                )

    @property
    def domain(self) -> tuple[float, float]:
        return (self.pieces[0].t_lo, self.pieces[-1].t_hi)

    def position_many(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Positions at times ``t`` plus an in-domain mask.

        Rows where the mask is False are filled with zeros and carry no
        meaning.  At a junction the earlier piece wins (the curves agree
        there anyway).
        """
        t = np.asarray(t, dtype=float)
        pos = np.zeros(t.shape + (3,))
        active = np.zeros(t.shape, dtype=bool)
        for piece in self.pieces:
            mask = (t >= piece.t_lo) & (t <= piece.t_hi) & ~active
            if mask.any():
                pos[mask] = piece.position(t[mask])
                active[mask] = True
        return pos, active

    def velocity_many(self, t: np.ndarray) -> np.ndarray:
        """Velocities at times ``t``; zero where out of domain."""
        t = np.asarray(t, dtype=float)
        vel = np.zeros(t.shape + (3,))
        done = np.zeros(t.shape, dtype=bool)
        for piece in self.pieces:
            mask = (t >= piece.t_lo) & (t <= piece.t_hi) & ~done
            if mask.any():
                vel[mask] = piece.velocity(t[mask])
                done[mask] = True
        return vel

    def position_clamped(self, t: np.ndarray) -> np.ndarray:
        """Positions with times clamped into the domain.

        Defined for every ``t``: outside the domain the obstacle is
        frozen at the nearer endpoint of its curve.  Callers that pair
        this with a weight that vanishes outside the domain get a
        contribution that is continuous in ``t`` across the boundary.
        """
        lo, hi = self.domain
        t = np.clip(np.asarray(t, dtype=float), lo, hi)
        pos, _ = self.position_many(t)
        return pos

    def velocity_clamped(self, t: np.ndarray) -> np.ndarray:
        """Time derivative of :meth:`position_clamped`: zero outside the
        domain, the curve velocity inside."""
        t = np.asarray(t, dtype=float)
        lo, hi = self.domain
        inside = (t >= lo) & (t <= hi)
        return self.velocity_many(np.clip(t, lo, hi)) * inside[..., None]

    def position(self, t: float):
        """Position at time ``t``, or None when the obstacle is absent."""
        pos, active = self.position_many(np.array([float(t)]))
        if not active[0]:
            return None
        return pos[0]


def obstacle_position(obstacle: ObstacleTrajectory, t: float):
    """Position of ``obstacle`` at ``t``; None while it is out of domain."""
    return obstacle.position(t)


@dataclass(frozen=True, eq=False)
class Scenario:
    """A complete problem instance.

    ``theta0`` optionally pins the heading of the first control segment
    (an initial-direction constraint); None leaves it free.  ``t_hint``
    seeds the segment durations of the solver's initial guess and has no
    effect on the feasible set.
    """

    w0: np.ndarray
    w1: np.ndarray
    v_xy: float
    hdot_max: float
    safety_radius: float
    obstacles: tuple = ()
    theta0: float | None = None
    p: int = 10
    t_hint: float | None = None

    def __post_init__(self) -> None:
        w0 = np.asarray(self.w0, dtype=float).reshape(3).copy()
        w1 = np.asarray(self.w1, dtype=float).reshape(3).copy()
        w0.flags.writeable = False
        w1.flags.writeable = False
        object.__setattr__(self, "w0", w0)
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if not (self.v_xy > 0.0 and math.isfinite(self.v_xy)):
            raise ValueError("v_xy must be positive and finite")
        if not (self.hdot_max > 0.0 and math.isfinite(self.hdot_max)):
            raise ValueError("hdot_max must be positive and finite")
        if not (self.safety_radius > 0.0 and math.isfinite(self.safety_radius)):
            raise ValueError("safety radius must be positive and finite")
        if self.p < 1:
            raise ValueError("need at least one control segment")
        if self.t_hint is None:
            planar = math.hypot(w1[0] - w0[0], w1[1] - w0[1])
            hint = 1.2 * planar / self.v_xy if planar > 0.0 else 1.0
            object.__setattr__(self, "t_hint", hint)

    def clearance_margin_sq(self, obstacle: ObstacleTrajectory) -> float:
        """Required squared separation against ``obstacle``."""
        return max(self.safety_radius, obstacle.safety_radius) ** 2


def clearance(
    position: np.ndarray,
    obstacle: ObstacleTrajectory,
    t: float,
    vehicle_radius: float,
):
    """Signed squared clearance margin against one obstacle.

    Returns ``|w - w_i|^2 - max(R, R_i)^2`` in square meters:
    nonnegative means the separation requirement holds.  Returns None
    while the obstacle is out of its time domain (no constraint).
    """
    obs = obstacle.position(t)
    if obs is None:
        return None
    d = np.asarray(position, dtype=float) - obs
    margin_sq = max(vehicle_radius, obstacle.safety_radius) ** 2
    return float(d @ d) - margin_sq
