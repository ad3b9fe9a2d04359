"""Piecewise-constant control parametrization and time scaling.

The flight is split into ``p`` segments.  Segment ``k`` holds a constant
control (heading, climb rate) for a physical duration ``rho_k / p``, so
the total flight time is ``sum(rho) / p``.  All integration happens on a
normalized clock ``s`` in [0, 1]; ``time_scale_map`` converts it to
physical time.  This turns the free final time into ordinary decision
variables rho with a simple lower bound.

The penalty smoothing parameter ``epsilon`` travels with the controls
because the solver optimizes it jointly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ControlValue


@dataclass(eq=False)
class ControlParams:
    """Decision variables: per-segment controls, durations, and epsilon."""

    theta: np.ndarray
    hdot: np.ndarray
    rho: np.ndarray
    epsilon: float

    def __post_init__(self) -> None:
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1).copy()
        self.hdot = np.asarray(self.hdot, dtype=float).reshape(-1).copy()
        self.rho = np.asarray(self.rho, dtype=float).reshape(-1).copy()
        self.epsilon = float(self.epsilon)
        p = self.theta.size
        if p == 0:
            raise ValueError("need at least one control segment")
        if self.hdot.size != p or self.rho.size != p:
            raise ValueError("theta, hdot, rho must have equal length")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta must be finite")
        if not np.all(np.isfinite(self.hdot)):
            raise ValueError("hdot must be finite")
        if not (np.all(np.isfinite(self.rho)) and np.all(self.rho >= 0.0)):
            raise ValueError("rho must be finite and nonnegative")
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0.0):
            raise ValueError("epsilon must be finite and nonnegative")

    @property
    def p(self) -> int:
        return self.theta.size

    def copy(self) -> "ControlParams":
        return ControlParams(self.theta, self.hdot, self.rho, self.epsilon)


def horizon(params: ControlParams) -> float:
    """Total flight time sum(rho_k) / p."""
    rho = params.rho
    if rho.size == 1:
        return float(rho[0])
    # Same summation order as the segment-prefix form used by
    # time_scale_map so that horizon(params) == time_scale_map(params, 1)
    # exactly, not just to rounding.
    return float(np.cumsum(rho)[-1] / rho.size)


def segment_index(s: float, p: int) -> int:
    """Segment owning normalized time ``s``.

    Segments are half-open [(k-1)/p, k/p) with the last one closed at 1.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"normalized time {s} outside [0, 1]")
    scaled = s * p
    k = int(scaled)
    # s*p at a boundary k/p that is not exactly representable can land an
    # ulp below the integer; snap those up so the half-open rule holds at
    # every boundary, representable or not.
    if scaled - k > 1.0 - 1e-12:
        k += 1
    return min(k, p - 1)


def time_scale_map(params: ControlParams, s):
    """Physical time t(s) for normalized time(s) ``s`` in [0, 1].

    Piecewise linear with slope rho_k / p on segment k: within segment k
    the physical clock advances at rate rho_k.
    """
    p = params.p
    rho = params.rho
    prefix = np.concatenate(([0.0], np.cumsum(rho)))
    scalar = np.isscalar(s) or np.asarray(s).ndim == 0
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any((s_arr < 0.0) | (s_arr > 1.0)):
        raise ValueError("normalized time outside [0, 1]")
    scaled = s_arr * p
    k = scaled.astype(int)
    k = np.where(scaled - k > 1.0 - 1e-12, k + 1, k)  # see segment_index
    k = np.minimum(k, p - 1)
    t = (prefix[k] + rho[k] * (scaled - k)) / p
    if scalar:
        return float(t[0])
    return t


def control_at(params: ControlParams, s: float) -> ControlValue:
    """Constant control active at normalized time ``s``."""
    k = segment_index(float(s), params.p)
    return ControlValue(float(params.theta[k]), float(params.hdot[k]))


def pack(params: ControlParams, pinned_theta0: bool = False) -> np.ndarray:
    """Flatten to the solver's decision vector.

    Layout: [theta (minus the first entry when pinned), hdot, rho,
    epsilon].
    """
    theta = params.theta[1:] if pinned_theta0 else params.theta
    return np.concatenate((theta, params.hdot, params.rho, [params.epsilon]))


def unpack(x: np.ndarray, p: int, theta0: float | None = None) -> ControlParams:
    """Inverse of :func:`pack`."""
    x = np.asarray(x, dtype=float)
    n_theta = p - 1 if theta0 is not None else p
    if x.size != n_theta + 2 * p + 1:
        raise ValueError(f"decision vector has wrong length {x.size}")
    theta = x[:n_theta]
    if theta0 is not None:
        theta = np.concatenate(([theta0], theta))
    return ControlParams(
        theta=theta,
        hdot=x[n_theta : n_theta + p],
        rho=x[n_theta + p : n_theta + 2 * p],
        epsilon=float(x[-1]),
    )
