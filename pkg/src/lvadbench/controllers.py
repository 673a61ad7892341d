"""Pump-speed controllers.

The adaptive controller linearizes the unknown loop around the current
operating point through a single time-varying gain estimate (the
pseudo-partial derivative), updated by a projection step with a reset
rule that pins its sign.  The fixed-gain alternative is a parallel PID
around the 2400 rpm pre-activation bias with conditional integration as
anti-windup.

Both are written for a positive plant gain (output rises when the command
rises).  The physical loop has the opposite orientation — raising pump
speed lowers filling pressure — so the harness feeds the adaptive law the
negated measurement/target pair and hands the PID a measured-minus-desired
error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class MfacConfig:
    rho: float = 1.0          # control step constant
    lam: float = 0.1          # control-change weighting
    eta: float = 1.0          # estimation step, in (0, 1]
    mu: float = 0.1           # estimation-change weighting
    phi1: float = 0.001       # initial gain estimate (mmHg per rpm scale)
    epsilon: float = 1.0e-4   # reset tolerance
    u_min: float = 1800.0
    u_max: float = 3000.0

    def validate(self) -> None:
        if self.mu <= 0:
            raise ValueError("mu must be > 0")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must be in (0, 1]")
        if self.lam <= 0:
            raise ValueError("lambda must be > 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.phi1 == 0:
            raise ValueError("phi1 must be nonzero")
        if not self.u_min < self.u_max:
            raise ValueError("u_min must be below u_max")


@dataclass
class MfacState:
    phi_hat: float
    u_prev: float
    u_prev2: float
    y_prev: float
    initialized: bool = False


def mfac_init(config: MfacConfig, u0: float, y0: float) -> MfacState:
    config.validate()
    return MfacState(phi_hat=config.phi1, u_prev=u0, u_prev2=u0, y_prev=y0)


def mfac_estimate_ppd(state: MfacState, du_prev: float, dy: float,
                      config: MfacConfig) -> float:
    """Projection update of the gain estimate, then the reset rule."""
    phi = state.phi_hat
    phi = phi + config.eta * du_prev * (dy - phi * du_prev) \
        / (config.mu + du_prev * du_prev)
    if (abs(phi) <= config.epsilon or abs(du_prev) <= config.epsilon
            or math.copysign(1.0, phi) != math.copysign(1.0, config.phi1)):
        phi = config.phi1
    state.phi_hat = phi
    return phi


def mfac_control(state: MfacState, y: float, y_star: float,
                 config: MfacConfig) -> float:
    """One control step; the saturated command is committed to the state."""
    phi = state.phi_hat
    u = state.u_prev + config.rho * phi * (y_star - y) / (config.lam + phi * phi)
    u = min(max(u, config.u_min), config.u_max)
    state.u_prev2 = state.u_prev
    state.u_prev = u
    state.y_prev = y
    return u


class MfacController:
    """Tick-driven wrapper around the adaptive law.

    Control acts on every tick; the gain estimate updates once per fresh
    measurement, from the command and output changes accumulated since the
    previous measurement.  Between measurements the held output does not
    move, so per-tick differences carry no gain information and would only
    bleed the estimate toward the reset value.
    """

    def __init__(self, config: MfacConfig | None = None):
        self.config = config or MfacConfig()
        self.config.validate()
        self.state: MfacState | None = None
        self._u_at_meas = 0.0
        self._y_at_meas = 0.0

    def reset(self, u0: float, y0: float) -> None:
        self.state = mfac_init(self.config, u0, y0)
        self._u_at_meas = u0
        self._y_at_meas = y0

    def step(self, y: float, y_star: float, new_measurement: bool = True) -> float:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        s = self.state
        if new_measurement:
            if s.initialized:
                mfac_estimate_ppd(s, s.u_prev - self._u_at_meas,
                                  y - self._y_at_meas, self.config)
            else:
                s.initialized = True
            self._u_at_meas = s.u_prev
            self._y_at_meas = y
        return mfac_control(s, y, y_star, self.config)


@dataclass
class PidConfig:
    kp: float = 133.09        # rpm per mmHg
    ki: float = 17.17         # rpm per mmHg.s
    kd: float = 10.21         # rpm.s per mmHg
    bias: float = 2400.0      # pre-activation constant speed
    u_min: float = 1800.0
    u_max: float = 3000.0


@dataclass
class PidState:
    integral: float = 0.0     # mmHg.s
    prev_error: float = 0.0
    initialized: bool = False


def pid_control(state: PidState, error: float, dt: float,
                config: PidConfig) -> float:
    """Parallel PID with conditional integration.

    The integrator only accumulates while the unclamped output stays
    inside the limits in the direction the error is pushing; the first
    tick suppresses the derivative kick.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if not state.initialized:
        state.prev_error = error
        state.initialized = True
    derivative = (error - state.prev_error) / dt
    state.prev_error = error
    candidate = state.integral + error * dt
    u = config.bias + config.kp * error + config.ki * candidate \
        + config.kd * derivative
    windup = (u > config.u_max and error > 0) or (u < config.u_min and error < 0)
    if windup:
        u = config.bias + config.kp * error + config.ki * state.integral \
            + config.kd * derivative
    else:
        state.integral = candidate
    return min(max(u, config.u_min), config.u_max)


class PidController:
    def __init__(self, config: PidConfig | None = None):
        self.config = config or PidConfig()
        self.state = PidState()

    def reset(self) -> None:
        self.state = PidState()

    def step(self, error: float, dt: float) -> float:
        return pid_control(self.state, error, dt, self.config)
