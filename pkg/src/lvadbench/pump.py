"""Rotary pump primitives: head curve, suction guard, speed clamp."""

from __future__ import annotations

from .params import PumpParameters


def pump_head(speed: float, q: float, dq_dt: float, pump: PumpParameters) -> float:
    """Pressure rise across the pump in mmHg.

    Quadratic-in-speed characteristic with linear flow droop and a fluid
    inertance term: dP = a2*speed^2 - a1*Q - a0*dQ/dt.
    """
    if speed < 0:
        raise ValueError("speed must be >= 0")
    return pump.a2 * speed * speed - pump.a1 * q - pump.a0 * dq_dt


def suction_resistance(plv: float, pump: PumpParameters) -> float:
    """Extra inlet resistance that ramps in as LV pressure collapses.

    Zero at or above the threshold, then grows linearly with the pressure
    deficit; continuous at the threshold.
    """
    deficit = pump.P_suc_threshold - plv
    if deficit <= 0.0:
        return 0.0
    return pump.Rlsuc_gain * deficit


def clamp_speed(command: float, pump: PumpParameters | None = None) -> float:
    """Clamp a speed command to the pump's operating band."""
    lo = pump.speed_min if pump is not None else 1800.0
    hi = pump.speed_max if pump is not None else 3000.0
    if command < lo:
        return lo
    if command > hi:
        return hi
    return command
