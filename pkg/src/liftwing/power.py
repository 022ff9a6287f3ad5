"""Motor power from throttle commands, and energy accounting.

The per-motor fit is

    P = p1 s^2 + p2 s + p3 max(ds, 0)^p4 + p5 max(-ds, 0)^p6 + p7

with ``s`` the throttle command in [0, 1] and ``ds`` its rate (1/s).  The fit
goes negative at small throttle, so each motor is floored at 0 W.  Servo power
is neglected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PowerModel:
    p1: float = 563.7
    p2: float = -147.4
    p3: float = 15.0
    p4: float = 1.05
    p5: float = 4.0
    p6: float = 1.0
    p7: float = 0.05538
    floor: float = 0.0

    def per_motor(self, sigma, sigma_rate) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=float)
        rate = np.asarray(sigma_rate, dtype=float)
        up = np.maximum(rate, 0.0)
        down = np.maximum(-rate, 0.0)
        p = (
            self.p1 * sigma**2
            + self.p2 * sigma
            + self.p3 * up**self.p4
            + self.p5 * down**self.p6
            + self.p7
        )
        return np.maximum(p, self.floor)


def motor_power(sigma, sigma_rate, model: PowerModel | None = None) -> float:
    """Total rotor power (W) for four throttle commands and their rates."""
    model = model or PowerModel()
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0.0) or np.any(sigma > 1.0):
        raise ValueError("throttle commands must lie in [0, 1]")
    return float(np.sum(model.per_motor(sigma, sigma_rate)))


def accumulate_energy(power, dt: float) -> float:
    """Trapezoidal integral (J) of a uniformly sampled power trace."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    power = np.asarray(power, dtype=float)
    if power.size < 2:
        return 0.0
    return float(np.trapezoid(power, dx=dt))


class EnergyMeter:
    """Streaming power/energy bookkeeping at the controller rate.

    Throttle rates are backward differences of successive commands.
    """

    def __init__(self, dt: float, model: PowerModel | None = None):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.dt = dt
        self.model = model or PowerModel()
        self.energy = 0.0
        self._last_sigma = None
        self._last_power = None
        self.samples = 0

    def update(self, sigma) -> np.ndarray:
        """Record a throttle command; returns per-motor power (W)."""
        sigma = np.asarray(sigma, dtype=float)
        if self._last_sigma is None:
            rate = np.zeros_like(sigma)
        else:
            rate = (sigma - self._last_sigma) / self.dt
        per = self.model.per_motor(sigma, rate)
        total = float(np.sum(per))
        if self._last_power is not None:
            self.energy += 0.5 * (total + self._last_power) * self.dt
        self._last_power = total
        self._last_sigma = sigma.copy()
        self.samples += 1
        return per
