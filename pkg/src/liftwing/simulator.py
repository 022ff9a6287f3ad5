"""Rigid-body integration of the vehicle with actuator lag and wind.

The translational state lives in the earth frame, the attitude is the
body-to-earth quaternion and the angular rate is kept in the lifting frame,
where the inertia is given.  Rotor speeds and aileron deflections follow
first-order lags whose exact solution is evaluated at every Runge-Kutta stage
(the commands are held over a step), so the coupled scheme stays fourth order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from liftwing import frames
from liftwing.config import ConfigurationError
from liftwing.vehicle import (
    ActuatorParams,
    ActuatorState,
    AeroCoefficients,
    VehicleParams,
    Wrench,
    _wrench_terms,
    actuator_step,
    actuator_targets,
)


class SimulationAborted(RuntimeError):
    """Raised when the state stops being finite; carries the last good state."""

    def __init__(self, message: str, last_state: "SimState"):
        super().__init__(message)
        self.last_state = last_state


@dataclass
class SimState:
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))  # lifting frame
    actuators: ActuatorState = field(default_factory=ActuatorState)
    t: float = 0.0

    def copy(self) -> "SimState":
        return SimState(self.p.copy(), self.v.copy(), self.q.copy(), self.omega.copy(),
                        self.actuators.copy(), self.t)

    def vector(self) -> np.ndarray:
        return np.concatenate((self.p, self.v, self.q, self.omega))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.vector()))
                    and np.all(np.isfinite(self.actuators.rotor_speed))
                    and np.all(np.isfinite(self.actuators.aileron)))

    def euler(self) -> tuple[float, float, float]:
        """Body ZXY Euler angles (roll, pitch, yaw)."""
        return frames.euler_zxy_from_quat(self.q)


# ---------------------------------------------------------------------------
# Wind
# ---------------------------------------------------------------------------


@dataclass
class WindModel:
    """Constant wind plus an optional first-order Gauss-Markov gust.

    The gust has stationary standard deviation ``gust_std`` (m/s, per axis)
    and correlation time ``gust_tau`` (s), and is updated once per physics
    step with an exact discretization.
    """

    constant: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gust_std: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gust_tau: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.constant = np.asarray(self.constant, dtype=float).reshape(3)
        self.gust_std = np.broadcast_to(np.asarray(self.gust_std, dtype=float), (3,)).copy()
        if self.gust_tau <= 0 or np.any(self.gust_std < 0):
            raise ConfigurationError("gust parameters must be positive")
        self.reset()

    def reset(self, seed: int | None = None):
        if seed is not None:
            self.seed = seed
        self._rng = np.random.default_rng(self.seed)
        self.gust = np.zeros(3)

    @property
    def enabled(self) -> bool:
        return bool(self.gust_std.max() > 0.0)

    def sample(self, dt: float) -> np.ndarray:
        """Advance the gust by ``dt`` and return the wind vector (earth frame)."""
        if self.enabled:
            a = math.exp(-dt / self.gust_tau)
            self.gust = a * self.gust + self.gust_std * math.sqrt(1.0 - a * a) * self._rng.standard_normal(3)
        return self.constant + self.gust


# ---------------------------------------------------------------------------
# Dynamics
# ---------------------------------------------------------------------------


@dataclass
class StateDerivative:
    p_dot: np.ndarray
    v_dot: np.ndarray
    q_dot: np.ndarray
    omega_dot: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate((self.p_dot, self.v_dot, self.q_dot, self.omega_dot))


def derivatives(state: SimState, wrench: Wrench, params: VehicleParams) -> StateDerivative:
    """Newton-Euler equations for a given wrench (body force, lifting moment)."""
    R = frames.rot_body_to_earth(state.q)
    v_dot = R @ wrench.force / params.mass
    omega_b = frames.rot_lifting_to_body(params.kappa) @ state.omega
    q_dot = 0.5 * frames.quat_mul(state.q, np.concatenate(([0.0], omega_b)))
    J = params.inertia
    omega_dot = np.linalg.solve(J, wrench.moment - np.cross(state.omega, J @ state.omega))
    return StateDerivative(state.v.copy(), v_dot, q_dot, omega_dot)


class Dynamics:
    """Scalar fast path of the coupled ODE used by the integrator."""

    def __init__(self, params: VehicleParams, coeffs: AeroCoefficients, act: ActuatorParams):
        self.params = params
        self.coeffs = coeffs
        self.act = act
        J = params.inertia
        self.J = J
        self.J_inv = np.linalg.inv(J)
        self.ck = math.cos(params.kappa)
        self.sk = math.sin(params.kappa)

    def f(self, x, speed, aileron, wind) -> np.ndarray:
        p = self.params
        q = x[6:10]
        w = x[10:13]
        force, moment, *_ , R = _wrench_terms(x[3:6], q, w, speed, aileron, wind, p, self.coeffs)
        r00, r01, r02, r10, r11, r12, r20, r21, r22 = R
        inv_m = 1.0 / p.mass
        fx, fy, fz = force
        ax = (r00 * fx + r01 * fy + r02 * fz) * inv_m
        ay = (r10 * fx + r11 * fy + r12 * fz) * inv_m
        az = (r20 * fx + r21 * fy + r22 * fz) * inv_m
        # body rate from the lifting-frame rate
        wx, wy, wz = w
        bx = self.ck * wx + self.sk * wz
        by = wy
        bz = -self.sk * wx + self.ck * wz
        qw, qx, qy, qz = q
        dqw = 0.5 * (-qx * bx - qy * by - qz * bz)
        dqx = 0.5 * (qw * bx + qy * bz - qz * by)
        dqy = 0.5 * (qw * by - qx * bz + qz * bx)
        dqz = 0.5 * (qw * bz + qx * by - qy * bx)
        J = self.J
        hx = J[0, 0] * wx + J[0, 2] * wz
        hy = J[1, 1] * wy
        hz = J[2, 0] * wx + J[2, 2] * wz
        tx = moment[0] - (wy * hz - wz * hy)
        ty = moment[1] - (wz * hx - wx * hz)
        tz = moment[2] - (wx * hy - wy * hx)
        Ji = self.J_inv
        return np.array([
            x[3], x[4], x[5], ax, ay, az, dqw, dqx, dqy, dqz,
            Ji[0, 0] * tx + Ji[0, 2] * tz,
            Ji[1, 1] * ty,
            Ji[2, 0] * tx + Ji[2, 2] * tz,
        ])


def step_rk4(state: SimState, sigma, wind, dt: float, dyn: Dynamics) -> SimState:
    """One classical Runge-Kutta step with commands ``sigma`` held constant."""
    if not 0.0 < dt <= 0.01:
        raise ValueError("dt must lie in (0, 0.01] s")
    act = dyn.act
    speed_t, ail_t = actuator_targets(sigma, act)
    s0, a0 = state.actuators.rotor_speed, state.actuators.aileron

    def actuators_at(tau):
        em = math.exp(-tau / act.motor_tau)
        ea = math.exp(-tau / act.servo_tau)
        return speed_t + (s0 - speed_t) * em, ail_t + (a0 - ail_t) * ea

    wind = np.asarray(wind, dtype=float)
    x = state.vector()
    sp, ai = s0, a0
    k1 = dyn.f(x, sp, ai, wind)
    sp, ai = actuators_at(0.5 * dt)
    k2 = dyn.f(x + 0.5 * dt * k1, sp, ai, wind)
    k3 = dyn.f(x + 0.5 * dt * k2, sp, ai, wind)
    sp, ai = actuators_at(dt)
    k4 = dyn.f(x + dt * k3, sp, ai, wind)
    xn = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    if not np.all(np.isfinite(xn)):
        raise SimulationAborted(f"non-finite state at t={state.t + dt:.6f}", state.copy())
    q = xn[6:10]
    q = q / math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return SimState(
        p=xn[0:3].copy(),
        v=xn[3:6].copy(),
        q=q,
        omega=xn[10:13].copy(),
        actuators=actuator_step(sigma, state.actuators, act, dt),
        t=state.t + dt,
    )


# ---------------------------------------------------------------------------
# Measurement
# ---------------------------------------------------------------------------


@dataclass
class NoiseConfig:
    enabled: bool = False
    sigma_p: float = 0.01  # m
    sigma_v: float = 0.02  # m/s
    sigma_att: float = 0.002  # rad, small-angle rotation
    sigma_omega: float = 0.005  # rad/s
    sigma_airspeed: float = 0.1  # m/s
    seed: int = 0


@dataclass
class Measurement:
    p: np.ndarray
    v: np.ndarray
    q: np.ndarray
    omega: np.ndarray  # lifting frame
    airspeed: float
    alpha: float
    beta: float
    t: float


class Sensor:
    """Ideal state feedback with optional seeded additive Gaussian noise."""

    def __init__(self, config: NoiseConfig | None = None):
        self.config = config or NoiseConfig()
        self.reset()

    def reset(self, seed: int | None = None):
        if seed is not None:
            self.config.seed = seed
        self._rng = np.random.default_rng(self.config.seed)

    def measure(self, state: SimState, airdata: tuple[float, float, float]) -> Measurement:
        return measure(state, airdata, self.config, self._rng)


def measure(state: SimState, airdata, config: NoiseConfig, rng=None) -> Measurement:
    """Measured state; equal to the true state when noise is disabled.

    ``airdata`` is the true ``(airspeed, alpha, beta)``.
    """
    airspeed, alpha, beta = airdata
    if not config.enabled:
        return Measurement(state.p.copy(), state.v.copy(), state.q.copy(), state.omega.copy(),
                           airspeed, alpha, beta, state.t)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n = rng.standard_normal(13)
    p = state.p + config.sigma_p * n[0:3]
    v = state.v + config.sigma_v * n[3:6]
    dq = frames.quat_from_axis_angle(n[6:9], config.sigma_att * float(np.linalg.norm(n[6:9])))
    q = frames.quat_normalize(frames.quat_mul(state.q, dq))
    omega = state.omega + config.sigma_omega * n[9:12]
    va = max(0.0, airspeed + config.sigma_airspeed * n[12])
    return Measurement(p, v, q, omega, va, alpha, beta, state.t)


# ---------------------------------------------------------------------------
# Simulator
# ---------------------------------------------------------------------------


class Simulator:
    """Holds the true state and advances it at the physics rate."""

    def __init__(self, params: VehicleParams, coeffs: AeroCoefficients, act: ActuatorParams,
                 state: SimState | None = None, wind: WindModel | None = None, dt: float = 1e-3):
        if not 0.0 < dt <= 0.01:
            raise ConfigurationError("physics dt must lie in (0, 0.01] s")
        self.params = params
        self.coeffs = coeffs
        self.act = act
        self.dyn = Dynamics(params, coeffs, act)
        self.state = state.copy() if state is not None else SimState()
        self.wind_model = wind or WindModel()
        self.dt = dt
        self.wind = self.wind_model.constant + self.wind_model.gust

    def airdata(self, state: SimState | None = None) -> tuple[float, float, float]:
        s = state or self.state
        _, _, va, alpha, beta, _ = _wrench_terms(
            s.v, s.q, s.omega, s.actuators.rotor_speed, s.actuators.aileron, self.wind,
            self.params, self.coeffs)
        return va, alpha, beta

    def step(self, sigma) -> SimState:
        self.wind = self.wind_model.sample(self.dt)
        self.state = step_rk4(self.state, sigma, self.wind, self.dt, self.dyn)
        return self.state
