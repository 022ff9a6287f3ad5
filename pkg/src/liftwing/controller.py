"""Unified full-envelope flight controller.

Pipeline: position PID -> desired acceleration ``u_d`` -> (thrust, pitch,
roll) extraction that accounts for wing lift -> quaternion attitude P loop in
the lifting frame -> coordinated-turn yaw-rate feedforward blended by airspeed
-> rate PID producing the desired lifting-frame moment.

The rotor-side lateral force and the control-surface force terms are not
modelled by the controller; they are left to the feedback loops as
disturbances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from liftwing import frames
from liftwing.allocator import AllocationProblem, allocate
from liftwing.config import ConfigurationError
from liftwing.vehicle import (
    AeroCoefficients,
    VehicleParams,
    _lift_drag_scalar,
    blended_lift_drag,
    blended_lift_drag_slope,
)


def _vec3(x):
    return field(default_factory=lambda: np.array(x, dtype=float))


@dataclass
class ControllerGains:
    # position loop
    Kp_p: np.ndarray = _vec3([2.0, 2.0, 4.0])
    Kp_d: np.ndarray = _vec3([3.0, 3.0, 5.0])
    Kp_i: np.ndarray = _vec3([0.4, 0.4, 0.4])
    pos_int_max: np.ndarray = _vec3([2.0, 2.0, 3.0])  # m/s^2, clamp on the integral term
    # attitude loop
    K_att: np.ndarray = _vec3([6.0, 6.0, 3.0])
    omega_max: np.ndarray = _vec3([3.0, 3.0, 2.0])
    omega_min: np.ndarray = _vec3([-3.0, -3.0, -2.0])
    # rate loop
    Kw_p: np.ndarray = _vec3([8.0, 8.0, 4.0])
    Kw_i: np.ndarray = _vec3([2.0, 2.0, 2.0])
    Kw_d: np.ndarray = _vec3([0.02, 0.02, 0.02])
    m_int_max: np.ndarray = _vec3([0.5, 0.5, 0.3])  # N m
    m_max: np.ndarray = _vec3([3.0, 3.0, 1.5])  # N m
    rate_filter_hz: float = 20.0
    # coordinated turn
    V_min: float = 3.0
    V_max: float = 12.0
    phi_ct_max: float = math.radians(60.0)
    coordinated_turn: bool = True
    # extraction
    tilt_max: float = math.radians(50.0)
    yaw_hold_speed: float = 0.5
    yaw_source: str = "desired"  # yaw used inside the extraction: desired | current

    def __post_init__(self):
        for name in ("Kp_p", "Kp_d", "Kp_i", "K_att", "Kw_p", "Kw_i", "Kw_d"):
            if np.any(np.asarray(getattr(self, name)) < 0):
                raise ConfigurationError(f"gain {name} must be non-negative")
        if np.any(self.omega_min >= self.omega_max):
            raise ConfigurationError("omega_min must be below omega_max")
        if np.any(self.m_max <= 0) or np.any(self.m_int_max < 0):
            raise ConfigurationError("moment limits must be positive")
        if self.V_min >= self.V_max:
            raise ConfigurationError("V_min must be below V_max")
        if self.yaw_source not in ("desired", "current"):
            raise ConfigurationError(f"unknown yaw_source {self.yaw_source!r}")


@dataclass
class ControlSetpoint:
    """Either a trajectory sample or an attitude command with altitude hold."""

    mode: str = "trajectory"  # trajectory | attitude
    p: np.ndarray = _vec3([0.0, 0.0, 0.0])
    v: np.ndarray = _vec3([0.0, 0.0, 0.0])
    a: np.ndarray = _vec3([0.0, 0.0, 0.0])
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0


@dataclass
class ControlOutput:
    f_d: float  # N, thrust magnitude along body -z
    m_d: np.ndarray  # N m, lifting frame
    u_d: np.ndarray
    euler_d: np.ndarray  # body (roll, pitch, yaw)
    omega_d: np.ndarray
    w: float
    extraction_ok: bool = True


# ---------------------------------------------------------------------------
# Position loop
# ---------------------------------------------------------------------------


class PositionController:
    def __init__(self, gains: ControllerGains, g: float):
        self.gains = gains
        self.g = g
        self.integral = np.zeros(3)

    def reset(self):
        self.integral[:] = 0.0

    def update(self, p, v, p_d, v_d, a_d, dt: float, freeze=None) -> np.ndarray:
        """Desired acceleration ``u_d`` (m/s^2, earth frame, gravity removed).

        ``freeze`` is a boolean 3-vector; integration stops on those axes
        (used when the outer loop is saturated).
        """
        if dt <= 0:
            raise ValueError("dt must be positive")
        gn = self.gains
        e = np.asarray(p, dtype=float) - p_d
        ev = np.asarray(v, dtype=float) - v_d
        new_int = self.integral + e * dt
        if freeze is not None:
            new_int = np.where(freeze, self.integral, new_int)
        lim = np.where(gn.Kp_i > 0, gn.pos_int_max / np.where(gn.Kp_i > 0, gn.Kp_i, 1.0), 0.0)
        self.integral = np.clip(new_int, -lim, lim)
        return (np.array([0.0, 0.0, -self.g]) + a_d - gn.Kp_d * ev - gn.Kp_p * e
                - gn.Kp_i * self.integral)


def position_control(p, v, setpoint: ControlSetpoint, state: PositionController, dt: float):
    return state.update(p, v, setpoint.p, setpoint.v, setpoint.a, dt)


# ---------------------------------------------------------------------------
# Thrust / attitude extraction
# ---------------------------------------------------------------------------


@dataclass
class ExtractionResult:
    f: float
    pitch: float
    roll: float
    residual: float  # ||u(f, pitch, roll) - u_d||
    iterations: int
    converged: bool


def _rot_z(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def acceleration_model(f, pitch, roll, yaw, airspeed, params: VehicleParams, coeffs: AeroCoefficients,
                       alpha_offset: float = 0.0) -> np.ndarray:
    """Acceleration produced by thrust ``f`` and wing forces at body attitude.

    The angle of attack is approximated by ``kappa + pitch`` (level flight,
    no sideslip) minus an optional flight-path correction ``alpha_offset``.
    """
    k = 0.5 * params.rho * airspeed**2 * params.S / params.mass
    cl, cd = blended_lift_drag(params.kappa + pitch - alpha_offset, coeffs)
    s = f / params.mass
    sp, cp = math.sin(pitch), math.cos(pitch)
    sr, cr = math.sin(roll), math.cos(roll)
    h = s * cp + k * cl
    local = np.array([-(s * sp + k * cd), h * sr, -h * cr])
    return _rot_z(yaw) @ local


def closed_form_extraction(u_d, yaw: float, mass: float):
    """Aero-free (multicopter) solution ``(f, pitch, roll)``."""
    ut = _rot_z(-yaw) @ np.asarray(u_d, dtype=float)
    n = float(np.linalg.norm(ut))
    if n == 0.0:
        return 0.0, 0.0, 0.0
    roll = math.atan2(ut[1], -ut[2])
    pitch = math.atan2(-ut[0], math.hypot(ut[1], ut[2]))
    return mass * n, pitch, roll


class _Model:
    """Residual of the extraction problem in the yaw-aligned frame.

    Variables are ``x = (s, pitch, roll)`` with ``s = f / m``.
    """

    def __init__(self, ut, airspeed, params, coeffs, alpha_offset):
        self.ut = ut
        self.k = 0.5 * params.rho * airspeed**2 * params.S / params.mass
        self.base = params.kappa - alpha_offset
        self.coeffs = coeffs

    def residual(self, x):
        s, th, ph = x
        cl, cd = _lift_drag_scalar(self.base + th, self.coeffs)
        k = self.k
        h = s * math.cos(th) + k * cl
        return np.array([
            -(s * math.sin(th) + k * cd) - self.ut[0],
            h * math.sin(ph) - self.ut[1],
            -h * math.cos(ph) - self.ut[2],
        ])

    def jacobian(self, x):
        s, th, ph = x
        a = self.base + th
        cl, _ = _lift_drag_scalar(a, self.coeffs)
        dcl, dcd = blended_lift_drag_slope(a, self.coeffs)
        k = self.k
        st, ct = math.sin(th), math.cos(th)
        sp, cp = math.sin(ph), math.cos(ph)
        h = s * ct + k * cl
        h_th = -s * st + k * dcl
        return np.array([
            [-st, -(s * ct + k * dcd), 0.0],
            [ct * sp, h_th * sp, h * cp],
            [-ct * cp, -h_th * cp, h * sp],
        ])

    def scan(self, pitch, roll, s_max):
        """Residual norms on a (pitch, roll) grid with the exact optimal s."""
        th, ph = np.meshgrid(pitch, roll, indexing="ij")
        cl, cd = blended_lift_drag(self.base + th, self.coeffs)
        k = self.k
        n = np.stack((-np.sin(th), np.cos(th) * np.sin(ph), -np.cos(th) * np.cos(ph)))
        a = np.stack((-k * cd, k * cl * np.sin(ph), -k * cl * np.cos(ph)))
        d = self.ut[:, None, None] - a
        s = np.clip(np.sum(n * d, axis=0), 0.0, s_max)
        r = s * n - d
        return s, th, ph, np.sqrt(np.sum(r * r, axis=0))


def _projected_gradient(g, x, lo, hi):
    pg = g.copy()
    pg[(x <= lo) & (g > 0)] = 0.0
    pg[(x >= hi) & (g < 0)] = 0.0
    return pg


TIE_TOL = 1e-10  # squared-residual margin for equally good extraction fits


def extract_attitude_thrust(u_d, yaw: float, airspeed: float, params: VehicleParams,
                            coeffs: AeroCoefficients, f_max: float, tilt_max: float,
                            alpha_offset: float = 0.0, previous=None, scan: bool | None = None,
                            max_iter: int = 50, tol: float = 1e-8) -> ExtractionResult:
    """Box-constrained least-squares fit of (f, pitch, roll) to ``u_d``.

    Seeds: the aero-free closed form, the ``previous`` solution if given, and
    (when ``scan`` is true, default when there is no previous solution) the
    local minima of a fine pitch scan.  Seeds are refined by projected
    Levenberg-Marquardt whose box subproblems use the active-set solver; with
    a previous solution only the best seed is refined.  Refined points whose
    squared residual is within ``TIE_TOL`` of the best are treated as equal
    and the one with the least thrust is returned.  The result is never worse
    than the closed-form seed.
    """
    if f_max <= 0 or tilt_max <= 0:
        raise ConfigurationError("extraction bounds must be positive")
    u_d = np.asarray(u_d, dtype=float)
    if not np.all(np.isfinite(u_d)):
        raise ValueError("u_d must be finite")
    m = params.mass
    ut = _rot_z(-yaw) @ u_d
    model = _Model(ut, airspeed, params, coeffs, alpha_offset)
    lo = np.array([0.0, -tilt_max, -tilt_max])
    hi = np.array([f_max / m, tilt_max, tilt_max])

    def cost(x):
        r = model.residual(x)
        return float(r @ r)

    f0, th0, ph0 = closed_form_extraction(u_d, yaw, m)
    seed_cf = np.clip([f0 / m, th0, ph0], lo, hi)
    seeds = [seed_cf]
    if previous is not None:
        seeds.append(np.clip([previous[0] / m, previous[1], previous[2]], lo, hi))
    if scan is None:
        scan = previous is None
    if scan:
        # For fixed (s, pitch) the best roll is the closed-form one (or its
        # flip when the net lift is negative), so the scan only needs to be
        # fine in pitch.  The low-alpha valley is narrow, so every local
        # minimum of the pitch profile is refined, not just the lowest point.
        pitch_grid = np.linspace(-tilt_max, tilt_max, 201)
        r0 = math.atan2(ut[1], -ut[2])
        r1 = math.atan2(-ut[1], ut[2])
        roll_grid = np.clip(np.concatenate(([r0, r1], np.linspace(-tilt_max, tilt_max, 9))),
                            -tilt_max, tilt_max)
        s, th, ph, res = model.scan(pitch_grid, roll_grid, hi[0])
        j = np.argmin(res, axis=1)
        prof = res[np.arange(res.shape[0]), j]
        interior = (prof[1:-1] <= prof[:-2]) & (prof[1:-1] <= prof[2:])
        minima = np.concatenate(([prof[0] <= prof[1]], interior, [prof[-1] <= prof[-2]]))
        idx = np.flatnonzero(minima)
        for i in idx[np.argsort(prof[idx])][:5]:
            seeds.append(np.array([s[i, j[i]], th[i, j[i]], ph[i, j[i]]]))
    costs = [cost(x) for x in seeds]
    cost_cf = costs[0]
    if scan:
        starts = [seeds[i] for i in np.argsort(costs)]
    else:
        starts = [seeds[int(np.argmin(costs))]]

    refined = []
    total_it = 0
    for x0 in starts:
        x, c, converged, it = _refine(model, x0.astype(float), cost(x0), lo, hi, max_iter, tol)
        total_it += it
        refined.append((x, c, converged))
    # several exact solutions can exist (e.g. level cruise at two angles of
    # attack); among equally good fits take the one with the least thrust
    c_best = min(r[1] for r in refined)
    x, c, converged = min((r for r in refined if r[1] <= c_best + TIE_TOL), key=lambda r: r[0][0])
    if c > cost_cf:
        x, c = seed_cf, cost_cf
    return ExtractionResult(f=float(x[0] * m), pitch=float(x[1]), roll=float(x[2]),
                            residual=math.sqrt(c), iterations=total_it, converged=bool(converged))


def _refine(model, x, c, lo, hi, max_iter, tol):
    """Projected Levenberg-Marquardt from ``x``; returns (x, cost, converged, iterations)."""

    def cost(z):
        r = model.residual(z)
        return float(r @ r)

    converged = False
    mu = None
    it = 0
    for it in range(1, max_iter + 1):
        r = model.residual(x)
        J = model.jacobian(x)
        g = J.T @ r
        if np.linalg.norm(_projected_gradient(g, x, lo, hi)) < tol:
            converged = True
            break
        JtJ = J.T @ J
        d = np.maximum(np.diag(JtJ), 1e-6)
        if mu is None:
            mu = 1e-6 * float(np.max(d))
        improved = False
        while True:
            try:
                p = np.linalg.solve(JtJ + mu * np.diag(d), -g)
            except np.linalg.LinAlgError:
                p = np.full(3, np.inf)
            xt = x + p
            if not (np.all(np.isfinite(xt)) and np.all(xt >= lo) and np.all(xt <= hi)):
                prob = AllocationProblem(B=J, u_d=-r, W_u=np.ones(3), W_delta=np.sqrt(d),
                                         gamma=mu, delta_p=np.zeros(3), lower=lo - x, upper=hi - x)
                p = allocate(prob).delta
                xt = np.clip(x + p, lo, hi)
            if not np.all(np.abs(xt - x) <= 1e-14 * (1.0 + np.abs(x))):
                ct = cost(xt)
            else:
                break  # damping has shrunk the step to nothing
            if ct < c:
                x, c = xt, ct
                mu = max(mu / 10.0, 1e-15)
                improved = True
                break
            mu *= 4.0
        if not improved:
            # no descent possible along the damped path: treat as stationary
            g = model.jacobian(x).T @ model.residual(x)
            converged = np.linalg.norm(_projected_gradient(g, x, lo, hi)) < max(tol, 1e-6)
            break
    return x, c, converged, it


def thrust_for_altitude(u_dz: float, pitch: float, roll: float, airspeed: float,
                        params: VehicleParams, coeffs: AeroCoefficients, f_max: float,
                        alpha_offset: float = 0.0) -> float:
    """Thrust meeting the vertical demand ``u_dz`` at a commanded attitude."""
    k = 0.5 * params.rho * airspeed**2 * params.S / params.mass
    cl, _ = blended_lift_drag(params.kappa + pitch - alpha_offset, coeffs)
    cp, cr = math.cos(pitch), math.cos(roll)
    if cp * cr <= 1e-3:
        return f_max
    s = (-u_dz / cr - k * cl) / cp
    return float(min(max(s * params.mass, 0.0), f_max))


# ---------------------------------------------------------------------------
# Attitude and rate loops
# ---------------------------------------------------------------------------


def desired_yaw(v_e, previous: float, threshold: float = 0.5) -> float:
    """Heading of the horizontal velocity; held below ``threshold`` m/s."""
    vx, vy = float(v_e[0]), float(v_e[1])
    if math.hypot(vx, vy) < threshold:
        return previous
    return math.atan2(vy, vx)


def lifting_quaternion(q_be, kappa: float) -> np.ndarray:
    """Lifting-frame to earth quaternion."""
    return frames.quat_mul(q_be, frames.quat_lifting_to_body(kappa))


def attitude_control(euler_d, q_be, gains: ControllerGains, kappa: float) -> np.ndarray:
    """Rate command from the lifting-frame attitude error.

    ``euler_d`` is the desired body (roll, pitch, yaw); the lifting-frame
    target adds ``kappa`` to pitch.  The error quaternion is ``q_d* q`` so the
    restoring rate is the negated, gained rotation vector.
    """
    roll, pitch, yaw = euler_d
    q_d = frames.quat_from_euler_zxy(roll, pitch + kappa, yaw)
    q_e = frames.quat_error(q_d, lifting_quaternion(q_be, kappa))
    xi = frames.axis_angle_error(q_e)
    return frames.sat_vec(-gains.K_att * xi, gains.omega_min, gains.omega_max)


def coordinated_turn(roll: float, pitch: float, airspeed: float, g: float,
                     roll_max: float = math.radians(60.0), eps: float = 1e-3) -> float:
    """Lifting-frame z-rate of a coordinated turn at the given lifting-frame angles."""
    if airspeed <= eps:
        return 0.0
    r = min(max(roll, -roll_max), roll_max)
    yaw_rate = g * math.tan(r) / airspeed
    return yaw_rate * math.cos(pitch) * math.cos(r)


def airspeed_weight(airspeed: float, V_min: float, V_max: float) -> float:
    if V_min >= V_max:
        raise ConfigurationError("V_min must be below V_max")
    return min(max((airspeed - V_min) / (V_max - V_min), 0.0), 1.0)


def synthesize_rates(omega_ac, omega_ct: float, airspeed: float, V_min: float, V_max: float):
    w = airspeed_weight(airspeed, V_min, V_max)
    out = np.array(omega_ac, dtype=float)
    out[2] += w * omega_ct
    return out, w


class RateController:
    """PID on the lifting-frame rate error with a filtered rate derivative."""

    def __init__(self, gains: ControllerGains, J: np.ndarray):
        self.gains = gains
        self.J = np.asarray(J, dtype=float)
        self.reset()

    def reset(self):
        self.integral = np.zeros(3)  # rad/s^2 (before multiplying by J)
        self.omega_prev = None
        self.omega_dot = np.zeros(3)

    def derivative(self, omega, dt: float) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        if self.omega_prev is not None:
            raw = (omega - self.omega_prev) / dt
            a = 1.0 - math.exp(-2.0 * math.pi * self.gains.rate_filter_hz * dt)
            self.omega_dot = self.omega_dot + a * (raw - self.omega_dot)
        self.omega_prev = omega.copy()
        return self.omega_dot

    def update(self, omega, omega_d, dt: float, omega_dot=None, omega_dot_d=None) -> np.ndarray:
        if dt <= 0:
            raise ValueError("dt must be positive")
        gn = self.gains
        if omega_dot is None:
            omega_dot = self.derivative(omega, dt)
        if omega_dot_d is None:
            omega_dot_d = np.zeros(3)
        e = np.asarray(omega, dtype=float) - omega_d
        Jd = np.diag(self.J)
        i_lim = gn.m_int_max / Jd
        cand = np.clip(self.integral + gn.Kw_i * e * dt, -i_lim, i_lim)
        pd = -gn.Kw_p * e - gn.Kw_d * (np.asarray(omega_dot) - omega_dot_d)
        raw = self.J @ (pd - cand)
        # integration is frozen on axes already saturated in the same direction
        sat_hi = raw > gn.m_max
        sat_lo = raw < -gn.m_max
        grows = cand - self.integral
        freeze = (sat_hi & (grows < 0)) | (sat_lo & (grows > 0))
        self.integral = np.where(freeze, self.integral, cand)
        out = self.J @ (pd - self.integral)
        return np.clip(out, -gn.m_max, gn.m_max)


def rate_control(omega, omega_d, omega_dot, omega_dot_d, J, gains: ControllerGains, dt: float,
                 state: RateController | None = None) -> np.ndarray:
    state = state or RateController(gains, J)
    return state.update(omega, omega_d, dt, omega_dot, omega_dot_d)


# ---------------------------------------------------------------------------
# Full controller
# ---------------------------------------------------------------------------


class UnifiedController:
    def __init__(self, params: VehicleParams, coeffs: AeroCoefficients,
                 gains: ControllerGains | None = None, use_flight_path: bool = False):
        self.params = params
        self.coeffs = coeffs
        self.gains = gains or ControllerGains()
        self.f_max = 4.0 * params.max_rotor_thrust * math.cos(params.eta)
        self.use_flight_path = use_flight_path
        self.position = PositionController(self.gains, params.g)
        self.rate = RateController(self.gains, params.inertia)
        self.reset()

    def reset(self, yaw: float = 0.0):
        self.position.reset()
        self.rate.reset()
        self.yaw_d = yaw
        self._prev = None
        self.extraction_failures = 0

    def _alpha_offset(self, meas) -> float:
        if not self.use_flight_path or meas.airspeed < self.gains.V_min:
            return 0.0
        _, pitch, _ = frames.euler_zxy_from_quat(meas.q)
        return self.params.kappa + pitch - meas.alpha

    def update(self, meas, sp: ControlSetpoint, dt: float) -> ControlOutput:
        gn, prm = self.gains, self.params
        _, _, yaw_now = frames.euler_zxy_from_quat(meas.q)
        offset = self._alpha_offset(meas)
        ok = True
        if sp.mode == "trajectory":
            self.yaw_d = desired_yaw(meas.v, self.yaw_d, gn.yaw_hold_speed)
            freeze = None
            if self._prev is not None:
                f_prev = self._prev[0]
                freeze = np.array([False, False, f_prev <= 0.0 or f_prev >= self.f_max])
            u_d = self.position.update(meas.p, meas.v, sp.p, sp.v, sp.a, dt, freeze)
            yaw_x = self.yaw_d if gn.yaw_source == "desired" else yaw_now
            res = extract_attitude_thrust(u_d, yaw_x, meas.airspeed, prm, self.coeffs, self.f_max,
                                          gn.tilt_max, offset, previous=self._prev)
            ok = res.converged
            if not ok:
                self.extraction_failures += 1
            f_d, pitch_d, roll_d = res.f, res.pitch, res.roll
            self._prev = (f_d, pitch_d, roll_d)
        elif sp.mode == "attitude":
            self.yaw_d = sp.yaw
            pitch_d, roll_d = sp.pitch, sp.roll
            freeze = None
            if self._prev is not None:
                f_prev = self._prev[0]
                freeze = np.array([True, True, f_prev <= 0.0 or f_prev >= self.f_max])
            else:
                freeze = np.array([True, True, False])
            u_d = self.position.update(meas.p, meas.v, sp.p, sp.v, sp.a, dt, freeze)
            f_d = thrust_for_altitude(u_d[2], pitch_d, roll_d, meas.airspeed, prm, self.coeffs,
                                      self.f_max, offset)
            self._prev = (f_d, pitch_d, roll_d)
        else:
            raise ConfigurationError(f"unknown setpoint mode {sp.mode!r}")

        euler_d = np.array([roll_d, pitch_d, self.yaw_d])
        omega_ac = attitude_control(euler_d, meas.q, gn, prm.kappa)
        omega_ct = 0.0
        if gn.coordinated_turn:
            roll_l, pitch_l, _ = frames.euler_zxy_from_quat(lifting_quaternion(meas.q, prm.kappa))
            omega_ct = coordinated_turn(roll_l, pitch_l, meas.airspeed, prm.g, gn.phi_ct_max)
        omega_d, w = synthesize_rates(omega_ac, omega_ct, meas.airspeed, gn.V_min, gn.V_max)
        m_d = self.rate.update(meas.omega, omega_d, dt)

        assert 0.0 <= f_d <= self.f_max + 1e-9
        assert np.all(np.abs(m_d) <= gn.m_max + 1e-12)
        return ControlOutput(f_d=f_d, m_d=m_d, u_d=u_d, euler_d=euler_d, omega_d=omega_d, w=w,
                             extraction_ok=ok)
