"""Physical model of the lifting-wing quadcopter.

Rotor numbering follows the X layout: 1 front-right, 2 rear-left,
3 front-left, 4 rear-right.  Rotors 1 and 2 spin counter-clockwise seen from
above (positive yaw reaction torque), rotors 3 and 4 clockwise.  Each rotor
axis is canted outboard by ``eta``.

Forces are expressed in the body frame, moments in the lifting frame.
Aileron deflections are positive trailing-edge down.
"""

from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from liftwing import frames
from liftwing.config import ConfigurationError

AIRSPEED_EPS = 1e-6  # below this airspeed alpha and beta are reported as zero


@dataclass(frozen=True)
class VehicleParams:
    """Structure parameters.

    Geometry, mass, inertia and rotor coefficients default to the reference
    airframe.  ``wing_area`` is an effective aerodynamic reference area
    (0.073 m^2, a little below ``span * chord``); set it to ``None`` to use
    ``span * chord``.  ``rho`` and ``g`` are sea-level ISA values.
    """

    mass: float = 1.92
    kappa: float = math.radians(34.0)
    eta: float = math.radians(10.0)
    dx: float = 0.25
    dy: float = 0.2125
    Jx: float = 5.12e-2
    Jy: float = 5.54e-2
    Jz: float = 7.6e-2
    Jxz: float = 0.0
    span: float = 0.94
    chord: float = 0.17
    wing_area: float | None = 0.073
    kf: float = 2.824e-05
    km: float = 5.875e-07
    rho: float = 1.225
    g: float = 9.81
    max_rotor_thrust: float = 12.0
    aileron_limit: float = math.radians(25.0)

    def __post_init__(self):
        if self.mass <= 0 or self.kf <= 0 or self.km <= 0:
            raise ConfigurationError("mass, kf and km must be positive")
        if self.rho < 0 or self.g <= 0:
            raise ConfigurationError("rho must be non-negative and g positive")
        if self.S <= 0:
            raise ConfigurationError("wing area must be positive")
        if self.max_rotor_thrust <= 0 or self.aileron_limit < 0:
            raise ConfigurationError("actuator limits must be positive")
        if np.any(np.linalg.eigvalsh(self.inertia) <= 0):
            raise ConfigurationError("inertia matrix must be positive definite")

    @property
    def S(self) -> float:
        return self.span * self.chord if self.wing_area is None else self.wing_area

    @property
    def inertia(self) -> np.ndarray:
        return np.array(
            [[self.Jx, 0.0, -self.Jxz], [0.0, self.Jy, 0.0], [-self.Jxz, 0.0, self.Jz]]
        )

    @property
    def K1(self) -> float:
        return self.km / self.kf + self.dx * math.sin(self.eta)

    @property
    def hover_thrust(self) -> float:
        """Per-rotor thrust balancing gravity at level attitude."""
        return self.mass * self.g / (4.0 * math.cos(self.eta))

    @property
    def max_rotor_speed(self) -> float:
        return math.sqrt(self.max_rotor_thrust / self.kf)


@dataclass(frozen=True)
class AeroCoefficients:
    """Aerodynamic coefficients.

    The lift/drag blend constants describe the reference wing.  The remaining
    static and control derivatives are assumed: small and sign-correct.  Rate damping is off by default because the
    force/moment model has no rate terms.
    """

    c0: float = 0.055
    c1: float = 0.9
    c2: float = 13.0
    c3: float = 3.3
    alpha0: float = math.radians(3.0)
    k_lift: float = 38.0
    k_drag: float = 48.0
    # static coefficients; C_m uses sin(alpha), the rest are linear in beta
    Cm0: float = 0.0
    Cm_alpha: float = -0.1
    CY_beta: float = -0.2
    Cl_beta: float = -0.02
    Cn_beta: float = 0.02
    # optional rate damping
    rate_damping: bool = False
    Cl_p: float = -0.4
    Cm_q: float = -2.0
    Cn_r: float = -0.1
    # control derivatives (per rad)
    CL_de: float = 0.4
    CD_de: float = 0.0
    Cm_de: float = -0.3
    CY_da: float = 0.0
    Cl_da: float = 0.25
    Cn_da: float = -0.02

    def __post_init__(self):
        if self.c2 == self.c3:
            raise ConfigurationError("c2 must differ from c3")
        if self.c3 <= 0 or self.c2 <= 0:
            raise ConfigurationError("c2 and c3 must be positive")

    def scaled_controls(self, factor: float) -> "AeroCoefficients":
        """Copy with every control derivative multiplied by ``factor``."""
        names = ("CL_de", "CD_de", "Cm_de", "CY_da", "Cl_da", "Cn_da")
        return dataclasses.replace(self, **{n: getattr(self, n) * factor for n in names})


@dataclass(frozen=True)
class ActuatorParams:
    """First-order motor and servo responses.

    Rotor speed target is ``motor_gain * sigma + motor_bias`` (floored at
    zero); aileron target is ``servo_gain * (2 sigma - 1) + servo_bias``.
    """

    motor_tau: float = 0.02
    motor_gain: float = 1148.0
    motor_bias: float = -141.4
    servo_tau: float = 0.05
    servo_gain: float = math.radians(25.0)
    servo_bias: float = 0.0

    def __post_init__(self):
        if self.motor_tau <= 0 or self.servo_tau <= 0:
            raise ConfigurationError("actuator time constants must be positive")
        if self.motor_gain <= 0 or self.servo_gain <= 0:
            raise ConfigurationError("actuator gains must be positive")


@dataclass
class ActuatorState:
    rotor_speed: np.ndarray = field(default_factory=lambda: np.zeros(4))
    aileron: np.ndarray = field(default_factory=lambda: np.zeros(2))  # [d_ar, d_al]

    def copy(self) -> "ActuatorState":
        return ActuatorState(self.rotor_speed.copy(), self.aileron.copy())


@dataclass
class Wrench:
    force: np.ndarray  # body frame, N
    moment: np.ndarray  # lifting frame, N m

    def __add__(self, other: "Wrench") -> "Wrench":
        return Wrench(self.force + other.force, self.moment + other.moment)


# ---------------------------------------------------------------------------
# Rotors
# ---------------------------------------------------------------------------


def rotor_thrust(speed, params: VehicleParams):
    speed = np.asarray(speed, dtype=float)
    if np.any(speed < 0):
        raise ValueError("rotor speed must be non-negative")
    return params.kf * speed**2


def rotor_torque(speed, params: VehicleParams):
    speed = np.asarray(speed, dtype=float)
    if np.any(speed < 0):
        raise ValueError("rotor speed must be non-negative")
    return params.km * speed**2


@functools.lru_cache(maxsize=32)
def rotor_matrix(params: VehicleParams) -> np.ndarray:
    """5x4 map from rotor thrusts to (f_ry, f_rz, m_rx, m_ry, m_rz)."""
    se, ce = math.sin(params.eta), math.cos(params.eta)
    dx, dy, k1 = params.dx, params.dy, params.K1
    m = np.array(
        [
            [se, -se, -se, se],
            [-ce, -ce, -ce, -ce],
            [-dy * ce, dy * ce, dy * ce, -dy * ce],
            [dx * ce, -dx * ce, dx * ce, -dx * ce],
            [k1, k1, -k1, -k1],
        ]
    )
    m.setflags(write=False)
    return m


def rotor_wrench(thrust, params: VehicleParams) -> np.ndarray:
    return rotor_matrix(params) @ np.asarray(thrust, dtype=float)


# ---------------------------------------------------------------------------
# Aerodynamics
# ---------------------------------------------------------------------------


def relative_airspeed(v_e, q_be, wind_e, kappa: float):
    """Airspeed vector in the lifting frame, its norm, alpha and beta."""
    R = frames.rot_body_to_earth(q_be)
    v_b = R.T @ (np.asarray(v_e, dtype=float) - np.asarray(wind_e, dtype=float))
    v_l = frames.rot_lifting_to_body(kappa).T @ v_b
    airspeed = float(np.linalg.norm(v_l))
    if airspeed < AIRSPEED_EPS:
        return v_l, airspeed, 0.0, 0.0
    alpha = math.atan2(v_l[2], v_l[0])
    beta = math.asin(max(-1.0, min(1.0, v_l[1] / airspeed)))
    return v_l, airspeed, alpha, beta


def pseudo_sigmoid(alpha0: float, k: float, alpha):
    return (1.0 + np.tanh(k * alpha0**2 - k * alpha**2)) / (1.0 + math.tanh(k * alpha0**2))


def blended_lift_drag(alpha, coeffs: AeroCoefficients):
    """Full-envelope (C_L, C_D): small-AoA model blended into a flat plate."""
    c0, c1, c2, c3 = coeffs.c0, coeffs.c1, coeffs.c2, coeffs.c3
    s2a = np.sin(2.0 * alpha)
    sa2 = np.sin(alpha) ** 2
    den = (c2 - c3) * np.cos(alpha) ** 2 + c3
    cl_small = 0.5 * c2**2 / den * s2a
    cd_small = c0 + c2 * c3 / den * sa2
    cl_large = c1 * s2a
    cd_large = c0 + 2.0 * c1 * sa2
    sl = pseudo_sigmoid(coeffs.alpha0, coeffs.k_lift, alpha)
    sd = pseudo_sigmoid(coeffs.alpha0, coeffs.k_drag, alpha)
    return cl_small * sl + cl_large * (1.0 - sl), cd_small * sd + cd_large * (1.0 - sd)


def blended_lift_drag_slope(alpha, coeffs: AeroCoefficients):
    """Analytic d(C_L)/d(alpha) and d(C_D)/d(alpha)."""
    c0, c1, c2, c3 = coeffs.c0, coeffs.c1, coeffs.c2, coeffs.c3
    s2a, c2a = np.sin(2.0 * alpha), np.cos(2.0 * alpha)
    sa2 = np.sin(alpha) ** 2
    den = (c2 - c3) * np.cos(alpha) ** 2 + c3
    dden = -(c2 - c3) * s2a
    a = 0.5 * c2**2
    cl_small = a * s2a / den
    dcl_small = a * (2.0 * c2a * den - s2a * dden) / den**2
    cd_small = c0 + c2 * c3 * sa2 / den
    dcd_small = c2 * c3 * (s2a * den - sa2 * dden) / den**2
    cl_large = c1 * s2a
    dcl_large = 2.0 * c1 * c2a
    cd_large = c0 + 2.0 * c1 * sa2
    dcd_large = 2.0 * c1 * s2a

    def sig_and_slope(k):
        norm = 1.0 + math.tanh(k * coeffs.alpha0**2)
        th = np.tanh(k * coeffs.alpha0**2 - k * alpha**2)
        return (1.0 + th) / norm, (1.0 - th**2) * (-2.0 * k * alpha) / norm

    sl, dsl = sig_and_slope(coeffs.k_lift)
    sd, dsd = sig_and_slope(coeffs.k_drag)
    dcl = dcl_small * sl + cl_small * dsl + dcl_large * (1.0 - sl) - cl_large * dsl
    dcd = dcd_small * sd + cd_small * dsd + dcd_large * (1.0 - sd) - cd_large * dsd
    return dcl, dcd


def _lift_drag_scalar(alpha: float, c: AeroCoefficients) -> tuple[float, float]:
    """Scalar twin of :func:`blended_lift_drag` for the integrator hot path."""
    s2a = math.sin(2.0 * alpha)
    sa = math.sin(alpha)
    ca = math.cos(alpha)
    sa2 = sa * sa
    den = (c.c2 - c.c3) * ca * ca + c.c3
    k0 = c.alpha0 * c.alpha0
    a2 = alpha * alpha
    sl = (1.0 + math.tanh(c.k_lift * (k0 - a2))) / (1.0 + math.tanh(c.k_lift * k0))
    sd = (1.0 + math.tanh(c.k_drag * (k0 - a2))) / (1.0 + math.tanh(c.k_drag * k0))
    cl = 0.5 * c.c2 * c.c2 / den * s2a * sl + c.c1 * s2a * (1.0 - sl)
    cd = (c.c0 + c.c2 * c.c3 / den * sa2) * sd + (c.c0 + 2.0 * c.c1 * sa2) * (1.0 - sd)
    return cl, cd


def static_moment_coefficients(alpha, beta, airspeed, omega_l, coeffs, params):
    """Base (C_l, C_m, C_n) without control-surface terms."""
    cl = coeffs.Cl_beta * beta
    cm = coeffs.Cm0 + coeffs.Cm_alpha * np.sin(alpha)  # periodic, so no jump where alpha wraps
    cn = coeffs.Cn_beta * beta
    if coeffs.rate_damping and airspeed > AIRSPEED_EPS and omega_l is not None:
        k = 0.5 / airspeed
        cl += coeffs.Cl_p * params.span * omega_l[0] * k
        cm += coeffs.Cm_q * params.chord * omega_l[1] * k
        cn += coeffs.Cn_r * params.span * omega_l[2] * k
    return cl, cm, cn


def aileron_mix(d_ar: float, d_al: float) -> tuple[float, float]:
    """Right/left aileron to (elevator, aileron) equivalents."""
    return d_ar + d_al, d_al - d_ar


def aero_wrench(airspeed, alpha, beta, d_e, d_a, coeffs, params, omega_l=None) -> Wrench:
    """Aerodynamic force (body frame) and moment (lifting frame)."""
    if airspeed < 0:
        raise ValueError("airspeed must be non-negative")
    q_s = 0.5 * params.rho * airspeed**2 * params.S
    c_lift, c_drag = blended_lift_drag(alpha, coeffs)
    c_side = coeffs.CY_beta * beta
    force_w = q_s * np.array(
        [
            -(c_drag + coeffs.CD_de * d_e),
            c_side + coeffs.CY_da * d_a,
            -(c_lift + coeffs.CL_de * d_e),
        ]
    )
    force_b = frames.rot_wind_to_body(params.kappa - alpha, beta) @ force_w
    cl, cm, cn = static_moment_coefficients(alpha, beta, airspeed, omega_l, coeffs, params)
    moment_l = q_s * np.array(
        [
            params.span * (cl + coeffs.Cl_da * d_a),
            params.chord * (cm + coeffs.Cm_de * d_e),
            params.span * (cn + coeffs.Cn_da * d_a),
        ]
    )
    return Wrench(force_b, moment_l)


def total_wrench(
    v_e, q_be, omega_l, actuators: ActuatorState, wind_e, params: VehicleParams, coeffs
) -> Wrench:
    """Rotor + aerodynamic + gravity wrench acting on the airframe."""
    return Wrench(*_wrench_terms(v_e, q_be, omega_l, actuators.rotor_speed, actuators.aileron,
                                 wind_e, params, coeffs)[:2])


def _wrench_terms(v_e, q, omega_l, speed, aileron, wind_e, p: VehicleParams, c: AeroCoefficients):
    """Scalar implementation of the total wrench; also returns air data.

    This is the simulator hot path, so it avoids small-array numpy calls.
    """
    w, x, y, z = q
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    r00, r01, r02 = 1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)
    r10, r11, r12 = 2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)
    r20, r21, r22 = 2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)

    ax = v_e[0] - wind_e[0]
    ay = v_e[1] - wind_e[1]
    az = v_e[2] - wind_e[2]
    vb0 = r00 * ax + r10 * ay + r20 * az
    vb1 = r01 * ax + r11 * ay + r21 * az
    vb2 = r02 * ax + r12 * ay + r22 * az
    ck, sk = math.cos(p.kappa), math.sin(p.kappa)
    vl0 = ck * vb0 - sk * vb2
    vl1 = vb1
    vl2 = sk * vb0 + ck * vb2
    va = math.sqrt(vl0 * vl0 + vl1 * vl1 + vl2 * vl2)
    if va < AIRSPEED_EPS:
        alpha = beta = 0.0
    else:
        alpha = math.atan2(vl2, vl0)
        beta = math.asin(max(-1.0, min(1.0, vl1 / va)))

    # rotors
    t1 = p.kf * speed[0] * speed[0]
    t2 = p.kf * speed[1] * speed[1]
    t3 = p.kf * speed[2] * speed[2]
    t4 = p.kf * speed[3] * speed[3]
    se, ce = math.sin(p.eta), math.cos(p.eta)
    f_ry = se * (t1 - t2 - t3 + t4)
    f_rz = -ce * (t1 + t2 + t3 + t4)
    m_rx = p.dy * ce * (-t1 + t2 + t3 - t4)
    m_ry = p.dx * ce * (t1 - t2 + t3 - t4)
    m_rz = p.K1 * (t1 + t2 - t3 - t4)

    fx = 0.0
    fy = f_ry
    fz = f_rz
    mx = ck * m_rx - sk * m_rz
    my = m_ry
    mz = sk * m_rx + ck * m_rz

    if va > 0.0 and p.rho > 0.0:
        qs = 0.5 * p.rho * va * va * p.S
        d_e = aileron[0] + aileron[1]
        d_a = aileron[1] - aileron[0]
        cl_, cd_ = _lift_drag_scalar(alpha, c)
        fw0 = -qs * (cd_ + c.CD_de * d_e)
        fw1 = qs * (c.CY_beta * beta + c.CY_da * d_a)
        fw2 = -qs * (cl_ + c.CL_de * d_e)
        lam = p.kappa - alpha
        cl, sl = math.cos(lam), math.sin(lam)
        cb, sb = math.cos(beta), math.sin(beta)
        fx += cl * cb * fw0 - cl * sb * fw1 + sl * fw2
        fy += sb * fw0 + cb * fw1
        fz += -sl * cb * fw0 + sl * sb * fw1 + cl * fw2
        c_roll, c_pitch, c_yaw = static_moment_coefficients(alpha, beta, va, omega_l, c, p)
        mx += qs * p.span * (c_roll + c.Cl_da * d_a)
        my += qs * p.chord * (c_pitch + c.Cm_de * d_e)
        mz += qs * p.span * (c_yaw + c.Cn_da * d_a)

    mg = p.mass * p.g
    fx += mg * r20
    fy += mg * r21
    fz += mg * r22
    return (np.array([fx, fy, fz]), np.array([mx, my, mz]), va, alpha, beta,
            (r00, r01, r02, r10, r11, r12, r20, r21, r22))


# ---------------------------------------------------------------------------
# Actuators
# ---------------------------------------------------------------------------


def actuator_targets(sigma, act: ActuatorParams) -> tuple[np.ndarray, np.ndarray]:
    """Steady-state rotor speeds and aileron deflections for throttle commands."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (6,):
        raise ValueError("expected six actuator commands")
    if not (sigma.min() >= 0.0 and sigma.max() <= 1.0):
        raise ValueError(f"actuator commands must lie in [0, 1]: {sigma}")
    speed = np.maximum(act.motor_gain * sigma[:4] + act.motor_bias, 0.0)
    aileron = act.servo_gain * (2.0 * sigma[4:] - 1.0) + act.servo_bias
    return speed, aileron


def actuator_step(sigma, state: ActuatorState, act: ActuatorParams, dt: float) -> ActuatorState:
    """Exact discrete update of the first-order motor and servo lags."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    speed_t, aileron_t = actuator_targets(sigma, act)
    em = math.exp(-dt / act.motor_tau)
    ea = math.exp(-dt / act.servo_tau)
    return ActuatorState(
        speed_t + (state.rotor_speed - speed_t) * em,
        aileron_t + (state.aileron - aileron_t) * ea,
    )


def throttle_for_thrust(thrust, params: VehicleParams, act: ActuatorParams) -> np.ndarray:
    """Inverse motor map: throttle whose steady rotor speed gives ``thrust``."""
    speed = np.sqrt(np.maximum(np.asarray(thrust, dtype=float), 0.0) / params.kf)
    return np.clip((speed - act.motor_bias) / act.motor_gain, 0.0, 1.0)


def throttle_for_aileron(deflection, act: ActuatorParams) -> np.ndarray:
    s = (np.asarray(deflection, dtype=float) - act.servo_bias) / act.servo_gain
    return np.clip(0.5 * (s + 1.0), 0.0, 1.0)
