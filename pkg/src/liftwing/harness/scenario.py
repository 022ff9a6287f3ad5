"""Scenario definitions and the closed-loop runner."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from liftwing import frames
from liftwing.allocator import AllocatorConfig, ControlAllocator, moment_offset
from liftwing.config import ConfigurationError, from_mapping, load_yaml
from liftwing.controller import ControllerGains, ControlSetpoint, UnifiedController, extract_attitude_thrust
from liftwing.harness.trajectory import PathTrajectory, segments_from_config
from liftwing.power import EnergyMeter, PowerModel
from liftwing.simulator import (
    NoiseConfig,
    Sensor,
    SimState,
    SimulationAborted,
    Simulator,
    WindModel,
)
from liftwing.vehicle import (
    ActuatorParams,
    AeroCoefficients,
    VehicleParams,
    static_moment_coefficients,
)

FAMILIES = ("hover", "energy", "turn", "transition", "custom")


@dataclass
class Scenario:
    """A complete, declarative experiment description.

    ``program`` is one of

    - ``{type: hover, position: [x, y, z]}``
    - ``{type: path, speed, heading_deg, altitude, segments: [...]}``
    - ``{type: attitude, altitude, steps: [{t, pitch_deg, roll_deg, yaw_deg}]}``
    """

    name: str = "scenario"
    family: str = "custom"
    duration: float = 10.0
    seed: int = 0
    dt: float = 1e-3
    control_dt: float = 4e-3
    vehicle: dict = field(default_factory=dict)
    aero: dict = field(default_factory=dict)
    actuators: dict = field(default_factory=dict)
    gains: dict = field(default_factory=dict)
    allocator: dict = field(default_factory=dict)
    allocation: str = "with-aileron"  # with-aileron | rotor-only
    coordinated_turn: bool = True
    control_derivative_scale: float = 1.0
    wind: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    program: dict = field(default_factory=lambda: {"type": "hover"})
    airspeed_threshold: float = 18.0
    stop_after_transition: float | None = None  # s after crossing the threshold

    def __post_init__(self):
        if self.duration <= 0:
            raise ConfigurationError("duration must be positive")
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown scenario family {self.family!r}")
        if self.allocation not in ("with-aileron", "rotor-only"):
            raise ConfigurationError(f"unknown allocation mode {self.allocation!r}")
        ratio = self.control_dt / self.dt
        if self.dt <= 0 or abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigurationError("control_dt must be a positive multiple of dt")
        if self.program.get("type") not in ("hover", "path", "attitude"):
            raise ConfigurationError(f"unknown program type {self.program.get('type')!r}")

    # -- component construction -------------------------------------------------

    def vehicle_params(self) -> VehicleParams:
        return from_mapping(VehicleParams, self.vehicle)

    def aero_coefficients(self) -> AeroCoefficients:
        c = from_mapping(AeroCoefficients, self.aero)
        if self.control_derivative_scale != 1.0:
            c = c.scaled_controls(self.control_derivative_scale)
        return c

    def actuator_params(self) -> ActuatorParams:
        return from_mapping(ActuatorParams, self.actuators)

    def controller_gains(self) -> ControllerGains:
        g = from_mapping(ControllerGains, self.gains)
        g.coordinated_turn = bool(self.coordinated_turn)
        g.__post_init__()
        return g

    def allocator_config(self) -> AllocatorConfig:
        cfg = from_mapping(AllocatorConfig, self.allocator)
        cfg.use_ailerons = self.allocation == "with-aileron"
        return cfg

    def wind_model(self) -> WindModel:
        w = dict(self.wind)
        unknown = set(w) - {"constant", "gust_std", "gust_tau", "seed"}
        if unknown:
            raise ConfigurationError(f"unknown wind keys: {sorted(unknown)}")
        return WindModel(
            constant=np.asarray(w.get("constant", [0.0, 0.0, 0.0]), dtype=float),
            gust_std=np.asarray(w.get("gust_std", 0.0), dtype=float),
            gust_tau=float(w.get("gust_tau", 1.0)),
            seed=int(w.get("seed", self.seed)),
        )

    def noise_config(self) -> NoiseConfig:
        n = dict(self.noise)
        n.setdefault("seed", self.seed + 1)
        return from_mapping(NoiseConfig, n)

    def path(self) -> PathTrajectory | None:
        prg = self.program
        if prg["type"] != "path":
            return None
        speed = float(prg["speed"])
        start = np.array([0.0, 0.0, -float(prg.get("altitude", 50.0))])
        return PathTrajectory(speed, segments_from_config(prg.get("segments", []), speed), start=start,
                              heading=math.radians(float(prg.get("heading_deg", 0.0))))

    def with_overrides(self, **kwargs) -> "Scenario":
        s = copy.deepcopy(self)
        for k, v in kwargs.items():
            if not hasattr(s, k):
                raise ConfigurationError(f"unknown scenario field {k!r}")
            setattr(s, k, v)
        s.__post_init__()
        return s


def load_scenario(path) -> Scenario:
    data = load_yaml(path)
    names = set(Scenario.__dataclass_fields__)
    unknown = set(data) - names
    if unknown:
        raise ConfigurationError(f"{path}: unknown scenario keys {sorted(unknown)}")
    scenario = Scenario(**data)
    # resolve component sections eagerly so bad configs fail at load time
    scenario.vehicle_params()
    scenario.aero_coefficients()
    scenario.actuator_params()
    scenario.controller_gains()
    scenario.allocator_config()
    scenario.wind_model()
    scenario.noise_config()
    return scenario


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

LOG_COLUMNS = (
    ["t", "x", "y", "z", "vx", "vy", "vz", "roll", "pitch", "yaw", "p", "q", "r",
     "alpha", "beta", "airspeed",
     "T1", "T2", "T3", "T4", "d_ar", "d_al",
     "P1", "P2", "P3", "P4", "P_total",
     "x_d", "y_d", "z_d", "ux_d", "uy_d", "uz_d", "f_d", "roll_d", "pitch_d", "yaw_d",
     "p_d", "q_d", "r_d", "mx_d", "my_d", "mz_d", "w",
     "res_f", "res_mx", "res_my", "res_mz", "alloc_iters", "active_mask"]
)
LOG_SCHEMA_VERSION = 1


@dataclass
class RunResult:
    scenario: Scenario
    columns: list
    rows: np.ndarray  # controller-rate samples
    energy: float
    turn_windows: list
    transition_start: float | None
    aborted: str | None = None
    extraction_failures: int = 0
    allocation_failures: int = 0

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]


def trim_state(speed: float, heading: float, altitude: float, params, coeffs, act) -> tuple[SimState, tuple]:
    """Level-flight state at ``speed`` with thrust and pitch from the extraction."""
    f_max = 4.0 * params.max_rotor_thrust * math.cos(params.eta)
    res = extract_attitude_thrust(np.array([0.0, 0.0, -params.g]), heading, speed, params, coeffs,
                                  f_max, math.radians(50.0))
    thrust = res.f / (4.0 * math.cos(params.eta))
    state = SimState()
    state.p = np.array([0.0, 0.0, -altitude])
    state.v = speed * np.array([math.cos(heading), math.sin(heading), 0.0])
    state.q = frames.quat_from_euler_zxy(0.0, res.pitch, heading)
    state.actuators.rotor_speed[:] = math.sqrt(thrust / params.kf)
    return state, (res.f, res.pitch, 0.0)


def run_scenario(sc: Scenario, seed: int | None = None) -> RunResult:
    """Closed-loop run: physics at ``dt``, controller and allocator at ``control_dt``."""
    if seed is not None:
        sc = sc.with_overrides(seed=seed)
    params = sc.vehicle_params()
    coeffs = sc.aero_coefficients()
    act = sc.actuator_params()
    gains = sc.controller_gains()
    wind = sc.wind_model()
    sensor = Sensor(sc.noise_config())
    prg = sc.program
    path = sc.path()

    ctrl = UnifiedController(params, coeffs, gains)
    alloc = ControlAllocator(params, coeffs, act, sc.allocator_config())
    transition_start = None
    steps = []
    if prg["type"] == "path":
        heading = math.radians(float(prg.get("heading_deg", 0.0)))
        state, trim = trim_state(path.speed, heading, float(prg.get("altitude", 50.0)), params, coeffs, act)
        ctrl.reset(yaw=heading)
        ctrl._prev = trim
        alloc.reset(np.array([trim[0] / (4.0 * math.cos(params.eta))] * 4 + [0.0, 0.0]))
    else:
        state = SimState()
        if prg["type"] == "hover":
            state.p = np.asarray(prg.get("position", [0.0, 0.0, -50.0]), dtype=float)
        else:
            state.p = np.array([0.0, 0.0, -float(prg.get("altitude", 50.0))])
            steps = sorted(prg.get("steps", []), key=lambda s: float(s["t"]))
            if steps:
                transition_start = float(steps[0]["t"])
        state.actuators.rotor_speed[:] = math.sqrt(params.hover_thrust / params.kf)
        ctrl.reset(yaw=0.0)
    p_hold = state.p.copy()

    sim = Simulator(params, coeffs, act, state, wind, sc.dt)
    meter = EnergyMeter(sc.control_dt, PowerModel())
    n_sub = int(round(sc.control_dt / sc.dt))
    n_ctrl = int(math.floor(sc.duration / sc.control_dt + 1e-9))
    rows = []
    aborted = None
    attitude = [0.0, 0.0, 0.0]
    crossed_at = None
    sigma = None

    for k in range(n_ctrl + 1):
        t = k * sc.control_dt
        airdata = sim.airdata()
        meas = sensor.measure(sim.state, airdata)
        if path is not None:
            p_d, v_d, a_d = path.sample(t)
            sp = ControlSetpoint(mode="trajectory", p=p_d, v=v_d, a=a_d)
        elif prg["type"] == "hover":
            sp = ControlSetpoint(mode="trajectory", p=p_hold)
        else:
            for stp in steps:
                if float(stp["t"]) <= t + 1e-12:
                    attitude = [math.radians(float(stp.get("roll_deg", 0.0))),
                                math.radians(float(stp.get("pitch_deg", 0.0))),
                                math.radians(float(stp.get("yaw_deg", 0.0)))]
            sp = ControlSetpoint(mode="attitude", p=p_hold, roll=attitude[0], pitch=attitude[1],
                                 yaw=attitude[2])
        out = ctrl.update(meas, sp, sc.control_dt)
        va, alpha, beta = meas.airspeed, meas.alpha, meas.beta
        Q = 0.5 * params.rho * va * va
        c_l, c_m, c_n = static_moment_coefficients(alpha, beta, va, meas.omega, coeffs, params)
        res = alloc.step(out.f_d, out.m_d, Q, moment_offset(Q, c_l, c_m, c_n, params), sc.control_dt)
        sigma = alloc.throttle(res.delta)
        per_motor = meter.update(sigma[:4])

        s = sim.state
        roll, pitch, yaw = s.euler()
        true_va, true_alpha, true_beta = airdata
        rows.append(
            [t, *s.p, *s.v, roll, pitch, yaw, *s.omega, true_alpha, true_beta, true_va,
             *res.delta, *per_motor, float(np.sum(per_motor)),
             *sp.p, *out.u_d, out.f_d, *out.euler_d, *out.omega_d, *out.m_d, out.w,
             *res.residual, res.iterations, res.active_mask]
        )
        if crossed_at is None and transition_start is not None and t >= transition_start \
                and true_va > sc.airspeed_threshold:
            crossed_at = t
        if crossed_at is not None and sc.stop_after_transition is not None \
                and t >= crossed_at + sc.stop_after_transition:
            break
        if k == n_ctrl:
            break
        try:
            for _ in range(n_sub):
                sim.step(sigma)
        except SimulationAborted as exc:
            aborted = str(exc)
            break

    return RunResult(
        scenario=sc,
        columns=list(LOG_COLUMNS),
        rows=np.array(rows, dtype=float),
        energy=meter.energy,
        turn_windows=path.turn_windows() if path is not None else [],
        transition_start=transition_start,
        aborted=aborted,
        extraction_failures=ctrl.extraction_failures,
        allocation_failures=alloc.failures,
    )


def load_scenarios(directory) -> list[Scenario]:
    files = sorted(Path(directory).glob("*.yaml")) + sorted(Path(directory).glob("*.yml"))
    if not files:
        raise ConfigurationError(f"no scenario files in {directory}")
    return [load_scenario(f) for f in files]
