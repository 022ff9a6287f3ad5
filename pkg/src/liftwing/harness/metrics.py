"""Scenario metrics and paired run comparison."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from liftwing.config import ConfigurationError

HIGH_SPEED = 15.0  # m/s, at or above: aileron and coordinated-turn claims apply
LOW_SPEED = 7.5  # m/s, at or below: energy parity claim applies
LOW_SPEED_ENERGY_TOL = 0.03
HIGH_SPEED_ENERGY_GAIN = 0.05
TURN_SIDESLIP_RATIO = 0.5


@dataclass
class ScenarioMetrics:
    name: str
    family: str
    transition_time: float | None  # s, None when the threshold is never crossed
    max_altitude_error: float  # m
    sideslip_rms: float  # rad
    sideslip_peak: float  # rad
    position_rms: float  # m
    energy: float  # J
    mean_power: float  # W
    thrust_variance: float  # N^2, across rotors, time averaged
    duration: float = 0.0  # s actually simulated
    aborted: str | None = None
    # descriptors used to pair runs
    speed: float | None = None
    allocation: str = "with-aileron"
    coordinated_turn: bool = True
    kappa: float = 0.0
    pitch_step: float | None = None
    extraction_failures: int = 0
    allocation_failures: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioMetrics":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigurationError(f"unknown metric keys {sorted(unknown)}")
        return cls(**data)


def _window_mask(t: np.ndarray, windows) -> np.ndarray:
    if not windows:
        return np.ones_like(t, dtype=bool)
    mask = np.zeros_like(t, dtype=bool)
    for t0, t1 in windows:
        mask |= (t >= t0) & (t <= t1)
    if not mask.any():
        return np.ones_like(t, dtype=bool)
    return mask


def transition_time(t, airspeed, start, threshold) -> float | None:
    """First time after ``start`` with airspeed above ``threshold``, relative to ``start``."""
    if start is None:
        return None
    idx = np.nonzero((t >= start) & (airspeed > threshold))[0]
    if idx.size == 0:
        return None
    return float(t[idx[0]] - start)


def compute_metrics(result, airspeed_threshold: float | None = None) -> ScenarioMetrics:
    sc = result.scenario
    threshold = sc.airspeed_threshold if airspeed_threshold is None else airspeed_threshold
    t = result.column("t")
    beta = result.column("beta")
    dz = result.column("z") - result.column("z_d")
    dp = np.stack([result.column(c) - result.column(c + "_d") for c in ("x", "y", "z")], axis=1)
    thrusts = np.stack([result.column(f"T{i}") for i in range(1, 5)], axis=1)
    mask = _window_mask(t, result.turn_windows)
    b = beta[mask]
    duration = float(t[-1] - t[0]) if t.size > 1 else 0.0

    prg = sc.program
    speed = float(prg["speed"]) if prg.get("type") == "path" else None
    pitch_step = None
    if prg.get("type") == "attitude" and prg.get("steps"):
        first = sorted(prg["steps"], key=lambda s: float(s["t"]))[0]
        pitch_step = float(first.get("pitch_deg", 0.0))

    return ScenarioMetrics(
        name=sc.name,
        family=sc.family,
        transition_time=transition_time(t, result.column("airspeed"), result.transition_start, threshold),
        max_altitude_error=float(np.max(np.abs(dz))),
        sideslip_rms=float(np.sqrt(np.mean(b * b))),
        sideslip_peak=float(np.max(np.abs(b))),
        position_rms=float(np.sqrt(np.mean(np.sum(dp * dp, axis=1)))),
        energy=float(result.energy),
        mean_power=float(result.energy / duration) if duration > 0 else 0.0,
        thrust_variance=float(np.mean(np.var(thrusts, axis=1))),
        duration=duration,
        aborted=result.aborted,
        speed=speed,
        allocation=sc.allocation,
        coordinated_turn=bool(sc.coordinated_turn),
        kappa=math.degrees(sc.vehicle_params().kappa),
        pitch_step=pitch_step,
        extraction_failures=result.extraction_failures,
        allocation_failures=result.allocation_failures,
    )


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


@dataclass
class ComparisonReport:
    a: str
    b: str
    family: str
    deltas: dict  # b - a for every numeric metric
    relative: dict  # (b - a) / |a| where a != 0
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def lines(self) -> list[str]:
        out = [f"compare {self.a} -> {self.b} ({self.family})"]
        for k, v in self.deltas.items():
            rel = self.relative.get(k)
            out.append(f"  d{k} = {v:.6g}" + (f" ({100 * rel:+.2f}%)" if rel is not None else ""))
        out.extend("  " + c.line() for c in self.checks)
        return out


NUMERIC = ("transition_time", "max_altitude_error", "sideslip_rms", "sideslip_peak", "position_rms",
           "energy", "mean_power", "thrust_variance")


def _energy_checks(a: ScenarioMetrics, b: ScenarioMetrics) -> list[Check]:
    if a.allocation == b.allocation or a.speed is None or b.speed is None or a.speed != b.speed:
        return []
    with_ail, without = (a, b) if a.allocation == "with-aileron" else (b, a)
    rel = (with_ail.energy - without.energy) / without.energy
    checks = []
    if without.speed <= LOW_SPEED:
        checks.append(Check("energy parity at low speed", abs(rel) < LOW_SPEED_ENERGY_TOL,
                            f"dE = {100 * rel:+.2f}% (limit {100 * LOW_SPEED_ENERGY_TOL:.0f}%)"))
    elif without.speed >= HIGH_SPEED:
        checks.append(Check("aileron saves energy at high speed", -rel >= HIGH_SPEED_ENERGY_GAIN,
                            f"dE = {100 * rel:+.2f}% (need <= -{100 * HIGH_SPEED_ENERGY_GAIN:.0f}%)"))
    return checks


def _turn_checks(a: ScenarioMetrics, b: ScenarioMetrics) -> list[Check]:
    if a.coordinated_turn == b.coordinated_turn or a.speed is None or a.speed != b.speed:
        return []
    ct, no = (a, b) if a.coordinated_turn else (b, a)
    ratio = ct.sideslip_rms / no.sideslip_rms if no.sideslip_rms > 0 else math.inf
    if ct.speed >= HIGH_SPEED:
        return [Check("coordinated turn reduces sideslip", ratio < TURN_SIDESLIP_RATIO,
                      f"rms {math.degrees(ct.sideslip_rms):.3f} deg vs {math.degrees(no.sideslip_rms):.3f} deg "
                      f"(ratio {ratio:.3f}, limit {TURN_SIDESLIP_RATIO})")]
    return []


def _transition_checks(a: ScenarioMetrics, b: ScenarioMetrics) -> list[Check]:
    if a.transition_time is None or b.transition_time is None:
        missing = [m.name for m in (a, b) if m.transition_time is None]
        return [Check("transition completes", False, f"never crossed threshold: {', '.join(missing)}")]
    if not math.isclose(a.kappa, b.kappa):
        fast, slow = (a, b) if a.kappa < b.kappa else (b, a)
        why = "smaller installation angle transitions faster"
    elif a.pitch_step is not None and b.pitch_step is not None and a.pitch_step != b.pitch_step:
        fast, slow = (a, b) if a.pitch_step < b.pitch_step else (b, a)
        why = "steeper pitch step transitions faster"
    else:
        return []
    return [Check(why, fast.transition_time < slow.transition_time,
                  f"{fast.name} {fast.transition_time:.3f} s < {slow.name} {slow.transition_time:.3f} s")]


def compare_runs(a: ScenarioMetrics, b: ScenarioMetrics) -> ComparisonReport:
    """Paired deltas (b - a) and the orderings that apply to the run family."""
    if a.family != b.family:
        raise ConfigurationError(f"cannot compare families {a.family!r} and {b.family!r}")
    deltas, relative = {}, {}
    for k in NUMERIC:
        va, vb = getattr(a, k), getattr(b, k)
        if va is None or vb is None:
            continue
        deltas[k] = vb - va
        if va != 0:
            relative[k] = (vb - va) / abs(va)
    checks = []
    if a.aborted or b.aborted:
        checks.append(Check("runs completed", False, f"aborted: {a.aborted or b.aborted}"))
    if a.family == "energy":
        checks += _energy_checks(a, b)
    elif a.family == "turn":
        checks += _turn_checks(a, b)
    elif a.family == "transition":
        checks += _transition_checks(a, b)
    return ComparisonReport(a.name, b.name, a.family, deltas, relative, checks)
