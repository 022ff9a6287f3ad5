"""Weighted least-squares control allocation.

Solves

    min ||W_u (B d - u_d)||^2 + gamma ||W_d (d - d_p)||^2   s.t.  lo <= d <= hi

for the six actuators ``d = [T1, T2, T3, T4, d_ar, d_al]`` with an active-set
method on the stacked least-squares form.  The virtual control is
``u = [f_z, m_x, m_y, m_z]`` in the lifting frame; ``f_z`` is the body z-force,
so a positive thrust demand ``f_d`` enters as ``-f_d``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from liftwing.config import ConfigurationError
from liftwing.vehicle import (
    ActuatorParams,
    AeroCoefficients,
    VehicleParams,
    throttle_for_aileron,
    throttle_for_thrust,
)

FREE, LOWER, UPPER = 0, -1, 1


def effectiveness_constants(params: VehicleParams) -> tuple[float, float, float, float, float]:
    ce = math.cos(params.eta)
    ck, sk = math.cos(params.kappa), math.sin(params.kappa)
    k1 = params.K1
    k2 = params.dy * ce * ck + k1 * sk
    k3 = params.dy * ce * ck - k1 * sk
    k4 = params.dy * ce * sk + k1 * ck
    k5 = params.dy * ce * sk - k1 * ck
    return k1, k2, k3, k4, k5


def build_effectiveness(params: VehicleParams, coeffs: AeroCoefficients, Q: float) -> np.ndarray:
    """4x6 effectiveness matrix at dynamic pressure ``Q`` (Pa)."""
    if Q < 0:
        raise ValueError("dynamic pressure must be non-negative")
    ce = math.cos(params.eta)
    _, k2, k3, k4, k5 = effectiveness_constants(params)
    dxc = params.dx * ce
    qsb = Q * params.S * params.span
    qsc = Q * params.S * params.chord
    return np.array(
        [
            [-ce, -ce, -ce, -ce, 0.0, 0.0],
            [-k2, k3, k2, -k3, -qsb * coeffs.Cl_da, qsb * coeffs.Cl_da],
            [dxc, -dxc, dxc, -dxc, qsc * coeffs.Cm_de, qsc * coeffs.Cm_de],
            [-k5, k4, k5, -k4, -qsb * coeffs.Cn_da, qsb * coeffs.Cn_da],
        ]
    )


def moment_offset(Q: float, C_l: float, C_m: float, C_n: float, params: VehicleParams) -> np.ndarray:
    """Uncontrolled aerodynamic moments, subtracted from the desired moments."""
    qs = Q * params.S
    return np.array([qs * params.span * C_l, qs * params.chord * C_m, qs * params.span * C_n])


def virtual_control(f_d: float, m_d, offset) -> np.ndarray:
    """Desired virtual control ``[-f_d, m_d - offset]``."""
    m_d = np.asarray(m_d, dtype=float)
    return np.concatenate(([-f_d], m_d - np.asarray(offset, dtype=float)))


def preferred_vector(delta_last, mode: str = "energy") -> np.ndarray:
    delta_last = np.asarray(delta_last, dtype=float)
    if mode == "hold":
        return delta_last.copy()
    if mode == "energy":
        out = delta_last.copy()
        out[:4] = np.mean(delta_last[:4])
        return out
    raise ConfigurationError(f"unknown preference mode {mode!r}")


def rate_limited_bounds(delta_last, delta_min, delta_max, rate_step):
    lo = np.maximum(delta_min, np.asarray(delta_last) - rate_step)
    hi = np.minimum(delta_max, np.asarray(delta_last) + rate_step)
    return lo, hi


@dataclass
class AllocationProblem:
    B: np.ndarray
    u_d: np.ndarray
    W_u: np.ndarray  # diagonal entries
    W_delta: np.ndarray  # diagonal entries
    gamma: float
    delta_p: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        m, n = self.B.shape
        self.u_d = np.asarray(self.u_d, dtype=float).reshape(m)
        self.W_u = _diag_weights(self.W_u, m)
        self.W_delta = _diag_weights(self.W_delta, n)
        self.delta_p = np.asarray(self.delta_p, dtype=float).reshape(n)
        self.lower = np.asarray(self.lower, dtype=float).reshape(n)
        self.upper = np.asarray(self.upper, dtype=float).reshape(n)
        if self.gamma <= 0:
            raise ConfigurationError("gamma must be positive")
        if np.any(self.lower > self.upper):
            raise ConfigurationError(f"infeasible bounds: lower={self.lower}, upper={self.upper}")

    @property
    def n(self) -> int:
        return self.B.shape[1]

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """``(A, b)`` with objective ``||A d - b||^2``."""
        sg = math.sqrt(self.gamma)
        A = np.vstack((self.W_u[:, None] * self.B, np.diag(sg * self.W_delta)))
        b = np.concatenate((self.W_u * self.u_d, sg * self.W_delta * self.delta_p))
        return A, b

    def objective(self, delta) -> float:
        r = self.W_u * (self.B @ delta - self.u_d)
        s = self.W_delta * (delta - self.delta_p)
        return float(r @ r + self.gamma * (s @ s))

    def gradient(self, delta) -> np.ndarray:
        r = self.W_u**2 * (self.B @ delta - self.u_d)
        return 2.0 * (self.B.T @ r + self.gamma * self.W_delta**2 * (delta - self.delta_p))


def _diag_weights(w, size: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim == 2:
        if np.any(w != np.diag(np.diag(w))):
            raise ConfigurationError("weighting matrices must be diagonal")
        w = np.diag(w)
    w = np.broadcast_to(w, (size,)).copy()
    if np.any(w <= 0):
        raise ConfigurationError("weights must be positive")
    return w


@dataclass
class AllocationResult:
    delta: np.ndarray
    residual: np.ndarray  # B delta - u_d
    active: np.ndarray  # -1 lower, +1 upper, 0 free
    iterations: int
    converged: bool
    objective: float

    @property
    def active_mask(self) -> int:
        """Bitmask of actuators held at a bound (bit i for actuator i)."""
        return int(sum(1 << i for i, a in enumerate(self.active) if a != FREE))


def allocate(problem: AllocationProblem, warm_start=None, max_iter: int = 100, tol: float = 1e-12) -> AllocationResult:
    """Active-set solution of the bounded WLS problem.

    ``warm_start`` is a previous :class:`AllocationResult` (or an active-set
    array); its working set seeds the iteration.  One constraint is added or
    released per iteration.  If ``max_iter`` is reached the best feasible
    iterate is returned with ``converged=False``.
    """
    A, b = problem.stacked()
    lo, hi = problem.lower, problem.upper
    n = problem.n
    fixed = lo == hi

    W = np.zeros(n, dtype=int)
    if warm_start is not None:
        ws = warm_start.active if isinstance(warm_start, AllocationResult) else warm_start
        W[:] = np.asarray(ws, dtype=int)
    W[fixed] = LOWER
    x = np.clip(problem.delta_p, lo, hi)
    x[W == LOWER] = lo[W == LOWER]
    x[W == UPPER] = hi[W == UPPER]

    best_x, best_obj = x.copy(), _obj(A, b, x)
    scale = max(1.0, float(np.max(np.abs(A.T @ b))))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        free = W == FREE
        r = b - A @ x
        if free.any():
            p_free, *_ = np.linalg.lstsq(A[:, free], r, rcond=None)
        else:
            p_free = np.zeros(0)
        p = np.zeros(n)
        p[free] = p_free
        x_new = x + p
        if np.all(x_new[free] >= lo[free]) and np.all(x_new[free] <= hi[free]):
            x = x_new
            # multipliers of the active constraints; all must be non-negative
            g = A.T @ (A @ x - b)
            lam = np.where(W == LOWER, g, -g)
            lam[(W == FREE) | fixed] = np.inf
            i = int(np.argmin(lam))
            if lam[i] >= -tol * scale:
                converged = True
                break
            W[i] = FREE
        else:
            # step to the first blocking bound
            step = 1.0
            block = -1
            for j in np.flatnonzero(free):
                if p[j] < 0 and x_new[j] < lo[j]:
                    s = (lo[j] - x[j]) / p[j]
                elif p[j] > 0 and x_new[j] > hi[j]:
                    s = (hi[j] - x[j]) / p[j]
                else:
                    continue
                if s < step:
                    step, block = s, j
            x = x + step * p
            W[block] = LOWER if p[block] < 0 else UPPER
        x = np.clip(x, lo, hi)
        x[W == LOWER] = lo[W == LOWER]
        x[W == UPPER] = hi[W == UPPER]
        obj = _obj(A, b, x)
        if obj < best_obj:
            best_x, best_obj = x.copy(), obj
    if not converged:
        x = best_x
    x = np.clip(x, lo, hi)
    return AllocationResult(
        delta=x,
        residual=problem.B @ x - problem.u_d,
        active=W.copy(),
        iterations=it,
        converged=converged,
        objective=problem.objective(x),
    )


def _obj(A, b, x) -> float:
    r = A @ x - b
    return float(r @ r)


def kkt_check(problem: AllocationProblem, delta, bound_tol: float = 1e-12) -> float:
    """Largest violation of the first-order optimality conditions at ``delta``."""
    delta = np.asarray(delta, dtype=float)
    lo, hi = problem.lower, problem.upper
    if np.any(delta < lo - bound_tol) or np.any(delta > hi + bound_tol):
        raise ValueError("delta outside bounds")
    g = problem.gradient(delta)
    span = np.maximum(1.0, np.abs(lo) + np.abs(hi))
    at_lo = delta <= lo + bound_tol * span
    at_hi = delta >= hi - bound_tol * span
    viol = np.abs(g)
    viol = np.where(at_lo & ~at_hi, np.maximum(0.0, -g), viol)
    viol = np.where(at_hi & ~at_lo, np.maximum(0.0, g), viol)
    viol = np.where(at_lo & at_hi, 0.0, viol)
    return float(np.max(viol)) if viol.size else 0.0


def enumerate_active_sets(problem: AllocationProblem, feas_tol: float = 1e-10) -> tuple[np.ndarray, float]:
    """Exhaustive oracle: try every lower/upper/free pattern.

    Exponential in the number of actuators; intended for verification only.
    """
    A, b = problem.stacked()
    lo, hi = problem.lower, problem.upper
    n = problem.n
    best, best_obj = None, np.inf
    for pattern in itertools.product((LOWER, FREE, UPPER), repeat=n):
        pat = np.array(pattern)
        x = np.where(pat == LOWER, lo, np.where(pat == UPPER, hi, 0.0))
        free = pat == FREE
        if free.any():
            xf, *_ = np.linalg.lstsq(A[:, free], b - A[:, ~free] @ x[~free], rcond=None)
            if np.any(xf < lo[free] - feas_tol) or np.any(xf > hi[free] + feas_tol):
                continue
            x[free] = np.clip(xf, lo[free], hi[free])
        obj = _obj(A, b, x)
        if obj < best_obj:
            best, best_obj = x, obj
    return best, best_obj


# ---------------------------------------------------------------------------
# Stateful allocator used in the control loop
# ---------------------------------------------------------------------------


@dataclass
class AllocatorConfig:
    W_u: np.ndarray = field(default_factory=lambda: np.array([10.0, 20.0, 20.0, 20.0]))
    W_delta_energy: np.ndarray = field(default_factory=lambda: np.array([5.0, 5.0, 5.0, 5.0, 0.1, 0.1]))
    W_delta_hold: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0, 1.0, 1.0, 0.1, 0.1]))
    gamma: float = 1e-4
    mode: str = "energy"  # energy | hold
    use_ailerons: bool = True
    rotor_rate: float = 40.0  # N/s
    aileron_rate: float = math.radians(300.0)  # rad/s
    max_iter: int = 100
    warm_start: bool = True


class ControlAllocator:
    """Per-cycle allocation with rate-limited bounds and warm start."""

    def __init__(self, params: VehicleParams, coeffs: AeroCoefficients, act: ActuatorParams,
                 config: AllocatorConfig | None = None):
        self.params = params
        self.coeffs = coeffs
        self.act = act
        self.config = config or AllocatorConfig()
        if self.config.mode not in ("energy", "hold"):
            raise ConfigurationError(f"unknown allocation mode {self.config.mode!r}")
        lim = params.aileron_limit if self.config.use_ailerons else 0.0
        self.delta_min = np.array([0.0] * 4 + [-lim] * 2)
        self.delta_max = np.array([params.max_rotor_thrust] * 4 + [lim] * 2)
        self.reset()

    def reset(self, delta=None):
        if delta is None:
            delta = np.array([self.params.hover_thrust] * 4 + [0.0, 0.0])
        self.delta_last = np.clip(np.asarray(delta, dtype=float), self.delta_min, self.delta_max)
        self._warm = None
        self.failures = 0

    def problem(self, f_d: float, m_d, Q: float, offset, dt: float) -> AllocationProblem:
        cfg = self.config
        B = build_effectiveness(self.params, self.coeffs, Q)
        rate = np.array([cfg.rotor_rate * dt] * 4 + [cfg.aileron_rate * dt] * 2)
        lo, hi = rate_limited_bounds(self.delta_last, self.delta_min, self.delta_max, rate)
        W_delta = cfg.W_delta_energy if cfg.mode == "energy" else cfg.W_delta_hold
        return AllocationProblem(
            B=B,
            u_d=virtual_control(f_d, m_d, offset),
            W_u=cfg.W_u,
            W_delta=W_delta,
            gamma=cfg.gamma,
            delta_p=preferred_vector(self.delta_last, cfg.mode),
            lower=lo,
            upper=hi,
        )

    def step(self, f_d: float, m_d, Q: float, offset, dt: float) -> AllocationResult:
        prob = self.problem(f_d, m_d, Q, offset, dt)
        warm = self._warm if self.config.warm_start else None
        res = allocate(prob, warm, max_iter=self.config.max_iter)
        if not res.converged:
            self.failures += 1
        self.delta_last = res.delta.copy()
        self._warm = res
        return res

    def throttle(self, delta) -> np.ndarray:
        """Normalized actuator commands for an allocation vector."""
        delta = np.asarray(delta, dtype=float)
        return np.concatenate(
            (throttle_for_thrust(delta[:4], self.params, self.act), throttle_for_aileron(delta[4:], self.act))
        )
