"""Independent reference implementations used by the tests.

These deliberately avoid the package's optimised code paths: the extraction
oracle builds the acceleration from explicit rotation matrices and searches a
dense grid, and the allocation oracle enumerates every lower/free/upper
pattern with batched normal-equation solves.
"""

import itertools
import math

import numpy as np
from scipy.optimize import minimize

from liftwing.vehicle import blended_lift_drag


def _rx(a):
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([np.stack([o, z, z], -1), np.stack([z, c, -s], -1), np.stack([z, s, c], -1)], -2)


def _ry(a):
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([np.stack([c, z, s], -1), np.stack([z, o, z], -1), np.stack([-s, z, c], -1)], -2)


def _rz(a):
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([np.stack([c, -s, z], -1), np.stack([s, c, z], -1), np.stack([z, z, o], -1)], -2)


def thrust_direction_and_aero(pitch, roll, yaw, airspeed, params, coeffs):
    """Unit thrust direction ``n`` and aerodynamic acceleration ``a`` (earth frame).

    The acceleration for thrust ``f`` is ``(f / m) n + a``.  The wing force
    uses alpha = kappa + pitch and zero sideslip and is rotated wind -> body
    -> earth with explicit matrices.
    """
    pitch, roll = np.broadcast_arrays(np.asarray(pitch, float), np.asarray(roll, float))
    yaw = np.full_like(pitch, yaw)
    R_be = _rz(yaw) @ _rx(roll) @ _ry(pitch)
    alpha = params.kappa + pitch
    cl, cd = blended_lift_drag(alpha, coeffs)
    k = 0.5 * params.rho * airspeed**2 * params.S / params.mass
    f_w = np.stack([-k * cd, np.zeros_like(cl), -k * cl], -1)
    R_wb = _ry(params.kappa - alpha)  # beta = 0
    a = np.einsum("...ij,...j->...i", R_be @ R_wb, f_w)
    n = R_be[..., :, 2] * -1.0
    return n, a


def extraction_oracle(u_d, yaw, airspeed, params, coeffs, f_max, tilt_max, resolution=0.01):
    """Grid search over (pitch, roll) with the exact optimal thrust, then local refinement."""
    grid = np.arange(-tilt_max, tilt_max + 1e-12, resolution)
    th, ph = np.meshgrid(grid, grid, indexing="ij")
    n, a = thrust_direction_and_aero(th, ph, yaw, airspeed, params, coeffs)
    d = u_d - a
    s_max = f_max / params.mass
    s = np.clip(np.sum(n * d, -1), 0.0, s_max)
    r = np.linalg.norm(s[..., None] * n - d, axis=-1)
    i = np.unravel_index(int(np.argmin(r)), r.shape)

    def cost(x):
        nn, aa = thrust_direction_and_aero(x[1], x[2], yaw, airspeed, params, coeffs)
        e = x[0] * nn + aa - u_d
        return float(e @ e)

    x0 = np.array([s[i], th[i], ph[i]])
    bounds = [(0.0, s_max), (-tilt_max, tilt_max), (-tilt_max, tilt_max)]
    best = minimize(cost, x0, method="L-BFGS-B", bounds=bounds, options={"ftol": 1e-15, "gtol": 1e-12})
    x = best.x if best.fun < cost(x0) else x0
    return x[0] * params.mass, x[1], x[2], math.sqrt(min(best.fun, cost(x0)))


def allocation_oracle(A, b, lo, hi, feas_tol=1e-9):
    """Exact minimiser of ``||A x - b||^2`` over the box, for a batch of problems.

    ``A`` is (N, m, n), ``b`` (N, m), bounds (N, n).  Every lower/free/upper
    pattern is tried; the free block is solved from its normal equations.
    """
    N, _, n = A.shape
    best_x = np.zeros((N, n))
    best_obj = np.full(N, np.inf)
    for pattern in itertools.product((-1, 0, 1), repeat=n):
        pat = np.array(pattern)
        free = pat == 0
        x = np.where(pat < 0, lo, hi).copy()
        if free.any():
            Af = A[:, :, free]
            rhs = b - np.einsum("nij,nj->ni", A[:, :, ~free], x[:, ~free])
            M = np.einsum("nki,nkj->nij", Af, Af)
            xf = np.linalg.solve(M, np.einsum("nki,nk->ni", Af, rhs)[..., None])[..., 0]
            ok = np.all((xf >= lo[:, free] - feas_tol) & (xf <= hi[:, free] + feas_tol), axis=1)
            x[:, free] = np.clip(xf, lo[:, free], hi[:, free])
        else:
            ok = np.ones(N, dtype=bool)
        res = np.einsum("nij,nj->ni", A, x) - b
        obj = np.where(ok, np.sum(res * res, axis=1), np.inf)
        better = obj < best_obj
        best_obj[better] = obj[better]
        best_x[better] = x[better]
    return best_x, best_obj


def random_wls(rng, N, m=4, n=6):
    """Random well-scaled bounded WLS instances: (B, u_d, W_u, W_delta, gamma, delta_p, lo, hi)."""
    B = rng.normal(size=(N, m, n))
    u_d = rng.normal(scale=2.0, size=(N, m))
    W_u = rng.uniform(0.5, 2.0, size=(N, m))
    W_d = rng.uniform(0.5, 2.0, size=(N, n))
    gamma = 10.0 ** rng.uniform(-4, -1, size=N)
    lo = -rng.uniform(0.1, 1.0, size=(N, n))
    hi = rng.uniform(0.1, 1.0, size=(N, n))
    delta_p = rng.uniform(lo, hi)
    return B, u_d, W_u, W_d, gamma, delta_p, lo, hi


def stack_wls(B, u_d, W_u, W_d, gamma, delta_p):
    sg = np.sqrt(gamma)[:, None]
    A = np.concatenate((W_u[:, :, None] * B, np.einsum("ni,ij->nij", sg * W_d, np.eye(W_d.shape[1]))), axis=1)
    b = np.concatenate((W_u * u_d, sg * W_d * delta_p), axis=1)
    return A, b
