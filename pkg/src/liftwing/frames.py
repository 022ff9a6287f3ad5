"""Rotation and frame-conversion helpers.

Conventions
-----------
- Quaternions are scalar-first Hamilton quaternions ``[w, x, y, z]``.
- ``q_be`` rotates body-frame vectors into the earth frame:
  ``v_e = R(q_be) @ v_b``.
- Euler angles use the ZXY sequence, ``R = Rz(yaw) @ Rx(roll) @ Ry(pitch)``.
  With this sequence the lifting-frame attitude is obtained from the body
  attitude by adding the wing installation angle to pitch, since
  ``R_l^b = Ry(kappa)``.
- Earth frame is north-east-down; body and lifting frames are
  forward-right-down.
"""

from __future__ import annotations

import math

import numpy as np

from liftwing.config import ConfigurationError

TWO_PI = 2.0 * math.pi


def wrap_pi(angle):
    """Wrap an angle (scalar or array) into the half-open interval [-pi, pi)."""
    if np.ndim(angle) == 0:
        a = math.fmod(float(angle) + math.pi, TWO_PI)
        if a < 0.0:
            a += TWO_PI
        a -= math.pi
        # fmod can land exactly on +pi after the shift for inputs just below -pi
        return -math.pi if a >= math.pi else a
    a = np.mod(np.asarray(angle, dtype=float) + math.pi, TWO_PI) - math.pi
    return np.where(a >= math.pi, -math.pi, a)


def sat_vec(x, x_min, x_max) -> np.ndarray:
    """Elementwise clamp of ``x`` into ``[x_min, x_max]``."""
    x = np.asarray(x, dtype=float)
    lo = np.broadcast_to(np.asarray(x_min, dtype=float), x.shape)
    hi = np.broadcast_to(np.asarray(x_max, dtype=float), x.shape)
    if np.any(lo > hi):
        raise ConfigurationError(f"saturation bounds inverted: min={lo}, max={hi}")
    return np.where(x < lo, lo, np.where(x > hi, hi, x))


def skew(v) -> np.ndarray:
    """Skew-symmetric matrix with ``skew(v) @ w == cross(v, w)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


# ---------------------------------------------------------------------------
# Quaternion algebra
# ---------------------------------------------------------------------------


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if n == 0.0 or not math.isfinite(n):
        raise ValueError(f"cannot normalize quaternion {q}")
    return q / n


def quat_mul(p, q) -> np.ndarray:
    """Hamilton product ``p ⊗ q``."""
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return np.array(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ]
    )


def quat_conj(q) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]], dtype=float)


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    h = 0.5 * angle
    s = math.sin(h) / n
    return np.array([math.cos(h), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_from_euler_zxy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Quaternion of ``Rz(yaw) @ Rx(roll) @ Ry(pitch)``."""
    cr, sr = math.cos(0.5 * roll), math.sin(0.5 * roll)
    cp, sp = math.cos(0.5 * pitch), math.sin(0.5 * pitch)
    cy, sy = math.cos(0.5 * yaw), math.sin(0.5 * yaw)
    # qz(yaw) ⊗ qx(roll) ⊗ qy(pitch), expanded
    return np.array(
        [
            cy * cr * cp - sy * sr * sp,
            cy * sr * cp - sy * cr * sp,
            cy * cr * sp + sy * sr * cp,
            cy * sr * sp + sy * cr * cp,
        ]
    )


def euler_zxy_from_matrix(R) -> tuple[float, float, float]:
    """(roll, pitch, yaw) of a ZXY rotation matrix."""
    s = min(1.0, max(-1.0, float(R[2][1])))
    roll = math.asin(s)
    pitch = math.atan2(-float(R[2][0]), float(R[2][2]))
    yaw = math.atan2(-float(R[0][1]), float(R[1][1]))
    return roll, pitch, yaw


def euler_zxy_from_quat(q) -> tuple[float, float, float]:
    return euler_zxy_from_matrix(rot_body_to_earth(q))


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    return np.array(
        [
            [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
            [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
            [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
        ]
    )


def quat_from_matrix(R) -> np.ndarray:
    """Shepperd's method; returns the quaternion with non-negative scalar part."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = quat_normalize(q)
    return -q if q[0] < 0.0 else q


# ---------------------------------------------------------------------------
# Frame rotations
# ---------------------------------------------------------------------------


def rot_wind_to_body(lam: float, beta: float) -> np.ndarray:
    """Wind-to-body rotation, ``lam = kappa - alpha``.

    Equal to ``Ry(lam) @ Rz(beta)``.
    """
    lam = wrap_pi(lam)
    beta = wrap_pi(beta)
    cl, sl = math.cos(lam), math.sin(lam)
    cb, sb = math.cos(beta), math.sin(beta)
    return np.array(
        [
            [cl * cb, -cl * sb, sl],
            [sb, cb, 0.0],
            [-sl * cb, sl * sb, cl],
        ]
    )


def rot_lifting_to_body(kappa: float) -> np.ndarray:
    """Constant lifting-wing to body rotation (pitch by the installation angle)."""
    c, s = math.cos(kappa), math.sin(kappa)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_body_to_earth(q) -> np.ndarray:
    return quat_to_matrix(q)


def quat_lifting_to_body(kappa: float) -> np.ndarray:
    return np.array([math.cos(0.5 * kappa), 0.0, math.sin(0.5 * kappa), 0.0])


# ---------------------------------------------------------------------------
# Attitude error
# ---------------------------------------------------------------------------


def quat_error(q_d, q) -> np.ndarray:
    """Error quaternion ``q_d* ⊗ q`` so that ``q = q_d ⊗ q_e``."""
    return quat_normalize(quat_mul(quat_conj(q_d), q))


def axis_angle_error(q_e) -> np.ndarray:
    """Rotation vector of ``q_e`` along the shortest path; norm never exceeds pi.

    The half angle is taken from ``atan2(|v|, w)``, which equals ``acos(w)``
    for unit quaternions but keeps full precision near zero rotation.
    """
    w = float(q_e[0])
    v = np.asarray(q_e[1:], dtype=float)
    n = math.sqrt(float(v @ v))
    if n == 0.0:
        return np.zeros(3)
    angle = wrap_pi(2.0 * math.atan2(n, w))
    if angle == 0.0:
        return np.zeros(3)
    sign = 1.0 if w >= 0.0 else -1.0
    return sign * (angle / math.sin(0.5 * angle)) * v
