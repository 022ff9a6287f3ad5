import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import extraction_oracle

from liftwing import frames
from liftwing.controller import (
    ControllerGains,
    ControlSetpoint,
    PositionController,
    RateController,
    UnifiedController,
    acceleration_model,
    airspeed_weight,
    attitude_control,
    closed_form_extraction,
    coordinated_turn,
    desired_yaw,
    extract_attitude_thrust,
    rate_control,
    synthesize_rates,
    thrust_for_altitude,
)
from liftwing.config import ConfigurationError
from liftwing.simulator import Measurement
from liftwing.vehicle import AeroCoefficients, VehicleParams

P = VehicleParams()
C = AeroCoefficients()
G = ControllerGains()
F_MAX = 4 * P.max_rotor_thrust * math.cos(P.eta)
TILT = math.radians(50)
HOVER_U = np.array([0.0, 0.0, -P.g])

demands = st.tuples(st.floats(-8, 8), st.floats(-8, 8), st.floats(-25, 5))


def test_gains_validation():
    with pytest.raises(ConfigurationError):
        ControllerGains(Kp_p=np.array([-1.0, 1.0, 1.0]))
    with pytest.raises(ConfigurationError):
        ControllerGains(V_min=12.0, V_max=3.0)


def test_position_control_examples():
    pc = PositionController(G, P.g)
    np.testing.assert_allclose(pc.update(np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3), 0.01),
                               [0, 0, -9.81])
    pc = PositionController(ControllerGains(Kp_i=np.zeros(3)), P.g)
    u = pc.update([0.5, 0, 0], np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3), 0.01)
    assert u[0] == pytest.approx(-2.0 * 0.5)
    # error held for one second: the integral term contributes -k_i * e * 1 s
    gains = ControllerGains(Kp_p=np.zeros(3), Kp_d=np.zeros(3))
    pc = PositionController(gains, P.g)
    for _ in range(250):
        u = pc.update([0.3, 0, 0], np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3), 0.004)
    assert u[0] == pytest.approx(-0.4 * 0.3 * 1.0, rel=1e-9)
    # the clamp bounds the integral contribution
    for _ in range(100000):
        u = pc.update([10.0, 0, 0], np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3), 0.01)
    assert u[0] == pytest.approx(-gains.pos_int_max[0])


def test_extraction_hover():
    r = extract_attitude_thrust(HOVER_U, 0.0, 0.0, P, C, F_MAX, TILT)
    assert r.f == pytest.approx(P.mass * P.g, abs=1e-9)
    assert abs(r.pitch) < 1e-9 and abs(r.roll) < 1e-9
    assert closed_form_extraction(HOVER_U, 0.3, P.mass) == pytest.approx((P.mass * P.g, 0.0, 0.0))


def test_extraction_level_flight_uses_wing_lift():
    r = extract_attitude_thrust(HOVER_U, 0.0, 15.0, P, C, F_MAX, TILT)
    assert r.f < P.mass * P.g
    u = acceleration_model(r.f, r.pitch, r.roll, 0.0, 15.0, P, C)
    assert np.linalg.norm(u - HOVER_U) < 1e-6
    o = extraction_oracle(HOVER_U, 0.0, 15.0, P, C, F_MAX, TILT)
    assert r.residual <= o[3] + 1e-4


def test_extraction_thrust_saturation():
    u = np.array([0.0, 0.0, -40.0])
    r = extract_attitude_thrust(u, 0.0, 0.0, P, C, F_MAX, TILT)
    assert r.f == pytest.approx(F_MAX)
    o = extraction_oracle(u, 0.0, 0.0, P, C, F_MAX, TILT)
    assert r.residual <= o[3] + 1e-4
    assert r.residual == pytest.approx(40.0 - F_MAX / P.mass, rel=1e-9)


@settings(max_examples=150, deadline=None)
@given(demands, st.floats(-math.pi, math.pi), st.floats(0, 25))
def test_extraction_never_worse_than_closed_form(u, yaw, va):
    u = np.array(u)
    r = extract_attitude_thrust(u, yaw, va, P, C, F_MAX, TILT)
    f0, th0, ph0 = closed_form_extraction(u, yaw, P.mass)
    f0 = min(f0, F_MAX)
    th0, ph0 = np.clip([th0, ph0], -TILT, TILT)
    r0 = np.linalg.norm(acceleration_model(f0, th0, ph0, yaw, va, P, C) - u)
    assert r.residual <= r0 + 1e-12
    assert 0 <= r.f <= F_MAX and abs(r.pitch) <= TILT and abs(r.roll) <= TILT
    # the reported residual is honest
    assert r.residual == pytest.approx(
        np.linalg.norm(acceleration_model(r.f, r.pitch, r.roll, yaw, va, P, C) - u), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.tuples(st.floats(-3, 3), st.floats(-3, 3), st.floats(-12, -6)), st.floats(-math.pi, math.pi),
       st.floats(0, 20))
def test_extraction_argmin_invariant_to_loose_tilt_limits(u, yaw, va):
    u = np.array(u)
    # without the scan the seeds do not depend on the limits
    r = extract_attitude_thrust(u, yaw, va, P, C, F_MAX, TILT, scan=False)
    _, th0, ph0 = closed_form_extraction(u, yaw, P.mass)
    if max(abs(r.pitch), abs(r.roll), abs(th0), abs(ph0)) > 0.99 * TILT or r.f >= F_MAX:
        return  # constrained optimum; invariance does not apply
    for tilt in (math.radians(60), math.radians(80)):
        r2 = extract_attitude_thrust(u, yaw, va, P, C, F_MAX, tilt, scan=False)
        np.testing.assert_allclose([r2.f, r2.pitch, r2.roll], [r.f, r.pitch, r.roll], atol=1e-8)


def test_extraction_rejects_bad_input():
    with pytest.raises(ValueError):
        extract_attitude_thrust(np.array([np.nan, 0, 0]), 0.0, 0.0, P, C, F_MAX, TILT)
    with pytest.raises(ConfigurationError):
        extract_attitude_thrust(HOVER_U, 0.0, 0.0, P, C, 0.0, TILT)


def test_thrust_for_altitude():
    assert thrust_for_altitude(-P.g, 0.0, 0.0, 0.0, P, C, F_MAX) == pytest.approx(P.mass * P.g)
    f = thrust_for_altitude(-P.g, -0.3, 0.0, 15.0, P, C, F_MAX)
    u = acceleration_model(f, -0.3, 0.0, 0.0, 15.0, P, C)
    assert u[2] == pytest.approx(-P.g, abs=1e-9)
    assert thrust_for_altitude(-P.g, 1.5707, 0.0, 0.0, P, C, F_MAX) == F_MAX


def test_desired_yaw():
    assert desired_yaw([1, 0, 0], 0.7) == 0.0
    assert desired_yaw([0, 1, 0], 0.0) == pytest.approx(math.pi / 2)
    yaw = desired_yaw([0.01, 0, 0], 0.0)
    assert desired_yaw([0, 0, 0], yaw) == 0.0


def test_attitude_control_examples():
    q = frames.quat_from_euler_zxy(0.1, -0.2, 0.5)
    np.testing.assert_allclose(attitude_control((0.1, -0.2, 0.5), q, G, P.kappa), 0.0, atol=1e-12)
    g2 = ControllerGains(K_att=np.full(3, 2.0))
    w = attitude_control((0.0, 0.0, 0.1), np.array([1.0, 0, 0, 0]), g2, 0.0)
    np.testing.assert_allclose(w, [0, 0, 0.2], atol=1e-12)
    g3 = ControllerGains(K_att=np.full(3, 20.0))
    w = attitude_control((0.0, 0.5, 0.0), np.array([1.0, 0, 0, 0]), g3, P.kappa)
    assert w[1] == pytest.approx(g3.omega_max[1])


def test_attitude_control_uses_lifting_frame():
    # at the commanded body attitude the lifting-frame error vanishes for any kappa
    for kappa in (0.0, math.radians(34), math.pi / 2):
        q = frames.quat_from_euler_zxy(0.2, -0.4, 1.0)
        np.testing.assert_allclose(attitude_control((0.2, -0.4, 1.0), q, G, kappa), 0.0, atol=1e-12)


def test_coordinated_turn_examples():
    assert coordinated_turn(0.0, 0.0, 10.0, 9.81) == 0.0
    phi = math.radians(30)
    assert 9.81 * math.tan(phi) / 10 == pytest.approx(0.5664, abs=1e-4)
    assert coordinated_turn(phi, 0.0, 10.0, 9.81) == pytest.approx(0.4905, abs=1e-4)
    assert coordinated_turn(phi, 0.1, 20.0, 9.81) == pytest.approx(0.5 * coordinated_turn(phi, 0.1, 10.0, 9.81))
    assert coordinated_turn(phi, 0.0, 0.0, 9.81) == 0.0
    assert coordinated_turn(math.radians(80), 0, 10, 9.81) == coordinated_turn(math.radians(60), 0, 10, 9.81)


def test_synthesize_rates_examples():
    ac = np.array([0.1, -0.2, 0.3])
    w_d, w = synthesize_rates(ac, 1.0, 2.0, 3.0, 12.0)
    assert w == 0.0 and w_d[2] == 0.3
    w_d, w = synthesize_rates(np.zeros(3), 1.0, 15.0, 3.0, 12.0)
    assert w == 1.0 and w_d[2] == 1.0
    w_d, w = synthesize_rates(np.zeros(3), 1.0, 7.5, 3.0, 12.0)
    assert w == pytest.approx(0.5) and w_d[2] == pytest.approx(0.5)
    w_d, _ = synthesize_rates(np.zeros(3), 0.0, 1.0, 3.0, 12.0)
    np.testing.assert_array_equal(w_d, 0.0)
    with pytest.raises(ConfigurationError):
        airspeed_weight(5.0, 3.0, 3.0)


@given(st.floats(0, 30))
def test_airspeed_weight_continuous(v):
    h = 1e-9
    assert abs(airspeed_weight(v + h, 3, 12) - airspeed_weight(v, 3, 12)) <= h / 9 + 1e-15


def test_rate_control_examples():
    J = P.inertia
    gains = ControllerGains(Kw_p=np.full(3, 5.0), Kw_i=np.zeros(3), Kw_d=np.zeros(3))
    m = rate_control(np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3), J, G, 0.004)
    np.testing.assert_array_equal(m, 0.0)
    m = rate_control(np.array([0.1, 0, 0]), np.zeros(3), np.zeros(3), np.zeros(3), J, gains, 0.004)
    assert m[0] == pytest.approx(-0.0256)


def test_rate_integral_clamps():
    gains = ControllerGains(Kw_p=np.zeros(3), Kw_d=np.zeros(3))
    rc = RateController(gains, P.inertia)
    outs = [rc.update(np.array([0.2, 0.2, 0.2]), np.zeros(3), 0.004, np.zeros(3))[0] for _ in range(10000)]
    assert np.all(np.diff(outs) <= 1e-15)  # ramps monotonically
    assert outs[-1] == pytest.approx(-gains.m_int_max[0])


def test_rate_derivative_filter_tracks_constant_acceleration():
    rc = RateController(G, P.inertia)
    for k in range(500):
        d = rc.derivative(np.array([0.5 * k * 0.004, 0, 0]), 0.004)
    assert d[0] == pytest.approx(0.5, rel=1e-6)


def _meas(p, v, q, omega, va, alpha=0.0, beta=0.0):
    return Measurement(np.asarray(p, float), np.asarray(v, float), q, np.asarray(omega, float), va, alpha, beta, 0.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3), st.lists(st.floats(-30, 30), min_size=3, max_size=3),
       st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3), st.lists(st.floats(-10, 10), min_size=3, max_size=3),
       st.floats(0, 40), st.sampled_from(["trajectory", "attitude"]))
def test_controller_output_bounded(p, v, eul, omega, va, mode):
    ctrl = UnifiedController(P, C, G)
    sp = ControlSetpoint(mode=mode, pitch=-0.5, roll=0.2)
    for _ in range(3):
        out = ctrl.update(_meas(p, v, frames.quat_from_euler_zxy(*eul), omega, va), sp, 0.004)
        assert 0.0 <= out.f_d <= ctrl.f_max
        assert np.all(np.abs(out.m_d) <= G.m_max)
        assert 0.0 <= out.w <= 1.0


def test_controller_hover_output():
    ctrl = UnifiedController(P, C, G)
    out = ctrl.update(_meas(np.zeros(3), np.zeros(3), np.array([1.0, 0, 0, 0]), np.zeros(3), 0.0),
                      ControlSetpoint(), 0.004)
    assert out.f_d == pytest.approx(P.mass * P.g)
    np.testing.assert_allclose(out.m_d, 0.0, atol=1e-12)
    np.testing.assert_allclose(out.omega_d, 0.0, atol=1e-12)
    with pytest.raises(ConfigurationError):
        ctrl.update(_meas(np.zeros(3), np.zeros(3), np.array([1.0, 0, 0, 0]), np.zeros(3), 0.0),
                    ControlSetpoint(mode="bogus"), 0.004)
