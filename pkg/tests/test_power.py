import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from liftwing.power import EnergyMeter, PowerModel, accumulate_energy, motor_power

M = PowerModel()


def direct(sigma, rate=0.0):
    # written out term by term from the fit coefficients
    up, down = max(rate, 0.0), max(-rate, 0.0)
    return 563.7 * sigma**2 - 147.4 * sigma + 15.0 * up**1.05 + 4.0 * down**1.0 + 0.05538


def test_idle_power_is_constant_term():
    assert motor_power(np.zeros(4), np.zeros(4)) == pytest.approx(4 * 0.05538, abs=1e-12)
    assert motor_power(np.zeros(4), np.zeros(4)) == pytest.approx(0.2215, abs=1e-4)


def test_half_throttle_power():
    assert motor_power(np.full(4, 0.5), np.zeros(4)) == pytest.approx(269.12152, abs=1e-6)
    assert motor_power(np.full(4, 0.5), np.zeros(4)) == pytest.approx(4 * direct(0.5), abs=1e-9)


@given(st.floats(0.27, 1.0), st.floats(-20.0, 20.0))
def test_matches_direct_substitution_where_positive(sigma, rate):
    expected = direct(sigma, rate)
    assert expected > 0
    assert M.per_motor(sigma, rate) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_floor_clamps_negative_fit():
    # the fit is negative below sigma ~ 0.26
    assert direct(0.13) < 0
    assert M.per_motor(0.13, 0.0) == 0.0
    assert PowerModel(floor=-np.inf).per_motor(0.13, 0.0) == pytest.approx(direct(0.13))


@given(st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4))
def test_quadratic_lower_bound(sigma):
    s_min = 147.4 / (2 * 563.7)
    bound = 4 * min(direct(s_min), 0.0)  # with the 0 W floor
    assert motor_power(sigma, np.zeros(4)) >= bound
    raw = PowerModel(floor=-np.inf)
    assert np.sum(raw.per_motor(np.array(sigma), 0.0)) >= 4 * direct(s_min) - 1e-9


@given(st.floats(0.2, 1.0), st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_monotone_in_rate_magnitude(sigma, r1, r2):
    lo, hi = sorted((r1, r2))
    assert M.per_motor(sigma, hi) >= M.per_motor(sigma, lo)
    assert M.per_motor(sigma, -hi) >= M.per_motor(sigma, -lo)


def test_rejects_out_of_range_throttle():
    with pytest.raises(ValueError):
        motor_power([0.5, 0.5, 0.5, 1.2], np.zeros(4))
    with pytest.raises(ValueError):
        motor_power([-0.1, 0.5, 0.5, 0.5], np.zeros(4))


def traverse_energy(duration, dt=4e-3):
    """Energy for a throttle sweep 0.3 -> 0.7 -> 0.3 over ``duration`` seconds."""
    t = np.arange(0.0, duration + dt / 2, dt)
    sigma = 0.5 - 0.2 * np.cos(2 * np.pi * t / duration)
    meter = EnergyMeter(dt)
    for s in sigma:
        meter.update(np.full(4, s))
    return meter.energy, meter


def rate_energy(duration, dt=4e-3):
    """Energy above the rate-free power for the same sweep."""
    t = np.arange(0.0, duration + dt / 2, dt)
    sigma = 0.5 - 0.2 * np.cos(2 * np.pi * t / duration)
    static = accumulate_energy(4 * M.per_motor(sigma, 0.0), dt)
    return traverse_energy(duration, dt)[0] - static


def test_faster_traversal_costs_more_energy():
    # same throttle path at 8x..0.5x speed; the rate terms are what differ
    excess = [rate_energy(d) for d in (8.0, 4.0, 2.0, 1.0, 0.5)]
    assert all(e > 0 for e in excess)
    assert all(b > a for a, b in zip(excess, excess[1:]))


def test_meter_matches_offline_integral():
    dt = 4e-3
    energy, meter = traverse_energy(2.0, dt)
    t = np.arange(0.0, 2.0 + dt / 2, dt)
    sigma = 0.5 - 0.2 * np.cos(2 * np.pi * t / 2.0)
    rate = np.concatenate(([0.0], np.diff(sigma) / dt))
    power = 4 * M.per_motor(sigma, rate)
    assert energy == pytest.approx(accumulate_energy(power, dt), rel=1e-12)
    assert meter.samples == t.size


def test_constant_and_zero_power():
    dt = 0.01
    assert accumulate_energy(np.full(1001, 100.0), dt) == pytest.approx(1000.0, rel=1e-12)
    assert accumulate_energy(np.zeros(1001), dt) == 0.0
    assert accumulate_energy([5.0], dt) == 0.0
    with pytest.raises(ValueError):
        accumulate_energy([1.0, 2.0], 0.0)
    with pytest.raises(ValueError):
        EnergyMeter(-1.0)


def test_trapezoid_converges_second_order():
    exact = 10.0 + (1 - np.cos(10.0))  # integral of 1 + sin(t) over [0, 10]
    errs = []
    for n in (100, 200, 400, 800):
        t = np.linspace(0.0, 10.0, n + 1)
        errs.append(abs(accumulate_energy(1.0 + np.sin(t), t[1] - t[0]) - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2.0) < 0.05)
