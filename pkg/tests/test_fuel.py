import math

import numpy as np
import pytest

from oracles import fuel_by_loop
from rampmerge.fuel import (
    DEFAULT_COEFFICIENTS,
    FuelCoefficients,
    economy_mpg,
    fuel_rate,
    trajectory_fuel,
)


def test_cruise_rate_at_ten():
    # 0.1569 + 0.245 - 0.07415 + 0.05975, closed form
    assert fuel_rate(10.0, 0.0) == pytest.approx(0.3875, abs=1e-12)


def test_idle_rate_is_intercept():
    assert fuel_rate(0.0, 0.0) == pytest.approx(DEFAULT_COEFFICIENTS.b0)


def test_accel_term_scales_with_accel():
    v = 20.0
    base = fuel_rate(v, 0.0)
    r1 = fuel_rate(v, 1.0)
    r2 = fuel_rate(v, 2.0)
    assert r2 - r1 == pytest.approx(r1 - base, rel=1e-12)


def test_rate_clamped_nonnegative():
    # hard braking at speed would go negative without the clamp
    assert fuel_rate(30.0, -3.0) == 0.0


def test_negative_speed_rejected():
    with pytest.raises(ValueError):
        fuel_rate(-1.0, 0.0)


def test_vector_matches_scalar():
    v = np.array([0.0, 5.0, 10.0, 25.0, 33.0])
    a = np.array([0.0, 1.0, -1.0, 2.0, -2.99])
    vec = fuel_rate(v, a)
    for i in range(v.size):
        assert vec[i] == pytest.approx(fuel_rate(float(v[i]), float(a[i])), rel=1e-14)


def test_constant_cruise_integral():
    # 60 s at 10 m/s: rate is constant so the sum is exact
    n = 600
    v = np.full(n, 10.0)
    a = np.zeros(n)
    total = trajectory_fuel(v, a, 0.1)
    assert total == pytest.approx(0.3875 * 60.0, rel=1e-12)


def test_integral_matches_loop_oracle():
    rng = np.random.default_rng(42)
    for _ in range(20):
        n = int(rng.integers(1, 400))
        v = np.abs(rng.normal(15.0, 8.0, size=n))
        a = rng.normal(0.0, 1.5, size=n)
        dt = float(rng.choice([0.05, 0.1, 0.2]))
        assert trajectory_fuel(v, a, dt) == pytest.approx(
            fuel_by_loop(v, a, dt, DEFAULT_COEFFICIENTS), rel=1e-12
        )


def test_monotone_in_accel_at_fixed_speed():
    rates = [fuel_rate(15.0, a) for a in np.linspace(0.0, 2.5, 11)]
    assert all(b > a for a, b in zip(rates, rates[1:]))


def test_empty_trajectory_is_free():
    assert trajectory_fuel(np.array([]), np.array([]), 0.1) == 0.0


def test_mismatched_lengths_rejected():
    with pytest.raises(ValueError):
        trajectory_fuel(np.zeros(3), np.zeros(4), 0.1)


class TestEconomy:
    def test_known_conversion(self):
        # one mile on one gallon
        assert economy_mpg(1609.344, 3785.411784) == pytest.approx(1.0, rel=1e-12)

    def test_cruise_economy(self):
        # 10 m/s cruise: 160.93 s per mile at 0.3875 mL/s -> 62.36 mL/mile
        dist = 1609.344
        fuel_ml = 0.3875 * dist / 10.0
        mpg = economy_mpg(dist, fuel_ml)
        assert mpg == pytest.approx(3785.411784 / fuel_ml, rel=1e-12)
        assert 58.0 < mpg < 63.0

    def test_zero_distance(self):
        assert economy_mpg(0.0, 12.0) == 0.0

    def test_zero_fuel_is_infinite(self):
        assert math.isinf(economy_mpg(100.0, 0.0))

    def test_negative_inputs_rejected(self):
        with pytest.raises(ValueError):
            economy_mpg(-1.0, 1.0)
        with pytest.raises(ValueError):
            economy_mpg(1.0, -1.0)


def test_custom_coefficients_used():
    coeffs = FuelCoefficients(b0=1.0, b1=0.0, b2=0.0, b3=0.0, c0=0.0, c1=0.0, c2=0.0)
    assert fuel_rate(20.0, 2.0, coeffs) == pytest.approx(1.0)
    assert trajectory_fuel(np.full(10, 5.0), np.zeros(10), 0.5, coeffs) == pytest.approx(5.0)
