import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from phasecool.classical import (
    amplitude_ratio_estimate,
    analytic_trajectory,
    characteristic_exponent,
    coefficients_from_initial,
    optimal_phase,
    turning_time,
    turning_time_estimate,
)
from phasecool.core import Drive, OscillatorParams
from phasecool.engine import reference_integrate


def monodromy_exponent(b: float) -> complex:
    """x from one period of q'' + (1 - 2b cos 2t) q = 0 integrated numerically.

    Solutions pick up exp(i beta pi) per period pi with beta = -1 + x, so
    the Floquet multiplier is -exp(i pi x).
    """
    def rhs(t, y):
        return [y[1], -(1.0 - 2.0 * b * math.cos(2.0 * t)) * y[0]]

    cols = []
    for y0 in ([1.0, 0.0], [0.0, 1.0]):
        sol = solve_ivp(rhs, (0.0, math.pi), y0, rtol=1e-12, atol=1e-14, method="DOP853")
        cols.append(sol.y[:, -1])
    M = np.array(cols).T
    mult = np.linalg.eigvals(M.astype(complex))
    xs = [np.log(-m) / (1j * math.pi) for m in mult]
    return max(xs, key=lambda x: x.imag)


def test_exponent_b0():
    fl = characteristic_exponent(0.0)
    assert fl.exponent_x == 0
    assert fl.coefficient(0) == 1 and fl.coefficient(1) == 0 and fl.coefficient(-1) == 0


def test_exponent_against_floquet_oracle():
    # leading order is x = i b / 2 (the envelopes decay as exp(-Gamma t / 2))
    for b in (0.01, 0.05, 0.1):
        exact = monodromy_exponent(b)
        fl = characteristic_exponent(b, 1)
        assert abs(fl.exponent_x - exact) < 2 * b * b
        assert fl.exponent_x.imag == pytest.approx(0.5 * b, rel=0.05)
    fl1, fl2 = characteristic_exponent(0.05, 1), characteristic_exponent(0.05, 2)
    assert abs(fl2.exponent_x - fl1.exponent_x) <= 2.5e-3
    assert abs(fl2.exponent_x - monodromy_exponent(0.05)) < abs(fl1.exponent_x - monodromy_exponent(0.05)) + 1e-12


def test_exponent_coefficients():
    fl = characteristic_exponent(0.05, 1)
    assert fl.coefficient(0) == 1
    assert fl.coefficient(1) == pytest.approx(1j, abs=0.05)
    for order in (1, 2, 3):
        assert characteristic_exponent(0.05, order).recursion_residual() <= 1e-10
    with pytest.raises(ValueError):
        characteristic_exponent(0.6)


def test_coefficients_example():
    sol = coefficients_from_initial(1.0, 0.0, 1.5 * math.pi, 0.05)
    assert sol.a_minus == pytest.approx(-1.0, abs=1e-12)
    assert sol.a_plus == pytest.approx(-0.025, abs=1e-12)
    assert abs(sol.a_minus / sol.a_plus) == pytest.approx(40.0)


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 2 * math.pi))
def test_coefficients_rotation_at_b0(q0, p0, phi):
    if q0 == 0 and p0 == 0:
        return
    sol = coefficients_from_initial(q0, p0, phi, 0.0)
    assert sol.a_minus**2 + sol.a_plus**2 == pytest.approx(q0 * q0 + p0 * p0, rel=1e-9, abs=1e-12)


def test_optimal_phase_nulls_a_plus():
    phi = optimal_phase(1.0, 0.0, 0.05)
    sol = coefficients_from_initial(1.0, 0.0, phi, 0.05)
    assert abs(sol.a_plus) / abs(sol.a_minus) <= 1e-3


def test_reconstruction_of_initial_state():
    params, drive = OscillatorParams(1.0, 1e-4), Drive.from_depth(0.05, phi=1.0)
    sol = coefficients_from_initial(0.7, -1.3, drive.phi, drive.b, params.gamma)
    q, p = analytic_trajectory(sol, params, drive, 0.0, with_momentum=True)
    assert q == pytest.approx(0.7, rel=1e-12)
    assert p == pytest.approx(-1.3, rel=1e-12)


def test_harmonic_limit():
    t = np.linspace(0, 20, 101)
    sol = coefficients_from_initial(1.0, 0.0, 0.3, 0.0)
    q = analytic_trajectory(sol, OscillatorParams(), Drive(0.0, 0.3), t)
    assert np.allclose(q, np.cos(t), atol=1e-12)
    with pytest.raises(ValueError):
        analytic_trajectory(sol, OscillatorParams(), Drive(0.0), -1.0)


def test_optimal_phase_examples():
    assert optimal_phase(0.0, 1.0, 0.0) == pytest.approx(math.pi / 2)
    assert optimal_phase(1.0, 0.0, 0.0) == pytest.approx(1.5 * math.pi)
    # frozen value of the b-corrected formula (see the decisions ledger)
    assert optimal_phase(1.0, 1.0, 0.05) == pytest.approx(3.1169025, abs=1e-6)
    with pytest.raises(ValueError):
        optimal_phase(0.0, 0.0, 0.05)


def test_optimal_phase_is_grid_minimum():
    grid = np.linspace(0, 2 * math.pi, 200_001)
    a_plus = [abs(coefficients_from_initial(1.0, 1.0, g, 0.05).a_plus) for g in grid[::100]]
    coarse = grid[::100][int(np.argmin(a_plus))]
    fine = grid[(grid > coarse - 0.01) & (grid < coarse + 0.01)]
    best = fine[int(np.argmin([abs(coefficients_from_initial(1.0, 1.0, g, 0.05).a_plus) for g in fine]))]
    assert best == pytest.approx(optimal_phase(1.0, 1.0, 0.05), abs=1e-4)


@settings(max_examples=50)
@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(0, 0.25), st.floats(0.01, 100))
def test_optimal_phase_scaling_and_continuity(q0, p0, b, lam):
    if abs(q0) < 1e-6 and abs(p0) < 1e-6:
        return
    assert optimal_phase(lam * q0, lam * p0, b) == pytest.approx(optimal_phase(q0, p0, b), abs=1e-9)
    lim = optimal_phase(q0, p0, 0.0)
    near = optimal_phase(q0, p0, 1e-9)
    d = abs(near - lim)
    assert min(d, 2 * math.pi - d) < 1e-6 * (1 + abs(q0 / p0) if p0 else 1e3)


def test_phase_periodicity():
    params, drive = OscillatorParams(), Drive.from_depth(0.05, phi=0.4)
    t = np.linspace(0, 30, 50)
    a = analytic_trajectory(coefficients_from_initial(1, 0.5, 0.4, 0.05), params, drive, t)
    b = analytic_trajectory(coefficients_from_initial(1, 0.5, 0.4 + 2 * math.pi, 0.05), params, Drive.from_depth(0.05, phi=0.4 + 2 * math.pi), t)
    assert np.allclose(a, b, atol=1e-12)


def test_b0_phase_amplitude_is_initial_radius():
    q0, p0 = 0.8, -0.3
    sol = coefficients_from_initial(q0, p0, optimal_phase(q0, p0, 0.0), 0.0)
    assert abs(sol.a_minus) == pytest.approx(math.hypot(q0, p0), rel=1e-6)


def test_ratio_estimate():
    assert amplitude_ratio_estimate(1.0, 0.0, 0.05) == pytest.approx(40.0)
    direct = abs(coefficients_from_initial(1.0, 0.0, 1.5 * math.pi, 0.05).ratio)
    assert amplitude_ratio_estimate(1.0, 0.0, 0.05) == pytest.approx(direct, rel=0.05)
    assert amplitude_ratio_estimate(1.0, 1.0, 0.05) == 0.0


def test_turning_time_examples():
    class Sol:
        a_minus, a_plus = math.e, 1.0

    assert turning_time(Sol, Drive.from_depth(0.5)) == pytest.approx(2.0)  # Gamma = 0.5
    sol = coefficients_from_initial(1.0, 0.0, 1.5 * math.pi, 0.05)
    assert turning_time(sol, Drive.from_depth(0.05)) == pytest.approx(math.log(40) / 0.05)
    assert turning_time_estimate(1.0, 0.0, Drive.from_depth(0.05)) == pytest.approx(73.78, abs=0.01)

    class Nulled:
        a_minus, a_plus = 1.0, 0.0

    class Heating:
        a_minus, a_plus = 0.1, 1.0

    assert turning_time(Nulled, Drive.from_depth(0.05)) == math.inf
    assert turning_time(Heating, Drive.from_depth(0.05)) == 0.0


def test_turning_time_unit_log():
    class Sol:
        a_minus, a_plus = math.e, 1.0

    # |A-/A+| = e with Gamma = Omega gives tau = 1/Omega (b = 0.999 is inside |b| < 1)
    assert turning_time(Sol, Drive(0.999, gamma_mod=1.0)) == pytest.approx(1.0)


def test_turning_point_of_simulation():
    drive = Drive.from_depth(0.05, phi=1.5 * math.pi)
    tau = turning_time(coefficients_from_initial(1.0, 0.0, drive.phi, 0.05), drive)
    ref = reference_integrate(__import__("phasecool").QuadratureState(1.0, 0.0), drive, OscillatorParams(), 150.0, dt=1e-3, sample_every=0.05)
    t_min = ref.t[int(np.argmin(ref.n))]
    assert abs(t_min - tau) <= 0.2 * tau


def _residual(b, gamma, harmonics):
    params, drive = OscillatorParams(1.0, gamma), Drive.from_depth(b, phi=0.9)
    sol = coefficients_from_initial(1.0, 0.2, drive.phi, drive.b, params.gamma)
    h = 1e-4
    t = np.linspace(1.0, 50.0, 400)
    q, qp, qm = (analytic_trajectory(sol, params, drive, x, harmonics=harmonics) for x in (t, t + h, t - h))
    qdd = (qp - 2 * q + qm) / h**2
    qd = (qp - qm) / (2 * h)
    res = qdd + params.gamma * qd + (1.0 - 2.0 * drive.gamma_mod * np.cos(2 * t + drive.phi)) * q
    return np.max(np.abs(res)) / np.max(np.abs(q))


@pytest.mark.parametrize("b,gamma", [(0.01, 0.0), (0.05, 1e-3), (0.05, 0.0)])
def test_ode_residual_with_harmonic(b, gamma):
    assert _residual(b, gamma, harmonics=True) <= 1e-2


def test_ode_residual_two_component_is_order_b():
    # without the 3 omega term the residual is the dropped harmonic itself, ~ b max|q|
    r = _residual(0.05, 1e-3, harmonics=False)
    assert 0.5 * 0.05 < r < 1.5 * 0.05
