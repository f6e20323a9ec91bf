import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from phasecool.core import (
    PERTURBATIVE_B_MAX,
    Drive,
    EnsembleStats,
    OscillatorParams,
    QuadratureState,
    TrajectoryRecord,
    derive_rng,
    occupancy_of,
    sample_thermal_state,
    wrap_phase,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_params_validation():
    assert OscillatorParams(1.0, 1e-6, 1e4).quality_factor == pytest.approx(1e6)
    assert OscillatorParams(1.0, 0.0).quality_factor == math.inf
    with pytest.raises(ValueError, match="omega"):
        OscillatorParams(0.0)
    with pytest.raises(ValueError, match="gamma"):
        OscillatorParams(1.0, -1.0)
    with pytest.raises(ValueError, match="gamma < omega"):
        OscillatorParams(1.0, 2.0)
    with pytest.raises(ValueError, match="n_th"):
        OscillatorParams(1.0, 0.0, -1.0)


def test_drive_rate_and_flags():
    d = Drive.from_depth(0.05, omega=2.0, phi=7.0)
    assert d.gamma_mod / 2.0 == d.b
    assert 0.0 <= d.phi < 2 * math.pi
    assert d.perturbative
    assert not Drive.from_depth(0.3).perturbative
    assert PERTURBATIVE_B_MAX == 0.25
    with pytest.raises(ValueError, match=r"\|b\| < 1"):
        Drive(1.5)


def test_wrap_phase_edges():
    assert wrap_phase(0.0) == 0.0
    assert wrap_phase(2 * math.pi) == 0.0
    assert wrap_phase(-1e-18) == 0.0
    assert wrap_phase(-math.pi / 2) == pytest.approx(1.5 * math.pi)


def test_occupancy_examples():
    assert occupancy_of(QuadratureState(0.0, 0.0)) == 0.0
    assert occupancy_of(QuadratureState(math.sqrt(2.0), 0.0)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        occupancy_of(QuadratureState(1.0, 0.0), "semi")
    with pytest.raises(ValueError):
        QuadratureState(math.nan, 0.0)


@given(finite, finite, st.floats(0, 2 * math.pi))
def test_occupancy_rotation_invariant_and_offset(q, p, theta):
    c, s = math.cos(theta), math.sin(theta)
    a = QuadratureState(q, p)
    b = QuadratureState(q * c + p * s, -q * s + p * c)
    assert occupancy_of(b) == pytest.approx(occupancy_of(a), rel=1e-9, abs=1e-9)
    assert occupancy_of(a) - occupancy_of(a, "quantum") == 0.5


def test_thermal_zero_and_determinism():
    rng = np.random.default_rng(0)
    assert sample_thermal_state(0.0, rng).is_zero()
    a = sample_thermal_state(1e4, np.random.default_rng(5))
    b = sample_thermal_state(1e4, np.random.default_rng(5))
    assert a == b


def test_thermal_variance_chi_squared():
    rng = np.random.default_rng(2024)
    n = 100_000
    q = np.array([sample_thermal_state(1e4, rng).q for _ in range(n)])
    var = q.var(ddof=1)
    # standard error of a Gaussian sample variance: sigma^2 sqrt(2/(n-1))
    se = 1e4 * math.sqrt(2.0 / (n - 1))
    assert abs(var - 1e4) < 3 * se
    occ = np.mean([occupancy_of(sample_thermal_state(1e4, rng)) for _ in range(20_000)])
    assert occ == pytest.approx(1e4, rel=0.03)


def test_thermal_normality():
    rng = np.random.default_rng(7)
    n = 20_000
    q = np.array([sample_thermal_state(3.0, rng).q for _ in range(n)])
    z = (q - q.mean()) / q.std()
    skew, kurt = np.mean(z**3), np.mean(z**4) - 3.0
    assert abs(skew) < 5 * math.sqrt(6.0 / n)
    assert abs(kurt) < 5 * math.sqrt(24.0 / n)


def test_derive_rng_independent_of_order():
    a = derive_rng(3, 5).standard_normal(4)
    derive_rng(3, 4).standard_normal(10)
    b = derive_rng(3, 5).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, derive_rng(3, 6).standard_normal(4))


def test_record_validation():
    with pytest.raises(ValueError, match="increasing"):
        TrajectoryRecord(t=[0.0, 0.0], q=[1, 1], p=[0, 0], phi=[0, 0], dt=1.0)
    with pytest.raises(ValueError, match="lengths"):
        TrajectoryRecord(t=[0.0, 1.0], q=[1], p=[0, 0], phi=[0, 0], dt=1.0)
    rec = TrajectoryRecord(t=[0.0, 1.0], q=[1.0, 0.0], p=[1.0, 2.0], phi=[0, 0], dt=1.0)
    assert np.array_equal(rec.n, [1.0, 2.0])
    assert rec.final_state == QuadratureState(0.0, 2.0)


def test_ensemble_stats_late_mean():
    t = np.arange(10.0)
    s = EnsembleStats(t, t.copy(), np.zeros(10), t.copy(), t.copy(), count=3, master_seed=1)
    assert s.late_time_mean(0.2) == 8.5
    assert np.array_equal(s.mean_n_quantum, t - 0.5)
    with pytest.raises(ValueError):
        EnsembleStats(t, t, -np.ones(10), t, t, count=3, master_seed=1)
