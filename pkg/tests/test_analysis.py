import math

import numpy as np
import pytest

from phasecool.analysis import fit_cooling_rate, observed_turning_time, occupancy_envelope, ripple_period
from phasecool.core import TrajectoryRecord


def _rippled(rate=0.05, t_end=100.0, step=0.01, depth=0.3):
    t = np.arange(0.0, t_end + step / 2, step)
    amp = np.exp(-0.5 * rate * t)
    # occupancy ~ exp(-rate t) * (1 + depth cos 2t)
    q = amp * np.sqrt(1 + depth) * np.cos(t)
    p = -amp * np.sqrt(1 - depth) * np.sin(t)
    return TrajectoryRecord(t=t, q=q, p=p, phi=np.zeros_like(t), dt=step)


def test_ripple_period():
    assert ripple_period(2.0) == pytest.approx(math.pi / 2)


@pytest.mark.parametrize("method", ["mean", "maxima"])
def test_fit_recovers_known_rate(method):
    rec = _rippled()
    assert fit_cooling_rate(rec, t_fit=80.0, method=method) == pytest.approx(0.05, rel=0.02)


def test_mean_envelope_removes_ripple():
    rec = _rippled(rate=0.0)
    _, env = occupancy_envelope(rec)
    assert np.ptp(env) < 1e-3 * env.mean()


def test_default_window_and_turning_time():
    t = np.linspace(0, 100, 10001)
    n = np.exp(-0.1 * t) + np.exp(0.1 * (t - 80))
    amp = np.sqrt(2 * n)
    rec = TrajectoryRecord(t=t, q=amp * np.cos(t), p=-amp * np.sin(t), phi=np.zeros_like(t), dt=0.01)
    tmin = observed_turning_time(rec)
    assert tmin == pytest.approx(40.0, abs=0.5)
    assert fit_cooling_rate(rec) == pytest.approx(0.1, rel=0.02)


def test_envelope_guards():
    rec = _rippled(step=3.0)
    with pytest.raises(ValueError, match="coarse"):
        occupancy_envelope(rec)
    with pytest.raises(ValueError):
        occupancy_envelope(_rippled(), method="median")
    assert math.isnan(fit_cooling_rate(_rippled(), t_fit=1.0))
    t = np.array([0.0, 0.1, 0.3, 0.4])
    bad = TrajectoryRecord(t=t, q=np.ones(4), p=np.zeros(4), phi=np.zeros(4), dt=0.1)
    with pytest.raises(ValueError, match="uniform"):
        occupancy_envelope(bad)
