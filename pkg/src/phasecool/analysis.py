"""Post-processing of sampled trajectories: occupancy envelopes and fitted rates."""
from __future__ import annotations

import math
from typing import Literal

import numpy as np

from .core import TrajectoryRecord

EnvelopeMethod = Literal["mean", "maxima"]


def ripple_period(omega: float = 1.0) -> float:
    """Period of the 2*omega ripple on the occupancy of a modulated mode."""
    return math.pi / omega


def occupancy_envelope(record: TrajectoryRecord, omega: float = 1.0, method: EnvelopeMethod = "mean"):
    """Ripple-free occupancy envelope of a trajectory.

    Parameters
    ----------
    record : TrajectoryRecord
        Uniformly sampled trajectory.
    omega : float
        Mode frequency; the ripple period is pi/omega.
    method : {"mean", "maxima"}
        "mean" slides a box of exactly one ripple period over n(t) and
        reports it at the box centre. "maxima" takes the largest sample in
        consecutive, non-overlapping periods.

    Returns
    -------
    (t, env) : tuple of ndarray
    """
    t, n = record.t, record.n
    if len(t) < 2:
        return t[:0], n[:0]
    step = t[1] - t[0]
    if not np.allclose(np.diff(t[:-1]), step, rtol=1e-9, atol=0.0):
        raise ValueError("envelope needs uniformly sampled times")
    period = ripple_period(omega)
    w = int(round(period / step))
    if w < 2:
        raise ValueError(f"sampling interval {step} too coarse for ripple period {period}")
    if method == "mean":
        if len(n) <= w:
            return t[:0], n[:0]
        c = np.concatenate(([0.0], np.cumsum(n)))
        env = (c[w:] - c[:-w]) / w
        return t[: len(env)] + 0.5 * (w - 1) * step, env
    if method == "maxima":
        m = len(n) // w
        blocks = n[: m * w].reshape(m, w)
        idx = np.argmax(blocks, axis=1)
        return t[np.arange(m) * w + idx], blocks[np.arange(m), idx]
    raise ValueError(f"unknown envelope method {method!r}")


def observed_turning_time(record: TrajectoryRecord) -> float:
    """Time of the occupancy minimum (end of single-shot cooling)."""
    return float(record.t[int(np.argmin(record.n))])


def fit_cooling_rate(record: TrajectoryRecord, t_fit: float | None = None, omega: float = 1.0, method: EnvelopeMethod = "mean") -> float:
    """Energy decay rate from a log-linear fit of the envelope over [0, t_fit].

    ``t_fit`` defaults to half the observed turning time. Returns nan when
    fewer than three envelope points fall inside the window. A positive
    value means cooling.
    """
    if t_fit is None:
        t_fit = 0.5 * observed_turning_time(record)
    te, env = occupancy_envelope(record, omega, method)
    half = 0.5 * ripple_period(omega) if method == "mean" else 0.0
    # keep only boxes lying entirely inside the window
    mask = (te + half <= t_fit) & (env > 0.0)
    if np.count_nonzero(mask) < 3:
        return math.nan
    slope = np.polyfit(te[mask], np.log(env[mask]), 1)[0]
    return float(-slope)
