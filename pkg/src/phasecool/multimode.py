"""Simultaneous phase-adaptive cooling of several resonances with one actuator.

Every mode's spring constant is modulated by the full sum of drive terms
sum_k 2 Gamma_k cos(2 Omega_k t + phi_k) (``shared=True``); with
``shared=False`` a mode only feels the term of its own band. There is one
drive term per frequency band. Detection is spectrally resolved: a band
of degenerate modes is seen only through its summed quadratures and gets
a single phase derived from them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import _kernels
from .classical import optimal_phase
from .core import Drive, OscillatorParams, QuadratureState, TrajectoryRecord, sample_thermal_state, wrap_phase
from .engine import _INTEGRATORS, NOISE_CHUNK, SimConfig
from .feedback import MIN_STEPS_PER_UPDATE

DegeneratePolicy = Literal["idle", "summed"]


def band_partition(omegas, resolution: float) -> list[list[int]]:
    """Group mode indices whose frequencies chain within ``resolution``.

    Bands are ordered by frequency; indices inside a band ascend.
    """
    if not resolution > 0.0:
        raise ValueError("resolution must be > 0")
    omegas = np.asarray(omegas, dtype=float)
    order = np.argsort(omegas, kind="stable")
    bands: list[list[int]] = []
    for idx in order:
        if bands and omegas[idx] - omegas[bands[-1][-1]] < resolution:
            bands[-1].append(int(idx))
        else:
            bands.append([int(idx)])
    return [sorted(b) for b in bands]


@dataclass
class ModeSet:
    """Resonances plus one drive term per frequency band.

    ``b`` is the common modulation depth; band k is driven at twice its
    mean frequency with Gamma_k = b * Omega_k. ``resolution`` defaults to
    the largest Gamma.
    """

    modes: list[OscillatorParams]
    b: float
    resolution: float | None = None
    degenerate_policy: DegeneratePolicy = "idle"
    bands: list[list[int]] = field(init=False)
    drives: list[Drive] = field(init=False)
    band_omega: np.ndarray = field(init=False)

    def __post_init__(self):
        if len(self.modes) < 1:
            raise ValueError("need at least one mode")
        if self.degenerate_policy not in ("idle", "summed"):
            raise ValueError(f"unknown degenerate policy {self.degenerate_policy!r}")
        omegas = np.array([m.omega for m in self.modes])
        if self.resolution is None:
            self.resolution = abs(self.b) * float(omegas.max())
        self.bands = band_partition(omegas, self.resolution)
        self.band_omega = np.array([math.fsum(omegas[band]) / len(band) for band in self.bands])
        self.drives = [Drive.from_depth(self.b, w) for w in self.band_omega]

    @property
    def n_res(self) -> int:
        return len(self.modes)

    def band_of(self, j: int) -> int:
        for k, band in enumerate(self.bands):
            if j in band:
                return k
        raise IndexError(j)

    def degenerate_bands(self) -> list[list[int]]:
        return [b for b in self.bands if len(b) > 1]

    def band_active(self, k: int) -> bool:
        """Whether drive term ``k`` is switched on."""
        return len(self.bands[k]) == 1 or self.degenerate_policy == "summed"

    def subset(self, indices) -> "ModeSet":
        return ModeSet([self.modes[i] for i in indices], self.b, self.resolution, self.degenerate_policy)

    def permuted(self, perm) -> "ModeSet":
        return ModeSet([self.modes[i] for i in perm], self.b, self.resolution, self.degenerate_policy)


@dataclass(frozen=True)
class MultimodeFeedback:
    """Common update clock for all bands."""

    delta_tau: float
    max_updates: int | None = None

    def __post_init__(self):
        if not self.delta_tau > 0.0:
            raise ValueError("delta_tau must be > 0")


def _band_phases(modeset: ModeSet, q: np.ndarray, p: np.ndarray, t: float, current: np.ndarray) -> np.ndarray:
    out = current.copy()
    for k, band in enumerate(modeset.bands):
        if not modeset.band_active(k):
            continue
        # fsum: the summed quadratures must not depend on mode labelling
        qs = math.fsum(q[band]) if len(band) > 1 else float(q[band[0]])
        ps = math.fsum(p[band]) if len(band) > 1 else float(p[band[0]])
        if qs == 0.0 and ps == 0.0:
            continue
        local = optimal_phase(qs, ps, modeset.drives[k].b)
        out[k] = wrap_phase(local - 2.0 * modeset.band_omega[k] * t)
    return out


def thermal_ics(modeset: ModeSet, n0, rng: np.random.Generator) -> list[QuadratureState]:
    """Independent thermal initial states; ``n0`` scalar or one value per mode."""
    n0 = np.broadcast_to(np.asarray(n0, dtype=float), (modeset.n_res,))
    return [sample_thermal_state(float(n), rng) for n in n0]


def simulate_multimode(modeset: ModeSet, ics: list[QuadratureState], feedback: MultimodeFeedback | None, cfg: SimConfig, shared: bool = True, rng: np.random.Generator | None = None) -> list[TrajectoryRecord]:
    """Integrate all modes on one clock with per-band phase feedback.

    Returns one :class:`TrajectoryRecord` per mode, in mode order. Noise
    uses ``rng`` or a generator seeded with ``cfg.seed``; with one mode the
    result is bit-identical to the single-mode feedback run.
    """
    n_modes = modeset.n_res
    if len(ics) != n_modes:
        raise ValueError("need one initial state per mode")
    if cfg.t_end is None:
        raise ValueError("multimode runs need t_end")
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    total = cfg.n_steps()
    stride = int(cfg.sample_stride)
    kind = _INTEGRATORS[cfg.integrator]

    omega = np.array([m.omega for m in modeset.modes])
    gamma = np.array([m.gamma for m in modeset.modes])
    amp = np.zeros(n_modes)
    if cfg.noise == "classical":
        amp = np.array([math.sqrt(2.0 * m.gamma * m.n_th * cfg.dt) for m in modeset.modes])
    use_noise = bool(np.any(amp != 0.0))
    n_drive = len(modeset.bands)
    gmod = np.array([d.gamma_mod if modeset.band_active(k) else 0.0 for k, d in enumerate(modeset.drives)])
    coupling = np.zeros((n_modes, n_drive))
    for k, band in enumerate(modeset.bands):
        for j in range(n_modes):
            if shared or j in band:
                coupling[j, k] = 1.0

    q = np.array([s.q for s in ics], dtype=float)
    p = np.array([s.p for s in ics], dtype=float)
    n_out = total // stride + 2
    out_q = np.empty((n_out, n_modes))
    out_p = np.empty((n_out, n_modes))
    out_q[0], out_p[0] = q, p
    pos = 1
    out_k = [0]
    phase_rows = []

    phases = np.array([d.phi for d in modeset.drives])
    if feedback is not None:
        if feedback.delta_tau < MIN_STEPS_PER_UPDATE * cfg.dt * (1 - 1e-9):
            raise ValueError(f"delta_tau must be >= {MIN_STEPS_PER_UPDATE} dt")
        seg_steps = max(MIN_STEPS_PER_UPDATE, int(round(feedback.delta_tau / cfg.dt)))
        max_updates = feedback.max_updates
    else:
        seg_steps = total
        max_updates = 0

    k = 0
    n_updates = 0
    first = True
    while k < total:
        if max_updates is None or n_updates < max_updates:
            phases = _band_phases(modeset, q, p, k * cfg.dt, phases)
            n_updates += 1
            seg = min(seg_steps, total - k)
        else:
            seg = total - k
        if first:
            phase_rows.append(phases.copy())
            first = False
        done = 0
        while done < seg:
            chunk = min(NOISE_CHUNK, seg - done)
            normals = rng.standard_normal((chunk, n_modes)) if use_noise else np.zeros((1, n_modes))
            start = pos
            pos = _kernels.advance_multi(
                q, p, k, chunk, cfg.dt, omega, gamma, amp, gmod, modeset.band_omega, phases,
                coupling, normals, kind, stride, out_q, out_p, pos,
            )
            first_k = (k // stride + 1) * stride
            out_k.extend(range(first_k, first_k + (pos - start) * stride, stride))
            phase_rows.extend([phases.copy()] * (pos - start))
            k += chunk
            done += chunk
    if out_k[-1] != k:
        out_q[pos], out_p[pos] = q, p
        pos += 1
        out_k.append(k)
        phase_rows.append(phases.copy())

    t = np.asarray(out_k, dtype=float) * cfg.dt
    phase_arr = np.array(phase_rows)
    records = []
    for j in range(n_modes):
        band = modeset.band_of(j)
        meta = {
            "mode": j, "omega": float(omega[j]), "gamma": float(gamma[j]), "n_th": modeset.modes[j].n_th,
            "b": modeset.b, "band": band, "band_size": len(modeset.bands[band]), "shared_drive": shared,
            "degenerate_policy": modeset.degenerate_policy,
            "dt": cfg.dt, "t_end": cfg.t_end, "integrator": cfg.integrator, "noise": cfg.noise,
            "sample_stride": cfg.sample_stride, "seed": int(cfg.seed),
            "delta_tau": None if feedback is None else seg_steps * cfg.dt,
        }
        records.append(TrajectoryRecord(t=t, q=out_q[:pos, j].copy(), p=out_p[:pos, j].copy(),
                                        phi=phase_arr[:, band], dt=cfg.dt, seed=int(cfg.seed), meta=meta))
    return records


def late_mean(record: TrajectoryRecord, fraction: float = 0.2) -> float:
    """Mean classical occupancy over the last ``fraction`` of the samples."""
    n = record.n
    k = max(1, int(round(len(n) * fraction)))
    return float(np.mean(n[-k:]))


def isolated_baseline(modeset: ModeSet, j: int, ic: QuadratureState, feedback: MultimodeFeedback, cfg: SimConfig, fraction: float = 0.2) -> float:
    """Late-time mean occupancy of mode ``j`` cooled alone by its own drive term."""
    alone = ModeSet([modeset.modes[j]], modeset.b, modeset.resolution, modeset.degenerate_policy)
    rec = simulate_multimode(alone, [ic], feedback, cfg)[0]
    return late_mean(rec, fraction)


def equidistant_modes(n_res: int, omega0: float, spacing: float, gamma_ratio: float, n_th: float) -> list[OscillatorParams]:
    """Modes at omega0 + j*spacing with gamma_j = gamma_ratio * omega_j."""
    return [OscillatorParams(omega0 + j * spacing, gamma_ratio * (omega0 + j * spacing), n_th) for j in range(n_res)]
