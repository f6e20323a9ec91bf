"""Time-domain simulation of the modulated, thermally driven oscillator.

Two integrators share one step grid:

* ``transfer_matrix`` applies the explicit one-step matrix

      M_n = [[1, omega dt], [-omega dt + 2 Gamma cos(2 omega (n-1) dt + phi) dt, 1 - gamma dt]]

  followed by the noise kick sqrt(2 gamma n_th) dW on p. It reproduces the
  discrete recurrence exactly but multiplies the energy by 1 + (omega dt)^2
  per step.
* ``rotation_splitting`` (default) rotates exactly by omega dt, damps p by
  exp(-gamma dt) and applies the parametric force as two half kicks around
  the rotation, then the same noise kick.

Noise increments are dW = sqrt(dt) N(0, 1) and enter only the p update.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Callable, Literal, Sequence

import numpy as np
from numba import njit

from . import _kernels
from .core import (
    Drive,
    EnsembleStats,
    OscillatorParams,
    QuadratureState,
    TrajectoryRecord,
    wrap_phase,
)

Integrator = Literal["transfer_matrix", "rotation_splitting"]
NoiseMode = Literal["off", "classical"]

DT_MAX = 1e-2
# upper bound on pre-drawn normals held in memory per trajectory
NOISE_CHUNK = 1 << 20
THREADS_ENV = "PHASECOOL_THREADS"

_INTEGRATORS = {"transfer_matrix": _kernels.TRANSFER_MATRIX, "rotation_splitting": _kernels.ROTATION_SPLITTING}


@dataclass(frozen=True)
class SimConfig:
    """Integration settings; times in units of 1/omega.

    ``t_end`` may be left as None only for feedback runs that stop after a
    fixed number of updates.
    """

    dt: float = 1e-3
    t_end: float | None = None
    integrator: Integrator = "rotation_splitting"
    noise: NoiseMode = "off"
    sample_stride: int = 100
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.dt <= DT_MAX):
            raise ValueError(f"0 < dt <= {DT_MAX} required, got dt={self.dt}")
        if self.t_end is not None and not (self.t_end > 0.0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.integrator not in _INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.noise not in ("off", "classical"):
            raise ValueError(f"unknown noise mode {self.noise!r}")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise ValueError("sample_stride must be an integer >= 1")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in 64 unsigned bits")

    def n_steps(self, t_end: float | None = None) -> int:
        t_end = self.t_end if t_end is None else t_end
        if t_end is None:
            raise ValueError("no t_end configured")
        return steps_for(t_end, self.dt)

    def as_dict(self) -> dict:
        return asdict(self)


def steps_for(t: float, dt: float) -> int:
    """Number of whole steps spanning ``t``; rejects off-grid times."""
    k = int(round(t / dt))
    if abs(k * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"time {t} is not a multiple of dt={dt}")
    return k


@dataclass(frozen=True)
class StepMatrix:
    """2x2 one-step evolution matrix [[m11, m12], [m21, m22]]."""

    m11: float
    m12: float
    m21: float
    m22: float

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21


def evolution_matrix(step_index: int, cfg: SimConfig, params: OscillatorParams, drive: Drive) -> StepMatrix:
    """M_n for 1-based step ``step_index``; the cosine is taken at t = (n-1) dt."""
    if step_index < 1:
        raise ValueError("step_index starts at 1")
    dt, omega = cfg.dt, params.omega
    t_prev = (step_index - 1) * dt
    return StepMatrix(
        1.0,
        omega * dt,
        -omega * dt + 2.0 * drive.gamma_mod * math.cos(2.0 * omega * t_prev + drive.phi) * dt,
        1.0 - params.gamma * dt,
    )


def time_ordered_product(n: int, j: int, cfg: SimConfig, params: OscillatorParams, drive: Drive) -> np.ndarray:
    """T_nj = M_n M_{n-1} ... M_j (identity when j > n)."""
    T = np.eye(2)
    for k in range(j, n + 1):
        T = evolution_matrix(k, cfg, params, drive).as_array() @ T
    return T


def _noise_amp(cfg: SimConfig, params: OscillatorParams) -> float:
    if cfg.noise == "off":
        return 0.0
    return math.sqrt(2.0 * params.gamma * params.n_th * cfg.dt)


def step(state: QuadratureState, step_index: int, cfg: SimConfig, params: OscillatorParams, drive: Drive, rng: np.random.Generator | None = None) -> QuadratureState:
    """Advance one step (1-based ``step_index``: from t_{n-1} to t_n).

    Draws one standard normal from ``rng`` when noise is on.
    """
    if step_index < 1:
        raise ValueError("step_index starts at 1")
    amp = _noise_amp(cfg, params)
    normals = np.zeros(1)
    if amp != 0.0:
        if rng is None:
            raise ValueError("noisy step needs an rng")
        normals[0] = rng.standard_normal()
    buf = np.empty(1)
    q, p, _ = _kernels.advance(
        state.q, state.p, step_index - 1, 1, cfg.dt, params.omega, params.gamma,
        drive.gamma_mod, drive.phi, amp, normals, _INTEGRATORS[cfg.integrator], 1, buf, np.empty(1), 0,
    )
    return QuadratureState(q, p)


class PhaseSchedule:
    """Piecewise-constant modulation phase on the absolute time axis.

    ``phases[i]`` is active on [times[i], times[i+1]). The first entry must
    sit at t = 0.
    """

    def __init__(self, times: Sequence[float], phases: Sequence[float]):
        if len(times) != len(phases) or len(times) == 0:
            raise ValueError("schedule needs matching, non-empty times and phases")
        self.times = [float(t) for t in times]
        self.phases = [wrap_phase(float(p)) for p in phases]
        if self.times[0] != 0.0:
            raise ValueError(f"schedule gap: first switch at t={self.times[0]}, must start at 0")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("schedule times must be strictly increasing")

    @classmethod
    def constant(cls, phi: float) -> "PhaseSchedule":
        return cls([0.0], [phi])

    def phase_at(self, t: float) -> float:
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.phases[max(i, 0)]

    def __len__(self):
        return len(self.times)


class Integrator1D:
    """Stateful driver around the compiled kernel for one trajectory.

    Holds the state, the global step counter, the noise stream and the
    sampled output; callers advance it segment by segment with a fixed
    phase per segment.
    """

    def __init__(self, ic: QuadratureState, cfg: SimConfig, params: OscillatorParams, drive: Drive, total_steps: int, rng: np.random.Generator | None = None):
        self.cfg = cfg
        self.params = params
        self.drive = drive
        self.q = float(ic.q)
        self.p = float(ic.p)
        self.k = 0
        self.total = total_steps
        self.stride = int(cfg.sample_stride)
        self.amp = _noise_amp(cfg, params)
        self.rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.kind = _INTEGRATORS[cfg.integrator]
        n_out = total_steps // self.stride + 2
        self.out_q = np.empty(n_out)
        self.out_p = np.empty(n_out)
        self.out_k = []
        self.out_phi = []
        self.pos = 0
        self._record(drive.phi)

    def _record(self, phi: float):
        self.out_q[self.pos] = self.q
        self.out_p[self.pos] = self.p
        self.out_k.append(self.k)
        self.out_phi.append(phi)
        self.pos += 1

    @property
    def t(self) -> float:
        return self.k * self.cfg.dt

    @property
    def state(self) -> QuadratureState:
        return QuadratureState(self.q, self.p)

    def advance(self, n_steps: int, phi: float):
        """Run ``n_steps`` steps with the drive at absolute phase ``phi``."""
        n_steps = min(n_steps, self.total - self.k)
        cfg, prm = self.cfg, self.params
        done = 0
        while done < n_steps:
            chunk = min(NOISE_CHUNK, n_steps - done)
            normals = self.rng.standard_normal(chunk) if self.amp != 0.0 else np.zeros(1)
            start = self.pos
            self.q, self.p, self.pos = _kernels.advance(
                self.q, self.p, self.k, chunk, cfg.dt, prm.omega, prm.gamma, self.drive.gamma_mod,
                phi, self.amp, normals, self.kind, self.stride, self.out_q, self.out_p, self.pos,
            )
            first = (self.k // self.stride + 1) * self.stride
            self.out_k.extend(range(first, first + (self.pos - start) * self.stride, self.stride))
            self.out_phi.extend([phi] * (self.pos - start))
            self.k += chunk
            done += chunk

    def finish(self, meta: dict | None = None) -> TrajectoryRecord:
        if self.out_k[-1] != self.k:
            phi = self.out_phi[-1]
            self._record(phi)
        n = self.pos
        t = np.asarray(self.out_k, dtype=float) * self.cfg.dt
        return TrajectoryRecord(
            t=t, q=self.out_q[:n].copy(), p=self.out_p[:n].copy(), phi=np.asarray(self.out_phi),
            dt=self.cfg.dt, seed=int(self.cfg.seed), meta=dict(meta or {}),
        )


def run_meta(cfg: SimConfig, params: OscillatorParams, drive: Drive, **extra) -> dict:
    meta = {
        "omega": params.omega, "gamma": params.gamma, "n_th": params.n_th,
        "b": drive.b, "gamma_mod": drive.gamma_mod, "phi0": drive.phi,
        "dt": cfg.dt, "t_end": cfg.t_end, "integrator": cfg.integrator, "noise": cfg.noise,
        "sample_stride": cfg.sample_stride, "seed": int(cfg.seed),
    }
    meta.update(extra)
    return meta


def simulate(ic: QuadratureState, schedule: PhaseSchedule | None, cfg: SimConfig, params: OscillatorParams, drive: Drive, rng: np.random.Generator | None = None) -> TrajectoryRecord:
    """Integrate one realization from ``ic`` to ``cfg.t_end`` under a phase schedule.

    Switch times must lie on the step grid. When ``schedule`` is None the
    drive's own phase is held constant. Noise is drawn from ``rng``, or
    from a fresh generator seeded with ``cfg.seed``.
    """
    if schedule is None:
        schedule = PhaseSchedule.constant(drive.phi)
    total = cfg.n_steps()
    bounds = [steps_for(t, cfg.dt) for t in schedule.times] + [total]
    integ = Integrator1D(ic, cfg, params, drive.with_phase(schedule.phases[0]), total, rng)
    for i, phi in enumerate(schedule.phases):
        a, b = bounds[i], min(bounds[i + 1], total)
        if b > a:
            integ.advance(b - a, phi)
    return integ.finish(run_meta(cfg, params, drive))


def unmodulated_closed_form(ic: QuadratureState, t, params: OscillatorParams, n_th: float | None = None):
    """Deterministic part of the free damped motion:

    q(t) = e^{-gamma t/2} [q0 cos(omega t) + p0 sin(omega t)]
    p(t) = e^{-gamma t/2} [p0 cos(omega t) - q0 sin(omega t)]

    ``n_th`` only enters the stochastic part, whose stationary variance
    per quadrature is n_th; it is accepted for symmetry and ignored here.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("t must be >= 0")
    env = np.exp(-0.5 * params.gamma * t)
    c, s = np.cos(params.omega * t), np.sin(params.omega * t)
    return env * (ic.q * c + ic.p * s), env * (ic.p * c - ic.q * s)


def eigen_power(ic: QuadratureState, n: int, cfg: SimConfig, params: OscillatorParams) -> tuple[float, float]:
    """Deterministic state after n unmodulated matrix steps via M^n = S diag(lambda^n) S^-1."""
    M = evolution_matrix(1, cfg, params, Drive(b=0.0)).as_array()
    lam, S = np.linalg.eig(M)
    v = S @ np.diag(lam**n) @ np.linalg.solve(S, np.array([ic.q, ic.p], dtype=complex))
    return float(v[0].real), float(v[1].real)


def reference_integrate(ic: QuadratureState, drive: Drive, params: OscillatorParams, t_end: float, dt: float = 1e-5, sample_every: float = 1e-2) -> TrajectoryRecord:
    """Noise-free classical RK4 solution of the modulated equations.

    Intended as an accuracy oracle for tests; at the default dt=1e-5 it is
    slow for long horizons, so tests usually pass a coarser dt.
    """
    return _reference(ic.q, ic.p, params.omega, params.gamma, drive.gamma_mod, drive.phi, t_end, dt, sample_every)


def _reference(q0, p0, omega, gamma, gmod, phi, t_end, dt, sample_every):
    n = steps_for(t_end, dt)
    stride = max(1, steps_for(sample_every, dt)) if sample_every >= dt else 1
    q_out, p_out = _rk4_loop(q0, p0, omega, gamma, gmod, phi, n, dt, stride)
    k = np.arange(0, n + 1, stride)
    if k[-1] != n:
        k = np.append(k, n)
    return TrajectoryRecord(t=k * dt, q=q_out, p=p_out, phi=np.full(len(k), wrap_phase(phi)), dt=dt,
                            meta={"integrator": "rk4", "omega": omega, "gamma": gamma, "gamma_mod": gmod, "phi0": phi})


@njit(cache=True, nogil=True)
def _rk4_loop(q0, p0, omega, gamma, gmod, phi, n, dt, stride):
    n_out = n // stride + 1 + (1 if n % stride else 0)
    out_q = np.empty(n_out)
    out_p = np.empty(n_out)
    q, p = q0, p0
    out_q[0], out_p[0] = q, p
    pos = 1
    w2 = 2.0 * omega
    for k in range(n):
        t = k * dt
        c0 = 2.0 * gmod * math.cos(w2 * t + phi)
        ch = 2.0 * gmod * math.cos(w2 * (t + 0.5 * dt) + phi)
        c1 = 2.0 * gmod * math.cos(w2 * (t + dt) + phi)
        k1q = omega * p
        k1p = -gamma * p - omega * q + c0 * q
        qa, pa = q + 0.5 * dt * k1q, p + 0.5 * dt * k1p
        k2q = omega * pa
        k2p = -gamma * pa - omega * qa + ch * qa
        qa, pa = q + 0.5 * dt * k2q, p + 0.5 * dt * k2p
        k3q = omega * pa
        k3p = -gamma * pa - omega * qa + ch * qa
        qa, pa = q + dt * k3q, p + dt * k3p
        k4q = omega * pa
        k4p = -gamma * pa - omega * qa + c1 * qa
        q += dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        p += dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        if (k + 1) % stride == 0 or k + 1 == n:
            out_q[pos] = q
            out_p[pos] = p
            pos += 1
    return out_q[:pos], out_p[:pos]


def resolve_threads(threads: int | None = None) -> int:
    """Thread count from the argument, else $PHASECOOL_THREADS, else 1."""
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    return max(1, int(threads))


def derive_seed(master_seed: int, index: int) -> int:
    """64-bit seed of ensemble member ``index``; counter-based, order independent."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def ic_rng(trajectory_seed: int) -> np.random.Generator:
    """Stream for drawing the initial condition, disjoint from the noise stream."""
    return np.random.default_rng([int(trajectory_seed), 1])


def run_member(index: int, ic_sampler: Callable, protocol, cfg: SimConfig, params: OscillatorParams, drive: Drive) -> TrajectoryRecord:
    """One ensemble member: derived seed, drawn IC, then the protocol."""
    seed = derive_seed(cfg.seed, index)
    ic = ic_sampler(ic_rng(seed))
    member_cfg = replace(cfg, seed=seed)
    if protocol is None or isinstance(protocol, PhaseSchedule):
        return simulate(ic, protocol, member_cfg, params, drive)
    return protocol.run(ic, member_cfg, params, drive)


def ensemble_run(ic_sampler: Callable, protocol, cfg: SimConfig, params: OscillatorParams, drive: Drive, count: int, threads: int | None = None) -> EnsembleStats:
    """Run ``count`` seeded realizations and aggregate occupancy per time bin.

    ``protocol`` is a :class:`PhaseSchedule` (or None for the drive's
    constant phase) or any object with ``run(ic, cfg, params, drive)``
    returning a :class:`TrajectoryRecord`, such as a feedback controller.
    Member i uses the seed ``derive_seed(cfg.seed, i)``; results are
    merged in index order, so the output does not depend on ``threads``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    threads = resolve_threads(threads)

    def one(i):
        rec = run_member(i, ic_sampler, protocol, cfg, params, drive)
        return rec.t, rec.q, rec.p

    if threads == 1:
        results = [one(i) for i in range(count)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(count)))
    t = results[0][0]
    if any(len(r[0]) != len(t) for r in results):
        raise RuntimeError("ensemble members sampled on different time grids")
    q = np.stack([r[1] for r in results])
    p = np.stack([r[2] for r in results])
    n = 0.5 * (q**2 + p**2)
    return EnsembleStats(
        time_bins=t,
        mean_n=n.mean(axis=0),
        var_n=n.var(axis=0),
        mean_q2=(q**2).mean(axis=0),
        mean_p2=(p**2).mean(axis=0),
        count=count,
        master_seed=int(cfg.seed),
    )
