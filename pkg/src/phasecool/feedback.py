"""Phase-adaptive feedback: measure (q, p), reset the modulation phase, repeat.

Measurements are noiseless, instantaneous reads of the simulated state.
The phase logged at an update is the optimal phase for a drive whose clock
starts at that instant; the drive itself keeps the absolute clock, so the
applied phase is ``phi_j - 2 omega t_j`` (mod 2 pi).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

from .classical import optimal_phase, turning_time_estimate
from .core import Drive, OscillatorParams, QuadratureState, TrajectoryRecord, wrap_phase
from .engine import Integrator1D, SimConfig, run_meta

Mode = Literal["single_shot", "adaptive", "delayed"]
IntervalPolicy = Literal["fixed", "per_segment"]

# minimum number of integration steps between two measurements
MIN_STEPS_PER_UPDATE = 10


class HeatingDominatedWarning(UserWarning):
    """The measured state heats under every phase within the model."""


@dataclass(frozen=True)
class PhaseUpdate:
    t: float
    q: float
    p: float
    phi: float


@dataclass
class FeedbackPlan:
    """Update interval, update budget and the log of applied phases."""

    delta_tau: float
    max_updates: int | None = None
    mode: Mode = "adaptive"
    b: float = 0.0
    phase_log: list[PhaseUpdate] = field(default_factory=list)

    def __post_init__(self):
        if not self.delta_tau > 0.0:
            raise ValueError("delta_tau must be > 0")
        if self.max_updates is not None and self.max_updates < 1:
            raise ValueError("max_updates must be >= 1")

    def log(self, t: float, state: QuadratureState) -> PhaseUpdate:
        entry = PhaseUpdate(t, state.q, state.p, optimal_phase(state.q, state.p, self.b))
        self.phase_log.append(entry)
        return entry

    def consistent(self) -> bool:
        """Every logged phase recomputes exactly from its logged quadratures."""
        return all(e.phi == optimal_phase(e.q, e.p, self.b) for e in self.phase_log)


def plan_single_shot(ic: QuadratureState, b: float) -> FeedbackPlan:
    """Optimize the phase once at t = 0 and never again."""
    if ic.is_zero():
        raise ValueError("cannot pick a phase for the zero state")
    plan = FeedbackPlan(delta_tau=math.inf, max_updates=1, mode="single_shot", b=b)
    plan.log(0.0, ic)
    return plan


def tau_cap(drive: Drive) -> float:
    """Largest interval handed out: the b = 0 turning time of a state with p = 0.

    That state has the smallest estimated A-/A+ (2/b), so no measured state
    is given a longer horizon than the least favourable one.
    """
    return math.log(2.0 / abs(drive.b)) / drive.gamma_mod


def recommended_interval(state: QuadratureState, b: float, drive: Drive, dt: float = 1e-3) -> float:
    """Half the estimated turning time of ``state``, clamped to [10 dt, tau_cap].

    A state that heats from the start gets the floor and a
    :class:`HeatingDominatedWarning`.
    """
    if drive.gamma_mod <= 0.0:
        raise ValueError("recommended_interval needs Gamma > 0")
    if b != drive.b:
        drive = Drive.from_depth(b, drive.gamma_mod / drive.b if drive.b else 1.0, drive.phi)
    floor = MIN_STEPS_PER_UPDATE * dt
    if state.is_zero():
        return tau_cap(drive)
    tau = turning_time_estimate(state.q, state.p, drive)
    if tau == 0.0:
        warnings.warn("state heats from the start; using the measurement floor", HeatingDominatedWarning, stacklevel=2)
        return floor
    return min(max(0.5 * tau, floor), tau_cap(drive))


class AdaptiveController:
    """Measure-and-update protocol bound to one trajectory at a time.

    Parameters
    ----------
    delta_tau : float or None
        Fixed update interval. With ``policy="fixed"`` and None, it is set
        once from the initial state via :func:`recommended_interval`.
    max_updates : int or None
        Number of phase choices (the t = 0 choice included). When the
        run's ``t_end`` is None the trajectory stops after the last
        segment; otherwise the final phase is held until ``t_end``.
    policy : {"fixed", "per_segment"}
        "per_segment" recomputes the interval from each measured state.
    mode : {"single_shot", "adaptive", "delayed"}
        Label carried into the plan; "single_shot" forces one update.
    """

    def __init__(self, delta_tau: float | None = None, max_updates: int | None = None, policy: IntervalPolicy = "fixed", mode: Mode = "adaptive"):
        if policy not in ("fixed", "per_segment"):
            raise ValueError(f"unknown interval policy {policy!r}")
        if delta_tau is not None and delta_tau <= 0.0:
            raise ValueError("delta_tau must be > 0")
        self.delta_tau = delta_tau
        self.max_updates = 1 if mode == "single_shot" else max_updates
        self.policy = policy
        self.mode = mode
        self.last_plan: FeedbackPlan | None = None

    def _interval_steps(self, state: QuadratureState, cfg: SimConfig, drive: Drive) -> int:
        dt_ = self.delta_tau
        if dt_ is None or self.policy == "per_segment":
            dt_ = recommended_interval(state, drive.b, drive, cfg.dt)
        n = max(MIN_STEPS_PER_UPDATE, int(round(dt_ / cfg.dt)))
        return n

    def run(self, ic: QuadratureState, cfg: SimConfig, params: OscillatorParams, drive: Drive):
        record, _ = self.run_with_plan(ic, cfg, params, drive)
        return record

    def run_with_plan(self, ic: QuadratureState, cfg: SimConfig, params: OscillatorParams, drive: Drive) -> tuple[TrajectoryRecord, FeedbackPlan]:
        if self.delta_tau is not None and self.delta_tau < MIN_STEPS_PER_UPDATE * cfg.dt * (1 - 1e-9):
            raise ValueError(f"delta_tau must be >= {MIN_STEPS_PER_UPDATE} dt")
        if cfg.t_end is None and self.max_updates is None:
            raise ValueError("need t_end or max_updates to bound the run")
        omega = params.omega
        steps = self._interval_steps(ic, cfg, drive)
        plan = FeedbackPlan(delta_tau=steps * cfg.dt, max_updates=self.max_updates, mode=self.mode, b=drive.b)

        if cfg.t_end is not None:
            total = cfg.n_steps()
        elif self.policy == "fixed":
            total = steps * self.max_updates
        else:
            total = None

        if total is None:
            # per-segment horizon is unknown upfront: size the buffers for the cap
            bound = int(math.ceil(tau_cap(drive) / cfg.dt)) * self.max_updates + 1
            integ = Integrator1D(ic, cfg, params, drive, bound)
        else:
            integ = Integrator1D(ic, cfg, params, drive, total)

        phi_abs = drive.phi
        n_updates = 0
        while True:
            if self.max_updates is not None and n_updates >= self.max_updates:
                break
            if total is not None and integ.k >= total:
                break
            state = integ.state
            if state.is_zero():
                break
            t_now = integ.t
            entry = plan.log(t_now, state)
            phi_abs = wrap_phase(entry.phi - 2.0 * omega * t_now)
            if n_updates > 0 and self.policy == "per_segment":
                steps = self._interval_steps(state, cfg, drive)
            if integ.k == 0:
                integ.out_phi[0] = phi_abs
            n_updates += 1
            seg = steps
            if total is not None:
                seg = min(seg, total - integ.k)
            if total is None:
                integ.total = integ.k + seg
            integ.advance(seg, phi_abs)

        if total is not None and integ.k < total:
            integ.advance(total - integ.k, phi_abs)
        meta = run_meta(cfg, params, drive, feedback_mode=self.mode, interval_policy=self.policy,
                        delta_tau=plan.delta_tau, updates=len(plan.phase_log))
        record = integ.finish(meta)
        self.last_plan = plan
        return record, plan


def run_adaptive(ic: QuadratureState, cfg: SimConfig, params: OscillatorParams, drive: Drive, delta_tau: float | None = None, max_updates: int | None = None, policy: IntervalPolicy = "fixed", mode: Mode = "adaptive") -> tuple[TrajectoryRecord, FeedbackPlan]:
    """Simulate with phase updates every ``delta_tau`` (see :class:`AdaptiveController`)."""
    ctrl = AdaptiveController(delta_tau=delta_tau, max_updates=max_updates, policy=policy, mode=mode)
    return ctrl.run_with_plan(ic, cfg, params, drive)
