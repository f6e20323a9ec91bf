"""Config-driven runs and the named presets.

Each runner writes its tables into ``out_dir`` and returns the summary
dict it also stored in the sidecar. Summaries start with the config
manifest, so every output carries what is needed to regenerate it.
"""
from __future__ import annotations

import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .analysis import fit_cooling_rate, observed_turning_time
from .classical import optimal_phase, turning_time_estimate
from .config import (
    DriveSection,
    EnsembleSection,
    ExperimentConfig,
    FeedbackSection,
    InitialSection,
    ModesSection,
    OscillatorSection,
    QuantumSection,
    SimSection,
    manifest,
)
from .core import QuadratureState, TrajectoryRecord, sample_thermal_state
from .engine import derive_seed, ensemble_run, ic_rng, simulate
from .feedback import AdaptiveController
from .multimode import MultimodeFeedback, isolated_baseline, late_mean, simulate_multimode, thermal_ics
from .quantum import SpectralConfig, final_occupancy_limit, position_variance_closed, position_variance_quadrature

DEFAULT_RATIOS = tuple(float(r) for r in np.logspace(math.log10(2.0), 5.0, 20))
DEFAULT_PHIS = (0.0, 0.5 * math.pi, math.pi)
# update interval for multimode runs without an explicit delta_tau; every
# phase jump of one band kicks the other modes, so updates are kept sparse
MULTIMODE_DELTA_TAU = 10.0


class SingleShot:
    """Protocol object: optimal phase for the initial state, then hold it."""

    def run(self, ic: QuadratureState, cfg, params, drive) -> TrajectoryRecord:
        phi = optimal_phase(ic.q, ic.p, drive.b) if not ic.is_zero() else drive.phi
        return simulate(ic, None, cfg, params, drive.with_phase(phi))


class FixedPhase:
    def run(self, ic, cfg, params, drive) -> TrajectoryRecord:
        return simulate(ic, None, cfg, params, drive)


def initial_state(cfg: ExperimentConfig, seed: int) -> QuadratureState:
    """Explicit (q0, p0), else a thermal draw with n0 (default: the bath n_th)."""
    i = cfg.initial
    if i.q0 is not None:
        return QuadratureState(float(i.q0), float(i.p0))
    n0 = cfg.oscillator.n_th if i.n0 is None else i.n0
    return sample_thermal_state(n0, ic_rng(seed))


def _ic_sampler(cfg: ExperimentConfig):
    i = cfg.initial
    if i.q0 is not None:
        fixed = QuadratureState(float(i.q0), float(i.p0))
        return lambda rng: fixed
    n0 = cfg.oscillator.n_th if i.n0 is None else i.n0
    return lambda rng: sample_thermal_state(n0, rng)


def protocol_for(cfg: ExperimentConfig):
    f = cfg.feedback
    if f.enabled:
        return AdaptiveController(delta_tau=cfg.delta_tau(), max_updates=f.max_updates, policy=f.policy)
    if cfg.drive.phi is None:
        return SingleShot()
    return FixedPhase()


def _trajectory_summary(rec: TrajectoryRecord, b: float) -> dict:
    n = rec.n
    out = {
        "n_initial": float(n[0]),
        "n_min": float(n.min()),
        "t_min": observed_turning_time(rec),
        "n_final": float(n[-1]),
        "late_mean_n": late_mean(rec),
    }
    if b > 0.0:
        rate = fit_cooling_rate(rec)
        out["fitted_rate"] = rate
        out["fitted_rate_over_Gamma"] = rate / b
    return out


def run_simulate(cfg: ExperimentConfig, out_dir, threads: int | None = None) -> dict:
    """One trajectory; feedback if enabled, else a constant (or optimal) phase."""
    out_dir = Path(out_dir)
    ic = initial_state(cfg, cfg.seed)
    sim = cfg.sim_config()
    phi = 0.0 if cfg.drive.phi is None else cfg.drive.phi
    rec = protocol_for(cfg).run(ic, sim, cfg.params(), cfg.drive_obj(phi))
    summary = manifest(cfg)
    summary.update({"ic.q0": ic.q, "ic.p0": ic.p})
    summary.update(_trajectory_summary(rec, cfg.drive.b))
    io.write_trajectory(rec, out_dir / "trajectory.csv", summary)
    return summary


def run_ensemble(cfg: ExperimentConfig, out_dir, threads: int | None = None, name: str = "ensemble.csv") -> dict:
    out_dir = Path(out_dir)
    phi = 0.0 if cfg.drive.phi is None else cfg.drive.phi
    stats = ensemble_run(_ic_sampler(cfg), protocol_for(cfg), cfg.sim_config(), cfg.params(), cfg.drive_obj(phi),
                         cfg.ensemble.count, threads=threads)
    summary = manifest(cfg)
    g, n_th, G = cfg.params().gamma, cfg.oscillator.n_th, cfg.drive.b
    summary["late_mean_n"] = stats.late_time_mean(0.2)
    summary["late_mean_q2"] = stats.late_time_mean(0.2, "mean_q2")
    summary["equilibrium_prediction"] = g * n_th / (g + G) if (g + G) > 0 else n_th
    io.write_ensemble(stats, out_dir / name, summary)
    return summary


def run_multimode(cfg: ExperimentConfig, out_dir, threads: int | None = None, prefix: str = "mode", baselines: bool = True) -> dict:
    """One multimode realization plus isolated baselines of the resolved modes."""
    out_dir = Path(out_dir)
    ms = cfg.modeset()
    n0 = cfg.modes.n0 if cfg.modes.n0 is not None else (cfg.modes.n_th if cfg.modes.n_th is not None else cfg.oscillator.n_th)
    ics = thermal_ics(ms, n0, ic_rng(cfg.seed))
    dtau = cfg.delta_tau() if cfg.delta_tau() is not None else MULTIMODE_DELTA_TAU
    fb = MultimodeFeedback(dtau, cfg.feedback.max_updates) if cfg.feedback.enabled else None
    sim = cfg.sim_config()
    records = simulate_multimode(ms, ics, fb, sim, shared=cfg.modes.shared)
    summary = manifest(cfg)
    summary["bands"] = ms.bands
    for j, rec in enumerate(records):
        lm = late_mean(rec)
        summary[f"mode{j}.n_initial"] = float(rec.n[0])
        summary[f"mode{j}.late_mean_n"] = lm
        if baselines and fb is not None and len(ms.bands[ms.band_of(j)]) == 1:
            base = isolated_baseline(ms, j, ics[j], fb, sim)
            summary[f"mode{j}.isolated_baseline"] = base
            summary[f"mode{j}.ratio_to_baseline"] = lm / base
    for j, rec in enumerate(records):
        io.write_trajectory(rec, out_dir / f"{prefix}_{j}.csv", summary)
    return summary


def quantum_table(gamma: float, n_th: float, ratios=DEFAULT_RATIOS, phis=DEFAULT_PHIS):
    rows = []
    for phi in phis:
        for r in ratios:
            sc = SpectralConfig(gamma=gamma, gamma_mod=r * gamma, phi=phi, n_th=n_th)
            closed = position_variance_closed(sc)
            quad = position_variance_quadrature(sc)
            rows.append((r, phi, closed, quad, abs(closed - quad) / abs(quad)))
    return np.array(rows)


def run_quantum(cfg: ExperimentConfig, out_dir, threads: int | None = None) -> dict:
    out_dir = Path(out_dir)
    g, n_th = cfg.params().gamma, cfg.oscillator.n_th
    ratios = cfg.quantum.ratios or DEFAULT_RATIOS
    phis = cfg.quantum.phis or DEFAULT_PHIS
    table = quantum_table(g, n_th, ratios, phis)
    summary = manifest(cfg)
    summary["max_rel_diff"] = float(table[:, 4].max())
    G = cfg.drive.b
    if G > 0.0:
        sc = SpectralConfig(gamma=g, gamma_mod=G, phi=0.5 * math.pi, n_th=n_th)
        summary["q2_closed"] = position_variance_closed(sc)
        summary["n_final_limit"] = final_occupancy_limit(sc)
    io.write_table(out_dir / "quantum.csv", ("ratio", "phi", "closed", "quadrature", "rel_diff"), table.T, summary)
    return summary


# presets -----------------------------------------------------------------

_REFERENCE_OSC = OscillatorSection(omega=1.0, gamma=1e-6, n_th=1e4)
RESOLVED_OMEGAS = [1.0 + 0.3 * j for j in range(8)]
DEGENERATE_OMEGAS = [1.0, 1.3, 1.6, 1.9, 1.9, 2.2, 2.5, 2.8]
SWEEP_B = (0.05, 0.1, 0.15, 0.25)


def preset_config(name: str, seed: int = 0) -> ExperimentConfig:
    """The config behind preset ``name``."""
    base = ExperimentConfig(seed=seed, oscillator=_REFERENCE_OSC, drive=DriveSection(b=0.05, phi=None))
    if name == "fig2_single_shot":
        return replace(base, sim=SimSection(t_end=200.0, noise="classical", sample_stride=100), ensemble=EnsembleSection(3))
    if name == "fig2_sweep_b":
        return replace(base, sim=SimSection(t_end=400.0, noise="classical", sample_stride=10))
    if name == "fig3_feedback":
        return replace(base, sim=SimSection(t_end=400.0, noise="classical", sample_stride=100),
                       feedback=FeedbackSection(enabled=True, policy="fixed"))
    if name == "fig3_ensemble":
        return replace(base, sim=SimSection(t_end=400.0, noise="classical", sample_stride=1000),
                       feedback=FeedbackSection(enabled=True, delta_tau=2.0), ensemble=EnsembleSection(100))
    if name == "fig4_multimode":
        return replace(base, oscillator=OscillatorSection(1.0, 1e-6, 1e5),
                       sim=SimSection(t_end=400.0, noise="classical", sample_stride=1000),
                       feedback=FeedbackSection(enabled=True, delta_tau=MULTIMODE_DELTA_TAU),
                       initial=InitialSection(n0=1e5),
                       modes=ModesSection(omegas=RESOLVED_OMEGAS, gamma_ratio=1e-6, n0=1e5))
    if name == "quantum_limit":
        return replace(base, quantum=QuantumSection(ratios=list(DEFAULT_RATIOS), phis=list(DEFAULT_PHIS)))
    raise KeyError(name)


def _member_summary(cfg, preset: str, index: int, seed: int) -> dict:
    out = manifest(cfg)
    out.update({"preset": preset, "member_index": index, "member_seed": seed})
    return out


def _preset_fig2_single_shot(cfg, out_dir, threads):
    summary = manifest(cfg)
    sim, params = cfg.sim_config(), cfg.params()
    for i in range(cfg.ensemble.count):
        seed = derive_seed(cfg.seed, i)
        ic = initial_state(cfg, seed)
        rec = SingleShot().run(ic, replace(sim, seed=seed), params, cfg.drive_obj())
        for key, value in _trajectory_summary(rec, cfg.drive.b).items():
            summary[f"traj{i}.{key}"] = value
        summary[f"traj{i}.seed"] = seed
        summary[f"traj{i}.reduction_times_b"] = float(rec.n[0] / rec.n.min()) * cfg.drive.b
        io.write_trajectory(rec, Path(out_dir) / f"single_shot_{i}.csv", _member_summary(cfg, "fig2_single_shot", i, seed))
    io.write_summary(Path(out_dir) / "fig2_single_shot.summary.txt", summary)
    return summary


def _preset_fig2_sweep_b(cfg, out_dir, threads):
    summary = manifest(cfg)
    seed = derive_seed(cfg.seed, 0)
    ic = initial_state(cfg, seed)
    rows = []
    for b in SWEEP_B:
        t_end = float(round(min(20.0 / b, cfg.sim.t_end)))
        sub = replace(cfg, drive=DriveSection(b=b, phi=None), sim=replace(cfg.sim, t_end=t_end))
        rec = SingleShot().run(ic, sub.sim_config(seed), sub.params(), sub.drive_obj())
        rate = fit_cooling_rate(rec)
        rows.append((b, b, rate, rate / b))
        summary[f"b{b}.fitted_rate"] = rate
        summary[f"b{b}.fitted_rate_over_Gamma"] = rate / b
        io.write_trajectory(rec, Path(out_dir) / f"sweep_b{b}.csv", dict(_member_summary(sub, "fig2_sweep_b", 0, seed), fitted_rate=rate))
    io.write_table(Path(out_dir) / "sweep_b.csv", ("b", "Gamma", "fitted_rate", "ratio"), np.array(rows).T, summary)
    return summary


def _preset_fig3_feedback(cfg, out_dir, threads):
    summary = manifest(cfg)
    seed = derive_seed(cfg.seed, 0)
    ic = initial_state(cfg, seed)
    sim, params, drive = cfg.sim_config(seed), cfg.params(), cfg.drive_obj()
    tau = turning_time_estimate(ic.q, ic.p, drive)
    for label, ctrl in (("fast", AdaptiveController(delta_tau=None, policy="fixed")),
                        ("delayed", AdaptiveController(delta_tau=round(2.0 * tau, 3), policy="fixed"))):
        rec, plan = ctrl.run_with_plan(ic, sim, params, drive)
        summary[f"{label}.delta_tau"] = plan.delta_tau
        summary[f"{label}.updates"] = len(plan.phase_log)
        summary[f"{label}.late_mean_n"] = late_mean(rec)
        summary[f"{label}.n_max_after_first_update"] = float(rec.n[rec.t >= plan.delta_tau].max())
        io.write_trajectory(rec, Path(out_dir) / f"feedback_{label}.csv",
                           dict(_member_summary(cfg, "fig3_feedback", 0, seed), delta_tau=plan.delta_tau))
    summary["tau_estimate"] = tau
    io.write_summary(Path(out_dir) / "fig3_feedback.summary.txt", summary)
    return summary


def _preset_fig3_ensemble(cfg, out_dir, threads):
    return run_ensemble(cfg, out_dir, threads, name="feedback_ensemble.csv")


def _preset_fig4_multimode(cfg, out_dir, threads):
    summary = {}
    res = run_multimode(cfg, out_dir, threads, prefix="resolved")
    deg_cfg = replace(cfg, modes=replace(cfg.modes, omegas=DEGENERATE_OMEGAS))
    deg = run_multimode(deg_cfg, out_dir, threads, prefix="degenerate")
    summary.update({f"resolved.{k}": v for k, v in res.items()})
    summary.update({f"degenerate.{k}": v for k, v in deg.items() if k.startswith("mode") or k == "bands"})
    io.write_summary(Path(out_dir) / "fig4_multimode.summary.txt", summary)
    return summary


def _preset_quantum_limit(cfg, out_dir, threads):
    return run_quantum(cfg, out_dir, threads)


PRESETS = {
    "fig2_single_shot": _preset_fig2_single_shot,
    "fig2_sweep_b": _preset_fig2_sweep_b,
    "fig3_feedback": _preset_fig3_feedback,
    "fig3_ensemble": _preset_fig3_ensemble,
    "fig4_multimode": _preset_fig4_multimode,
    "quantum_limit": _preset_quantum_limit,
}


def run_preset(name: str, out_dir, seed: int = 0, threads: int | None = None) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    cfg = preset_config(name, seed)
    out = Path(out_dir)
    summary = PRESETS[name](cfg, out, threads)
    return summary
