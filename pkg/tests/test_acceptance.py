"""Acceptance suite: one PASS/FAIL line per criterion at its stated tolerance."""
import hashlib
import math

import numpy as np
import pytest

from phasecool.analysis import fit_cooling_rate, occupancy_envelope
from phasecool.classical import analytic_trajectory, coefficients_from_initial, optimal_phase, turning_time
from phasecool.core import Drive, OscillatorParams, QuadratureState, sample_thermal_state
from phasecool.engine import SimConfig, derive_seed, ensemble_run, ic_rng, reference_integrate
from phasecool.experiments import DEFAULT_PHIS, DEFAULT_RATIOS, RESOLVED_OMEGAS, DEGENERATE_OMEGAS, SingleShot, run_preset
from phasecool.feedback import AdaptiveController, run_adaptive
from phasecool.multimode import ModeSet, MultimodeFeedback, late_mean, simulate_multimode, thermal_ics
from phasecool.quantum import (
    SpectralConfig,
    final_occupancy_limit,
    position_variance_closed,
    position_variance_quadrature,
)

QUIET = OscillatorParams(1.0, 0.0, 0.0)


@pytest.mark.parametrize("b", [0.01, 0.05])
def test_c01_analytic_matches_oracle(b, report):
    phi = optimal_phase(1.0, 0.0, b)
    drive = Drive.from_depth(b, phi=phi)
    sol = coefficients_from_initial(1.0, 0.0, phi, b)
    horizon = min(turning_time(sol, drive), 50.0)
    ref = reference_integrate(QuadratureState(1.0, 0.0), drive, QUIET, horizon, dt=1e-4, sample_every=0.01)
    q, p = analytic_trajectory(sol, QUIET, drive, ref.t, with_momentum=True)
    ana = ref.__class__(t=ref.t, q=q, p=p, phi=ref.phi, dt=ref.dt)
    _, e_ref = occupancy_envelope(ref)
    _, e_ana = occupancy_envelope(ana)
    err = float(np.max(np.abs(e_ana - e_ref) / e_ref))
    ok = report(1, err <= 0.05, f"b={b}: max envelope rel. error {err:.2e} over [0, {horizon:.1f}] (tol 5e-2)")
    assert ok


def _thermal_single_shots(b, count, seed, n_th=1e4):
    rng = np.random.default_rng(seed)
    params = OscillatorParams(1.0, 1e-6, n_th)
    cfg = SimConfig(dt=1e-3, t_end=min(20.0 / b, 400.0), noise="off", sample_stride=10)
    for _ in range(count):
        ic = sample_thermal_state(n_th, rng)
        yield SingleShot().run(ic, cfg, params, Drive.from_depth(b))


@pytest.mark.parametrize("b,tol", [(0.05, 0.10), (0.1, 0.10), (0.25, 0.25)])
def test_c02_fitted_rate_equals_gamma(b, tol, report):
    rates = np.array([fit_cooling_rate(rec) for rec in _thermal_single_shots(b, 10, 20 + int(100 * b))])
    dev = np.abs(rates / b - 1.0)
    ok = report(2, bool(np.all(dev <= tol)),
                f"b={b}: fitted/Gamma over 10 thermal ICs in [{(rates / b).min():.3f}, {(rates / b).max():.3f}] (tol {tol:.0%})")
    assert ok


@pytest.mark.parametrize("b", [0.05, 0.1])
def test_c03_single_shot_depth(b, report):
    factors = np.array([rec.n[0] / rec.n.min() for rec in _thermal_single_shots(b, 20, 7)])
    scaled = factors * b
    inside = (scaled >= 0.2) & (scaled <= 5.0)
    ok = report(3, bool(np.all(inside)),
                f"b={b}: reduction x b over 20 ICs in [{scaled.min():.3g}, {scaled.max():.3g}], "
                f"{int(inside.sum())}/20 inside [0.2, 5] (median {np.median(scaled):.3g})")
    assert ok


def test_c04_six_steps(report):
    ic = QuadratureState(math.sqrt(2e4), 0.0)
    rec, plan = run_adaptive(ic, SimConfig(dt=1e-3, sample_stride=100), QUIET, Drive.from_depth(0.1),
                             max_updates=6, policy="per_segment")
    ok = report(4, len(plan.phase_log) == 6 and rec.n[-1] < 1.0,
                f"n0=1e4, b=0.1, {len(plan.phase_log)} updates: final n = {rec.n[-1]:.3g} (need < 1)")
    assert ok


@pytest.mark.slow
def test_c05_thermalization(report):
    params = OscillatorParams(1.0, 1e-3, 100.0)
    cfg = SimConfig(dt=1e-3, t_end=1e4, noise="classical", sample_stride=10000, seed=5)
    stats = ensemble_run(lambda r: QuadratureState(0.0, 0.0), None, cfg, params, Drive(0.0), 500)
    q2 = stats.late_time_mean(0.2, "mean_q2")
    ok = report(5, abs(q2 / 100.0 - 1.0) <= 0.1, f"500 trajectories: late <q^2> = {q2:.2f} (target 100 +- 10%)")
    assert ok


@pytest.mark.slow
def test_c06_feedback_equilibrium(report):
    params = OscillatorParams(1.0, 1e-6, 1e4)
    cfg = SimConfig(dt=1e-3, t_end=400.0, noise="classical", sample_stride=1000, seed=6)
    stats = ensemble_run(lambda r: sample_thermal_state(1e4, r), AdaptiveController(delta_tau=2.0), cfg, params,
                         Drive.from_depth(0.05), 100)
    n = stats.late_time_mean(0.2)
    ok = report(6, abs(n / 0.2 - 1.0) <= 0.3, f"100 trajectories, delta_tau=2: late mean n = {n:.4f} (target 0.2 +- 30%)")
    assert ok


def test_c07_quantum_closed_vs_quadrature(report):
    gamma, n_th = 1e-6, 1e4
    worst = 0.0
    for r in DEFAULT_RATIOS:
        for phi in DEFAULT_PHIS:
            cfg = SpectralConfig(gamma, r * gamma, phi=phi, n_th=n_th)
            c, q = position_variance_closed(cfg), position_variance_quadrature(cfg)
            worst = max(worst, abs(c - q) / abs(c))
    free = max(abs(position_variance_quadrature(SpectralConfig(gamma, 0.0, phi=phi, n_th=n_th)) - (n_th + 0.5))
               for phi in DEFAULT_PHIS)
    ok = report(7, worst <= 1e-6 and free <= 1e-8,
                f"{len(DEFAULT_RATIOS)}x{len(DEFAULT_PHIS)} grid: max rel diff {worst:.1e} (tol 1e-6); Gamma=0 abs err {free:.1e} (tol 1e-8)")
    assert ok


def test_c08_quantum_limit_value(report):
    n = final_occupancy_limit(SpectralConfig(1e-6, 0.05, phi=0.5 * math.pi, n_th=1e4))
    ok = report(8, abs(n - 0.20001) <= 1e-5, f"n_final = {n:.8f} (target 0.20001 +- 1e-5)")
    assert ok


def _multimode_means(omegas, seeds, cfg, fb, n0):
    ms = ModeSet([OscillatorParams(w, 1e-6 * w, n0) for w in omegas], 0.05)
    joint = np.zeros(len(omegas))
    alone = np.zeros(len(omegas))
    for s in seeds:
        ics = thermal_ics(ms, n0, ic_rng(s))
        sim = SimConfig(cfg.dt, cfg.t_end, cfg.integrator, cfg.noise, cfg.sample_stride, s)
        joint += [late_mean(r) for r in simulate_multimode(ms, ics, fb, sim)]
        for j, band in enumerate(ms.bands):
            if len(band) == 1:
                k = band[0]
                alone[k] += late_mean(simulate_multimode(ms.subset([k]), [ics[k]], fb, sim)[0])
    return ms, joint / len(seeds), alone / len(seeds)


@pytest.mark.slow
def test_c09_multimode(report):
    n0 = 1e5
    cfg = SimConfig(dt=1e-3, t_end=400.0, noise="classical", sample_stride=1000)
    fb = MultimodeFeedback(10.0)
    seeds = [derive_seed(9, i) for i in range(10)]
    _, joint, alone = _multimode_means(RESOLVED_OMEGAS, seeds, cfg, fb, n0)
    ratio = joint / alone
    ok_res = bool(np.all((ratio >= 0.5) & (ratio <= 2.0)))
    ms, djoint, dalone = _multimode_means(DEGENERATE_OMEGAS, seeds, cfg, fb, n0)
    deg = [j for band in ms.degenerate_bands() for j in band]
    res = [j for j in range(ms.n_res) if j not in deg]
    dratio = djoint[res] / dalone[res]
    growth = djoint[deg] / n0
    ok_deg = bool(np.all((growth >= 0.5) & (growth <= 2.0)) and np.all((dratio >= 0.5) & (dratio <= 2.0)))
    report(9, ok_res, f"resolved set: joint/isolated in [{ratio.min():.2f}, {ratio.max():.2f}] (need [0.5, 2])")
    report(9, ok_deg, f"degenerate set: members n/n0 = {', '.join(f'{g:.2f}' for g in growth)}; "
                      f"resolved joint/isolated in [{dratio.min():.2f}, {dratio.max():.2f}] (need [0.5, 2])")
    assert ok_res and ok_deg


def _tree_digest(path):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(path.iterdir())}


def test_c10_determinism_across_threads(tmp_path, report, monkeypatch):
    digests = []
    for threads in (1, 2, 4):
        run_preset("fig3_ensemble", tmp_path / f"e{threads}", seed=3, threads=threads)
        run_preset("fig2_single_shot", tmp_path / f"s{threads}", seed=3, threads=threads)
        digests.append((_tree_digest(tmp_path / f"e{threads}"), _tree_digest(tmp_path / f"s{threads}")))
    monkeypatch.setenv("PHASECOOL_THREADS", "3")
    run_preset("fig3_ensemble", tmp_path / "env", seed=3)
    same = all(d == digests[0] for d in digests) and _tree_digest(tmp_path / "env") == digests[0][0]
    ok = report(10, same, "fig3_ensemble + fig2_single_shot at threads 1/2/4 and env override: byte-identical" if same
                else "outputs differ across thread counts")
    assert ok
