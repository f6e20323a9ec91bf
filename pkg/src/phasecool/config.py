"""Experiment configuration: strict YAML loading, validation and the run manifest.

A config file has nested sections::

    seed: 7
    oscillator: {omega: 1.0, gamma: 1.0e-6, n_th: 1.0e4}
    drive: {b: 0.05, phi: null}          # null: optimal phase of the initial state
    initial: {q0: null, p0: null, n0: 1.0e4}
    sim: {dt: 1.0e-3, t_end: 400.0, integrator: rotation_splitting, noise: classical, sample_stride: 100}
    feedback: {enabled: true, delta_tau: null, max_updates: null, policy: fixed}
    modes: {omegas: [1.0, 1.3], gamma_ratio: 1.0e-6, n0: 1.0e5}
    ensemble: {count: 100}
    quantum: {ratios: null, phis: null}
    output: {dir: out}

Every section is optional. Unknown keys are errors. Rates and times may
be given in any unit; they are scaled to Omega = 1 (the ``oscillator``
frequency) before anything runs, and the manifest records both.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from .core import Drive, OscillatorParams
from .engine import SimConfig
from .multimode import ModeSet


class ConfigError(ValueError):
    """Config could not be parsed or violates an invariant."""


@dataclass(frozen=True)
class OscillatorSection:
    omega: float = 1.0
    gamma: float = 1e-6
    n_th: float = 1e4


@dataclass(frozen=True)
class DriveSection:
    b: float = 0.05
    phi: float | None = None


@dataclass(frozen=True)
class InitialSection:
    q0: float | None = None
    p0: float | None = None
    n0: float | None = None


@dataclass(frozen=True)
class SimSection:
    dt: float = 1e-3
    t_end: float | None = 400.0
    integrator: str = "rotation_splitting"
    noise: str = "classical"
    sample_stride: int = 100


@dataclass(frozen=True)
class FeedbackSection:
    enabled: bool = False
    delta_tau: float | None = None
    max_updates: int | None = None
    policy: str = "fixed"


@dataclass(frozen=True)
class ModesSection:
    omegas: list = field(default_factory=list)
    gamma_ratio: float = 1e-6
    n_th: float | None = None
    n0: float | None = None
    resolution: float | None = None
    shared: bool = True
    degenerate_policy: str = "idle"


@dataclass(frozen=True)
class EnsembleSection:
    count: int = 100


@dataclass(frozen=True)
class QuantumSection:
    ratios: list | None = None
    phis: list | None = None


@dataclass(frozen=True)
class OutputSection:
    dir: str = "out"


_SECTIONS = {
    "oscillator": OscillatorSection,
    "drive": DriveSection,
    "initial": InitialSection,
    "sim": SimSection,
    "feedback": FeedbackSection,
    "modes": ModesSection,
    "ensemble": EnsembleSection,
    "quantum": QuantumSection,
    "output": OutputSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description in user units; the methods return Omega = 1 objects."""

    seed: int = 0
    oscillator: OscillatorSection = OscillatorSection()
    drive: DriveSection = DriveSection()
    initial: InitialSection = InitialSection()
    sim: SimSection = SimSection()
    feedback: FeedbackSection = FeedbackSection()
    modes: ModesSection | None = None
    ensemble: EnsembleSection = EnsembleSection()
    quantum: QuantumSection = QuantumSection()
    output: OutputSection = OutputSection()

    def __post_init__(self):
        validate(self)

    # internal (Omega = 1) objects
    @property
    def time_scale(self) -> float:
        return self.oscillator.omega

    def params(self) -> OscillatorParams:
        o = self.oscillator
        return OscillatorParams(1.0, o.gamma / o.omega, o.n_th)

    def drive_obj(self, phi: float = 0.0) -> Drive:
        return Drive.from_depth(self.drive.b, 1.0, phi)

    def sim_config(self, seed: int | None = None) -> SimConfig:
        s, w = self.sim, self.time_scale
        return SimConfig(
            dt=s.dt * w,
            t_end=None if s.t_end is None else s.t_end * w,
            integrator=s.integrator,
            noise=s.noise,
            sample_stride=int(s.sample_stride),
            seed=self.seed if seed is None else seed,
        )

    def delta_tau(self) -> float | None:
        d = self.feedback.delta_tau
        return None if d is None else d * self.time_scale

    def modeset(self) -> ModeSet:
        if self.modes is None:
            raise ConfigError("no [modes] section")
        m, w = self.modes, self.time_scale
        n_th = self.oscillator.n_th if m.n_th is None else m.n_th
        modes = [OscillatorParams(om / w, m.gamma_ratio * om / w, n_th) for om in m.omegas]
        res = None if m.resolution is None else m.resolution / w
        return ModeSet(modes, self.drive.b, res, m.degenerate_policy)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def _coerce(name: str, value, default):
    # PyYAML reads "1e-6" (no dot) as a string; accept it as a number
    if isinstance(value, str) and isinstance(default, (int, float)) and not isinstance(default, bool):
        try:
            return float(value) if isinstance(default, float) else int(value)
        except ValueError:
            raise ConfigError(f"{name}: expected a number, got {value!r}") from None
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def _section(name: str, cls, data) -> Any:
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section '{name}' must be a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in '{name}': {', '.join(map(str, unknown))} (allowed: {', '.join(known)})")
    kw = {}
    defaults = cls()
    for key, value in data.items():
        default = getattr(defaults, key)
        if value is not None and isinstance(value, str) and default is None:
            try:
                value = float(value)
            except ValueError:
                pass
        kw[key] = _coerce(f"{name}.{key}", value, default)
    return cls(**kw)


def from_mapping(data: dict) -> ExperimentConfig:
    """Build and validate a config from a parsed mapping."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level of the config must be a mapping")
    unknown = sorted(set(data) - set(_SECTIONS) - {"seed"})
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(map(str, unknown))} (allowed: seed, {', '.join(_SECTIONS)})")
    kw = {name: _section(name, cls, data.get(name)) for name, cls in _SECTIONS.items() if name in data}
    if "modes" in data and data["modes"] is None:
        kw.pop("modes")
    if "seed" in data:
        kw["seed"] = _coerce("seed", data["seed"], 0)
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    """Read a YAML config; parse errors carry line and column."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"{path}: parse error at {where}: {exc.problem or exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from None
    return from_mapping(data)


def _check(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate(cfg: ExperimentConfig) -> None:
    """Re-check every module invariant; raises :class:`ConfigError` naming it."""
    _check(isinstance(cfg.seed, int) and not isinstance(cfg.seed, bool) and 0 <= cfg.seed < 2**64,
           f"seed must be an integer in [0, 2**64), got {cfg.seed!r}")
    o = cfg.oscillator
    for key in ("omega", "gamma", "n_th"):
        _check(_finite(getattr(o, key)), f"oscillator.{key} must be a finite number")
    d = cfg.drive
    _check(_finite(d.b), "drive.b must be a finite number")
    _check(d.phi is None or _finite(d.phi), "drive.phi must be a number or null")
    s = cfg.sim
    _check(_finite(s.dt), "sim.dt must be a finite number")
    _check(s.t_end is None or _finite(s.t_end), "sim.t_end must be a number or null")
    _check(isinstance(s.sample_stride, int) and not isinstance(s.sample_stride, bool),
           "sim.sample_stride must be an integer")
    _check(o.omega > 0.0, f"oscillator.omega must be > 0, got {o.omega}")
    try:
        cfg.params()
        Drive.from_depth(d.b)
        sim = cfg.sim_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if d.b < 0.0:
        raise ConfigError(f"drive.b must be >= 0 (the phase carries the sign), got {d.b}")
    i = cfg.initial
    for key in ("q0", "p0", "n0"):
        v = getattr(i, key)
        _check(v is None or _finite(v), f"initial.{key} must be a number or null")
    _check((i.q0 is None) == (i.p0 is None), "initial.q0 and initial.p0 must be given together")
    _check(i.n0 is None or i.n0 >= 0.0, f"initial.n0 must be >= 0, got {i.n0}")
    _check(i.q0 is None or i.n0 is None, "give either initial.q0/p0 or initial.n0, not both")

    f = cfg.feedback
    _check(isinstance(f.enabled, bool), "feedback.enabled must be true or false")
    _check(f.policy in ("fixed", "per_segment"), f"feedback.policy must be 'fixed' or 'per_segment', got {f.policy!r}")
    _check(f.max_updates is None or (isinstance(f.max_updates, int) and f.max_updates >= 1),
           "feedback.max_updates must be an integer >= 1 or null")
    if f.delta_tau is not None:
        _check(_finite(f.delta_tau) and f.delta_tau > 0.0, "feedback.delta_tau must be > 0")
        _check(f.delta_tau * o.omega >= 10 * sim.dt * (1 - 1e-9), "feedback.delta_tau must be >= 10 dt")
    if f.enabled:
        _check(d.b > 0.0, "feedback needs drive.b > 0")
    if s.t_end is None:
        _check(f.enabled and f.max_updates is not None, "sim.t_end may be null only for feedback runs with max_updates")

    _check(isinstance(cfg.ensemble.count, int) and cfg.ensemble.count >= 1, "ensemble.count must be an integer >= 1")

    q = cfg.quantum
    if q.ratios is not None:
        _check(isinstance(q.ratios, list) and len(q.ratios) > 0 and all(_finite(r) and r >= 0 for r in q.ratios),
               "quantum.ratios must be a non-empty list of numbers >= 0")
    if q.phis is not None:
        _check(isinstance(q.phis, list) and len(q.phis) > 0 and all(_finite(p) for p in q.phis),
               "quantum.phis must be a non-empty list of numbers")

    m = cfg.modes
    if m is not None:
        _check(isinstance(m.omegas, list) and len(m.omegas) >= 1 and all(_finite(w) and w > 0 for w in m.omegas),
               "modes.omegas must be a non-empty list of frequencies > 0 (n_res >= 1)")
        _check(_finite(m.gamma_ratio) and 0.0 <= m.gamma_ratio < 1.0, "modes.gamma_ratio must be in [0, 1) (gamma_j < omega_j)")
        _check(m.n_th is None or (_finite(m.n_th) and m.n_th >= 0), "modes.n_th must be >= 0")
        _check(m.n0 is None or (_finite(m.n0) and m.n0 >= 0), "modes.n0 must be >= 0")
        _check(m.resolution is None or (_finite(m.resolution) and m.resolution > 0), "modes.resolution must be > 0")
        _check(isinstance(m.shared, bool), "modes.shared must be true or false")
        _check(m.degenerate_policy in ("idle", "summed"), "modes.degenerate_policy must be 'idle' or 'summed'")
        _check(s.t_end is not None, "multimode runs need sim.t_end")
        try:
            cfg.modeset()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def to_mapping(cfg: ExperimentConfig) -> dict:
    out = {"seed": cfg.seed}
    for name in _SECTIONS:
        sec = getattr(cfg, name)
        out[name] = None if sec is None else dataclasses.asdict(sec)
    return out


def manifest(cfg: ExperimentConfig) -> dict:
    """Flat, ordered key -> value echo of every parameter (user units plus scaled ones)."""
    out = {}
    for name, sec in to_mapping(cfg).items():
        if isinstance(sec, dict):
            for key, value in sec.items():
                out[f"{name}.{key}"] = value
        else:
            out[name] = sec
    p, sim = cfg.params(), cfg.sim_config()
    out["internal.gamma"] = p.gamma
    out["internal.dt"] = sim.dt
    out["internal.t_end"] = sim.t_end
    out["internal.Gamma"] = cfg.drive.b
    return out


def from_manifest(entries: dict) -> ExperimentConfig:
    """Rebuild a config from a manifest (``internal.*`` and unrelated keys are ignored)."""
    data: dict = {}
    for key, value in entries.items():
        if key == "seed":
            data["seed"] = value
            continue
        if "." not in key:
            continue
        sec, sub = key.split(".", 1)
        if sec not in _SECTIONS:
            continue
        data.setdefault(sec, {})[sub] = value
    if "modes" in entries and entries["modes"] is None:
        data["modes"] = None
    return from_mapping(data)


def format_value(value) -> str:
    """JSON text of a summary value; floats keep full round-trip precision."""
    return json.dumps(value, allow_nan=True)
