"""Shared domain types, occupancy conventions and thermal-state sampling.

Everything is dimensionless. Lengths are in units of the zero-point
amplitude and times in units of 1/omega; ``omega`` is kept as a field so
that multimode sets can carry several frequencies on one clock.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

TWO_PI = 2.0 * math.pi
# largest modulation depth validated against the perturbative solution
PERTURBATIVE_B_MAX = 0.25

Convention = Literal["classical", "quantum"]


def wrap_phase(phi: float) -> float:
    """Map an angle onto [0, 2*pi)."""
    out = math.fmod(phi, TWO_PI)
    if out < 0.0:
        out += TWO_PI
    # fmod of a value just below 0 can round up to exactly 2*pi
    return 0.0 if out >= TWO_PI else out


@dataclass(frozen=True)
class OscillatorParams:
    """A single mechanical resonance.

    Parameters
    ----------
    omega : float
        Natural angular frequency. Sets the time unit.
    gamma : float
        Intrinsic damping rate, same units as ``omega``.
    n_th : float
        Mean occupancy of the thermal bath.
    """

    omega: float = 1.0
    gamma: float = 0.0
    n_th: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega > 0.0):
            raise ValueError(f"omega must be > 0, got {self.omega}")
        if not (math.isfinite(self.gamma) and self.gamma >= 0.0):
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.gamma >= self.omega:
            raise ValueError(
                f"gamma < omega required (weak damping regime), got gamma={self.gamma}, omega={self.omega}"
            )
        if not (math.isfinite(self.n_th) and self.n_th >= 0.0):
            raise ValueError(f"n_th must be >= 0, got {self.n_th}")

    @property
    def quality_factor(self) -> float:
        return self.omega / self.gamma if self.gamma > 0.0 else math.inf


@dataclass(frozen=True)
class Drive:
    """Parametric modulation of depth ``b`` at twice the mode frequency.

    ``gamma_mod`` is the induced rate b*omega; build it with
    :meth:`from_depth` rather than by hand so the two stay consistent.
    """

    b: float
    phi: float = 0.0
    gamma_mod: float = field(default=math.nan)

    def __post_init__(self):
        if not (math.isfinite(self.b) and abs(self.b) < 1.0):
            raise ValueError(f"|b| < 1 required, got b={self.b}")
        if not math.isfinite(self.phi):
            raise ValueError(f"phi must be finite, got {self.phi}")
        object.__setattr__(self, "phi", wrap_phase(self.phi))
        if math.isnan(self.gamma_mod):
            # omega defaults to 1 in internal units
            object.__setattr__(self, "gamma_mod", self.b)

    @classmethod
    def from_depth(cls, b: float, omega: float = 1.0, phi: float = 0.0) -> "Drive":
        return cls(b=b, phi=phi, gamma_mod=b * omega)

    @property
    def perturbative(self) -> bool:
        """False once b exceeds the largest validated depth."""
        return abs(self.b) <= PERTURBATIVE_B_MAX

    def with_phase(self, phi: float) -> "Drive":
        return Drive(b=self.b, phi=phi, gamma_mod=self.gamma_mod)


@dataclass(frozen=True)
class QuadratureState:
    q: float
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.q) and math.isfinite(self.p)):
            raise ValueError(f"non-finite quadratures ({self.q}, {self.p})")

    def is_zero(self) -> bool:
        return self.q == 0.0 and self.p == 0.0


@dataclass
class TrajectoryRecord:
    """Sampled time series of a single realization.

    Columns are stored as parallel numpy arrays; ``n`` uses the classical
    convention (q**2 + p**2) / 2.
    """

    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    phi: np.ndarray
    dt: float
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        n = len(self.t)
        if not (len(self.q) == len(self.p) == len(self.phi) == n):
            raise ValueError("trajectory columns have different lengths")
        if n > 1 and not np.all(np.diff(self.t) > 0.0):
            raise ValueError("timestamps must be strictly increasing")

    @property
    def n(self) -> np.ndarray:
        return 0.5 * (self.q**2 + self.p**2)

    def __len__(self) -> int:
        return len(self.t)

    def state_at(self, i: int) -> QuadratureState:
        return QuadratureState(float(self.q[i]), float(self.p[i]))

    @property
    def final_state(self) -> QuadratureState:
        return self.state_at(-1)


@dataclass
class EnsembleStats:
    """Per-time-bin occupancy statistics over many seeded realizations.

    ``mean_n`` / ``var_n`` use the classical convention; the quantum
    convention is ``mean_n - 1/2`` with the same variance.
    """

    time_bins: np.ndarray
    mean_n: np.ndarray
    var_n: np.ndarray
    mean_q2: np.ndarray
    mean_p2: np.ndarray
    count: int
    master_seed: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if np.any(self.var_n < 0.0):
            raise ValueError("negative variance")

    @property
    def mean_n_quantum(self) -> np.ndarray:
        return self.mean_n - 0.5

    def late_time_mean(self, fraction: float = 0.2, column: str = "mean_n") -> float:
        """Average ``column`` over the last ``fraction`` of the time bins."""
        values = getattr(self, column)
        k = max(1, int(round(len(values) * fraction)))
        return float(np.mean(values[-k:]))


def occupancy_of(state: QuadratureState, convention: Convention = "classical") -> float:
    """Phonon occupancy of a single phase-space point.

    The quantum value subtracts the zero-point 1/2 and can be negative for
    one realization; only ensemble means are meaningful there.
    """
    n = 0.5 * (state.q * state.q + state.p * state.p)
    if convention == "classical":
        return n
    if convention == "quantum":
        return n - 0.5
    raise ValueError(f"unknown convention {convention!r}")


def sample_thermal_state(n_th: float, rng: np.random.Generator) -> QuadratureState:
    """Draw (q, p) from a classical thermal state with per-quadrature variance ``n_th``."""
    if n_th < 0.0:
        raise ValueError(f"n_th must be >= 0, got {n_th}")
    sigma = math.sqrt(n_th)
    q, p = rng.standard_normal(2)
    return QuadratureState(sigma * float(q), sigma * float(p))


def derive_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for realization ``index`` of a seeded ensemble.

    The stream depends only on (master_seed, index), never on scheduling.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(index,))))
