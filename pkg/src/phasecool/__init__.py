"""Phase-adaptive parametric cooling of mechanical resonators.

Time is measured in units of 1/Omega throughout; occupancies use the
classical convention (q**2 + p**2) / 2 unless stated otherwise.
"""
from .analysis import fit_cooling_rate, observed_turning_time, occupancy_envelope
from .classical import (
    MathieuSolution,
    TruncatedFloquet,
    amplitude_ratio_estimate,
    analytic_trajectory,
    characteristic_exponent,
    coefficients_from_initial,
    optimal_phase,
    turning_time,
    turning_time_estimate,
)
from .core import (
    Drive,
    EnsembleStats,
    OscillatorParams,
    QuadratureState,
    TrajectoryRecord,
    occupancy_of,
    sample_thermal_state,
    wrap_phase,
)
from .engine import (
    PhaseSchedule,
    SimConfig,
    ensemble_run,
    evolution_matrix,
    reference_integrate,
    simulate,
    step,
    time_ordered_product,
)
from .feedback import AdaptiveController, FeedbackPlan, HeatingDominatedWarning, recommended_interval, run_adaptive
from .multimode import ModeSet, MultimodeFeedback, band_partition, isolated_baseline, simulate_multimode
from .quantum import (
    PoleError,
    SpectralConfig,
    final_occupancy_limit,
    position_variance_closed,
    position_variance_quadrature,
)

__version__ = "0.1.0"

__all__ = [
    "fit_cooling_rate",
    "observed_turning_time",
    "occupancy_envelope",
    "MathieuSolution",
    "TruncatedFloquet",
    "amplitude_ratio_estimate",
    "analytic_trajectory",
    "characteristic_exponent",
    "coefficients_from_initial",
    "optimal_phase",
    "turning_time",
    "turning_time_estimate",
    "Drive",
    "EnsembleStats",
    "OscillatorParams",
    "QuadratureState",
    "TrajectoryRecord",
    "occupancy_of",
    "sample_thermal_state",
    "wrap_phase",
    "PhaseSchedule",
    "SimConfig",
    "ensemble_run",
    "evolution_matrix",
    "reference_integrate",
    "simulate",
    "step",
    "time_ordered_product",
    "AdaptiveController",
    "FeedbackPlan",
    "HeatingDominatedWarning",
    "recommended_interval",
    "run_adaptive",
    "ModeSet",
    "MultimodeFeedback",
    "band_partition",
    "isolated_baseline",
    "simulate_multimode",
    "PoleError",
    "SpectralConfig",
    "final_occupancy_limit",
    "position_variance_closed",
    "position_variance_quadrature",
]
