"""Quantum limits of parametric cooling from the near-resonance noise spectrum.

The position variance follows from integrating the spectrum of q over the
two sidebands omega = +-Omega + Delta. With the modified susceptibility

    chibar(Delta) = 1 / (4 Delta^2 + Gamma^2 - gamma^2 + 4 i gamma Delta)

the integrand is a ratio of polynomials in Delta whose denominator factors
as (4 Delta^2 + (Gamma - gamma)^2)(4 Delta^2 + (Gamma + gamma)^2), so the
variance has a closed form on either side of Gamma = gamma and a pole at
Gamma = gamma. Frequencies and rates are in units of Omega.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .core import OscillatorParams

# relative distance from the Gamma = gamma pole below which no value is returned
POLE_GUARD = 1e-6
# |Delta| <= DELTA_MAX * Omega for the sideband expansion
DELTA_MAX = 0.1


class PoleError(ValueError):
    """Gamma sits on the Gamma = gamma pole of the sideband expansion."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


@dataclass(frozen=True)
class SpectralConfig:
    gamma: float
    gamma_mod: float
    phi: float = 0.5 * math.pi
    n_th: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0.0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not self.gamma_mod >= 0.0:
            raise ValueError(f"gamma_mod must be >= 0, got {self.gamma_mod}")
        if not self.n_th >= 0.0:
            raise ValueError(f"n_th must be >= 0, got {self.n_th}")

    def check_pole(self):
        if abs(self.gamma_mod - self.gamma) < POLE_GUARD * self.gamma:
            raise PoleError(
                f"Gamma={self.gamma_mod} is within {POLE_GUARD:g} (relative) of gamma={self.gamma}: "
                "the Gamma = gamma pole of the sideband approximation"
            )

    def sidebands(self) -> tuple[float, float]:
        """Noise strengths (S(-Omega), S(+Omega)) including the Gamma bath at zero temperature."""
        return 2.0 * self.gamma * self.n_th, 2.0 * self.gamma * (self.n_th + 1.0) + 2.0 * self.gamma_mod


def thermal_spectrum(omega: float, temperature_ratio: float, params: OscillatorParams) -> float:
    """S_th(omega) = gamma omega / Omega * {coth[x omega / (2 Omega)] + 1}, x = hbar Omega / k_B T.

    ``temperature_ratio`` may be ``inf`` (zero temperature).
    """
    if omega == 0.0:
        raise ValueError("S_th is singular at omega = 0")
    arg = 0.5 * temperature_ratio * omega / params.omega
    if math.isinf(arg):
        coth = math.copysign(1.0, arg)
    elif abs(arg) > 350.0:
        coth = math.copysign(1.0, arg)
    else:
        coth = 1.0 / math.tanh(arg)
    return params.gamma * omega / params.omega * (coth + 1.0)


def sideband_rates(temperature_ratio: float, params: OscillatorParams) -> tuple[float, float]:
    """(gamma, n_th) recovered from S_th(+-Omega).

    S(+Omega) + S(-Omega) = 2 gamma coth(x/2) = 2 gamma (2 n_th + 1), so the
    occupancy is half of (sum / 2 gamma - 1); it vanishes at zero temperature.
    """
    s_plus = thermal_spectrum(params.omega, temperature_ratio, params)
    s_minus = thermal_spectrum(-params.omega, temperature_ratio, params)
    gamma = 0.5 * (s_plus - s_minus)
    return gamma, 0.5 * ((s_plus + s_minus) / (2.0 * params.gamma) - 1.0)


def susceptibility(omega, params: OscillatorParams):
    """chi(omega) = Omega / (Omega^2 - omega^2 - i gamma omega)."""
    omega = np.asarray(omega, dtype=float)
    W = params.omega
    return W / ((W * W - omega * omega) - 1j * params.gamma * omega)


def modified_susceptibility(delta, cfg: SpectralConfig):
    """chibar(Delta) for detunings |Delta| <= 0.1 Omega."""
    delta = np.asarray(delta, dtype=float)
    if np.any(np.abs(delta) > DELTA_MAX):
        raise ValueError(f"|delta| must be <= {DELTA_MAX} (sideband expansion), got max {np.max(np.abs(delta))}")
    g, G = cfg.gamma, cfg.gamma_mod
    return 1.0 / (4.0 * delta * delta + G * G - g * g + 4j * g * delta)


def _chibar_abs2(delta, g, G):
    # |4D^2 + G^2 - g^2 + 4 i g D|^2 in the factored form, free of cancellation near G ~ g
    u2 = 4.0 * delta * delta
    return 1.0 / ((u2 + (G - g) ** 2) * (u2 + (G + g) ** 2))


def spectrum_integrand(delta, cfg: SpectralConfig):
    """Integrand of the variance integral (before the 1/(2 pi) prefactor)."""
    g, G, phi, n = cfg.gamma, cfg.gamma_mod, cfg.phi, cfg.n_th
    s, c = math.sin(phi), math.cos(phi)
    d2 = 4.0 * delta * delta
    thermal = 4.0 * g * (2.0 * g * G * s + d2 + G * G + g * g) * (n + 0.5)
    cooling = 2.0 * G * (4.0 * delta * (g + G) * c + 2.0 * g * G * s + d2 + G * G + g * g)
    return _chibar_abs2(delta, g, G) * (thermal + cooling)


def position_variance_closed(cfg: SpectralConfig) -> float:
    """<q^2> from the closed-form sideband result.

    Gamma > gamma:
        gamma (Gamma + gamma sin phi) / (Gamma^2 - gamma^2) (n_th + 1/2)
        + Gamma (Gamma + gamma sin phi) / (2 (Gamma^2 - gamma^2))
    Gamma < gamma: the same with Gamma and gamma exchanged inside the
    brackets and the denominators. Gamma = 0 gives n_th + 1/2.
    """
    g, G, n = cfg.gamma, cfg.gamma_mod, cfg.n_th
    if G == 0.0:
        return n + 0.5
    cfg.check_pole()
    s = math.sin(cfg.phi)
    if G > g:
        num = G + g * s
        den = G * G - g * g
    else:
        num = g + G * s
        den = g * g - G * G
    return g * num / den * (n + 0.5) + G * num / (2.0 * den)


def position_variance_quadrature(cfg: SpectralConfig, rtol: float = 1e-11) -> float:
    """<q^2> by adaptive quadrature of the sideband spectrum over the whole Delta axis.

    Uses Delta = (w/2) tan(theta) with w = sqrt(|Gamma^2 - gamma^2|) (or
    gamma at Gamma = 0) so the 1/Delta^2 tails map onto a bounded integrand
    on (-pi/2, pi/2). Both the odd cos(phi) term and the even terms are
    integrated as written.
    """
    g, G = cfg.gamma, cfg.gamma_mod
    if G != 0.0:
        cfg.check_pole()
    w = math.sqrt(abs(G * G - g * g)) if G != 0.0 else g

    def f(theta):
        delta = 0.5 * w * math.tan(theta)
        jac = 0.5 * w / math.cos(theta) ** 2
        return spectrum_integrand(delta, cfg) * jac

    # integrand is bounded at +-pi/2; split at 0 so the odd part cancels pairwise
    edge = 0.5 * math.pi
    total = 0.0
    err = 0.0
    for a, b in ((-edge, 0.0), (0.0, edge)):
        val, e = integrate.quad(f, a, b, epsabs=0.0, epsrel=rtol, limit=500)
        total += val
        err += e
    result = total / (2.0 * math.pi)
    scale = abs(total) if total != 0.0 else 1.0
    if not np.isfinite(result) or err > max(1e3 * rtol, 1e-9) * scale:
        raise QuadratureError(f"quadrature did not converge: estimate {result}, error {err / (2 * math.pi):.3g}")
    return result


def final_occupancy_limit(cfg: SpectralConfig) -> float:
    """n_final = (gamma/Gamma) (n_th + 1/2), valid for Gamma >> gamma.

    Below Gamma = 10 gamma a warning is issued and the full closed form
    minus 1/2 is returned instead.
    """
    if cfg.gamma_mod == 0.0:
        raise ValueError("Gamma = 0: no cooling, no limit")
    if cfg.gamma_mod < 10.0 * cfg.gamma:
        warnings.warn(
            f"Gamma/gamma = {cfg.gamma_mod / cfg.gamma:.3g} < 10; returning the full closed form minus 1/2",
            stacklevel=2,
        )
        return position_variance_closed(cfg) - 0.5
    return cfg.gamma / cfg.gamma_mod * (cfg.n_th + 0.5)
