"""Closed-form solution of the weakly modulated (Mathieu) oscillator.

Equation of motion, with ``p = q' / omega``::

    q'' + gamma q' + [omega**2 - 2 Gamma omega cos(2 omega t + phi)] q = 0

For b = Gamma/omega << 1 the solution splits into an extra-damped and an
antidamped component::

    q(t) = A- exp(-(gamma+Gamma) t/2) cos(omega t + phi')
         + A+ exp(-(gamma-Gamma) t/2) sin(omega t + phi'),   phi' = phi/2 + pi/4

This (cos, sin, +pi/4) assignment is the one that reproduces a direct
numerical integration of the ODE (see ``tests/test_convention.py``). The
(sin, cos, -pi/4) form is the same family with A- -> -A-.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import Drive, OscillatorParams, wrap_phase


@dataclass(frozen=True)
class TruncatedFloquet:
    """Truncated Floquet solution of q'' + (1 - 2b cos 2t) q = 0.

    The solution is exp(i beta t) * sum_n C_{2n} exp(2 i n t) with
    beta = -1 + x; ``harmonics[k]`` holds C_{2n} for n = k - N.
    """

    truncation_order: int
    b: float
    exponent_x: complex
    harmonics: np.ndarray

    @property
    def beta(self) -> complex:
        return -1.0 + self.exponent_x

    def coefficient(self, n: int) -> complex:
        N = self.truncation_order
        if abs(n) > N:
            return 0.0
        return complex(self.harmonics[n + N])

    def recursion_residual(self) -> float:
        """Max residual of C_{2n+2} - D_{2n} C_{2n} + C_{2n-2} = 0, scaled by b.

        Multiplying through by b keeps the check finite at b -> 0.
        """
        N = self.truncation_order
        worst = 0.0
        for n in range(-N, N + 1):
            c = self.coefficient(n)
            r = self.b * (self.coefficient(n + 1) + self.coefficient(n - 1)) - (1.0 - (2 * n + self.beta) ** 2) * c
            worst = max(worst, abs(r))
        return worst


def characteristic_exponent(b: float, truncation_order: int = 1) -> TruncatedFloquet:
    """Solve the truncated three-term harmonic recursion for x and C_{2n}.

    Truncation keeps C_{2n} for |n| <= ``truncation_order``. The root with
    Im(x) >= 0 (the decaying solution for b > 0) is returned, normalized to
    C_0 = 1.
    """
    if not abs(b) < 0.5:
        raise ValueError(f"|b| < 0.5 required, got b={b}")
    N = int(truncation_order)
    if N < 1:
        raise ValueError("truncation_order must be >= 1")
    size = 2 * N + 1
    ns = np.arange(-N, N + 1, dtype=float)
    if b == 0.0:
        c = np.zeros(size, dtype=complex)
        c[N] = 1.0
        return TruncatedFloquet(N, 0.0, 0j, c)

    # (1 - (2n + beta)^2) C_2n - b (C_2n+2 + C_2n-2) = 0 is quadratic in beta:
    # (K0 + beta K1 + beta^2 K2) C = 0. Companion linearization -> generalized eigenproblem.
    off = np.eye(size, k=1) + np.eye(size, k=-1)
    K0 = np.diag(1.0 - 4.0 * ns**2) - b * off
    K1 = np.diag(-4.0 * ns)
    K2 = -np.eye(size)
    Z = np.zeros((size, size))
    I = np.eye(size)
    A = np.block([[Z, I], [-K0, -K1]])
    B = np.block([[I, Z], [Z, K2]])
    betas, vecs = scipy.linalg.eig(A, B)

    best = None
    for k, beta in enumerate(betas):
        if not np.isfinite(beta):
            continue
        x = beta + 1.0
        if abs(x) >= 1.0 or x.imag < 0.0:
            continue
        c = vecs[:size, k]
        if abs(c[N]) < 1e-300:
            continue
        if best is None or abs(x) < abs(best[0]):
            best = (complex(x), c / c[N])
    if best is None:
        raise ValueError(f"no characteristic root with |x| < 1 for b={b}; outside perturbative validity")
    x, c = best
    return TruncatedFloquet(N, float(b), x, np.asarray(c, dtype=complex))


@dataclass(frozen=True)
class MathieuSolution:
    """Two-component closed form fixed by one set of initial conditions.

    Rates are in units of omega; ``phi`` is the modulation phase the
    coefficients were solved for.
    """

    q0: float
    p0: float
    phi: float
    b: float
    gamma: float
    a_minus: float
    a_plus: float
    phi_prime: float

    @property
    def rates(self) -> tuple[float, float]:
        """Envelope rates ((gamma+Gamma)/2, (gamma-Gamma)/2) in units of omega."""
        return 0.5 * (self.gamma + self.b), 0.5 * (self.gamma - self.b)

    @property
    def ratio(self) -> float:
        """|A-/A+|; infinite when the antidamped component is exactly nulled."""
        if self.a_plus == 0.0:
            return math.inf
        return abs(self.a_minus / self.a_plus)


def _ic_matrix(phi_prime: float, b: float, gamma: float) -> np.ndarray:
    c, s = math.cos(phi_prime), math.sin(phi_prime)
    return np.array(
        [
            [c, s],
            [-s - 0.5 * (b + gamma) * c, c + 0.5 * (b - gamma) * s],
        ]
    )


def coefficients_from_initial(q0: float, p0: float, phi: float, b: float, gamma: float = 0.0) -> MathieuSolution:
    """Solve the 2x2 initial-condition system for (A-, A+).

    ``gamma`` is the intrinsic damping in units of omega. At gamma = 0 the
    system is exactly the b/2-corrected pair

        A- cos phi' + A+ sin phi' = q0
        -A- sin phi' + A+ cos phi' - (b/2) A- cos phi' + (b/2) A+ sin phi' = p0
    """
    if q0 == 0.0 and p0 == 0.0:
        raise ValueError("initial state (0, 0) has no phase")
    phi_prime = 0.5 * phi + 0.25 * math.pi
    M = _ic_matrix(phi_prime, b, gamma)
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > 1e12:
        raise np.linalg.LinAlgError(f"singular initial-condition system at phi={phi} (condition number {cond:.3g})")
    a_minus, a_plus = np.linalg.solve(M, [q0, p0])
    return MathieuSolution(
        q0=float(q0),
        p0=float(p0),
        phi=float(phi),
        b=float(b),
        gamma=float(gamma),
        a_minus=float(a_minus),
        a_plus=float(a_plus),
        phi_prime=phi_prime,
    )


def analytic_trajectory(sol: MathieuSolution, params: OscillatorParams, drive: Drive, t, with_momentum: bool = False, harmonics: bool = False):
    """Evaluate the closed form at time(s) ``t`` (units of 1/omega when omega = 1).

    Envelope rates come from ``params.gamma`` and ``drive.gamma_mod``; the
    coefficients from ``sol``. Returns q, or (q, p) with p = q'/omega.

    With ``harmonics=True`` the off-resonant 3 omega response of each
    component, -(b/8) [A- e(t) cos(3 omega t + phi + phi') + A+ e(t) sin(...)],
    is added. This lowers the ODE residual from O(b) to O(b^2) but means
    q(0) and p(0) no longer reproduce the initial state exactly.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("t must be >= 0")
    omega = params.omega
    r_minus = 0.5 * (params.gamma + drive.gamma_mod)
    r_plus = 0.5 * (params.gamma - drive.gamma_mod)
    arg = omega * t + sol.phi_prime
    e_minus = sol.a_minus * np.exp(-r_minus * t)
    e_plus = sol.a_plus * np.exp(-r_plus * t)
    c, s = np.cos(arg), np.sin(arg)
    q = e_minus * c + e_plus * s
    if harmonics:
        k = -drive.b / 8.0
        arg3 = 3.0 * omega * t + drive.phi + sol.phi_prime
        c3, s3 = np.cos(arg3), np.sin(arg3)
        q = q + k * (e_minus * c3 + e_plus * s3)
    if not with_momentum:
        return q
    p = (e_minus * (-omega * s - r_minus * c) + e_plus * (omega * c - r_plus * s)) / omega
    if harmonics:
        p = p + k * (e_minus * (-3.0 * omega * s3 - r_minus * c3) + e_plus * (3.0 * omega * c3 - r_plus * s3)) / omega
    return q, p


def optimal_phase(q0: float, p0: float, b: float) -> float:
    """Modulation phase that nulls the antidamped component of (q0, p0).

    pi/2 + 2 atan[1 / (p0/q0 + b/2)], written with a two-argument arctangent
    so that q0 = 0 or p0 = 0 stay finite. At b = 0 this is
    pi/2 + 2 atan(q0/p0). Result in [0, 2 pi).
    """
    if q0 == 0.0 and p0 == 0.0:
        raise ValueError("optimal phase undefined at q0 = p0 = 0")
    return wrap_phase(0.5 * math.pi + 2.0 * math.atan2(2.0 * q0, 2.0 * p0 + b * q0))


def amplitude_ratio_estimate(q0: float, p0: float, b: float) -> float:
    """Rough A-/A+ ~ 2 (q0^2 - p0^2) / (b q0^2) for the b = 0 phase choice.

    Returns 0 when q0 = +-p0, where the estimate carries no information.
    """
    if q0 == 0.0:
        raise ValueError("estimate undefined for q0 = 0")
    if b == 0.0:
        raise ValueError("estimate undefined for b = 0")
    return 2.0 * (q0 * q0 - p0 * p0) / (b * q0 * q0)


def turning_time(sol: MathieuSolution, drive: Drive) -> float:
    """tau = ln(|A-|/|A+|) / Gamma, when the antidamped part catches up.

    Infinite if A+ vanishes exactly; zero if the state heats from the start.
    """
    if drive.gamma_mod <= 0.0:
        raise ValueError("turning time needs Gamma > 0")
    am, ap = abs(sol.a_minus), abs(sol.a_plus)
    if ap == 0.0:
        return math.inf
    if am <= ap:
        return 0.0
    return math.log(am / ap) / drive.gamma_mod


def turning_time_estimate(q0: float, p0: float, drive: Drive, gamma: float = 0.0) -> float:
    """Turning time for the b = 0 phase choice pi/2 + 2 atan(q0/p0).

    The b-corrected phase nulls A+ exactly within the two-component model,
    which makes its tau infinite; the uncorrected choice leaves the O(b)
    residual that sets a realistic horizon.
    """
    phi0 = optimal_phase(q0, p0, 0.0)
    sol = coefficients_from_initial(q0, p0, phi0, drive.b, gamma)
    return turning_time(sol, drive)
