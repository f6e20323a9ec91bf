"""Compiled inner loops for the single- and multimode integrators.

Step convention shared by every kernel: step k (0-based) advances the
state from t_k = k*dt to t_{k+1}; the modulation cosine is evaluated on
the absolute grid, never on a re-zeroed clock.

cos(2 Omega t + phi) is propagated as a unit phasor and re-evaluated
exactly every RESYNC steps. The single-mode and multimode kernels perform
the same floating-point operations in the same order, so a one-mode
multimode run is bit-identical to the single-mode run.
"""
import math

import numpy as np
from numba import njit

TRANSFER_MATRIX = 0
ROTATION_SPLITTING = 1
RESYNC = 256


@njit(cache=True, nogil=True)
def advance(q, p, k0, n_steps, dt, omega, gamma, gmod, phi, noise_amp, normals, integrator, stride, out_q, out_p, out_pos):
    """Advance (q, p) over ``n_steps`` steps starting at global step ``k0``.

    States at global steps that are multiples of ``stride`` (after the
    step) are written to out_q/out_p from index ``out_pos`` on. Returns
    (q, p, out_pos).
    """
    w = 2.0 * omega
    wr = math.cos(w * dt)
    wi = math.sin(w * dt)
    hdt = 0.5 * dt
    driven = gmod != 0.0
    use_noise = noise_amp != 0.0
    until = stride - (k0 % stride)
    cr = 0.0
    ci = 0.0
    if integrator == TRANSFER_MATRIX:
        odt = omega * dt
        damp = 1.0 - gamma * dt
        for i in range(n_steps):
            k = k0 + i
            f = 0.0
            if driven:
                if i % RESYNC == 0:
                    cr = math.cos(w * (k * dt) + phi)
                    ci = math.sin(w * (k * dt) + phi)
                else:
                    cr, ci = cr * wr - ci * wi, cr * wi + ci * wr
                f = 2.0 * gmod * cr
            q_new = q + odt * p
            p = (f * dt - odt) * q + damp * p
            q = q_new
            if use_noise:
                p += noise_amp * normals[i]
            until -= 1
            if until == 0:
                out_q[out_pos] = q
                out_p[out_pos] = p
                out_pos += 1
                until = stride
    else:
        c = math.cos(omega * dt)
        s = math.sin(omega * dt)
        damp = math.exp(-gamma * dt)
        f = 0.0
        if driven:
            cr = math.cos(w * (k0 * dt) + phi)
            ci = math.sin(w * (k0 * dt) + phi)
            f = 2.0 * gmod * cr
        for i in range(n_steps):
            k = k0 + i
            p = p + hdt * f * q
            q_new = c * q + s * p
            p = (c * p - s * q) * damp
            q = q_new
            if driven:
                if (i + 1) % RESYNC == 0:
                    cr = math.cos(w * ((k + 1) * dt) + phi)
                    ci = math.sin(w * ((k + 1) * dt) + phi)
                else:
                    cr, ci = cr * wr - ci * wi, cr * wi + ci * wr
                f = 2.0 * gmod * cr
                p = p + hdt * f * q
            if use_noise:
                p += noise_amp * normals[i]
            until -= 1
            if until == 0:
                out_q[out_pos] = q
                out_p[out_pos] = p
                out_pos += 1
                until = stride
    return q, p, out_pos


@njit(cache=True, nogil=True)
def advance_multi(q, p, k0, n_steps, dt, omega, gamma, noise_amp, drive_gmod, drive_omega, drive_phi, coupling, normals, integrator, stride, out_q, out_p, out_pos):
    """Multimode analogue of :func:`advance`.

    ``q``/``p`` are modified in place. Mode j feels the force
    sum_d coupling[j, d] * 2 Gamma_d cos(2 Omega_d t + phi_d) * q_j, where
    ``coupling`` is all ones for a shared actuator and selects only the
    mode's own term for private drives. ``normals`` has shape
    (n_steps, n_modes). Returns the new ``out_pos``.
    """
    n_modes = q.shape[0]
    n_drive = drive_gmod.shape[0]
    hdt = 0.5 * dt
    wr = np.empty(n_drive)
    wi = np.empty(n_drive)
    cr = np.empty(n_drive)
    ci = np.empty(n_drive)
    for d in range(n_drive):
        wr[d] = math.cos(2.0 * drive_omega[d] * dt)
        wi[d] = math.sin(2.0 * drive_omega[d] * dt)
    force = np.zeros(n_modes)
    until = stride - (k0 % stride)
    c = np.empty(n_modes)
    s = np.empty(n_modes)
    damp = np.empty(n_modes)
    for j in range(n_modes):
        if integrator == TRANSFER_MATRIX:
            damp[j] = 1.0 - gamma[j] * dt
        else:
            c[j] = math.cos(omega[j] * dt)
            s[j] = math.sin(omega[j] * dt)
            damp[j] = math.exp(-gamma[j] * dt)

    # drive phasors and forces are written out inline: calls into separately
    # compiled helpers made the bits depend on whether the cache was warm
    if integrator == ROTATION_SPLITTING:
        for d in range(n_drive):
            cr[d] = math.cos(2.0 * drive_omega[d] * (k0 * dt) + drive_phi[d])
            ci[d] = math.sin(2.0 * drive_omega[d] * (k0 * dt) + drive_phi[d])
        for j in range(n_modes):
            acc = 0.0
            for d in range(n_drive):
                if coupling[j, d] != 0.0 and drive_gmod[d] != 0.0:
                    acc += 2.0 * drive_gmod[d] * cr[d]
            force[j] = acc

    for i in range(n_steps):
        k = k0 + i
        if integrator == TRANSFER_MATRIX:
            if i % RESYNC == 0:
                for d in range(n_drive):
                    cr[d] = math.cos(2.0 * drive_omega[d] * (k * dt) + drive_phi[d])
                    ci[d] = math.sin(2.0 * drive_omega[d] * (k * dt) + drive_phi[d])
            else:
                for d in range(n_drive):
                    a = cr[d] * wr[d] - ci[d] * wi[d]
                    ci[d] = cr[d] * wi[d] + ci[d] * wr[d]
                    cr[d] = a
            for j in range(n_modes):
                acc = 0.0
                for d in range(n_drive):
                    if coupling[j, d] != 0.0 and drive_gmod[d] != 0.0:
                        acc += 2.0 * drive_gmod[d] * cr[d]
                force[j] = acc
            for j in range(n_modes):
                odt = omega[j] * dt
                q_new = q[j] + odt * p[j]
                p[j] = (force[j] * dt - odt) * q[j] + damp[j] * p[j]
                q[j] = q_new
        else:
            for j in range(n_modes):
                pj = p[j] + hdt * force[j] * q[j]
                q_new = c[j] * q[j] + s[j] * pj
                p[j] = (c[j] * pj - s[j] * q[j]) * damp[j]
                q[j] = q_new
            if (i + 1) % RESYNC == 0:
                for d in range(n_drive):
                    cr[d] = math.cos(2.0 * drive_omega[d] * ((k + 1) * dt) + drive_phi[d])
                    ci[d] = math.sin(2.0 * drive_omega[d] * ((k + 1) * dt) + drive_phi[d])
            else:
                for d in range(n_drive):
                    a = cr[d] * wr[d] - ci[d] * wi[d]
                    ci[d] = cr[d] * wi[d] + ci[d] * wr[d]
                    cr[d] = a
            for j in range(n_modes):
                acc = 0.0
                for d in range(n_drive):
                    if coupling[j, d] != 0.0 and drive_gmod[d] != 0.0:
                        acc += 2.0 * drive_gmod[d] * cr[d]
                force[j] = acc
            for j in range(n_modes):
                if force[j] != 0.0:
                    p[j] = p[j] + hdt * force[j] * q[j]
        for j in range(n_modes):
            if noise_amp[j] != 0.0:
                p[j] += noise_amp[j] * normals[i, j]
        until -= 1
        if until == 0:
            for j in range(n_modes):
                out_q[out_pos, j] = q[j]
                out_p[out_pos, j] = p[j]
            out_pos += 1
            until = stride
    return out_pos
