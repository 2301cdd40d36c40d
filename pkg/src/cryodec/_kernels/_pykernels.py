"""Pure-Python kernel implementations (fallback backend).

The compiled backend in ``_cykernels`` must stay bit-identical to this module:
same arithmetic expressions in the same order, and the same number of draws
from the numpy Generator at the same points. Scalar transcendentals go through
``math`` (libm), which is the same code path the C kernels use.

Random-draw protocol (shared by both backends):
  * one standard normal per effective programming pulse,
  * one standard normal per verify read,
  * write-verify alternates read, tolerance check, corrective pulse.
"""

import math

import numpy as np

BACKEND = "python"


def sigmoid_scalar(i, v_max, i_mid, i_scale, i_offset):
    """Overflow-safe logistic, v_max / (1 + exp(-(i - i_mid - i_offset)/i_scale))."""
    x = (i - i_mid - i_offset) / i_scale
    if x >= 0.0:
        return v_max / (1.0 + math.exp(-x))
    e = math.exp(x)
    return v_max * e / (1.0 + e)


def pulse_train(g, n, potentiate, effective, g_min, g_max, a_pot, a_dep, sigma_c2c, rng):
    """Apply n identical pulses; returns (final g, conductance after each pulse)."""
    traj = np.empty(n, dtype=np.float64)
    if not effective:
        traj[:] = g
        return g, traj
    for k in range(n):
        eta = sigma_c2c * rng.standard_normal()
        if potentiate:
            g = g + a_pot * (g_max - g) * (1.0 + eta)
        else:
            g = g - a_dep * (g - g_min) * (1.0 + eta)
        if g < g_min:
            g = g_min
        elif g > g_max:
            g = g_max
        traj[k] = g
    return g, traj


def program_target(g, g_target, rel_tol, max_pulses, g_min, g_max,
                   a_pot, a_dep, sigma_c2c, sigma_read, rng):
    """Write-verify loop; returns (final g, pulses used, converged flag)."""
    pulses = 0
    while True:
        read = g * (1.0 + sigma_read * rng.standard_normal())
        if abs(read - g_target) <= rel_tol * g_target:
            return g, pulses, True
        if pulses >= max_pulses:
            return g, pulses, False
        eta = sigma_c2c * rng.standard_normal()
        if read < g_target:
            g = g + a_pot * (g_max - g) * (1.0 + eta)
        else:
            g = g - a_dep * (g - g_min) * (1.0 + eta)
        if g < g_min:
            g = g_min
        elif g > g_max:
            g = g_max
        pulses += 1


def vmm(g, drive):
    """Column currents of one conductance matrix: out[j] = sum_i g[i,j]*drive[i].

    Accumulation runs in row order i = 0..n_in-1; the compiled kernel uses the
    identical order, so both backends round identically.
    """
    n_in, n_out = g.shape
    out = np.zeros(n_out, dtype=np.float64)
    for i in range(n_in):
        out += g[i] * drive[i]
    return out


def run_rounds(bits, gp_in, gm_in, gp_rec, gm_rec, gp_out, gm_out,
               drive_high, v_max, i_mid, i_scale, i_offset,
               r_f, v_ref, v_th, recurrence, droop_rate, round_period):
    """Full multi-round decoder pass over a bit sequence (read noise off).

    Returns (i_input, i_rec_in, v_sig, v_buf, i_latch, v_tia, out_bits) with
    one row per round.
    """
    n_rounds, n_in = bits.shape
    n_hidden = gp_in.shape[1]
    n_out = gp_out.shape[1]

    i_input = np.empty((n_rounds, n_hidden), dtype=np.float64)
    i_rec_in = np.empty((n_rounds, n_hidden), dtype=np.float64)
    v_sig = np.empty((n_rounds, n_hidden), dtype=np.float64)
    v_buf = np.empty((n_rounds, n_hidden), dtype=np.float64)
    i_latch = np.empty((n_rounds, n_hidden), dtype=np.float64)
    v_tia = np.empty((n_rounds, n_out), dtype=np.float64)
    out_bits = np.empty((n_rounds, n_out), dtype=np.int64)

    mem_stored = [0.0] * n_hidden
    mem_latched = False
    mem_time = 0.0
    clock = 0.0

    drives = np.empty(n_in + 1, dtype=np.float64)
    hidden = np.empty(n_hidden + 1, dtype=np.float64)

    for r in range(n_rounds):
        for i in range(n_in):
            drives[i] = drive_high * bits[r, i]
        drives[n_in] = drive_high

        ip = vmm(gp_in, drives)
        im = vmm(gm_in, drives)
        for j in range(n_hidden):
            i_in_j = ip[j] - im[j]
            i_input[r, j] = i_in_j
            if mem_latched:
                rec_j = mem_stored[j] * math.exp(-droop_rate * (clock - mem_time))
            else:
                rec_j = 0.0
            i_rec_in[r, j] = rec_j
            v = sigmoid_scalar(i_in_j + rec_j, v_max, i_mid, i_scale, i_offset)
            v_sig[r, j] = v
            vb = 1.2 + v / 3.0
            v_buf[r, j] = vb
            hidden[j] = vb - 1.2
        hidden[n_hidden] = drive_high

        if recurrence:
            rp = vmm(gp_rec, hidden)
            rm = vmm(gm_rec, hidden)
            for j in range(n_hidden):
                latch_j = rp[j] - rm[j]
                i_latch[r, j] = latch_j
                mem_stored[j] = latch_j
            mem_latched = True
            mem_time = clock
        else:
            for j in range(n_hidden):
                i_latch[r, j] = 0.0

        op = vmm(gp_out, hidden)
        om = vmm(gm_out, hidden)
        for m in range(n_out):
            i_o = op[m] - om[m]
            v = v_ref + i_o * r_f
            if v < 0.0:
                v = 0.0
            elif v > 3.3:
                v = 3.3
            v_tia[r, m] = v
            out_bits[r, m] = 1 if v > v_th else 0

        clock += round_period

    return i_input, i_rec_in, v_sig, v_buf, i_latch, v_tia, out_bits
