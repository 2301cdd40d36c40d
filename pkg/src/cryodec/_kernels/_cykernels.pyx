# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel implementations.

Bit-identical twin of ``_pykernels``: identical arithmetic order (built with
fp-contract off) and identical consumption of the numpy random stream via the
BitGenerator C interface.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, fabs

import numpy as np

from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal

BACKEND = "compiled"


cdef bitgen_t *_bitgen(object rng) except NULL:
    # rng is a numpy Generator; its BitGenerator exposes the C interface
    return <bitgen_t *> PyCapsule_GetPointer(rng.bit_generator.capsule, "BitGenerator")


cdef inline double _sigmoid(double i, double v_max, double i_mid,
                            double i_scale, double i_offset) noexcept nogil:
    cdef double x = (i - i_mid - i_offset) / i_scale
    cdef double e
    if x >= 0.0:
        return v_max / (1.0 + exp(-x))
    e = exp(x)
    return v_max * e / (1.0 + e)


def sigmoid_scalar(double i, double v_max, double i_mid, double i_scale, double i_offset):
    return _sigmoid(i, v_max, i_mid, i_scale, i_offset)


def pulse_train(double g, Py_ssize_t n, bint potentiate, bint effective,
                double g_min, double g_max, double a_pot, double a_dep,
                double sigma_c2c, object rng):
    cdef double[::1] traj = np.empty(n, dtype=np.float64)
    cdef bitgen_t *bg
    cdef double eta
    cdef Py_ssize_t k
    if not effective:
        for k in range(n):
            traj[k] = g
        return g, np.asarray(traj)
    bg = _bitgen(rng)
    with rng.bit_generator.lock:
        for k in range(n):
            eta = sigma_c2c * random_standard_normal(bg)
            if potentiate:
                g = g + a_pot * (g_max - g) * (1.0 + eta)
            else:
                g = g - a_dep * (g - g_min) * (1.0 + eta)
            if g < g_min:
                g = g_min
            elif g > g_max:
                g = g_max
            traj[k] = g
    return g, np.asarray(traj)


def program_target(double g, double g_target, double rel_tol, long max_pulses,
                   double g_min, double g_max, double a_pot, double a_dep,
                   double sigma_c2c, double sigma_read, object rng):
    cdef bitgen_t *bg = _bitgen(rng)
    cdef double read, eta
    cdef long pulses = 0
    cdef bint converged = False
    with rng.bit_generator.lock:
        while True:
            read = g * (1.0 + sigma_read * random_standard_normal(bg))
            if fabs(read - g_target) <= rel_tol * g_target:
                converged = True
                break
            if pulses >= max_pulses:
                break
            eta = sigma_c2c * random_standard_normal(bg)
            if read < g_target:
                g = g + a_pot * (g_max - g) * (1.0 + eta)
            else:
                g = g - a_dep * (g - g_min) * (1.0 + eta)
            if g < g_min:
                g = g_min
            elif g > g_max:
                g = g_max
            pulses += 1
    return g, pulses, converged


cdef void _vmm(const double[:, ::1] g, const double[::1] drive, double[::1] out) noexcept nogil:
    cdef Py_ssize_t n_in = g.shape[0]
    cdef Py_ssize_t n_out = g.shape[1]
    cdef Py_ssize_t i, j
    for j in range(n_out):
        out[j] = 0.0
    for i in range(n_in):
        for j in range(n_out):
            out[j] = out[j] + g[i, j] * drive[i]


def vmm(const double[:, ::1] g, const double[::1] drive):
    cdef double[::1] out = np.empty(g.shape[1], dtype=np.float64)
    _vmm(g, drive, out)
    return np.asarray(out)


def run_rounds(const long[:, ::1] bits,
               const double[:, ::1] gp_in, const double[:, ::1] gm_in,
               const double[:, ::1] gp_rec, const double[:, ::1] gm_rec,
               const double[:, ::1] gp_out, const double[:, ::1] gm_out,
               double drive_high, double v_max, double i_mid, double i_scale,
               double i_offset, double r_f, double v_ref, double v_th,
               bint recurrence, double droop_rate, double round_period):
    cdef Py_ssize_t n_rounds = bits.shape[0]
    cdef Py_ssize_t n_in = bits.shape[1]
    cdef Py_ssize_t n_hidden = gp_in.shape[1]
    cdef Py_ssize_t n_out = gp_out.shape[1]

    i_input_arr = np.empty((n_rounds, n_hidden), dtype=np.float64)
    i_rec_in_arr = np.empty((n_rounds, n_hidden), dtype=np.float64)
    v_sig_arr = np.empty((n_rounds, n_hidden), dtype=np.float64)
    v_buf_arr = np.empty((n_rounds, n_hidden), dtype=np.float64)
    i_latch_arr = np.empty((n_rounds, n_hidden), dtype=np.float64)
    v_tia_arr = np.empty((n_rounds, n_out), dtype=np.float64)
    out_bits_arr = np.empty((n_rounds, n_out), dtype=np.int64)

    cdef double[:, ::1] i_input = i_input_arr
    cdef double[:, ::1] i_rec_in = i_rec_in_arr
    cdef double[:, ::1] v_sig = v_sig_arr
    cdef double[:, ::1] v_buf = v_buf_arr
    cdef double[:, ::1] i_latch = i_latch_arr
    cdef double[:, ::1] v_tia = v_tia_arr
    cdef long[:, ::1] out_bits = out_bits_arr

    cdef double[::1] mem_stored = np.zeros(n_hidden, dtype=np.float64)
    cdef double[::1] drives = np.empty(n_in + 1, dtype=np.float64)
    cdef double[::1] hidden = np.empty(n_hidden + 1, dtype=np.float64)
    cdef double[::1] ip = np.empty(n_hidden, dtype=np.float64)
    cdef double[::1] im = np.empty(n_hidden, dtype=np.float64)
    cdef double[::1] rp = np.empty(n_hidden, dtype=np.float64)
    cdef double[::1] rm = np.empty(n_hidden, dtype=np.float64)
    cdef double[::1] op = np.empty(n_out, dtype=np.float64)
    cdef double[::1] om = np.empty(n_out, dtype=np.float64)

    cdef bint mem_latched = False
    cdef double mem_time = 0.0
    cdef double clock = 0.0
    cdef double i_in_j, rec_j, v, vb, latch_j, i_o
    cdef Py_ssize_t r, i, j, m

    with nogil:
        for r in range(n_rounds):
            for i in range(n_in):
                drives[i] = drive_high * bits[r, i]
            drives[n_in] = drive_high

            _vmm(gp_in, drives, ip)
            _vmm(gm_in, drives, im)
            for j in range(n_hidden):
                i_in_j = ip[j] - im[j]
                i_input[r, j] = i_in_j
                if mem_latched:
                    rec_j = mem_stored[j] * exp(-droop_rate * (clock - mem_time))
                else:
                    rec_j = 0.0
                i_rec_in[r, j] = rec_j
                v = _sigmoid(i_in_j + rec_j, v_max, i_mid, i_scale, i_offset)
                v_sig[r, j] = v
                vb = 1.2 + v / 3.0
                v_buf[r, j] = vb
                hidden[j] = vb - 1.2
            hidden[n_hidden] = drive_high

            if recurrence:
                _vmm(gp_rec, hidden, rp)
                _vmm(gm_rec, hidden, rm)
                for j in range(n_hidden):
                    latch_j = rp[j] - rm[j]
                    i_latch[r, j] = latch_j
                    mem_stored[j] = latch_j
                mem_latched = True
                mem_time = clock
            else:
                for j in range(n_hidden):
                    i_latch[r, j] = 0.0

            _vmm(gp_out, hidden, op)
            _vmm(gm_out, hidden, om)
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

    return (i_input_arr, i_rec_in_arr, v_sig_arr, v_buf_arr,
            i_latch_arr, v_tia_arr, out_bits_arr)
