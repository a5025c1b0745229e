# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: fused LSTM gates, row softmax, AdamW update.

Contracts mirror kernels_py.py exactly.  Arrays may be float32 or float64;
gate math runs in the array's own precision.
"""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport exp, sqrt, tanh

cnp.import_array()

IS_COMPILED = True

ctypedef fused real:
    float
    double


cdef inline real _sig(real x) noexcept nogil:
    if x >= 0:
        return <real>(1.0 / (1.0 + exp(-x)))
    cdef double e = exp(x)
    return <real>(e / (1.0 + e))


def sigmoid(cnp.ndarray x):
    out = np.empty_like(x)
    _sigmoid_flat(x.reshape(-1), out.reshape(-1))
    return out


def _sigmoid_flat(real[::1] x, real[::1] out):
    cdef Py_ssize_t n = x.shape[0], k
    with nogil:
        for k in range(n):
            out[k] = _sig(x[k])


def softmax2d(real[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1], r, j
    out_arr = np.empty((n, m), dtype=np.asarray(x).dtype)
    cdef real[:, ::1] out = out_arr
    cdef double mx, s
    with nogil:
        for r in range(n):
            mx = x[r, 0]
            for j in range(1, m):
                if x[r, j] > mx:
                    mx = x[r, j]
            s = 0.0
            for j in range(m):
                out[r, j] = <real>exp(x[r, j] - mx)
                s += out[r, j]
            for j in range(m):
                out[r, j] = <real>(out[r, j] / s)
    return out_arr


def lstm_fwd(real[:, ::1] z, real[:, ::1] c_prev):
    cdef Py_ssize_t b = c_prev.shape[0], d = c_prev.shape[1], r, j
    dt = np.asarray(z).dtype
    h_arr = np.empty((b, d), dtype=dt)
    c_arr = np.empty((b, d), dtype=dt)
    g_arr = np.empty((b, 4 * d), dtype=dt)
    tc_arr = np.empty((b, d), dtype=dt)
    cdef real[:, ::1] h = h_arr, c = c_arr, gates = g_arr, tc = tc_arr
    cdef real iv, fv, gv, ov, cv
    with nogil:
        for r in range(b):
            for j in range(d):
                iv = _sig(z[r, j])
                fv = _sig(z[r, d + j])
                gv = <real>tanh(z[r, 2 * d + j])
                ov = _sig(z[r, 3 * d + j])
                cv = fv * c_prev[r, j] + iv * gv
                c[r, j] = cv
                tc[r, j] = <real>tanh(cv)
                h[r, j] = ov * tc[r, j]
                gates[r, j] = iv
                gates[r, d + j] = fv
                gates[r, 2 * d + j] = gv
                gates[r, 3 * d + j] = ov
    return h_arr, c_arr, g_arr, tc_arr


def lstm_bwd_h(real[:, ::1] gh, real[:, ::1] gates, real[:, ::1] tc):
    cdef Py_ssize_t b = tc.shape[0], d = tc.shape[1], r, j
    dt = np.asarray(tc).dtype
    dzo_arr = np.empty((b, d), dtype=dt)
    dc_arr = np.empty((b, d), dtype=dt)
    cdef real[:, ::1] dzo = dzo_arr, dc = dc_arr
    cdef real o
    with nogil:
        for r in range(b):
            for j in range(d):
                o = gates[r, 3 * d + j]
                dzo[r, j] = gh[r, j] * tc[r, j] * o * (<real>1.0 - o)
                dc[r, j] = gh[r, j] * o * (<real>1.0 - tc[r, j] * tc[r, j])
    return dzo_arr, dc_arr


def lstm_bwd_c(real[:, ::1] gc, real[:, ::1] gates, real[:, ::1] c_prev):
    cdef Py_ssize_t b = c_prev.shape[0], d = c_prev.shape[1], r, j
    dt = np.asarray(c_prev).dtype
    dz_arr = np.empty((b, 3 * d), dtype=dt)
    dcp_arr = np.empty((b, d), dtype=dt)
    cdef real[:, ::1] dz = dz_arr, dcp = dcp_arr
    cdef real i, f, g
    with nogil:
        for r in range(b):
            for j in range(d):
                i = gates[r, j]
                f = gates[r, d + j]
                g = gates[r, 2 * d + j]
                dz[r, j] = gc[r, j] * g * i * (<real>1.0 - i)
                dz[r, d + j] = gc[r, j] * c_prev[r, j] * f * (<real>1.0 - f)
                dz[r, 2 * d + j] = gc[r, j] * i * (<real>1.0 - g * g)
                dcp[r, j] = gc[r, j] * f
    return dz_arr, dcp_arr


def adamw_update(real[::1] p, real[::1] g, real[::1] m, real[::1] v,
                 long t, double lr, double beta1, double beta2,
                 double eps, double weight_decay):
    cdef Py_ssize_t n = p.shape[0], k
    cdef double bc1 = 1.0 - beta1 ** t
    cdef double bc2 = 1.0 - beta2 ** t
    cdef double mhat, vhat
    with nogil:
        for k in range(n):
            if weight_decay != 0.0:
                p[k] -= <real>(lr * weight_decay * p[k])
            m[k] = <real>(beta1 * m[k] + (1.0 - beta1) * g[k])
            v[k] = <real>(beta2 * v[k] + (1.0 - beta2) * g[k] * g[k])
            mhat = m[k] / bc1
            vhat = v[k] / bc2
            p[k] -= <real>(lr * mhat / (sqrt(vhat) + eps))
