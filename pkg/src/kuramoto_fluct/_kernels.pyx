# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot inner loops.

Mirrors `_kernels_py` exactly in random-number consumption (chunked draws
from the caller's generator); see that module for the cross-backend
determinism contract.
"""

import numpy as np

cimport cython
from libc.math cimport cos, sin, sqrt
from scipy.linalg.cython_blas cimport dgemv

BACKEND_NAME = "cython"
DEFAULT_CHUNK = 256


def em_run(double[::1] theta, double[::1] omega, double K, double dt,
           long n_steps, long stride, rng, long chunk=DEFAULT_CHUNK):
    """Euler-Maruyama loop; see `_kernels_py.em_run`."""
    cdef long N = theta.shape[0]
    cdef long n_rec = n_steps // stride
    recs_arr = np.empty((n_rec, 2))
    cdef double[:, ::1] recs = recs_arr
    cos_arr = np.empty(N)
    sin_arr = np.empty(N)
    cdef double[::1] cth = cos_arr
    cdef double[::1] sth = sin_arr
    cdef double sqdt = sqrt(dt)
    cdef long step = 0, take, i, j, idx
    cdef double C, S, invN = 1.0 / N, th
    cdef double[:, ::1] noise
    while step < n_steps:
        take = chunk if chunk < n_steps - step else n_steps - step
        noise_arr = rng.standard_normal((take, N))
        noise = noise_arr
        for j in range(take):
            C = 0.0
            S = 0.0
            for i in range(N):
                th = theta[i]
                cth[i] = cos(th)
                sth[i] = sin(th)
                C += cth[i]
                S += sth[i]
            C *= invN
            S *= invN
            for i in range(N):
                theta[i] = theta[i] + (omega[i] - K * (sth[i] * C - cth[i] * S)) * dt \
                    + sqdt * noise[j, i]
            step += 1
            if step % stride == 0:
                idx = step // stride - 1
                C = 0.0
                S = 0.0
                for i in range(N):
                    th = theta[i]
                    C += cos(th)
                    S += sin(th)
                recs[idx, 0] = C * invN
                recs[idx, 1] = S * invN
    return recs_arr


def spde_run(double[::1] x, double[:, ::1] prop, double[:, ::1] noise_factor,
             double[:, ::1] obs, long n_steps, long stride, rng,
             long chunk=DEFAULT_CHUNK):
    """Implicit-Euler loop for the linear fluctuation system; see `_kernels_py.spde_run`."""
    cdef long d = x.shape[0]
    cdef long m = noise_factor.shape[1]
    cdef long k_obs = obs.shape[0]
    cdef long n_rec = n_steps // stride
    recs_arr = np.empty((n_rec, k_obs))
    cdef double[:, ::1] recs = recs_arr
    work_arr = np.empty(d)
    out_arr = np.empty(d)
    cdef double[::1] work = work_arr
    cdef double[::1] out = out_arr
    cdef double[:, ::1] noise
    cdef long step = 0, take, j, i, r, j2
    cdef int dd = <int>d, mm = <int>m, inc = 1
    cdef double one = 1.0, zero = 0.0
    cdef double acc
    # BLAS is column-major: y = A^T xv with A passed row-major equals
    # dgemv("N") on the transposed dims; use the "T" form on the C-order data.
    while step < n_steps:
        take = chunk if chunk < n_steps - step else n_steps - step
        noise_arr = rng.standard_normal((take, m))
        noise = noise_arr
        for j in range(take):
            # work = x + noise_factor @ xi
            for i in range(d):
                work[i] = x[i]
            dgemv("T", &mm, &dd, &one, &noise_factor[0, 0], &mm,
                  &noise[j, 0], &inc, &one, &work[0], &inc)
            # x = prop @ work
            dgemv("T", &dd, &dd, &one, &prop[0, 0], &dd,
                  &work[0], &inc, &zero, &out[0], &inc)
            for i in range(d):
                x[i] = out[i]
            step += 1
            if step % stride == 0:
                r = step // stride - 1
                for i in range(k_obs):
                    acc = 0.0
                    # small k_obs: plain dot
                    for j2 in range(d):
                        acc += obs[i, j2] * x[j2]
                    recs[r, i] = acc
    return recs_arr
