"""Pure-Python (numpy) implementations of the hot inner loops.

These mirror the compiled kernels in `_kernels.pyx` exactly at the level of
random-number consumption: both draw standard normals in chunks of
`chunk` steps from the supplied generator, so a given seed produces the
same noise sequence on either backend.  Floating-point reduction order
differs between the backends, so long trajectories agree statistically
and to roundoff over short horizons, but are not bit-identical across
backends (they are bit-reproducible within one backend).
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"
DEFAULT_CHUNK = 256


def em_run(theta, omega, K, dt, n_steps, stride, rng, chunk=DEFAULT_CHUNK):
    """Euler-Maruyama loop for the mean-field rotator system.

    Mutates `theta` in place; returns an (n_records, 2) array of the
    population averages (mean cos, mean sin) sampled after every `stride`
    steps.  The pairwise interaction is applied through the order-parameter
    identity, so each step costs O(N).
    """
    theta = np.asarray(theta)
    N = theta.size
    sqdt = np.sqrt(dt)
    n_rec = n_steps // stride
    recs = np.empty((n_rec, 2))
    step = 0
    while step < n_steps:
        take = min(chunk, n_steps - step)
        noise = rng.standard_normal((take, N))
        for j in range(take):
            cth = np.cos(theta)
            sth = np.sin(theta)
            C = cth.mean()
            S = sth.mean()
            theta += (omega - K * (sth * C - cth * S)) * dt + sqdt * noise[j]
            step += 1
            if step % stride == 0:
                idx = step // stride - 1
                recs[idx, 0] = np.cos(theta).mean()
                recs[idx, 1] = np.sin(theta).mean()
    return recs


def spde_run(x, prop, noise_factor, obs, n_steps, stride, rng, chunk=DEFAULT_CHUNK):
    """Implicit-Euler loop for the linear fluctuation system.

    x        : (d,) state coefficients, mutated in place
    prop     : (d, d) propagator (I - dt L)^{-1}
    noise_factor : (d, m) maps m iid standard normals to one increment
                   (already scaled by sqrt(dt))
    obs      : (k, d) observable covectors evaluated at every record

    Returns an (n_records, k) array of observables sampled after every
    `stride` steps.
    """
    x = np.asarray(x)
    m = noise_factor.shape[1]
    n_rec = n_steps // stride
    recs = np.empty((n_rec, obs.shape[0]))
    step = 0
    while step < n_steps:
        take = min(chunk, n_steps - step)
        noise = rng.standard_normal((take, m))
        for j in range(take):
            x[:] = prop @ (x + noise_factor @ noise[j])
            step += 1
            if step % stride == 0:
                recs[step // stride - 1] = obs @ x
    return recs
