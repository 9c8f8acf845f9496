"""Galerkin simulation of the fluctuation field around the stationary profile.

The field eta_t is advanced by implicit Euler on the linear drift,

    eta_{t+dt} = (I - dt L)^{-1} (eta_t + dW),

with dW a centered Gaussian increment whose per-component covariance over
the basis observables is dt * Sigma, Sigma_{ml} = (1/2) int phi_m' phi_l'
q(., omega) dtheta; the two components are independent and constants carry
no noise.  Per-component masses are conserved exactly by both drift and
noise, so the coordinate along the generalized eigenvector p is a
conserved quantity and all linear-in-time growth appears in the kernel
coordinate ell_dq(eta_t), whose asymptotic slope is mass_plus / int p_plus.
"""

from __future__ import annotations

import concurrent.futures as _futures
from dataclasses import dataclass

import numpy as np

from . import kernels
from .spectral import BasisSpec, OperatorMatrix
from .particles import sample_disorder
from .stationary import StationaryState

__all__ = [
    "NoiseModel",
    "FluctuationState",
    "InitialCondition",
    "SpeedEstimate",
    "EnsembleVarianceResult",
    "build_noise",
    "sample_initial",
    "SpdeStepper",
    "step_spde",
    "run_spde",
    "SpdeTrajectory",
    "estimate_speed",
    "ensemble_variance",
]


@dataclass
class NoiseModel:
    """Factored Galerkin covariance of the fluctuation noise."""

    basis: BasisSpec
    sigma_plus: np.ndarray     # (2n, 2n) over the component's trig modes
    sigma_minus: np.ndarray
    chol_plus: np.ndarray
    chol_minus: np.ndarray
    field_factor: np.ndarray   # (d, 4n): iid normals -> field coefficient increment / sqrt(dt)

    def sample_increment(self, rng, dt: float) -> np.ndarray:
        """One field-coefficient increment over a step of length dt."""
        xi = rng.standard_normal(self.field_factor.shape[1])
        return np.sqrt(dt) * (self.field_factor @ xi)

    def observable_increment(self, rng, dt: float) -> tuple[np.ndarray, np.ndarray]:
        """Increment of the dual observables (W(phi_m))_m per component, cov = dt * Sigma."""
        n2 = self.sigma_plus.shape[0]
        return (np.sqrt(dt) * self.chol_plus @ rng.standard_normal(n2),
                np.sqrt(dt) * self.chol_minus @ rng.standard_normal(n2))


@dataclass
class FluctuationState:
    eta: np.ndarray
    t: float = 0.0

    @property
    def mass_plus(self) -> float:
        return float(self.eta[0])

    @property
    def mass_minus(self) -> float:
        return float(-self.eta[0])


@dataclass
class InitialCondition:
    z: float
    eta: np.ndarray


@dataclass
class SpeedEstimate:
    v_hat: float
    stderr: float
    window: tuple
    method: str


@dataclass
class SpdeTrajectory:
    times: np.ndarray
    alpha: np.ndarray       # ell_dq(eta_t)
    eta_sin: np.ndarray
    mass_plus: np.ndarray


@dataclass
class EnsembleVarianceResult:
    zs: np.ndarray
    v_hats: np.ndarray
    var_v: float
    sigma_v_sq_pred: float
    sigma_v_sq_conjecture: float
    int_p_plus: float


def _dtrig_table(basis: BasisSpec) -> np.ndarray:
    """Derivatives of the per-component modes [cos k, sin k], analytically."""
    theta = basis.grid.thetas
    k = np.arange(1, basis.n + 1)[:, None]
    return np.vstack([-k * np.sin(k * theta), k * np.cos(k * theta)])


def _factor_psd(sigma: np.ndarray, ridge: float = 1e-14):
    """Cholesky factor, retrying once with a small ridge on the diagonal."""
    scale = max(np.max(np.abs(sigma)), 1.0)
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        try:
            return np.linalg.cholesky(sigma + ridge * scale * np.eye(sigma.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise FloatingPointError(
                "noise covariance not positive semidefinite beyond ridge"
            ) from exc


def build_noise(state: StationaryState, basis: BasisSpec, ridge: float = 1e-14) -> NoiseModel:
    """Quadrature covariance matrices and their factorizations.

    Constants carry no noise (their derivative vanishes), so the c0 row of
    the field factor is zero: per-component masses are never moved by dW.
    The field factor includes the inverse mass matrix (the trig modes have
    squared norm pi), so that the dual observables int dW phi_m have
    covariance dt * Sigma exactly.
    """
    dphi = _dtrig_table(basis)
    h = basis.grid.h
    sig_p = 0.5 * (dphi * state.q.plus) @ dphi.T * h
    sig_m = 0.5 * (dphi * state.q.minus) @ dphi.T * h
    sig_p = 0.5 * (sig_p + sig_p.T)
    sig_m = 0.5 * (sig_m + sig_m.T)
    chol_p = _factor_psd(sig_p, ridge)
    chol_m = _factor_psd(sig_m, ridge)
    n2 = 2 * basis.n
    F = np.zeros((basis.dim, 2 * n2))
    F[1:n2 + 1, :n2] = chol_p / np.pi
    F[n2 + 1:, n2:] = chol_m / np.pi
    return NoiseModel(basis, sig_p, sig_m, chol_p, chol_m, F)


def _gamma_trig_coeffs(gamma: np.ndarray, basis: BasisSpec) -> np.ndarray:
    """Trig coefficients [a_1..a_n, b_1..b_n] of a density sampled on the grid."""
    vhat = np.fft.rfft(gamma) / basis.grid.M
    a = 2.0 * vhat[1:basis.n + 1].real
    b = -2.0 * vhat[1:basis.n + 1].imag
    return np.concatenate([a, b])


def sample_initial(basis: BasisSpec, mode: str = "gaussian_z", gamma: np.ndarray | None = None,
                   scale_x: float = 0.0, rng=None, seed=None,
                   N: int | None = None, omega0: float = 0.0,
                   disorder_mode: str = "iid", z: float | None = None) -> InitialCondition:
    """Initial fluctuation field with disorder asymmetry z.

    The mean part puts mass +z on the +omega0 component and -z on the
    other, shaped by the phase law gamma (uniform by default, making the
    mean part exactly proportional to the constant-difference vector).
    Modes: 'gaussian_z' draws z ~ N(0, 1/4) (the limit law of
    alpha_N/sqrt(N)); 'from_particles' computes z from an actual frequency
    sample; a fixed `z` can also be supplied.  An optional centered smooth
    Gaussian field of amplitude `scale_x` with zero per-component mass
    models the rotator-fluctuation part.
    """
    rng = rng if rng is not None else np.random.default_rng(seed)
    if z is None:
        if mode == "gaussian_z":
            z = float(rng.normal(0.0, 0.5))
        elif mode == "from_particles":
            if N is None:
                raise ValueError("from_particles mode needs N")
            om = sample_disorder(N, omega0 if omega0 > 0 else 1.0, disorder_mode, rng=rng)
            z = float((np.sum(om > 0) - 0.5 * N) / np.sqrt(N))
        else:
            raise ValueError(f"unknown initial mode {mode!r}")
    eta = np.zeros(basis.dim)
    eta[0] = z
    if gamma is not None:
        shape = _gamma_trig_coeffs(gamma, basis)
        n2 = 2 * basis.n
        eta[1:n2 + 1] = z * shape
        eta[n2 + 1:] = -z * shape
    if scale_x > 0.0:
        n = basis.n
        k = np.arange(1, n + 1, dtype=float)
        decay = np.concatenate([1.0 / k, 1.0 / k])
        n2 = 2 * n
        eta[1:n2 + 1] += scale_x * decay * rng.standard_normal(n2)
        eta[n2 + 1:] += scale_x * decay * rng.standard_normal(n2)
    return InitialCondition(z=float(z), eta=eta)


class SpdeStepper:
    """Implicit-Euler stepper with a cached propagator.

    (I - dt L) is factored once; with the spectrum of L in the closed left
    half-plane the factorization cannot be singular for dt > 0, and a
    failure is raised loudly.
    """

    def __init__(self, op: OperatorMatrix, dt: float, noise: NoiseModel | None = None):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.op = op
        self.dt = dt
        self.noise = noise
        A = np.eye(op.dim) - dt * op.entries
        try:
            self.propagator = np.ascontiguousarray(np.linalg.inv(A))
        except np.linalg.LinAlgError as exc:
            raise FloatingPointError(
                "(I - dt L) is singular; L has spectrum crossing 1/dt"
            ) from exc

    def step(self, state: FluctuationState, rng) -> FluctuationState:
        eta = state.eta
        if self.noise is not None:
            eta = eta + self.noise.sample_increment(rng, self.dt)
        return FluctuationState(self.propagator @ eta, state.t + self.dt)


def step_spde(state: FluctuationState, dt: float, op: OperatorMatrix,
              noise: NoiseModel | None, rng) -> FluctuationState:
    """Single implicit-Euler step (builds a throwaway stepper; prefer SpdeStepper)."""
    return SpdeStepper(op, dt, noise).step(state, rng)


def sin_observable(basis: BasisSpec) -> np.ndarray:
    """Covector of the disorder-averaged sine observable eta(sin)."""
    obs = np.zeros(basis.dim)
    obs[1 + basis.n] = 0.5 * np.pi          # sin_1 of the + component
    obs[2 * basis.n + 1 + basis.n] = 0.5 * np.pi
    return obs


def run_spde(eta0: np.ndarray, T: float, dt: float, op: OperatorMatrix,
             noise: NoiseModel | None, ell_dq: np.ndarray,
             rng=None, seed=None, record_every: int = 1,
             backend: str | None = None) -> SpdeTrajectory:
    """Integrate one noise path, recording ell_dq(eta), eta(sin) and mass_plus."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    basis = op.basis
    _, spde_kernel, _ = kernels.get_backend(backend)
    n_steps = int(round(T / dt))
    stepper = SpdeStepper(op, dt, noise)
    obs = np.ascontiguousarray(np.vstack([ell_dq, sin_observable(basis), np.eye(basis.dim)[0]]))
    if noise is not None:
        factor = np.ascontiguousarray(np.sqrt(dt) * noise.field_factor)
    else:
        factor = np.zeros((basis.dim, 1))
    x = eta0.copy()
    recs = np.asarray(spde_kernel(x, stepper.propagator, factor, obs,
                                  n_steps, record_every, rng))
    times = np.concatenate([[0.0], (np.arange(recs.shape[0]) + 1) * record_every * dt])
    first = obs @ eta0
    alpha = np.concatenate([[first[0]], recs[:, 0]])
    eta_sin = np.concatenate([[first[1]], recs[:, 1]])
    mass = np.concatenate([[first[2]], recs[:, 2]])
    return SpdeTrajectory(times, alpha, eta_sin, mass)


def _ols_slope(t: np.ndarray, y: np.ndarray):
    tm, ym = t.mean(), y.mean()
    stt = np.sum((t - tm) ** 2)
    slope = float(np.sum((t - tm) * (y - ym)) / stt)
    resid = y - ym - slope * (t - tm)
    dof = max(t.size - 2, 1)
    return slope, float(np.sqrt(np.sum(resid ** 2) / dof / stt))


def estimate_speed(traj: SpdeTrajectory, window: tuple[float, float],
                   method: str = "ell_dq_slope", r: float | None = None) -> SpeedEstimate:
    """Asymptotic growth speed from one trajectory.

    'ell_dq_slope' fits the kernel coordinate directly; 'eta_sin_slope'
    uses the sine observable, whose leading drift is -r per unit speed
    (the sine pairing of the kernel direction equals -r).
    """
    t1, t2 = window
    sel = (traj.times >= t1) & (traj.times <= t2)
    if np.sum(sel) < 10:
        raise ValueError("window too short: fewer than 10 samples")
    t = traj.times[sel]
    if method == "ell_dq_slope":
        slope, err = _ols_slope(t, traj.alpha[sel])
        return SpeedEstimate(slope, err, window, method)
    if method == "eta_sin_slope":
        if r is None:
            raise ValueError("eta_sin_slope needs the synchronization level r")
        slope, err = _ols_slope(t, traj.eta_sin[sel])
        return SpeedEstimate(-slope / r, err / r, window, method)
    raise ValueError(f"unknown speed method {method!r}")


_WORKER = {}


def _ensemble_init(payload):
    _WORKER.update(payload)


def _speed_draw_task(args):
    idx, z, master_seed = args
    op: OperatorMatrix = _WORKER["op"]
    noise: NoiseModel = _WORKER["noise"]
    v_paths = []
    for j in range(_WORKER["paths_per_draw"]):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=master_seed, spawn_key=(idx, j)))
        eta0 = np.zeros(op.basis.dim)
        eta0[0] = z
        traj = run_spde(eta0, _WORKER["T"], _WORKER["dt"], op, noise,
                        _WORKER["ell_dq"], rng=rng,
                        record_every=_WORKER["record_every"])
        est = estimate_speed(traj, _WORKER["window"])
        v_paths.append(est.v_hat)
    return idx, float(np.mean(v_paths))


def ensemble_variance(n_draws: int, paths_per_draw: int, op: OperatorMatrix,
                      noise: NoiseModel, ell_dq: np.ndarray, int_p_plus: float,
                      omega0: float, T: float = 100.0, dt: float = 0.05,
                      window: tuple | None = None, record_every: int = 4,
                      seed: int = 0, mode: str = "gaussian_z",
                      workers: int = 1) -> EnsembleVarianceResult:
    """Sample variance of the estimated speed over disorder draws.

    Each draw fixes z (either z ~ N(0, 1/4) or exactly 0 in 'symmetrized'
    mode), runs `paths_per_draw` independent noise paths from the mean
    initial field, and averages the per-path slope estimates.  The
    prediction for the variance is (2 int p_plus)^{-2}; with the
    empirically verified mass of the generalized eigenvector this is
    omega0^2/4.
    """
    window = window or (T / 5.0, T)
    z_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(10**6,)))
    if mode == "gaussian_z":
        zs = z_rng.normal(0.0, 0.5, n_draws)
    elif mode == "symmetrized":
        zs = np.zeros(n_draws)
    else:
        raise ValueError(f"unknown ensemble mode {mode!r}")
    payload = dict(op=op, noise=noise, ell_dq=ell_dq, T=T, dt=dt,
                   window=window, record_every=record_every,
                   paths_per_draw=paths_per_draw)
    tasks = [(i, float(zs[i]), seed) for i in range(n_draws)]
    v_hats = np.empty(n_draws)
    if workers > 1:
        with _futures.ProcessPoolExecutor(
                max_workers=workers, initializer=_ensemble_init,
                initargs=(payload,)) as pool:
            for idx, v in pool.map(_speed_draw_task, tasks, chunksize=8):
                v_hats[idx] = v
    else:
        _ensemble_init(payload)
        for t in tasks:
            idx, v = _speed_draw_task(t)
            v_hats[idx] = v
    var_v = float(np.var(v_hats, ddof=1))
    pred = float((2.0 * int_p_plus) ** (-2))
    return EnsembleVarianceResult(
        zs=zs, v_hats=v_hats, var_v=var_v,
        sigma_v_sq_pred=pred,
        sigma_v_sq_conjecture=float(omega0 ** 2 / 4.0),
        int_p_plus=float(int_p_plus),
    )
