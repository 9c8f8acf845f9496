"""Stationary synchronized states of the disordered mean-field rotator model.

The frequency law is binary: omega = +/- omega0 with probability 1/2 each.
Synchronized profiles are built from the classical closed form

    q(theta, omega) = S(theta, omega, 2 K r) / Z(omega, 2 K r),

where S combines exp(G) with two integrals of exp(-G), G(u, omega, x) =
x cos(u) + 2 omega u, and the synchronization level r solves the scalar
fixed-point equation r = Psi_mu(2 K r).  The profile satisfies, pointwise,

    (1/2) dq/dtheta = q * (V + omega) + kappa(omega),

with V the sine-kernel mean field of q and kappa(omega) =
(1 - exp(4 pi omega)) / (2 Z(omega)); this identity is the main consistency
check on the construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import (
    DisorderedField,
    Grid,
    cumulative_exp_integral,
    integrate,
    spectral_diff,
    tail_exp_integral,
    weighted_primitive,
)

__all__ = [
    "ModelParams",
    "StationaryState",
    "eval_G",
    "eval_S",
    "eval_Z",
    "psi0",
    "psi_mu",
    "solve_r0",
    "solve_r",
    "bracketed_roots",
    "build_stationary",
    "mean_field",
    "order_parameter",
    "sobolev_norm",
    "stationarity_residual",
]


@dataclass(frozen=True)
class ModelParams:
    """Coupling strength K > 0 and disorder half-width omega0 >= 0."""

    K: float
    omega0: float = 0.0

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError(f"K must be positive, got {self.K}")
        if self.omega0 < 0:
            raise ValueError(f"omega0 must be >= 0, got {self.omega0}")


@dataclass(frozen=True)
class StationaryState:
    """Solved synchronized profile together with its normalization data."""

    params: ModelParams
    grid: Grid
    r: float
    q: DisorderedField
    Z_plus: float
    Z_minus: float
    kappa_plus: float
    kappa_minus: float
    q0: np.ndarray
    r0: float
    roots: tuple      # all bracketed fixed points found for r (diagnostic)

    @property
    def x(self) -> float:
        return 2.0 * self.params.K * self.r

    def dq(self) -> DisorderedField:
        """Theta-derivative of the profile (the rotation zero mode)."""
        return DisorderedField(
            spectral_diff(self.q.plus), spectral_diff(self.q.minus), self.grid
        )

    def kappa(self, omega: float) -> float:
        if omega > 0:
            return self.kappa_plus
        if omega < 0:
            return self.kappa_minus
        return 0.0


def eval_G(theta, omega: float, x: float):
    """G(theta, omega, x) = x cos(theta) + 2 omega theta."""
    theta = np.asarray(theta, dtype=float)
    return x * np.cos(theta) + 2.0 * omega * theta


def _S_on_grid(grid: Grid, omega: float, x: float) -> np.ndarray:
    """S at the grid nodes, via spectrally accurate mode-wise quadrature.

    The inner integrals of exp(-G) are computed by expanding the periodic
    factor exp(-x cos u) with the FFT (the trapezoid sums on the uniform
    grid) and integrating each mode against exp(-2 omega u) in closed form.
    The combination below is the cancellation-free rearrangement of
    (1 - e^{4 pi omega}) I(theta) + e^{4 pi omega} I(2 pi).
    """
    theta = grid.thetas
    periodic = np.exp(-x * np.cos(theta))
    I_theta = cumulative_exp_integral(grid, periodic, omega)
    J_theta = tail_exp_integral(grid, periodic, omega)
    G = eval_G(theta, omega, x)
    return np.exp(G) * (I_theta + np.exp(4.0 * np.pi * omega) * J_theta)


def eval_S(theta, omega: float, x: float, grid: Grid):
    """S(theta, omega, x) at arbitrary angles (scalar or array)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    nodes = grid.thetas
    periodic = np.exp(-x * np.cos(nodes))
    c = np.fft.fft(periodic) / grid.M
    k = np.fft.fftfreq(grid.M, d=1.0 / grid.M)
    lam = 1j * k - 2.0 * omega
    phase = np.exp(np.multiply.outer(theta, lam))  # e^{lam * theta}
    if omega == 0.0:
        d = np.zeros_like(c)
        d[1:] = c[1:] / lam[1:]
        I_theta = (phase @ d).real - d.sum().real + c[0].real * theta
        I_total = 2.0 * np.pi * c[0].real
    else:
        d = c / lam
        I_theta = (phase @ d).real - d.sum().real
        I_total = d.sum().real * (np.exp(-4.0 * np.pi * omega) - 1.0)
    J_theta = I_total - I_theta
    G = eval_G(theta, omega, x)
    out = np.exp(G) * (I_theta + np.exp(4.0 * np.pi * omega) * J_theta)
    return out if out.size > 1 else float(out[0])


def eval_Z(omega: float, x: float, grid: Grid) -> float:
    """Normalization Z(omega, x) = integral of S over the circle."""
    return float(integrate(_S_on_grid(grid, omega, x)))


def psi0(x: float, grid: Grid) -> float:
    """No-disorder self-consistency function I1-type ratio."""
    theta = grid.thetas
    w = np.exp(x * np.cos(theta))
    return float(integrate(np.cos(theta) * w) / integrate(w))


def _psi_component(x: float, omega: float, grid: Grid) -> float:
    S = _S_on_grid(grid, omega, x)
    return float(integrate(np.cos(grid.thetas) * S) / integrate(S))


def psi_mu(x: float, omega0: float, grid: Grid) -> float:
    """Binary-disorder self-consistency function (average of both components)."""
    if omega0 == 0.0:
        return psi0(x, grid)
    return 0.5 * (_psi_component(x, omega0, grid) + _psi_component(x, -omega0, grid))


def _bisect(g, lo: float, hi: float, tol: float) -> float:
    glo = g(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gmid = g(mid)
        if abs(gmid) <= tol or hi - lo < 1e-15:
            return mid
        if (gmid > 0) == (glo > 0):
            lo, glo = mid, gmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_r0(K: float, tol: float = 1e-10, grid: Grid | None = None) -> float:
    """Largest solution of r = Psi0(2 K r); zero iff K <= 1."""
    grid = grid or Grid()
    if K <= 1.0:
        return 0.0
    g = lambda r: psi0(2.0 * K * r, grid) - r
    return _bisect(g, tol, 1.0, tol)


def bracketed_roots(K: float, omega0: float, tol: float = 1e-10,
                    grid: Grid | None = None, scan_points: int = 64) -> list:
    """All positive fixed points of r = Psi_mu(2 K r) found by a bracket scan."""
    grid = grid or Grid()
    g = lambda r: psi_mu(2.0 * K * r, omega0, grid) - r
    rs = np.linspace(tol, 1.0, scan_points)
    vals = np.array([g(r) for r in rs])
    roots = []
    for i in range(scan_points - 1):
        if vals[i] == 0.0:
            roots.append(float(rs[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(_bisect(g, rs[i], rs[i + 1], tol))
    return roots


def solve_r(K: float, omega0: float, tol: float = 1e-10, grid: Grid | None = None) -> float:
    """Largest positive fixed point of r = Psi_mu(2 K r), or 0 if none is bracketed."""
    if omega0 == 0.0:
        return solve_r0(K, tol, grid)
    roots = bracketed_roots(K, omega0, tol, grid)
    return roots[-1] if roots else 0.0


def build_stationary(params: ModelParams, grid: Grid | None = None,
                     tol: float = 1e-10) -> StationaryState:
    """Solve the fixed point and assemble the full stationary profile."""
    grid = grid or Grid()
    K, om = params.K, params.omega0
    roots = bracketed_roots(K, om, tol, grid) if om > 0 else []
    r = solve_r(K, om, tol, grid)
    x = 2.0 * K * r
    S_plus = _S_on_grid(grid, +om, x)
    S_minus = _S_on_grid(grid, -om, x)
    Z_plus = float(integrate(S_plus))
    Z_minus = float(integrate(S_minus))
    q = DisorderedField(S_plus / Z_plus, S_minus / Z_minus, grid)
    if np.any(q.plus <= 0) or np.any(q.minus <= 0):
        raise FloatingPointError(
            "stationary profile has non-positive samples (quadrature breakdown)"
        )
    kappa_plus = (1.0 - np.exp(4.0 * np.pi * om)) / (2.0 * Z_plus)
    kappa_minus = (1.0 - np.exp(-4.0 * np.pi * om)) / (2.0 * Z_minus)
    r0 = solve_r0(K, tol, grid)
    q0 = np.exp(2.0 * K * r0 * np.cos(grid.thetas))
    q0 = q0 / integrate(q0)
    return StationaryState(
        params=params, grid=grid, r=float(r), q=q,
        Z_plus=Z_plus, Z_minus=Z_minus,
        kappa_plus=float(kappa_plus), kappa_minus=float(kappa_minus),
        q0=q0, r0=float(r0), roots=tuple(roots),
    )


def mean_field(h: DisorderedField, K: float) -> np.ndarray:
    """Sine-kernel mean field of h, averaged over the frequency law.

    Exact for the sine kernel: only the first trigonometric moments of h
    enter, so the convolution reduces to -K (sin(theta) <c1> - cos(theta) <s1>)
    with <.> the average of the two components.
    """
    theta = h.grid.thetas
    c1 = 0.5 * (integrate(np.cos(theta) * h.plus) + integrate(np.cos(theta) * h.minus))
    s1 = 0.5 * (integrate(np.sin(theta) * h.plus) + integrate(np.sin(theta) * h.minus))
    return -K * (np.sin(theta) * c1 - np.cos(theta) * s1)


def order_parameter(h: DisorderedField) -> tuple[float, float]:
    """Synchronization level r and center psi of a two-component density."""
    theta = h.grid.thetas
    c1 = 0.5 * (integrate(np.cos(theta) * h.plus) + integrate(np.cos(theta) * h.minus))
    s1 = 0.5 * (integrate(np.sin(theta) * h.plus) + integrate(np.sin(theta) * h.minus))
    r = float(np.hypot(c1, s1))
    psi = float(np.arctan2(s1, c1)) if r >= 1e-12 else 0.0
    return r, psi


def sobolev_norm(h: DisorderedField, weight: DisorderedField) -> float:
    """Weighted H^-1 norm with disorder.

    Per component: split h = m*k + h0 against the weight k, take the
    periodic primitive H0 of h0 normalized by integral(H0/k) = 0, and
    combine (<m^2> + <integral H0^2/k>)^(1/2) with <.> the average over
    the two components.
    """
    total = 0.0
    for comp, k in ((h.plus, weight.plus), (h.minus, weight.minus)):
        m, H0 = weighted_primitive(comp, k)
        total += 0.5 * (float(m) ** 2 + float(integrate(H0 * H0 / k)))
    return float(np.sqrt(total))


def stationarity_residual(state: StationaryState) -> float:
    """Max-norm defect of (1/2) dq - q (V + omega) - kappa(omega) over both components."""
    V = mean_field(state.q, state.params.K)
    om = state.params.omega0
    res_p = 0.5 * spectral_diff(state.q.plus) - state.q.plus * (V + om) - state.kappa_plus
    res_m = 0.5 * spectral_diff(state.q.minus) - state.q.minus * (V - om) - state.kappa_minus
    return float(max(np.max(np.abs(res_p)), np.max(np.abs(res_m))))
