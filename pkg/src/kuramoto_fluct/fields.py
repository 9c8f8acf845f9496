"""Uniform circle grids and two-component fields.

Everything in this package lives on a uniform periodic grid of M nodes
theta_i = 2*pi*i/M.  A "theta field" is a plain float array of shape (M,);
a :class:`DisorderedField` carries one theta field per frequency component
(+omega0 and -omega0).  Quadrature is the periodic trapezoid rule, which is
spectrally accurate for smooth periodic integrands; derivatives and
primitives are computed in Fourier space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "DisorderedField",
    "integrate",
    "spectral_diff",
    "spectral_antiderivative",
    "weighted_primitive",
    "cumulative_exp_integral",
    "tail_exp_integral",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with M nodes and Fourier truncation order n.

    M >= 4n + 2 keeps quadrature of degree-2n trigonometric integrands
    alias-free; M must be even so the Nyquist mode is unambiguous.
    """

    M: int = 256
    n: int = 32

    def __post_init__(self):
        if self.M % 2 != 0:
            raise ValueError(f"grid size M={self.M} must be even")
        if self.n < 1:
            raise ValueError(f"truncation order n={self.n} must be >= 1")
        if self.M < 4 * self.n + 2:
            raise ValueError(
                f"grid size M={self.M} too small for truncation n={self.n}: "
                f"need M >= 4n+2 = {4 * self.n + 2}"
            )

    @property
    def thetas(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.M) / self.M

    @property
    def h(self) -> float:
        return 2.0 * np.pi / self.M

    def wavenumbers(self) -> np.ndarray:
        """Signed integer wavenumbers in FFT order."""
        return np.fft.fftfreq(self.M, d=1.0 / self.M)


@dataclass(frozen=True)
class DisorderedField:
    """A pair of theta fields, one per frequency component (+omega0, -omega0)."""

    plus: np.ndarray
    minus: np.ndarray
    grid: Grid = field(default=None)

    def __post_init__(self):
        plus = np.asarray(self.plus, dtype=float)
        minus = np.asarray(self.minus, dtype=float)
        if plus.shape != minus.shape or plus.ndim != 1:
            raise ValueError("components must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(plus)) and np.all(np.isfinite(minus))):
            raise ValueError("field has non-finite samples")
        grid = self.grid if self.grid is not None else Grid(M=plus.size, n=max(1, plus.size // 4 - 1))
        if plus.size != grid.M:
            raise ValueError(f"field length {plus.size} does not match grid M={grid.M}")
        object.__setattr__(self, "plus", plus)
        object.__setattr__(self, "minus", minus)
        object.__setattr__(self, "grid", grid)

    @classmethod
    def from_stack(cls, stack: np.ndarray, grid: Grid) -> "DisorderedField":
        return cls(plus=np.array(stack[0]), minus=np.array(stack[1]), grid=grid)

    @classmethod
    def constant(cls, c_plus: float, c_minus: float, grid: Grid) -> "DisorderedField":
        return cls(plus=np.full(grid.M, c_plus), minus=np.full(grid.M, c_minus), grid=grid)

    def stack(self) -> np.ndarray:
        """Components as a (2, M) array; row 0 is the +omega0 component."""
        return np.stack([self.plus, self.minus])

    def masses(self) -> tuple[float, float]:
        return integrate(self.plus), integrate(self.minus)

    def reflected(self) -> "DisorderedField":
        """The field h(-theta, -omega): swap components and reverse theta."""
        return DisorderedField(
            plus=np.roll(self.minus[::-1], 1),
            minus=np.roll(self.plus[::-1], 1),
            grid=self.grid,
        )

    def __add__(self, other):
        return DisorderedField(self.plus + other.plus, self.minus + other.minus, self.grid)

    def __sub__(self, other):
        return DisorderedField(self.plus - other.plus, self.minus - other.minus, self.grid)

    def __mul__(self, c):
        return DisorderedField(c * self.plus, c * self.minus, self.grid)

    __rmul__ = __mul__


def integrate(values: np.ndarray) -> np.ndarray:
    """Periodic trapezoid rule over the circle along the last axis."""
    return 2.0 * np.pi * np.mean(values, axis=-1)


def spectral_diff(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Fourier-space derivative along the last axis."""
    M = values.shape[-1]
    vhat = np.fft.rfft(values, axis=-1)
    k = np.arange(vhat.shape[-1])
    vhat = vhat * (1j * k) ** order
    if order % 2 == 1 and M % 2 == 0:
        vhat[..., -1] = 0.0  # odd derivative of the Nyquist mode is not representable
    return np.fft.irfft(vhat, n=M, axis=-1)


def spectral_antiderivative(values: np.ndarray) -> np.ndarray:
    """Periodic primitive (zero-mean) of a zero-mean field, along the last axis."""
    M = values.shape[-1]
    vhat = np.fft.rfft(values, axis=-1)
    vhat[..., 0] = 0.0
    k = np.arange(1, vhat.shape[-1])
    vhat[..., 1:] = vhat[..., 1:] / (1j * k)
    return np.fft.irfft(vhat, n=M, axis=-1)


def weighted_primitive(values: np.ndarray, weight: np.ndarray):
    """Mass and normalized primitive used by the weighted H^-1 norms.

    Splits h = m*k + h0 with m = integral of h and k the weight (a probability
    density), then returns (m, H0) where H0 is the periodic primitive of h0
    fixed by the normalization  integral of H0/k = 0.

    Works on batched `values` of shape (..., M) against a single weight (M,).
    """
    weight = np.asarray(weight, dtype=float)
    if np.any(weight <= 0.0):
        raise ValueError("weight must be strictly positive")
    m = integrate(values)
    h0 = values - np.multiply.outer(m, weight).reshape(values.shape)
    H = spectral_antiderivative(h0)
    inv_k = 1.0 / weight
    shift = integrate(H * inv_k) / integrate(inv_k)
    H0 = H - np.multiply.outer(shift, np.ones(weight.size)).reshape(values.shape)
    return m, H0


def _exp_modes(periodic_vals: np.ndarray, omega: float):
    """Fourier data for integrals of g(u) * exp(-2*omega*u), g periodic."""
    M = periodic_vals.shape[-1]
    c = np.fft.fft(periodic_vals) / M
    k = np.fft.fftfreq(M, d=1.0 / M)
    lam = 1j * k - 2.0 * omega
    if omega == 0.0:
        d = np.zeros_like(c)
        d[1:] = c[1:] / lam[1:]
    else:
        d = c / lam
    return c, d, lam


def cumulative_exp_integral(grid: Grid, periodic_vals: np.ndarray, omega: float) -> np.ndarray:
    """integral_0^theta g(u) exp(-2*omega*u) du at the grid nodes.

    g is given by its samples on the grid.  The periodic factor is expanded
    by FFT and each mode integrated in closed form, so the result is
    spectrally accurate even though the full integrand is not periodic.
    """
    c, d, _ = _exp_modes(periodic_vals, omega)
    theta = grid.thetas
    osc = (np.fft.ifft(d) * grid.M) * np.exp(-2.0 * omega * theta)
    out = osc.real - d.sum().real
    if omega == 0.0:
        out = out + c[0].real * theta  # the k=0 mode integrates to c0*theta
    return out


def tail_exp_integral(grid: Grid, periodic_vals: np.ndarray, omega: float) -> np.ndarray:
    """integral_theta^{2 pi} g(u) exp(-2*omega*u) du at the grid nodes."""
    c, d, _ = _exp_modes(periodic_vals, omega)
    theta = grid.thetas
    osc = (np.fft.ifft(d) * grid.M) * np.exp(-2.0 * omega * theta)
    e4 = np.exp(-4.0 * np.pi * omega)
    out = d.sum().real * e4 - osc.real
    if omega == 0.0:
        out = out + c[0].real * (2.0 * np.pi - theta)
    return out
