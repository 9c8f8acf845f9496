"""Fourier-Galerkin matrices and eigenstructure of the linearized operator.

The evolution operator linearized at the stationary profile q acts on
two-component fields h = (h_plus, h_minus) as

    L h = (1/2) h'' - d/dtheta ( h (V + omega) + q <J*h> ),

with V the mean field of q and <J*h> the sine-kernel mean field of h.  Its
domain carries one scalar constraint: the two component masses sum to zero.
The Galerkin basis therefore holds, per component, the 2n nonconstant real
trigonometric modes, plus a single constant-difference vector
c0 = (1/(2 pi), -1/(2 pi)); dimension d = 4n + 1.

The zero eigenvalue carries a 2 x 2 Jordan block: dq/dtheta spans the
kernel and a generalized vector p solves L p = dq/dtheta.  p exists only
because c0 is in the domain; restricting to per-component zero mass
(`constrained_domain=True` in :func:`assemble`) destroys it, which
:func:`jordan_solve` reports as a large residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .fields import DisorderedField, Grid, integrate, spectral_diff, weighted_primitive
from .stationary import StationaryState, mean_field

__all__ = [
    "BasisSpec",
    "OperatorMatrix",
    "SpectralDecomposition",
    "JordanSolveError",
    "assemble_L",
    "assemble_A",
    "assemble_B",
    "assemble_Lq0",
    "conjugate_M",
    "gram_matrix",
    "gram_composite",
    "eigendecompose",
    "spectral_decomposition",
    "jordan_solve",
    "jordan_residual_zero_mass",
    "p2_explicit",
    "projector_P0",
    "spectral_gap",
    "lambda_K_no_disorder",
    "a2_gap_bound",
    "reflection_matrix",
]


class JordanSolveError(RuntimeError):
    """Raised when L p = dq has no acceptable solution; carries the residual."""

    def __init__(self, residual: float, message: str = ""):
        self.residual = residual
        super().__init__(message or f"generalized-vector solve failed: residual {residual:.3e}")


@dataclass(frozen=True)
class BasisSpec:
    """Real trigonometric Galerkin basis with the shared mass constraint.

    Ordering: index 0 is c0 = (1/(2 pi), -1/(2 pi)); indices 1..2n are the
    +omega0 component modes [cos k | k=1..n] + [sin k | k=1..n]; indices
    2n+1..4n the same for the -omega0 component.
    """

    n: int
    grid: Grid

    def __post_init__(self):
        if self.grid.M < 4 * self.n + 2:
            raise ValueError(
                f"grid M={self.grid.M} too small for basis order n={self.n}"
            )

    @property
    def dim(self) -> int:
        return 4 * self.n + 1

    def component_slices(self):
        n = self.n
        return slice(1, 2 * n + 1), slice(2 * n + 1, 4 * n + 1)

    def _trig_table(self) -> np.ndarray:
        """(2n, M) table of the per-component modes cos(k t), sin(k t)."""
        theta = self.grid.thetas
        k = np.arange(1, self.n + 1)[:, None]
        return np.vstack([np.cos(k * theta), np.sin(k * theta)])

    def fields(self) -> np.ndarray:
        """All basis vectors as a (dim, 2, M) array of grid samples."""
        M, n = self.grid.M, self.n
        out = np.zeros((self.dim, 2, M))
        out[0, 0, :] = 1.0 / (2.0 * np.pi)
        out[0, 1, :] = -1.0 / (2.0 * np.pi)
        table = self._trig_table()
        out[1:2 * n + 1, 0, :] = table
        out[2 * n + 1:, 1, :] = table
        return out

    def to_field(self, coeffs: np.ndarray) -> DisorderedField:
        stack = self.to_stack(coeffs)
        return DisorderedField(stack[0], stack[1], self.grid)

    def to_stack(self, coeffs: np.ndarray) -> np.ndarray:
        """Coefficients (..., dim) -> grid samples (..., 2, M)."""
        return np.tensordot(coeffs, self.fields(), axes=([-1], [0]))

    def from_stack(self, stack: np.ndarray) -> np.ndarray:
        """Project grid samples (..., 2, M) onto the basis.

        The trigonometric coefficients come from the FFT; the c0 coefficient
        is the antisymmetric part of the two component masses.  Any common
        mass (outside the domain) is discarded.
        """
        stack = np.asarray(stack, dtype=float)
        n = self.n
        m_plus = integrate(stack[..., 0, :])
        m_minus = integrate(stack[..., 1, :])
        vhat = np.fft.rfft(stack, axis=-1)
        a = 2.0 * vhat[..., 1:n + 1].real / self.grid.M
        b = -2.0 * vhat[..., 1:n + 1].imag / self.grid.M
        out = np.zeros(stack.shape[:-2] + (self.dim,))
        out[..., 0] = 0.5 * (m_plus - m_minus)
        out[..., 1:n + 1] = a[..., 0, :]
        out[..., n + 1:2 * n + 1] = b[..., 0, :]
        out[..., 2 * n + 1:3 * n + 1] = a[..., 1, :]
        out[..., 3 * n + 1:] = b[..., 1, :]
        return out

    def domain_defect(self, stack: np.ndarray) -> float:
        """|m_plus + m_minus| / 2: distance of the masses from the domain constraint."""
        return float(np.max(np.abs(0.5 * (integrate(stack[..., 0, :]) + integrate(stack[..., 1, :])))))


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense Galerkin matrix of one of the model operators."""

    entries: np.ndarray
    basis: BasisSpec
    label: str  # one of L, A, B, Atilde1, Atilde2, Lq0

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass
class SpectralDecomposition:
    """Eigenstructure of an operator matrix, with the Jordan pair when present."""

    eigenvalues: np.ndarray          # sorted by real part, descending
    right_vectors: np.ndarray
    cluster_threshold: float
    gap: float
    kernel_vec: np.ndarray | None = None
    jordan_vec: np.ndarray | None = None
    ell_dq: np.ndarray | None = None
    ell_p: np.ndarray | None = None
    P0: np.ndarray | None = None

    @property
    def zero_cluster(self) -> np.ndarray:
        return self.eigenvalues[np.abs(self.eigenvalues) < self.cluster_threshold]


def _apply_L_stack(stack, q_stack, V, K, omega0, *, use_q0=None):
    """Apply the linearized operator on grid samples, batched over leading axes.

    stack: (..., 2, M).  With ``use_q0`` set, the multiplicative profile in
    the h <J*q> / q <J*h> terms is replaced (used for the A / B split).
    """
    theta_axis = -1
    M = stack.shape[-1]
    grid_theta = 2.0 * np.pi * np.arange(M) / M
    cos_t, sin_t = np.cos(grid_theta), np.sin(grid_theta)
    # sine-kernel mean field of each h: -K (sin <c1> - cos <s1>)
    c1 = 0.5 * (integrate(stack[..., 0, :] * cos_t) + integrate(stack[..., 1, :] * cos_t))
    s1 = 0.5 * (integrate(stack[..., 0, :] * sin_t) + integrate(stack[..., 1, :] * sin_t))
    mf = -K * (np.multiply.outer(c1, sin_t) - np.multiply.outer(s1, cos_t))
    mf = mf.reshape(stack.shape[:-2] + (M,))
    drift = np.stack([V + omega0, V - omega0])  # (2, M)
    flux = stack * drift + q_stack * mf[..., None, :]
    return 0.5 * spectral_diff(stack, order=2) - spectral_diff(flux, order=1)


def _h1_cross(fields_a: np.ndarray, fields_b: np.ndarray, weight: np.ndarray,
              grid: Grid) -> np.ndarray:
    """Cross-Gram of two families of single-component fields in the weighted H^-1 metric."""
    ma, Ha = weighted_primitive(fields_a, weight)
    mb, Hb = weighted_primitive(fields_b, weight)
    return np.outer(ma, mb) + (Ha / weight) @ Hb.T * grid.h


def _uv_basis_fields(basis: BasisSpec) -> np.ndarray:
    """Sum/difference sector basis as couples, ordered [u modes | c0 | v modes]."""
    n, M = basis.n, basis.grid.M
    table = basis._trig_table()
    out = np.zeros((basis.dim, 2, M))
    out[:2 * n, 0, :] = table          # U_k = (e_k, e_k)
    out[:2 * n, 1, :] = table
    out[2 * n, 0, :] = 1.0 / (2.0 * np.pi)
    out[2 * n, 1, :] = -1.0 / (2.0 * np.pi)
    out[2 * n + 1:, 0, :] = table      # V_k = (e_k, -e_k)
    out[2 * n + 1:, 1, :] = -table
    return out


def _uv_inverse_transform(basis: BasisSpec) -> np.ndarray:
    """Map from sector coordinates back to the standard basis coefficients."""
    n, d = basis.n, basis.dim
    Tinv = np.zeros((d, d))
    for k in range(2 * n):
        Tinv[1 + k, k] = 1.0               # c+_k = u_k + v_k
        Tinv[1 + k, 2 * n + 1 + k] = 1.0
        Tinv[2 * n + 1 + k, k] = 1.0       # c-_k = u_k - v_k
        Tinv[2 * n + 1 + k, 2 * n + 1 + k] = -1.0
    Tinv[0, 2 * n] = 1.0
    return Tinv


def _assemble(state: StationaryState, basis: BasisSpec, label: str) -> OperatorMatrix:
    """Variational Galerkin matrix in the composite (q0, w) metric.

    The weak form is evaluated sector-wise: images of the sum/difference
    basis are tested against the q0-weighted H^-1 inner product on the sum
    sector and the w-weighted one on the difference sector, then solved
    against the two sector Grams and conjugated back.  In this metric the
    symmetric part A of the operator is exactly self-adjoint and exactly
    uncoupled between sectors, so the discrete matrix inherits both to
    quadrature accuracy.  (Plain coefficient truncation would break the
    symmetry at the highest retained modes, where the sine transport
    couples mode n to the discarded mode n+1 with strength O(K r n).)
    """
    if basis.grid.M != state.grid.M:
        raise ValueError("basis and stationary state use different grids")
    K, om = state.params.K, state.params.omega0
    q_stack = state.q.stack()
    q0_stack = np.stack([state.q0, state.q0])
    V = mean_field(state.q, K)
    q0_field = DisorderedField(state.q0, state.q0, state.grid)
    V0 = mean_field(q0_field, K)  # equals -K r0 sin up to the fixed-point residual
    n = basis.n
    fields = _uv_basis_fields(basis)
    if label == "L":
        out = _apply_L_stack(fields, q_stack, V, K, om)
    elif label == "A":
        out = _apply_L_stack(fields, q0_stack, V0, K, 0.0)
    elif label == "B":
        full = _apply_L_stack(fields, q_stack, V, K, om)
        part = _apply_L_stack(fields, q0_stack, V0, K, 0.0)
        out = full - part
    else:
        raise ValueError(f"unknown operator label {label!r}")
    # images are total theta-derivatives: remove floating-point DC noise
    out -= np.mean(out, axis=-1, keepdims=True)
    u_img = 0.5 * (out[:, 0, :] + out[:, 1, :])
    v_img = 0.5 * (out[:, 0, :] - out[:, 1, :])
    table = basis._trig_table()
    v_table = np.vstack([np.full((1, basis.grid.M), 1.0 / (2.0 * np.pi)), table])
    w = state.q0
    Wu = _h1_cross(table, u_img, state.q0, basis.grid)        # (2n, d)
    Wv = _h1_cross(v_table, v_img, w, basis.grid)             # (2n+1, d)
    G1 = _h1_cross(table, table, state.q0, basis.grid)
    G2 = _h1_cross(v_table, v_table, w, basis.grid)
    Xu = scipy.linalg.cho_solve(scipy.linalg.cho_factor(0.5 * (G1 + G1.T)), Wu)
    Xv = scipy.linalg.cho_solve(scipy.linalg.cho_factor(0.5 * (G2 + G2.T)), Wv)
    At = np.vstack([Xu, Xv])                                   # sector coords, (d, d)
    # mass difference of the images vanishes identically: zero the c0 row
    At[2 * n, :] = 0.0
    Tinv = _uv_inverse_transform(basis)
    T = _uv_transform(basis)
    entries = Tinv @ At @ T
    entries[0, :] = 0.0
    # the operator commutes with h(theta, omega) -> h(-theta, -omega) exactly
    # (the profile is even-symmetric); averaging removes the solver noise
    # that would otherwise blur the odd/even block structure
    R = reflection_matrix(basis)
    entries = 0.5 * (entries + R @ entries @ R)
    return OperatorMatrix(entries=entries, basis=basis, label=label)


def assemble_L(state: StationaryState, basis: BasisSpec) -> OperatorMatrix:
    """Galerkin matrix of the full linearized operator."""
    return _assemble(state, basis, "L")


def assemble_A(state: StationaryState, basis: BasisSpec) -> OperatorMatrix:
    """Self-adjoint part: the no-disorder profile q0 in both product terms, no omega transport."""
    return _assemble(state, basis, "A")


def assemble_B(state: StationaryState, basis: BasisSpec) -> OperatorMatrix:
    """Perturbation part: L - A (q - q0 products plus the omega transport)."""
    L = _assemble(state, basis, "L")
    A = _assemble(state, basis, "A")
    return OperatorMatrix(entries=L.entries - A.entries, basis=basis, label="B")


def _uv_transform(basis: BasisSpec) -> np.ndarray:
    """Coefficient map onto the sum/difference sectors.

    New ordering: [u modes (2n) | c0 | v modes (2n)], where u_k averages and
    v_k half-differences the two component coefficients of each trig mode.
    """
    n, d = basis.n, basis.dim
    T = np.zeros((d, d))
    for k in range(2 * n):
        T[k, 1 + k] = 0.5
        T[k, 2 * n + 1 + k] = 0.5
        T[2 * n + 1 + k, 1 + k] = 0.5
        T[2 * n + 1 + k, 2 * n + 1 + k] = -0.5
    T[2 * n, 0] = 1.0
    return T


def conjugate_M(opA: OperatorMatrix, tol: float = 1e-12):
    """Split A into the uncoupled sum (A~1) and difference (A~2) sector blocks.

    Raises if the off-diagonal coupling blocks exceed ``tol`` relative to the
    matrix scale, which signals an assembly bug.
    """
    basis = opA.basis
    n = basis.n
    T = _uv_transform(basis)
    Tinv = np.linalg.inv(T)
    At = T @ opA.entries @ Tinv
    nu = 2 * n
    off = max(np.max(np.abs(At[:nu, nu:])), np.max(np.abs(At[nu:, :nu])))
    scale = max(1.0, np.max(np.abs(At)))
    if off > tol * scale:
        raise ValueError(f"sector coupling {off:.3e} exceeds tolerance (assembly bug?)")
    A1 = OperatorMatrix(entries=At[:nu, :nu].copy(), basis=basis, label="Atilde1")
    A2 = OperatorMatrix(entries=At[nu:, nu:].copy(), basis=basis, label="Atilde2")
    return A1, A2


def assemble_Lq0(state: StationaryState, basis: BasisSpec) -> OperatorMatrix:
    """No-disorder operator on the zero-mean sector (the u block of A~)."""
    A1, _ = conjugate_M(assemble_A(state, basis))
    return OperatorMatrix(entries=A1.entries, basis=basis, label="Lq0")


def _h1_inner_gram(fields_1d: np.ndarray, weight: np.ndarray, grid: Grid) -> np.ndarray:
    """Gram of single-component fields under the weighted H^-1 inner product."""
    if np.any(weight <= 0):
        raise ValueError("weight must be strictly positive")
    m, H0 = weighted_primitive(fields_1d, weight)
    quad = (H0 / weight) @ H0.T * grid.h
    return np.outer(m, m) + quad


def gram_matrix(basis: BasisSpec, weights: DisorderedField) -> np.ndarray:
    """SPD Gram matrix of the disorder-averaged weighted H^-1 inner product."""
    fields = basis.fields()
    G = 0.5 * _h1_inner_gram(fields[:, 0, :], weights.plus, basis.grid)
    G += 0.5 * _h1_inner_gram(fields[:, 1, :], weights.minus, basis.grid)
    G = 0.5 * (G + G.T)
    if np.linalg.eigvalsh(G)[0] <= 0:
        raise ValueError("Gram matrix not positive definite (weight or quadrature error)")
    return G


def gram_composite(basis: BasisSpec, state: StationaryState) -> np.ndarray:
    """Gram of the composite norm: q0-weighted on the sum sector, w-weighted on the difference.

    w = exp(2 K r0 cos)/Z coincides with q0, but the two sectors enter
    through the half-sum and half-difference of the components.
    """
    fields = basis.fields()
    u = 0.5 * (fields[:, 0, :] + fields[:, 1, :])
    v = 0.5 * (fields[:, 0, :] - fields[:, 1, :])
    w = state.q0
    G = _h1_inner_gram(u, state.q0, basis.grid) + _h1_inner_gram(v, w, basis.grid)
    G = 0.5 * (G + G.T)
    if np.linalg.eigvalsh(G)[0] <= 0:
        raise ValueError("composite Gram matrix not positive definite")
    return G


def reflection_matrix(basis: BasisSpec) -> np.ndarray:
    """Matrix of h(theta, omega) -> h(-theta, -omega) on the basis.

    Odd fields satisfy R h = -h.  R swaps cos modes across components,
    swaps-and-negates sin modes, and negates c0.
    """
    n, d = basis.n, basis.dim
    R = np.zeros((d, d))
    R[0, 0] = -1.0
    for k in range(n):
        R[1 + k, 2 * n + 1 + k] = 1.0           # cos_k minus -> cos_k plus
        R[2 * n + 1 + k, 1 + k] = 1.0
        R[1 + n + k, 3 * n + 1 + k] = -1.0      # sin_k minus -> -sin_k plus
        R[3 * n + 1 + k, 1 + n + k] = -1.0
    return R


def eigendecompose(op: OperatorMatrix, cluster_threshold: float = 1e-4) -> SpectralDecomposition:
    """Dense nonsymmetric eigendecomposition, eigenvalues sorted by real part."""
    if not np.all(np.isfinite(op.entries)):
        raise ValueError("operator matrix has non-finite entries")
    lam, vec = np.linalg.eig(op.entries)
    order = np.lexsort((-lam.imag, -lam.real))
    lam, vec = lam[order], vec[:, order]
    outside = np.abs(lam) >= cluster_threshold
    gap = float(np.min(np.abs(lam[outside].real))) if np.any(outside) else 0.0
    return SpectralDecomposition(
        eigenvalues=lam, right_vectors=vec,
        cluster_threshold=cluster_threshold, gap=gap,
    )


def spectral_gap(decomp: SpectralDecomposition) -> float:
    """Distance from the zero cluster to the rest of the spectrum (along the real axis)."""
    return decomp.gap


def lambda_K_no_disorder(state: StationaryState, basis: BasisSpec,
                         cluster_threshold: float = 1e-4) -> float:
    """Spectral gap of the no-disorder operator (the u-sector block)."""
    return eigendecompose(assemble_Lq0(state, basis), cluster_threshold).gap


def a2_gap_bound(state: StationaryState) -> float:
    """The closed-form lower bound exp(-4 K r0)/2 for the difference-sector gap."""
    return 0.5 * np.exp(-4.0 * state.params.K * state.r0)


def jordan_solve(op: OperatorMatrix, kernel_vec: np.ndarray,
                 residual_tol: float = 1e-5) -> np.ndarray:
    """Generalized eigenvector p with L p = kernel_vec, odd-symmetrized.

    Minimum-norm least squares (pseudo-inverse), then projection onto the
    odd symmetry class; the kernel-direction component is whatever the
    minimum-norm condition leaves (downstream quantities are invariant
    under p -> p + c * kernel_vec).  Raises :class:`JordanSolveError`
    when the residual exceeds ``residual_tol`` relative to ``kernel_vec``,
    e.g. on the per-component zero-mass domain where no such p exists.
    """
    sol, *_ = np.linalg.lstsq(op.entries, kernel_vec, rcond=None)
    R = reflection_matrix(op.basis)
    sol = 0.5 * (sol - R @ sol)
    resid = np.linalg.norm(op.entries @ sol - kernel_vec) / np.linalg.norm(kernel_vec)
    if resid > residual_tol:
        raise JordanSolveError(float(resid))
    return sol


def projector_P0(op: OperatorMatrix, kernel_vec: np.ndarray, jordan_vec: np.ndarray,
                 cluster_threshold: float = 1e-4):
    """Spectral projector onto the two-dimensional characteristic space at zero.

    The zero cluster is separated by an ordered real Schur decomposition and
    the invariant-subspace coupling removed with a Sylvester solve.  Returns
    (ell_dq, ell_p, P0): the two covectors are the coordinates of P0 h in
    the basis {kernel_vec, jordan_vec}.
    """
    thr2 = cluster_threshold ** 2
    T, Z, sdim = scipy.linalg.schur(
        op.entries, output="real", sort=lambda re, im: re * re + im * im < thr2
    )
    if sdim != 2:
        raise ValueError(f"zero cluster has size {sdim}, expected 2")
    T11, T12, T22 = T[:2, :2], T[:2, 2:], T[2:, 2:]
    X = scipy.linalg.solve_sylvester(T11, -T22, -T12)
    P0 = Z[:, :2] @ (Z[:, :2].T - X @ Z[:, 2:].T)
    B = np.stack([kernel_vec, jordan_vec], axis=1)
    coords = np.linalg.lstsq(B, P0, rcond=None)[0]
    return coords[0].copy(), coords[1].copy(), P0


def spectral_decomposition(op: OperatorMatrix, state: StationaryState,
                           cluster_threshold: float = 1e-4) -> SpectralDecomposition:
    """Full eigenstructure of L: spectrum, Jordan pair, covectors, projector."""
    basis = op.basis
    decomp = eigendecompose(op, cluster_threshold)
    kernel = basis.from_stack(state.dq().stack())
    decomp.kernel_vec = kernel
    decomp.jordan_vec = jordan_solve(op, kernel)
    decomp.ell_dq, decomp.ell_p, decomp.P0 = projector_P0(
        op, kernel, decomp.jordan_vec, cluster_threshold
    )
    return decomp


def jordan_residual_zero_mass(op: OperatorMatrix, kernel_vec: np.ndarray) -> float:
    """Least-squares residual of L p = dq on the per-component zero-mass domain.

    Dropping the constant-difference vector pins both component masses to
    zero; on that domain the generalized vector does not exist and the
    residual stays far from zero.
    """
    E = op.entries[1:, 1:]
    rhs = kernel_vec[1:]
    sol, *_ = np.linalg.lstsq(E, rhs, rcond=None)
    return float(np.linalg.norm(E @ sol - rhs) / np.linalg.norm(rhs))


def p2_explicit(state: StationaryState, grid: Grid | None = None) -> DisorderedField:
    """Closed-form odd-class field whose image under L is proportional to
    e = -dq cos + q sin.

    Built from two integrals of exp(+-B) with B = -2 (K r (cos - 1) + omega
    theta); the prefactor 1/(1 - exp(4 pi omega)) requires omega0 > 0.
    """
    from .fields import cumulative_exp_integral, tail_exp_integral

    grid = grid or state.grid
    om = state.params.omega0
    if om == 0.0:
        raise ZeroDivisionError("p2 is undefined at omega0 = 0 (no periodic solution)")
    Kr = state.params.K * state.r
    theta = grid.thetas
    comps = []
    for omega in (om, -om):
        # exp(B(u, omega)) = per(u) * exp(-2 omega u), per periodic
        per = np.exp(-2.0 * Kr * (np.cos(theta) - 1.0))
        exp_minus_B = np.exp(2.0 * Kr * (np.cos(theta) - 1.0) + 2.0 * omega * theta)
        cum = cumulative_exp_integral(grid, per, omega)       # int_0^theta e^B
        total = float(tail_exp_integral(grid, per, omega)[0])  # int over the circle
        first = exp_minus_B * total * np.exp(4.0 * np.pi * omega) / (1.0 - np.exp(4.0 * np.pi * omega))
        second = exp_minus_B * cum
        comps.append(first + second)
    return DisorderedField(comps[0], comps[1], grid)
