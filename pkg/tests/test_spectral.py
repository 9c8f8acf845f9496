import numpy as np
import pytest

from kuramoto_fluct.fields import DisorderedField, Grid, integrate, spectral_diff
from kuramoto_fluct.spectral import (BasisSpec, JordanSolveError, a2_gap_bound,
                                     assemble_A, assemble_B, assemble_L,
                                     assemble_Lq0, conjugate_M, eigendecompose,
                                     gram_composite, gram_matrix,
                                     jordan_residual_zero_mass, jordan_solve,
                                     lambda_K_no_disorder, p2_explicit,
                                     projector_P0, reflection_matrix,
                                     spectral_decomposition, spectral_gap)
from kuramoto_fluct.stationary import ModelParams, build_stationary, mean_field

GRID = Grid(M=256, n=48)


@pytest.fixture(scope="module")
def state():
    return build_stationary(ModelParams(4.0, 0.2), GRID)


@pytest.fixture(scope="module")
def basis():
    return BasisSpec(n=48, grid=GRID)


@pytest.fixture(scope="module")
def op_L(state, basis):
    return assemble_L(state, basis)


@pytest.fixture(scope="module")
def kernel_vec(state, basis):
    return basis.from_stack(state.dq().stack())


@pytest.fixture(scope="module")
def jordan_vec(op_L, kernel_vec):
    return jordan_solve(op_L, kernel_vec)


def test_basis_roundtrip(basis):
    rng = np.random.default_rng(0)
    c = rng.standard_normal(basis.dim)
    back = basis.from_stack(basis.to_stack(c))
    assert np.max(np.abs(back - c)) < 1e-12


def test_kernel_column(op_L, kernel_vec):
    res = np.linalg.norm(op_L.entries @ kernel_vec) / np.linalg.norm(kernel_vec)
    assert res < 1e-6


def test_operator_split(state, basis, op_L):
    A = assemble_A(state, basis)
    B = assemble_B(state, basis)
    assert np.max(np.abs(A.entries + B.entries - op_L.entries)) < 1e-12
    # no disorder: the perturbation vanishes to solver roundoff relative to
    # the operator scale (the q = q0 difference is pure floating-point noise)
    st0 = build_stationary(ModelParams(4.0, 0.0), GRID)
    B0 = assemble_B(st0, basis)
    L0 = assemble_L(st0, basis)
    assert np.max(np.abs(B0.entries)) < 1e-10 * np.max(np.abs(L0.entries))


def test_column_masses_vanish(op_L, basis):
    cols = basis.to_stack(op_L.entries.T)
    mass_p = integrate(cols[:, 0, :])
    mass_m = integrate(cols[:, 1, :])
    scale = np.linalg.norm(op_L.entries, axis=0) + 1.0
    assert np.max(np.abs(mass_p) / scale) < 1e-12
    assert np.max(np.abs(mass_m) / scale) < 1e-12


def test_constant_difference_column(state, basis, op_L):
    # for h constant in theta the image is -c(omega) d/dtheta of the mean field
    c0 = np.zeros(basis.dim)
    c0[0] = 1.0
    img = basis.to_stack(op_L.entries @ c0)
    V = mean_field(state.q, state.params.K)
    dV = spectral_diff(V)
    expected_p = -dV / (2 * np.pi)
    assert np.max(np.abs(img[0] - expected_p)) < 1e-8
    assert np.max(np.abs(img[1] + expected_p)) < 1e-8


def test_no_disorder_reduction_matches_Lq0(basis):
    # at omega0 = 0 the averaged sector of L is the no-disorder operator
    st0 = build_stationary(ModelParams(4.0, 0.0), GRID)
    L0 = assemble_L(st0, basis)
    A1, _ = conjugate_M(assemble_A(st0, basis))
    T = np.zeros((basis.dim, basis.dim))
    # embed a u-sector vector as an equal couple and reduce back
    rng = np.random.default_rng(1)
    u = rng.standard_normal(2 * basis.n)
    couple = np.concatenate([[0.0], u, u])
    img = L0.entries @ couple
    img_u = 0.5 * (img[1:2 * basis.n + 1] + img[2 * basis.n + 1:])
    scale = np.max(np.abs(A1.entries @ u))
    assert np.max(np.abs(img_u - A1.entries @ u)) < 1e-9 * scale
    assert abs(img[0]) < 1e-12


def test_conjugation_sectors(state, basis):
    A1, A2 = conjugate_M(assemble_A(state, basis))  # raises above 1e-12 coupling
    # difference-sector kernel is the tilted exponential weight
    w = state.q0
    vhat = np.fft.rfft(w) / GRID.M
    a = 2 * vhat[1:basis.n + 1].real
    b = -2 * vhat[1:basis.n + 1].imag
    wv = np.concatenate([[1.0], a, b])
    assert np.linalg.norm(A2.entries @ wv) / np.linalg.norm(wv) < 1e-8
    # averaged-sector kernel is the derivative of the no-disorder profile
    dq0 = spectral_diff(state.q0)
    vhat = np.fft.rfft(dq0) / GRID.M
    u = np.concatenate([2 * vhat[1:basis.n + 1].real, -2 * vhat[1:basis.n + 1].imag])
    assert np.linalg.norm(A1.entries @ u) / np.linalg.norm(u) < 1e-6


def test_gram_flat_weight_diagonal(basis):
    flat = DisorderedField.constant(1 / (2 * np.pi), 1 / (2 * np.pi), GRID)
    G = gram_matrix(basis, flat)
    assert np.linalg.eigvalsh(G)[0] > 0
    k = np.arange(1, basis.n + 1, dtype=float)
    # trig-mode diagonal scales as 1/k^2 (value pi^2/k^2 per component mode)
    diag_cos = np.diag(G)[1:basis.n + 1]
    assert np.allclose(diag_cos * k ** 2, np.pi ** 2, rtol=1e-12)
    off = G - np.diag(np.diag(G))
    assert np.max(np.abs(off)) < 1e-12


def test_gram_rejects_nonpositive_weight(basis):
    bad = DisorderedField(np.full(GRID.M, -0.1), np.full(GRID.M, 0.1), GRID)
    with pytest.raises(ValueError):
        gram_matrix(basis, bad)


def test_A_selfadjoint_L_not(state, basis, op_L):
    Gc = gram_composite(basis, state)
    A = assemble_A(state, basis)
    SA = Gc @ A.entries
    assert np.linalg.norm(SA - SA.T) / np.linalg.norm(SA) < 1e-8
    SL = Gc @ op_L.entries
    assert np.linalg.norm(SL - SL.T) / np.linalg.norm(SL) > 1e-3


def test_eigendecompose_diagonal_trivial():
    d = np.diag([-3.0, -1.0, -2.0])
    basis = BasisSpec(n=48, grid=GRID)
    from kuramoto_fluct.spectral import OperatorMatrix
    dec = eigendecompose(OperatorMatrix(d, basis, "L"), 1e-8)
    assert np.allclose(sorted(dec.eigenvalues.real), [-3, -2, -1])
    assert dec.gap == pytest.approx(1.0)


def test_zero_cluster_and_gap(op_L):
    dec = eigendecompose(op_L, 1e-4)
    assert len(dec.zero_cluster) == 2
    outside = dec.eigenvalues[np.abs(dec.eigenvalues) >= 1e-4]
    assert np.max(outside.real) < 0
    assert spectral_gap(dec) > 0.5


def test_Lq0_spectrum_real_simple_zero(state, basis):
    dec = eigendecompose(assemble_Lq0(state, basis), 1e-8)
    assert np.max(np.abs(dec.eigenvalues.imag)) < 1e-8
    assert np.sum(np.abs(dec.eigenvalues) < 1e-7) == 1
    assert np.max(np.sort(dec.eigenvalues.real)[:-1]) < 0


def test_jordan_vector(op_L, kernel_vec, jordan_vec, basis):
    res = np.linalg.norm(op_L.entries @ jordan_vec - kernel_vec)
    assert res / np.linalg.norm(kernel_vec) < 1e-6
    pf = basis.to_field(jordan_vec)
    mp, mm = pf.masses()
    assert abs(mp + mm) < 1e-10
    # conjectured component mass -1/omega0, at omega0 = 0.2
    assert abs(mp + 5.0) * 0.2 < 0.01
    # odd symmetry class
    R = reflection_matrix(basis)
    assert np.max(np.abs(R @ jordan_vec + jordan_vec)) < 1e-10


def test_jordan_requires_mass_freedom(op_L, kernel_vec):
    # on the per-component zero-mass domain the generalized vector is gone
    res = jordan_residual_zero_mass(op_L, kernel_vec)
    assert res > 1e-2
    reduced = op_L.entries[1:, 1:]
    from kuramoto_fluct.spectral import OperatorMatrix
    with pytest.raises(JordanSolveError):
        sub = OperatorMatrix(op_L.entries.copy(), op_L.basis, "L")
        sub.entries[:, 0] = 0.0
        sub.entries[0, :] = 0.0
        jordan_solve(sub, kernel_vec)


def test_truncation_convergence(state):
    kernel_res, jordan_res = [], []
    for n in (16, 24, 32, 48):
        b = BasisSpec(n=n, grid=GRID)
        L = assemble_L(state, b)
        k = b.from_stack(state.dq().stack())
        kernel_res.append(np.linalg.norm(L.entries @ k) / np.linalg.norm(k))
        p = jordan_solve(L, k, residual_tol=1.0)
        jordan_res.append(np.linalg.norm(L.entries @ p - k) / np.linalg.norm(k))
    floor = 5e-8
    for seq in (kernel_res, jordan_res):
        for a, b_ in zip(seq, seq[1:]):
            assert b_ < max(0.5 * a, floor)
        assert seq[-1] < 1e-6


def test_p2_proportionality(state, basis, op_L):
    p2 = p2_explicit(state)
    p2c = basis.from_stack(p2.stack())
    img = op_L.entries @ p2c
    t = GRID.thetas
    e = DisorderedField(
        -spectral_diff(state.q.plus) * np.cos(t) + state.q.plus * np.sin(t),
        -spectral_diff(state.q.minus) * np.cos(t) + state.q.minus * np.sin(t), GRID)
    ec = basis.from_stack(e.stack())
    cs = float(img @ ec / (np.linalg.norm(img) * np.linalg.norm(ec)))
    assert abs(cs) > 1 - 1e-6  # proportional (the constant is negative)
    # odd class and periodic seam
    R = reflection_matrix(basis)
    assert np.max(np.abs(R @ p2c + p2c)) / np.max(np.abs(p2c)) < 1e-8
    recon = basis.to_field(p2c)
    assert np.max(np.abs(recon.plus - p2.plus)) / np.max(np.abs(p2.plus)) < 1e-8


def test_p2_requires_disorder():
    st0 = build_stationary(ModelParams(4.0, 0.0), GRID)
    with pytest.raises(ZeroDivisionError):
        p2_explicit(st0)


def test_projector(op_L, kernel_vec, jordan_vec):
    ell_dq, ell_p, P0 = projector_P0(op_L, kernel_vec, jordan_vec)
    assert np.max(np.abs(P0 @ P0 - P0)) < 1e-10
    assert ell_dq @ kernel_vec == pytest.approx(1.0, abs=1e-8)
    assert abs(ell_dq @ jordan_vec) < 1e-8
    assert abs(ell_p @ kernel_vec) < 1e-8
    assert ell_p @ jordan_vec == pytest.approx(1.0, abs=1e-8)
    # mass formula on random domain vectors
    rng = np.random.default_rng(5)
    hs = rng.standard_normal((100, kernel_vec.size))
    lhs = hs @ ell_p
    rhs = hs[:, 0] / jordan_vec[0]
    assert np.max(np.abs(lhs - rhs) / np.abs(rhs)) < 1e-8
    assert np.max(np.abs(ell_p @ op_L.entries)) < 1e-10
    # nilpotent 2x2 block in the Jordan pair coordinates
    B = np.stack([kernel_vec, jordan_vec], axis=1)
    PLP = np.linalg.lstsq(B, P0 @ op_L.entries @ P0 @ B, rcond=None)[0]
    assert np.max(np.abs(PLP - np.array([[0.0, 1.0], [0.0, 0.0]]))) < 1e-6


def test_ell_p_component_consistency(basis, jordan_vec):
    # int h_plus / int p_plus = int h_minus / int p_minus on the domain
    pf = basis.to_field(jordan_vec)
    mp, mm = pf.masses()
    rng = np.random.default_rng(6)
    for _ in range(20):
        h = basis.to_field(rng.standard_normal(basis.dim))
        hp, hm = h.masses()
        assert hp / mp == pytest.approx(hm / mm, abs=1e-10)


def test_gap_companions(state, basis):
    lamK0 = lambda_K_no_disorder(state, basis)
    assert lamK0 > 1.0
    bound = a2_gap_bound(state)
    assert bound == pytest.approx(0.5 * np.exp(-16 * state.r0), rel=1e-12)
    _, A2 = conjugate_M(assemble_A(state, basis))
    gap2 = eigendecompose(A2, 1e-8).gap
    assert gap2 >= bound


def test_gap_limit_no_disorder(basis):
    st0 = build_stationary(ModelParams(4.0, 0.0), GRID)
    L0 = assemble_L(st0, basis)
    A1, A2 = conjugate_M(assemble_A(st0, basis))
    g = eigendecompose(L0, 1e-6).gap
    g1 = eigendecompose(A1, 1e-6).gap
    g2 = eigendecompose(A2, 1e-6).gap
    assert g == pytest.approx(min(g1, g2), abs=1e-8)


def test_gap_trend_small_disorder(basis):
    gaps = {}
    for om in (0.02, 0.05, 0.1):
        st = build_stationary(ModelParams(4.0, om), GRID)
        gaps[om] = eigendecompose(assemble_L(st, basis), 1e-4).gap
    st0 = build_stationary(ModelParams(4.0, 0.0), GRID)
    A1, A2 = conjugate_M(assemble_A(st0, basis))
    limit = min(eigendecompose(A1, 1e-6).gap, eigendecompose(A2, 1e-6).gap)
    devs = [abs(gaps[om] - limit) for om in (0.02, 0.05, 0.1)]
    assert devs[0] < devs[2]          # approaching the no-disorder gap
    assert devs[0] / limit < 0.05


def test_B_perturbation_trend():
    import scipy.linalg
    norms = {}
    basis32 = BasisSpec(n=32, grid=GRID)
    for om in (0.05, 0.1, 0.2):
        st = build_stationary(ModelParams(4.0, om), GRID)
        B = assemble_B(st, basis32)
        Gc = gram_composite(basis32, st)
        C = scipy.linalg.cholesky(Gc, lower=False)
        Bt = C @ B.entries @ np.linalg.inv(C)
        norms[om] = np.linalg.norm(Bt, 2)
    ratios = [norms[om] / om for om in (0.05, 0.1, 0.2)]
    assert max(ratios) / min(ratios) < 1.5  # operator norm scales like omega0


def test_odd_even_block_structure(op_L, basis):
    R = reflection_matrix(basis)
    assert np.max(np.abs(R @ R - np.eye(basis.dim))) == 0.0
    comm = R @ op_L.entries @ R - op_L.entries
    assert np.max(np.abs(comm)) / np.max(np.abs(op_L.entries)) < 1e-12
