import numpy as np
import pytest

from kuramoto_fluct.fields import DisorderedField, Grid, integrate
from kuramoto_fluct.mckv import PdeState, evolve, rhs, step_imex
from kuramoto_fluct.stationary import ModelParams, build_stationary, solve_r

GRID = Grid(M=256, n=32)


def _uniform():
    return DisorderedField.constant(1 / (2 * np.pi), 1 / (2 * np.pi), GRID)


def test_rhs_uniform_no_disorder_is_stationary():
    out = rhs(PdeState(_uniform()), ModelParams(3.0, 0.0))
    assert np.max(np.abs(out.plus)) < 1e-14
    assert np.max(np.abs(out.minus)) < 1e-14


def test_rhs_vanishes_at_stationary_profile():
    st = build_stationary(ModelParams(4.0, 0.5), GRID)
    out = rhs(PdeState(st.q), st.params)
    assert max(np.max(np.abs(out.plus)), np.max(np.abs(out.minus))) < 1e-6


def test_rhs_integrates_to_zero():
    rng = np.random.default_rng(0)
    dens = np.abs(rng.standard_normal(GRID.M)) + 0.5
    dens = dens / integrate(dens)
    f = DisorderedField(dens, dens[::-1].copy(), GRID)
    out = rhs(PdeState(f), ModelParams(2.0, 1.0))
    assert abs(integrate(out.plus)) < 1e-12
    assert abs(integrate(out.minus)) < 1e-12


def test_step_keeps_stationary_profile():
    st = build_stationary(ModelParams(4.0, 0.5), GRID)
    state = PdeState(st.q)
    for _ in range(10):
        state = step_imex(state, 0.01, st.params)
    assert np.max(np.abs(state.density.plus - st.q.plus)) < 1e-6


def test_step_mass_exact():
    rng = np.random.default_rng(1)
    dens = np.abs(rng.standard_normal(GRID.M)) + 0.5
    dens = dens / integrate(dens)
    state = PdeState(DisorderedField(dens.copy(), dens.copy(), GRID))
    for _ in range(50):
        state = step_imex(state, 1e-3, ModelParams(5.0, 0.8))
    mp, mm = state.density.masses()
    assert abs(mp - 1.0) < 1e-12 and abs(mm - 1.0) < 1e-12


def test_step_rejects_bad_dt():
    with pytest.raises(ValueError):
        step_imex(PdeState(_uniform()), -0.1, ModelParams(2.0, 0.0))


def test_dt_self_convergence():
    # first order in time: halving dt halves the defect against a fine run
    params = ModelParams(4.0, 0.5)
    st = build_stationary(params, GRID)
    init = DisorderedField(st.q.plus * (1 + 0.05 * np.cos(GRID.thetas)),
                           st.q.minus * (1 + 0.05 * np.cos(GRID.thetas)), GRID)
    init = DisorderedField(init.plus / integrate(init.plus),
                           init.minus / integrate(init.minus), GRID)
    T = 0.5
    results = {}
    for dt in (2e-3, 1e-3, 5e-4):
        state = PdeState(init)
        for _ in range(int(round(T / dt))):
            state = step_imex(state, dt, params)
        results[dt] = state.density.plus
    e1 = np.max(np.abs(results[2e-3] - results[5e-4]))
    e2 = np.max(np.abs(results[1e-3] - results[5e-4]))
    assert 1.5 < e1 / e2 < 4.0


def test_evolve_stationary_is_stable():
    st = build_stationary(ModelParams(4.0, 0.5), GRID)
    traj = evolve(st.q, 50.0, 0.01, st.params, record_every=100)
    assert np.max(np.abs(traj.r - st.r)) < 1e-5


def test_evolve_rotation_equivariance():
    params = ModelParams(4.0, 0.5)
    st = build_stationary(params, GRID)
    bump = 1 + 0.1 * np.cos(GRID.thetas) + 0.05 * np.sin(2 * GRID.thetas)
    base = DisorderedField(st.q.plus * bump / integrate(st.q.plus * bump),
                           st.q.minus * bump / integrate(st.q.minus * bump), GRID)
    shift = 32
    theta0 = 2 * np.pi * shift / GRID.M
    shifted = DisorderedField(np.roll(base.plus, shift), np.roll(base.minus, shift), GRID)
    t1 = evolve(base, 2.0, 1e-3, params, record_every=200, keep_snapshots=True)
    t2 = evolve(shifted, 2.0, 1e-3, params, record_every=200, keep_snapshots=True)
    assert np.allclose(t2.r, t1.r, atol=1e-8)
    assert np.allclose(t2.psi, t1.psi + theta0, atol=1e-8)
    final1 = t1.snapshots[-1].density
    final2 = t2.snapshots[-1].density
    assert np.max(np.abs(final2.plus - np.roll(final1.plus, shift))) < 1e-8


def test_evolve_preserves_even_symmetry():
    params = ModelParams(4.0, 0.5)
    st = build_stationary(params, GRID)
    bump = 1 + 0.1 * np.cos(GRID.thetas)
    init = DisorderedField(st.q.plus * bump / integrate(st.q.plus * bump),
                           st.q.minus * bump[::-1].copy(), GRID)
    init = DisorderedField(init.plus, np.roll(init.plus[::-1], 1), GRID)  # exact even pair
    traj = evolve(init, 2.0, 1e-3, params, record_every=200, keep_snapshots=True)
    final = traj.snapshots[-1].density
    refl = final.reflected()
    assert np.max(np.abs(final.plus - refl.plus)) < 1e-8


def test_evolve_positivity_moderate_dt():
    params = ModelParams(6.0, 1.0)
    uniform = _uniform()
    seeded = DisorderedField(uniform.plus * (1 + 1e-3 * np.cos(GRID.thetas)),
                             uniform.minus * (1 + 1e-3 * np.cos(GRID.thetas)), GRID)
    traj = evolve(seeded, 6.0, 1e-3, params, record_every=500, keep_snapshots=True)
    for snap in traj.snapshots:
        assert snap.density.plus.min() > 0
        assert snap.density.minus.min() > 0


def test_synchronization_run_reaches_fixed_point():
    # near-flat start at K=6, omega0=1: the instability saturates by t=6
    params = ModelParams(6.0, 1.0)
    uniform = _uniform()
    seeded = DisorderedField(uniform.plus * (1 + 1e-3 * np.cos(GRID.thetas)),
                             uniform.minus * (1 + 1e-3 * np.cos(GRID.thetas)), GRID)
    traj = evolve(seeded, 6.0, 1e-3, params, record_every=100)
    r_target = solve_r(6.0, 1.0, grid=GRID)
    assert abs(traj.r[-1] - r_target) / r_target < 0.1


def test_blowup_detection():
    bad = DisorderedField(np.full(GRID.M, 1e11), np.full(GRID.M, 1e11), GRID)
    with pytest.raises(FloatingPointError):
        state = PdeState(bad)
        for _ in range(100):
            state = step_imex(state, 0.5, ModelParams(50.0, 0.0))
