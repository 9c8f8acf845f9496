"""Command-line harness: subcommand dispatch, artifacts, reproducibility.

    kuramoto-fluct <subcommand> --config <file> [--set key=value ...] --out <dir>

Exit codes: 0 success, 2 configuration/validation error, 1 runtime failure
(partial artifacts are flushed and the manifest carries a failure marker).
Identical configurations produce byte-identical CSV/JSON artifacts
regardless of worker count; every random stream derives from (seed, task
index).  KURAMOTO_FLUCT_WORKERS overrides the configured worker count.
"""

from __future__ import annotations

import argparse
import concurrent.futures as _futures
import json
import os
import sys
import time
import traceback

import numpy as np

from . import __version__, kernels
from .config import ConfigError, RunConfig, SUBCOMMANDS, parse_config
from .fields import DisorderedField, Grid
from .mckv import evolve
from .particles import (ParticleEnsemble, fit_drift, init_phases_from_profile,
                        init_phases_uniform, run, sample_disorder)
from .spde import (build_noise, ensemble_variance, estimate_speed, run_spde,
                   sample_initial)
from .spectral import (BasisSpec, a2_gap_bound, assemble_L,
                       jordan_residual_zero_mass, jordan_solve,
                       lambda_K_no_disorder, spectral_decomposition)
from .stationary import (ModelParams, build_stationary, stationarity_residual)
from .svgplot import Series, render_plot

SCHEMA_VERSION = 1


def _fmt(x) -> str:
    return "%.17g" % float(x)


def write_csv(path, header, columns):
    columns = [np.asarray(c) for c in columns]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


class _Artifacts:
    """Collects output files under deterministic hash-stamped names."""

    def __init__(self, cfg: RunConfig, out_dir: str):
        self.cfg = cfg
        self.dir = out_dir
        self.stamp = f"{cfg.subcommand}_{cfg.config_hash()}"
        self.files = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        fname = f"{self.stamp}_{name}"
        self.files.append(fname)
        return os.path.join(self.dir, fname)


def _grid_basis(cfg):
    grid = Grid(M=cfg["M"], n=cfg["n"])
    return grid, BasisSpec(n=cfg["n"], grid=grid)


def _stationary(cfg, grid):
    return build_stationary(ModelParams(cfg["K"], cfg["omega0"]), grid)


# ---------------------------------------------------------------- handlers

def _run_stationary(cfg, art):
    grid, _ = _grid_basis(cfg)
    st = _stationary(cfg, grid)
    write_csv(art.path("profile.csv"),
              ["theta", "q_plus", "q_minus", "q0"],
              [grid.thetas, st.q.plus, st.q.minus, st.q0])
    write_json(art.path("summary.json"), {
        "K": cfg["K"], "omega0": cfg["omega0"], "r": st.r, "r0": st.r0,
        "Z_plus": st.Z_plus, "Z_minus": st.Z_minus,
        "kappa_plus": st.kappa_plus, "kappa_minus": st.kappa_minus,
        "stationarity_residual": stationarity_residual(st),
        "fixed_point_roots": list(st.roots),
    })


def _pde_init(cfg, grid, st):
    uniform = np.full(grid.M, 1.0 / (2.0 * np.pi))
    if cfg["init"] == "uniform":
        return DisorderedField(uniform.copy(), uniform.copy(), grid)
    if cfg["init"] == "seeded_uniform":
        # the flat state is an exact (unstable) equilibrium: seed the first
        # harmonic so the synchronization instability can take off
        seeded = uniform * (1.0 + cfg["eps"] * np.cos(grid.thetas))
        return DisorderedField(seeded.copy(), seeded.copy(), grid)
    return st.q


def _run_pde(cfg, art):
    grid, _ = _grid_basis(cfg)
    st = _stationary(cfg, grid)
    init = _pde_init(cfg, grid, st)
    snapshots = bool(cfg.get("snapshots", False))
    traj = evolve(init, cfg["T"], cfg["dt"], st.params,
                  record_every=cfg["record_every"], keep_snapshots=snapshots)
    write_csv(art.path("trajectory.csv"), ["t", "r", "psi"],
              [traj.times, traj.r, traj.psi])
    if snapshots:
        final = traj.snapshots[-1].density
        write_csv(art.path("density.csv"),
                  ["theta", "q_plus_initial", "q_minus_initial",
                   "q_plus_final", "q_minus_final"],
                  [grid.thetas, init.plus, init.minus, final.plus, final.minus])
    write_json(art.path("summary.json"), {
        "r_final": float(traj.r[-1]), "r_fixed_point": st.r,
        "psi_final": float(traj.psi[-1]),
    })
    return traj


def _particle_run_once(cfg, st, idx, collect_traj=False):
    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg["seed"], spawn_key=(idx,)))
    omega = sample_disorder(cfg["N"], cfg["omega0"], cfg.get("disorder", "iid"), rng=rng)
    if cfg.get("init", "stationary") == "stationary":
        theta = init_phases_from_profile(omega, st, rng=rng)
    else:
        theta = init_phases_uniform(cfg["N"], rng=rng)
    ens = ParticleEnsemble(theta, omega)
    traj = run(ens, cfg["T"], cfg["dt"], cfg["K"], rng=rng,
               record_every=cfg["record_every"])
    t1 = cfg.get("fit_t1") or cfg["T"] / 5.0
    slope, stderr = fit_drift(traj, (t1, cfg["T"]))
    rec = {"alphaN": traj.alphaN, "slope": slope, "stderr": stderr}
    return (rec, traj) if collect_traj else (rec, None)


def _run_particles(cfg, art):
    grid, _ = _grid_basis(cfg)
    st = _stationary(cfg, grid)
    rec, traj = _particle_run_once(cfg, st, 0, collect_traj=True)
    write_csv(art.path("trajectory.csv"),
              ["t", "rN", "psiN_unwrapped", "eta_sin"],
              [traj.times, traj.rN, traj.psiN, traj.observables["eta_sin"]])
    write_json(art.path("summary.json"), {
        "N": cfg["N"], "alphaN": rec["alphaN"],
        "slope": rec["slope"], "stderr": rec["stderr"],
    })
    return traj


def _run_spectrum(cfg, art):
    grid, basis = _grid_basis(cfg)
    st = _stationary(cfg, grid)
    L = assemble_L(st, basis)
    dec = spectral_decomposition(L, st, cfg["cluster_threshold"])
    lam = dec.eigenvalues
    kernel_res = float(np.linalg.norm(L.entries @ dec.kernel_vec)
                       / np.linalg.norm(dec.kernel_vec))
    jordan_res = float(np.linalg.norm(L.entries @ dec.jordan_vec - dec.kernel_vec)
                       / np.linalg.norm(dec.kernel_vec))
    int_p_plus = float(dec.jordan_vec[0])
    om = cfg["omega0"]
    conj = abs(int_p_plus + 1.0 / om) * om if om > 0 else float("nan")
    write_csv(art.path("spectrum.csv"), ["re", "im"], [lam.real, lam.imag])
    write_json(art.path("report.json"), {
        "eigenvalues": [[float(v.real), float(v.imag)] for v in lam[:40]],
        "zero_cluster_size": int(len(dec.zero_cluster)),
        "gap": dec.gap,
        "kernel_residual": kernel_res,
        "jordan_residual": jordan_res,
        "int_p_plus": int_p_plus,
        "conjecture_deviation": conj,
        "lambda_K_no_disorder": lambda_K_no_disorder(st, basis),
        "a2_gap_bound": a2_gap_bound(st),
    })


def _run_jordan(cfg, art):
    grid, basis = _grid_basis(cfg)
    st = _stationary(cfg, grid)
    L = assemble_L(st, basis)
    kernel = basis.from_stack(st.dq().stack())
    p = jordan_solve(L, kernel)
    pf = basis.to_field(p)
    mp, mm = pf.masses()
    om = cfg["omega0"]
    write_json(art.path("report.json"), {
        "jordan_residual": float(np.linalg.norm(L.entries @ p - kernel)
                                 / np.linalg.norm(kernel)),
        "int_p_plus": float(mp), "int_p_minus": float(mm),
        "mass_sum": float(mp + mm),
        "conjecture_deviation": abs(mp + 1.0 / om) * om if om > 0 else float("nan"),
        "zero_mass_domain_residual": jordan_residual_zero_mass(L, kernel),
    })


def _run_spde(cfg, art):
    grid, basis = _grid_basis(cfg)
    st = _stationary(cfg, grid)
    L = assemble_L(st, basis)
    dec = spectral_decomposition(L, st)
    noise = build_noise(st, basis)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg["seed"], spawn_key=(0,)))
    init = sample_initial(basis, z=cfg["z"], scale_x=cfg["scale_x"], rng=rng)
    traj = run_spde(init.eta, cfg["T"], cfg["dt"], L, noise, dec.ell_dq,
                    rng=rng, record_every=cfg["record_every"])
    write_csv(art.path("trajectory.csv"),
              ["t", "ell_dq", "eta_sin", "mass_plus"],
              [traj.times, traj.alpha, traj.eta_sin, traj.mass_plus])
    window = (cfg["T"] / 5.0, cfg["T"])
    est1 = estimate_speed(traj, window)
    est2 = estimate_speed(traj, window, method="eta_sin_slope", r=st.r)
    write_json(art.path("summary.json"), {
        "z": init.z, "int_p_plus": float(dec.jordan_vec[0]),
        "v_predicted": init.z / float(dec.jordan_vec[0]),
        "v_hat_ell_dq": est1.v_hat, "stderr_ell_dq": est1.stderr,
        "v_hat_eta_sin": est2.v_hat, "stderr_eta_sin": est2.stderr,
        "mass_drift": float(np.max(np.abs(traj.mass_plus - traj.mass_plus[0]))),
    })
    return traj


_PARTICLE_POOL = {}


def _particle_pool_init(payload):
    _PARTICLE_POOL.update(payload)


def _particle_pool_task(idx):
    cfg = _PARTICLE_POOL["cfg"]
    st = _PARTICLE_POOL["st"]
    rec, _ = _particle_run_once(cfg, st, idx)
    return idx, rec


def _run_ensemble(cfg, art):
    workers = int(os.environ.get("KURAMOTO_FLUCT_WORKERS", cfg["workers"]))
    if cfg["kind"] == "spde":
        grid, basis = _grid_basis(cfg)
        st = _stationary(cfg, grid)
        L = assemble_L(st, basis)
        dec = spectral_decomposition(L, st)
        noise = build_noise(st, basis)
        mode = "symmetrized" if cfg["mode"] == "symmetrized" else "gaussian_z"
        res = ensemble_variance(
            cfg["draws"], cfg["paths"], L, noise, dec.ell_dq,
            float(dec.jordan_vec[0]), cfg["omega0"], T=cfg["T"], dt=cfg["dt"],
            seed=cfg["seed"], mode=mode, workers=workers,
            record_every=cfg["record_every"])
        write_csv(art.path("draws.csv"), ["z", "v_hat"], [res.zs, res.v_hats])
        write_json(art.path("summary.json"), {
            "draws": cfg["draws"], "paths_per_draw": cfg["paths"],
            "z": [float(v) for v in res.zs],
            "v_hat": [float(v) for v in res.v_hats],
            "var_v": res.var_v,
            "sigma_v_sq_pred": res.sigma_v_sq_pred,
            "sigma_v_sq_conjecture": res.sigma_v_sq_conjecture,
            "int_p_plus": res.int_p_plus,
            "mean_v": float(np.mean(res.v_hats)),
        })
        return res
    # particle ensemble
    grid, _ = _grid_basis(cfg)
    st = _stationary(cfg, grid)
    sub_values = dict(cfg.values)
    sub_values["disorder"] = "symmetrized" if cfg["mode"] == "symmetrized" else "iid"
    sub_values.setdefault("init", "stationary")
    sub_cfg = RunConfig(subcommand="particles", values=sub_values)
    tasks = list(range(cfg["draws"]))
    recs = [None] * cfg["draws"]
    payload = {"cfg": sub_cfg, "st": st}
    if workers > 1:
        with _futures.ProcessPoolExecutor(max_workers=workers,
                                          initializer=_particle_pool_init,
                                          initargs=(payload,)) as pool:
            for idx, rec in pool.map(_particle_pool_task, tasks, chunksize=1):
                recs[idx] = rec
    else:
        _particle_pool_init(payload)
        for idx in tasks:
            recs[idx] = _particle_pool_task(idx)[1]
    write_csv(art.path("runs.csv"),
              ["alphaN", "slope", "stderr"],
              [[r["alphaN"] for r in recs], [r["slope"] for r in recs],
               [r["stderr"] for r in recs]])
    write_json(art.path("summary.json"), {
        "runs": [{k: float(v) for k, v in r.items()} for r in recs],
        "mean_abs_slope": float(np.mean([abs(r["slope"]) for r in recs])),
    })
    return recs


def _run_figures(cfg, art):
    # synchronization of the mean-field evolution (near-flat start)
    pde_cfg = parse_config("pde", overrides=[
        f"K={max(cfg['K'], 6.0)}", "omega0=1.0", "T=10", "dt=0.001",
        f"seed={cfg['seed']}", "init=seeded_uniform", "record_every=50",
        f"M={cfg['M']}", f"n={cfg['n']}",
    ])
    traj = _run_pde(pde_cfg, art)
    render_plot(art.path("sync.svg"),
                [Series(traj.times, traj.r, "r(t)")],
                title="Synchronization of the mean-field evolution",
                xlabel="t", ylabel="r")

    # sample-dependent rotation of the finite ensemble
    grid, _ = _grid_basis(cfg)
    st = _stationary(cfg, grid)
    series, all_t, all_psi, run_idx = [], [], [], []
    p_values = dict(cfg.values)
    p_values.update({"N": 400, "dt": 0.01, "T": 60.0, "record_every": 20,
                     "disorder": "iid", "init": "stationary"})
    p_cfg = RunConfig("particles", p_values)
    for i in range(cfg["runs"]):
        rec, trj = _particle_run_once(p_cfg, st, i, collect_traj=True)
        series.append(Series(trj.times, trj.psiN, f"run {i}"))
        all_t.append(trj.times)
        all_psi.append(trj.psiN)
        run_idx.append(np.full(trj.times.size, i))
    write_csv(art.path("psi_runs.csv"), ["run", "t", "psiN"],
              [np.concatenate(run_idx), np.concatenate(all_t), np.concatenate(all_psi)])
    render_plot(art.path("psi_runs.svg"), series,
                title="Center of synchronization, independent disorder samples",
                xlabel="t", ylabel="psi_N")

    # fluctuation-field trajectories for several asymmetry draws
    basis = BasisSpec(n=cfg["n"], grid=grid)
    L = assemble_L(st, basis)
    dec = spectral_decomposition(L, st)
    noise = build_noise(st, basis)
    fseries, ft, fsin, fidx = [], [], [], []
    for i in range(cfg["runs"]):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg["seed"],
                                                           spawn_key=(500 + i,)))
        init = sample_initial(basis, mode="gaussian_z", rng=rng)
        strj = run_spde(init.eta, 40.0, 0.05, L, noise, dec.ell_dq,
                        rng=rng, record_every=8)
        fseries.append(Series(strj.times, strj.eta_sin, f"z={init.z:+.2f}"))
        ft.append(strj.times)
        fsin.append(strj.eta_sin)
        fidx.append(np.full(strj.times.size, i))
    write_csv(art.path("eta_sin_runs.csv"), ["run", "t", "eta_sin"],
              [np.concatenate(fidx), np.concatenate(ft), np.concatenate(fsin)])
    render_plot(art.path("eta_sin_runs.svg"), fseries,
                title="Fluctuation field against sin, independent asymmetry draws",
                xlabel="t", ylabel="eta_t(sin)")


_HANDLERS = {
    "stationary": _run_stationary,
    "pde": _run_pde,
    "particles": _run_particles,
    "spectrum": _run_spectrum,
    "jordan": _run_jordan,
    "spde": _run_spde,
    "ensemble": _run_ensemble,
    "figures": _run_figures,
}


def run_subcommand(cfg: RunConfig, out_dir: str | None = None):
    """Execute one subcommand; returns (manifest dict, artifact directory)."""
    out = out_dir or cfg["out"]
    art = _Artifacts(cfg, out)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "subcommand": cfg.subcommand,
        "config": {k: v for k, v in cfg.canonical_items()},
        "config_hash": cfg.config_hash(),
        "package_version": __version__,
        "numpy_version": np.__version__,
        "kernel_backend": kernels.BACKEND,
        "status": "ok",
        "artifacts": art.files,
    }
    t0 = time.time()
    try:
        _HANDLERS[cfg.subcommand](cfg, art)
    except Exception:
        manifest["status"] = "failed"
        manifest["error"] = traceback.format_exc(limit=20)
        raise
    finally:
        manifest["wall_seconds"] = time.time() - t0
        with open(os.path.join(out, f"{art.stamp}_manifest.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return manifest, out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kuramoto-fluct",
        description="Disordered mean-field rotator toolkit: stationary states, "
                    "spectra, and fluctuation dynamics.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="key = value config file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable; wins over file)")
        sp.add_argument("--out", default=None, help="output directory")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = parse_config(args.subcommand, args.config, args.set)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        manifest, out = run_subcommand(cfg, args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure: manifest already marked
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(manifest['artifacts']) + 1} files to {out} "
          f"[{manifest['config_hash']}]")
    return 0


if __name__ == "__main__":
    sys.exit(main())
