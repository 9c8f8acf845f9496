import filecmp
import json
import os

import numpy as np
import pytest

from kuramoto_fluct.cli import main, run_subcommand
from kuramoto_fluct.config import ConfigError, parse_config


def test_parse_defaults():
    cfg = parse_config("pde", overrides=["K=4", "omega0=0.5"])
    assert cfg["M"] == 256 and cfg["n"] == 32
    assert cfg["dt"] == pytest.approx(1e-3)
    assert cfg["seed"] == 0


def test_parse_rejects_bad_values(tmp_path):
    with pytest.raises(ConfigError, match="K"):
        parse_config("stationary", overrides=["K=-1"])
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("stationary", overrides=["bogus=3"])
    f = tmp_path / "c.cfg"
    f.write_text("K = 4\nK = 5\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("stationary", path=str(f))
    f2 = tmp_path / "c2.cfg"
    f2.write_text("M = 64\nn = 32\n")
    with pytest.raises(ConfigError, match="M="):
        parse_config("stationary", path=str(f2))


def test_config_file_and_overrides(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# comment\nK = 4.0\nomega0 = 0.5  # inline comment\n")
    cfg = parse_config("stationary", path=str(f), overrides=["omega0=0.25"])
    assert cfg["K"] == 4.0
    assert cfg["omega0"] == 0.25  # flags win


def test_exit_codes(tmp_path):
    assert main(["stationary", "--set", "K=-3", "--out", str(tmp_path)]) == 2
    assert main(["stationary", "--set", "K=2", "--set", "omega0=0.2",
                 "--set", "M=128", "--set", "n=16",
                 "--out", str(tmp_path)]) == 0


def _data_files(d):
    return sorted(f for f in os.listdir(d)
                  if f.endswith((".csv", ".json")) and "manifest" not in f)


def test_reproducibility_byte_identical(tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    args = ["spde", "--set", "T=20", "--set", "omega0=0.2", "--set", "n=16",
            "--set", "M=128", "--set", "seed=5"]
    assert main(args + ["--out", a]) == 0
    assert main(args + ["--out", b]) == 0
    files = _data_files(a)
    assert files == _data_files(b)
    for f in files:
        assert filecmp.cmp(os.path.join(a, f), os.path.join(b, f), shallow=False), f


def test_ensemble_worker_count_invariance(tmp_path):
    outs = {}
    for wk in (1, 2):
        out = str(tmp_path / f"w{wk}")
        rc = main(["ensemble", "--set", "kind=particles", "--set", "draws=4",
                   "--set", "N=60", "--set", "T=4", "--set", "dt=0.02",
                   "--set", "M=128", "--set", "n=16",
                   "--set", f"workers={wk}", "--set", "seed=7", "--out", out])
        assert rc == 0
        outs[wk] = out
    for f in _data_files(outs[1]):
        assert filecmp.cmp(os.path.join(outs[1], f), os.path.join(outs[2], f),
                           shallow=False), f


def test_manifest_contents(tmp_path):
    out = str(tmp_path)
    cfg = parse_config("stationary", overrides=["K=2.5", "omega0=0.3",
                                                "M=128", "n=16"])
    manifest, _ = run_subcommand(cfg, out)
    assert manifest["status"] == "ok"
    assert manifest["config"]["K"] == 2.5
    mf = [f for f in os.listdir(out) if f.endswith("manifest.json")]
    assert len(mf) == 1
    on_disk = json.load(open(os.path.join(out, mf[0])))
    assert on_disk["config_hash"] == cfg.config_hash()
    assert set(on_disk["artifacts"]) == set(manifest["artifacts"])


def test_spectrum_report(tmp_path):
    out = str(tmp_path)
    rc = main(["spectrum", "--set", "K=4", "--set", "omega0=0.2",
               "--set", "n=32", "--out", out])
    assert rc == 0
    rep = [f for f in os.listdir(out) if f.endswith("report.json")][0]
    data = json.load(open(os.path.join(out, rep)))
    assert data["zero_cluster_size"] == 2
    assert data["gap"] > 0
    assert data["kernel_residual"] < 1e-6


def test_figures_plots_match_csv(tmp_path):
    out = str(tmp_path)
    rc = main(["figures", "--set", "runs=2", "--set", "M=128", "--set", "n=16",
               "--set", "T=4", "--out", out])
    assert rc == 0
    svgs = [f for f in os.listdir(out) if f.endswith(".svg")]
    assert len(svgs) == 3
    # the psi trajectories plotted are exactly the CSV rows
    csvf = [f for f in os.listdir(out) if f.endswith("psi_runs.csv")][0]
    rows = np.loadtxt(os.path.join(out, csvf), delimiter=",", skiprows=1)
    svgf = [f for f in svgs if "psi_runs" in f][0]
    content = open(os.path.join(out, svgf)).read()
    assert content.count("<polyline") == 2
    n_run0 = int(np.sum(rows[:, 0] == 0))
    first_poly = content.split("<polyline points=\"")[1].split('"')[0]
    assert len(first_poly.split()) == n_run0
