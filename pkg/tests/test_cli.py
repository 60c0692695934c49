import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from crfve.harness.cli import main, spectrum_paths

SMALL = {"mesh": {"n": 8}, "partition": {"m": 2}, "coefficient": {"frequency": 10}}


def _write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_iterations_exit_zero_and_columns(tmp_path):
    cfg = _write(tmp_path, {**SMALL, "sweep": {"alpha1": [1, 10]}})
    assert main(["iterations", "--config", cfg, "--out", str(tmp_path / "it.csv")]) == 0
    rows = _read(tmp_path / "it.csv")
    assert len(rows) == 2
    assert {"alpha1", "iterations", "cp", "converged", "rel_residual"} <= set(rows[0])
    assert all(r["converged"] == "1" for r in rows)


def test_maxit_gives_exit_two(tmp_path):
    cfg = _write(tmp_path, {**SMALL, "solver": {"maxit": 2}})
    assert main(["iterations", "--config", cfg, "--out", str(tmp_path / "it.csv")]) == 2
    assert _read(tmp_path / "it.csv")[0]["reason"] == "maxit"


def test_bad_input_exit_one(tmp_path, capsys):
    assert main(["mesh-info", "--config", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "x.csv")]) == 1
    cfg = _write(tmp_path, {"solver": {"k": 7}})
    assert main(["iterations", "--config", cfg, "--out", str(tmp_path / "x.csv")]) == 1
    assert "solver.k" in capsys.readouterr().err
    # no --out and no output.path
    assert main(["mesh-info", "--config", _write(tmp_path, SMALL)]) == 1
    # presets are drawn on a fixed grid
    cfg = _write(tmp_path, {"preset": 1, "mesh": {"n": 8}})
    assert main(["iterations", "--config", cfg, "--out", str(tmp_path / "x.csv")]) == 1
    with pytest.raises(SystemExit):
        main(["iterations", "--out", "x.csv"])


def test_output_path_from_config(tmp_path):
    out = tmp_path / "info.csv"
    cfg = _write(tmp_path, {**SMALL, "output": {"path": str(out)}})
    assert main(["mesh-info", "--config", cfg]) == 0
    assert _read(out)[0]["n_dofs"] == "176"


def test_every_subcommand_runs(tmp_path):
    docs = {
        "mesh-info": SMALL,
        "diagnostics": {**SMALL, "sweep": {"alpha1": [1, 10]}},
        "scaling": {**SMALL, "sweep": {"scaling": {"pairs": [[8, 2], [8, 4]]}}},
        "convergence": {**SMALL, "coefficient": {"frequency": 1}, "sweep": {"n": [4, 8]}},
    }
    for cmd, doc in docs.items():
        out = tmp_path / f"{cmd}.csv"
        assert main([cmd, "--config", _write(tmp_path, doc, f"{cmd}.json"),
                     "--out", str(out)]) == 0, cmd
        assert len(_read(out)) >= 1


def test_spectrum_files(tmp_path):
    out = tmp_path / "spec.csv"
    assert main(["spectrum", "--config", _write(tmp_path, SMALL), "--out", str(out)]) == 0
    pa, pt = spectrum_paths(out)
    assert pa.name == "spec_fve.csv" and pt.name == "spec_precond.csv"
    for p in (pa, pt):
        data = np.loadtxt(p, delimiter=",", skiprows=1)
        assert p.read_text().splitlines()[0] == "re,im"
        assert data.shape == (3 * 64 - 16, 2)
        assert np.all(np.diff(data[:, 0]) >= 0)


def test_runs_are_reproducible(tmp_path):
    cfg = _write(tmp_path, {**SMALL, "sweep": {"alpha1": [1, 1e3]}})
    for name in ("a.csv", "b.csv"):
        assert main(["iterations", "--config", cfg, "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, SMALL)
    proc = subprocess.run([sys.executable, "-m", "crfve", "mesh-info", "--config", cfg,
                           "--out", str(tmp_path / "m.csv")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "crfve", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0
    for cmd in ("mesh-info", "diagnostics", "iterations", "scaling", "convergence", "spectrum"):
        assert cmd in proc.stdout


def test_unconverged_norm_estimate_gives_exit_two(tmp_path):
    doc = {**SMALL, "sweep": {"n": [8], "maxiter": 2}}
    with pytest.warns(RuntimeWarning, match="Lanczos"):
        code = main(["diagnostics", "--config", _write(tmp_path, doc), "--out",
                     str(tmp_path / "d.csv")])
    assert code == 2
    assert _read(tmp_path / "d.csv")[0]["converged"] == "0"
