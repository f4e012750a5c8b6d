import json
import subprocess
import sys

import numpy as np
import pytest

from quadcurl.cli import ConfigError, main, parse_config, read_config_file
from quadcurl.mesh import generate_box_mesh
from quadcurl.msh import save_msh


def run(tmp_path, *args):
    return main([*args, "--out-dir", str(tmp_path)])


def test_mesh_info(tmp_path, capsys):
    assert run(tmp_path, "mesh-info", "--mesh-n", "1") == 0
    info = json.loads((tmp_path / "mesh_info.json").read_text())
    assert info["n_tets"] == 6 and info["n_edges"] == 19 and info["n_boundary_faces"] == 12
    assert json.loads(capsys.readouterr().out) == info


def test_check_element_passes(tmp_path):
    assert run(tmp_path, "check-element", "--trials", "20") == 0
    data = json.loads((tmp_path / "check_element.json").read_text())
    assert all(c["passed"] for c in data["checks"])


def test_sign_flip_detected(tmp_path, capsys):
    assert run(tmp_path, "check-element", "--trials", "5", "--inject-sign-flip", "13") == 1
    assert "failed" in capsys.readouterr().err


@pytest.mark.parametrize("args", [
    ["check-element", "--trials", "0"],
    ["solve", "--alpha", "0"],
    ["solve", "--gamma", "-1"],
    ["convergence", "--levels", "4,2"],
    ["convergence", "--levels", "a,b"],
    ["solve", "--mesh-n", "0"],
    ["solve", "--mesh-n", "2", "--mesh-file", "x.msh"],
    ["solve", "--tol", "0"],
    ["bogus"],
    ["solve", "--config", "/nonexistent/cfg"],
])
def test_config_errors_exit_2(args, capsys):
    assert main(args) == 2


def test_missing_mesh_file_exit_2(tmp_path):
    assert main(["solve", "--mesh-file", str(tmp_path / "missing.msh")]) == 2


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\nalpha = 2.5\nbeta=0.5\nlevels = 1,2\nzero-forcing = yes\n")
    c = parse_config(["convergence", "--config", str(cfg), "--beta", "3"])
    assert (c.alpha, c.beta, c.levels, c.zero_forcing) == (2.5, 3.0, [1, 2], True)
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n")
    with pytest.raises(ConfigError, match="unknown key"):
        read_config_file(bad)
    bad.write_text("alpha\n")
    with pytest.raises(ConfigError, match="key=value"):
        read_config_file(bad)


def test_solve_report(tmp_path):
    assert run(tmp_path, "solve", "--mesh-n", "2") == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    for key in ("mesh", "params", "load", "solver", "errors", "exact_norms", "divergence", "face_jumps"):
        assert key in rep
    assert rep["solver"]["converged"] and rep["solver"]["residual"] <= 1e-10
    assert rep["face_jumps"]["relative"] < 1e-10
    sol = json.loads((tmp_path / "solution.json").read_text())
    assert len(sol) == rep["mesh"]["n_dofs"]


def test_zero_forcing_error_equals_exact_norm(tmp_path):
    assert run(tmp_path, "solve", "--mesh-n", "2", "--zero-forcing") == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    for k in ("l2", "curl", "gradcurl"):
        assert rep["errors"][k] == pytest.approx(rep["exact_norms"][k], rel=1e-14)


def test_msh_file_matches_generated(tmp_path):
    path = tmp_path / "cube.msh"
    save_msh(generate_box_mesh(2), path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--mesh-n", "2", "--out-dir", str(a)]) == 0
    assert main(["solve", "--mesh-file", str(path), "--out-dir", str(b)]) == 0
    ra = json.loads((a / "report.json").read_text())["errors"]
    rb = json.loads((b / "report.json").read_text())["errors"]
    for k in ra:
        assert abs(ra[k] - rb[k]) <= 1e-13 * ra[k]


def test_export_matrix(tmp_path):
    import scipy.io
    mtx = tmp_path / "A.mtx"
    assert main(["solve", "--mesh-n", "1", "--export-matrix", str(mtx)]) == 0
    assert scipy.io.mmread(str(mtx)).shape == (14, 14)


def test_solver_failure_exit_1(tmp_path):
    assert run(tmp_path, "solve", "--mesh-n", "2", "--maxit", "2") == 1
    rep = json.loads((tmp_path / "report.json").read_text())
    assert "error" in rep and rep["solver"]["converged"] is False


def test_convergence_byte_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["convergence", "--levels", "1,2", "--no-timing", "--out-dir", str(d)]) == 0
    ca = (a / "convergence.csv").read_bytes()
    assert ca == (b / "convergence.csv").read_bytes()
    assert (a / "convergence.json").read_bytes() == (b / "convergence.json").read_bytes()
    lines = ca.decode().splitlines()
    assert lines[0].startswith("n,h,ndof_free") and len(lines) == 3


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "quadcurl", "mesh-info", "--mesh-n", "1"],
                         capture_output=True, text=True, check=False)
    assert out.returncode == 0
    assert json.loads(out.stdout)["n_vertices"] == 8
    bad = subprocess.run([sys.executable, "-m", "quadcurl", "--nope"], capture_output=True, check=False)
    assert bad.returncode == 2
