import json
import subprocess
import sys

import numpy as np
import pytest

from skinlab import io as sio
from skinlab.cli import RunConfig, CLIError, run_subcommand


def _run(out, *argv):
    return run_subcommand([*argv, "--out", str(out)])


@pytest.fixture(scope="module")
def cone_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("cone")
    codes = {
        "generate": _run(out, "generate", "--angular-res", "8", "--radial-res", "21"),
        "skin": _run(out, "skin"),
        "axioms": _run(out, "axioms"),
        "cover": _run(out, "cover", "--xi", "0.1"),
        "qt": _run(out, "qt"),
        "smooth": _run(out, "smooth"),
        "curve": _run(out, "curve", "--n-pairs", "4"),
        "hardy": _run(out, "hardy", "--bands", "0,0.1"),
        "metric": _run(out, "metric", "--n-pairs", "4"),
        "hyperbolicity": _run(out, "hyperbolicity", "--samples", "8"),
    }
    return out, codes


def test_config_round_trip():
    cfg = RunConfig(p=2, q=4, alphas=[0.5, 2.0], bands=[0.0, 0.1])
    back = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back == cfg
    with pytest.raises(CLIError):
        RunConfig.from_dict({"bogus": 1})
    with pytest.raises(CLIError):
        RunConfig.from_dict({"xi": 1.5})
    with pytest.raises(CLIError):
        RunConfig.from_dict({"deterministic": False})
    part = RunConfig.from_dict({"tolerances": {"closed_form": 0.2}})
    assert part.tol("closed_form") == 0.2 and part.tol("oracle") == 1e-12


def test_usage_errors(tmp_path):
    assert run_subcommand([]) == 1
    assert _run(tmp_path, "generate", "--bogus", "1") == 1
    assert _run(tmp_path, "generate", "--shape", "torus") == 1
    assert _run(tmp_path, "skin") == 1  # no surface.json yet
    assert _run(tmp_path, "generate", "--config", str(tmp_path / "none.json")) == 1
    (tmp_path / "bad.json").write_text("{not json")
    assert _run(tmp_path, "generate", "--config", str(tmp_path / "bad.json")) == 1
    proc = subprocess.run([sys.executable, "-m", "skinlab.cli", "generate", "--bogus"],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "usage error" in proc.stderr


def test_schema_mismatch(tmp_path):
    assert _run(tmp_path, "generate", "--shape", "link", "--angular-res", "8") == 0
    (tmp_path / "skin.json").write_text((tmp_path / "surface.json").read_text())
    assert _run(tmp_path, "axioms") == 1
    with pytest.raises(sio.SchemaError):
        sio.load_json(tmp_path / "skin.json", "skin")


def test_hyperplane_axioms(tmp_path, capsys):
    assert _run(tmp_path, "generate", "--shape", "hyperplane", "--res", "9") == 0
    assert _run(tmp_path, "skin") == 0
    assert _run(tmp_path, "axioms") == 0
    assert "totally geodesic" in capsys.readouterr().out
    ax = sio.load_json(tmp_path / "axioms.json", "axioms")
    assert ax["oracle"]["pass"] and ax["checks_pass"]


def test_cone_pipeline(cone_run):
    out, codes = cone_run
    # 21 radial rings are too coarse for the 5% closed-form tolerance
    assert codes.pop("axioms") == 2
    assert all(c == 0 for c in codes.values()), codes
    ax = sio.load_json(out / "axioms.json", "axioms")
    assert not ax["cone"]["closed_form_pass"] and ax["cone"]["limits_pass"]
    assert ax["oracle"]["pass"] and ax["regularity_identity"]["pass"]
    assert _run(out, "report") == 2
    rep = sio.load_json(out / "report.json", "report")
    assert rep["criteria"]["4"]["status"] == "fail"
    assert rep["criteria"]["12"]["status"] == "not run"
    assert rep["failed"] == 1 and rep["not_run"] == 1


def test_tolerance_override(cone_run, tmp_path):
    out, _ = cone_run
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"tolerances": {"closed_form": 0.2}}))
    assert _run(out, "axioms", "--config", str(cfg)) == 0
    assert _run(out, "axioms") == 2


def test_input_hashes(cone_run):
    out, _ = cone_run
    sk = sio.load_json(out / "skin.json", "skin")
    assert sk["inputs"]["surface.json"] == sio.file_hash(out / "surface.json")
    cv = sio.load_json(out / "qt_cover.json", "cover")
    assert cv["inputs"]["cover.json"] == sio.file_hash(out / "cover.json")


def test_reruns_byte_identical(tmp_path):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        assert _run(d, "generate", "--angular-res", "8", "--radial-res", "11") == 0
        assert _run(d, "skin") == 0
        assert _run(d, "cover", "--xi", "0.1") == 0
    for name in ("surface.json", "skin.json", "skin_radial.csv", "cover.json"):
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes(), name


def test_emit_plot_data():
    text = sio.emit_plot_data([{"p": 1, "q": 2, "skin_distance": 0.5,
                                "quasi_hyperbolic": np.float64(0.25)}], "metric")
    lines = text.splitlines()
    assert lines[0] == "p,q,skin_distance,quasi_hyperbolic"
    assert lines[1] == "1,2,0.5,0.25"
    with pytest.raises(ValueError):
        sio.emit_plot_data([], "nonsense")
