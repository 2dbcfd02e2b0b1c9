import json
import subprocess
import sys

import pytest
import yaml

from qmbounds import __version__
from qmbounds.carleman import symbols
from qmbounds.cli import bundled_configs, main, resolve_config
from qmbounds.rates import config_hash


def _write(tmp_path, cfg, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def _bundled(name):
    return yaml.safe_load(resolve_config(name).read_text())


def test_list(capsys):
    assert main(["list"]) == 0
    names = capsys.readouterr().out.split()
    assert names == bundled_configs()
    assert {"harmonic_t1", "zonal_default", "flux_t2", "compatible_pair"} <= set(names)


def test_run_harmonic(tmp_path, capsys):
    out = tmp_path / "ho"
    assert main(["run", "--config", "harmonic_t1", "--out", str(out), "--svg"]) == 0
    v = json.loads((out / "verdicts.json").read_text())
    (rep,) = v["verdicts"]
    assert rep["theorem"] == "theorem1" and rep["verdict"] == "PASS"
    assert rep["agmon_check"]["passed"]
    assert abs(rep["alpha"] - 0.5) <= 0.15 * 0.5
    digest = config_hash(_bundled("harmonic_t1"))
    assert v["config_hash"] == digest and v["version"] == __version__
    for f in out.iterdir():
        assert digest in f.read_text() and __version__ in f.read_text(), f.name
    assert (out / "plot_mass_w.svg").exists()
    assert "PASS" in capsys.readouterr().out


def test_run_zonal(tmp_path):
    out = tmp_path / "z"
    assert main(["run", "--config", "zonal_default", "--out", str(out), "--format", "json"]) == 0
    v = json.loads((out / "verdicts.json").read_text())
    rate = [r for r in v["verdicts"] if r["theorem"] == "zonal-rate"][0]
    assert 0.85 <= rate["alpha"] <= 1.15
    assert not (out / "results.csv").exists()


def test_csv_schema(tmp_path):
    out = tmp_path / "f"
    assert main(["run", "--config", "free_t2", "--out", str(out), "--format", "csv"]) == 0
    lines = (out / "results.csv").read_text().splitlines()
    assert lines[0].startswith("# qmbounds ")
    assert lines[1] == "experiment_id,h,n_interior,E,eigen_residual,quantity_name,value,below_floor_flag"
    assert not (out / "verdicts.json").exists()


def test_missing_omega_is_config_error(tmp_path, capsys):
    cfg = _bundled("harmonic_t1")
    del cfg["omega"]
    out = tmp_path / "none"
    assert main(["run", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 2
    assert not out.exists()
    assert "config error" in capsys.readouterr().err


@pytest.mark.parametrize("mutate", [
    lambda c: c.update(omega={"w": {"kind": "box", "lo": [1.0], "hi": [1.0]}}),   # empty omega
    lambda c: c.update(omega={"w": {"kind": "box", "lo": [9.0], "hi": [10.0]}}),  # outside the domain
    lambda c: c.update(colour="blue"),                                             # unknown key
    lambda c: c.update(h=[0.4, 0.3]),                                              # too few h values
    lambda c: c.update(kind="nonsense"),
])
def test_invalid_configs(tmp_path, mutate):
    cfg = _bundled("harmonic_t1")
    mutate(cfg)
    assert main(["run", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2


def test_missing_file_and_bad_yaml(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == 2
    p = tmp_path / "bad.yaml"
    p.write_text("kind: [unclosed\n")
    assert main(["run", "--config", str(p)]) == 2


def test_compute_failure_keeps_partial_output(tmp_path):
    cfg = _bundled("harmonic_witness_t1")
    # cutoff that keeps only the far forbidden tail: the mode is removed at small h
    cfg["cutoff"] = {"inner": {"kind": "box", "lo": [3.5], "hi": [4.0]},
                     "outer": {"kind": "box", "lo": [3.0], "hi": [4.0]}}
    cfg["omega"] = {"w": {"kind": "box", "lo": [-1.0], "hi": [1.0]}}
    out = tmp_path / "o"
    assert main(["run", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 3
    assert (out / "results.csv").exists()
    assert "error" in (out / "results.csv").read_text()


def test_io_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--config", "rellich", "--out", str(blocker / "sub")]) == 4


def test_determinism_and_seed(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for d in (a, b):
        assert main(["run", "--config", "carleman_inequality", "--out", str(d)]) == 0
    for f in ("results.csv", "verdicts.json", "certificates.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    assert main(["run", "--config", "carleman_inequality", "--out", str(c), "--seed", "7"]) == 0
    assert (a / "verdicts.json").read_bytes() != (c / "verdicts.json").read_bytes()


def test_threads_do_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", "free_t2", "--out", str(a)]) == 0
    assert main(["run", "--config", "free_t2", "--out", str(b), "--threads", "3"]) == 0
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()
    assert main(["run", "--config", "free_t2", "--threads", "0"]) == 2


def test_verify_all_pass(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    for suite in ("carleman", "fit", "quadrature", "dijkstra", "rellich"):
        assert f"] {suite}:" in out
    assert "FAIL" not in out


def test_verify_filter(capsys):
    assert main(["verify", "--filter", "fit", "--filter", "quadrature"]) == 0
    out = capsys.readouterr().out
    assert "fit:" in out and "quadrature:" in out and "dijkstra" not in out


def test_verify_detects_wrong_bracket_sign(monkeypatch, capsys):
    good = symbols.bracket_closed_form
    monkeypatch.setattr(symbols, "bracket_closed_form", lambda *a, **k: -good(*a, **k))
    assert main(["verify", "--filter", "carleman"]) == 1
    err = capsys.readouterr().err
    assert "carleman: bracket closed form vs generic" in err


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "qmbounds", "verify", "--filter", "fit"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "PASS" in r.stdout
