import csv
import json
import math

import pytest

from pitchflap import cli, rootfinder

REF = ["--sigma", "0.08", "--nu1-sq", "10.8", "--a", "6.75e-4", "--b", "0.6e-4"]


def run(tmp_path, *argv):
    return cli.main([argv[0], "--out", str(tmp_path), *argv[1:]])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def provenance(tmp_path, command):
    return json.loads((tmp_path / f"{command}.provenance.json").read_text())


def test_classify(tmp_path, capsys):
    # without feedback the reference point sits in the flutter zone
    assert run(tmp_path, "classify", *REF) == 0
    rows = read_csv(tmp_path / "classify.csv")
    assert rows[0][:3] == ["sigma", "nu1_sq", "label"]
    assert rows[1][2] == "FlutterOnly"
    out = json.loads(capsys.readouterr().out)
    assert out["summary"]["label"] == "FlutterOnly"
    assert run(tmp_path, "classify", "--sigma", "0.02", "--nu1-sq", "5") == 0
    assert read_csv(tmp_path / "classify.csv")[1][2] == "Stable"


def test_crossings_table(tmp_path):
    assert run(tmp_path, "crossings", *REF) == 0
    rows = read_csv(tmp_path / "crossings.csv")
    assert rows[0] == ["omega_c", "tau", "k", "rt", "nu_after"]
    body = [[float(v) for v in r] for r in rows[1:]]
    taus = [r[1] for r in body]
    assert taus == sorted(taus)
    assert body[0][0] == pytest.approx(2.1949, abs=1e-3)
    assert body[0][1] == pytest.approx(0.0852, abs=2e-3)
    assert body[0][3] == -1
    assert all(r[1] <= 2 * math.pi for r in body)
    prov = provenance(tmp_path, "crossings")
    assert prov["status"] == "ok" and prov["seeds"] is None
    assert prov["files"] == ["crossings.csv"]
    assert prov["summary"]["nu_zero"] == 2


def test_intervals(tmp_path):
    assert run(tmp_path, "intervals", *REF, "--tau-max", "1.0") == 0
    rows = read_csv(tmp_path / "intervals.csv")
    assert rows[0] == ["tau_lo", "tau_hi", "nu"]
    stable = [r for r in rows[1:] if int(r[2]) == 0]
    assert len(stable) == 1
    assert float(stable[0][0]) == pytest.approx(0.0852, abs=1e-3)
    assert float(stable[0][1]) == pytest.approx(0.3579, abs=1e-3)
    assert float(rows[-1][1]) == pytest.approx(1.0)


def test_roots_and_curves(tmp_path):
    code = run(tmp_path, "roots", *REF, "--tau", "0.2296", "--region", "-1", "0.5", "0", "3",
               "--dump-curves")
    assert code == 0
    rows = read_csv(tmp_path / "roots.csv")
    assert rows[0] == ["re", "im", "residual"]
    roots = [complex(float(r[0]), float(r[1])) for r in rows[1:]]
    assert min(abs(z - complex(-0.4368, 1.2018)) for z in roots) < 5e-3
    curves = read_csv(tmp_path / "roots_curves.csv")
    assert {r[0] for r in curves[1:]} == {"re", "im"}
    assert provenance(tmp_path, "roots")["summary"]["certified"] is True


def test_simulate_json(tmp_path):
    code = run(tmp_path, "simulate", *REF, "--tau", "0.2296", "--psi-end", "2", "--step", "0.01",
               "--format", "json")
    assert code == 0
    data = json.loads((tmp_path / "simulate.json").read_text())
    assert data["columns"] == ["psi", "theta", "beta", "theta_dot", "beta_dot"]
    assert data["rows"][0][:3] == [0.0, 0.0, 0.01]
    assert "growth_rate" in provenance(tmp_path, "simulate")["summary"]


def test_sweep_layout(tmp_path):
    code = run(tmp_path, "sweep-gains", *REF, "--tau", "0.2296", "--a-range", "6.5e-4", "7e-4",
               "--b-range", "0.6e-4", "1e-4", "--n-a", "2", "--n-b", "3")
    assert code == 0
    rows = read_csv(tmp_path / "sweep.csv")
    assert rows[0][0] == "a\\b"
    assert len(rows) == 3 and all(len(r) == 4 for r in rows)
    assert all(float(v) < 0 for r in rows[1:] for v in r[1:])


def test_boundaries(tmp_path):
    assert run(tmp_path, "boundaries", "--n-points", "11") == 0
    div = read_csv(tmp_path / "boundaries_divergence.csv")
    flu = read_csv(tmp_path / "boundaries_flutter.csv")
    assert div[0] == ["sigma", "nu1_sq"] and len(div) == 12
    assert flu[0] == ["omega_f", "nu1_sq", "sigma"]


def test_optimize_delay(tmp_path):
    assert run(tmp_path, "optimize-delay", *REF) == 0
    rows = read_csv(tmp_path / "optimize_delay.csv")
    row = dict(zip(rows[0], rows[1]))
    assert float(row["tau_star"]) == pytest.approx(0.2296, abs=5e-3)


@pytest.mark.slow
def test_optimize_small_budget(tmp_path):
    assert run(tmp_path, "optimize", *REF, "--tau", "0.2296", "--budget", "12") == 0
    rows = read_csv(tmp_path / "optimize.csv")
    row = dict(zip(rows[0], rows[1]))
    assert float(row["abscissa"]) <= float(row["initial_abscissa"])


def test_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.main(["crossings", "--out", str(d), *REF]) == 0
    assert (a / "crossings.csv").read_bytes() == (b / "crossings.csv").read_bytes()


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"sigma": 0.08, "nu1_sq": 10.8, "a": 6.75e-4, "b": 0.6e-4, "tau_max": 1.0}))
    assert run(tmp_path, "intervals", "--config", str(cfg), "--tau-max", "2.0") == 0
    prov = provenance(tmp_path, "intervals")
    assert prov["config"]["tau_max"] == 2.0
    assert prov["config"]["sigma"] == 0.08


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"sigmaa": 0.08}))
    assert run(tmp_path, "classify", "--config", str(cfg)) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "config"
    assert not (tmp_path / "classify.csv").exists()


def test_invalid_parameter_exits_2(tmp_path):
    assert run(tmp_path, "classify", "--c-h", "-1") == 2


def test_bad_region_exits_2(tmp_path):
    assert run(tmp_path, "roots", *REF, "--region", "1", "0", "0", "3") == 2


def test_coarse_grid_is_numerical_error(tmp_path, capsys):
    code = run(tmp_path, "roots", *REF, "--region", "-1", "0.5", "0", "3", "--grid-step", "1.0")
    assert code == 1
    assert json.loads(capsys.readouterr().err.strip())["error"] == "numerical"


def test_uncertified_roots_exit_3_and_keep_output(tmp_path, monkeypatch):
    real = rootfinder.find_roots

    def shaky(*args, **kwargs):
        rs = real(*args, **kwargs)
        rs.certified_count = rs.found_count + 1
        return rs

    monkeypatch.setattr(rootfinder, "find_roots", shaky)
    assert run(tmp_path, "roots", *REF, "--region", "-1", "0.5", "0", "3") == 3
    assert (tmp_path / "roots.csv").exists()
    assert provenance(tmp_path, "roots")["status"] == "uncertified"


def test_unknown_command_exits_2():
    assert cli.main(["bogus"]) == 2
