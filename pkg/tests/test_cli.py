import json
import subprocess
import sys

import pytest
import yaml

from lingate.cli import RunConfig, main, parse_grid


def call(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def value(out, name):
    for line in out.splitlines():
        if line.startswith(f"{name} = "):
            return float(line.split("=", 1)[1])
    raise AssertionError(f"{name} not in output")


def test_list_schemes(capsys):
    code, out, _ = call(capsys, "list-schemes")
    assert code == 0
    assert "scheme2-cs" in out.split()
    assert "scheme1-cnot" in out.split()


def test_run_scheme_ii_ideal(capsys):
    code, out, _ = call(capsys, "run", "--scheme", "scheme2-cs", "--eta", "1", "--ideal")
    assert code == 0
    assert value(out, "P") == pytest.approx(0.125, abs=1e-12)
    assert value(out, "F") == pytest.approx(1, abs=1e-10)
    assert "pattern,probability,accepted,stage" in out


def test_run_given_chi(capsys):
    code, out, _ = call(capsys, "run", "--scheme", "scheme1-cnot", "--given-chi", "--eta", "1", "--ideal")
    assert code == 0
    assert value(out, "P") == pytest.approx(0.25, abs=1e-12)


def test_given_chi_only_for_scheme_i(capsys):
    code, _, err = call(capsys, "run", "--scheme", "scheme2-cs", "--given-chi")
    assert code == 2
    assert "scheme" in err


def test_defaults_are_the_realistic_scenario(capsys):
    code, out, _ = call(capsys, "run", "--scheme", "scheme2-cs")
    assert code == 0
    header = out.splitlines()[0]
    for part in ("eta=0.7", "rdark=100.0/s", "tres=1e-08s", "nu=1e-06", "source=spdc",
                 "gamma2=0.0001", "postselect=identity"):
        assert part in header
    assert 0 < value(out, "F") < 1
    assert value(out, "trunc_loss") <= 1e-6


def test_malformed_config_names_key(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("detector:\n  eta: 0.5\n  efficency: 0.9\n")
    code, _, err = call(capsys, "run", "--config", str(cfg))
    assert code == 2
    assert "detector.efficency" in err


def test_out_of_range_config_value(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("detector.eta: 1.5\n")
    code, _, err = call(capsys, "run", "--config", str(cfg))
    assert code == 2
    assert "detector.eta" in err


def test_bad_value_type(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"cutoff": "two"}))
    code, _, err = call(capsys, "run", "--config", str(cfg))
    assert code == 2
    assert "cutoff" in err


def test_unreadable_config(tmp_path, capsys):
    code, _, err = call(capsys, "run", "--config", str(tmp_path / "missing.yaml"))
    assert code == 2
    cfg = tmp_path / "junk.yaml"
    cfg.write_text("- just\n- a list\n")
    assert call(capsys, "run", "--config", str(cfg))[0] == 2


def test_scheme_parse_failure_exit_3(tmp_path, capsys):
    path = tmp_path / "broken.scheme"
    path.write_text("scheme broken\nmode a\napply frob a\n")
    code, _, err = call(capsys, "run", "--scheme", str(path), "--ideal")
    assert code == 3
    assert "line 3" in err


def test_unknown_scheme_is_config_error(capsys):
    assert call(capsys, "run", "--scheme", "nope")[0] == 2


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(yaml.safe_dump({
        "scheme": "scheme2-cs",
        "detector": {"eta": 0.5, "rdark": 0.0, "tres": 0.0},
        "source": {"kind": "ideal"},
        "input.alphas": [[1, 0], [0, 0], [0, 0], [0, 0]],
        "postselect": "all",
    }))
    code, out, _ = call(capsys, "run", "--config", str(cfg))
    assert code == 0
    assert value(out, "P") == pytest.approx(0.5 ** 4 / 8, abs=1e-12)
    code, out, _ = call(capsys, "run", "--config", str(cfg), "--eta", "0.9")
    assert value(out, "P") == pytest.approx(0.9 ** 4 / 8, abs=1e-12)


def test_alphas_flag(capsys):
    code, out, _ = call(capsys, "run", "--ideal", "--alphas", "0", "0", "0", "0", "0", "0", "0", "1")
    assert code == 0
    assert value(out, "F") == pytest.approx(1, abs=1e-10)
    assert call(capsys, "run", "--ideal", "--alphas", "1", "0", "1", "0", "0", "0", "0", "0")[0] == 2


def test_config_roundtrip(tmp_path, capsys):
    code, out, _ = call(capsys, "run", "--scheme", "scheme1-cnot", "--eta", "0.8",
                        "--alphas", "0.6", "0", "0", "0.8", "0", "0", "0", "0", "--print-config")
    assert code == 0
    path = tmp_path / "dumped.yaml"
    path.write_text(out)
    code, again, _ = call(capsys, "run", "--config", str(path), "--print-config")
    assert again == out
    flat = yaml.safe_load(out)
    assert RunConfig.from_flat(flat).to_flat() == flat


def test_json_run(capsys):
    code, out, _ = call(capsys, "run", "--ideal", "--format", "json")
    assert code == 0
    rec = json.loads(out)
    assert rec["P"] == pytest.approx(0.125)
    assert rec["nu"] == 0
    assert {"P", "F", "trunc_loss", "seed", "per_pattern_report"} <= set(rec)


def test_dump_option(capsys):
    code, out, _ = call(capsys, "run", "--ideal", "--dump")
    assert code == 0
    assert "# output modes 1 4" in out
    assert any(" : " in line and not line.startswith("#") for line in out.splitlines())


def test_sweep_eta_grid(capsys):
    code, out, err = call(capsys, "sweep", "--scheme", "scheme2-cs", "--ideal",
                          "--param", "eta", "--grid", "0.1:1.0:0.1")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "param,P,F,trunc_loss,seed"
    assert len(lines) == 11
    for line in lines[1:]:
        eta, P = (float(x) for x in line.split(",")[:2])
        assert P == pytest.approx(eta ** 4 / 8, abs=1e-12)
    assert "nu=0.0" in err


def test_sweep_empty_grid(capsys):
    assert call(capsys, "sweep", "--param", "eta", "--grid", "")[0] == 2
    assert call(capsys, "sweep", "--param", "eta", "--grid", "1:0:0.1")[0] == 2


def test_sweep_needs_param(capsys):
    code, _, err = call(capsys, "sweep", "--grid", "0.5")
    assert code == 2
    assert "sweep.param" in err


def test_sweep_from_config_file(tmp_path, capsys):
    cfg = tmp_path / "sweep.yaml"
    cfg.write_text("sweep:\n  param: eta\n  grid: [1.0, 0.5]\nsource.kind: ideal\n"
                   "detector.rdark: 0\npostselect: all\n")
    code, out, _ = call(capsys, "sweep", "--config", str(cfg))
    assert code == 0
    assert len(out.splitlines()) == 3


def test_sweep_deterministic_bytes(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", "--ideal", "--param", "eta", "--grid", "0.6,0.9", "--samples", "3", "--seed", "4"]
    assert call(capsys, *args, "--out", str(a))[0] == 0
    assert call(capsys, *args, "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_sweep_json(capsys):
    code, out, _ = call(capsys, "sweep", "--ideal", "--param", "scheme",
                        "--grid", "scheme2-cs,iswap-scheme2", "--format", "json")
    assert code == 0
    recs = json.loads(out)
    assert [r["param"] for r in recs] == ["scheme2-cs", "iswap-scheme2"]
    assert all("per_pattern_report" in r for r in recs)


def test_sweep_realistic_point(capsys):
    code, out, _ = call(capsys, "sweep", "--scheme", "scheme2-cs", "--param", "gamma2", "--grid", "1e-4")
    assert code == 0
    F = float(out.splitlines()[1].split(",")[2])
    assert 0.95 <= F <= 0.99


def test_parse_grid():
    assert parse_grid("0.1:0.3:0.1", "eta") == (0.1, 0.2, 0.3)
    assert parse_grid("1e-4, 2e-4", "gamma2") == (1e-4, 2e-4)
    assert parse_grid("a,b", "scheme") == ("a", "b")
    with pytest.raises(ValueError):
        parse_grid("0:1:0", "eta")


def test_verify_clean(capsys):
    code, out, _ = call(capsys, "verify")
    assert code == 0
    lines = out.splitlines()
    assert sum(line.startswith("PASS") for line in lines) >= 4
    assert any("iswap-decomposition" in line for line in lines)


def test_verify_fault_injection(capsys):
    code, out, err = call(capsys, "verify", "--inject-fault", "s-gate")
    assert code == 1
    assert "FAIL iswap-decomposition" in out
    assert "iswap-decomposition" in err


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "lingate", "list-schemes"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert "scheme2-cs" in out.stdout
