"""Command-line artifacts: formats, manifests, exit codes, idempotence."""

import json
import math

import numpy as np
import pytest

from svmtori import cli


def run(*argv):
    return cli.main(list(argv))


def test_parse_values():
    assert cli.parse_values("1.5") == [1.5]
    assert cli.parse_values("1,2,3") == [1.0, 2.0, 3.0]
    assert cli.parse_values("1:2:0.5") == [1.0, 1.5, 2.0]
    # stop is included only when it sits on the step grid
    vals = cli.parse_values("1.26:6:0.25")
    assert len(vals) == 19
    assert vals[-1] == pytest.approx(5.76)
    with pytest.raises(ValueError):
        cli.parse_values("1:2:0.5:9")
    with pytest.raises(ValueError):
        cli.parse_values("2:1:0.5")


def test_period_csv(capsys):
    assert run("period", "--E", "0.5:1.5:0.5") == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0] == "E,T,I"
    assert len(lines) == 4
    e, t, i = (float(v) for v in lines[2].split(","))
    assert (e, t) == (1.0, pytest.approx(1.2574731955, abs=1e-9))
    assert i == pytest.approx(0.1998020175, abs=1e-9)


def test_orbit_csv(capsys):
    assert run("orbit", "--a", "1.5", "--n", "128") == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0] == "x,f,p,ef"
    assert len(lines) == 129
    x, f, p, ef = (float(v) for v in lines[1].split(","))
    assert (x, p) == (0.0, 0.0)
    assert ef == pytest.approx(math.exp(f), rel=1e-15)


def test_robin_print(capsys):
    assert run("robin", "--flat", "--a", "1") == 0
    out = capsys.readouterr().out
    assert "-0.2085777932435" in out
    assert "method=" in out
    assert run("robin", "--sphere") == 0
    assert "-0.17067218146492" in capsys.readouterr().out


def test_robin_requires_one_mode(capsys):
    assert run("robin", "--flat", "--sphere") == 2
    assert run("robin", "--flat") == 2  # missing --a


def test_figure2_header(capsys):
    assert run("figure2", "--a", "1.3,2", "--n", "512") == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0] == "a,E,T,I,R0,diff_quad,diff_energy,diff_action,R1"
    assert len(lines) == 3
    row = [float(v) for v in lines[1].split(",")]
    assert row[0] == 1.3
    assert row[8] == pytest.approx(row[4] + row[7], abs=1e-15)


def test_embed_obj_with_manifest(tmp_path):
    out = tmp_path / "torus.obj"
    assert run("embed", "--a", "3", "--k", "2", "--samples", "64",
               "--n-angular", "16", "--out", str(out)) == 0
    lines = out.read_text().strip().split("\n")
    nv = sum(1 for l in lines if l.startswith("v "))
    nf = sum(1 for l in lines if l.startswith("f "))
    assert nv == 129 * 16
    assert nf == 2 * 128 * 16
    idx = [int(t) for l in lines if l.startswith("f ") for t in l.split()[1:]]
    assert min(idx) == 1 and max(idx) == nv  # 1-based, all in range
    man = json.loads((tmp_path / "torus.obj.manifest.json").read_text())
    assert man["subcommand"] == "embed"
    assert man["parameters"]["k"] == 2
    assert man["outputs"] == [str(out)]
    assert man["version"]


def test_embed_generator_csv(tmp_path):
    out = tmp_path / "gen.csv"
    assert run("embed", "--a", "1.5", "--samples", "64", "--out", str(out)) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "x,X,F"
    assert len(lines) == 66  # 64 samples + closing point + header


def test_embed_below_threshold_is_usage_error(capsys):
    assert run("embed", "--a", "1") == 2
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "\n" not in err.strip()  # single line, machine parsable


def test_spectral_json(capsys):
    assert run("spectral", "--sides", "1,1") == 0
    rep = json.loads(capsys.readouterr().out)
    assert set(rep) == {"n", "sides", "method", "robin", "residual_checks", "manifest"}
    assert rep["n"] == 2
    assert rep["robin"] == pytest.approx(-0.208577793243501, abs=1e-9)
    assert rep["manifest"]["subcommand"] == "spectral"


def test_pde_csv(tmp_path):
    out = tmp_path / "field.csv"
    assert run("pde", "--a", "1.3", "--nx", "64", "--ny", "16",
               "--out", str(out)) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "i,j,x,y,f"
    assert len(lines) == 1 + 64 * 16
    i, j, x, y, f = lines[1].split(",")
    assert (i, j, x, y) == ("0", "0", "0", "0")
    assert abs(float(f)) > 0.1  # nontrivial branch


def test_net_json_contract(tmp_path):
    out = tmp_path / "net.json"
    argv = ["net", "--manifold", "flat2:a=1", "--eps", "0.05", "--walkers", "300",
            "--seed", "42", "--q", "0.5,0.5", "--out", str(out)]
    assert cli.main(argv) == 0
    rep = json.loads(out.read_text())
    assert set(rep) == {"mean", "stderr", "walkers", "censored", "theory",
                        "z_score", "manifest"}
    assert rep["walkers"] == 300
    assert rep["censored"] == 0
    assert abs(rep["z_score"]) < 4.0
    first = out.read_bytes()
    assert cli.main(argv) == 0
    assert out.read_bytes() == first  # byte-identical rerun


def test_net_usage_errors(capsys):
    assert run("net", "--manifold", "flat2:a=1", "--eps", "0.05",
               "--walkers", "50", "--q", "0.5,0.5") == 2
    assert run("net", "--manifold", "nope:1", "--eps", "0.05",
               "--walkers", "200", "--q", "0.5,0.5") == 2
    capsys.readouterr()


def test_numerical_failure_exit_code(monkeypatch, capsys):
    def boom(*a, **k):
        raise ArithmeticError("forced")
    monkeypatch.setattr(cli.net_mc, "average_net", boom)
    assert run("net", "--manifold", "flat2:a=1", "--eps", "0.05",
               "--walkers", "200", "--q", "0.5,0.5") == 3
    assert capsys.readouterr().err.splitlines()[-1] == "numerical failure: forced"


def test_unknown_subcommand(capsys):
    assert run("unknown") == 2
    capsys.readouterr()


def test_stdout_streaming_matches_file(tmp_path, capsys):
    assert run("orbit", "--a", "1.5", "--n", "64", "--out", "-") == 0
    streamed = capsys.readouterr().out
    out = tmp_path / "o.csv"
    assert run("orbit", "--a", "1.5", "--n", "64", "--out", str(out)) == 0
    capsys.readouterr()
    assert out.read_text() == streamed
