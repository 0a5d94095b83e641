import csv
import io
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from lnlab.canonical import ball_solution
from lnlab.cli import build_parser, main
from lnlab.cone import CurvatureFunction
from lnlab.serialize import read_profile


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def exit_code(capsys, *argv):
    # argparse failures leave through SystemExit
    try:
        return run(capsys, *argv)[0]
    except SystemExit as e:
        capsys.readouterr()
        return e.code


def test_solve_ball_writes_files(tmp_path, capsys):
    prof, rep = tmp_path / "p.csv", tmp_path / "r.json"
    code, out, _ = run(capsys, "solve", "--n", 4, "--sigma", 1, "--domain", "ball", "--R", 1,
                       "--profile", prof, "--report", rep)
    assert code == 0
    assert out.startswith("converged")
    doc = json.loads(rep.read_text())
    for key in ("converged", "residual", "history", "rate", "wall_ms", "config"):
        assert key in doc
    assert doc["wall_ms"] is None
    r, u = read_profile(prof)
    sel = r <= 0.9
    sol = ball_solution(CurvatureFunction(4, 1))
    assert np.max(np.abs(u[sel] / sol.radial(r[sel]) - 1)) < 1e-6


def test_solve_annulus_sweep_rate(tmp_path, capsys):
    rep = tmp_path / "r.json"
    code, out, _ = run(capsys, "solve", "--n", 4, "--sigma", 1, "--domain", "annulus", "--a", 0.5,
                       "--b", 1, "--sweep", "--profile", tmp_path / "p.csv", "--report", rep)
    assert code == 0
    doc = json.loads(rep.read_text())
    for side in ("left", "right"):
        assert_allclose(doc["rate"][side]["coefficient"], np.sqrt(2.0), rtol=1e-2)


def test_reports_are_byte_identical(tmp_path, capsys):
    texts = []
    for i in range(2):
        rep = tmp_path / f"r{i}.json"
        prof = tmp_path / f"p{i}.csv"
        run(capsys, "solve", "--n", 3, "--sigma", 1, "--domain", "ball", "--profile", prof,
            "--report", rep)
        texts.append((rep.read_text().replace(f"r{i}.json", "R").replace(f"p{i}.csv", "P"),
                      prof.read_bytes()))
    assert texts[0] == texts[1]


def test_timing_flag_records_wall_time(tmp_path, capsys):
    rep = tmp_path / "r.json"
    run(capsys, "solve", "--n", 3, "--sigma", 1, "--profile", tmp_path / "p.csv", "--report", rep,
        "--timing")
    assert json.loads(rep.read_text())["wall_ms"] > 0


def test_plot_is_svg(tmp_path, capsys):
    svg = tmp_path / "p.svg"
    run(capsys, "solve", "--n", 3, "--sigma", 1, "--profile", tmp_path / "p.csv",
        "--report", tmp_path / "r.json", "--plot", svg)
    text = svg.read_text()
    assert text.startswith("<svg") and "polyline" in text and "#fde2b5" in text


def test_dimension_two_is_invalid(tmp_path, capsys):
    assert exit_code(capsys, "solve", "--n", 2, "--sigma", 1, "--profile", tmp_path / "p.csv",
                     "--report", tmp_path / "r.json") == 2


def test_unknown_flag_is_invalid(capsys):
    assert exit_code(capsys, "classify", "--n", 9, "--sigma", 2, "--k", 4, "--bogus") == 2


def test_missing_required_values_are_invalid(capsys):
    assert exit_code(capsys, "classify", "--n", 9, "--k", 4) == 2
    assert exit_code(capsys, "table") == 2
    assert exit_code(capsys, "solve", "--n", 4, "--sigma", 1, "--c", 5, "--sweep") == 2


def test_nonconvergence_exit_code(tmp_path, capsys):
    rep = tmp_path / "r.json"
    code = exit_code(capsys, "solve", "--n", 3, "--sigma", 1, "--domain", "annulus", "--c", 0.01,
                     "--profile", tmp_path / "p.csv", "--report", rep)
    assert code == 3
    assert json.loads(rep.read_text())["converged"] is False


@pytest.mark.parametrize("command", ["solve", "classify", "table", "residual", "kelvin-check",
                                     "punctured"])
def test_help_lists_every_flag(command, capsys):
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices[command]
    flags = {s for a in sub._actions for s in a.option_strings if s.startswith("--")}
    with pytest.raises(SystemExit) as info:
        main([command, "--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for flag in flags:
        assert flag in out


def test_classify(capsys):
    assert run(capsys, "classify", "--n", 9, "--sigma", 2, "--k", 4) == (0, "borderline\n", "")
    assert run(capsys, "classify", "--n", 9, "--sigma", 2, "--k", 3)[1] == "regular\n"
    code, out, _ = run(capsys, "classify", "--n", 3, "--sigma", 1, "--k", 3, "--json")
    doc = json.loads(out)
    assert doc["verdict"] == "irregular"
    assert doc["evidence"]["margin"] < -1e-6


def test_table_agrees_everywhere(tmp_path, capsys):
    out_path = tmp_path / "t.csv"
    assert run(capsys, "table", "--sigma", 2, "--n-min", 3, "--n-max", 50, "--out", out_path)[0] == 0
    rows = list(csv.DictReader(io.StringIO(out_path.read_text())))
    assert len(rows) == 48
    assert all(r["agrees"] == "true" for r in rows)
    code, out, _ = run(capsys, "table", "--sigma", 1, "--n-max", 5)
    assert out.splitlines()[0] == "n,ell,k_star,borderline_k,closed_form,agrees"


def test_kelvin_check(tmp_path, capsys):
    rep = tmp_path / "k.json"
    code, out, _ = run(capsys, "kelvin-check", "--n", 4, "--sigma", 1, "--report", rep)
    assert code == 0
    line = [l for l in out.splitlines() if l.startswith("max eigenvalue mismatch")][0]
    assert float(line.split()[-1]) < 1e-8
    assert json.loads(rep.read_text())["pointwise"] < 1e-12


def test_residual_of_solved_profile(tmp_path, capsys):
    prof = tmp_path / "p.csv"
    run(capsys, "solve", "--n", 4, "--sigma", 2, "--domain", "annulus", "--a", 0.5, "--b", 1,
        "--profile", prof, "--report", tmp_path / "r.json")
    code, out, _ = run(capsys, "residual", "--n", 4, "--sigma", 2, "--domain", "annulus",
                       "--input", prof)
    assert code == 0
    # CSV stores u to 17 digits; rounding moves w by an ulp
    assert float(out) < 1e-6


def test_residual_needs_header(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("0.5,1\n1.0,2\n")
    assert exit_code(capsys, "residual", "--n", 3, "--sigma", 1, "--domain", "annulus",
                     "--input", bad) == 2


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 9, "sigma": 2, "k": 3}))
    assert run(capsys, "classify", "--config", cfg)[1] == "regular\n"
    # the flag wins over the file
    assert run(capsys, "classify", "--config", cfg, "--k", 4)[1] == "borderline\n"
    toml = tmp_path / "c.toml"
    toml.write_text("n = 9\nsigma = 2\nk = 5\n")
    assert run(capsys, "classify", "--config", toml)[1] == "irregular\n"


def test_config_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 9, "sigma": 2, "k": 3, "colour": "red"}))
    assert exit_code(capsys, "classify", "--config", cfg) == 2


def test_effective_config_is_echoed(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 3, "sigma": 1, "nodes": 1001}))
    rep = tmp_path / "r.json"
    run(capsys, "solve", "--config", cfg, "--profile", tmp_path / "p.csv", "--report", rep)
    echoed = json.loads(rep.read_text())["config"]
    assert echoed["nodes"] == 1001 and echoed["n"] == 3 and echoed["domain"] == "ball"


def test_punctured_small_run(tmp_path, capsys):
    rep = tmp_path / "x.json"
    code, out, _ = run(capsys, "punctured", "--n", 3, "--sigma", 1, "--eps-schedule", "0.1,0.01",
                       "--report", rep)
    assert code == 0
    assert out.splitlines()[-1] == "monotone true"
    doc = json.loads(rep.read_text())
    assert len(doc["window_values"]) == 2
    assert all(r["wall_ms"] is None for r in doc["runs"])


def test_punctured_rejects_bad_schedule(tmp_path, capsys):
    assert exit_code(capsys, "punctured", "--n", 3, "--sigma", 1, "--eps-schedule", "0.01,0.1",
                     "--report", tmp_path / "x.json") == 2
