import csv
import json
import os
import subprocess
import sys

import pytest

from obstacle1d.cli import demo_names, main, plot_data
from obstacle1d.config import parse_config
from obstacle1d.errors import ConfigError

BASE = """
[grid]
x_min = -1
x_max = 1
t_min = -1
t_max = 0
nx = 41
nt = 21

[initial]
u = "0.5*max(0, x)^2"
"""


def _write(tmp_path, text, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))


def test_parse_valid_config():
    cfg = parse_config(BASE + '\n[coefficients]\na = "1 + 0.1*x"\n', "s")
    assert cfg.problem == "obstacle"
    assert cfg.number("grid", "nx", kind=int) == 41
    assert cfg.expression("coefficients", "a")(1.0, 0.0) == pytest.approx(1.1)


@pytest.mark.parametrize("extra, needle", [
    ("\n[grid2]\nx = 1\n", "unknown section [grid2]"),
    ("\n[solver]\nomegaa = 1.2\n", "[solver] omegaa: unknown key"),
    ('\n[coefficients]\na = "1 +"\n', "[coefficients] a"),
    ("\n[solver]\ntol = abc\n", "[solver] tol"),
    ("\n[analysis]\nproblem = heat\n", "[analysis] problem"),
])
def test_config_errors_name_the_key(extra, needle):
    with pytest.raises(ConfigError) as info:
        parse_config(BASE + extra)
    assert needle in str(info.value)


def test_grid_needs_exactly_one_resolution():
    with pytest.raises(ConfigError, match="nx and h"):
        parse_config(BASE.replace("nx = 41", "nx = 41\nh = 0.1"))


def test_put_forbids_box_keys():
    with pytest.raises(ConfigError, match="x_min"):
        parse_config("[grid]\nx_min = 0\n[analysis]\nproblem = american_put\n")


@pytest.mark.parametrize("text, code", [
    (BASE + '\n[coefficients]\nf = "0"\n', 3),
    (BASE + "\n[grid]\n", 2),
    (BASE + "\n[bogus]\n", 2),
    (BASE.replace("0.5*max(0, x)^2", "x"), 3),
    (BASE.replace("0.5*max(0, x)^2", "max(0, x)") + "\n[solver]\nmax_iter = 1\n", 4),
    (BASE + '\n[analysis]\nenergy_points = "0, 0"\n', 2),
])
def test_exit_codes(tmp_path, capsys, text, code):
    assert main(["run", str(_write(tmp_path, text)), "--out", str(tmp_path / "o")]) == code


def test_f_zero_message_cites_hypothesis(tmp_path, capsys):
    main(["run", str(_write(tmp_path, BASE + '\n[coefficients]\nf = "0"\n')), "--out", str(tmp_path)])
    err = capsys.readouterr().err
    assert "f >= delta" in err and "[coefficients] f" in err


def test_missing_file_is_io_error(tmp_path):
    assert main(["run", str(tmp_path / "none" / "x.cfg")]) == 5


def test_unknown_demo(capsys):
    assert main(["run", "no_such_demo"]) == 2
    assert "unknown demo" in capsys.readouterr().err


def test_list_demos(capsys):
    assert main(["list-demos"]) == 0
    out = capsys.readouterr().out
    for name in ("counterexample", "regular", "family_portrait", "american_put"):
        assert name in out
    assert set(demo_names()) >= {"counterexample", "regular", "singular", "variable", "american_put",
                                 "family_portrait"}


def test_run_writes_outputs_and_manifest(tmp_path):
    cfg = _write(tmp_path, BASE + "\n[output]\nfield = yes\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 0
    d = tmp_path / "o" / "s"
    man = json.loads((d / "manifest.json").read_text())
    assert set(man["outputs"]) == {"boundary.csv", "classification.csv", "field.csv", "smoothfit.csv"}
    assert man["config"].strip() == cfg.read_text().strip()
    assert {"numpy", "scipy", "numba", "python"} <= set(man["versions"])
    assert man["tolerances"]["solver"]["tol"] == 1e-8
    assert not [p for p in d.iterdir() if p.name.endswith(".tmp")]


def test_manifest_rerun_is_bit_identical(tmp_path):
    fine = BASE.replace("nx = 41", "nx = 201").replace("nt = 21", "nt = 401")
    cfg = _write(tmp_path, fine + '\n[analysis]\nenergy_points = "0, 0"\n')
    assert main(["run", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", str(tmp_path / "a" / "s" / "manifest.json"), "--out", str(tmp_path / "b")]) == 0
    a = json.loads((tmp_path / "a" / "s" / "manifest.json").read_text())["outputs"]
    b = json.loads((tmp_path / "b" / "s" / "manifest.json").read_text())["outputs"]
    assert a == b and "energy_0.csv" in a
    for name in a:
        assert (tmp_path / "a" / "s" / name).read_bytes() == (tmp_path / "b" / "s" / name).read_bytes()


def test_parallel_jobs_and_env_default(tmp_path):
    c1 = _write(tmp_path, BASE, "one.cfg")
    c2 = _write(tmp_path, BASE.replace("nx = 41", "nx = 61"), "two.cfg")
    env = dict(os.environ, OBSTACLE1D_OUT=str(tmp_path / "env"))
    res = subprocess.run([sys.executable, "-m", "obstacle1d", "run", str(c1), str(c2), "--jobs", "2"],
                         env=env, capture_output=True, text=True, cwd=tmp_path)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "env" / "one" / "manifest.json").exists()
    assert (tmp_path / "env" / "two" / "manifest.json").exists()


def test_emit_plot_data_kinds(tmp_path):
    prof = tmp_path / "p.csv"
    prof.write_text("# m=-0.5\nxi,V,Vp\n1,0,0\n2,0.5,1\n")
    assert plot_data(prof, "profile") == "# xi V\n1 0\n2 0.5\n"
    field = tmp_path / "f.csv"
    field.write_text("x,t,u,ut,ux,uxx\n0,0,1,0,0,0\n1,0,2,0,0,0\n0,1,3,0,0,0\n")
    assert plot_data(field, "field") == "# x t u\n0 0 1\n1 0 2\n\n0 1 3\n"
    with pytest.raises(ConfigError):
        plot_data(prof, "ladder")
    with pytest.raises(ConfigError):
        plot_data(prof, "nope")
    assert main(["emit-plot-data", str(prof), "profile", "-o", str(tmp_path / "p.dat")]) == 0
    assert (tmp_path / "p.dat").read_text().startswith("# xi V")


def test_counterexample_demo(demo_runs):
    rc, _, d = demo_runs["counterexample"]
    assert rc == 0
    sing = [r for r in _rows(d / "classification.csv") if r["label"] == "singular"]
    assert sing
    assert any(abs(float(r["t"])) < 1e-9 and abs(float(r["m_hat"]) + 1) <= 0.05 for r in sing)


def test_regular_demo(demo_runs):
    rc, _, d = demo_runs["regular"]
    assert rc == 0
    rows = _rows(d / "classification.csv")
    assert rows and all(r["label"] == "regular" for r in rows)
    jumps = [float(v) for r in rows for k, v in r.items() if k.startswith("jump_r")]
    assert max(jumps) < 1e-9


def test_family_portrait_demo(demo_runs):
    rc, _, d = demo_runs["family_portrait"]
    assert rc == 0
    rows = _rows(d / "portrait.csv")
    assert list(rows[0]) == ["x", "t", "v_plus", "v_minus", "v_m-0.5", "v_m-1", "v_m0"]
    r = next(r for r in rows if float(r["x"]) == -2 and float(r["t"]) == -1)
    assert float(r["v_plus"]) == 0 and float(r["v_minus"]) == 2 and float(r["v_m-1"]) == 1
    text = plot_data(d / "profile_m-0.5.csv", "profile")
    assert text.splitlines()[0] == "# xi V"
    assert len(text.splitlines()[1].split()) == 2


def test_ladder_plot_of_regular_point_demo(demo_runs):
    rc, _, d = demo_runs["variable"]
    assert rc == 0
    lines = plot_data(d / "ladder_0.csv", "ladder").splitlines()
    assert lines[0] == "# eps defect"
    defects = [float(ln.split()[1]) for ln in lines[1:]]
    assert all(b < a for a, b in zip(defects, defects[1:]))


def test_demos_finish_quickly(demo_runs):
    for name, (rc, secs, _) in demo_runs.items():
        assert rc == 0, name
        assert secs < 60, (name, secs)
