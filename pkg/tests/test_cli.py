import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from subcusum.cli import main


def run(*args):
    return main([str(a) for a in args])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------- simulate

def test_simulate_shape_and_sidecar(tmp_path):
    out = tmp_path / "s.csv"
    assert run("simulate", "--scenario", "rank1-dense", "--k", 5, "--tau", 100, "--n", 300,
               "--out", out) == 0
    rows = read_csv(out)
    assert rows[0] == ["t", "x_1", "x_2", "x_3", "x_4", "x_5"]
    assert len(rows) == 301
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["scenario"]["tau"] == 100
    assert side["options"]["k"] == 5


def test_simulate_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert run("simulate", "--k", 4, "--n", 50, "--seed", 9, "--out", out) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.with_suffix(".json").read_text().replace("a.csv", "b.csv") == \
        b.with_suffix(".json").read_text()


def test_simulate_tau_zero_matches_post_model(tmp_path):
    out = tmp_path / "s.csv"
    run("simulate", "--scenario", "rank1-sparse", "--k", 3, "--lam", 3, "--tau", 0,
        "--n", 20000, "--out", out)
    X = np.array(read_csv(out)[1:], float)[:, 1:]
    S = X.T @ X / len(X)
    np.testing.assert_allclose(S, np.diag([4.0, 1.0, 1.0]), atol=0.2)


def test_simulate_bad_scenario(tmp_path, capsys):
    assert run("simulate", "--scenario", "nope", "--out", tmp_path / "x.csv") == 2
    assert "scenario" in capsys.readouterr().err


def test_argparse_usage_error():
    with pytest.raises(SystemExit) as exc:
        run("simulate", "--k", "five")
    assert exc.value.code == 2


# --------------------------------------------------------------- calibrate

def test_calibrate_single(tmp_path):
    out = tmp_path / "c.json"
    assert run("calibrate", "--detector", "subspace-cusum", "--k", 3, "--d", 1, "--w", 10,
               "--target-arl", 200, "--reps", 200, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert abs(doc["result"]["arl"] - 200) <= 10
    assert doc["config"]["drift"] == pytest.approx(1.25)
    assert doc["options"]["target_arl"] == 200


def test_calibrate_grid(tmp_path):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"k": [5, 10], "d": [2, 3], "w": [20]}))
    out = tmp_path / "grid.csv"
    assert run("calibrate", "--grid", grid, "--target-arl", 100, "--reps", 100,
               "--grid-out", out, "--out", tmp_path / "g.json") == 0
    rows = read_csv(out)
    assert rows[0] == ["k", "d", "sigma2", "w", "b", "arl"]
    assert len(rows) == 5


def test_calibrate_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"detector": "hotelling", "k": 2, "target_arl": 100,
                               "reps": 500, "seed": 1}))
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("calibrate", "--config", cfg, "--out", a) == 0
    assert run("calibrate", "--config", cfg, "--target-arl", 50, "--out", b) == 0
    da, db = json.loads(a.read_text()), json.loads(b.read_text())
    assert da["options"]["target_arl"] == 100
    assert db["options"]["target_arl"] == 50
    assert db["result"]["threshold"] < da["result"]["threshold"]


def test_calibrate_malformed_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"detector": "subspace-cusum", "window_size": 3}))
    assert run("calibrate", "--config", cfg) == 2
    assert "window_size" in capsys.readouterr().err
    cfg.write_text(json.dumps({"k": "many"}))
    assert run("calibrate", "--config", cfg) == 2
    assert "'k'" in capsys.readouterr().err


def test_calibrate_failure_exit_code(tmp_path):
    assert run("calibrate", "--detector", "hotelling", "--k", 2, "--target-arl", 1e4,
               "--reps", 100, "--b-lo", 0, "--b-hi", 0.01, "--out", tmp_path / "c.json") == 1


# --------------------------------------------------------------------- edd

def test_edd_fixed_threshold(tmp_path):
    out = tmp_path / "e.csv"
    assert run("edd", "--detector", "exact-cusum", "--scenario", "rank1-sparse", "--k", 3,
               "--lam", 4, "--threshold", 8, "--reps", 200, "--out", out) == 0
    rows = read_csv(out)
    assert rows[0] == ["k", "d", "sigma2", "detector", "threshold", "edd", "se"]
    assert rows[1][3] == "exact-cusum"
    assert 1 < float(rows[1][5]) < 20


def test_edd_auto_two_detectors(tmp_path):
    out = tmp_path / "e.csv"
    assert run("edd", "--detector", "exact-cusum,hotelling", "--auto", "--scenario",
               "rank1-sparse", "--k", 3, "--lam", 4, "--target-arl", 100, "--reps", 200,
               "--out", out) == 0
    rows = read_csv(out)
    assert [r[3] for r in rows[1:]] == ["exact-cusum", "hotelling"]
    doc = json.loads(out.with_suffix(".json").read_text())
    assert all(r["calibration"] is not None for r in doc["results"])


def test_edd_cusum_delay_decreases_with_noise(tmp_path):
    edds = []
    for s2 in (2.0, 0.5):
        out = tmp_path / f"e{s2}.csv"
        assert run("edd", "--detector", "exact-cusum", "--scenario", "rankd-uniform", "--k", 5,
                   "--d", 2, "--sigma2", s2, "--lam", 1, "--threshold", 6 * s2, "--reps", 300,
                   "--out", out) == 0
        edds.append(float(read_csv(out)[1][5]))
    assert edds[1] < edds[0]


def test_edd_needs_exactly_one_threshold_mode(tmp_path):
    assert run("edd", "--out", tmp_path / "e.csv") == 2
    assert run("edd", "--threshold", 3, "--auto", "--out", tmp_path / "e.csv") == 2


# ------------------------------------------------------------------ detect

def simulate(tmp_path, **kw):
    out = tmp_path / "stream.csv"
    args = ["simulate", "--out", out]
    for k, v in kw.items():
        args += [f"--{k.replace('_', '-')}", v]
    assert run(*args) == 0
    return out


def test_detect_zero_input_exact_cusum(tmp_path):
    path = tmp_path / "zeros.csv"
    path.write_text("t,x_1,x_2,x_3\n" + "".join(f"{t},0,0,0\n" for t in range(1, 21)))
    outdir = tmp_path / "det"
    assert run("detect", "--detector", "exact-cusum", "--scenario", "rank1-dense",
               "--input", path, "--threshold", 5, "--out-dir", outdir) == 0
    report = json.loads((outdir / "report.json").read_text())
    assert report["alarm_time"] is None
    stats = np.array([float(r[1]) for r in read_csv(outdir / "trajectory.csv")[1:]])
    assert len(stats) == 20
    assert np.all(np.maximum(stats, 0.0) == 0.0)


def test_detect_strong_signal_alarms(tmp_path):
    path = simulate(tmp_path, scenario="rank1-sparse", k=4, lam=10, tau=0, n=500)
    outdir = tmp_path / "det"
    assert run("detect", "--detector", "subspace-cusum", "--input", path, "--d", 1, "--w", 20,
               "--threshold", 30, "--out-dir", outdir) == 0
    report = json.loads((outdir / "report.json").read_text())
    assert report["alarm_time"] is not None and report["alarm_time"] < 100
    assert report["warmup_length"] == 20


def test_detect_infinite_threshold(tmp_path):
    path = simulate(tmp_path, k=3, n=100)
    outdir = tmp_path / "det"
    assert run("detect", "--detector", "eigchart", "--w", 10, "--input", path,
               "--out-dir", outdir) == 0
    report = json.loads((outdir / "report.json").read_text())
    assert report["alarm_time"] is None and report["threshold"] is None
    assert len(read_csv(outdir / "trajectory.csv")) == 1 + 91


def test_detect_dimension_mismatch(tmp_path):
    path = simulate(tmp_path, k=3, n=30)
    assert run("detect", "--input", path, "--k", 5, "--out-dir", tmp_path) == 2
    cfg = tmp_path / "det.json"
    cfg.write_text(json.dumps({"detector": "exact-cusum", "U": [[1.0], [0.0]], "rho": [1.0]}))
    assert run("detect", "--config", cfg, "--input", path, "--out-dir", tmp_path) == 2


def test_detect_config_file(tmp_path):
    path = simulate(tmp_path, k=3, n=60)
    cfg = tmp_path / "det.json"
    cfg.write_text(json.dumps({"detector": "exact-cusum", "U": [[1.0], [0.0], [0.0]],
                               "rho": [2.0], "threshold": 1e9}))
    outdir = tmp_path / "det"
    assert run("detect", "--config", cfg, "--input", path, "--out-dir", outdir) == 0
    report = json.loads((outdir / "report.json").read_text())
    assert report["config"]["rho"] == [2.0]
    assert report["threshold"] == 1e9


# ------------------------------------------------------------ swarm / plot

def test_swarm_two_detectors(tmp_path):
    swarm = tmp_path / "swarm.csv"
    assert run("synth-swarm", "--frames", 300, "--change", 150, "--agents", 10,
               "--out", swarm) == 0
    outdir = tmp_path / "out"
    assert run("swarm", "--input", swarm, "--detectors", "subspace-cusum,eigchart",
               "--window", 30, "--out-dir", outdir) == 0
    rows = read_csv(outdir / "swarm_scaled.csv")
    assert rows[0] == ["frame", "subspace-cusum", "eigchart"]
    assert len(rows) == 301
    vals = [float(v) for r in rows[1:] for v in r[1:] if v]
    assert min(vals) == 0.0 and max(vals) == 1.0
    svg = (outdir / "swarm.svg").read_text()
    assert svg.count("<g class=\"series\"") == 2
    doc = json.loads((outdir / "swarm.json").read_text())
    assert 150 < doc["alarm_frames"]["subspace-cusum"] <= 240


def test_swarm_null_case_stays_quiet(tmp_path):
    swarm = tmp_path / "swarm.csv"
    run("synth-swarm", "--frames", 400, "--change", 400, "--agents", 6, "--out", swarm)
    outdir = tmp_path / "out"
    assert run("swarm", "--input", swarm, "--detectors", "subspace-cusum",
               "--window", 30, "--out-dir", outdir) == 0
    doc = json.loads((outdir / "swarm.json").read_text())
    assert doc["alarm_frames"]["subspace-cusum"] is None


def test_swarm_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("frame,agent,x,y,vx,vy\n1,0,0,0,0,zero\n")
    assert run("swarm", "--input", bad, "--out-dir", tmp_path) == 2
    assert "row 2" in capsys.readouterr().err


def test_plot(tmp_path):
    data = tmp_path / "curve.csv"
    data.write_text("arl,cusum,scusum,eig\n100,5,8,9\n1000,9,14,20\n5000,12,20,30\n")
    out = tmp_path / "p.svg"
    assert run("plot", "--input", data, "--x", "arl", "--y", "cusum,scusum,eig", "--logx",
               "--out", out) == 0
    svg = out.read_text()
    assert svg.count("<polyline") == 3
    again = tmp_path / "q.svg"
    run("plot", "--input", data, "--x", "arl", "--y", "cusum,scusum,eig", "--logx", "--out", again)
    assert out.read_bytes() == again.read_bytes()


def test_plot_unknown_column(tmp_path):
    data = tmp_path / "curve.csv"
    data.write_text("a,b\n1,2\n")
    assert run("plot", "--input", data, "--x", "a", "--y", "zzz", "--out", tmp_path / "p.svg") == 2


def test_plot_single_point(tmp_path):
    data = tmp_path / "one.csv"
    data.write_text("a,b\n1,2\n")
    out = tmp_path / "p.svg"
    assert run("plot", "--input", data, "--x", "a", "--y", "b", "--out", out) == 0
    assert "<circle" in out.read_text()


def test_console_module_entry(tmp_path):
    cmd = [sys.executable, "-m", "subcusum", "simulate", "--k", "2", "--n", "3",
           "--out", str(tmp_path / "m.csv")]
    res = subprocess.run(cmd, capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "m.csv").exists()
