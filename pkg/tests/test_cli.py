import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from brochette import __version__
from brochette.cli import main
from brochette.config import ConfigError, ExperimentConfig, config_from_header, load_config, parse_config
from brochette.geodesic import BoxPolicy
from brochette.sweep import (
    CSV_FIELDS,
    SweepRecord,
    exponent_report,
    read_records,
    resolve_threads,
    run_sweep,
    target_exponent,
    write_records,
)

SMALL = """
[env]
dim = 2
master_seed = 17

[dist]
family = shifted_weibull
a = 1
beta = 1
lam = 1

[sweep]
n_grid = 16, 32
replicates = 3

[box]
scale = 1.0

[checks]
weibull_m = 200
weibull_reps = 400
ks_tolerance = 0.1
time_constant_reps = 5
time_constant_tolerance = 0.5
rho_radii = 4, 8, 16
rho_seeds = 3
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return str(p)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


def test_geodesic_constant_env(tmp_path, capsys):
    p = tmp_path / "c.ini"
    p.write_text("[dist]\nfamily = constant\nvalue = 2\n")
    code, out = run(["geodesic", "--config", str(p), "--n", "5"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["T"] == 10.0 and doc["H_max"] == doc["H_min"] == 0
    assert doc["path"] == [[x, 0] for x in range(6)]
    assert doc["provenance"]["version"] == __version__
    assert len(doc["provenance"]["config_sha256"]) == 64


def test_geodesic_zero_n(capsys):
    code, out = run(["geodesic", "--n", "0"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["T"] == 0 and doc["H_max"] == 0 and doc["H_min"] == 0


def test_geodesic_byte_identical(tmp_path, small_cfg):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert main(["geodesic", "--config", small_cfg, "--n", "64", "--seed", "5", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_geodesic_cap_exit_code(tmp_path, capsys):
    p = tmp_path / "cap.ini"
    p.write_text("[dist]\nfamily = bounded_power\nb = 1\nbeta = 2\n[box]\nh0 = 2\ncap = 3\n")
    code, _ = run(["geodesic", "--config", str(p), "--n", "64"], capsys)
    assert code == 3


def test_sweep_rows_and_thread_determinism(tmp_path, small_cfg, monkeypatch):
    outs = []
    for threads in ("1", "8"):
        out = tmp_path / f"s{threads}.csv"
        assert main(["sweep", "--config", small_cfg, "--threads", threads, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    monkeypatch.setenv("BROCHETTE_THREADS", "3")
    again = tmp_path / "again.csv"
    assert main(["sweep", "--config", small_cfg, "--out", str(again)]) == 0
    assert outs[0] == outs[1] == again.read_bytes()
    lines = outs[0].decode().splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    assert body[0].split(",") == CSV_FIELDS
    assert len(body) == 1 + 6
    keys = [tuple(map(int, ln.split(",")[:2])) for ln in body[1:]]
    assert keys == sorted(keys)
    assert any(ln.startswith("# config_sha256 ") for ln in lines)
    assert lines[0] == f"# brochette {__version__}"


def test_sweep_adding_replicates_keeps_rows(tmp_path, small_cfg):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["sweep", "--config", small_cfg, "--out", str(a), "--threads", "1"])
    main(["sweep", "--config", small_cfg, "--replicates", "5", "--out", str(b), "--threads", "1"])
    rows_a = {ln for ln in a.read_text().splitlines() if not ln.startswith("#")}
    rows_b = {ln for ln in b.read_text().splitlines() if not ln.startswith("#")}
    assert rows_a <= rows_b


def test_sweep_timings_column(tmp_path, small_cfg):
    out = tmp_path / "t.csv"
    main(["sweep", "--config", small_cfg, "--timings", "--out", str(out), "--n-grid", "8"])
    header = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")][0]
    assert header.endswith(",wall_time")


def test_sweep_json(small_cfg, capsys):
    code, out = run(["sweep", "--config", small_cfg, "--format", "json", "--n-grid", "8", "--replicates", "2"], capsys)
    doc = json.loads(out)
    assert code == 0 and len(doc["rows"]) == 2


def test_sweep_failed_rows_flagged(tmp_path, capsys):
    p = tmp_path / "cap.ini"
    p.write_text("[dist]\nfamily = bounded_power\n[sweep]\nn_grid = 64\nreplicates = 2\n[box]\nh0 = 2\ncap = 3\n")
    code, out = run(["sweep", "--config", str(p), "--threads", "1"], capsys)
    assert code == 3
    assert out.count(",cap_exceeded") == 2


def test_exponent_command(tmp_path, small_cfg, capsys):
    csv_path = tmp_path / "s.csv"
    main(["sweep", "--config", small_cfg, "--n-grid", "16", "32", "64", "--out", str(csv_path)])
    code, out = run(["exponent", str(csv_path), "--tolerance", "10"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["target_exponent"] == 0.5
    assert set(doc) >= {"slope", "stderr", "target_exponent", "pass"}
    code, out = run(["exponent", str(csv_path), "--tolerance", "0"], capsys)
    assert code == 4


def test_exponent_malformed_csv(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    assert run(["exponent", str(bad)], capsys)[0] == 2
    assert run(["exponent", str(tmp_path / "missing.csv")], capsys)[0] == 2


@pytest.mark.parametrize(
    "dist, dim, target",
    [
        ({"family": "shifted_weibull", "a": 1.0, "beta": 1.0}, 2, 0.5),
        ({"family": "shifted_weibull", "a": 1.0, "beta": 2.0}, 3, 0.5),
        ({"family": "bounded_power", "b": 1.0, "beta": 2.0}, 2, 1.0),
        ({"family": "bounded_power", "b": 1.0, "beta": 2.0}, 3, None),
    ],
)
def test_target_exponent(dist, dim, target):
    assert target_exponent(ExperimentConfig(dim=dim, dist=dist)) == target


def test_exponent_report_uses_medians():
    rows = [SweepRecord(n, r, 1.0, int(n**0.5) + r, 0, 1, False) for n in (16, 64, 256) for r in (-1, 0, 1)]
    rep = exponent_report(rows, ExperimentConfig())
    assert rep["slope"] == pytest.approx(0.5)
    assert rep["pass"] is True


def test_exponent_report_widens_for_failed_rows():
    rows = [SweepRecord(n, r, 1.0, int(n**0.5) + r, 0, 1, False) for n in (16, 64, 256) for r in (-1, 0, 1)]
    rows.append(SweepRecord(256, 2, 9.0, -1, -1, 8, True, "cap_exceeded", T_lower=3.0))
    rep = exponent_report(rows, ExperimentConfig())
    assert rep["slope"] == pytest.approx(0.5)
    lo, hi = rep["slope_range"]
    assert lo < 0.5 < hi
    assert rep["failed_rows"] == 1


def test_record_t_bounds():
    assert SweepRecord(4, 0, 2.0, 1, 1, 4, False).T_bounds == (2.0, 2.0)
    assert SweepRecord(4, 0, 2.0, -1, -1, 4, True, "cap_exceeded", T_lower=1.5).T_bounds == (1.5, 2.0)
    assert SweepRecord(4, 0, math.nan, -1, -1, -1, True, "cap_exceeded").T_bounds == (0.0, math.inf)
    assert SweepRecord(4, 0, math.nan, -1, -1, -1, False, "error:ValueError").T_bounds == (0.0, math.inf)


def test_capped_sweep_rows_keep_time_bounds(tmp_path):
    cfg = ExperimentConfig(
        dist={"family": "bounded_power", "b": 1.0, "beta": 2.0}, n_grid=(24,), replicates=4,
        box=BoxPolicy(h0=1, cap=1),
    )
    rows = run_sweep(cfg, 1)
    exact = run_sweep(cfg.replace(box=BoxPolicy()), 1)
    capped = [r for r in rows if not r.ok]
    assert capped
    for r, e in zip(rows, exact):
        lo, hi = r.T_bounds
        assert lo <= e.T * (1 + 1e-12) and e.T <= hi * (1 + 1e-12)
    path = tmp_path / "cap.csv"
    with open(path, "w", newline="") as fh:
        write_records(rows, fh, cfg)
    _, back = read_records(str(path))
    assert [r.T_bounds for r in back] == [r.T_bounds for r in rows]
    assert [r.status for r in back] == [r.status for r in rows]


def test_checks_command(small_cfg, capsys):
    code, out = run(["checks", "--config", small_cfg, "--threads", "1"], capsys)
    doc = json.loads(out)
    names = [c["name"] for c in doc["checks"]]
    assert names == ["time_constant", "weibull_minimum", "mean_time_exponent", "rho_trace"]
    tc = doc["checks"][0]
    assert tc["min_excess"] >= 0
    assert code == (0 if doc["pass"] else 4)
    for c in doc["checks"]:
        assert {"value", "target", "tolerance", "pass"} <= set(c)


def test_weibull_command(small_cfg, capsys):
    code, out = run(["weibull", "--config", small_cfg, "--m", "300", "--reps", "500"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["m"] == 300 and doc["value"] < 0.1
    code, _ = run(["weibull", "--config", small_cfg, "--m", "1", "--reps", "2000"], capsys)
    assert code == 0
    code, _ = run(["weibull", "--config", small_cfg, "--m", "300", "--reps", "20000", "--seed", "1"], capsys)
    assert code == 0


def test_rho_trace_command(small_cfg, capsys):
    code, out = run(["rho-trace", "--config", small_cfg, "--R", "12", "--format", "csv"], capsys)
    body = [ln for ln in out.splitlines() if not ln.startswith("#")]
    assert code == 0 and body[0] == "radius,N,boundary_T,new_lines" and len(body) == 13


def test_detour_command(small_cfg, capsys):
    code, out = run(["detour", "--config", small_cfg, "--n", "256", "--replicates", "4", "--epsilon", "0.05"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["summary"]["instances"] == 4 and doc["summary"]["violations"] == 0


def test_config_errors(tmp_path, capsys):
    cases = [
        "[bogus]\n",
        "[env]\ndim = 1\n",
        "[env]\ncolour = red\n",
        "[dist]\nfamily = cauchy\n",
        "[sweep]\nreplicates = 0\n",
        "[sweep]\nn_grid = 4, 4\n",
        "[checks]\nepsilon = 2\n",
        "not an ini file",
    ]
    for i, text in enumerate(cases):
        p = tmp_path / f"bad{i}.ini"
        p.write_text(text)
        assert run(["sweep", "--config", str(p)], capsys)[0] == 2, text
    assert run(["sweep", "--config", str(tmp_path / "nope.ini")], capsys)[0] == 2


def test_config_round_trip():
    cfg = parse_config(SMALL)
    again = parse_config(cfg.render())
    assert again == cfg and again.digest == cfg.digest
    header = ["# brochette x", f"# config_sha256 {cfg.digest}"] + [f"# {ln}" for ln in cfg.render().splitlines()]
    assert config_from_header(header) == cfg
    assert config_from_header(["n,replicate"]) is None


def test_flags_override_file(small_cfg, capsys):
    _, out = run(["geodesic", "--config", small_cfg, "--n", "8", "--seed", "99"], capsys)
    assert "master_seed = 99" in json.loads(out)["provenance"]["config"]


def test_thread_resolution(monkeypatch):
    monkeypatch.setenv("BROCHETTE_THREADS", "5")
    assert resolve_threads(None) == 5
    assert resolve_threads(2) == 2
    monkeypatch.setenv("BROCHETTE_THREADS", "many")
    with pytest.raises(ConfigError):
        resolve_threads(None)
    monkeypatch.delenv("BROCHETTE_THREADS")
    assert resolve_threads(None, ExperimentConfig(threads=7)) == 7


def test_console_script_entry():
    res = subprocess.run([sys.executable, "-m", "brochette.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout


def test_shipped_configs_parse():
    paths = sorted((Path(__file__).resolve().parent.parent / "configs").glob("*.ini"))
    assert paths
    for p in paths:
        load_config(str(p))
