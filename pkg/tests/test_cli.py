import csv
import io
import json
import math

import pytest

from tmss.cli import (EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, HEADER, ConfigError, RunConfig,
                      build_model, config_from_footer, load_config, main, parse_config)


def read_rows(path):
    with open(path, encoding="utf-8") as fh:
        body = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("".join(body))))


def body(path):
    with open(path, "rb") as fh:
        return b"".join(line for line in fh if not line.startswith(b"#"))


def test_parse_config():
    text = "# comment\n\nr = 1.5\nxi1 = 0.1,0.2  # trailing\n"
    assert parse_config(text) == {"r": 1.5, "xi1": complex(0.1, 0.2)}
    for bad in ("r = 1\nr = 2\n", "bogus = 1\n", "r 1.5\n", "cutoffs = 1,2\n", "n_traj = x\n"):
        with pytest.raises(ConfigError):
            parse_config(bad)


def test_load_config_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("r = 1.5\nkappa_over_theta = 0.5\n", encoding="utf-8")
    cfg = load_config(str(path), ("kappa_over_theta=1", "cutoffs=2,3,3"))
    assert cfg.kappa_over_theta == 1.0 and cfg.cutoffs == (2, 3, 3)
    with pytest.raises(ConfigError):
        load_config(str(path), ("nonsense",))


def test_coupling_sources_exclusive():
    assert build_model(RunConfig(r=2.0)).theta == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        build_model(RunConfig())
    with pytest.raises(ConfigError):
        build_model(RunConfig(r=2.0, xi1=0.5, xi2=1.0))
    with pytest.raises(ConfigError):
        build_model(RunConfig(r=2.0, kappa=0.1, kappa_over_theta=0.1))
    m = build_model(RunConfig(xi1=0.5, xi2=1j, kappa_over_theta=0.5))
    assert m.kappa == pytest.approx(0.5 * m.theta)


def test_params_feasibility(capsys):
    code = main(["params", "-s", "r=1.5", "-s", "theta_over_2pi_hz=90e3", "-s", "kappa_over_2pi_hz=7e3"])
    assert code == EXIT_OK
    out = dict(line.split("=", 1) for line in capsys.readouterr().out.splitlines())
    out = {k.strip(): v.split()[0] for k, v in out.items()}
    assert float(out["T_pi"]) == pytest.approx(1 / (2 * 90e3), rel=1e-5)
    assert float(out["photon_lifetime"]) == pytest.approx(1 / (2 * math.pi * 7e3), rel=1e-5)
    assert float(out["nbar"]) == pytest.approx(5.76, rel=1e-5)


@pytest.mark.parametrize("argv", [
    ["params", "-s", "r=1"],
    ["params", "-s", "r=0.5"],
    ["params", "-s", "r=2", "-s", "xi1=1,0", "-s", "xi2=2,0"],
    ["params", "-s", "colour=blue"],
    ["evolve", "-s", "r=2", "-s", "kappa=0.1", "-s", "method=analytic"],
    ["evolve", "-s", "r=2", "-s", "method=euler"],
    ["evolve", "-s", "r=2", "-s", "method=mcwf", "-s", "n_traj=0"],
    ["xcheck", "no-such-scenario"],
])
def test_config_errors_exit_2(argv, capsys):
    assert main(argv) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_numerical_failure_exit_3(tmp_path, capsys):
    # a cavity cutoff of 1 with no jump sectors kept loses trace at once
    argv = ["evolve", "-s", "r=2", "-s", "kappa_over_theta=1", "-s", "cutoffs=1,1,1",
            "-s", "max_jumps=0", "-o", str(tmp_path / "x.csv")]
    assert main(argv) == EXIT_NUMERICAL


def test_evolve_gaussian_csv(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["evolve", "-s", "r=2", "-s", "method=gaussian", "-o", str(out)]) == EXIT_OK
    with open(out, encoding="utf-8") as fh:
        assert fh.readline().strip() == ",".join(HEADER)
    rows = read_rows(out)
    assert len(rows) == 201
    mid = rows[100]
    assert float(mid["t_over_Tpi"]) == pytest.approx(1.0)
    assert float(mid["zeta12"]) <= 1e-10
    assert float(mid["n_1"]) == pytest.approx(16 / 9, abs=1e-9)
    assert float(mid["n_2"]) == pytest.approx(16 / 9, abs=1e-9)
    assert rows[0]["zeta12"] == ""


def test_time_column_in_theta_units(tmp_path):
    out = tmp_path / "xi.csv"
    assert main(["evolve", "-s", "xi1=0.3,0", "-s", "xi2=0,0.6", "-s", "method=gaussian",
                 "-s", "n_outputs=3", "-o", str(out)]) == EXIT_OK
    rows = read_rows(out)
    assert float(rows[1]["t"]) == pytest.approx(math.pi)
    out = tmp_path / "hz.csv"
    assert main(["evolve", "-s", "r=1.5", "-s", "theta_over_2pi_hz=90e3", "-s", "method=gaussian",
                 "-s", "n_outputs=3", "-o", str(out)]) == EXIT_OK
    assert float(read_rows(out)[1]["t"]) == pytest.approx(1 / 180e3)


def test_mcwf_csv_reproducible(tmp_path, monkeypatch):
    argv = ["evolve", "-s", "r=1.5", "-s", "kappa_over_theta=1", "-s", "method=mcwf",
            "-s", "n_traj=60", "-s", "master_seed=42", "-s", "cutoffs=3,6,6", "-s", "n_outputs=21"]
    paths = []
    for i, threads in enumerate(("1", "1", "4")):
        monkeypatch.setenv("TMSS_THREADS", threads)
        paths.append(tmp_path / f"run{i}.csv")
        assert main(argv + ["-o", str(paths[-1])]) == EXIT_OK
    assert body(paths[0]) == body(paths[1]) == body(paths[2])
    header = open(paths[0], encoding="utf-8").readline().strip().split(",")
    assert header[:len(HEADER)] == list(HEADER)
    assert header[len(HEADER):] == [f"{c}_se" for c in HEADER[2:]]
    footer = open(paths[0], encoding="utf-8").read()
    assert "# master_seed = 42" in footer and "# run.n_traj = 60" in footer


def test_footer_reproduces_run(tmp_path):
    first = tmp_path / "a.csv"
    argv = ["evolve", "-s", "r=2", "-s", "kappa_over_theta=0.5", "-s", "cutoffs=3,5,5",
            "-s", "n_outputs=11", "-s", "initial_cavity=thermal:0.3", "-o", str(first)]
    assert main(argv) == EXIT_OK
    cfg = config_from_footer(str(first))
    assert cfg.cutoffs == (3, 5, 5) and cfg.initial_cavity == "thermal:0.3"
    second = tmp_path / "b.csv"
    config = tmp_path / "replay.cfg"
    lines = [l[2:] for l in open(first, encoding="utf-8") if l.startswith("# ") and not l.startswith("# run.")]
    config.write_text("".join(lines).replace(str(first), str(second)), encoding="utf-8")
    assert main(["evolve", "-c", str(config)]) == EXIT_OK
    assert body(first) == body(second)


def test_fig2_gaussian(tmp_path, capsys):
    assert main(["fig2", "-o", str(tmp_path)]) == EXIT_OK
    for tag in ("k01", "k05", "k10"):
        assert (tmp_path / f"fig2_{tag}.csv").exists()
    rows = read_rows(tmp_path / "fig2_combined.csv")
    assert list(rows[0]) == ["t_over_Tpi", "zeta12_k01", "zeta12_k05", "zeta12_k10"]
    at = rows[100]
    values = [float(at[f"zeta12_{t}"]) for t in ("k01", "k05", "k10")]
    assert values[0] < values[1] < values[2] < 1
    assert values[0] <= 0.2
    assert main(["fig2", "-s", "r=2"]) == EXIT_CONFIG


def test_xcheck_decay_smoke(tmp_path, capsys):
    report = tmp_path / "report.json"
    assert main(["xcheck", "decay-smoke", "-o", str(report)]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") == 2
    summary = json.loads(out.splitlines()[-1].removeprefix("SUMMARY "))
    assert summary["passed"] and summary == json.loads(report.read_text())
