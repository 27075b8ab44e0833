import json
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats

from denguerisk.cli import EXIT_INVALID, EXIT_NUMERIC, EXIT_OK, main
from denguerisk.estimation import CaseSeries, write_case_series
from denguerisk.forcing import ClimateSeries, write_climate
from denguerisk.pipeline import ClimateGrid, write_grid

from conftest import START


@pytest.fixture
def workdir(tmp_path):
    days = np.arange(70)
    write_climate(ClimateSeries(START, 26 + 2 * np.sin(days / 10), np.full(70, 0.006)),
                  tmp_path / "climate.csv")
    return tmp_path


def _config(d, name, **body):
    p = d / name
    p.write_text(json.dumps(body))
    return str(p)


def test_simulate_and_epi(workdir, capsys):
    cfg = _config(workdir, "sim.json", climate="climate.csv", J=3, capacity=100.0,
                  burn_in_days=60)
    out = workdir / "traj.csv"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert len(out.read_text().splitlines()) == 72
    cfg = _config(workdir, "epi.json", climate="climate.csv", J=3, capacity=100.0,
                  burn_in_days=60, epi={"n_B": 0.8, "phi_HV": 0.5, "phi_VH": 0.5,
                                        "gamma_H": 0.18, "eta_H": 0.2, "N_H": 100.0})
    assert main(["simulate", "--config", cfg, "--out", str(workdir / "epi.csv")]) == EXIT_OK


def test_oracle_check(workdir):
    cfg = _config(workdir, "o.json", climate="climate.csv", J=2, capacity=500.0, horizon=40)
    out = workdir / "o_report.json"
    assert main(["oracle-check", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["pass"]
    strict = _config(workdir, "o2.json", climate="climate.csv", J=2, capacity=500.0,
                     horizon=40, tolerance=1e-12)
    assert main(["oracle-check", "--config", strict, "--out", str(out)]) == EXIT_NUMERIC


def test_fit_pf(workdir):
    write_case_series(CaseSeries("A", START, [3, 5, 4, 8, 6]), workdir / "cases.csv")
    cfg = _config(workdir, "pf.json", climate="climate.csv", cases="cases.csv", J=2,
                  dt=0.05, particles=50, smoothing_samples=20, burn_in_days=100,
                  epi={"phi_HV": 0.5, "phi_VH": 0.5, "gamma_H": 0.18, "eta_H": 0.2,
                       "N_H": 10000.0})
    out = workdir / "post.csv"
    assert main(["fit-pf", "--config", cfg, "--out", str(out), "--seed", "3"]) == EXIT_OK
    assert len(out.read_text().splitlines()) == 6


def test_fit_bites_and_traps(workdir):
    x = stats.invgauss.rvs(0.4, scale=2.0, size=300, random_state=1)
    (workdir / "bites.csv").write_text("n_B\n" + "\n".join(map(str, x)) + "\n")
    cfg = _config(workdir, "b.json", data="bites.csv")
    out = workdir / "b.json.out"
    assert main(["fit-bites", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["mu"] == pytest.approx(x.mean())
    rng = np.random.default_rng(0)
    a = rng.uniform(50, 300, 60)
    rows = [f"s{i % 2},{rng.poisson(0.05 * v + 0.5)},{v}" for i, v in enumerate(a)]
    (workdir / "traps.csv").write_text("site,count,adults\n" + "\n".join(rows) + "\n")
    cfg = _config(workdir, "t.json", data="traps.csv", n_burn=300, n_keep=300)
    out = workdir / "t.out.json"
    assert main(["fit-traps", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert set(json.loads(out.read_text())) == {"s0", "s1"}


def test_fit_capacity(workdir):
    rng = np.random.default_rng(0)
    p = rng.uniform(0, 0.02, 150)
    C = rng.gamma(5.0, 0.4, 150)
    (workdir / "cap.csv").write_text(
        "p,C\n" + "\n".join(f"{a},{b}" for a, b in zip(p, C)) + "\n")
    cfg = _config(workdir, "c.json", data="cap.csv", chains=2, burn=30, keep=30)
    out = workdir / "cap.json"
    assert main(["fit-capacity", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert "posterior_mean" in json.loads(out.read_text())


def test_train_risk_and_riskmap(workdir):
    write_case_series(CaseSeries("A", START, [3, 6, 12, 20, 15, 9, 5, 4, 6]),
                      workdir / "cases.csv")
    cfg = _config(workdir, "r.json", J=3, burn_in_days=60,
                  locations=[{"cases": "cases.csv", "climate": "climate.csv"}])
    model = workdir / "model.json"
    assert main(["train-risk", "--config", cfg, "--out", str(model)]) == EXIT_OK
    cells = {(0.0, 0.0): ClimateSeries.constant(27.0, 3, 0.006),
             (0.0, 0.25): ClimateSeries.constant(-5.0, 3)}
    write_grid(ClimateGrid(cells), workdir / "grid.csv")
    cfg = _config(workdir, "m.json", grid="grid.csv", J=3, burn_in_days=60,
                  risk_model="model.json")
    out = workdir / "maps"
    assert main(["riskmap", "--config", cfg, "--out", str(out), "--threads", "2"]) == EXIT_OK
    assert sorted(f.name for f in out.iterdir())[:2] == ["risk_2022-01-01.csv",
                                                         "risk_2022-01-01.ppm"]
    assert len(list(out.iterdir())) == 6


def test_invalid_inputs_exit_2(workdir, capsys):
    assert main(["simulate", "--config", str(workdir / "missing.json")]) == EXIT_INVALID
    cfg = _config(workdir, "x.json", J=3)
    assert main(["simulate", "--config", cfg]) == EXIT_INVALID
    assert "climate" in capsys.readouterr().err
    (workdir / "bad.csv").write_text("date,tavg_c,precip_m\n2022-01-01,20,-1\n")
    cfg = _config(workdir, "y.json", climate="bad.csv")
    assert main(["simulate", "--config", cfg]) == EXIT_INVALID
    assert main(["simulate", "--config", cfg, "--threads", "0"]) == EXIT_INVALID


def test_integration_failure_exits_3(workdir):
    cfg = _config(workdir, "z.json", climate="climate.csv", J=100, dt=2.0, dt_min=2.0,
                  init={"adults": 10.0})
    assert main(["simulate", "--config", cfg, "--out", str(workdir / "t.csv")]) == EXIT_NUMERIC


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "denguerisk.cli", "--help"],
                         capture_output=True, text=True, check=True)
    for name in ("simulate", "oracle-check", "fit-pf", "riskmap"):
        assert name in out.stdout
