"""Write sample inputs and a config for every CLI subcommand.

    python demos/make_cli_inputs.py cli_demo
    denguerisk simulate --config cli_demo/simulate.json --out cli_demo/trajectory.csv

Paths inside each config are relative to the config file.
"""

import datetime as dt
import json
import sys
from pathlib import Path

import numpy as np
from scipy import stats

from denguerisk.estimation import FilterModel, simulate_cases, write_case_series
from denguerisk.forcing import ClimateSeries, default_capacity_model, default_rates, write_climate
from denguerisk.lifecycle import LifecycleParams
from denguerisk.pipeline import ClimateGrid, write_grid
from denguerisk.transmission import EpiParams

out = Path(sys.argv[1] if len(sys.argv) > 1 else "cli_demo")
out.mkdir(parents=True, exist_ok=True)
rng = np.random.default_rng(0)
start = dt.date(2022, 1, 3)
days = np.arange(2 * 364)
tavg = 25 + 4 * np.sin(2 * np.pi * (days - 80) / 365) + rng.normal(0, 0.8, days.size)
precip = np.maximum(0.0, 0.006 + 0.005 * np.sin(2 * np.pi * (days - 120) / 365)
                    + rng.normal(0, 0.002, days.size))
climate = ClimateSeries(start, tavg, precip)
write_climate(climate, out / "climate.csv")

epi = {"phi_HV": 0.5, "phi_VH": 0.5, "gamma_H": 1 / 5.5, "eta_H": 0.2, "N_H": 1e5}
model = FilterModel(LifecycleParams(3, default_rates(), dt=0.05), EpiParams(0.83, **epi),
                    climate, init_infectious=10.0, burn_in_days=365)
C = 3.0 * (1 + 0.5 * np.sin(2 * np.pi * (np.arange(104) - 30) / 52))
cases, _ = simulate_cases(model, C, 0.83, 104, seed=1, location="Demoville")
write_case_series(cases, out / "cases.csv")

m = default_capacity_model()
p = rng.uniform(0, 0.02, 1000)
cap = stats.invgauss.rvs(m.mu(p) / m.lam(p), scale=m.lam(p), random_state=rng)
(out / "capacity_pairs.csv").write_text(
    "p,C\n" + "".join(f"{a},{b}\n" for a, b in zip(p, cap)))
bites = stats.invgauss.rvs(0.83 / 2.0, scale=2.0, size=61, random_state=rng)
(out / "bites.csv").write_text("n_B\n" + "".join(f"{b}\n" for b in bites))
adults = 200 + 100 * np.sin(np.arange(60) / 5) + rng.uniform(0, 30, 60)
(out / "traps.csv").write_text("site,count,adults\n" + "".join(
    f"site{i % 2},{rng.poisson(0.04 * a + 0.5)},{a}\n" for i, a in enumerate(adults)))

cells = {(-5.0 - 0.25 * i, 35.0 + 0.25 * j):
         ClimateSeries(start, tavg[:365] - 2.0 * i, precip[:365] * (1 + 0.3 * j))
         for i in range(4) for j in range(4)}
write_grid(ClimateGrid(cells), out / "grid.csv")

configs = {
    "simulate.json": {"climate": "climate.csv", "J": 20, "capacity": 1000.0},
    "simulate_epi.json": {"climate": "climate.csv", "J": 5, "capacity": 3e5,
                          "epi": {"n_B": 0.83, **epi}, "infectious": 10.0},
    "oracle.json": {"climate": "climate.csv", "J": 5, "capacity": 1000.0, "horizon": 200,
                    "init": {"eggs": 100, "larvae": 50, "pupae": 20, "adults": 10}},
    "fit_pf.json": {"climate": "climate.csv", "cases": "cases.csv", "J": 3, "dt": 0.05,
                    "epi": epi, "init_infectious": 10.0, "burn_in_days": 365,
                    "particles": 500},
    "fit_capacity.json": {"data": "capacity_pairs.csv", "chains": 4, "burn": 1000,
                          "keep": 1000},
    "fit_bites.json": {"data": "bites.csv"},
    "fit_traps.json": {"data": "traps.csv"},
    "train_risk.json": {"J": 5, "capacity_scale": 1.0, "locations": [
        {"cases": "cases.csv", "climate": "climate.csv"}]},
    "riskmap.json": {"grid": "grid.csv", "J": 20},
}
for name, body in configs.items():
    (out / name).write_text(json.dumps(body, indent=2) + "\n")
print(f"wrote inputs and {len(configs)} configs to {out}/")
