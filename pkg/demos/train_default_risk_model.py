"""Regenerate ``src/denguerisk/data/default_risk_model.json``.

Synthetic locations get seasonal temperature and rainfall. Each location runs
the coupled transmission model for three seasons, each season starting with
a fully susceptible population and a small imported infection. Weekly cases
are Poisson draws around the simulated incidence. Weeks are labeled
rising/falling from the counts, paired with the pipeline's own features on
the week's first day, and the logistic model is trained on the pooled set.

    python demos/train_default_risk_model.py [--locations 60] [--seed 7]
"""

import argparse
import datetime as dt
from dataclasses import replace
from pathlib import Path

import numpy as np

from denguerisk.estimation import CaseSeries
from denguerisk.forcing import ClimateSeries
from denguerisk.lifecycle import burn_in
from denguerisk.pipeline import PipelineConfig, cell_features, run_cell
from denguerisk.risk import RiskModel, predict, risk_band, save_model, train, training_set
from denguerisk.transmission import TransmissionState, simulate_epi

OUT = Path(__file__).resolve().parents[1] / "src" / "denguerisk" / "data" / "default_risk_model.json"
START = dt.date(2018, 1, 1)
SEASONS = 3
POPULATION = 1e7
IMPORTED = 1e-6   # infectious humans per human at the start of each season


def synthetic_climate(rng) -> tuple[ClimateSeries, float]:
    days = np.arange(365 * SEASONS)
    phase = 2 * np.pi * days / 365.0
    t_mean = rng.uniform(16.0, 30.0)
    t_amp = rng.uniform(3.0, 10.0)
    tavg = t_mean - t_amp * np.cos(phase) + rng.normal(0.0, 1.0, days.size)
    p_mean = rng.uniform(0.001, 0.015)
    precip = np.clip(p_mean * (1 - rng.uniform(0, 1) * np.cos(phase + rng.uniform(0, 2 * np.pi)))
                     * rng.exponential(1.0, days.size), 0.0, None)
    return ClimateSeries(START, tavg, precip), rng.uniform(0.1, 1.0)


def season_cases(climate, config, rng) -> np.ndarray:
    life = config.lifecycle()
    state = burn_in(life, climate, config.burn_in_days)
    weekly = []
    for s in range(SEASONS):
        clim = ClimateSeries(climate.start_date + dt.timedelta(days=365 * s),
                             climate.tavg[365 * s:365 * (s + 1)],
                             climate.precip[365 * s:365 * (s + 1)])
        init = TransmissionState.disease_free(state, 1.0).seeded(IMPORTED)
        traj = simulate_epi(config.epi, life, clim, init)
        daily = traj.daily_cases[:364] * POPULATION
        weekly.append(daily.reshape(52, 7).sum(axis=1))
        state = traj.state(365).lifecycle()
    weekly = np.concatenate(weekly)
    return rng.poisson(np.clip(weekly, 0.0, None))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--locations", type=int, default=60)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    base = PipelineConfig(risk_model=RiskModel(0.0, 0.0, 0.0))
    data = []
    for i in range(args.locations):
        climate, scale = synthetic_climate(rng)
        config = replace(base, capacity_scale=scale)
        counts = season_cases(climate, config, rng)
        feats = cell_features(climate, config)
        series = CaseSeries(f"loc{i:03d}", START, counts)
        weeks = training_set(series, START, feats.r0_ma, feats.vf_ma)
        data.extend(weeks)
        print(f"loc{i:03d}: {int(counts.sum()):8d} cases, {len(weeks):3d} labeled weeks")

    model = train(data, seed=args.seed)
    model = replace(model, metadata={**model.metadata, "locations": args.locations,
                                     "source": "demos/train_default_risk_model.py"})
    print("weights", model.w0, model.w1, model.w2, "accuracy", model.metadata["train_accuracy"])

    # sanity: favourable constant warmth is high risk, frost is low
    for T in (29.0, -10.0):
        clim = ClimateSeries(START, np.full(365, T), np.full(365, 0.008))
        res = run_cell(clim, replace(base, risk_model=model, capacity_scale=2.0))
        print(f"constant {T:5.1f} C: risk {res.risk.min():.3f}..{res.risk.max():.3f} "
              f"({risk_band(res.risk.min())})")
    print("predict(r0=1, vf=1):", predict(model, 1.0, 1.0))
    save_model(model, args.out)
    print("wrote", args.out)


if __name__ == "__main__":
    main()
