"""Command-line entry point.

Every subcommand reads a JSON config (paths inside it resolve against the
config's directory) and accepts ``--seed``, ``--out`` and ``--threads``.
Exit status is 0 on success, 2 on invalid input and 3 on numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import DegenerateFilterError, IntegrationError
from .estimation import (ConvergenceWarning, FilterModel, ProposalConfig, fit_bites_ig,
                         fit_capacity_ig, fit_trap_sites, load_case_series, pf_smooth,
                         run_filter, write_posterior_csv)
from .forcing import CapacityModel, default_rates, load_climate, load_rate_tables
from .lifecycle import LifecycleParams, LifecycleState, burn_in, integral_oracle, simulate
from .pipeline import PipelineConfig, cell_features, load_grid, render, run_grid
from .risk import save_model, train, training_set
from .transmission import EpiParams, TransmissionState, simulate_epi

__all__ = ["main", "EXIT_OK", "EXIT_INVALID", "EXIT_NUMERIC"]

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
log = logging.getLogger("denguerisk")


class ConfigError(ValueError):
    pass


class _Config(dict):
    """Config mapping that remembers its directory and names missing keys."""

    def __init__(self, data: dict, base: Path):
        super().__init__(data)
        self.base = base

    def need(self, key):
        if key not in self:
            raise ConfigError(f"config is missing required key {key!r}")
        return self[key]

    def path(self, key) -> Path:
        return self.base / self.need(key)


def _load_config(path) -> _Config:
    if path is None:
        raise ConfigError("--config is required")
    path = Path(path)
    data = json.loads(path.read_text())
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return _Config(data, path.parent)


def _lifecycle(cfg: _Config) -> LifecycleParams:
    rates = load_rate_tables(cfg.path("rates")) if cfg.get("rates") else default_rates()
    cap = cfg.get("capacity", float("inf"))
    cap = CapacityModel.from_dict(cap) if isinstance(cap, dict) else float(cap)
    kw = {k: cfg[k] for k in ("dt", "dt_min", "tol") if k in cfg}
    return LifecycleParams(int(cfg.get("J", 20)), rates, cap,
                           float(cfg.get("capacity_scale", 1.0)), **kw)


def _initial(cfg: _Config, life: LifecycleParams, climate) -> LifecycleState:
    init = cfg.get("init", "burn_in")
    if init == "burn_in":
        return burn_in(life, climate, int(cfg.get("burn_in_days", 730)))
    if not isinstance(init, dict):
        raise ConfigError("init must be 'burn_in' or a mapping of stage totals")
    return LifecycleState.fresh(life.J, **{k: float(v) for k, v in init.items()})


def _out(args, default: str) -> Path:
    return Path(args.out) if args.out else Path(default)


def cmd_simulate(args, cfg: _Config) -> int:
    climate = load_climate(cfg.path("climate"))
    life = _lifecycle(cfg)
    init = _initial(cfg, life, climate)
    out = _out(args, "trajectory.csv")
    if "epi" in cfg:
        epi = EpiParams.from_dict(cfg["epi"])
        state = TransmissionState.disease_free(init, epi.N_H).seeded(
            float(cfg.get("infectious", 1.0)))
        simulate_epi(epi, life, climate, state).to_csv(out)
    else:
        simulate(life, climate, init).to_csv(out, substates=bool(cfg.get("substates", False)))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_oracle_check(args, cfg: _Config) -> int:
    climate = load_climate(cfg.path("climate"))
    life = _lifecycle(cfg)
    init = cfg.get("init", {"adults": 100.0})
    if not isinstance(init, dict):
        raise ConfigError("oracle-check needs init as a mapping of stage totals")
    state = LifecycleState.fresh(life.J, **{k: float(v) for k, v in init.items()})
    horizon = int(cfg.get("horizon", min(200, len(climate))))
    tol = float(cfg.get("tolerance", 0.01))
    sim = simulate(life, climate, state, horizon=horizon).totals
    ref = integral_oracle(life, climate, state, horizon).totals
    scale = np.maximum(np.abs(ref).max(axis=0), 1e-300)
    err = (np.abs(sim - ref) / scale).max(axis=0)
    report = {"J": life.J, "horizon": horizon, "tolerance": tol,
              "max_relative_error": dict(zip(("eggs", "larvae", "pupae", "adults"),
                                             map(float, err))),
              "pass": bool(np.all(err <= tol))}
    out = _out(args, "oracle_check.json")
    out.write_text(json.dumps(report, indent=2) + "\n")
    print(json.dumps(report["max_relative_error"]), "PASS" if report["pass"] else "FAIL")
    return EXIT_OK if report["pass"] else EXIT_NUMERIC


def cmd_fit_pf(args, cfg: _Config) -> int:
    all_series = load_case_series(cfg.path("cases"))
    name = cfg.get("location") or next(iter(sorted(all_series)))
    if name not in all_series:
        raise ConfigError(f"location {name!r} not in {cfg['cases']}")
    series = all_series[name]
    climate = load_climate(cfg.path("climate"))
    if climate.start_date != series.start_date:
        off = (series.start_date - climate.start_date).days
        if off < 0:
            raise ConfigError("climate starts after the first reporting week")
        climate = climate.window(off, len(climate) - off)
    life = _lifecycle(cfg)
    epi = EpiParams.from_dict({"n_B": 1.0, **cfg.need("epi")})
    model = FilterModel(life, epi, climate, float(cfg.get("init_infectious", 1.0)),
                        int(cfg.get("burn_in_days", 730)))
    proposal = ProposalConfig(**cfg.get("proposal", {}))
    result = run_filter(series, model, proposal, int(cfg.get("particles", 2000)), args.seed)
    smooth = pf_smooth(result, int(cfg.get("smoothing_samples", 200)), args.seed)
    out = _out(args, f"posterior_{name}.csv")
    write_posterior_csv(result, smooth, out)
    print(f"{name}: log evidence {result.log_evidence:.3f}, "
          f"mean n_B {float(np.mean(smooth.mean['n_B'])):.4f}; wrote {out}")
    return EXIT_OK


def _read_columns(path: Path, names) -> dict:
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [n for n in names if n not in (reader.fieldnames or [])]
        if missing:
            raise ConfigError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = list(reader)
    try:
        return {n: [r[n] for r in rows] for n in names}
    except KeyError as exc:
        raise ConfigError(f"{path}: ragged row, missing {exc}") from None


def _floats(values, path):
    try:
        return np.array([float(v) for v in values])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def cmd_fit_capacity(args, cfg: _Config) -> int:
    path = cfg.path("data")
    cols = _read_columns(path, ("p", "C"))
    p, C = _floats(cols["p"], path), _floats(cols["C"], path)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        post = fit_capacity_ig(p, C, n_chains=int(cfg.get("chains", 4)),
                               n_burn=int(cfg.get("burn", 3000)),
                               n_keep=int(cfg.get("keep", 3000)), seed=args.seed)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    report = {"posterior_mean": post.posterior_mean_model().to_dict(),
              "map": post.map_model.to_dict(),
              "rhat": dict(zip(post.names, map(float, post.rhat))),
              "acceptance": list(map(float, post.acceptance)),
              "converged": post.converged}
    out = _out(args, "capacity_fit.json")
    out.write_text(json.dumps(report, indent=2) + "\n")
    print(f"converged={post.converged}; wrote {out}")
    return EXIT_OK


def cmd_fit_bites(args, cfg: _Config) -> int:
    path = cfg.path("data")
    column = cfg.get("column", "n_B")
    fit = fit_bites_ig(_floats(_read_columns(path, (column,))[column], path))
    report = {"mu": fit.mu, "lambda": fit.lam, "n": fit.n, "capped": fit.capped,
              "loglik": fit.loglik}
    out = _out(args, "bites_fit.json")
    out.write_text(json.dumps(report, indent=2) + "\n")
    print(f"IG mean {fit.mu:.4f}, shape {fit.lam:.4g}; wrote {out}")
    return EXIT_OK


def cmd_fit_traps(args, cfg: _Config) -> int:
    path = cfg.path("data")
    cols = _read_columns(path, ("site", "count", "adults"))
    counts, adults = {}, {}
    for s, c, a in zip(cols["site"], _floats(cols["count"], path), _floats(cols["adults"], path)):
        counts.setdefault(s, []).append(c)
        adults.setdefault(s, []).append(a)
    kw = {k: int(cfg[k]) for k in ("n_burn", "n_keep") if k in cfg}
    fits = fit_trap_sites(counts, adults, seed=args.seed, **kw)
    report = {s: {"k": f.k, "r": f.r, "acceptance": f.acceptance} for s, f in fits.items()}
    out = _out(args, "trap_fit.json")
    out.write_text(json.dumps(report, indent=2) + "\n")
    print(f"{len(fits)} site(s); wrote {out}")
    return EXIT_OK


def cmd_train_risk(args, cfg: _Config) -> int:
    config = PipelineConfig.from_dict(cfg, cfg.base)
    data = []
    for i, loc in enumerate(cfg.need("locations")):
        loc = _Config(loc, cfg.base)
        series_by_name = load_case_series(loc.path("cases"))
        name = loc.get("location") or next(iter(sorted(series_by_name)))
        series = series_by_name[name]
        climate = load_climate(loc.path("climate"))
        feats = cell_features(climate, replace(config, capacity_scale=float(
            loc.get("capacity_scale", config.capacity_scale))))
        weeks = training_set(series, climate.start_date, feats.r0_ma, feats.vf_ma)
        print(f"{name}: {len(weeks)} labeled weeks")
        data.extend(weeks)
    model = train(data, int(cfg.get("epochs", 2000)), float(cfg.get("learning_rate", 0.5)),
                  seed=args.seed)
    out = _out(args, "risk_model.json")
    save_model(model, out)
    print(f"weights ({model.w0:.4f}, {model.w1:.4f}, {model.w2:.4f}), "
          f"train accuracy {model.metadata['train_accuracy']:.3f}; wrote {out}")
    return EXIT_OK


def cmd_riskmap(args, cfg: _Config) -> int:
    config = PipelineConfig.from_dict(cfg, cfg.base)
    grid = load_grid(cfg.path("grid"))
    result = run_grid(grid, config, threads=args.threads)
    out = _out(args, "rasters")
    for raster in result.rasters:
        render(raster, out)
    for key, msg in sorted(result.failures.items()):
        print(f"cell {key}: {msg}", file=sys.stderr)
    print(f"{len(grid)} cells ({len(result.failures)} failed, {len(result.nonviable)} nonviable), "
          f"{len(result.rasters)} rasters in {out}")
    if result.failures and len(result.failures) == len(grid):
        return EXIT_NUMERIC
    return EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, "life-cycle (or coupled transmission) trajectory CSV"),
    "oracle-check": (cmd_oracle_check, "compare the simulator against the quadrature oracle"),
    "fit-pf": (cmd_fit_pf, "particle-filter fit of capacity and bites per cycle"),
    "fit-capacity": (cmd_fit_capacity, "capacity-precipitation regression"),
    "fit-bites": (cmd_fit_bites, "inverse-Gaussian fit of bites-per-cycle estimates"),
    "fit-traps": (cmd_fit_traps, "trap-count scaling per site"),
    "train-risk": (cmd_train_risk, "train the outbreak-risk classifier"),
    "riskmap": (cmd_riskmap, "daily risk rasters over a climate grid"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="denguerisk", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output file or directory")
        p.add_argument("--threads", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    func = COMMANDS[args.command][0]
    try:
        cfg = _load_config(args.config)
        return func(args, cfg)
    except (IntegrationError, DegenerateFilterError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
