"""Particle filter and genealogy smoother for carrying capacity and bites per cycle.

The hidden state is the full transmission state plus ``(C, n_B)``, with ``C``
the carrying capacity per human. Each reporting interval the parameters take a
truncated-normal random-walk step, every particle is integrated through the
interval, and the particles are weighted by a Poisson likelihood of the
observed case count. Resampling is systematic and happens when the effective
sample size drops below half the ensemble.

Randomness is keyed by ``(seed, step, particle)``, so results do not depend
on the order in which particles are processed.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaln, logsumexp, ndtr, ndtri

from .. import _kernels as K
from ..errors import ClimateFormatError, DegenerateFilterError, IntegrationError
from ..forcing import ClimateSeries
from ..lifecycle import BURN_IN_DAYS, LifecycleParams, burn_in
from ..transmission import EpiParams, TransmissionState

__all__ = [
    "CaseSeries",
    "load_case_series",
    "write_case_series",
    "ProposalConfig",
    "FilterModel",
    "Particle",
    "Ensemble",
    "Generation",
    "FilterResult",
    "SmoothingResult",
    "observation_likelihood",
    "propose",
    "systematic_resample",
    "effective_sample_size",
    "initial_ensemble",
    "pf_step",
    "run_filter",
    "pf_smooth",
    "simulate_cases",
    "write_posterior_csv",
]

CASE_HEADER = ["location", "week_start", "cases"]


@dataclass(frozen=True, eq=False)
class CaseSeries:
    """Case counts per reporting interval for one location."""

    location: str
    start_date: dt.date
    counts: np.ndarray
    interval: int = 7

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or counts.size == 0:
            raise ValueError("counts must be a nonempty 1-d sequence")
        if np.any(counts < 0) or np.any(counts != np.round(counts)):
            raise ValueError("counts must be nonnegative integers")
        if self.interval < 1:
            raise ValueError("interval must be >= 1 day")
        counts = counts.astype(np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    def __len__(self):
        return self.counts.size

    @property
    def week_starts(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=self.interval * i) for i in range(len(self))]


def load_case_series(path) -> dict[str, CaseSeries]:
    """Read ``location,week_start,cases`` rows into one series per location."""
    path = Path(path)
    rows: dict[str, list] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CASE_HEADER:
            raise ClimateFormatError(f"{path}:1: expected header {','.join(CASE_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ClimateFormatError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            loc, day, cases = (x.strip() for x in row)
            try:
                d = dt.date.fromisoformat(day)
                n = int(cases)
            except ValueError as exc:
                raise ClimateFormatError(f"{path}:{lineno}: {exc}") from None
            if n < 0:
                raise ClimateFormatError(f"{path}:{lineno}: negative case count")
            rows.setdefault(loc, []).append((d, n))
    out = {}
    for loc, items in rows.items():
        items.sort()
        dates = [d for d, _ in items]
        gaps = {(b - a).days for a, b in zip(dates, dates[1:])}
        if len(gaps) > 1 or (gaps and min(gaps) < 1):
            raise ClimateFormatError(f"{path}: {loc} is not evenly spaced")
        interval = gaps.pop() if gaps else 7
        out[loc] = CaseSeries(loc, dates[0], np.array([n for _, n in items]), interval)
    return out


def write_case_series(series, path) -> None:
    series = [series] if isinstance(series, CaseSeries) else list(series)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CASE_HEADER)
        for s in series:
            for d, n in zip(s.week_starts, s.counts):
                w.writerow([s.location, d.isoformat(), int(n)])


@dataclass(frozen=True)
class ProposalConfig:
    """Random-walk scales, priors and resampling policy."""

    c_scale: float = 0.5
    nb_scale: float = 0.05
    c_prior: tuple = (0.1, 100.0)       # log-uniform, per human
    nb_prior: tuple = (0.2, 3.0)        # uniform
    resample_fraction: float = 0.5
    obs_floor: float = 0.1

    def __post_init__(self):
        if self.c_scale < 0 or self.nb_scale < 0:
            raise ValueError("proposal scales must be >= 0")
        if not 0 < self.c_prior[0] < self.c_prior[1]:
            raise ValueError("c_prior must satisfy 0 < low < high")
        if not 0 < self.nb_prior[0] <= self.nb_prior[1]:
            raise ValueError("nb_prior must satisfy 0 < low <= high")
        if not 0 <= self.resample_fraction <= 1:
            raise ValueError("resample_fraction must lie in [0, 1]")
        if not self.obs_floor > 0:
            raise ValueError("obs_floor must be positive")


@dataclass(frozen=True)
class FilterModel:
    """Everything except ``(C, n_B)`` needed to push particles forward.

    ``epi.n_B`` is ignored (each particle carries its own). ``climate`` must
    start on the first reporting day and cover every interval.
    """

    life: LifecycleParams
    epi: EpiParams
    climate: ClimateSeries
    init_infectious: float = 1.0
    burn_in_days: int = BURN_IN_DAYS

    def consts(self) -> np.ndarray:
        e = self.epi
        return np.array([e.phi_HV, e.phi_VH, e.gamma_H, e.eta_H, e.N_H,
                         float(e.bite_stages(self.life.J))])

    def interval_rates(self, step: int, interval: int) -> np.ndarray:
        lo = step * interval
        if lo + interval > len(self.climate):
            raise ClimateFormatError(
                f"climate covers {len(self.climate)} days; interval {step} needs {lo + interval}")
        return self.life.rates.matrix(self.climate.tavg[lo:lo + interval])

    def unit_state(self) -> np.ndarray:
        """Disease-free spun-up state at capacity one per human."""
        life = LifecycleParams(self.life.J, self.life.rates, capacity=self.epi.N_H,
                               dt=self.life.dt, dt_min=self.life.dt_min, tol=self.life.tol)
        base = burn_in(life, self.climate, self.burn_in_days)
        return TransmissionState.disease_free(base, self.epi.N_H).as_vector()


@dataclass
class Particle:
    state: TransmissionState
    C: float
    n_B: float
    log_weight: float
    ancestor: int


@dataclass
class Ensemble:
    """Struct-of-arrays particle set; ``log_weight`` is normalized."""

    Y: np.ndarray
    C: np.ndarray
    n_B: np.ndarray
    log_weight: np.ndarray
    ancestor: np.ndarray

    def __len__(self):
        return self.C.size

    def particle(self, i: int) -> Particle:
        return Particle(TransmissionState.from_vector(self.Y[i]), float(self.C[i]),
                        float(self.n_B[i]), float(self.log_weight[i]), int(self.ancestor[i]))

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weight)


@dataclass
class Generation:
    """One filter step before resampling; ``parent`` indexes the previous generation."""

    C: np.ndarray
    n_B: np.ndarray
    cases: np.ndarray
    log_weight: np.ndarray
    parent: np.ndarray
    loglik: np.ndarray
    ess: float
    resampled: bool
    log_evidence: float = 0.0
    Y: np.ndarray | None = None


@dataclass
class FilterResult:
    series: CaseSeries
    generations: list
    final: Ensemble
    log_evidence: float

    def filtered_mean(self, name: str) -> np.ndarray:
        return np.array([np.exp(g.log_weight) @ getattr(g, name) for g in self.generations])


@dataclass
class SmoothingResult:
    """Marginal smoothed summaries per step plus sampled joint paths."""

    mean: dict
    percentiles: dict
    levels: tuple
    paths: dict = field(repr=False)


def observation_likelihood(predicted, observed, floor: float = 0.1):
    """Poisson log-pmf of ``observed`` with mean ``max(predicted, floor)``."""
    lam = np.maximum(np.asarray(predicted, dtype=float), floor)
    k = np.asarray(observed, dtype=float)
    out = k * np.log(lam) - lam - gammaln(k + 1.0)
    return float(out) if out.ndim == 0 else out


def effective_sample_size(log_weight) -> float:
    w = np.exp(np.asarray(log_weight) - logsumexp(log_weight))
    return float(1.0 / np.sum(w * w))


def _positive_normal(mean, sd, u):
    """Inverse-CDF draw from Normal(mean, sd) truncated to (0, inf)."""
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    out = mean.copy()
    live = sd > 0
    lo = ndtr(-mean[live] / sd[live])
    x = mean[live] + sd[live] * ndtri(lo + u[live] * (1.0 - lo))
    out[live] = np.maximum(x, np.finfo(float).tiny)
    return out


def _uniforms(seed: int, step: int, n: int, k: int = 2) -> np.ndarray:
    # one independent stream per particle keyed by (seed, step, index)
    return np.array([np.random.default_rng([seed, step, i]).random(k) for i in range(n)])


def propose(C, n_B, config: ProposalConfig, seed: int, step: int):
    """Truncated-normal random-walk step for every particle."""
    u = _uniforms(seed, step, len(C))
    C = np.asarray(C, dtype=float)
    n_B = np.asarray(n_B, dtype=float)
    return (_positive_normal(C, config.c_scale * C, u[:, 0]),
            _positive_normal(n_B, config.nb_scale * n_B, u[:, 1]))


def systematic_resample(log_weight, u0: float) -> np.ndarray:
    """Ancestor indices from one uniform ``u0`` in [0, 1)."""
    w = np.exp(np.asarray(log_weight) - logsumexp(log_weight))
    n = w.size
    cum = np.cumsum(w)
    cum[-1] = 1.0
    return np.searchsorted(cum, (u0 + np.arange(n)) / n, side="right").clip(max=n - 1)


def initial_ensemble(model: FilterModel, n_particles: int, config: ProposalConfig,
                     seed: int) -> Ensemble:
    """Prior draws of ``(C, n_B)``; vector states scale the unit-capacity spin-up.

    The life cycle is homogeneous of degree one in (populations, capacity),
    so the spin-up at capacity ``C`` is ``C`` times the one at capacity 1.
    """
    if n_particles < 1:
        raise ValueError("need at least one particle")
    u = _uniforms(seed, 0, n_particles)
    lo, hi = config.c_prior
    C = np.exp(np.log(lo) + u[:, 0] * (np.log(hi) - np.log(lo)))
    n_B = config.nb_prior[0] + u[:, 1] * (config.nb_prior[1] - config.nb_prior[0])
    unit = model.unit_state()
    J = model.life.J
    Y = np.empty((n_particles, unit.size))
    Y[:, :6 * J] = C[:, None] * unit[:6 * J]
    Y[:, 6 * J:] = unit[6 * J:]
    Y[:, 6 * J] -= model.init_infectious
    Y[:, 6 * J + 2] += model.init_infectious
    if np.any(Y[:, 6 * J] < 0):
        raise ValueError("init_infectious exceeds N_H")
    logw = np.full(n_particles, -np.log(n_particles))
    return Ensemble(Y, C, n_B, logw, np.arange(n_particles))


def pf_step(ensemble: Ensemble, obs: int, model: FilterModel, config: ProposalConfig,
            seed: int, step: int, interval: int = 7, keep_states: bool = False):
    """Propose, propagate one interval, weight, and resample if needed.

    ``step`` is the 0-based interval index. Returns ``(new_ensemble, generation)``.
    """
    if len(ensemble) == 0:
        raise ValueError("empty ensemble")
    if obs < 0:
        raise ValueError("observed count must be >= 0")
    C, n_B = propose(ensemble.C, ensemble.n_B, config, seed, step + 1)
    Y = ensemble.Y.copy()
    rates = model.interval_rates(step, interval)
    life = model.life
    status, cases = K.integrate_epi_batch(Y, C * model.epi.N_H, n_B, model.consts(), life.J,
                                          rates, life.dt, life.dt_min, life.tol)
    loglik = observation_likelihood(cases, obs, config.obs_floor)
    loglik = np.where(status == K.STATUS_OK, loglik, -np.inf)
    logw = ensemble.log_weight + loglik
    total = logsumexp(logw) if np.any(np.isfinite(logw)) else -np.inf
    if not np.isfinite(total):
        best = np.max(loglik) if np.any(np.isfinite(loglik)) else float("nan")
        raise DegenerateFilterError(
            f"all particle weights vanished at interval {step} (observed {obs}, "
            f"largest log-likelihood {best:.4g}, {int(np.sum(status != 0))} integration failures)")
    logw = logw - total
    ess = effective_sample_size(logw)
    gen = Generation(C, n_B, cases, logw, ensemble.ancestor.copy(), loglik, ess, False,
                     float(total), Y.copy() if keep_states else None)
    n = len(ensemble)
    if ess < config.resample_fraction * n:
        u0 = np.random.default_rng([seed, step + 1]).random()
        idx = systematic_resample(logw, u0)
        gen.resampled = True
        new = Ensemble(Y[idx], C[idx], n_B[idx], np.full(n, -np.log(n)), idx)
    else:
        new = Ensemble(Y, C, n_B, logw, np.arange(n))
    return new, gen


def run_filter(series: CaseSeries, model: FilterModel, config: ProposalConfig | None = None,
               n_particles: int = 2000, seed: int = 0, keep_states: bool = False,
               progress=None) -> FilterResult:
    """Forward pass over every interval of ``series``."""
    config = config or ProposalConfig()
    need = len(series) * series.interval
    if len(model.climate) < need:
        raise ClimateFormatError(f"climate has {len(model.climate)} days, cases need {need}")
    if model.climate.start_date != series.start_date:
        raise ClimateFormatError(f"climate starts {model.climate.start_date}, "
                                 f"cases start {series.start_date}")
    ens = initial_ensemble(model, n_particles, config, seed)
    gens = []
    log_evidence = 0.0
    for k, obs in enumerate(series.counts):
        ens, gen = pf_step(ens, int(obs), model, config, seed, k, series.interval, keep_states)
        log_evidence += gen.log_evidence
        gens.append(gen)
        if progress is not None:
            progress(k + 1, len(series))
    return FilterResult(series, gens, ens, log_evidence)


def _weighted_quantiles(x, w, qs):
    order = np.argsort(x, kind="stable")
    xs, ws = x[order], w[order]
    cum = np.cumsum(ws)
    cum /= cum[-1]
    return np.array([xs[min(np.searchsorted(cum, q / 100.0), xs.size - 1)] for q in qs])


def pf_smooth(result: FilterResult, n_samples: int = 200, seed: int = 0,
              levels: tuple = (25.0, 75.0)) -> SmoothingResult:
    """Genealogy smoother.

    Smoothed weights of each generation are the final weights summed over
    descendants, which gives exact marginal means of the ancestor-tracing
    estimator; ``n_samples`` joint paths are also drawn by tracing ancestors.
    """
    gens = result.generations
    if not gens:
        raise ValueError("no stored generations; run the forward filter first")
    K_ = len(gens)
    W = [None] * K_
    W[-1] = np.exp(gens[-1].log_weight)
    for k in range(K_ - 1, 0, -1):
        W[k - 1] = np.bincount(gens[k].parent, weights=W[k], minlength=gens[k - 1].C.size)
    names = ("C", "n_B", "cases")
    mean = {n: np.array([W[k] @ getattr(gens[k], n) for k in range(K_)]) for n in names}
    pct = {n: np.array([_weighted_quantiles(getattr(gens[k], n), W[k], levels)
                        for k in range(K_)]) for n in names}
    rng = np.random.default_rng([seed, K_ + 1])
    idx = rng.choice(W[-1].size, size=n_samples, p=W[-1] / W[-1].sum())
    paths = {n: np.empty((n_samples, K_)) for n in names}
    for k in range(K_ - 1, -1, -1):
        for n in names:
            paths[n][:, k] = getattr(gens[k], n)[idx]
        idx = gens[k].parent[idx]
    return SmoothingResult(mean, pct, tuple(levels), paths)


def simulate_cases(model: FilterModel, C_path, n_B: float, n_intervals: int,
                   interval: int = 7, seed: int = 0, location: str = "synthetic"):
    """Poisson case counts from the model with known per-interval capacity.

    Returns ``(CaseSeries, expected_cases)``.
    """
    C_path = np.broadcast_to(np.asarray(C_path, dtype=float), (n_intervals,))
    unit = model.unit_state()
    J = model.life.J
    y = unit.copy()
    y[:6 * J] *= C_path[0]
    y[6 * J] -= model.init_infectious
    y[6 * J + 2] += model.init_infectious
    Y = y[None, :].copy()
    expected = np.empty(n_intervals)
    life = model.life
    for k in range(n_intervals):
        status, inc = K.integrate_epi_batch(Y, np.array([C_path[k] * model.epi.N_H]),
                                            np.array([float(n_B)]), model.consts(), J,
                                            model.interval_rates(k, interval),
                                            life.dt, life.dt_min, life.tol)
        if status[0] != K.STATUS_OK:
            raise IntegrationError(f"integration failed in interval {k}")
        expected[k] = inc[0]
    counts = np.random.default_rng(seed).poisson(expected)
    return CaseSeries(location, model.climate.start_date, counts, interval), expected


def write_posterior_csv(result: FilterResult, smooth: SmoothingResult, path) -> None:
    lo, hi = smooth.levels
    def tag(q):
        return f"p{q:g}".replace(".", "_")

    header = ["week_start", "observed"]
    for n in ("C", "n_B", "cases"):
        header += [f"{n}_mean", f"{n}_{tag(lo)}", f"{n}_{tag(hi)}"]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, (d, obs) in enumerate(zip(result.series.week_starts, result.series.counts)):
            row = [d.isoformat(), int(obs)]
            for n in ("C", "n_B", "cases"):
                row += [repr(float(smooth.mean[n][k])),
                        repr(float(smooth.percentiles[n][k, 0])),
                        repr(float(smooth.percentiles[n][k, 1]))]
            w.writerow(row)
