"""Four-stage Aedes life cycle with Erlang-distributed development.

Each stage (egg, larva, pupa, adult female) is split into ``J`` development
substates. Development through a substate runs at ``J * gamma(T)``, so the
development needed to leave a stage is Erlang(J) with mean one; mortality is
exponential. ``J = 1`` recovers the usual Markovian stage model. Completing
adults lay ``ov(T)`` eggs and restart the gonotrophic cycle; half of the
emerging pupae are female. Egg hatching is throttled by ``max(0, 1 - l/C)``.

:func:`integral_oracle` solves the same model from the renewal (integral)
form directly, without the substate reduction, and is used to check it.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .errors import IntegrationError, ParameterInfeasibleError
from .forcing import RATE_INDEX, CapacityModel, ClimateSeries, RateSet, capacity_series
from .phasetype import density, erlang, survival

__all__ = [
    "LifecycleParams",
    "LifecycleState",
    "Trajectory",
    "OracleResult",
    "STAGES",
    "rhs",
    "step",
    "simulate",
    "burn_in",
    "burn_in_climate",
    "integral_oracle",
    "basic_offspring_number",
    "steady_state_larvae",
]

STAGES = ("eggs", "larvae", "pupae", "adults")
# (development rate, mortality rate) per stage, in STAGES order
STAGE_RATES = (("gamma_el", "gamma_ed"), ("gamma_lp", "gamma_ld"),
               ("gamma_pa", "gamma_pd"), ("gamma_ae", "gamma_ad"))

DEFAULT_DT = 0.02
MIN_DT = 1e-4
DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class LifecycleParams:
    """Model configuration.

    ``capacity`` is either a constant carrying capacity or a
    :class:`CapacityModel`; in the latter case the daily capacity is
    ``capacity_scale * mu(trailing 14-day mean precipitation)``.
    """

    J: int
    rates: RateSet
    capacity: float | CapacityModel = math.inf
    capacity_scale: float = 1.0
    precip_window: int = 14
    dt: float = DEFAULT_DT
    dt_min: float = MIN_DT
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if int(self.J) != self.J or self.J < 1:
            raise ValueError(f"J must be a positive integer, got {self.J!r}")
        if not isinstance(self.capacity, CapacityModel) and not self.capacity > 0:
            raise ValueError("constant capacity must be positive")
        if not 0 < self.dt_min <= self.dt:
            raise ValueError("need 0 < dt_min <= dt")

    def capacity_for(self, climate: ClimateSeries) -> np.ndarray:
        if isinstance(self.capacity, CapacityModel):
            return self.capacity_scale * capacity_series(self.capacity, climate.precip,
                                                         self.precip_window)
        return np.full(len(climate), float(self.capacity))


@dataclass
class LifecycleState:
    E: np.ndarray
    L: np.ndarray
    P: np.ndarray
    A: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for name in ("E", "L", "P", "A"):
            v = np.asarray(getattr(self, name), dtype=float).copy()
            setattr(self, name, v)
        J = self.E.size
        if any(getattr(self, n).shape != (J,) for n in ("L", "P", "A")):
            raise ValueError("all stage vectors must have the same length J")
        if np.any(self.as_vector() < 0):
            raise ValueError("populations must be nonnegative")

    @property
    def J(self) -> int:
        return self.E.size

    @classmethod
    def zeros(cls, J: int) -> "LifecycleState":
        return cls(np.zeros(J), np.zeros(J), np.zeros(J), np.zeros(J))

    @classmethod
    def fresh(cls, J: int, eggs=0.0, larvae=0.0, pupae=0.0, adults=0.0) -> "LifecycleState":
        """Cohorts placed in the first development substate of each stage."""
        s = cls.zeros(J)
        s.E[0], s.L[0], s.P[0], s.A[0] = eggs, larvae, pupae, adults
        return s

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.E, self.L, self.P, self.A])

    @classmethod
    def from_vector(cls, y, t: float = 0.0) -> "LifecycleState":
        J = len(y) // 4
        return cls(y[:J], y[J:2 * J], y[2 * J:3 * J], y[3 * J:], t)

    def totals(self) -> np.ndarray:
        return np.array([self.E.sum(), self.L.sum(), self.P.sum(), self.A.sum()])

    def scaled(self, c: float) -> "LifecycleState":
        return LifecycleState(c * self.E, c * self.L, c * self.P, c * self.A, self.t)


@dataclass
class Trajectory:
    """Daily snapshots, row ``d`` is the state at the start of day ``d``."""

    start_date: dt.date
    J: int
    states: np.ndarray
    dt_used: np.ndarray
    capacity: np.ndarray = field(repr=False, default=None)

    @property
    def totals(self) -> np.ndarray:
        J = self.J
        return self.states.reshape(len(self.states), 4, J).sum(axis=2)

    @property
    def eggs(self):
        return self.totals[:, 0]

    @property
    def larvae(self):
        return self.totals[:, 1]

    @property
    def pupae(self):
        return self.totals[:, 2]

    @property
    def adults(self):
        return self.totals[:, 3]

    @property
    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=i) for i in range(len(self.states))]

    def state(self, day: int) -> LifecycleState:
        return LifecycleState.from_vector(self.states[day], float(day))

    def to_csv(self, path, substates: bool = False) -> None:
        header = ["date", *STAGES]
        if substates:
            header += [f"{s}{j + 1}" for s in "ELPA" for j in range(self.J)]
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for day, tot, row in zip(self.dates, self.totals, self.states):
                vals = [repr(float(v)) for v in tot]
                if substates:
                    vals += [repr(float(v)) for v in row]
                w.writerow([day.isoformat(), *vals])


def rhs(state: LifecycleState, params: LifecycleParams, T: float, C: float) -> LifecycleState:
    """Time derivative of every substate at temperature ``T`` and capacity ``C``."""
    y = state.as_vector()
    dy = np.empty_like(y)
    r = params.rates.matrix([T])[0]
    K.life_rhs(y, state.J, r, np.array([float(C)]), dy)
    return _raw_state(dy)


def _raw_state(y) -> LifecycleState:
    # derivative vectors may be negative, so skip validation
    s = LifecycleState.__new__(LifecycleState)
    J = len(y) // 4
    s.E, s.L, s.P, s.A, s.t = y[:J], y[J:2 * J], y[2 * J:3 * J], y[3 * J:], 0.0
    return s


def step(state: LifecycleState, params: LifecycleParams, T: float, C: float,
         dt: float) -> LifecycleState:
    """Advance one classical RK4 step of length ``dt`` days."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if state.J != params.J:
        raise ValueError(f"state has J={state.J}, params have J={params.J}")
    r = params.rates.matrix([T])[0]
    p = np.array([float(C)])
    limit = K.dt_stability_limit(K.KIND_LIFE, params.J, r, p)
    if dt > limit:
        raise ValueError(f"dt={dt} exceeds the RK4 stability bound {limit:.4g} day at T={T} "
                         f"with J={params.J}; use dt <= {limit:.4g} or simulate(), which halves dt")
    y = state.as_vector()
    out = np.empty_like(y)
    K.rk4_step(K.KIND_LIFE, y, params.J, r, p, dt, out, np.empty((5, y.size)))
    scale = max(1.0, float(np.abs(y).max()))
    if np.any(out < -1e-12 * scale):
        raise IntegrationError(f"step produced negative populations; reduce dt below {dt}")
    return LifecycleState.from_vector(np.clip(out, 0.0, None), state.t + dt)


def simulate(params: LifecycleParams, climate: ClimateSeries, init: LifecycleState,
             horizon: int | None = None) -> Trajectory:
    """Integrate over ``horizon`` days of ``climate``, returning daily snapshots."""
    horizon = len(climate) if horizon is None else int(horizon)
    if horizon > len(climate):
        raise ValueError(f"horizon {horizon} exceeds the climate length {len(climate)}")
    if init.J != params.J:
        raise ValueError(f"initial state has J={init.J}, params have J={params.J}")
    rates = params.rates.matrix(climate.tavg[:horizon])
    C = params.capacity_for(climate)[:horizon]
    traj, dts, status, bad_day = K.integrate_daily(
        K.KIND_LIFE, init.as_vector(), params.J, rates, C.reshape(-1, 1).copy(),
        params.dt, params.dt_min, params.tol)
    if status != K.STATUS_OK:
        raise IntegrationError(
            f"no acceptable step on day {bad_day} (T={climate.tavg[bad_day]:.2f} C) "
            f"down to dt={params.dt_min}")
    return Trajectory(climate.start_date, params.J, traj, dts, C)


BURN_IN_DAYS = 730


def burn_in_climate(climate: ClimateSeries, days: int = BURN_IN_DAYS) -> ClimateSeries:
    """The record wrapped cyclically so that it ends the day before ``climate`` starts.

    The record may be shorter than ``days``; it is repeated as often as needed.
    """
    idx = np.arange(-days, 0) % len(climate)
    return ClimateSeries(climate.start_date - dt.timedelta(days=days),
                         climate.tavg[idx], climate.precip[idx])


def burn_in(params: LifecycleParams, climate: ClimateSeries, days: int = BURN_IN_DAYS,
            init: LifecycleState | None = None) -> LifecycleState:
    """State at the start of ``climate`` after ``days`` of cyclic spin-up.

    The default seed is one fresh adult per unit of mean capacity over the
    spin-up (one adult if capacity is unbounded).
    """
    if days == 0:
        return init if init is not None else LifecycleState.fresh(params.J, adults=1.0)
    clim = burn_in_climate(climate, days)
    if init is None:
        cap = params.capacity_for(clim)
        seed = float(np.mean(cap)) if np.all(np.isfinite(cap)) else 1.0
        init = LifecycleState.fresh(params.J, adults=seed)
    traj = simulate(params, clim, init)
    return traj.state(days)


@dataclass
class OracleResult:
    start_date: dt.date
    totals: np.ndarray          # (days + 1, 4) stage totals at day boundaries
    grid_totals: np.ndarray     # (K + 1, 4) on the quadrature grid
    inflows: np.ndarray         # (K + 1, 4) entry rates into e, l, p, a
    quad_dt: float


def integral_oracle(params: LifecycleParams, climate: ClimateSeries, init: LifecycleState,
                    horizon: int, quad_dt: float = 0.05, max_points: int = 20001,
                    max_iter: int = 200) -> OracleResult:
    """Solve the renewal equations for stage totals by direct quadrature.

    Each stage population is the history of entries weighted by the
    probability of not having completed development (Erlang(J) survival of
    the accumulated development) and of survival (exponential in the
    accumulated mortality). Exit flows use the development density instead.
    Trapezoidal rule on a uniform grid that includes every day boundary;
    entry rates jump there with the daily rates, so each interval uses the
    right limit at its start and the left limit at its end. The implicit
    endpoint terms are solved by fixed-point iteration at each grid point. Initial individuals
    are taken to be at zero development. Cost is O(K^2) in the grid size K.
    """
    if quad_dt > 0.05:
        raise ValueError("quad_dt must be <= 0.05 day")
    per_day = int(round(1.0 / quad_dt))
    if abs(per_day * quad_dt - 1.0) > 1e-9:
        raise ValueError("quad_dt must divide one day evenly")
    if horizon > len(climate):
        raise ValueError(f"horizon {horizon} exceeds the climate length {len(climate)}")
    n_grid = horizon * per_day + 1
    if n_grid > max_points:
        raise ValueError(f"quadrature grid of {n_grid} points exceeds max_points={max_points}; "
                         "shorten the horizon or coarsen quad_dt")
    h = 1.0 / per_day
    day_of = np.minimum(np.arange(n_grid) // per_day, horizon - 1)
    R = params.rates.matrix(climate.tavg[:horizon])[day_of]
    Cgrid = params.capacity_for(climate)[:horizon][day_of]
    dev = np.stack([R[:, RATE_INDEX[d]] for d, _ in STAGE_RATES], axis=1)
    mort = np.stack([R[:, RATE_INDEX[m]] for _, m in STAGE_RATES], axis=1)
    ov = R[:, RATE_INDEX["ov"]]
    # exact cumulative integrals: rates are constant on each grid interval
    zero = np.zeros((1, 4))
    D = np.concatenate([zero, np.cumsum(dev[:-1] * h, axis=0)])
    M = np.concatenate([zero, np.cumsum(mort[:-1] * h, axis=0)])

    law = erlang(params.J)
    f0 = float(density(law, 0.0))
    x0 = init.totals()
    # entry rates jump where the daily rates do; keep both one-sided limits
    in_left = np.zeros((n_grid, 4))
    in_right = np.zeros((n_grid, 4))
    pops = np.zeros((n_grid, 4))

    def solve_endpoint(hist_pop, hist_base, j, c_pop, start):
        # entries at the current point, given the history and the rates of interval j
        hist_out = dev[j] * hist_base
        c_out = c_pop * dev[j] * f0
        cur = start.copy()
        C = Cgrid[j]
        for _ in range(max_iter):
            out = hist_out + c_out * cur
            # hatching depends on the larvae it creates; solve that link exactly
            hatch = max(0.0, (1.0 - hist_pop[1] / C) * out[0] / (1.0 + c_pop * out[0] / C))
            new = np.array([ov[j] * out[3], hatch, out[1], 0.5 * out[2] + out[3]])
            if np.allclose(new, cur, rtol=1e-13, atol=1e-300):
                return new
            cur = new
        raise IntegrationError(f"endpoint iteration did not converge at grid point {k}")

    for k in range(n_grid):
        hist_pop = np.empty(4)
        hist_base = np.empty(4)
        for s in range(4):
            delta = np.maximum(D[k, s] - D[:k + 1, s], 0.0)
            keep = np.exp(-(M[k, s] - M[:k + 1, s]))
            surv = survival(law, delta) * keep
            base = density(law, delta) * keep
            hp = x0[s] * surv[0]
            hb = x0[s] * base[0]
            if k >= 1:
                # trapezoid: right limit at each interval start, left limit at its end
                w = 0.5 * in_right[:k, s]
                w[1:] += 0.5 * in_left[1:k, s]
                hp += h * np.dot(w, surv[:k])
                hb += h * np.dot(w, base[:k])
            hist_pop[s] = hp
            hist_base[s] = hb
        c_pop = 0.5 * h if k >= 1 else 0.0
        prev = in_right[k - 1] if k >= 1 else np.zeros(4)
        boundary = k >= 1 and k % per_day == 0 and k < n_grid - 1
        left = solve_endpoint(hist_pop, hist_base, k - 1 if boundary else k, c_pop, prev)
        in_left[k] = left
        in_right[k] = solve_endpoint(hist_pop, hist_base, k, c_pop, left) if boundary else left
        pops[k] = hist_pop + c_pop * left

    inflow = in_right
    return OracleResult(climate.start_date, pops[::per_day].copy(), pops, inflow, h)


def basic_offspring_number(rates: Mapping, J: int, female_fraction: float = 0.5) -> float:
    """Expected adult female offspring per adult female at constant rates.

    ``ov`` eggs per cycle times the expected number of completed cycles,
    ``1 / ((1 + g_ad / (J g_ae))^J - 1)``, times the chance of surviving the
    egg, larval and pupal stages, ``prod (1 + g_d / (J g))^-J``, times the
    female share of emerging adults. ``female_fraction=1`` gives the count
    over all emerging adults.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    for name in ("gamma_el", "gamma_lp", "gamma_pa", "gamma_ae"):
        if not rates[name] > 0:
            raise ParameterInfeasibleError(f"development rate {name} must be > 0")
    if not rates["gamma_ad"] > 0:
        raise ParameterInfeasibleError("adult mortality must be > 0 for a finite lifetime")

    def log_factor(mort, devel):
        return J * math.log1p(mort / (J * devel))

    cycles = 1.0 / math.expm1(log_factor(rates["gamma_ad"], rates["gamma_ae"]))
    survive = math.exp(-(log_factor(rates["gamma_ed"], rates["gamma_el"])
                         + log_factor(rates["gamma_ld"], rates["gamma_lp"])
                         + log_factor(rates["gamma_pd"], rates["gamma_pa"])))
    return female_fraction * rates["ov"] * cycles * survive


def steady_state_larvae(r0: float, C: float) -> float:
    """Total larvae at the positive equilibrium, ``C (1 - 1/r0)``, or 0 if ``r0 <= 1``."""
    if r0 <= 1.0:
        return 0.0
    return C * (1.0 - 1.0 / r0)
