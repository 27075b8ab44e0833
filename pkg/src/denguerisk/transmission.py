"""Dengue transmission on top of the Erlang life cycle.

Adult females are split into susceptible, exposed and infectious classes, each
with the same ``J`` gonotrophic substates. All adults lay eggs and cycle alike,
so infection moves mosquitoes between classes without touching demography.
Humans follow a closed SEIR model. Vectors bite ``n_B`` times per cycle; when
biting is confined to the last ``k`` substates the forces of infection are
multiplied by ``J / k`` so the bites per cycle are unchanged.

New cases are the He -> Hi flux (onset of infectiousness).
"""

from __future__ import annotations

import csv
import datetime as dt
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels as K
from .errors import IntegrationError, ParameterInfeasibleError
from .forcing import RATE_INDEX, ClimateSeries
from .lifecycle import LifecycleParams, LifecycleState

__all__ = [
    "EpiParams",
    "TransmissionState",
    "EpiTrajectory",
    "force_vh",
    "force_hv",
    "step_epi",
    "simulate_epi",
    "reproduction_number",
    "r0_series",
    "weekly_sums",
]

EPI_CSV_HEADER = ["date", "eggs", "larvae", "pupae", "adults_s", "adults_e", "adults_i",
                  "Hs", "He", "Hi", "Hr", "weekly_cases"]


@dataclass(frozen=True)
class EpiParams:
    """Transmission parameters. The extrinsic incubation rate ``gamma_v``
    lives in the rate tables because it depends on temperature."""

    n_B: float
    phi_HV: float
    phi_VH: float
    gamma_H: float
    eta_H: float
    N_H: float = 1.0
    k_bite_stages: int | None = None

    def __post_init__(self):
        if not self.n_B > 0:
            raise ValueError("n_B must be positive")
        for name in ("phi_HV", "phi_VH"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("gamma_H", "eta_H", "N_H"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.k_bite_stages is not None and (int(self.k_bite_stages) != self.k_bite_stages
                                               or self.k_bite_stages < 1):
            raise ValueError("k_bite_stages must be a positive integer")

    def bite_stages(self, J: int) -> int:
        k = J if self.k_bite_stages is None else int(self.k_bite_stages)
        if k > J:
            raise ValueError(f"k_bite_stages={k} exceeds J={J}")
        return k

    def kernel_params(self, C: float, J: int) -> np.ndarray:
        return K.make_epi_params(C, self.n_B, self.phi_HV, self.phi_VH, self.gamma_H,
                                 self.eta_H, self.N_H, self.bite_stages(J))

    def to_dict(self) -> dict:
        return {"n_B": self.n_B, "phi_HV": self.phi_HV, "phi_VH": self.phi_VH,
                "gamma_H": self.gamma_H, "eta_H": self.eta_H, "N_H": self.N_H,
                "k_bite_stages": self.k_bite_stages}

    @classmethod
    def from_dict(cls, d: Mapping) -> "EpiParams":
        return cls(**{k: d[k] for k in ("n_B", "phi_HV", "phi_VH", "gamma_H", "eta_H")},
                   N_H=d.get("N_H", 1.0), k_bite_stages=d.get("k_bite_stages"))


_VECTOR_BLOCKS = ("E", "L", "P", "As", "Ae", "Ai")
_HUMAN = ("Hs", "He", "Hi", "Hr")


@dataclass
class TransmissionState:
    E: np.ndarray
    L: np.ndarray
    P: np.ndarray
    As: np.ndarray
    Ae: np.ndarray
    Ai: np.ndarray
    Hs: float
    He: float = 0.0
    Hi: float = 0.0
    Hr: float = 0.0
    cumulative_incidence: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        for name in _VECTOR_BLOCKS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).copy())
        J = self.E.size
        if any(getattr(self, n).shape != (J,) for n in _VECTOR_BLOCKS):
            raise ValueError("all vector blocks must have the same length J")
        for name in (*_HUMAN, "cumulative_incidence"):
            setattr(self, name, float(getattr(self, name)))
        if np.any(self.as_vector() < 0):
            raise ValueError("compartments must be nonnegative")

    @property
    def J(self) -> int:
        return self.E.size

    @property
    def N_H(self) -> float:
        return self.Hs + self.He + self.Hi + self.Hr

    @property
    def adults(self) -> np.ndarray:
        return self.As + self.Ae + self.Ai

    @classmethod
    def disease_free(cls, life: LifecycleState, N_H: float) -> "TransmissionState":
        z = np.zeros(life.J)
        return cls(life.E, life.L, life.P, life.A, z, z, Hs=N_H, t=life.t)

    def seeded(self, infectious_humans: float = 1.0) -> "TransmissionState":
        """Move ``infectious_humans`` from Hs to Hi."""
        if not 0 <= infectious_humans <= self.Hs:
            raise ValueError("cannot seed more infectious humans than there are susceptibles")
        return replace(self, Hs=self.Hs - infectious_humans, Hi=self.Hi + infectious_humans)

    def lifecycle(self) -> LifecycleState:
        return LifecycleState(self.E, self.L, self.P, self.adults, self.t)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.E, self.L, self.P, self.As, self.Ae, self.Ai,
                               [self.Hs, self.He, self.Hi, self.Hr, self.cumulative_incidence]])

    @classmethod
    def from_vector(cls, y, t: float = 0.0) -> "TransmissionState":
        J = (len(y) - 5) // 6
        b = [y[i * J:(i + 1) * J] for i in range(6)]
        h = y[6 * J:]
        return cls(*b, Hs=h[0], He=h[1], Hi=h[2], Hr=h[3], cumulative_incidence=h[4], t=t)


def _check(state: TransmissionState, params: EpiParams, J: int | None = None):
    if J is not None and state.J != J:
        raise ValueError(f"state has J={state.J}, lifecycle params have J={J}")
    if abs(state.N_H - params.N_H) > 1e-9 * params.N_H:
        raise ValueError(f"human compartments sum to {state.N_H}, expected N_H={params.N_H}")


def force_vh(state: TransmissionState, params: EpiParams, gamma_ae: float) -> float:
    """Per-capita infection rate of susceptible humans (per day)."""
    k = params.bite_stages(state.J)
    ai = float(state.Ai[state.J - k:].sum())
    return params.n_B * gamma_ae * params.phi_VH * (state.J / k) * ai / params.N_H


def force_hv(state: TransmissionState, params: EpiParams, gamma_ae: float) -> float:
    """Per-capita infection rate of susceptible vectors in a biting substate (per day)."""
    k = params.bite_stages(state.J)
    return params.n_B * gamma_ae * params.phi_HV * (state.J / k) * state.Hi / params.N_H


def step_epi(state: TransmissionState, params: EpiParams, life: LifecycleParams,
             T: float, C: float, dt: float) -> TransmissionState:
    """Advance one classical RK4 step of ``dt`` days at temperature ``T`` and capacity ``C``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    _check(state, params, life.J)
    r = life.rates.matrix([T])[0]
    p = params.kernel_params(C, life.J)
    limit = K.dt_stability_limit(K.KIND_EPI, life.J, r, p)
    if dt > limit:
        raise ValueError(f"dt={dt} exceeds the RK4 stability bound {limit:.4g} day at T={T} "
                         f"with J={life.J}; use dt <= {limit:.4g} or simulate_epi()")
    y = state.as_vector()
    out = np.empty_like(y)
    K.rk4_step(K.KIND_EPI, y, life.J, r, p, dt, out, np.empty((5, y.size)))
    scale = max(1.0, float(np.abs(y).max()))
    if np.any(out < -1e-12 * scale):
        raise IntegrationError(f"step produced negative compartments; reduce dt below {dt}")
    return TransmissionState.from_vector(np.clip(out, 0.0, None), state.t + dt)


def weekly_sums(daily, interval: int = 7) -> np.ndarray:
    """Trailing ``interval``-day sums; the first days sum what exists."""
    x = np.asarray(daily, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    return c[idx] - c[np.maximum(idx - interval, 0)]


@dataclass
class EpiTrajectory:
    """Daily snapshots; row ``d`` is the state at the start of day ``d``."""

    start_date: dt.date
    J: int
    states: np.ndarray
    dt_used: np.ndarray
    capacity: np.ndarray = field(repr=False, default=None)

    def _block(self, i):
        J = self.J
        return self.states[:, i * J:(i + 1) * J].sum(axis=1)

    @property
    def eggs(self):
        return self._block(0)

    @property
    def larvae(self):
        return self._block(1)

    @property
    def pupae(self):
        return self._block(2)

    @property
    def adults_s(self):
        return self._block(3)

    @property
    def adults_e(self):
        return self._block(4)

    @property
    def adults_i(self):
        return self._block(5)

    @property
    def adults(self):
        return self.adults_s + self.adults_e + self.adults_i

    @property
    def humans(self) -> np.ndarray:
        """(days + 1, 4) array of Hs, He, Hi, Hr."""
        return self.states[:, 6 * self.J:6 * self.J + 4]

    @property
    def cumulative_incidence(self) -> np.ndarray:
        return self.states[:, 6 * self.J + 4]

    @property
    def daily_cases(self) -> np.ndarray:
        """New cases during each day; entry ``d`` covers day ``d`` to ``d + 1``."""
        return np.diff(self.cumulative_incidence)

    @property
    def weekly_cases(self) -> np.ndarray:
        """Trailing 7-day case count ending at each snapshot (0 at day 0)."""
        return np.concatenate([[0.0], weekly_sums(self.daily_cases)])

    @property
    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=i) for i in range(len(self.states))]

    def state(self, day: int) -> TransmissionState:
        return TransmissionState.from_vector(self.states[day], float(day))

    def to_csv(self, path) -> None:
        cols = np.column_stack([self.eggs, self.larvae, self.pupae, self.adults_s,
                                self.adults_e, self.adults_i, self.humans, self.weekly_cases])
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(EPI_CSV_HEADER)
            for day, row in zip(self.dates, cols):
                w.writerow([day.isoformat(), *(repr(float(v)) for v in row)])


def simulate_epi(params: EpiParams, life: LifecycleParams, climate: ClimateSeries,
                 init: TransmissionState, horizon: int | None = None) -> EpiTrajectory:
    """Integrate the coupled model over ``horizon`` days of ``climate``."""
    horizon = len(climate) if horizon is None else int(horizon)
    if horizon > len(climate):
        raise ValueError(f"horizon {horizon} exceeds the climate length {len(climate)}")
    _check(init, params, life.J)
    rates = life.rates.matrix(climate.tavg[:horizon])
    C = life.capacity_for(climate)[:horizon]
    P = np.tile(params.kernel_params(1.0, life.J), (horizon, 1))
    P[:, 0] = C
    traj, dts, status, bad_day = K.integrate_daily(
        K.KIND_EPI, init.as_vector(), life.J, rates, P, life.dt, life.dt_min, life.tol)
    if status != K.STATUS_OK:
        raise IntegrationError(
            f"no acceptable step on day {bad_day} (T={climate.tavg[bad_day]:.2f} C) "
            f"down to dt={life.dt_min}")
    return EpiTrajectory(climate.start_date, life.J, traj, dts, C)


def reproduction_number(a_bar, params: EpiParams, rates: Mapping) -> float | np.ndarray:
    """Basic reproduction number for adult female abundance ``a_bar``.

    ``rates`` supplies ``gamma_ae``, ``gamma_ad`` and ``gamma_v`` (scalars or
    arrays). ``gamma_v = inf`` means instantaneous incubation.
    """
    a_bar = np.asarray(a_bar, dtype=float)
    gae = np.asarray(rates["gamma_ae"], dtype=float)
    gad = np.asarray(rates["gamma_ad"], dtype=float)
    gv = np.asarray(rates["gamma_v"], dtype=float)
    if np.any(gad <= 0):
        raise ParameterInfeasibleError("adult mortality gamma_ad must be > 0")
    if np.any(gv <= 0):
        raise ParameterInfeasibleError("extrinsic incubation rate gamma_v must be > 0")
    with np.errstate(divide="ignore"):
        incubation = 1.0 / (1.0 + gad / gv)
    r = (a_bar / params.N_H * params.n_B ** 2 * gae ** 2 * params.phi_HV * params.phi_VH
         / (gad * params.eta_H) * incubation)
    return float(r) if np.ndim(r) == 0 else r


def r0_series(adults, temperatures, params: EpiParams, life: LifecycleParams) -> np.ndarray:
    """Daily reproduction number from simulated adult abundance; 0 where
    adults never die or virus never matures (no finite threshold)."""
    rm = life.rates.matrix(temperatures)
    gae, gad, gv = (rm[:, RATE_INDEX[n]] for n in ("gamma_ae", "gamma_ad", "gamma_v"))
    ok = (gad > 0) & (gv > 0)
    out = np.zeros(len(rm))
    if np.any(ok):
        out[ok] = reproduction_number(np.asarray(adults, dtype=float)[ok], params,
                                      {"gamma_ae": gae[ok], "gamma_ad": gad[ok], "gamma_v": gv[ok]})
    return out
