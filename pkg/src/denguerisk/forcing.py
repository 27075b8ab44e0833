"""Climate forcing: daily weather series, temperature-dependent rates and
precipitation-driven carrying capacity.

Temperature is held at the daily mean for the whole day, so every integral
over time reduces to a sum of per-day contributions. Time ``t`` is measured
in days from the start of the first record.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ClimateFormatError, ModelInvalidError, RateTableError

__all__ = [
    "ClimateSeries",
    "RateTable",
    "RateSet",
    "RATE_NAMES",
    "CapacityModel",
    "load_climate",
    "write_climate",
    "load_rate_tables",
    "save_rate_tables",
    "default_rates",
    "default_capacity_model",
    "rate_at",
    "development_extent",
    "moving_average",
    "centered_moving_average",
    "capacity_mean",
    "capacity_series",
]

CLIMATE_HEADER = ["date", "tavg_c", "precip_m"]

# Order matters: this is the column layout of the per-day rate matrices fed
# to the compiled integrators.
RATE_NAMES = (
    "gamma_el", "gamma_lp", "gamma_pa", "gamma_ae",
    "gamma_ed", "gamma_ld", "gamma_pd", "gamma_ad",
    "gamma_v", "ov",
)
RATE_INDEX = {name: i for i, name in enumerate(RATE_NAMES)}
DEVELOPMENT_RATES = ("gamma_el", "gamma_lp", "gamma_pa", "gamma_ae")


@dataclass(frozen=True, eq=False)
class ClimateSeries:
    start_date: dt.date
    tavg: np.ndarray
    precip: np.ndarray

    def __post_init__(self):
        tavg = np.asarray(self.tavg, dtype=float).copy()
        precip = np.asarray(self.precip, dtype=float).copy()
        if tavg.ndim != 1 or tavg.shape != precip.shape or tavg.size < 1:
            raise ClimateFormatError("tavg and precip must be equal-length 1-d sequences")
        if not np.all(np.isfinite(tavg)) or not np.all(np.isfinite(precip)):
            raise ClimateFormatError("climate values must be finite")
        if np.any(precip < 0):
            raise ClimateFormatError("precipitation must be nonnegative")
        if np.any(tavg < -90) or np.any(tavg > 60):
            raise ClimateFormatError("temperature outside [-90, 60] degC")
        tavg.setflags(write=False)
        precip.setflags(write=False)
        object.__setattr__(self, "tavg", tavg)
        object.__setattr__(self, "precip", precip)

    def __len__(self):
        return self.tavg.size

    @property
    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=i) for i in range(len(self))]

    @classmethod
    def constant(cls, tavg: float, days: int, precip: float = 0.0,
                 start_date: dt.date = dt.date(2022, 1, 1)) -> "ClimateSeries":
        return cls(start_date, np.full(days, float(tavg)), np.full(days, float(precip)))

    def cyclic(self, days: int) -> "ClimateSeries":
        """The record repeated end-to-end and cut to ``days`` days."""
        idx = np.arange(days) % len(self)
        return ClimateSeries(self.start_date, self.tavg[idx], self.precip[idx])

    def window(self, start: int, days: int) -> "ClimateSeries":
        return ClimateSeries(self.start_date + dt.timedelta(days=start),
                             self.tavg[start:start + days], self.precip[start:start + days])

    def __eq__(self, other):
        if not isinstance(other, ClimateSeries):
            return NotImplemented
        return (self.start_date == other.start_date
                and np.array_equal(self.tavg, other.tavg)
                and np.array_equal(self.precip, other.precip))


def _parse_float(text, lineno, column):
    try:
        return float(text)
    except ValueError:
        raise ClimateFormatError(f"line {lineno}: bad {column} value {text!r}") from None


def load_climate(path) -> ClimateSeries:
    """Read a ``date,tavg_c,precip_m`` CSV with strictly consecutive days."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CLIMATE_HEADER:
            raise ClimateFormatError(f"line 1: expected header {','.join(CLIMATE_HEADER)}")
        dates, tavg, precip = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ClimateFormatError(f"line {lineno}: expected 3 fields, got {len(row)}")
            try:
                day = dt.date.fromisoformat(row[0].strip())
            except ValueError:
                raise ClimateFormatError(f"line {lineno}: bad date {row[0]!r}") from None
            if dates and day != dates[-1] + dt.timedelta(days=1):
                raise ClimateFormatError(
                    f"line {lineno}: date {day} does not follow {dates[-1]} (dates must be consecutive)")
            t = _parse_float(row[1], lineno, "tavg_c")
            p = _parse_float(row[2], lineno, "precip_m")
            if p < 0:
                raise ClimateFormatError(f"line {lineno}: negative precipitation {p}")
            dates.append(day)
            tavg.append(t)
            precip.append(p)
    if not dates:
        raise ClimateFormatError(f"{path}: no data rows")
    return ClimateSeries(dates[0], np.array(tavg), np.array(precip))


def write_climate(series: ClimateSeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CLIMATE_HEADER)
        for day, t, p in zip(series.dates, series.tavg, series.precip):
            w.writerow([day.isoformat(), repr(float(t)), repr(float(p))])


@dataclass(frozen=True, eq=False)
class RateTable:
    """Piecewise-linear rate over temperature, clamped outside the knots."""

    name: str
    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.name not in RATE_INDEX:
            raise RateTableError(f"unknown rate name {self.name!r}")
        knots = np.asarray(self.knots, dtype=float).copy()
        values = np.asarray(self.values, dtype=float).copy()
        if knots.ndim != 1 or knots.shape != values.shape or knots.size < 2:
            raise RateTableError(f"{self.name}: need at least 2 (temperature, value) pairs")
        if np.any(np.diff(knots) <= 0):
            raise RateTableError(f"{self.name}: knots must be strictly increasing")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise RateTableError(f"{self.name}: values must be finite and >= 0")
        knots.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, name: str, value: float) -> "RateTable":
        return cls(name, [-90.0, 60.0], [value, value])

    def __call__(self, T):
        return rate_at(self, T)


def rate_at(table: RateTable, T):
    """Linear interpolation between bracketing knots, clamped at the ends."""
    r = np.interp(T, table.knots, table.values)
    return float(r) if np.ndim(r) == 0 else r


@dataclass(frozen=True)
class RateSet:
    """One table per entry of :data:`RATE_NAMES`."""

    tables: dict
    source: str = ""

    def __post_init__(self):
        missing = [n for n in RATE_NAMES if n not in self.tables]
        if missing:
            raise RateTableError(f"missing rate tables: {', '.join(missing)}")
        unknown = [n for n in self.tables if n not in RATE_INDEX]
        if unknown:
            raise RateTableError(f"unknown rate names: {', '.join(unknown)}")

    def __getitem__(self, name) -> RateTable:
        return self.tables[name]

    @classmethod
    def constant(cls, values: dict, source: str = "constant") -> "RateSet":
        return cls({n: RateTable.constant(n, values[n]) for n in RATE_NAMES}, source)

    def at(self, T: float) -> dict:
        """All rates at one temperature, keyed by name."""
        return {n: rate_at(self.tables[n], T) for n in RATE_NAMES}

    def matrix(self, temperatures) -> np.ndarray:
        """``(len(temperatures), len(RATE_NAMES))`` array of rates."""
        temperatures = np.asarray(temperatures, dtype=float)
        return np.stack([np.interp(temperatures, self.tables[n].knots, self.tables[n].values)
                         for n in RATE_NAMES], axis=-1)

    def replace(self, **tables) -> "RateSet":
        new = dict(self.tables)
        for name, tab in tables.items():
            new[name] = tab if isinstance(tab, RateTable) else RateTable.constant(name, tab)
        return RateSet(new, self.source)


def _rateset_from_dict(data: dict, origin: str) -> RateSet:
    if "rates" not in data or not isinstance(data["rates"], dict):
        raise RateTableError(f"{origin}: expected an object with a 'rates' block")
    tables = {}
    for name, pairs in data["rates"].items():
        if name not in RATE_INDEX:
            raise RateTableError(f"{origin}: unknown rate name {name!r}")
        try:
            arr = np.asarray(pairs, dtype=float)
        except (TypeError, ValueError):
            raise RateTableError(f"{origin}: {name} must be a list of [temperature_c, value] pairs") from None
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise RateTableError(f"{origin}: {name} must be a list of [temperature_c, value] pairs")
        tables[name] = RateTable(name, arr[:, 0], arr[:, 1])
    return RateSet(tables, str(data.get("source", "")))


def load_rate_tables(path) -> RateSet:
    """Load a JSON rate configuration: ``{"rates": {name: [[T, v], ...]}}``."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise RateTableError(f"{path}: {exc}") from None
    return _rateset_from_dict(data, str(path))


def save_rate_tables(rates: RateSet, path) -> None:
    # one block per rate, one [temperature_c, value] pair per line
    blocks = []
    for n in RATE_NAMES:
        pairs = ",\n".join(f"    [{float(k)!r}, {float(v)!r}]"
                           for k, v in zip(rates[n].knots, rates[n].values))
        blocks.append(f'  "{n}": [\n{pairs}\n  ]')
    text = ('{\n "source": ' + json.dumps(rates.source) + ',\n "rates": {\n'
            + ",\n".join(blocks) + "\n }\n}\n")
    Path(path).write_text(text)


def default_rates() -> RateSet:
    """Shipped Aedes aegypti tables (illustrative, see the file's ``source``)."""
    text = resources.files("denguerisk").joinpath("data/default_rates.json").read_text()
    return _rateset_from_dict(json.loads(text), "default_rates.json")


def development_extent(table: RateTable, climate: ClimateSeries, u: float, t: float) -> float:
    """Integral of ``table(T(tau))`` over ``[u, t]`` under daily step forcing."""
    if u > t:
        raise ValueError(f"u={u} is after t={t}")
    n = len(climate)
    if u < 0 or t > n:
        raise ValueError(f"[{u}, {t}] is outside the climate span [0, {n}]")
    if u == t:
        return 0.0
    rates = np.interp(climate.tavg, table.knots, table.values)
    cum = np.concatenate([[0.0], np.cumsum(rates)])

    def F(x):
        d = min(int(math.floor(x)), n - 1)
        return cum[d] + rates[d] * (x - d)

    return float(F(t) - F(u))


def moving_average(series, window: int) -> np.ndarray:
    """Trailing mean over ``window`` samples; the first samples use what exists."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        return x.copy()
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def centered_moving_average(series, window: int = 3) -> np.ndarray:
    """Centered mean, e.g. ``(c[i-1] + c[i] + c[i+1]) / 3``; edges use partial windows."""
    if window < 1 or window % 2 == 0:
        raise ValueError("centered window must be a positive odd integer")
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        return x.copy()
    h = window // 2
    c = np.concatenate([[0.0], np.cumsum(x)])
    i = np.arange(x.size)
    lo = np.maximum(i - h, 0)
    hi = np.minimum(i + h + 1, x.size)
    return (c[hi] - c[lo]) / (hi - lo)


@dataclass(frozen=True)
class CapacityModel:
    """Inverse-Gaussian carrying capacity ``C | p ~ IG(mu(p), lam(p))``.

    ``mu`` is quadratic below the threshold ``p0`` and ``alpha0 +
    exp(alpha2 - alpha1 p)`` above it; ``lam`` is quadratic on both sides.
    ``alpha0`` and ``beta0`` follow from continuity at ``p0``. Capacity is
    per human; precipitation is in m/day.
    """

    a0: float
    a1: float
    a2: float
    alpha1: float
    alpha2: float
    b0: float
    b1: float
    b2: float
    beta1: float
    beta2: float
    p0: float
    p_range: tuple = field(default=(0.0, 0.05))

    def __post_init__(self):
        vals = [self.a0, self.a1, self.a2, self.alpha1, self.alpha2, self.b0, self.b1,
                self.b2, self.beta1, self.beta2, self.p0]
        if not all(np.isfinite(vals)):
            raise ModelInvalidError("capacity parameters must be finite")
        lo, hi = self.p_range
        if not 0 <= lo < hi:
            raise ModelInvalidError(f"bad precipitation range {self.p_range}")
        grid = np.linspace(lo, hi, 501)
        if np.any(self.mu(grid) <= 0):
            raise ModelInvalidError("mu(p) <= 0 inside the precipitation range")
        if np.any(self.lam(grid) <= 0):
            raise ModelInvalidError("lambda(p) <= 0 inside the precipitation range")

    PARAM_NAMES = ("a0", "a1", "a2", "alpha1", "alpha2", "b0", "b1", "b2", "beta1", "beta2", "p0")

    @property
    def alpha0(self) -> float:
        p0 = self.p0
        return self.a0 + self.a1 * p0 + self.a2 * p0 ** 2 - math.exp(self.alpha2 - self.alpha1 * p0)

    @property
    def beta0(self) -> float:
        p0 = self.p0
        return (self.b0 + (self.b1 - self.beta1) * p0 + (self.b2 - self.beta2) * p0 ** 2)

    def mu(self, p):
        p = np.asarray(p, dtype=float)
        low = self.a0 + self.a1 * p + self.a2 * p ** 2
        high = self.alpha0 + np.exp(self.alpha2 - self.alpha1 * p)
        out = np.where(p < self.p0, low, high)
        return float(out) if out.ndim == 0 else out

    def lam(self, p):
        p = np.asarray(p, dtype=float)
        low = self.b0 + self.b1 * p + self.b2 * p ** 2
        high = self.beta0 + self.beta1 * p + self.beta2 * p ** 2
        out = np.where(p < self.p0, low, high)
        return float(out) if out.ndim == 0 else out

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self.PARAM_NAMES])

    @classmethod
    def from_vector(cls, theta, p_range=(0.0, 0.05)) -> "CapacityModel":
        return cls(*map(float, theta), p_range=tuple(p_range))

    def to_dict(self) -> dict:
        d = {n: getattr(self, n) for n in self.PARAM_NAMES}
        d["p_range"] = list(self.p_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CapacityModel":
        kw = {n: float(d[n]) for n in cls.PARAM_NAMES}
        return cls(**kw, p_range=tuple(d.get("p_range", (0.0, 0.05))))


def default_capacity_model() -> CapacityModel:
    """Illustrative curve: rising to ~5 per human near 1 cm/day, then falling."""
    return CapacityModel(a0=1.0, a1=600.0, a2=-20000.0,
                         alpha1=150.0, alpha2=math.log(4.0) + 1.5,
                         b0=5.0, b1=500.0, b2=0.0, beta1=-200.0, beta2=0.0,
                         p0=0.01, p_range=(0.0, 0.05))


def capacity_mean(model: CapacityModel, p):
    """Expected carrying capacity per human at precipitation ``p``."""
    if np.any(np.asarray(p) < 0):
        raise ValueError("precipitation must be nonnegative")
    return model.mu(p)


def capacity_series(model: CapacityModel, precip, window: int = 14) -> np.ndarray:
    """Daily capacity from the trailing ``window``-day mean precipitation."""
    p = moving_average(precip, window)
    return np.asarray(capacity_mean(model, np.clip(p, 0.0, None)), dtype=float)
