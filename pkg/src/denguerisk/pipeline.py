"""Per-cell risk series over gridded climate and daily raster output.

Each cell is independent. It is spun up for ``burn_in_days`` on its own
record wrapped cyclically, then simulated over the record. Daily R0 uses
the simulated adult abundance per human. Features are 30-day trailing means
taken over spin-up plus output, so the first output day already has a full
window. Cells are processed in any order on any number of threads; results
are placed by cell index, so output files are byte-identical for every
thread count.
"""

from __future__ import annotations

import csv
import datetime as dt
import functools
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ClimateFormatError, IntegrationError
from .forcing import (DEVELOPMENT_RATES, RATE_INDEX, CapacityModel, ClimateSeries, RateSet,
                      default_capacity_model, default_rates, load_rate_tables,
                      moving_average)
from .lifecycle import BURN_IN_DAYS, LifecycleParams, LifecycleState, burn_in_climate, simulate
from .risk import RiskModel, default_risk_model, load_model, predict
from .transmission import EpiParams, r0_series

__all__ = [
    "FEATURE_WINDOW",
    "GRID_HEADER",
    "RASTER_HEADER",
    "PipelineConfig",
    "default_epi_params",
    "ClimateGrid",
    "load_grid",
    "write_grid",
    "CellResult",
    "cell_features",
    "run_cell",
    "RiskRaster",
    "GridResult",
    "run_grid",
    "render",
    "write_ppm",
    "load_raster",
    "band_color",
]

log = logging.getLogger(__name__)

FEATURE_WINDOW = 30
GRID_HEADER = ["lat", "lon", "date", "tavg_c", "precip_m"]
RASTER_HEADER = ["lat", "lon", "risk", "r0_ma", "vf_ma"]
RESOLUTION = 0.25
BLUE, GRAY, RED, BLANK = (0, 0, 255), (128, 128, 128), (255, 0, 0), (255, 255, 255)


@functools.lru_cache(maxsize=1)
def _default_model() -> RiskModel:
    return default_risk_model()


def default_epi_params() -> EpiParams:
    """Per-human transmission defaults: 0.83 bites per cycle (the IG mean of the
    fitted locations), 50% transmission per bite each way, 5.5-day intrinsic
    incubation and 5-day infectious period."""
    return EpiParams(n_B=0.83, phi_HV=0.5, phi_VH=0.5, gamma_H=1 / 5.5, eta_H=1 / 5.0, N_H=1.0)


@dataclass(frozen=True)
class PipelineConfig:
    """Model settings shared by every cell."""

    J: int = 20
    rates: RateSet = field(default_factory=default_rates)
    capacity: float | CapacityModel = field(default_factory=default_capacity_model)
    capacity_scale: float = 1.0
    epi: EpiParams = field(default_factory=default_epi_params)
    risk_model: RiskModel | None = None
    burn_in_days: int = BURN_IN_DAYS

    def __post_init__(self):
        if self.epi.N_H != 1.0:
            raise ValueError("pipeline cells are per human; use N_H = 1")
        if self.burn_in_days < 0:
            raise ValueError("burn_in_days must be >= 0")

    @property
    def model(self) -> RiskModel:
        """The configured risk model, or the shipped default."""
        return self.risk_model if self.risk_model is not None else _default_model()

    def lifecycle(self) -> LifecycleParams:
        return LifecycleParams(self.J, self.rates, self.capacity, self.capacity_scale)

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "PipelineConfig":
        """Build from a JSON-style mapping; file paths resolve against ``base_dir``."""
        base = Path(base_dir) if base_dir is not None else Path.cwd()
        kw = {}
        if "J" in d:
            kw["J"] = int(d["J"])
        if d.get("rates"):
            kw["rates"] = load_rate_tables(base / d["rates"])
        if "capacity" in d:
            cap = d["capacity"]
            kw["capacity"] = CapacityModel.from_dict(cap) if isinstance(cap, dict) else float(cap)
        if "capacity_scale" in d:
            kw["capacity_scale"] = float(d["capacity_scale"])
        if "epi" in d:
            kw["epi"] = EpiParams.from_dict({"N_H": 1.0, **d["epi"]})
        if d.get("risk_model"):
            kw["risk_model"] = load_model(base / d["risk_model"])
        if "burn_in_days" in d:
            kw["burn_in_days"] = int(d["burn_in_days"])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), path.parent)


_COORD_LIMIT = {"lat": 90.0, "lon": 180.0}


def _check_coord(value: float, what: str, origin: str):
    if not abs(value) <= _COORD_LIMIT[what]:
        raise ClimateFormatError(f"{origin}: {what}={value} is out of range")
    q = value / RESOLUTION
    if abs(q - round(q)) > 1e-9:
        raise ClimateFormatError(f"{origin}: {what}={value} is not a multiple of {RESOLUTION}")
    return round(q) * RESOLUTION


@dataclass(frozen=True, eq=False)
class ClimateGrid:
    """Cells keyed by ``(lat, lon)``, all covering the same dates."""

    cells: dict

    def __post_init__(self):
        if not self.cells:
            raise ClimateFormatError("grid has no cells")
        first = next(iter(self.cells.values()))
        for (lat, lon), s in self.cells.items():
            _check_coord(lat, "lat", "grid")
            _check_coord(lon, "lon", "grid")
            if s.start_date != first.start_date or len(s) != len(first):
                raise ClimateFormatError(f"cell ({lat}, {lon}) spans different dates")

    @property
    def keys(self) -> list:
        """Cells in canonical order: latitude descending, then longitude ascending."""
        return sorted(self.cells, key=lambda k: (-k[0], k[1]))

    @property
    def start_date(self) -> dt.date:
        return next(iter(self.cells.values())).start_date

    @property
    def days(self) -> int:
        return len(next(iter(self.cells.values())))

    @property
    def bbox(self) -> tuple:
        lats = [k[0] for k in self.cells]
        lons = [k[1] for k in self.cells]
        return min(lats), min(lons), max(lats), max(lons)

    def __len__(self):
        return len(self.cells)


def load_grid(path) -> ClimateGrid:
    """Read ``lat,lon,date,tavg_c,precip_m`` rows (any row order)."""
    path = Path(path)
    rows: dict = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != GRID_HEADER:
            raise ClimateFormatError(f"{path}:1: expected header {','.join(GRID_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ClimateFormatError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                lat, lon = float(row[0]), float(row[1])
                day = dt.date.fromisoformat(row[2].strip())
                t, p = float(row[3]), float(row[4])
            except ValueError as exc:
                raise ClimateFormatError(f"{path}:{lineno}: {exc}") from None
            origin = f"{path}:{lineno}"
            key = (_check_coord(lat, "lat", origin), _check_coord(lon, "lon", origin))
            rows.setdefault(key, {})
            if day in rows[key]:
                raise ClimateFormatError(f"{origin}: duplicate date {day} for cell {key}")
            rows[key][day] = (t, p)
    cells = {}
    for key, by_day in rows.items():
        days = sorted(by_day)
        if (days[-1] - days[0]).days != len(days) - 1:
            raise ClimateFormatError(f"{path}: cell {key} has missing dates")
        vals = np.array([by_day[d] for d in days])
        cells[key] = ClimateSeries(days[0], vals[:, 0], vals[:, 1])
    return ClimateGrid(cells)


def write_grid(grid: ClimateGrid, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GRID_HEADER)
        for key in grid.keys:
            s = grid.cells[key]
            for day, t, p in zip(s.dates, s.tavg, s.precip):
                w.writerow([repr(key[0]), repr(key[1]), day.isoformat(), repr(float(t)),
                            repr(float(p))])


@dataclass
class CellResult:
    start_date: dt.date
    risk: np.ndarray
    r0: np.ndarray
    r0_ma: np.ndarray
    vf: np.ndarray
    vf_ma: np.ndarray
    nonviable: bool


def _nonviable(rates: RateSet, tavg) -> bool:
    # some development rate is zero on every day: no cohort completes the cycle
    m = rates.matrix(tavg)[:, [RATE_INDEX[n] for n in DEVELOPMENT_RATES]]
    return bool(np.all(np.any(m <= 0.0, axis=1)))


def cell_features(climate: ClimateSeries, config: PipelineConfig) -> CellResult:
    """Daily R0 and abundance features for one cell, with ``risk`` left at 0.

    Day ``d`` uses adult abundance at the end of day ``d``.
    """
    life = config.lifecycle()
    n = len(climate)
    if _nonviable(config.rates, climate.tavg):
        z = np.zeros(n)
        return CellResult(climate.start_date, z, z, z, z, z, True)
    spin = config.burn_in_days
    full = climate
    if spin:
        pre = burn_in_climate(climate, spin)
        full = ClimateSeries(pre.start_date, np.concatenate([pre.tavg, climate.tavg]),
                             np.concatenate([pre.precip, climate.precip]))
    cap = life.capacity_for(full)
    seed = float(np.mean(cap)) if np.all(np.isfinite(cap)) else 1.0
    traj = simulate(life, full, LifecycleState.fresh(life.J, adults=seed))
    adults = traj.adults[1:]
    r0 = r0_series(adults, full.tavg, config.epi, life)
    r0_ma = moving_average(r0, FEATURE_WINDOW)[spin:]
    vf_ma = moving_average(adults, FEATURE_WINDOW)[spin:]
    return CellResult(climate.start_date, np.zeros(n), r0[spin:], r0_ma, adults[spin:], vf_ma,
                      False)


def run_cell(climate: ClimateSeries, config: PipelineConfig) -> CellResult:
    """Daily risk for one cell; nonviable cells get risk 0 and the flag set."""
    res = cell_features(climate, config)
    if not res.nonviable:
        res.risk = np.asarray(predict(config.model, res.r0_ma, res.vf_ma), dtype=float)
    return res


@dataclass
class RiskRaster:
    date: dt.date
    lat: np.ndarray
    lon: np.ndarray
    risk: np.ndarray
    r0_ma: np.ndarray
    vf_ma: np.ndarray

    def __len__(self):
        return self.lat.size


@dataclass
class GridResult:
    rasters: list
    failures: dict
    nonviable: list


def run_grid(grid: ClimateGrid, config: PipelineConfig, threads: int = 1,
             progress_every: int = 1000) -> GridResult:
    """Run every cell and assemble one raster per day.

    Per-cell failures are collected and reported, not raised; failed cells
    are left out of the rasters.
    """
    keys = grid.keys
    results: list = [None] * len(keys)
    failures = {}
    done = 0
    lock = threading.Lock()

    def work(i):
        nonlocal done
        key = keys[i]
        try:
            results[i] = run_cell(grid.cells[key], config)
        except (IntegrationError, ValueError, FloatingPointError) as exc:
            failures[key] = f"{type(exc).__name__}: {exc}"
        with lock:
            done += 1
            if done % progress_every == 0 or done == len(keys):
                log.info("processed %d/%d cells", done, len(keys))

    if threads <= 1:
        for i in range(len(keys)):
            work(i)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(len(keys))))
    if failures:
        log.warning("%d of %d cells failed", len(failures), len(keys))
    ok = [i for i, r in enumerate(results) if r is not None]
    lat = np.array([keys[i][0] for i in ok], dtype=float)
    lon = np.array([keys[i][1] for i in ok], dtype=float)
    if ok:
        risk = np.array([results[i].risk for i in ok])
        r0_ma = np.array([results[i].r0_ma for i in ok])
        vf_ma = np.array([results[i].vf_ma for i in ok])
    else:
        risk = r0_ma = vf_ma = np.zeros((0, grid.days))
    rasters = [RiskRaster(grid.start_date + dt.timedelta(days=d), lat, lon, risk[:, d],
                          r0_ma[:, d], vf_ma[:, d]) for d in range(grid.days)]
    nonviable = [keys[i] for i in ok if results[i].nonviable]
    return GridResult(rasters, failures, nonviable)


def band_color(risk: float) -> tuple:
    """Blue below 0.4, red above 0.6, gray in between (bounds are gray)."""
    if risk > 0.6:
        return RED
    if risk < 0.4:
        return BLUE
    return GRAY


def write_ppm(raster: RiskRaster, path) -> None:
    """Binary PPM, one pixel per 0.25-degree cell, north up; absent cells white."""
    if len(raster) == 0:
        width = height = 1
        pixels = bytearray(BLANK)
    else:
        lat0, lat1 = raster.lat.min(), raster.lat.max()
        lon0, lon1 = raster.lon.min(), raster.lon.max()
        width = int(round((lon1 - lon0) / RESOLUTION)) + 1
        height = int(round((lat1 - lat0) / RESOLUTION)) + 1
        img = np.empty((height, width, 3), dtype=np.uint8)
        img[:] = BLANK
        rows = np.round((lat1 - raster.lat) / RESOLUTION).astype(int)
        cols = np.round((raster.lon - lon0) / RESOLUTION).astype(int)
        for r, c, v in zip(rows, cols, raster.risk):
            img[r, c] = band_color(float(v))
        pixels = img.tobytes()
    with Path(path).open("wb") as fh:
        fh.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels)


def render(raster: RiskRaster, out_dir) -> tuple:
    """Write ``risk_YYYY-MM-DD.csv`` and ``risk_YYYY-MM-DD.ppm`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"risk_{raster.date.isoformat()}"
    csv_path = out / f"{stem}.csv"
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RASTER_HEADER)
        for row in zip(raster.lat, raster.lon, raster.risk, raster.r0_ma, raster.vf_ma):
            w.writerow([repr(float(v)) for v in row])
    ppm_path = out / f"{stem}.ppm"
    write_ppm(raster, ppm_path)
    return csv_path, ppm_path


def load_raster(path) -> RiskRaster:
    """Read a raster CSV written by :func:`render`; the date comes from the file name."""
    path = Path(path)
    stem = path.stem
    if not stem.startswith("risk_"):
        raise ClimateFormatError(f"{path}: expected a risk_YYYY-MM-DD.csv file name")
    date = dt.date.fromisoformat(stem[len("risk_"):])
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RASTER_HEADER:
            raise ClimateFormatError(f"{path}:1: expected header {','.join(RASTER_HEADER)}")
        vals = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    vals = vals.reshape(-1, 5)
    return RiskRaster(date, *(vals[:, i].copy() for i in range(5)))

