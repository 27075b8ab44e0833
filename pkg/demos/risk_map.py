"""Daily outbreak-risk rasters over a small synthetic climate grid.

Builds a 6x6 grid spanning a temperature gradient, runs every cell with the
shipped default models and writes one CSV plus one PPM image per day into
``risk_maps/`` (red: risk > 0.6, blue: < 0.4, gray: in between).

    python demos/risk_map.py [--threads 2] [--out risk_maps]
"""

import argparse
import datetime as dt

import numpy as np

from denguerisk.forcing import ClimateSeries
from denguerisk.pipeline import ClimateGrid, PipelineConfig, render, run_grid

ap = argparse.ArgumentParser()
ap.add_argument("--threads", type=int, default=2)
ap.add_argument("--out", default="risk_maps")
args = ap.parse_args()

rng = np.random.default_rng(0)
days = np.arange(365)
cells = {}
for i in range(6):
    for j in range(6):
        # cooler to the north, wetter to the east
        t = 12.0 + 3.0 * i + 6 * np.sin(2 * np.pi * (days - 100) / 365) + rng.normal(0, 1, 365)
        p = np.maximum(0.0, 0.002 * (j + 1) * (1 + np.sin(2 * np.pi * (days - 150) / 365)))
        cells[(-10.0 - 0.25 * i, 30.0 + 0.25 * j)] = ClimateSeries(dt.date(2023, 1, 1), t, p)
grid = ClimateGrid(cells)
result = run_grid(grid, PipelineConfig(), threads=args.threads)
for raster in result.rasters:
    render(raster, args.out)
for month_day in ("2023-01-15", "2023-04-15", "2023-07-15", "2023-10-15"):
    r = result.rasters[(dt.date.fromisoformat(month_day) - grid.start_date).days]
    high = int(np.sum(r.risk > 0.6))
    low = int(np.sum(r.risk < 0.4))
    print(f"{month_day}: {high} high-risk, {len(r) - high - low} indeterminate, {low} low-risk cells")
print(f"{len(result.nonviable)} nonviable cells; {len(result.rasters)} rasters in {args.out}/")
