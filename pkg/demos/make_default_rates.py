"""Regenerate ``src/denguerisk/data/default_rates.json``.

The shipped tables are smooth thermal-response curves with the usual shape
for Aedes aegypti lab data (Briere-type development, U-shaped mortality,
hump-shaped egg output). They are illustrative defaults, not a calibrated
parameterization; swap in your own tables for real work.

    python demos/make_default_rates.py
"""

from pathlib import Path

import numpy as np

from denguerisk.forcing import RATE_NAMES, RateSet, RateTable, save_rate_tables

T = np.arange(-10.0, 46.0, 1.0)


def briere(c, t_min, t_max):
    x = c * T * (T - t_min) * np.sqrt(np.clip(t_max - T, 0.0, None))
    return np.where((T > t_min) & (T < t_max), x, 0.0)


def u_shape(base, curv, t_opt, cap=1.5):
    return np.minimum(base + curv * (T - t_opt) ** 2, cap)


curves = {
    "gamma_el": briere(2.2e-4, 10.0, 40.0),    # egg hatching, ~2.5 d at 30 C
    "gamma_lp": briere(9.0e-5, 10.0, 40.0),    # larval development, ~6 d at 30 C
    "gamma_pa": briere(2.6e-4, 10.0, 40.0),    # pupal development, ~2 d at 30 C
    "gamma_ae": briere(1.6e-4, 12.0, 40.0),    # gonotrophic cycle, ~3.6 d at 30 C
    "gamma_ed": u_shape(0.01, 8e-4, 22.0),
    "gamma_ld": u_shape(0.02, 1.5e-3, 24.0),
    "gamma_pd": u_shape(0.02, 1.0e-3, 24.0),
    "gamma_ad": u_shape(0.04, 8e-4, 25.0),
    # extrinsic incubation, mean period 4 + exp(5.15 - 0.123 T) days
    "gamma_v": 1.0 / (4.0 + np.exp(5.15 - 0.123 * T)),
    # eggs per completed gonotrophic cycle
    "ov": np.clip(80.0 * (1.0 - ((T - 27.0) / 13.0) ** 2), 0.0, None),
}

rates = RateSet({n: RateTable(n, T, np.round(curves[n], 6)) for n in RATE_NAMES},
                source="illustrative thermal-response curves shaped after published Aedes aegypti "
                       "laboratory data; not a calibrated parameterization (demos/make_default_rates.py)")

if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "src" / "denguerisk" / "data" / "default_rates.json"
    save_rate_tables(rates, out)
    print(f"wrote {out}")
