import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from denguerisk.errors import ClimateFormatError, ModelInvalidError, RateTableError
from denguerisk.forcing import (RATE_NAMES, CapacityModel, ClimateSeries, RateTable,
                                capacity_mean, capacity_series, centered_moving_average,
                                default_capacity_model, default_rates, development_extent,
                                load_climate, load_rate_tables, moving_average, rate_at,
                                save_rate_tables, write_climate)

from conftest import START


def _write(path, text):
    path.write_text(text)
    return path


def test_load_three_rows(tmp_path):
    p = _write(tmp_path / "c.csv", "date,tavg_c,precip_m\n2022-01-01,25.0,0.001\n"
               "2022-01-02,26.5,0\n2022-01-03,24,0.01\n")
    s = load_climate(p)
    assert len(s) == 3 and s.start_date == START
    np.testing.assert_array_equal(s.tavg, [25.0, 26.5, 24.0])


@pytest.mark.parametrize("body,match", [
    ("2022-01-01,25,-0.1\n", "negative precipitation"),
    ("2022-01-01,25\n", "line 2"),
    ("2022-01-01,abc,0\n", "line 2"),
    ("2022-01-01,25,0\n2022-01-03,25,0\n", "consecutive"),
    ("2022-01-02,25,0\n2022-01-01,25,0\n", "consecutive"),
    ("01/02/2022,25,0\n", "bad date"),
])
def test_load_rejects_bad_rows(tmp_path, body, match):
    p = _write(tmp_path / "c.csv", "date,tavg_c,precip_m\n" + body)
    with pytest.raises(ClimateFormatError, match=match):
        load_climate(p)


def test_load_rejects_bad_header(tmp_path):
    with pytest.raises(ClimateFormatError, match="header"):
        load_climate(_write(tmp_path / "c.csv", "day,t,p\n2022-01-01,1,0\n"))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(-40, 45), st.floats(0, 0.2)), min_size=1, max_size=40))
def test_climate_round_trip(tmp_path_factory, rows):
    s = ClimateSeries(START, [r[0] for r in rows], [r[1] for r in rows])
    p = tmp_path_factory.mktemp("rt") / "c.csv"
    write_climate(s, p)
    assert load_climate(p) == s


def test_rate_interpolation_and_clamp():
    tab = RateTable("gamma_el", [10.0, 30.0], [0.0, 0.2])
    assert rate_at(tab, 20.0) == pytest.approx(0.1)
    assert rate_at(tab, 40.0) == 0.2
    assert rate_at(tab, -5.0) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=2, max_size=12))
def test_rate_monotone_and_bounded(values):
    values = np.sort(values)
    tab = RateTable("gamma_ad", np.arange(values.size) * 3.0, values)
    T = np.sort(np.random.default_rng(0).uniform(-20, 60, 1000))
    r = rate_at(tab, T)
    assert np.all(np.diff(r) >= 0)
    assert values.min() <= r.min() and r.max() <= values.max()


def test_rate_table_validation():
    with pytest.raises(RateTableError, match="unknown"):
        RateTable("gamma_zz", [0, 1], [0, 1])
    with pytest.raises(RateTableError, match="increasing"):
        RateTable("ov", [1, 1], [0, 1])
    with pytest.raises(RateTableError, match=">= 0"):
        RateTable("ov", [0, 1], [0, -1])


def test_rate_file_round_trip_and_errors(tmp_path, rates):
    p = tmp_path / "r.json"
    save_rate_tables(rates, p)
    back = load_rate_tables(p)
    for n in RATE_NAMES:
        np.testing.assert_array_equal(back[n].knots, rates[n].knots)
        np.testing.assert_array_equal(back[n].values, rates[n].values)
    _write(p, '{"rates": {"gamma_xx": [[0, 1], [1, 1]]}}')
    with pytest.raises(RateTableError, match="unknown rate name"):
        load_rate_tables(p)
    _write(p, '{"rates": {"ov": [[0, 1], [1, 1]]}}')
    with pytest.raises(RateTableError, match="missing"):
        load_rate_tables(p)


def test_default_rates_shape(rates):
    at29, cold = rates.at(29.0), rates.at(-10.0)
    for n in ("gamma_el", "gamma_lp", "gamma_pa", "gamma_ae"):
        assert at29[n] > 0 and cold[n] == 0.0
    assert at29["ov"] > 0 and at29["gamma_ad"] > 0


def test_development_extent_constant():
    tab = RateTable.constant("gamma_lp", 0.25)
    s = ClimateSeries.constant(20.0, 10)
    assert development_extent(tab, s, 3.0, 7.0) == pytest.approx(1.0)
    assert development_extent(tab, s, 2.5, 2.5) == 0.0
    with pytest.raises(ValueError):
        development_extent(tab, s, 5.0, 4.0)


def test_development_extent_matches_riemann_sum(rates):
    s = ClimateSeries(START, [12.0, 31.0, 18.5, 27.0, 35.0], np.zeros(5))
    tab = rates["gamma_lp"]
    u, t = 0.37, 4.81
    h = 1e-4
    grid = np.arange(u, t, h) + h / 2
    brute = np.sum(rate_at(tab, s.tavg[np.floor(grid).astype(int)])) * h
    assert development_extent(tab, s, u, t) == pytest.approx(brute, abs=1e-8)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10))
def test_development_extent_additive(a, b, c):
    u, m, t = sorted((a, b, c))
    s = ClimateSeries(START, np.linspace(5, 35, 10), np.zeros(10))
    tab = default_rates()["gamma_ae"]
    whole = development_extent(tab, s, u, t)
    assert development_extent(tab, s, u, m) + development_extent(tab, s, m, t) == \
        pytest.approx(whole, abs=1e-9)


def test_moving_averages():
    assert centered_moving_average([1, 2, 3])[1] == 2.0
    np.testing.assert_array_equal(moving_average([4, 1, 7], 1), [4, 1, 7])
    np.testing.assert_allclose(moving_average(np.full(9, 3.5), 4), 3.5)
    np.testing.assert_allclose(moving_average([2, 4, 6, 8], 2), [2, 3, 5, 7])
    np.testing.assert_allclose(centered_moving_average([3, 6, 9, 12]), [4.5, 6, 9, 10.5])
    assert moving_average([], 5).size == 0


def test_capacity_continuity_and_origin():
    m = default_capacity_model()
    assert abs((m.a0 + m.a1 * m.p0 + m.a2 * m.p0 ** 2)
               - (m.alpha0 + math.exp(m.alpha2 - m.alpha1 * m.p0))) < 1e-9
    assert abs(m.mu(m.p0 - 1e-6) - m.mu(m.p0 + 1e-6)) < 1e-3
    assert abs(m.lam(m.p0 - 1e-9) - m.lam(m.p0 + 1e-9)) < 1e-6
    assert capacity_mean(m, 0.0) == pytest.approx(m.a0)


def test_capacity_rises_then_falls():
    m = default_capacity_model()
    p = np.linspace(0, 0.05, 201)
    mu = capacity_mean(m, p)
    k = int(np.argmax(mu))
    assert 0 < k < p.size - 1
    assert np.all(np.diff(mu[:k + 1]) >= 0) and np.all(np.diff(mu[k:]) <= 0)


def test_capacity_model_rejects_nonpositive_mean():
    d = default_capacity_model().to_dict()
    d["a0"] = -1.0
    with pytest.raises(ModelInvalidError):
        CapacityModel.from_dict(d)
    with pytest.raises(ValueError):
        capacity_mean(default_capacity_model(), -0.01)


def test_capacity_series_uses_trailing_two_weeks():
    m = default_capacity_model()
    precip = np.r_[np.zeros(20), np.full(20, 0.01)]
    c = capacity_series(m, precip)
    assert c[19] == pytest.approx(m.a0)
    assert c[20] == pytest.approx(m.mu(0.01 / 14))
    assert c[39] == pytest.approx(m.mu(0.01))


def test_climate_series_validation():
    with pytest.raises(ClimateFormatError):
        ClimateSeries(START, [1.0, 2.0], [0.0])
    with pytest.raises(ClimateFormatError):
        ClimateSeries(START, [np.nan], [0.0])
    s = ClimateSeries.constant(20.0, 5).cyclic(12)
    assert len(s) == 12 and s.dates[-1] == START + dt.timedelta(days=11)
