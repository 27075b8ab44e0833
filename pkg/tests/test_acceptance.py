"""Numbered acceptance criteria; the terminal summary prints one line per criterion."""

import datetime as dt
import hashlib
import math
import time
import warnings
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate, stats

from denguerisk import phasetype as pt
from denguerisk.estimation import (ConvergenceWarning, FilterModel, bin_means, fit_bites_ig,
                                   fit_capacity_ig, pf_smooth, run_filter, simulate_cases)
from denguerisk.forcing import ClimateSeries, default_capacity_model
from denguerisk.lifecycle import (LifecycleParams, LifecycleState, basic_offspring_number,
                                  burn_in, integral_oracle, simulate, steady_state_larvae)
from denguerisk.pipeline import ClimateGrid, PipelineConfig, render, run_cell, run_grid
from denguerisk.risk import LabeledWeek, RiskModel, loss_and_grad, predict, train
from denguerisk.transmission import (EpiParams, TransmissionState, reproduction_number,
                                     simulate_epi)

from conftest import constant_rates, sinusoid


def acceptance(number, title):
    return pytest.mark.acceptance(number, title)


@acceptance(1, "exponential-survival anchor")
def test_exponential_survival_anchor(record_property):
    s = pt.survival(pt.erlang(1), 0.9)
    record_property("detail", f"survival {s:.6f}, CDF {1 - s:.4f}")
    assert s == pytest.approx(math.exp(-0.9), rel=1e-15)
    assert abs((1 - s) - 0.59) <= 0.005


@acceptance(2, "Erlang(100) anchor")
def test_erlang_anchor(record_property):
    F = pt.cdf(pt.erlang(100), 1.1)
    quad, _ = integrate.quad(lambda x: pt.density(pt.erlang(100), x), 0.0, 1.1,
                             epsabs=1e-13, epsrel=1e-13, limit=200)
    record_property("detail", f"CDF {F:.7f}, quadrature gap {abs(F - quad):.1e}")
    assert 0.80 <= F <= 0.88
    assert abs(F - quad) <= 1e-8


@acceptance(3, "reduction correctness (oracle vs simulate)")
def test_reduction_correctness(rates, record_property):
    start = time.perf_counter()
    worst = 0.0
    climates = {"constant": ClimateSeries.constant(27.0, 200),
                "sinusoidal": sinusoid(200, 15.0, 30.0, 120.0)}
    for J in (1, 5, 20):
        for clim in climates.values():
            p = LifecycleParams(J, rates, capacity=1000.0)
            init = LifecycleState.fresh(J, eggs=100.0, larvae=50.0, pupae=20.0, adults=10.0)
            sim = simulate(p, clim, init).totals
            ref = integral_oracle(p, clim, init, 200).totals
            worst = max(worst, float(np.max(np.abs(sim - ref) / np.abs(ref))))
    elapsed = time.perf_counter() - start
    record_property("detail", f"max pointwise relative error {worst:.2e} (tol 1e-2)")
    assert worst <= 0.01
    assert elapsed < 120


def _rates_with_r0(target, J):
    base = dict(gamma_el=0.4, gamma_lp=0.15, gamma_pa=0.5, gamma_ae=0.3, gamma_ed=0.02,
                gamma_ld=0.05, gamma_pd=0.03, gamma_ad=0.08, ov=10.0)
    # r0 is linear in ov
    base["ov"] *= target / basic_offspring_number(base, J)
    return constant_rates(**base), base


@acceptance(4, "equilibrium larvae and extinction")
def test_equilibrium(record_property):
    start = time.perf_counter()
    J, C = 5, 1000.0
    rates, raw = _rates_with_r0(2.0, J)
    assert basic_offspring_number(raw, J) == pytest.approx(2.0, rel=1e-12)
    p = LifecycleParams(J, rates, capacity=C)
    traj = simulate(p, ClimateSeries.constant(25.0, 1500), LifecycleState.fresh(J, adults=20.0))
    larvae = traj.larvae[-1]
    rates, _ = _rates_with_r0(0.5, J)
    init = LifecycleState.fresh(J, eggs=200.0, larvae=100.0, pupae=50.0, adults=20.0)
    low = simulate(LifecycleParams(J, rates, capacity=C), ClimateSeries.constant(25.0, 1500), init)
    remaining = low.totals[-1].sum() / low.totals[0].sum()
    record_property("detail", f"larvae {larvae:.3f} (target {steady_state_larvae(2.0, C):.0f}), "
                    f"r0=0.5 remaining fraction {remaining:.1e}")
    assert larvae == pytest.approx(500.0, rel=0.01)
    assert remaining < 1e-6
    assert time.perf_counter() - start < 30


@acceptance(5, "offspring number decreasing in J")
def test_monotone_in_J(record_property):
    rng = np.random.default_rng(5)
    Js = (1, 2, 5, 10, 100)
    failures = 0
    for _ in range(50):
        r = dict(ov=rng.uniform(5, 100),
                 **{n: rng.uniform(0.05, 1.0) for n in ("gamma_el", "gamma_lp", "gamma_pa",
                                                         "gamma_ae")},
                 **{n: rng.uniform(0.005, 0.3) for n in ("gamma_ed", "gamma_ld", "gamma_pd",
                                                          "gamma_ad")})
        values = [basic_offspring_number(r, J) for J in Js]
        failures += not all(a > b for a, b in zip(values, values[1:]))
    record_property("detail", f"{50 - failures}/50 draws strictly decreasing")
    assert failures == 0


def _slope(params, life, eq, T):
    traj = simulate_epi(params, life, ClimateSeries.constant(T, 140),
                        TransmissionState.disease_free(eq, params.N_H).seeded(1.0))
    weekly = np.diff(traj.cumulative_incidence[::7])
    return np.polyfit(np.arange(4, 16), np.log(weekly[4:16]), 1)[0]


@acceptance(6, "R0 threshold sign")
def test_r0_threshold(rates, record_property):
    start = time.perf_counter()
    rng = np.random.default_rng(6)
    correct = 0
    for _ in range(10):
        T = rng.uniform(24.0, 30.0)
        J = int(rng.integers(1, 6))
        life = LifecycleParams(J, rates, capacity=rng.uniform(200.0, 2000.0))
        eq = burn_in(life, ClimateSeries.constant(T, 365), 730)
        base = EpiParams(1.0, rng.uniform(0.3, 0.9), rng.uniform(0.3, 0.9),
                         rng.uniform(1 / 7, 1 / 4), rng.uniform(1 / 7, 1 / 4), N_H=1000.0)
        R1 = reproduction_number(eq.A.sum(), base, rates.at(T))
        ok = True
        for target, grows in ((1.3, True), (0.7, False)):
            p = replace(base, n_B=math.sqrt(target / R1))
            ok &= (_slope(p, life, eq, T) > 0) == grows
        correct += ok
    record_property("detail", f"{correct}/10 draws with the correct sign at R0 = 1.3 and 0.7")
    assert correct == 10
    assert time.perf_counter() - start < 60


@acceptance(7, "particle-filter recovery")
def test_particle_filter_recovery(rates, record_property):
    start = time.perf_counter()
    weeks = 52
    days = np.arange(weeks * 7)
    clim = ClimateSeries(dt.date(2020, 1, 6), 27 + 2.5 * np.sin(2 * np.pi * days / 365),
                         np.zeros(days.size))
    epi = EpiParams(1.0, 0.5, 0.5, 1 / 5.5, 1 / 5, N_H=1e5)
    model = FilterModel(LifecycleParams(3, rates, dt=0.05), epi, clim, init_infectious=10.0,
                        burn_in_days=365)
    k = np.arange(weeks)
    C_star = 3.0 * (1 + 0.5 * np.sin(2 * np.pi * (k - 10) / 52))
    nb_star = 0.83
    nb_err, c_rmse, product_rmse = [], [], []
    for seed in range(5):
        series, _ = simulate_cases(model, C_star, nb_star, weeks, seed=seed)
        res = run_filter(series, model, n_particles=2000, seed=seed)
        sm = pf_smooth(res, n_samples=200, seed=seed)
        nb_hat = float(np.mean(sm.mean["n_B"]))
        nb_err.append(abs(nb_hat - nb_star) / nb_star)
        c_rmse.append(float(np.sqrt(np.mean((sm.mean["C"] - C_star) ** 2)) / np.mean(C_star)))
        prod = sm.paths["n_B"] ** 2 * sm.paths["C"]
        product_rmse.append(float(np.sqrt(np.mean((prod.mean(axis=0) - nb_star ** 2 * C_star) ** 2))
                                  / np.mean(nb_star ** 2 * C_star)))
    record_property("detail", f"n_B error max {max(nb_err):.0%} (tol 10%), "
                    f"C RMSE max {max(c_rmse):.0%} (tol 25%), "
                    f"n_B^2*C RMSE max {max(product_rmse):.0%}")
    assert max(nb_err) <= 0.10
    assert max(c_rmse) <= 0.25
    assert time.perf_counter() - start < 300


@acceptance(8, "capacity regression recovery")
def test_capacity_recovery(record_property):
    start = time.perf_counter()
    m = default_capacity_model()
    rng = np.random.default_rng(8)
    p = rng.uniform(0.0, 0.02, 5000)
    C = stats.invgauss.rvs(m.mu(p) / m.lam(p), scale=m.lam(p), random_state=rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        post = fit_capacity_ig(p, C, seed=1)
    width = 0.002
    edges, _, counts = bin_means(p, C, width)
    mid = (edges + width / 2)[counts >= 50]
    mu_hat = post.mu_draws(mid, thin=10).mean(axis=0)
    err = float(np.max(np.abs(mu_hat / m.mu(mid) - 1)))
    residual = max(abs(q.a0 + q.a1 * q.p0 + q.a2 * q.p0 ** 2
                       - (q.alpha0 + math.exp(q.alpha2 - q.alpha1 * q.p0)))
                   for q in post.models(thin=10))
    record_property("detail", f"max mu error {err:.1%} over {mid.size} bins (tol 10%), "
                    f"continuity residual {residual:.1e}")
    assert err <= 0.10
    assert residual < 1e-9
    assert time.perf_counter() - start < 300


@acceptance(9, "inverse-Gaussian bite fit")
def test_bite_fit(record_property):
    x = stats.invgauss.rvs(0.83 / 2.0, scale=2.0, size=10_000, random_state=9)
    fit = fit_bites_ig(x)
    record_property("detail", f"mean {fit.mu:.4f}, shape {fit.lam:.3f}")
    assert abs(fit.mu - 0.83) <= 0.02


@acceptance(10, "logistic risk model")
def test_logistic_model(record_property):
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(20):
        X, y, w = rng.normal(size=(60, 2)), (rng.random(60) < 0.5).astype(float), rng.normal(size=3)
        _, g = loss_and_grad(w, X, y)
        h = 1e-5
        fd = np.array([(loss_and_grad(w + h * e, X, y)[0] - loss_and_grad(w - h * e, X, y)[0])
                       / (2 * h) for e in np.eye(3)])
        worst = max(worst, float(np.max(np.abs(fd - g)) / np.max(np.abs(g))))
    X = rng.uniform(0, 4, size=(500, 2))
    s = 1.5 * X[:, 0] + X[:, 1] - 5
    X, y = X[np.abs(s) > 0.2], (s[np.abs(s) > 0.2] > 0).astype(int)
    model = train([LabeledWeek(a, b, c) for (a, b), c in zip(X, y)], epochs=3000)
    acc = float(np.mean((predict(model, X[:, 0], X[:, 1]) > 0.5) == (y == 1)))
    zero = predict(RiskModel(0.0, 0.0, 0.0), rng.uniform(0, 5, 10), rng.uniform(0, 5, 10))
    record_property("detail", f"gradient relative gap {worst:.1e}, separable accuracy {acc:.3f}")
    assert worst <= 1e-6
    assert acc >= 0.99
    assert np.all(zero == 0.5)


@acceptance(11, "conservation and vector demography")
def test_conservation(rates, record_property):
    rng = np.random.default_rng(11)
    worst_h, worst_a = 0.0, 0.0
    clim = sinusoid(3 * 365, 18.0, 31.0, 365.0)
    for _ in range(3):
        J = int(rng.integers(1, 6))
        life = LifecycleParams(J, rates, capacity=rng.uniform(100.0, 1000.0))
        eq = burn_in(life, clim, 365)
        N = rng.uniform(50.0, 5000.0)
        epi = EpiParams(rng.uniform(0.5, 2.0), rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9),
                        rng.uniform(1 / 7, 1 / 4), rng.uniform(1 / 7, 1 / 4), N_H=N)
        traj = simulate_epi(epi, life, clim, TransmissionState.disease_free(eq, N).seeded(1.0))
        base = simulate(life, clim, eq).adults
        worst_h = max(worst_h, float(np.max(np.abs(traj.humans.sum(axis=1) - N)) / N))
        worst_a = max(worst_a, float(np.max(np.abs(traj.adults - base)) / base.max()))
    record_property("detail", f"human drift {worst_h:.1e}·N_H, adult gap {worst_a:.1e}")
    assert worst_h <= 1e-9
    assert worst_a <= 1e-6


def _digest(directory):
    h = hashlib.sha256()
    for f in sorted(directory.iterdir()):
        h.update(f.name.encode())
        h.update(f.read_bytes())
    return h.hexdigest()


@acceptance(12, "pipeline determinism and scale")
def test_pipeline_determinism(tmp_path, record_property):
    rng = np.random.default_rng(12)
    start = dt.date(2023, 1, 1)
    days = np.arange(365)
    cells = {}
    for i in range(10):
        for j in range(10):
            lat, lon = 20.0 - 0.25 * i, 100.0 + 0.25 * j
            mean = 14.0 + 1.6 * i + rng.normal(0, 1)
            t = mean + 6 * np.sin(2 * np.pi * (days - 100) / 365) + rng.normal(0, 1, 365)
            p = np.maximum(0.0, 0.006 + 0.005 * np.sin(2 * np.pi * (days - 150) / 365)
                           + rng.normal(0, 0.002, 365))
            cells[(lat, lon)] = ClimateSeries(start, t, p)
    grid = ClimateGrid(cells)
    config = PipelineConfig()
    t0 = time.perf_counter()
    digests = []
    for threads in (1, 4):
        out = tmp_path / f"threads{threads}"
        res = run_grid(grid, config, threads=threads)
        assert not res.failures and len(res.rasters) == 365
        for raster in res.rasters:
            assert np.all((raster.risk >= 0) & (raster.risk <= 1))
            render(raster, out)
        digests.append(_digest(out))
    total = time.perf_counter() - t0
    cell_config = PipelineConfig(J=100)
    run_cell(ClimateSeries.constant(27.0, 30, 0.005), cell_config)   # JIT warm-up
    t1 = time.perf_counter()
    run_cell(cells[(20.0, 100.0)], cell_config)
    single = time.perf_counter() - t1
    record_property("detail", f"grid {total:.1f} s for both thread counts, identical "
                    f"{digests[0] == digests[1]}, J=100 cell-year {single:.2f} s")
    assert digests[0] == digests[1]
    assert total < 600
    assert single < 1.0
