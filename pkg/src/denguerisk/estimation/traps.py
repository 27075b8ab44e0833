"""Scaling between simulated adult abundance and trap counts.

Counts at one site follow ``Poisson(k * a_i + r)`` with ``k >= 0`` and the
background catch ``0 <= r < 2``. The pair is sampled by random-walk
Metropolis on ``(log kappa, r)`` where ``kappa = k * mean(a)``; working in
``kappa`` makes the fit exactly equivariant to rescaling ``a``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

__all__ = ["TrapFit", "fit_trap_scaling", "fit_trap_sites", "R_MAX"]

R_MAX = 2.0


@dataclass
class TrapFit:
    k: float
    r: float
    draws: np.ndarray = field(repr=False)   # (n, 2) columns k, r
    acceptance: float

    def mean_curve(self, adults) -> np.ndarray:
        return self.k * np.asarray(adults, dtype=float) + self.r


def _loglik(kappa, r, x, y, const):
    m = kappa * x + r
    if np.any(m <= 0):
        # zero mean is only consistent with zero counts
        pos = m > 0
        if np.any(y[~pos] > 0):
            return -np.inf
        return float(np.sum(y[pos] * np.log(m[pos]) - m[pos]) - const)
    return float(np.sum(y * np.log(m) - m) - const)


def fit_trap_scaling(counts, adults, n_burn: int = 2000, n_keep: int = 4000,
                     seed: int = 0) -> TrapFit:
    """Posterior means of ``(k, r)`` for one site under flat priors."""
    y = np.asarray(counts, dtype=float)
    a = np.asarray(adults, dtype=float)
    if y.shape != a.shape or y.ndim != 1 or y.size == 0:
        raise ValueError("counts and adults must be equal-length nonempty 1-d arrays")
    if np.any(y < 0) or np.any(y != np.round(y)):
        raise ValueError("counts must be nonnegative integers")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValueError("adult abundance must be finite and >= 0")
    const = float(np.sum(gammaln(y + 1.0)))
    rng = np.random.default_rng(seed)
    scale = float(a.mean())
    if scale == 0.0:
        if np.any(y > 0):
            warnings.warn("all simulated adults are zero but traps caught mosquitoes; "
                          "the fit is driven by the background term r alone", stacklevel=2)
        draws = _sample_r_only(y, n_burn, n_keep, rng)
        return TrapFit(0.0, float(draws.mean()), np.column_stack([np.zeros_like(draws), draws]),
                       1.0)
    x = a / scale

    # start from a least-squares line clipped into the support
    slope, icpt = np.polyfit(x, y, 1) if np.ptp(x) > 0 else (y.mean(), 0.0)
    theta = np.array([math.log(max(slope, 1e-3 * max(y.mean(), 1e-3))),
                      min(max(icpt, 0.0), 0.5 * R_MAX)])

    def target(t):
        if not 0.0 <= t[1] < R_MAX:
            return -np.inf
        # flat prior on kappa; the log-kappa walk needs the Jacobian kappa
        return _loglik(math.exp(t[0]), t[1], x, y, const) + t[0]

    lp = target(theta)
    step = np.array([0.1, 0.1])
    out = np.empty((n_keep, 2))
    window = 0
    accepted = 0
    for it in range(n_burn + n_keep):
        prop = theta + step * rng.standard_normal(2)
        lp_new = target(prop)
        if np.log(rng.random()) < lp_new - lp:
            theta, lp = prop, lp_new
            window += 1
            if it >= n_burn:
                accepted += 1
        if it < n_burn and (it + 1) % 100 == 0:
            # adapt during burn-in only
            step *= math.exp(np.clip(window / 100.0 - 0.3, -0.5, 0.5) * 2.0)
            window = 0
        if it >= n_burn:
            out[it - n_burn] = (math.exp(theta[0]) / scale, theta[1])
    k, r = out.mean(axis=0)
    return TrapFit(float(k), float(r), out, accepted / n_keep)


def _sample_r_only(y, n_burn, n_keep, rng):
    n = y.size
    total = y.sum()

    def target(r):
        if not 0.0 <= r < R_MAX:
            return -np.inf
        if r == 0.0:
            return 0.0 if total == 0 else -np.inf
        return total * math.log(r) - n * r

    r = min(max(total / n, 1e-3), 0.5 * R_MAX)
    lp = target(r)
    step = 0.2
    out = np.empty(n_keep)
    window = 0
    for it in range(n_burn + n_keep):
        prop = r + step * rng.standard_normal()
        lp_new = target(prop)
        if np.log(rng.random()) < lp_new - lp:
            r, lp = prop, lp_new
            window += 1
        if it < n_burn and (it + 1) % 100 == 0:
            step *= math.exp(np.clip(window / 100.0 - 0.44, -0.5, 0.5) * 2.0)
            window = 0
        if it >= n_burn:
            out[it - n_burn] = r
    return out


def fit_trap_sites(counts_by_site: dict, adults_by_site: dict, seed: int = 0, **kw) -> dict:
    """Independent fits per site; site ``s`` uses seed ``[seed, index]``."""
    out = {}
    for i, site in enumerate(sorted(counts_by_site)):
        out[site] = fit_trap_scaling(counts_by_site[site], adults_by_site[site],
                                     seed=int(np.random.SeedSequence([seed, i]).generate_state(1)[0]),
                                     **kw)
    return out
