"""Bayesian inverse-Gaussian regression of carrying capacity on precipitation.

``C | p ~ IG(mu(p), lam(p))`` with the piecewise forms of
:class:`~denguerisk.forcing.CapacityModel`. The 11 free parameters are sampled
by Metropolis-within-Gibbs over five parameter blocks (the two branches of
``mu``, the two branches of ``lam``, and ``p0``), with flat priors on the region
where ``mu`` and ``lam`` stay positive. Block proposals are shaped by the
curvature at the MAP estimate; their scales adapt during burn-in only.

Internally precipitation is divided by its maximum and capacity by its mean,
which puts every coordinate on a unit scale. An IG law is closed under
scaling (``sC ~ IG(s mu, s lam)``), so the map back is exact.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ..forcing import CapacityModel

__all__ = [
    "ig_logpdf",
    "ig_pdf",
    "split_rhat",
    "bin_means",
    "CapacityPosterior",
    "fit_capacity_ig",
    "ConvergenceWarning",
]

_LOG_2PI = math.log(2.0 * math.pi)
NAMES = CapacityModel.PARAM_NAMES


class ConvergenceWarning(UserWarning):
    """MCMC chains disagree (split-R-hat above threshold)."""


def ig_logpdf(c, mu, lam):
    """Log density of IG(mu, lam) at ``c > 0``."""
    c = np.asarray(c, dtype=float)
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    out = 0.5 * (np.log(lam) - _LOG_2PI - 3.0 * np.log(c)) - lam * (c - mu) ** 2 / (2.0 * mu * mu * c)
    return float(out) if out.ndim == 0 else out


def ig_pdf(c, mu, lam):
    return np.exp(ig_logpdf(c, mu, lam))


def split_rhat(chains) -> np.ndarray:
    """Split-R-hat per column for ``chains`` of shape (m, n, d)."""
    x = np.asarray(chains, dtype=float)
    if x.ndim == 2:
        x = x[..., None]
    m, n, d = x.shape
    half = n // 2
    if half < 2:
        raise ValueError("need at least 4 draws per chain")
    s = np.concatenate([x[:, :half], x[:, n - half:]], axis=0)
    means = s.mean(axis=1)
    W = s.var(axis=1, ddof=1).mean(axis=0)
    B = half * means.var(axis=0, ddof=1)
    var = (half - 1) / half * W + B / half
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(var / W)
    return np.where(W > 0, r, np.where(B > 0, np.inf, 1.0))


def bin_means(p, C, width: float = 0.002):
    """Bin left edges, mean capacity and count per nonempty bin."""
    p = np.asarray(p, dtype=float)
    C = np.asarray(C, dtype=float)
    idx = np.floor(p / width).astype(int)
    keys = np.unique(idx)
    counts = np.array([np.sum(idx == k) for k in keys])
    means = np.array([C[idx == k].mean() for k in keys])
    return keys * width, means, counts


def _branch_constants(theta):
    a0, a1, a2, al1, al2, b0, b1, b2, be1, be2, p0 = theta
    e0 = math.exp(min(al2 - al1 * p0, 700.0))
    alpha0 = a0 + a1 * p0 + a2 * p0 * p0 - e0
    beta0 = b0 + (b1 - be1) * p0 + (b2 - be2) * p0 * p0
    return alpha0, beta0


def _mu_lam_sorted(theta, x, k):
    """``mu`` and ``lam`` on sorted ``x`` whose first ``k`` entries lie below p0."""
    a0, a1, a2, al1, al2, b0, b1, b2, be1, be2, _ = theta
    alpha0, beta0 = _branch_constants(theta)
    xl, xh = x[:k], x[k:]
    mu = np.empty_like(x)
    lam = np.empty_like(x)
    mu[:k] = a0 + xl * (a1 + a2 * xl)
    lam[:k] = b0 + xl * (b1 + b2 * xl)
    with np.errstate(over="ignore"):
        mu[k:] = alpha0 + np.exp(np.minimum(al2 - al1 * xh, 700.0))
    lam[k:] = beta0 + xh * (be1 + be2 * xh)
    return mu, lam


class _Target:
    """Log posterior in scaled coordinates (flat prior on the feasible set)."""

    def __init__(self, x, c, p0_bounds, check_grid):
        order = np.argsort(x, kind="stable")
        self.x = x[order]
        self.c = c[order]
        self.p0_bounds = p0_bounds
        self.grid = check_grid

    def __call__(self, theta) -> float:
        lo, hi = self.p0_bounds
        p0 = theta[10]
        if not lo <= p0 <= hi:
            return -np.inf
        mu_g, lam_g = _mu_lam_sorted(theta, self.grid, int(np.searchsorted(self.grid, p0)))
        if np.any(mu_g <= 0) or np.any(lam_g <= 0) or not np.all(np.isfinite(mu_g)):
            return -np.inf
        mu, lam = _mu_lam_sorted(theta, self.x, int(np.searchsorted(self.x, p0)))
        if np.any(mu <= 0) or np.any(lam <= 0):
            return -np.inf
        c = self.c
        ll = 0.5 * np.sum(np.log(lam)) - np.sum(lam * (c - mu) ** 2 / (2.0 * mu * mu * c))
        return float(ll) if np.isfinite(ll) else -np.inf


@dataclass
class CapacityPosterior:
    """Posterior draws in original units plus diagnostics."""

    draws: np.ndarray                  # (chains * kept, 11) in NAMES order
    chains: np.ndarray = field(repr=False)   # (chains, kept, 11)
    map_model: CapacityModel
    p_range: tuple
    rhat: np.ndarray
    acceptance: np.ndarray             # per Gibbs block
    converged: bool

    @property
    def names(self) -> tuple:
        return NAMES

    def models(self, thin: int = 1) -> list:
        return [CapacityModel.from_vector(t, self.p_range) for t in self.draws[::thin]]

    def mu_draws(self, p, thin: int = 1) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.array([CapacityModel.mu(_Unchecked(t), p) for t in self.draws[::thin]])

    def mu_summary(self, p, levels=(25.0, 75.0), thin: int = 1):
        """Posterior mean and percentile curves of ``mu(p)``."""
        m = self.mu_draws(p, thin)
        return m.mean(axis=0), np.percentile(m, levels, axis=0)

    def posterior_mean_model(self) -> CapacityModel:
        return CapacityModel.from_vector(self.draws.mean(axis=0), self.p_range)


class _Unchecked:
    """Parameter holder that reuses CapacityModel's formulas without validation."""

    def __init__(self, theta):
        for n, v in zip(NAMES, theta):
            setattr(self, n, float(v))

    alpha0 = CapacityModel.alpha0
    beta0 = CapacityModel.beta0


def _to_original(theta, pm, cs):
    a0, a1, a2, al1, al2, b0, b1, b2, be1, be2, p0 = theta
    return np.array([cs * a0, cs * a1 / pm, cs * a2 / pm ** 2, al1 / pm, al2 + math.log(cs),
                     cs * b0, cs * b1 / pm, cs * b2 / pm ** 2, cs * be1 / pm, cs * be2 / pm ** 2,
                     p0 * pm])


def _initial_guess(x, c, p0):
    low = x < p0
    a = np.polyfit(x[low], c[low], 2)[::-1] if low.sum() >= 3 else np.array([c.mean(), 0, 0])
    edge = a[0] + a[1] * p0 + a[2] * p0 * p0
    al1 = 1.0
    al2 = math.log(max(0.5 * abs(edge), 1e-3)) + al1 * p0
    lam = 1.0 / np.mean(1.0 / c - 1.0 / c.mean())
    lam = lam if np.isfinite(lam) and lam > 0 else 1.0
    return np.array([*a, al1, al2, lam, 0.0, 0.0, 0.0, 0.0, p0])


def _negated(target):
    def f(t):
        v = target(t)
        return -v if np.isfinite(v) else 1e300
    return f


def _map(target, x, c, candidates):
    best = None
    for p0 in candidates:
        th = _initial_guess(x, c, p0)
        if not np.isfinite(target(th)):
            th[5] = max(th[5], 1.0)
            if not np.isfinite(target(th)):
                continue
        # coarse optimum only; the chains refine it
        res = minimize(_negated(target), th, method="Powell",
                       options={"maxiter": 4000, "xtol": 1e-3, "ftol": 1e-7})
        val = target(res.x)
        if best is None or val > best[1]:
            best = (res.x, val)
    if best is None:
        raise ValueError("no feasible starting point for the capacity regression")
    return best[0]


# Gibbs blocks: low mu, high mu, low lam, high lam, threshold, and a joint
# move of everything so p0 can travel along its ridge with the coefficients
BLOCKS = ((0, 1, 2), (3, 4), (5, 6, 7), (8, 9), (10,), tuple(range(11)))
# the likelihood is piecewise in p0; difference it coarsely (scaled units)
_P0_STEP = 0.01


def _hessian(target, theta, h=1e-4):
    d = theta.size
    step = h * np.maximum(np.abs(theta), 1.0)
    step[10] = _P0_STEP
    H = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            vals = []
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                t = theta.copy()
                t[i] += si * step[i]
                t[j] += sj * step[j]
                vals.append(target(t))
            H[i, j] = H[j, i] = (vals[0] - vals[1] - vals[2] + vals[3]) / (4 * step[i] * step[j])
    return H


def _block_factors(target, theta, blocks=BLOCKS):
    """Cholesky factors of each block's conditional covariance at ``theta``.

    Uses the inverse of the block of a finite-difference Hessian of the log
    posterior; falls back to a diagonal guess when that is not positive definite.
    """
    H = _hessian(target, theta)
    out = []
    for b in blocks:
        idx = list(b)
        L = None
        Hb = H[np.ix_(idx, idx)]
        if np.all(np.isfinite(Hb)):
            try:
                L = np.linalg.cholesky(np.linalg.inv(-Hb))
            except np.linalg.LinAlgError:
                L = None
        if L is None:
            L = np.diag(np.maximum(0.02 * np.abs(theta[idx]), 1e-3))
        out.append(L)
    return out


def _chain(target, start, factors, n_burn, n_keep, rng, blocks=BLOCKS):
    d = start.size
    theta = start.copy()
    lp = target(theta)
    mult = np.array([2.38 / math.sqrt(len(b)) for b in blocks])
    goal = np.array([0.44 if len(b) == 1 else 0.3 for b in blocks])
    out = np.empty((n_keep, d))
    window = np.zeros(len(blocks))
    accepted = np.zeros(len(blocks))
    for it in range(n_burn + n_keep):
        for k, b in enumerate(blocks):
            prop = theta.copy()
            prop[list(b)] += mult[k] * (factors[k] @ rng.standard_normal(len(b)))
            lp_new = target(prop)
            if np.log(rng.random()) < lp_new - lp:
                theta, lp = prop, lp_new
                window[k] += 1
                if it >= n_burn:
                    accepted[k] += 1
        if it < n_burn and (it + 1) % 50 == 0:
            # nudge each block's scale towards its target acceptance; burn-in only
            mult *= np.exp(np.clip(window / 50.0 - goal, -0.5, 0.5) * 2.0)
            window[:] = 0
        if it >= n_burn:
            out[it - n_burn] = theta
    return out, accepted / max(n_keep, 1)


def fit_capacity_ig(p, C, n_chains: int = 4, n_burn: int = 3000, n_keep: int = 3000,
                    seed: int = 0, rhat_threshold: float = 1.1) -> CapacityPosterior:
    """Fit the IG capacity regression to ``(p, C)`` pairs.

    ``p`` is precipitation (m/day, e.g. 2-week means), ``C`` capacity per
    human. Chains start at the MAP estimate; a :class:`ConvergenceWarning`
    is emitted if any split-R-hat exceeds ``rhat_threshold``.
    """
    p = np.asarray(p, dtype=float)
    C = np.asarray(C, dtype=float)
    if p.shape != C.shape or p.ndim != 1:
        raise ValueError("p and C must be equal-length 1-d arrays")
    if p.size < 100:
        raise ValueError(f"need at least 100 (p, C) pairs, got {p.size}")
    if np.any(p < 0) or np.any(C <= 0) or not np.all(np.isfinite(p)) or not np.all(np.isfinite(C)):
        raise ValueError("need p >= 0 and C > 0, all finite")
    pm = float(p.max())
    cs = float(C.mean())
    x, c = p / pm, C / cs
    xlo = float(x.min())
    q = np.quantile(x, [0.05, 0.95])
    grid = np.linspace(xlo, 1.0, 501)
    target = _Target(x, c, (float(q[0]), float(q[1])), grid)
    theta_map = _map(target, x, c, np.linspace(q[0], q[1], 7)[1:-1])

    factors = _block_factors(target, theta_map)
    spread = np.concatenate([np.abs(np.diag(L)) for L in factors[:5]])
    chains, acc = [], []
    for k in range(n_chains):
        rng = np.random.default_rng([seed, k])
        start = theta_map.copy()
        # jitter starts so the chains are not identical
        for _ in range(100):
            trial = theta_map + spread * rng.standard_normal(theta_map.size)
            if np.isfinite(target(trial)):
                start = trial
                break
        draws, a = _chain(target, start, factors, n_burn, n_keep, rng)
        chains.append(draws)
        acc.append(a)
    chains = np.array(chains)
    orig = np.array([[_to_original(t, pm, cs) for t in ch] for ch in chains])
    rhat = split_rhat(orig)
    converged = bool(np.all(rhat <= rhat_threshold))
    if not converged:
        worst = int(np.argmax(rhat))
        warnings.warn(f"capacity chains not converged: split-R-hat {rhat[worst]:.3f} for "
                      f"{NAMES[worst]} (threshold {rhat_threshold})", ConvergenceWarning,
                      stacklevel=2)
    p_range = (float(p.min()), pm)
    map_model = CapacityModel.from_vector(_to_original(theta_map, pm, cs), p_range)
    return CapacityPosterior(orig.reshape(-1, len(NAMES)), orig, map_model, p_range, rhat,
                             np.mean(acc, axis=0), converged)
