"""Inverse-Gaussian fit of per-location bites-per-cycle estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .capacity import ig_logpdf

__all__ = ["IGFit", "fit_bites_ig", "LAMBDA_CAP"]

# shape returned when the sample has no spread (the MLE is infinite)
LAMBDA_CAP = 1e12


@dataclass(frozen=True)
class IGFit:
    mu: float
    lam: float
    n: int
    capped: bool
    loglik: float

    def logpdf(self, x):
        return ig_logpdf(x, self.mu, self.lam)


def fit_bites_ig(values) -> IGFit:
    """Maximum-likelihood IG(mu, lam).

    ``mu`` is the sample mean and ``1/lam`` the mean of ``1/x - 1/mu``. A
    sample without spread has an infinite MLE; ``lam`` is then capped at
    :data:`LAMBDA_CAP` and ``capped`` is set.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("need at least one value")
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("bite estimates must be finite and > 0")
    mu = float(x.mean())
    inv = float(np.mean(1.0 / x - 1.0 / mu))
    capped = not inv > 1.0 / LAMBDA_CAP
    lam = LAMBDA_CAP if capped else 1.0 / inv
    return IGFit(mu, lam, int(x.size), capped, float(np.sum(ig_logpdf(x, mu, lam))))
