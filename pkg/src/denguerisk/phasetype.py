r"""Phase-type distributions used as sojourn laws over accumulated development.

A phase-type law is the absorption time of a continuous-time Markov chain with
``m`` transient states, initial row vector ``alpha`` and subgenerator ``Q``:

.. math:: S(x) = \alpha e^{x Q} \mathbf{1}, \qquad f(x) = \alpha e^{x Q} q, \quad q = -Q\mathbf{1}.

Only the exponential and Erlang families are constructed directly. Erlang
survival uses the Poisson-series closed form; any other chain is evaluated by
uniformization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import gammaln

__all__ = [
    "PhaseTypeDist",
    "erlang",
    "exponential",
    "survival",
    "cdf",
    "density",
    "mean",
    "kron_combine",
    "chain_survival",
    "DEFAULT_MAX_STATES",
]

DEFAULT_MAX_STATES = 65536
UNIFORMIZATION_TOL = 1e-12
# exp(-x) underflows to 0 past this point; switch Erlang terms to log space.
_LOG_SPACE_THRESHOLD = 700.0


@dataclass(frozen=True, eq=False)
class PhaseTypeDist:
    """Validated ``(alpha, Q)`` pair.

    ``erlang_shape`` is set by :func:`erlang` so that evaluation can take the
    closed-form path; leave it ``None`` for a general chain.
    """

    alpha: np.ndarray
    Q: np.ndarray
    erlang_shape: int | None = field(default=None)

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        m = alpha.shape[0]
        if alpha.ndim != 1 or Q.shape != (m, m):
            raise ValueError(f"alpha has {m} states but Q has shape {Q.shape}")
        if np.any(alpha < 0) or abs(alpha.sum() - 1.0) > 1e-12:
            raise ValueError("alpha must be a probability vector")
        off = Q - np.diag(np.diag(Q))
        if np.any(off < 0):
            raise ValueError("off-diagonal entries of Q must be >= 0")
        if np.any(np.diag(Q) >= 0):
            raise ValueError("diagonal entries of Q must be < 0")
        exit_rates = -Q.sum(axis=1)
        if np.any(exit_rates < -1e-12 * np.abs(np.diag(Q))):
            raise ValueError("row sums of Q must be <= 0")
        if not np.any(exit_rates > 0):
            raise ValueError("Q has no exit to the absorbing state")
        alpha.setflags(write=False)
        Q.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "Q", Q)

    @property
    def m(self) -> int:
        return self.alpha.shape[0]

    @property
    def exit_vector(self) -> np.ndarray:
        return np.clip(-self.Q.sum(axis=1), 0.0, None)

    @property
    def generator(self) -> np.ndarray:
        """Full generator including the absorbing state as the last row/column."""
        m = self.m
        G = np.zeros((m + 1, m + 1))
        G[:m, :m] = self.Q
        G[:m, m] = self.exit_vector
        return G

    def __repr__(self):
        tag = f"erlang({self.erlang_shape})" if self.erlang_shape else f"m={self.m}"
        return f"PhaseTypeDist({tag})"


def erlang(J: int) -> PhaseTypeDist:
    """Erlang law with shape ``J`` and mean one (bidiagonal ``-J``/``+J`` chain)."""
    if int(J) != J or J < 1:
        raise ValueError(f"Erlang shape must be a positive integer, got {J!r}")
    J = int(J)
    alpha = np.zeros(J)
    alpha[0] = 1.0
    Q = -J * np.eye(J) + J * np.eye(J, k=1)
    return PhaseTypeDist(alpha, Q, erlang_shape=J)


def exponential(rate: float = 1.0) -> PhaseTypeDist:
    if not rate > 0:
        raise ValueError("rate must be positive")
    d = PhaseTypeDist(np.ones(1), np.array([[-float(rate)]]),
                      erlang_shape=1 if rate == 1.0 else None)
    return d


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError("development must be nonnegative")
    return x


def _poisson_terms(J: int, x: np.ndarray) -> np.ndarray:
    """Poisson(Jx) pmf at k = 0..J-1, stacked on the last axis."""
    lam = J * x
    out = np.empty(x.shape + (J,))
    small = lam <= _LOG_SPACE_THRESHOLD
    if np.any(small):
        t = np.exp(-lam[small])
        ls = lam[small]
        out[small, 0] = t
        for k in range(1, J):
            t = t * ls / k
            out[small, k] = t
    big = ~small
    if np.any(big):
        lb = lam[big][..., None]
        k = np.arange(J)
        out[big] = np.exp(k * np.log(lb) - lb - gammaln(k + 1))
    return out


def _erlang_survival(J: int, x: np.ndarray) -> np.ndarray:
    return np.minimum(_poisson_terms(J, x).sum(axis=-1), 1.0)


def _erlang_density(J: int, x: np.ndarray) -> np.ndarray:
    lam = J * x
    if J == 1:
        return np.exp(-lam)
    with np.errstate(divide="ignore"):
        logf = np.log(J) + (J - 1) * np.log(lam) - lam - gammaln(J)
    return np.exp(logf)


def chain_survival(alpha, Q, x, tol: float = UNIFORMIZATION_TOL) -> np.ndarray:
    r"""``alpha exp(xQ) 1`` by uniformization, for any (sub)generator ``Q``.

    The Poisson mixture is truncated once the neglected tail mass drops
    below ``tol``. ``Q`` may be the zero matrix (frozen clock).
    """
    alpha = np.asarray(alpha, dtype=float)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    x = _check_x(x)
    rate = float(np.max(-np.diag(Q))) if Q.size else 0.0
    flat = np.ravel(x)
    out = np.empty(flat.shape)
    if rate <= 0.0:
        out[:] = alpha.sum()
        return out.reshape(x.shape)
    P = np.eye(Q.shape[0]) + Q / rate
    ones = np.ones(Q.shape[0])
    for i, xi in enumerate(flat):
        lam = rate * xi
        n_max = int(stats.poisson.isf(tol, lam)) + 1 if lam > 0 else 0
        weights = stats.poisson.pmf(np.arange(n_max + 1), lam)
        v = alpha.copy()
        acc = 0.0
        for n in range(n_max + 1):
            acc += weights[n] * (v @ ones)
            v = v @ P
        out[i] = acc
    return np.clip(out, 0.0, 1.0).reshape(x.shape)


def survival(d: PhaseTypeDist, x) -> np.ndarray | float:
    """Probability that absorption has not happened by development ``x``."""
    x = _check_x(x)
    if d.erlang_shape is not None:
        s = _erlang_survival(d.erlang_shape, x)
    else:
        s = chain_survival(d.alpha, d.Q, x)
    return float(s) if s.ndim == 0 else s


def cdf(d: PhaseTypeDist, x):
    return 1.0 - survival(d, x)


def density(d: PhaseTypeDist, x):
    """Absorption density ``alpha exp(xQ) q``."""
    x = _check_x(x)
    if d.erlang_shape is not None:
        f = _erlang_density(d.erlang_shape, x)
    else:
        from scipy.linalg import expm

        q = d.exit_vector
        flat = np.ravel(x)
        f = np.array([d.alpha @ expm(xi * d.Q) @ q for xi in flat]).reshape(x.shape)
    return float(f) if np.ndim(f) == 0 else f


def mean(d: PhaseTypeDist) -> float:
    """``-alpha Q^{-1} 1``."""
    return float(-d.alpha @ np.linalg.solve(d.Q, np.ones(d.m)))


def kron_combine(g1: float, d1: PhaseTypeDist, g2: float, d2: PhaseTypeDist,
                 max_states: int = DEFAULT_MAX_STATES):
    """Joint chain of two clocks running at rates ``g1`` and ``g2``.

    Returns ``(alpha1 ⊗ alpha2, g1 Q1 ⊗ I2 + g2 I1 ⊗ Q2)``. The joint chain
    survives while neither clock has been absorbed, so its survival at time
    ``t`` is ``survival(d1, g1 t) * survival(d2, g2 t)``.
    """
    if g1 < 0 or g2 < 0:
        raise ValueError("clock rates must be nonnegative")
    m1, m2 = d1.m, d2.m
    if m1 * m2 > max_states:
        raise ValueError(f"combined chain has {m1 * m2} states, above the cap {max_states}")
    alpha = np.kron(d1.alpha, d2.alpha)
    G = g1 * np.kron(d1.Q, np.eye(m2)) + g2 * np.kron(np.eye(m1), d2.Q)
    return alpha, G
