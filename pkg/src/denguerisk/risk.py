"""Single-node outbreak-risk classifier over (R0, adult abundance).

Features are 30-day trailing means of the daily reproduction number and of
adult female abundance per human. Labels mark weeks with rising (1) or
falling (0) case counts. The model is logistic regression on standardized
features trained by full-batch gradient descent.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.special import expit, log_expit

from .errors import ModelInvalidError
from .forcing import centered_moving_average

__all__ = [
    "SCHEMA_VERSION",
    "HIGH_THRESHOLD",
    "LOW_THRESHOLD",
    "RiskModel",
    "LabeledWeek",
    "label_weeks",
    "weekly_features",
    "training_set",
    "loss_and_grad",
    "train",
    "predict",
    "risk_band",
    "save_model",
    "load_model",
    "default_risk_model",
]

SCHEMA_VERSION = 1
HIGH_THRESHOLD = 0.6
LOW_THRESHOLD = 0.4
EXCLUDED = -1
_P_MIN = np.nextafter(0.0, 1.0)
_P_MAX = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class RiskModel:
    w0: float
    w1: float
    w2: float
    means: tuple = (0.0, 0.0)
    scales: tuple = (1.0, 1.0)
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not all(np.isfinite([self.w0, self.w1, self.w2, *self.means, *self.scales])):
            raise ModelInvalidError("risk model weights and normalization must be finite")
        if any(s <= 0 for s in self.scales):
            raise ModelInvalidError("normalization scales must be > 0")

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.w0, self.w1, self.w2])

    def standardize(self, r0_ma, vf_ma):
        x1 = (np.asarray(r0_ma, dtype=float) - self.means[0]) / self.scales[0]
        x2 = (np.asarray(vf_ma, dtype=float) - self.means[1]) / self.scales[1]
        return x1, x2

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION,
                "weights": {"w0": self.w0, "w1": self.w1, "w2": self.w2},
                "normalization": {"means": list(self.means), "scales": list(self.scales)},
                "features": ["r0_ma", "vf_ma"],
                "metadata": self.metadata}

    @classmethod
    def from_dict(cls, d: dict) -> "RiskModel":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ModelInvalidError(f"unsupported risk model schema_version {version!r}")
        try:
            w = d["weights"]
            norm = d["normalization"]
            return cls(float(w["w0"]), float(w["w1"]), float(w["w2"]),
                       tuple(map(float, norm["means"])), tuple(map(float, norm["scales"])),
                       dict(d.get("metadata", {})))
        except (KeyError, TypeError) as exc:
            raise ModelInvalidError(f"malformed risk model: missing {exc}") from None


@dataclass(frozen=True)
class LabeledWeek:
    r0_ma: float
    vf_ma: float
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        if not (self.r0_ma >= 0 and self.vf_ma >= 0):
            raise ValueError("features must be >= 0")


def label_weeks(counts, min_cases: float = 3.0) -> np.ndarray:
    """Rising/falling labels per week from a count series.

    The counts are smoothed by a centered 3-week mean. Week ``w`` is 1 if the
    smoothed value strictly rises from week ``w - 1`` and 0 if it strictly
    falls. Ties, the first week, and weeks whose smoothed count is below
    ``min_cases`` are marked -1 (excluded).
    """
    c = np.asarray(getattr(counts, "counts", counts), dtype=float)
    if c.size < 5:
        raise ValueError(f"need at least 5 weeks of counts, got {c.size}")
    s = centered_moving_average(c, 3)
    labels = np.full(c.size, EXCLUDED, dtype=int)
    d = np.diff(s)
    labels[1:][d > 0] = 1
    labels[1:][d < 0] = 0
    labels[s < min_cases] = EXCLUDED
    return labels


def weekly_features(start_date: dt.date, r0_ma, vf_ma, week_starts) -> np.ndarray:
    """Daily feature values on each week's first day, shape (weeks, 2)."""
    r0_ma = np.asarray(r0_ma, dtype=float)
    vf_ma = np.asarray(vf_ma, dtype=float)
    idx = np.array([(d - start_date).days for d in week_starts])
    if np.any(idx < 0) or np.any(idx >= r0_ma.size):
        raise ValueError("week starts fall outside the daily feature series")
    return np.column_stack([r0_ma[idx], vf_ma[idx]])


def training_set(series, start_date: dt.date, r0_ma, vf_ma,
                 min_cases: float = 3.0) -> list[LabeledWeek]:
    """Labeled weeks for one location (``series`` is a CaseSeries)."""
    labels = label_weeks(series, min_cases)
    feats = weekly_features(start_date, r0_ma, vf_ma, series.week_starts)
    return [LabeledWeek(float(f[0]), float(f[1]), int(l))
            for f, l in zip(feats, labels) if l != EXCLUDED]


def _design(data):
    X = np.array([[w.r0_ma, w.vf_ma] for w in data], dtype=float)
    y = np.array([w.label for w in data], dtype=float)
    return X, y


def loss_and_grad(w, X, y):
    """Mean logistic loss and its gradient for ``w = (w0, w1, w2)`` on features ``X``."""
    w = np.asarray(w, dtype=float)
    z = w[0] + X @ w[1:]
    loss = -np.mean(y * log_expit(z) + (1.0 - y) * log_expit(-z))
    r = expit(z) - y
    grad = np.concatenate([[r.mean()], X.T @ r / y.size])
    return float(loss), grad


def train(data, epochs: int = 2000, learning_rate: float = 0.5, seed: int = 0,
          return_history: bool = False):
    """Fit by gradient descent from zero weights on standardized features.

    Gradient descent from a fixed start is deterministic; ``seed`` is only
    recorded in the metadata.
    """
    data = list(data)
    X, y = _design(data)
    if y.size == 0 or np.all(y == y[0]):
        raise ValueError("training data must contain both labels")
    means = X.mean(axis=0)
    scales = X.std(axis=0)
    scales = np.where(scales > 0, scales, 1.0)
    Z = (X - means) / scales
    w = np.zeros(3)
    history = []
    for _ in range(int(epochs)):
        loss, g = loss_and_grad(w, Z, y)
        history.append(loss)
        w = w - learning_rate * g
    loss, _ = loss_and_grad(w, Z, y)
    history.append(loss)
    acc = float(np.mean((expit(w[0] + Z @ w[1:]) > 0.5) == (y == 1)))
    meta = {"epochs": int(epochs), "learning_rate": learning_rate, "seed": seed,
            "n_weeks": int(y.size), "n_rising": int(y.sum()), "final_loss": loss,
            "train_accuracy": acc}
    model = RiskModel(*map(float, w), tuple(map(float, means)), tuple(map(float, scales)), meta)
    return (model, np.array(history)) if return_history else model


def predict(model: RiskModel, r0_ma, vf_ma):
    """Outbreak probability ``sigmoid(w0 + w1 x1 + w2 x2)`` on standardized features."""
    x1, x2 = model.standardize(r0_ma, vf_ma)
    p = expit(model.w0 + model.w1 * x1 + model.w2 * x2)
    # keep the open interval when the logit saturates in double precision
    p = np.clip(p, _P_MIN, _P_MAX)
    return float(p) if np.ndim(p) == 0 else p


def risk_band(p):
    """'high' above 0.6, 'low' below 0.4, else 'indeterminate' (both bounds included)."""
    p = np.asarray(p, dtype=float)
    out = np.where(p > HIGH_THRESHOLD, "high", np.where(p < LOW_THRESHOLD, "low", "indeterminate"))
    return str(out) if out.ndim == 0 else out


def save_model(model: RiskModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


def load_model(path) -> RiskModel:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelInvalidError(f"{path}: {exc}") from None
    return RiskModel.from_dict(data)


def default_risk_model() -> RiskModel:
    """Model trained on synthetic outbreaks by ``demos/train_default_risk_model.py``."""
    text = resources.files("denguerisk").joinpath("data/default_risk_model.json").read_text()
    return RiskModel.from_dict(json.loads(text))
