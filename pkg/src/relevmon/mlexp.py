"""Classifier-quality harness: a two-Gaussian stream under drift and a frozen logistic model.

Class 1 features are Normal(-d, 1) and class 2 features Normal(+d, 1) with
d = Phi^{-1}(1 - p), so the optimal boundary at 0 has accuracy 1 - p.
"""
import enum
import math
from dataclasses import asdict, dataclass
from typing import Optional, Protocol, Tuple

import numpy as np

from .errors import NonConvergence
from .quantiles import normal_quantile
from .smoothing import QualitySeries


class RegimeKind(str, enum.Enum):
    STABLE = "stable"
    CONCEPT_DRIFT = "concept-drift"
    DATA_DRIFT = "data-drift"


@dataclass(frozen=True)
class DriftRegime:
    kind: RegimeKind = RegimeKind.STABLE
    p0: float = 0.05
    p1: float = 0.10
    share0: float = 0.5
    share1: float = 0.9
    epochs: int = 2000
    epoch_size: int = 100
    initial_train: int = 1000
    flat: int = 400
    ramp: int = 800

    def __post_init__(self):
        object.__setattr__(self, "kind", RegimeKind(self.kind))
        if not (0 < self.p0 < 0.5 and 0 < self.p1 < 0.5):
            raise ValueError("p must lie in (0, 0.5)")
        if self.epochs < 1 or self.epoch_size < 1 or self.initial_train < 2:
            raise ValueError("epochs, epoch_size and initial_train must be positive")
        if self.flat < 0 or self.ramp < 0:
            raise ValueError("schedule lengths must be non-negative")

    def progress(self, epoch: int) -> float:
        """Position on the ramp: 0 before it, 1 after it, linear in between."""
        if self.ramp == 0:
            return 0.0 if epoch <= self.flat else 1.0
        return min(max((epoch - self.flat) / self.ramp, 0.0), 1.0)

    def p(self, epoch: int) -> float:
        if self.kind is RegimeKind.DATA_DRIFT:
            return self.p0 + (self.p1 - self.p0) * self.progress(epoch)
        return self.p0

    def class1_share(self, epoch: int) -> float:
        if self.kind is RegimeKind.CONCEPT_DRIFT:
            return self.share0 + (self.share1 - self.share0) * self.progress(epoch)
        return self.share0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


def class_offset(p: float) -> float:
    if not 0.0 < p < 0.5:
        raise ValueError(f"p must lie in (0, 0.5), got {p}")
    return normal_quantile(1.0 - p)


def _draw(rng: np.random.Generator, size: int, p: float, share: float):
    labels = np.where(rng.random(size) < share, 1, 2)
    d = class_offset(p)
    features = rng.standard_normal(size) + np.where(labels == 1, -d, d)
    return features, labels


def generate_epoch(regime: DriftRegime, epoch: int, size: Optional[int] = None, seed=0):
    """Labelled samples for one epoch (1-based); labels are 1 or 2."""
    if not 1 <= epoch <= regime.epochs:
        raise ValueError(f"epoch {epoch} outside [1, {regime.epochs}]")
    rng = np.random.default_rng(seed)
    return _draw(rng, size or regime.epoch_size, regime.p(epoch), regime.class1_share(epoch))


@dataclass(frozen=True)
class LogRegConfig:
    lr: float = 1.0
    iterations: int = 10000
    tolerance: float = 1e-8


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True)
class ClassifierModel:
    w: float
    b: float

    def predict_proba(self, features) -> np.ndarray:
        """Probability of class 2."""
        return _sigmoid(self.w * np.asarray(features, dtype=float) + self.b)

    def update(self, features, labels) -> None:
        pass


class ClassifierAdapter(Protocol):
    """Anything that scores features; ``update`` is called after each epoch is measured."""

    def predict_proba(self, features) -> np.ndarray: ...

    def update(self, features, labels) -> None: ...


def train_logreg(features, labels, config: LogRegConfig = LogRegConfig()) -> ClassifierModel:
    """Maximise the mean logistic log-likelihood by plain gradient ascent."""
    x = np.asarray(features, dtype=float)
    lab = np.asarray(labels)
    if x.shape != lab.shape or x.size == 0:
        raise ValueError("features and labels must be non-empty and aligned")
    if not (np.any(lab == 1) and np.any(lab == 2)):
        raise ValueError("both classes must be present")
    y = (lab == 2).astype(float)
    w = b = 0.0
    gnorm = math.inf
    for _ in range(config.iterations):
        r = y - _sigmoid(w * x + b)
        gw, gb = float(np.mean(r * x)), float(np.mean(r))
        gnorm = math.hypot(gw, gb)
        if gnorm < config.tolerance:
            break
        w += config.lr * gw
        b += config.lr * gb
    if gnorm > 100 * config.tolerance:
        raise NonConvergence(f"gradient norm {gnorm:.3g} after {config.iterations} iterations")
    return ClassifierModel(w, b)


def epoch_metrics(model: ClassifierAdapter, features, labels) -> Tuple[float, float]:
    """(accuracy, mean maximal class probability)."""
    lab = np.asarray(labels)
    if lab.size == 0:
        raise ValueError("empty epoch")
    prob = np.asarray(model.predict_proba(features), dtype=float)
    pred = np.where(prob >= 0.5, 2, 1)
    return float(np.mean(pred == lab)), float(np.mean(np.maximum(prob, 1.0 - prob)))


def initial_training_set(regime: DriftRegime, seed):
    rng = np.random.default_rng([*np.atleast_1d(seed).tolist(), 0])
    return _draw(rng, regime.initial_train, regime.p(1), regime.class1_share(1))


def run_history(regime: DriftRegime, seed, n: int = 100, model: Optional[ClassifierAdapter] = None,
                config: LogRegConfig = LogRegConfig()):
    """Train (unless ``model`` is given), then measure every epoch.

    Returns (accuracy series, confidence series) with ``n`` epochs per time unit.
    """
    if regime.epochs % n:
        raise ValueError(f"epochs={regime.epochs} is not a multiple of n={n}")
    seed_list = np.atleast_1d(seed).tolist()
    if model is None:
        model = train_logreg(*initial_training_set(regime, seed), config)
    acc = np.empty(regime.epochs)
    conf = np.empty(regime.epochs)
    for e in range(1, regime.epochs + 1):
        feats, labs = generate_epoch(regime, e, seed=[*seed_list, e])
        acc[e - 1], conf[e - 1] = epoch_metrics(model, feats, labs)
        model.update(feats, labs)
    T = regime.epochs // n
    return QualitySeries(acc, n, T), QualitySeries(conf, n, T)
