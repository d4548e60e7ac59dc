"""Per-phase observation models producing likelihood vectors.

Two modalities feed the phase filter:

* force-torque: a generative diagonal Gaussian per phase over the 6-D wrench
  ``(Fx, Fy, Fz, Tx, Ty, Tz)`` in the end-effector frame;
* vision: a discriminative view classifier. The real image classifier is
  replaced by sampling a predicted view class from a confusion matrix row of
  the true (geometric) view class.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .filter import LIKELIHOOD_FLOOR, InvalidArgumentError

WRENCH_LABELS = ("fx", "fy", "fz", "tx", "ty", "tz")
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GaussianFTModel:
    mean: tuple[float, ...]
    variances: tuple[float, ...]

    def __post_init__(self):
        mean = tuple(float(v) for v in self.mean)
        var = tuple(float(v) for v in self.variances)
        if len(mean) != 6 or len(var) != 6:
            raise InvalidArgumentError("FT model needs 6 means and 6 variances")
        if not all(np.isfinite(mean)):
            raise InvalidArgumentError("FT model mean must be finite")
        if not all(np.isfinite(v) and v > 0 for v in var):
            raise InvalidArgumentError(f"FT model variances must be positive, got {var}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variances", var)


def _check_sample(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (6,):
        raise InvalidArgumentError(f"FT sample must be a 6-vector, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InvalidArgumentError("FT sample contains non-finite entries")
    return z


def ft_log_likelihood(model: GaussianFTModel, z) -> float:
    z = _check_sample(z)
    mean = np.asarray(model.mean)
    var = np.asarray(model.variances)
    return float(-0.5 * np.sum(_LOG_2PI + np.log(var) + (z - mean) ** 2 / var))


def ft_likelihood(model: GaussianFTModel, z) -> float:
    """Diagonal normal density at ``z``, floored so it stays strictly positive."""
    return max(float(np.exp(ft_log_likelihood(model, z))), LIKELIHOOD_FLOOR)


@lru_cache(maxsize=64)
def _stacked(models: tuple[GaussianFTModel, ...]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = np.array([m.mean for m in models])
    var = np.array([m.variances for m in models])
    return mean, var, -0.5 * np.sum(_LOG_2PI + np.log(var), axis=1)


def ft_likelihood_vector(models: Sequence[GaussianFTModel], z, relative: bool = False) -> np.ndarray:
    """Per-phase FT likelihoods.

    With ``relative=True`` the densities are divided by the largest one before
    exponentiation. That is a positive rescaling (the Bayes update and any
    ratio between entries are unchanged) but it keeps the best phase at 1.0
    when every raw density would underflow, as happens for saturated contact
    forces far from all model means.
    """
    z = _check_sample(z)
    mean, var, norm = _stacked(tuple(models))
    logs = norm - 0.5 * np.sum((z - mean) ** 2 / var, axis=1)
    if relative:
        logs = logs - logs.max()
    return np.maximum(np.exp(logs), LIKELIHOOD_FLOOR)


@dataclass(frozen=True)
class ViewClassSpec:
    """Which view class each phase would be trained on."""

    classes: tuple[str, ...]
    phase_classes: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "phase_classes", tuple(self.phase_classes))
        if len(set(self.classes)) != len(self.classes):
            raise InvalidArgumentError("view classes must be unique")
        unknown = set(self.phase_classes) - set(self.classes)
        if unknown:
            raise InvalidArgumentError(f"phases reference unknown view classes {sorted(unknown)}")
        if len(self.classes) > len(self.phase_classes):
            raise InvalidArgumentError("more view classes than phases")

    def phases_of(self, view_class: str) -> list[int]:
        return [i for i, c in enumerate(self.phase_classes) if c == view_class]


@dataclass(frozen=True)
class SimViewClassifier:
    confusion: np.ndarray
    floor: float = 1e-4

    def __post_init__(self):
        conf = np.array(self.confusion, dtype=float)
        if conf.ndim != 2 or conf.shape[0] != conf.shape[1]:
            raise InvalidArgumentError("confusion matrix must be square")
        if np.any(conf < 0) or np.any(np.abs(conf.sum(axis=1) - 1.0) > 1e-9):
            raise InvalidArgumentError("confusion rows must be probability vectors")
        if not self.floor > 0 or (conf.shape[0] - 1) * self.floor >= 1.0:
            raise InvalidArgumentError(f"floor must be positive and small, got {self.floor}")
        conf.setflags(write=False)
        object.__setattr__(self, "confusion", conf)

    @classmethod
    def with_accuracy(cls, n_classes: int, accuracy: float = 0.9, floor: float = 1e-4):
        """Correct with probability ``accuracy``; errors spread uniformly."""
        if n_classes < 2:
            conf = np.ones((1, 1))
        else:
            conf = np.full((n_classes, n_classes), (1.0 - accuracy) / (n_classes - 1))
            np.fill_diagonal(conf, accuracy)
        return cls(conf, floor)


def view_scores(predicted_class: str, classifier: SimViewClassifier, spec: ViewClassSpec) -> np.ndarray:
    """Deterministic score vector for a given predicted class."""
    n_classes = len(spec.classes)
    members = spec.phases_of(predicted_class)
    scores = np.full(len(spec.phase_classes), classifier.floor)
    if members:
        scores[members] = (1.0 - (n_classes - 1) * classifier.floor) / len(members)
    return scores


def predict_view_class(true_class: str, classifier: SimViewClassifier, spec: ViewClassSpec,
                       rng: np.random.Generator) -> str:
    row = classifier.confusion[spec.classes.index(true_class)]
    return spec.classes[int(rng.choice(len(row), p=row))]


def classify_view(true_class: str, classifier: SimViewClassifier, spec: ViewClassSpec,
                  rng: np.random.Generator) -> np.ndarray:
    """Simulated vision likelihood for the current view.

    ``true_class`` comes from the world's geometric region test
    (:func:`taskphase.world.true_view_class`).
    """
    if classifier.confusion.shape[0] != len(spec.classes):
        raise InvalidArgumentError("confusion matrix size does not match the number of view classes")
    return view_scores(predict_view_class(true_class, classifier, spec, rng), classifier, spec)
