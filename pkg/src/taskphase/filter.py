"""Discrete-state HMM forward filtering over task phases.

Beliefs, transition matrices and likelihood vectors are plain 1-D / 2-D
numpy float arrays. Every function is pure: inputs are never modified.

Transition convention: ``a[i, j] = p(next = j | current = i)``, so rows sum
to one and the prediction is ``a.T @ b``.
"""

from __future__ import annotations

from decimal import Decimal
from typing import Sequence

import numpy as np

LIKELIHOOD_FLOOR = 1e-300
_SUM_TOL = 1e-9


class InvalidArgumentError(ValueError):
    """Raised for malformed shapes, out-of-range parameters or invalid beliefs."""


class NumericDegeneracyError(ArithmeticError):
    """Raised when an update cannot produce a normalizable belief."""


def _as_belief(b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or b.shape[0] < 2:
        raise InvalidArgumentError(f"belief must be a vector with K >= 2 entries, got shape {b.shape}")
    if not np.all(np.isfinite(b)) or np.any(b < 0):
        raise InvalidArgumentError("belief entries must be finite and non-negative")
    if abs(b.sum() - 1.0) > _SUM_TOL:
        raise InvalidArgumentError(f"belief must sum to 1, sums to {b.sum()!r}")
    return b


def _as_transition(a, k: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (k, k):
        raise InvalidArgumentError(f"transition matrix shape {a.shape} does not match K={k}")
    return a


def uniform_belief(k: int) -> np.ndarray:
    if k < 2:
        raise InvalidArgumentError(f"need at least 2 phases, got {k}")
    return np.full(k, 1.0 / k)


def make_transition_matrix(k: int, self_prob: float) -> np.ndarray:
    """Self-transition ``self_prob`` on the diagonal, the rest spread evenly.

    >>> make_transition_matrix(5, 0.95)[0]
    array([0.95  , 0.0125, 0.0125, 0.0125, 0.0125])
    """
    if int(k) != k or k < 2:
        raise InvalidArgumentError(f"k must be an integer >= 2, got {k!r}")
    if not 0.0 < self_prob < 1.0:
        raise InvalidArgumentError(f"self_prob must lie in (0, 1), got {self_prob!r}")
    k = int(k)
    # decimal arithmetic on the shortest repr, so 0.95 gives off-diagonals of
    # exactly 0.0125 instead of the binary 1 - 0.95 = 0.05000000000000004
    off = float((1 - Decimal(repr(float(self_prob)))) / (k - 1))
    a = np.full((k, k), off)
    np.fill_diagonal(a, self_prob)
    return a


def is_row_stochastic(a, tol: float = 1e-9) -> bool:
    a = np.asarray(a, dtype=float)
    return bool(
        a.ndim == 2
        and a.shape[0] == a.shape[1]
        and np.all(a >= 0)
        and np.all(np.abs(a.sum(axis=1) - 1.0) <= tol)
    )


def _normalize(x: np.ndarray) -> np.ndarray:
    total = x.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise NumericDegeneracyError(f"cannot normalize vector with total {total!r}")
    return x / total


def predict(b, a) -> np.ndarray:
    b = _as_belief(b)
    a = _as_transition(a, b.shape[0])
    return _normalize(a.T @ b)


def update(b, likelihood) -> np.ndarray:
    """Bayes update: ``out[i] ∝ likelihood[i] * b[i]``.

    Likelihood entries are clamped to :data:`LIKELIHOOD_FLOOR` first, so
    underflowed entries never annihilate the belief. All-zero or non-finite
    input is still rejected.
    """
    b = _as_belief(b)
    lik = np.asarray(likelihood, dtype=float)
    if lik.shape != b.shape:
        raise InvalidArgumentError(f"likelihood shape {lik.shape} does not match belief {b.shape}")
    if not np.all(np.isfinite(lik)):
        raise NumericDegeneracyError("likelihood contains non-finite entries")
    if np.any(lik < 0):
        raise InvalidArgumentError("likelihood entries must be non-negative")
    if not np.any(lik > 0):
        raise NumericDegeneracyError("likelihood is identically zero")
    return _normalize(np.maximum(lik, LIKELIHOOD_FLOOR) * b)


def fuse_step(b, a, modality_likelihoods: Sequence) -> np.ndarray:
    """One filter tick: predict once, then update once per modality in order."""
    if len(modality_likelihoods) == 0:
        raise InvalidArgumentError("fuse_step needs at least one modality")
    out = predict(b, a)
    for lik in modality_likelihoods:
        out = update(out, lik)
    return out


def map_state(b) -> int:
    """Index of the most probable phase; ties go to the lowest index."""
    b = _as_belief(b)
    return int(np.argmax(b))
