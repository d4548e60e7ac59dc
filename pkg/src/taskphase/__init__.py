"""Task-phase estimation and reactive controller arbitration."""

from .filter import (InvalidArgumentError, NumericDegeneracyError, fuse_step, make_transition_matrix,
                     map_state, predict, uniform_belief, update)

__all__ = [
    "InvalidArgumentError",
    "NumericDegeneracyError",
    "fuse_step",
    "make_transition_matrix",
    "map_state",
    "predict",
    "uniform_belief",
    "update",
]

__version__ = "0.1.0"
