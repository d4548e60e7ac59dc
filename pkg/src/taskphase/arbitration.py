"""Executives that pick the active controller each tick.

* :class:`ReactiveExecutive` filters a belief over all phases and runs the
  controller of the MAP phase, so any phase can follow any other.
* :class:`LinearExecutive` is the sequential hybrid-automaton baseline: it
  walks the phase list in order and only ever moves to the next node, when
  that node's FT x vision likelihood product beats the current node's.

Executives are immutable values; ``*_step`` returns a new one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import filter as hmm
from .controllers import ControllerId


def _check_bijection(controllers: Sequence[ControllerId]) -> tuple[ControllerId, ...]:
    controllers = tuple(ControllerId(c) for c in controllers)
    if len(set(controllers)) != len(controllers):
        raise hmm.InvalidArgumentError("phase -> controller map must be a bijection")
    return controllers


@dataclass(frozen=True)
class ReactiveExecutive:
    belief: np.ndarray
    transition: np.ndarray
    controllers: tuple[ControllerId, ...]

    @classmethod
    def create(cls, controllers: Sequence[ControllerId], self_prob: float = 0.95,
               belief=None) -> "ReactiveExecutive":
        controllers = _check_bijection(controllers)
        k = len(controllers)
        b = hmm.uniform_belief(k) if belief is None else np.asarray(belief, dtype=float)
        return cls(b, hmm.make_transition_matrix(k, self_prob), controllers)

    @property
    def phase(self) -> int:
        return hmm.map_state(self.belief)

    @property
    def controller(self) -> ControllerId:
        return self.controllers[self.phase]


def reactive_step(ex: ReactiveExecutive, ft_l, vis_l) -> tuple[ReactiveExecutive, ControllerId]:
    b = hmm.fuse_step(ex.belief, ex.transition, [ft_l, vis_l])
    ex = replace(ex, belief=b)
    return ex, ex.controller


@dataclass(frozen=True)
class LinearExecutive:
    node: int
    controllers: tuple[ControllerId, ...]

    @classmethod
    def create(cls, controllers: Sequence[ControllerId]) -> "LinearExecutive":
        return cls(0, _check_bijection(controllers))

    @property
    def phase(self) -> int:
        return self.node

    @property
    def controller(self) -> ControllerId:
        return self.controllers[self.node]


def linear_step(ex: LinearExecutive, ft_l, vis_l) -> tuple[LinearExecutive, ControllerId]:
    ft_l = np.maximum(np.asarray(ft_l, dtype=float), hmm.LIKELIHOOD_FLOOR)
    vis_l = np.maximum(np.asarray(vis_l, dtype=float), hmm.LIKELIHOOD_FLOOR)
    k = len(ex.controllers)
    if ft_l.shape != (k,) or vis_l.shape != (k,):
        raise hmm.InvalidArgumentError("likelihood vectors must have one entry per phase")
    # compare log h = log ft + log vis: same ordering as the raw product, no overflow
    h = np.log(ft_l) + np.log(vis_l)
    node = ex.node
    if node + 1 < k and h[node + 1] > h[node]:
        node += 1
    ex = replace(ex, node=node)
    return ex, ex.controller


def make_executive(kind: str, controllers: Sequence[ControllerId], self_prob: float = 0.95):
    if kind == "reactive":
        return ReactiveExecutive.create(controllers, self_prob)
    if kind == "linear":
        return LinearExecutive.create(controllers)
    raise hmm.InvalidArgumentError(f"unknown executive {kind!r}; expected 'reactive' or 'linear'")


def executive_step(ex, ft_l, vis_l):
    if isinstance(ex, ReactiveExecutive):
        return reactive_step(ex, ft_l, vis_l)
    return linear_step(ex, ft_l, vis_l)
