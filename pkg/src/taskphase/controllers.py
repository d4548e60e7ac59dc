"""Per-phase controllers for the drawer and ball-grasping tasks.

Controllers are memoryless maps from an :class:`Observation` to a
:class:`Command`. Velocities are world-frame ``(x, z)``; force setpoints are
end-effector-frame targets (``"fx"``, ``"fz"`` in N) that the world regulates
with a proportional force law.

Visual servoing is approximated by proportional pose servoing toward
configured anchor poses (the pre-recorded views).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

import numpy as np


class Grip(str, Enum):
    DEFLATED = "deflated"
    HALF = "half"
    FULL = "full"


class ControllerId(str, Enum):
    SERVO_TO_PREGRASP = "servo_to_pregrasp"
    ADVANCE_STRAIGHT = "advance_straight"
    SLIDE_DOWN_WITH_PUSH = "slide_down_with_push"
    GRASP_AND_PULL = "grasp_and_pull"
    UNGRASP_AND_RETRACT = "ungrasp_and_retract"
    SERVO_VIEW_1 = "servo_view_1"
    SERVO_VIEW_2 = "servo_view_2"
    SERVO_VIEW_3 = "servo_view_3"
    SERVO_TO_TOPDOWN = "servo_to_topdown"
    DESCEND_TO_BALL = "descend_to_ball"
    SWEEP_TO_FRONTPLATE = "sweep_to_frontplate"
    LIFT_OUT = "lift_out"


# controllers that shape the wrench on purpose (interactive perception)
FORCE_SERVO_CONTROLLERS = frozenset({
    ControllerId.SLIDE_DOWN_WITH_PUSH,
    ControllerId.GRASP_AND_PULL,
    ControllerId.SWEEP_TO_FRONTPLATE,
    ControllerId.LIFT_OUT,
})

_SERVO_ANCHORS = {
    ControllerId.SERVO_TO_PREGRASP: "pregrasp",
    ControllerId.SERVO_VIEW_1: "view_1",
    ControllerId.SERVO_VIEW_2: "view_2",
    ControllerId.SERVO_VIEW_3: "view_3",
    ControllerId.SERVO_TO_TOPDOWN: "topdown",
}


@dataclass(frozen=True)
class Command:
    ee_vel: np.ndarray
    force_setpoint: Mapping[str, float] = field(default_factory=dict)
    grip: Grip = Grip.DEFLATED
    degraded: bool = False


@dataclass(frozen=True)
class Observation:
    ee_pos: np.ndarray
    ball_offset: Optional[np.ndarray] = None
    ft: np.ndarray = field(default_factory=lambda: np.zeros(6))


@dataclass(frozen=True)
class ControllerParams:
    v_max: float = 0.1
    servo_gain: float = 2.0
    lateral_gain: float = 2.0
    contact_force: float = 5.0
    slide_speed: float = 0.03
    pull_speed: float = 0.1
    descend_speed: float = 0.05
    sweep_speed: float = 0.05
    lift_speed: float = 0.08
    advance_dir: tuple[float, float] = (1.0, 0.0)
    pull_dir: tuple[float, float] = (-1.0, 0.0)
    retract_dir: tuple[float, float] = (-1.0, 0.5)
    sweep_dir: tuple[float, float] = (-1.0, 0.0)


def clamp_speed(v, v_max: float) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = float(np.hypot(v[0], v[1]))
    return v * (v_max / n) if n > v_max else v


def _unit(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    return d / np.hypot(d[0], d[1])


def _hold(grip: Grip = Grip.DEFLATED) -> Command:
    return Command(np.zeros(2), {}, grip, degraded=True)


def run_controller(cid: ControllerId, obs: Observation, anchors: Mapping[str, np.ndarray],
                   params: ControllerParams = ControllerParams(), force_servo: bool = True) -> Command:
    """Command for controller ``cid``.

    ``force_servo=False`` strips force setpoints (used to ablate interactive
    perception). A missing anchor or ball detection yields a zero-velocity
    command flagged ``degraded``.
    """
    cid = ControllerId(cid)
    p = params
    f = p.contact_force
    vel: np.ndarray
    setpoint: dict[str, float] = {}
    grip = Grip.DEFLATED

    if cid in _SERVO_ANCHORS:
        anchor = anchors.get(_SERVO_ANCHORS[cid])
        if anchor is None:
            return _hold()
        vel = p.servo_gain * (np.asarray(anchor, dtype=float) - obs.ee_pos)
    elif cid == ControllerId.ADVANCE_STRAIGHT:
        vel = p.v_max * _unit(p.advance_dir)
    elif cid == ControllerId.SLIDE_DOWN_WITH_PUSH:
        vel = np.array([0.0, -p.slide_speed])
        setpoint = {"fz": -f}
    elif cid == ControllerId.GRASP_AND_PULL:
        grip = Grip.FULL
        vel = p.pull_speed * _unit(p.pull_dir)
        setpoint = {"fx": -f}
    elif cid == ControllerId.UNGRASP_AND_RETRACT:
        vel = p.v_max * _unit(p.retract_dir)
    elif cid == ControllerId.DESCEND_TO_BALL:
        if obs.ball_offset is None:
            return _hold()
        vel = np.array([p.lateral_gain * obs.ball_offset[0], -p.descend_speed])
    elif cid == ControllerId.SWEEP_TO_FRONTPLATE:
        grip = Grip.HALF
        vel = p.sweep_speed * _unit(p.sweep_dir)
        setpoint = {"fz": -f}
    elif cid == ControllerId.LIFT_OUT:
        grip = Grip.FULL
        vel = np.array([0.0, p.lift_speed])
        setpoint = {"fx": -f}
    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(cid)

    if not force_servo:
        setpoint = {}
    return Command(clamp_speed(vel, p.v_max), setpoint, grip)
