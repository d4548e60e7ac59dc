"""Planar (x, z) manipulation world: drawer opening and ball removal.

``x`` is horizontal (positive toward the drawer / cabinet back), ``z`` is
vertical. The end-effector (EE) is a point driven by an impedance reference:
commands move the reference, the EE follows it at most ``v_max`` per second
and is clamped at obstacle faces. Contact force is a penalty spring on the
reference's penetration behind an active face, so it can only be non-zero
where the EE actually touches a surface.

Wrenches are reported in the EE frame via the scenario's ``ft_frame`` map
from EE force axes to signed world axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from .controllers import Command, Grip, Observation

_EPS = 1e-9
_AXES = {"x": 0, "z": 1}


class Task(str, Enum):
    DRAWER = "drawer"
    GRASP = "grasp"


@dataclass(frozen=True)
class Box:
    x_lo: float
    x_hi: float
    z_lo: float
    z_hi: float

    def lo(self, axis: int) -> float:
        return self.x_lo if axis == 0 else self.z_lo

    def hi(self, axis: int) -> float:
        return self.x_hi if axis == 0 else self.z_hi


@dataclass(frozen=True)
class Region:
    """A view-class region: a sphere (``size=(radius,)``) or a box (``size=half extents``).

    ``frame="drawer"`` regions move with the drawer's front plate.
    """

    view_class: str
    shape: str
    center: tuple[float, float]
    size: tuple[float, ...]
    frame: str = "world"

    def signed_distance(self, p: np.ndarray, drawer_shift: float = 0.0) -> float:
        c = np.array(self.center, dtype=float)
        if self.frame == "drawer":
            c[0] -= drawer_shift
        d = np.asarray(p, dtype=float) - c
        if self.shape == "sphere":
            return float(np.hypot(d[0], d[1]) - self.size[0])
        q = np.abs(d) - np.asarray(self.size, dtype=float)
        outside = np.hypot(max(q[0], 0.0), max(q[1], 0.0))
        return float(outside + min(max(q[0], q[1]), 0.0))


@dataclass(frozen=True)
class DrawerGeometry:
    plate_x: float = 0.0
    plate_thickness: float = 0.02
    plate_z: tuple[float, float] = (-0.25, 0.30)
    handle_top: float = 0.0
    handle_depth: float = 0.03
    handle_thickness: float = 0.02
    max_ext: float = 0.3
    # capture box: center relative to (plate face, handle top), full side length
    capture_center: tuple[float, float] = (-0.015, 0.01)
    capture_size: float = 0.04


@dataclass(frozen=True)
class BinGeometry:
    front_x: float = 0.0
    back_x: float = 0.32
    bottom_z: float = 0.0
    rim_z: float = 0.15
    wall: float = 0.02
    ball_radius: float = 0.033
    ball_x: tuple[float, ...] = (0.07, 0.16, 0.25)
    ball_jitter: float = 0.01
    hand_capture: tuple[float, float] = (0.04, 0.05)
    slip_prob: float = 0.004


@dataclass(frozen=True)
class Trigger:
    """When a disturbance may fire.

    kinds: ``ee_past_x`` (EE x >= ``x``), ``ee_in_box`` (EE inside ``lo``..``hi``),
    ``handle_grasped``.
    """

    kind: str
    x: Optional[float] = None
    lo: Optional[tuple[float, float]] = None
    hi: Optional[tuple[float, float]] = None

    def holds(self, w: "WorldState") -> bool:
        if self.kind == "ee_past_x":
            return bool(w.ee_pos[0] >= self.x)
        if self.kind == "ee_in_box":
            p = w.ee_pos
            return bool(self.lo[0] <= p[0] <= self.hi[0] and self.lo[1] <= p[1] <= self.hi[1])
        if self.kind == "handle_grasped":
            return w.handle_grasped
        raise ValueError(f"unknown trigger kind {self.kind!r}")


@dataclass(frozen=True)
class DisturbanceEvent:
    kind: str  # "push_ee" | "hold_drawer_shut"
    trigger: Trigger
    displacement: tuple[float, float] = (0.0, 0.0)
    force: float = 0.0
    duration: float = 1.0
    max_fires: int = 1
    fires_per_ball: Optional[int] = None
    cooldown: float = 0.0
    requires_free_hand: bool = False


@dataclass(frozen=True)
class WorldConfig:
    task: Task
    dt: float = 0.02
    v_max: float = 0.1
    stiffness: float = 500.0
    force_gain: float = 0.2
    max_contact_force: float = 30.0
    # a deflate command must persist this long before a grasped object is let go
    release_time: float = 0.2
    force_noise_std: float = 0.2
    torque_noise_std: float = 0.02
    ft_frame: dict = field(default_factory=lambda: {"fx": ("z", -1), "fz": ("x", 1)})
    loaded_ty: float = -0.1
    workspace_lo: tuple[float, float] = (-1.5, -0.4)
    workspace_hi: tuple[float, float] = (0.6, 0.8)
    start_pos: tuple[float, float] = (-0.93, 0.13)
    start_jitter: float = 0.05
    detect_class: Optional[str] = None
    detector_noise_std: float = 0.005
    drawer: Optional[DrawerGeometry] = None
    bin: Optional[BinGeometry] = None
    regions: tuple[Region, ...] = ()


@dataclass(frozen=True)
class Ball:
    pos: tuple[float, float]
    held: bool = False
    enclosed: bool = False
    removed: bool = False
    offset: tuple[float, float] = (0.0, 0.0)  # ball - EE while attached

    @property
    def attached(self) -> bool:
        return self.held or self.enclosed


@dataclass(frozen=True)
class ActiveDisturbance:
    event: int
    remaining: float


@dataclass(frozen=True)
class WorldState:
    ee_pos: np.ndarray
    ee_ref: np.ndarray
    ee_vel: np.ndarray = field(default_factory=lambda: np.zeros(2))
    grip: Grip = Grip.DEFLATED
    release_timer: float = 0.0
    drawer_extension: float = 0.0
    handle_grasped: bool = False
    grasp_offset: float = 0.0
    balls: tuple[Ball, ...] = ()
    active_disturbances: tuple[ActiveDisturbance, ...] = ()
    # (event index, time, balls removed at fire time) per firing
    fire_log: tuple[tuple[int, float, int], ...] = ()
    contact_force: np.ndarray = field(default_factory=lambda: np.zeros(2))
    time: float = 0.0

    @property
    def balls_removed(self) -> int:
        return sum(b.removed for b in self.balls)


def initial_world(cfg: WorldConfig, rng: Optional[np.random.Generator] = None) -> WorldState:
    """Start state; ``rng`` jitters the EE start pose and ball positions."""
    start = np.array(cfg.start_pos, dtype=float)
    if rng is not None and cfg.start_jitter > 0:
        start = start + rng.uniform(-cfg.start_jitter, cfg.start_jitter, size=2)
    balls: tuple[Ball, ...] = ()
    if cfg.bin is not None:
        g = cfg.bin
        xs = np.array(g.ball_x, dtype=float)
        if rng is not None and g.ball_jitter > 0:
            xs = xs + rng.uniform(-g.ball_jitter, g.ball_jitter, size=xs.shape)
        balls = tuple(Ball((float(x), g.bottom_z + g.ball_radius)) for x in xs)
    return WorldState(ee_pos=start, ee_ref=start.copy(), balls=balls)


# ---------------------------------------------------------------- geometry ---

def plate_x(w: WorldState, g: DrawerGeometry) -> float:
    return g.plate_x - w.drawer_extension


def _handle_box(px: float, g: DrawerGeometry) -> Box:
    # extends into the plate so an EE resting on the plate face lands on it
    return Box(px - g.handle_depth, px + g.plate_thickness, g.handle_top - g.handle_thickness, g.handle_top)


def _static_boxes(w: WorldState, cfg: WorldConfig) -> list[Box]:
    boxes: list[Box] = []
    if cfg.drawer is not None and not w.handle_grasped:
        g = cfg.drawer
        px = plate_x(w, g)
        boxes.append(Box(px, px + g.plate_thickness, g.plate_z[0], g.plate_z[1]))
        boxes.append(_handle_box(px, g))
    if cfg.bin is not None:
        g = cfg.bin
        lo_z = g.bottom_z - g.wall
        boxes.append(Box(g.front_x - g.wall, g.front_x, lo_z, g.rim_z))
        boxes.append(Box(g.back_x, g.back_x + g.wall, lo_z, g.rim_z))
        boxes.append(Box(g.front_x - g.wall, g.back_x + g.wall, lo_z, g.bottom_z))
    return boxes


def _ball_box(b: Ball, r: float) -> Box:
    return Box(b.pos[0] - r, b.pos[0] + r, b.pos[1] - r, b.pos[1] + r)


def _obstacles(w: WorldState, cfg: WorldConfig) -> list[Box]:
    """Obstacles in EE-point configuration space."""
    boxes = _static_boxes(w, cfg)
    if cfg.bin is None:
        return boxes
    r = cfg.bin.ball_radius
    free = [_ball_box(b, r) for b in w.balls if not b.removed and not b.attached]
    boxes = boxes + free
    for b in w.balls:
        if b.attached and not b.removed:
            ox, oz = b.offset
            # configuration-space image of the carried ball against every obstacle
            boxes = boxes + [Box(s.x_lo - ox - r, s.x_hi - ox + r, s.z_lo - oz - r, s.z_hi - oz + r)
                             for s in _static_boxes(w, cfg) + free]
    return boxes


def _interior(v: float, lo: float, hi: float) -> bool:
    return lo + _EPS < v < hi - _EPS


def _sweep_axis(p: np.ndarray, target: float, axis: int, boxes: list[Box]) -> float:
    other = 1 - axis
    t = target
    for b in boxes:
        if not _interior(p[other], b.lo(other), b.hi(other)):
            continue
        lo, hi = b.lo(axis), b.hi(axis)
        if _interior(p[axis], lo, hi):
            continue  # already inside: never trap the EE
        if p[axis] <= lo + _EPS and t > lo:
            t = lo
        elif p[axis] >= hi - _EPS and t < hi:
            t = hi
    return t


def _sweep(p: np.ndarray, target: np.ndarray, boxes: list[Box]) -> np.ndarray:
    out = p.copy()
    out[0] = _sweep_axis(out, target[0], 0, boxes)
    out[1] = _sweep_axis(out, target[1], 1, boxes)
    return out


def _contact_forces(p: np.ndarray, ref: np.ndarray, boxes: list[Box], k: float) -> np.ndarray:
    f = np.zeros(2)
    for axis in (0, 1):
        other = 1 - axis
        push_neg, push_pos = 0.0, 0.0
        for b in boxes:
            if not _interior(p[other], b.lo(other), b.hi(other)):
                continue
            lo, hi = b.lo(axis), b.hi(axis)
            if abs(p[axis] - lo) <= _EPS and ref[axis] > lo:
                push_neg = max(push_neg, k * (ref[axis] - lo))
            if abs(p[axis] - hi) <= _EPS and ref[axis] < hi:
                push_pos = max(push_pos, k * (hi - ref[axis]))
        f[axis] = push_pos - push_neg
    return f


def _clamp_norm(v: np.ndarray, limit: float) -> np.ndarray:
    n = float(np.hypot(v[0], v[1]))
    return v * (limit / n) if n > limit else v


# ------------------------------------------------------------ disturbances ---

def _free_hand(w: WorldState) -> bool:
    return not w.handle_grasped and not any(b.attached for b in w.balls)


def _fire_ok(i: int, ev: DisturbanceEvent, w: WorldState) -> bool:
    fires = [f for f in w.fire_log if f[0] == i]
    if len(fires) >= ev.max_fires:
        return False
    if any(a.event == i for a in w.active_disturbances):
        return False
    if fires and w.time - fires[-1][1] < ev.cooldown - _EPS:
        return False
    if ev.fires_per_ball is not None:
        removed = w.balls_removed
        if sum(1 for f in fires if f[2] == removed) >= ev.fires_per_ball:
            return False
    if ev.requires_free_hand and not _free_hand(w):
        return False
    return ev.trigger.holds(w)


def _update_disturbances(w: WorldState, schedule: tuple[DisturbanceEvent, ...], dt: float) -> WorldState:
    active = []
    for a in w.active_disturbances:
        ev = schedule[a.event]
        if ev.kind == "hold_drawer_shut" and not w.handle_grasped:
            continue  # the person lets go once the robot releases the handle
        active.append(a)
    log = list(w.fire_log)
    w = replace(w, active_disturbances=tuple(active))
    for i, ev in enumerate(schedule):
        if _fire_ok(i, ev, w):
            active.append(ActiveDisturbance(i, ev.duration))
            log.append((i, w.time, w.balls_removed))
            w = replace(w, active_disturbances=tuple(active), fire_log=tuple(log))
    return w


def _expire(active: tuple[ActiveDisturbance, ...], dt: float) -> tuple[ActiveDisturbance, ...]:
    return tuple(ActiveDisturbance(a.event, a.remaining - dt) for a in active if a.remaining - dt > _EPS)


# --------------------------------------------------------------- grasping ---

def _in_handle_capture(p: np.ndarray, w: WorldState, g: DrawerGeometry) -> bool:
    cx = plate_x(w, g) + g.capture_center[0]
    cz = g.handle_top + g.capture_center[1]
    h = g.capture_size / 2
    return abs(p[0] - cx) <= h and abs(p[1] - cz) <= h


def _drop(b: Ball, g: BinGeometry) -> Ball:
    x = min(max(b.pos[0], g.front_x + g.ball_radius), g.back_x - g.ball_radius)
    return Ball((x, g.bottom_z + g.ball_radius))


def _capturable(w: WorldState, g: BinGeometry) -> Optional[int]:
    best, best_d = None, math.inf
    hx, hz = g.hand_capture
    for i, b in enumerate(w.balls):
        if b.removed or b.attached:
            continue
        dx, dz = b.pos[0] - w.ee_pos[0], b.pos[1] - w.ee_pos[1]
        if abs(dx) <= hx and abs(dz) <= hz and math.hypot(dx, dz) < best_d:
            best, best_d = i, math.hypot(dx, dz)
    return best


def _apply_grip(w: WorldState, grip: Grip, cfg: WorldConfig, dt: float) -> WorldState:
    prev = w.grip
    holding = w.handle_grasped or any(b.attached and not b.removed for b in w.balls)
    if grip == Grip.DEFLATED and holding and prev != Grip.DEFLATED:
        timer = w.release_timer + dt
        if timer < cfg.release_time - 1e-12:
            return replace(w, release_timer=timer)
    w = replace(w, grip=grip, release_timer=0.0)
    if cfg.drawer is not None:
        g = cfg.drawer
        if w.handle_grasped and grip != Grip.FULL:
            w = replace(w, handle_grasped=False)
        elif not w.handle_grasped and grip == Grip.FULL and prev != Grip.FULL \
                and _in_handle_capture(w.ee_pos, w, g):
            w = replace(w, handle_grasped=True, grasp_offset=float(w.ee_pos[0] - plate_x(w, g)))
    if cfg.bin is not None:
        g = cfg.bin
        balls = list(w.balls)
        if grip == Grip.DEFLATED:
            balls = [_drop(b, g) if b.attached and not b.removed else b for b in balls]
        elif grip == Grip.HALF:
            balls = [replace(b, held=False, enclosed=True) if b.held else b for b in balls]
            if prev == Grip.DEFLATED and not any(b.attached for b in balls):
                i = _capturable(w, g)
                if i is not None:
                    balls[i] = _attach(balls[i], w.ee_pos, enclosed=True)
        elif grip == Grip.FULL and prev != Grip.FULL:
            balls = [replace(b, held=True, enclosed=False) if b.enclosed else b for b in balls]
            if not any(b.attached for b in balls):
                i = _capturable(w, g)
                if i is not None:
                    balls[i] = _attach(balls[i], w.ee_pos, enclosed=False)
        w = replace(w, balls=tuple(balls))
    return w


def _attach(b: Ball, ee: np.ndarray, enclosed: bool) -> Ball:
    off = (b.pos[0] - float(ee[0]), b.pos[1] - float(ee[1]))
    return replace(b, held=not enclosed, enclosed=enclosed, offset=off)


# -------------------------------------------------------------------- step ---

def step_world(w: WorldState, c: Command, dt: float, rng: np.random.Generator, cfg: WorldConfig,
               schedule: tuple[DisturbanceEvent, ...] = ()) -> tuple[WorldState, np.ndarray]:
    """Advance the world by ``dt`` under command ``c``; returns (state, EE-frame wrench)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    k = cfg.stiffness
    lead = cfg.max_contact_force / k
    w = _apply_grip(w, c.grip, cfg, dt)
    w = _update_disturbances(w, schedule, dt)

    pos = np.array(w.ee_pos, dtype=float)
    ref = np.array(w.ee_ref, dtype=float)
    push_force = np.zeros(2)
    hold = False
    for a in w.active_disturbances:
        ev = schedule[a.event]
        if ev.kind == "push_ee":
            disp = np.array(ev.displacement, dtype=float)
            step = disp * (min(dt, a.remaining) / ev.duration)
            pos += step
            ref += step
            n = float(np.hypot(*disp))
            if n > 0:
                push_force += disp / n * ev.force
        elif ev.kind == "hold_drawer_shut":
            hold = True

    dref = _clamp_norm(np.asarray(c.ee_vel, dtype=float), cfg.v_max) * dt
    for ee_axis, target in c.force_setpoint.items():
        world_axis, sign = cfg.ft_frame[ee_axis]
        i = _AXES[world_axis]
        dref[i] += cfg.force_gain * (w.contact_force[i] - sign * target) / k
    ref = ref + _clamp_norm(dref, cfg.v_max * dt)
    ref = np.clip(ref, pos - lead, pos + lead)

    lo_ws, hi_ws = np.array(cfg.workspace_lo), np.array(cfg.workspace_hi)
    ref = np.clip(ref, lo_ws, hi_ws)
    limit = cfg.v_max * dt

    if w.handle_grasped:
        g = cfg.drawer
        x_open = g.plate_x - g.max_ext + w.grasp_offset
        x_closed = g.plate_x + w.grasp_offset
        x_lo = float(pos[0]) if hold else x_open
        x_lo = min(x_lo, x_closed)
        new = pos.copy()
        new[0] = pos[0] + np.clip(ref[0] - pos[0], -limit, limit)
        new[0] = min(max(new[0], x_lo), x_closed)
        ext = min(max(g.plate_x - (new[0] - w.grasp_offset), 0.0), g.max_ext)
        handle = _handle_box(g.plate_x - ext, g)
        dz = np.clip(ref[1] - pos[1], -limit, limit)
        new[1] = _sweep_axis(new, pos[1] + dz, 1, [handle])
        new = np.clip(new, lo_ws, hi_ws)
        force = _contact_forces(new, ref, [handle], k)
        if abs(new[0] - x_lo) <= _EPS and ref[0] < x_lo:
            force[0] += k * (x_lo - ref[0])
        elif abs(new[0] - x_closed) <= _EPS and ref[0] > x_closed:
            force[0] -= k * (ref[0] - x_closed)
        w = replace(w, drawer_extension=ext)
        loaded = force[1] > 0
    else:
        boxes = _obstacles(w, cfg)
        full = _sweep(pos, ref, boxes)
        d = full - pos
        n = float(np.hypot(*d))
        new = _sweep(pos, pos + d * (limit / n), boxes) if n > limit else full
        new = np.clip(new, lo_ws, hi_ws)
        force = _contact_forces(new, ref, boxes, k)
        loaded = False

    force = np.clip(force, -cfg.max_contact_force, cfg.max_contact_force)
    vel = (new - np.asarray(w.ee_pos)) / dt
    w = replace(w, ee_pos=new, ee_ref=ref, ee_vel=vel, contact_force=force,
                active_disturbances=_expire(w.active_disturbances, dt), time=w.time + dt)
    if cfg.bin is not None:
        w = _update_balls(w, cfg.bin, rng)

    wrench = np.zeros(6)
    sensed = force + push_force
    for ee_axis, idx in (("fx", 0), ("fz", 2)):
        world_axis, sign = cfg.ft_frame[ee_axis]
        wrench[idx] = sign * sensed[_AXES[world_axis]]
    if loaded:
        wrench[4] = cfg.loaded_ty
    if cfg.force_noise_std > 0 or cfg.torque_noise_std > 0:
        std = np.array([cfg.force_noise_std] * 3 + [cfg.torque_noise_std] * 3)
        wrench = wrench + rng.normal(0.0, 1.0, size=6) * std
    return w, wrench


def _update_balls(w: WorldState, g: BinGeometry, rng: np.random.Generator) -> WorldState:
    balls = []
    ex, ez = float(w.ee_pos[0]), float(w.ee_pos[1])
    for b in w.balls:
        if b.attached and not b.removed:
            b = replace(b, pos=(ex + b.offset[0], ez + b.offset[1]))
            if b.held and b.pos[1] - g.ball_radius >= g.rim_z:
                b = replace(b, held=False, removed=True)
            elif b.held and g.slip_prob > 0 and rng.random() < g.slip_prob:
                b = _drop(b, g)
        balls.append(b)
    return replace(w, balls=tuple(balls))


# ------------------------------------------------------------ perception ---

def true_view_class(w: WorldState, cfg: WorldConfig) -> str:
    """First region containing the EE, else the region with the nearest boundary."""
    if not cfg.regions:
        raise ValueError("world has no view regions configured")
    shift = w.drawer_extension
    dists = [r.signed_distance(w.ee_pos, shift) for r in cfg.regions]
    for r, d in zip(cfg.regions, dists):
        if d <= 0:
            return r.view_class
    return cfg.regions[int(np.argmin(dists))].view_class


def detect_ball(w: WorldState, cfg: WorldConfig, rng: Optional[np.random.Generator]) -> Optional[np.ndarray]:
    if cfg.bin is None or cfg.detect_class is None or true_view_class(w, cfg) != cfg.detect_class:
        return None
    candidates = [b for b in w.balls if not b.removed and not b.held]
    if not candidates:
        return None
    ball = min(candidates, key=lambda b: abs(b.pos[0] - w.ee_pos[0]))
    offset = np.asarray(ball.pos) - w.ee_pos
    if rng is not None and cfg.detector_noise_std > 0:
        offset = offset + rng.normal(0.0, cfg.detector_noise_std, size=2)
    return offset


def observe(w: WorldState, cfg: WorldConfig, wrench: np.ndarray,
            rng: Optional[np.random.Generator] = None) -> Observation:
    return Observation(ee_pos=np.array(w.ee_pos), ball_offset=detect_ball(w, cfg, rng),
                       ft=np.asarray(wrench, dtype=float))


@dataclass(frozen=True)
class SuccessRecord:
    success: bool
    balls_removed: Optional[int] = None
    at_least_one: Optional[bool] = None
    normalized: Optional[float] = None


def task_success(w: WorldState, task: Task, cfg: Optional[WorldConfig] = None) -> SuccessRecord:
    task = Task(task)
    if task == Task.DRAWER:
        max_ext = cfg.drawer.max_ext if cfg is not None and cfg.drawer is not None else DrawerGeometry().max_ext
        return SuccessRecord(success=w.drawer_extension >= 0.95 * max_ext)
    total = len(w.balls) or 3
    n = w.balls_removed
    return SuccessRecord(success=n > 0, balls_removed=n, at_least_one=n > 0, normalized=n / total)
