"""Scenario definitions and their JSON file format.

A scenario bundles everything an episode needs: the ordered phase list (each
phase's FT model, view class and controller), world geometry, servo anchors,
controller gains and the disturbance schedule for each condition. The phase
order is the sequence the linear baseline walks.

Files are JSON with sorted keys and two-space indent. Floats are written via
``repr`` so ``load_config(save_config(cfg))`` reproduces ``cfg`` exactly.
See ``docs/scenario-schema.md`` for the field reference.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional

import jsonschema

from .controllers import _SERVO_ANCHORS, ControllerId, ControllerParams
from .filter import make_transition_matrix
from .sensors import GaussianFTModel, SimViewClassifier, ViewClassSpec
from .world import (BinGeometry, DisturbanceEvent, DrawerGeometry, Region, Task, Trigger,
                    WorldConfig)

CONDITIONS = ("none", "light", "strong")
FORMAT_VERSION = 1


class ConfigError(ValueError):
    """Scenario file could not be parsed or failed validation.

    ``path`` is a dotted field path such as ``phases[2].ft_model.variances[1]``.
    """

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class PhaseSpec:
    name: str
    ft_model: GaussianFTModel
    view_class: str
    controller: ControllerId


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    phases: tuple[PhaseSpec, ...]
    view_classes: tuple[str, ...]
    world: WorldConfig
    anchors: Mapping[str, tuple[float, float]]
    controller_params: ControllerParams = ControllerParams()
    disturbances: Mapping[str, tuple[DisturbanceEvent, ...]] = field(default_factory=dict)
    seeds: tuple[int, ...] = tuple(range(10))
    self_prob: float = 0.95
    classifier_accuracy: float = 0.9
    classifier_floor: float = 1e-4
    tick_cap: int = 5000

    @property
    def task(self) -> Task:
        return self.world.task

    @property
    def k(self) -> int:
        return len(self.phases)

    @property
    def phase_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.phases)

    @property
    def controllers(self) -> tuple[ControllerId, ...]:
        return tuple(p.controller for p in self.phases)

    @property
    def ft_models(self) -> tuple[GaussianFTModel, ...]:
        return tuple(p.ft_model for p in self.phases)

    def view_spec(self) -> ViewClassSpec:
        return ViewClassSpec(self.view_classes, tuple(p.view_class for p in self.phases))

    def classifier(self) -> SimViewClassifier:
        return SimViewClassifier.with_accuracy(len(self.view_classes), self.classifier_accuracy,
                                               self.classifier_floor)

    def transition_matrix(self):
        return make_transition_matrix(self.k, self.self_prob)

    def schedule(self, condition: str) -> tuple[DisturbanceEvent, ...]:
        if condition not in CONDITIONS:
            raise ConfigError(f"unknown condition {condition!r}; expected one of {CONDITIONS}")
        return tuple(self.disturbances.get(condition, ()))

    def phase_index(self, name: str) -> int:
        return self.phase_names.index(name)


# ------------------------------------------------------------- builtins ---

def _ft(mean=(0, 0, 0, 0, 0, 0), var=(0.2, 0.2, 0.2, 0.05, 0.05, 0.05)) -> GaussianFTModel:
    return GaussianFTModel(tuple(float(m) for m in mean), tuple(float(v) for v in var))


def builtin_drawer_scenario() -> ScenarioConfig:
    free = (1 / 5, 1 / 5, 1 / 5, 1 / 20, 1 / 20, 1 / 20)
    C = ControllerId
    phases = (
        PhaseSpec("free_space", _ft(var=free), "free_space", C.SERVO_TO_PREGRASP),
        PhaseSpec("pregrasp", _ft(var=free), "pregrasp", C.ADVANCE_STRAIGHT),
        PhaseSpec("front_plate_contact", _ft((0, 0, -5, 0, 0, 0), free), "plate", C.SLIDE_DOWN_WITH_PUSH),
        PhaseSpec("handle_grasped", _ft((-5, 0, 0, 0, -0.1, 0), free), "plate", C.GRASP_AND_PULL),
        PhaseSpec("drawer_opened", _ft((-5, 0, 5, 0, -0.1, 0), free), "plate", C.UNGRASP_AND_RETRACT),
    )
    world = WorldConfig(
        task=Task.DRAWER,
        # EE z points into the drawer (+x), EE x points down (-z)
        ft_frame={"fx": ("z", -1), "fz": ("x", 1)},
        workspace_lo=(-1.5, -0.4),
        workspace_hi=(0.6, 0.8),
        start_pos=(-0.93, 0.13),
        start_jitter=0.05,
        drawer=DrawerGeometry(),
        regions=(
            Region("plate", "box", (-0.025, 0.095), (0.025, 0.105), frame="drawer"),
            Region("pregrasp", "sphere", (-0.08, 0.03), (0.04,)),
            Region("free_space", "box", (-0.45, 0.2), (1.05, 0.6)),
        ),
    )
    push = DisturbanceEvent("push_ee", Trigger("ee_past_x", x=-0.06), displacement=(-0.15, -0.10),
                            force=6.0, duration=1.0, max_fires=1)
    hold = DisturbanceEvent("hold_drawer_shut", Trigger("handle_grasped"), duration=20.0, max_fires=1)
    return ScenarioConfig(
        name="drawer",
        phases=phases,
        view_classes=("free_space", "pregrasp", "plate"),
        world=world,
        anchors={"pregrasp": (-0.08, 0.03)},
        controller_params=ControllerParams(),
        disturbances={"none": (), "light": (push,), "strong": (push, hold)},
    )


def builtin_grasp_scenario() -> ScenarioConfig:
    free = (2.0, 2.0, 2.0, 0.5, 0.5, 0.5)
    C = ControllerId
    phases = (
        PhaseSpec("free_space", _ft(var=free), "free_space", C.SERVO_VIEW_1),
        PhaseSpec("view_front", _ft(var=free), "view_1", C.SERVO_VIEW_2),
        PhaseSpec("view_high", _ft(var=free), "view_2", C.SERVO_VIEW_3),
        PhaseSpec("view_steep", _ft(var=free), "view_3", C.SERVO_TO_TOPDOWN),
        PhaseSpec("top_down", _ft(var=free), "topdown", C.DESCEND_TO_BALL),
        PhaseSpec("pushing_down", _ft((0, 0, -5, 0, 0, 0), free), "topdown", C.SWEEP_TO_FRONTPLATE),
        PhaseSpec("front_plate_push", _ft((-5, 0, 0, 0, 0, 0), (2.0, 2.0, 150.0, 0.5, 0.5, 0.5)),
                  "topdown", C.LIFT_OUT),
    )
    world = WorldConfig(
        task=Task.GRASP,
        # hand points down (EE z = -z), EE x points at the drawer front plate (-x)
        ft_frame={"fx": ("x", -1), "fz": ("z", -1)},
        workspace_lo=(-0.8, -0.3),
        workspace_hi=(0.6, 0.8),
        start_pos=(-0.30, 0.20),
        start_jitter=0.05,
        detect_class="topdown",
        bin=BinGeometry(),
        regions=(
            Region("topdown", "box", (0.15, 0.25), (0.19, 0.25)),
            Region("view_1", "sphere", (-0.30, 0.20), (0.15,)),
            Region("view_2", "sphere", (-0.22, 0.34), (0.15,)),
            Region("view_3", "sphere", (-0.08, 0.47), (0.15,)),
            Region("free_space", "box", (-0.1, 0.25), (0.7, 0.55)),
        ),
    )
    box = Trigger("ee_in_box", lo=(0.02, 0.20), hi=(0.30, 0.28))
    light = DisturbanceEvent("push_ee", box, displacement=(-0.12, 0.12), force=7.0, duration=1.0,
                             max_fires=3, fires_per_ball=1, cooldown=2.0, requires_free_hand=True)
    strong = DisturbanceEvent("push_ee", box, displacement=(-0.12, 0.12), force=7.0, duration=1.0,
                              max_fires=6, fires_per_ball=2, cooldown=2.0, requires_free_hand=True)
    return ScenarioConfig(
        name="grasp",
        phases=phases,
        view_classes=("free_space", "view_1", "view_2", "view_3", "topdown"),
        world=world,
        anchors={"view_1": (-0.30, 0.20), "view_2": (-0.22, 0.34), "view_3": (-0.08, 0.47),
                 "topdown": (0.16, 0.30)},
        controller_params=ControllerParams(),
        disturbances={"none": (), "light": (light,), "strong": (strong,)},
    )


BUILTINS = {"drawer": builtin_drawer_scenario, "grasp": builtin_grasp_scenario}


def builtin_scenario(name: str) -> ScenarioConfig:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ConfigError(f"unknown builtin scenario {name!r}; choose from {sorted(BUILTINS)}") from None


def builtin_path(name: str) -> Path:
    """Path of the shipped JSON file for a builtin scenario."""
    return Path(str(resources.files("taskphase") / "data" / f"{name}.json"))


# -------------------------------------------------------- serialization ---

def _plain(obj):
    if isinstance(obj, (ControllerId, Task)):
        return obj.value
    if isinstance(obj, tuple):
        return [_plain(v) for v in obj]
    if isinstance(obj, list):
        return [_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    return obj


def to_dict(cfg: ScenarioConfig) -> dict:
    world = {f.name: getattr(cfg.world, f.name) for f in fields(WorldConfig)}
    world["drawer"] = asdict(cfg.world.drawer) if cfg.world.drawer else None
    world["bin"] = asdict(cfg.world.bin) if cfg.world.bin else None
    world["regions"] = [asdict(r) for r in cfg.world.regions]
    return _plain({
        "format_version": FORMAT_VERSION,
        "name": cfg.name,
        "phases": [{"name": p.name, "view_class": p.view_class, "controller": p.controller,
                    "ft_model": {"mean": p.ft_model.mean, "variances": p.ft_model.variances}}
                   for p in cfg.phases],
        "view_classes": cfg.view_classes,
        "world": world,
        "anchors": dict(cfg.anchors),
        "controller_params": asdict(cfg.controller_params),
        "disturbances": {c: [asdict(e) for e in evs] for c, evs in cfg.disturbances.items()},
        "seeds": cfg.seeds,
        "self_prob": cfg.self_prob,
        "classifier_accuracy": cfg.classifier_accuracy,
        "classifier_floor": cfg.classifier_floor,
        "tick_cap": cfg.tick_cap,
    })


def _tup(v):
    return tuple(_tup(x) for x in v) if isinstance(v, list) else v


def _build(cls, data: Mapping[str, Any], path: str, **overrides):
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"unknown field {key!r}", path)
        kwargs[key] = _tup(value)
    kwargs.update(overrides)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path) from None


def from_dict(data: Mapping[str, Any]) -> ScenarioConfig:
    validate_dict(data)
    phases = tuple(
        PhaseSpec(p["name"], GaussianFTModel(tuple(p["ft_model"]["mean"]), tuple(p["ft_model"]["variances"])),
                  p["view_class"], ControllerId(p["controller"]))
        for p in data["phases"])
    w = data["world"]
    world = _build(
        WorldConfig, w, "world",
        task=Task(w["task"]),
        ft_frame={k: (v[0], v[1]) for k, v in w["ft_frame"].items()},
        drawer=_build(DrawerGeometry, w["drawer"], "world.drawer") if w.get("drawer") else None,
        bin=_build(BinGeometry, w["bin"], "world.bin") if w.get("bin") else None,
        regions=tuple(_build(Region, r, f"world.regions[{i}]") for i, r in enumerate(w["regions"])),
    )
    disturbances = {}
    for cond, events in data["disturbances"].items():
        evs = []
        for i, e in enumerate(events):
            at = f"disturbances.{cond}[{i}]"
            evs.append(_build(DisturbanceEvent, e, at, trigger=_build(Trigger, e["trigger"], at + ".trigger")))
        disturbances[cond] = tuple(evs)
    return ScenarioConfig(
        name=data["name"],
        phases=phases,
        view_classes=tuple(data["view_classes"]),
        world=world,
        anchors={k: tuple(v) for k, v in data["anchors"].items()},
        controller_params=_build(ControllerParams, data["controller_params"], "controller_params"),
        disturbances=disturbances,
        seeds=tuple(data["seeds"]),
        self_prob=data["self_prob"],
        classifier_accuracy=data["classifier_accuracy"],
        classifier_floor=data["classifier_floor"],
        tick_cap=data["tick_cap"],
    )


def dumps(cfg: ScenarioConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True) + "\n"


def loads(text: str) -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error: {exc.msg} (line {exc.lineno}, column {exc.colno})") from None
    return from_dict(data)


def save_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(dumps(cfg))


def load_config(path) -> ScenarioConfig:
    return loads(Path(path).read_text())


def resolve_scenario(name_or_path: str) -> ScenarioConfig:
    """Builtin name (``drawer``/``grasp``) or path to a scenario file."""
    if name_or_path in BUILTINS:
        return builtin_scenario(name_or_path)
    return load_config(name_or_path)


# ------------------------------------------------------------ validation ---

_VEC2 = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_VEC6 = {"type": "array", "items": {"type": "number"}, "minItems": 6, "maxItems": 6}
_POS6 = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 6, "maxItems": 6}

SCHEMA = {
    "type": "object",
    "required": ["format_version", "name", "phases", "view_classes", "world", "anchors",
                 "controller_params", "disturbances", "seeds", "self_prob",
                 "classifier_accuracy", "classifier_floor", "tick_cap"],
    "additionalProperties": False,
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "name": {"type": "string", "minLength": 1},
        "phases": {
            "type": "array", "minItems": 2,
            "items": {
                "type": "object",
                "required": ["name", "ft_model", "view_class", "controller"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "view_class": {"type": "string"},
                    "controller": {"enum": [c.value for c in ControllerId]},
                    "ft_model": {
                        "type": "object", "required": ["mean", "variances"], "additionalProperties": False,
                        "properties": {"mean": _VEC6, "variances": _POS6},
                    },
                },
            },
        },
        "view_classes": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "world": {
            "type": "object",
            "required": ["task", "ft_frame", "regions"],
            "properties": {
                "task": {"enum": [t.value for t in Task]},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "v_max": {"type": "number", "exclusiveMinimum": 0},
                "stiffness": {"type": "number", "exclusiveMinimum": 0},
                "force_gain": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "max_contact_force": {"type": "number", "exclusiveMinimum": 0},
                "force_noise_std": {"type": "number", "minimum": 0},
                "torque_noise_std": {"type": "number", "minimum": 0},
                "ft_frame": {
                    "type": "object", "required": ["fx", "fz"], "additionalProperties": False,
                    "patternProperties": {"^f[xz]$": {
                        "type": "array", "minItems": 2, "maxItems": 2,
                        "prefixItems": [{"enum": ["x", "z"]}, {"enum": [1, -1]}]}},
                },
                "workspace_lo": _VEC2,
                "workspace_hi": _VEC2,
                "start_pos": _VEC2,
                "start_jitter": {"type": "number", "minimum": 0},
                "regions": {
                    "type": "array", "minItems": 1,
                    "items": {
                        "type": "object", "required": ["view_class", "shape", "center", "size"],
                        "properties": {
                            "shape": {"enum": ["sphere", "box"]},
                            "frame": {"enum": ["world", "drawer"]},
                            "center": _VEC2,
                            "size": {"type": "array", "minItems": 1, "maxItems": 2,
                                     "items": {"type": "number", "exclusiveMinimum": 0}},
                        },
                    },
                },
                "drawer": {"type": ["object", "null"]},
                "bin": {"type": ["object", "null"]},
            },
        },
        "anchors": {"type": "object", "additionalProperties": _VEC2},
        "controller_params": {"type": "object"},
        "disturbances": {
            "type": "object",
            "propertyNames": {"enum": list(CONDITIONS)},
            "additionalProperties": {
                "type": "array",
                "items": {
                    "type": "object", "required": ["kind", "trigger"],
                    "properties": {
                        "kind": {"enum": ["push_ee", "hold_drawer_shut"]},
                        "trigger": {
                            "type": "object", "required": ["kind"],
                            "properties": {"kind": {"enum": ["ee_past_x", "ee_in_box", "handle_grasped"]}},
                        },
                        "duration": {"type": "number", "exclusiveMinimum": 0},
                        "max_fires": {"type": "integer", "minimum": 0},
                    },
                },
            },
        },
        "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "self_prob": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "classifier_accuracy": {"type": "number", "minimum": 0, "maximum": 1},
        "classifier_floor": {"type": "number", "exclusiveMinimum": 0},
        "tick_cap": {"type": "integer", "minimum": 1},
    },
}


def _format_path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def validate_dict(data: Mapping[str, Any]) -> None:
    """Schema check, then cross-reference checks. Raises :class:`ConfigError`."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(e.message, _format_path(e.absolute_path))

    seen: dict[str, int] = {}
    for i, p in enumerate(data["phases"]):
        if p["name"] in seen:
            raise ConfigError(f"duplicate phase name {p['name']!r} (first defined at phases[{seen[p['name']]}])",
                              f"phases[{i}].name")
        seen[p["name"]] = i
    classes = data["view_classes"]
    if len(set(classes)) != len(classes):
        raise ConfigError("view classes must be unique", "view_classes")
    for i, p in enumerate(data["phases"]):
        if p["view_class"] not in classes:
            raise ConfigError(f"unknown view class {p['view_class']!r}", f"phases[{i}].view_class")
    ctrl_seen: dict[str, int] = {}
    for i, p in enumerate(data["phases"]):
        if p["controller"] in ctrl_seen:
            raise ConfigError(f"controller {p['controller']!r} already bound to phases[{ctrl_seen[p['controller']]}]",
                              f"phases[{i}].controller")
        ctrl_seen[p["controller"]] = i
        anchor = _SERVO_ANCHORS.get(ControllerId(p["controller"]))
        if anchor is not None and anchor not in data["anchors"]:
            raise ConfigError(f"controller {p['controller']!r} needs anchor {anchor!r}", f"phases[{i}].controller")
    for i, r in enumerate(data["world"]["regions"]):
        if r["view_class"] not in classes:
            raise ConfigError(f"unknown view class {r['view_class']!r}", f"world.regions[{i}].view_class")
    world = data["world"]
    if world["task"] == "drawer" and not world.get("drawer"):
        raise ConfigError("drawer task needs drawer geometry", "world.drawer")
    if world["task"] == "grasp" and not world.get("bin"):
        raise ConfigError("grasp task needs bin geometry", "world.bin")
    if world.get("detect_class") is not None and world["detect_class"] not in classes:
        raise ConfigError(f"unknown view class {world['detect_class']!r}", "world.detect_class")
    if data["classifier_floor"] * (len(classes) - 1) >= 1:
        raise ConfigError("floor too large for the number of view classes", "classifier_floor")
