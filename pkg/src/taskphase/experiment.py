"""Closed-loop episodes, condition sweeps and reports.

One tick: step the world under the last command, turn the new wrench and
view into likelihood vectors, step the executive, run the chosen controller.
All randomness comes from one ``SeedSequence`` per episode, so an episode is
a pure function of (scenario, executive, condition, seed).
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .arbitration import ReactiveExecutive, executive_step, make_executive
from .controllers import Command, ControllerId, run_controller
from .scenarios import CONDITIONS, ScenarioConfig
from .sensors import classify_view, ft_likelihood_vector
from .world import Task, initial_world, observe, step_world, task_success, true_view_class

log = logging.getLogger(__name__)

EXECUTIVES = ("reactive", "linear")
CSV_COLUMNS = ("task", "executive", "condition", "n", "success_rate", "normalized_balls")
TRAJECTORY_COLUMNS = ("time", "ee_x", "ee_z", "fx", "fy", "fz", "tx", "ty", "tz",
                      "true_class", "map_phase", "controller")


@dataclass(frozen=True)
class EpisodeResult:
    task: str
    executive: str
    condition: str
    seed: int
    success: bool
    balls_removed: Optional[int]
    ticks_elapsed: int
    # run-length encoded MAP / active-node phase: (first tick, phase name)
    phase_segments: tuple[tuple[int, str], ...]
    degraded_ticks: int = 0
    trajectory: Optional[tuple[dict, ...]] = field(default=None, compare=False, repr=False)

    @property
    def phase_sequence(self) -> tuple[str, ...]:
        return tuple(name for _, name in self.phase_segments)


@dataclass(frozen=True)
class ConditionSummary:
    task: str
    executive: str
    condition: str
    n: int
    success_rate: float
    normalized_balls: Optional[float]
    episodes: tuple[EpisodeResult, ...] = field(default=(), compare=False, repr=False)


def _streams(seed: int, n: int = 4) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def run_episode(cfg: ScenarioConfig, executive: str, condition: str, seed: int,
                log_trajectory: bool = False, tick_cap: Optional[int] = None) -> EpisodeResult:
    if executive not in EXECUTIVES:
        raise ValueError(f"unknown executive {executive!r}")
    init_rng, world_rng, vis_rng, det_rng = _streams(seed)
    wc = cfg.world
    w = initial_world(wc, init_rng)
    ex = make_executive(executive, cfg.controllers, cfg.self_prob)
    schedule = cfg.schedule(condition)
    models, spec, clf = cfg.ft_models, cfg.view_spec(), cfg.classifier()
    anchors = {k: np.asarray(v, dtype=float) for k, v in cfg.anchors.items()}
    names = cfg.phase_names
    n_balls = len(w.balls)
    cap = cfg.tick_cap if tick_cap is None else tick_cap

    cmd = Command(np.zeros(2))
    segments: list[tuple[int, str]] = []
    rows: list[dict] = []
    degraded = 0
    success = False
    tick = 0
    for tick in range(1, cap + 1):
        w, wrench = step_world(w, cmd, wc.dt, world_rng, wc, schedule)
        view = true_view_class(w, wc)
        ft_l = ft_likelihood_vector(models, wrench, relative=True)
        vis_l = classify_view(view, clf, spec, vis_rng)
        ex, cid = executive_step(ex, ft_l, vis_l)
        cmd = run_controller(cid, observe(w, wc, wrench, det_rng), anchors, cfg.controller_params)
        degraded += cmd.degraded
        phase = names[ex.phase]
        if not segments or segments[-1][1] != phase:
            segments.append((tick, phase))
        if log_trajectory:
            rows.append(dict(zip(TRAJECTORY_COLUMNS, (
                round(w.time, 10), *map(float, w.ee_pos), *map(float, wrench), view, phase, cid.value))))
        rec = task_success(w, wc.task, wc)
        if wc.task == Task.DRAWER and rec.success:
            success = True
            break
        if wc.task == Task.GRASP and rec.balls_removed == n_balls:
            break
    rec = task_success(w, wc.task, wc)
    if wc.task == Task.GRASP:
        success = bool(rec.at_least_one)
    return EpisodeResult(
        task=cfg.task.value, executive=executive, condition=condition, seed=seed,
        success=success, balls_removed=rec.balls_removed, ticks_elapsed=tick,
        phase_segments=tuple(segments), degraded_ticks=degraded,
        trajectory=tuple(rows) if log_trajectory else None,
    )


def _run_args(args):
    return run_episode(*args)


def summarize(cfg: ScenarioConfig, executive: str, condition: str,
              episodes: Sequence[EpisodeResult]) -> ConditionSummary:
    episodes = tuple(sorted(episodes, key=lambda e: e.seed))
    n = len(episodes)
    rate = sum(e.success for e in episodes) / n
    norm = None
    if cfg.task == Task.GRASP:
        total = len(cfg.world.bin.ball_x)
        norm = sum(e.balls_removed for e in episodes) / (n * total)
    return ConditionSummary(cfg.task.value, executive, condition, n, rate, norm, episodes)


def run_condition(cfg: ScenarioConfig, executive: str, condition: str, n: int = 10,
                  seeds: Optional[Sequence[int]] = None, jobs: int = 1) -> ConditionSummary:
    if n < 1:
        raise ValueError("n must be at least 1")
    seeds = list(range(n)) if seeds is None else list(seeds)[:n]
    if len(seeds) < n:
        raise ValueError(f"need {n} seeds, got {len(seeds)}")
    args = [(cfg, executive, condition, s) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            episodes = list(pool.map(_run_args, args))
    else:
        episodes = [_run_args(a) for a in args]
    summary = summarize(cfg, executive, condition, episodes)
    log.info("%s/%s/%s: success %.2f", summary.task, executive, condition, summary.success_rate)
    return summary


def run_grid(cfgs: Iterable[ScenarioConfig], n: int = 10, seeds: Optional[Sequence[int]] = None,
             jobs: int = 1) -> list[ConditionSummary]:
    out = []
    for cfg in cfgs:
        for executive in EXECUTIVES:
            for condition in CONDITIONS:
                out.append(run_condition(cfg, executive, condition, n, seeds, jobs))
    return sort_summaries(out)


def sort_summaries(summaries: Iterable[ConditionSummary]) -> list[ConditionSummary]:
    def key(s):
        return (s.task, EXECUTIVES.index(s.executive) if s.executive in EXECUTIVES else 99,
                CONDITIONS.index(s.condition) if s.condition in CONDITIONS else 99)
    return sorted(summaries, key=key)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def emit_report(summaries: Sequence[ConditionSummary], csv_path=None) -> tuple[str, str]:
    """CSV text and an aligned text table; the CSV is also written to ``csv_path``."""
    if not summaries:
        raise ValueError("emit_report needs at least one summary")
    rows = [[_fmt(getattr(s, c)) for c in CSV_COLUMNS] for s in summaries]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(rows)
    text = buf.getvalue()
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            fh.write(text)
    widths = [max(len(c), *(len(r[i]) for r in rows)) for i, c in enumerate(CSV_COLUMNS)]
    lines = ["  ".join(c.ljust(wd) for c, wd in zip(CSV_COLUMNS, widths))]
    lines.append("  ".join("-" * wd for wd in widths))
    lines += ["  ".join(v.ljust(wd) for v, wd in zip(r, widths)) for r in rows]
    return text, "\n".join(lines) + "\n"


def write_trajectory(result: EpisodeResult, path) -> None:
    if result.trajectory is None:
        raise ValueError("episode was run without log_trajectory=True")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRAJECTORY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(result.trajectory)


# ------------------------------------------------- interactive perception ---

@dataclass(frozen=True)
class ObservabilityTrial:
    seed: int
    force_servo: bool
    contact_tick: Optional[int]
    # ticks after first contact until the MAP settles on front-plate contact
    ticks_to_distinguish: Optional[int]

    def distinguished(self, window: int = 25) -> bool:
        return self.ticks_to_distinguish is not None and self.ticks_to_distinguish <= window


def observability_trial(cfg: ScenarioConfig, seed: int, force_servo: bool = True,
                        window: int = 25, max_approach: int = 500) -> ObservabilityTrial:
    """Can FT alone separate pre-grasp from front-plate contact?

    The EE starts at the pre-grasp anchor and the executed controller follows
    the true phase (advance until the plate is touched, then slide down with or
    without the -5 N force setpoint). The filter runs alongside on FT and on
    vision scores that are made identical for the two phases.
    """
    if cfg.task != Task.DRAWER:
        raise ValueError("observability trial needs the drawer scenario")
    init_rng, world_rng, vis_rng, _ = _streams(seed)
    wc = cfg.world
    w = initial_world(wc, None)
    start = np.asarray(cfg.anchors["pregrasp"], dtype=float) + init_rng.uniform(-0.01, 0.01, size=2)
    w = type(w)(ee_pos=start, ee_ref=start.copy())
    ex = ReactiveExecutive.create(cfg.controllers, cfg.self_prob)
    pre, front = cfg.phase_index("pregrasp"), cfg.phase_index("front_plate_contact")
    models, spec, clf = cfg.ft_models, cfg.view_spec(), cfg.classifier()
    anchors = {k: np.asarray(v, dtype=float) for k, v in cfg.anchors.items()}
    cmd = Command(np.zeros(2))
    contact_tick = None
    settled_at = None
    for tick in range(1, max_approach + window + 1):
        w, wrench = step_world(w, cmd, wc.dt, world_rng, wc)
        vis = classify_view(true_view_class(w, wc), clf, spec, vis_rng).copy()
        vis[[pre, front]] = max(vis[pre], vis[front])
        ex, _ = executive_step(ex, ft_likelihood_vector(models, wrench, relative=True), vis)
        if contact_tick is None and w.contact_force[0] != 0.0:
            contact_tick = tick
        if contact_tick is None:
            cid = ControllerId.ADVANCE_STRAIGHT
        else:
            cid = ControllerId.SLIDE_DOWN_WITH_PUSH
            if ex.phase == front:
                settled_at = tick if settled_at is None else settled_at
            else:
                settled_at = None
            if tick - contact_tick >= window:
                break
        cmd = run_controller(cid, observe(w, wc, wrench), anchors, cfg.controller_params, force_servo=force_servo)
    ticks = None if settled_at is None or contact_tick is None else settled_at - contact_tick
    return ObservabilityTrial(seed, force_servo, contact_tick, ticks)
