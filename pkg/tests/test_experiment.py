import csv

import pytest

from taskphase.experiment import (CSV_COLUMNS, TRAJECTORY_COLUMNS, EpisodeResult, emit_report,
                                  observability_trial, run_condition, run_episode, run_grid, summarize,
                                  write_trajectory)
from taskphase.scenarios import builtin_drawer_scenario, builtin_grasp_scenario

DRAWER = builtin_drawer_scenario()
GRASP = builtin_grasp_scenario()


def _fake(seed, success, balls=None, task="grasp"):
    return EpisodeResult(task, "reactive", "none", seed, success, balls, 10, ((1, "free_space"),))


def test_episode_is_deterministic():
    a = run_episode(DRAWER, "reactive", "light", 3)
    b = run_episode(DRAWER, "reactive", "light", 3)
    assert a == b


def test_different_seeds_differ():
    a = run_episode(DRAWER, "reactive", "none", 0)
    b = run_episode(DRAWER, "reactive", "none", 1)
    assert a.ticks_elapsed != b.ticks_elapsed or a.phase_segments != b.phase_segments


def test_tick_cap_terminates_episode():
    res = run_episode(GRASP, "linear", "none", 0, tick_cap=50)
    assert res.ticks_elapsed == 50 and not res.success
    assert res.balls_removed == 0


def test_balls_removed_only_for_grasp():
    assert run_episode(DRAWER, "linear", "none", 0).balls_removed is None
    assert isinstance(run_episode(GRASP, "reactive", "none", 0, tick_cap=100).balls_removed, int)


def test_phase_segments_are_run_length_encoded():
    res = run_episode(DRAWER, "reactive", "none", 0)
    ticks = [t for t, _ in res.phase_segments]
    assert ticks[0] == 1 and ticks == sorted(set(ticks))
    names = res.phase_sequence
    assert all(a != b for a, b in zip(names, names[1:]))
    assert names[-1] in ("handle_grasped", "drawer_opened")


def test_unknown_executive_rejected():
    with pytest.raises(ValueError):
        run_episode(DRAWER, "greedy", "none", 0)


def test_summarize_aggregates_grasp():
    eps = [_fake(0, True, 3), _fake(1, True, 1), _fake(2, False, 0), _fake(3, True, 2)]
    s = summarize(GRASP, "reactive", "none", eps)
    assert s.n == 4 and s.success_rate == 0.75
    assert s.normalized_balls == pytest.approx(6 / 12)


def test_summarize_drawer_has_no_ball_metric():
    s = summarize(DRAWER, "linear", "none", [_fake(0, True, task="drawer"), _fake(1, False, task="drawer")])
    assert s.success_rate == 0.5 and s.normalized_balls is None


def test_run_condition_validates_n():
    with pytest.raises(ValueError):
        run_condition(DRAWER, "reactive", "none", n=0)
    with pytest.raises(ValueError):
        run_condition(DRAWER, "reactive", "none", n=3, seeds=[0, 1])


def test_parallel_matches_sequential():
    seq = run_condition(DRAWER, "reactive", "light", n=2)
    par = run_condition(DRAWER, "reactive", "light", n=2, jobs=2)
    assert seq == par and seq.episodes == par.episodes


def test_drawer_grid_report(tmp_path):
    summaries = run_grid([DRAWER], n=1)
    assert [(s.executive, s.condition) for s in summaries] == [
        ("reactive", "none"), ("reactive", "light"), ("reactive", "strong"),
        ("linear", "none"), ("linear", "light"), ("linear", "strong")]
    path = tmp_path / "grid.csv"
    text, table = emit_report(summaries, path)
    assert path.read_text() == text
    rows = list(csv.reader(text.splitlines()))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 7
    assert rows[1] == ["drawer", "reactive", "none", "1", "1.0000", ""]
    assert table.splitlines()[0].split() == list(CSV_COLUMNS)


def test_single_summary_report_has_two_lines():
    text, _ = emit_report([summarize(DRAWER, "reactive", "none", [_fake(0, True, task="drawer")])])
    assert text.count("\n") == 2


def test_empty_report_rejected():
    with pytest.raises(ValueError):
        emit_report([])


def test_trajectory_logging(tmp_path):
    res = run_episode(DRAWER, "reactive", "none", 0, log_trajectory=True)
    assert len(res.trajectory) == res.ticks_elapsed
    path = tmp_path / "traj.csv"
    write_trajectory(res, path)
    rows = list(csv.DictReader(path.open()))
    assert tuple(rows[0]) == TRAJECTORY_COLUMNS and len(rows) == res.ticks_elapsed
    assert float(rows[0]["time"]) == pytest.approx(DRAWER.world.dt)
    with pytest.raises(ValueError):
        write_trajectory(run_episode(DRAWER, "reactive", "none", 0), path)


def test_observability_trial_shape():
    on = observability_trial(DRAWER, 0, force_servo=True)
    off = observability_trial(DRAWER, 0, force_servo=False)
    assert on.contact_tick is not None and on.contact_tick == off.contact_tick
    assert on.distinguished() and not off.distinguished()
    with pytest.raises(ValueError):
        observability_trial(GRASP, 0)
