import json

import numpy as np
import pytest

from taskphase.controllers import ControllerId
from taskphase.scenarios import (BUILTINS, CONDITIONS, ConfigError, builtin_drawer_scenario, builtin_grasp_scenario,
                                 builtin_path, dumps, load_config, loads, resolve_scenario, save_config)

DRAWER_ORDER = ["free_space", "pregrasp", "front_plate_contact", "handle_grasped", "drawer_opened"]
GRASP_ORDER = ["free_space", "view_front", "view_high", "view_steep", "top_down", "pushing_down",
               "front_plate_push"]


def test_drawer_builtin():
    cfg = builtin_drawer_scenario()
    assert cfg.k == 5
    assert list(cfg.phase_names) == DRAWER_ORDER
    assert np.allclose(np.diag(cfg.transition_matrix()), 0.95)
    pre = cfg.ft_models[cfg.phase_index("free_space")]
    assert pre.variances == (0.2, 0.2, 0.2, 0.05, 0.05, 0.05)
    assert cfg.ft_models[cfg.phase_index("front_plate_contact")].mean[2] == -5.0
    assert cfg.ft_models[cfg.phase_index("handle_grasped")].mean[4] == -0.1
    assert cfg.ft_models[cfg.phase_index("drawer_opened")].mean == (-5.0, 0.0, 5.0, 0.0, -0.1, 0.0)


def test_grasp_builtin():
    cfg = builtin_grasp_scenario()
    assert cfg.k == 7
    assert list(cfg.phase_names) == GRASP_ORDER
    assert len(cfg.world.bin.ball_x) == 3
    push = cfg.ft_models[cfg.phase_index("front_plate_push")]
    assert push.mean == (-5.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    assert push.variances == (2.0, 2.0, 150.0, 0.5, 0.5, 0.5)
    assert push.variances[2] == 150
    assert cfg.ft_models[cfg.phase_index("view_front")].variances == (2, 2, 2, 0.5, 0.5, 0.5)
    assert cfg.ft_models[cfg.phase_index("pushing_down")].mean[2] == -5.0
    assert cfg.controllers[cfg.phase_index("front_plate_push")] == ControllerId.LIFT_OUT


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_round_trip_is_exact(name, tmp_path):
    cfg = BUILTINS[name]()
    path = tmp_path / f"{name}.json"
    save_config(cfg, path)
    back = load_config(path)
    assert back == cfg
    assert dumps(back) == path.read_text()


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_shipped_files_match_builtins(name):
    assert builtin_path(name).read_text() == dumps(BUILTINS[name]())
    assert resolve_scenario(name) == resolve_scenario(str(builtin_path(name)))


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_schedules_cover_every_condition(name):
    cfg = BUILTINS[name]()
    assert cfg.schedule("none") == ()
    for cond in CONDITIONS[1:]:
        assert cfg.schedule(cond)
    with pytest.raises((KeyError, ValueError)):
        cfg.schedule("medium")


def _drawer_dict():
    return json.loads(dumps(builtin_drawer_scenario()))


def _error(data) -> ConfigError:
    with pytest.raises(ConfigError) as info:
        loads(json.dumps(data))
    return info.value


def test_duplicate_phase_name_is_named():
    d = _drawer_dict()
    d["phases"][2]["name"] = "pregrasp"
    err = _error(d)
    assert "pregrasp" in str(err) and err.path == "phases[2].name"


def test_negative_variance_rejected_with_path():
    d = _drawer_dict()
    d["phases"][1]["ft_model"]["variances"][3] = -0.05
    assert _error(d).path == "phases[1].ft_model.variances[3]"


def test_unknown_view_class_rejected():
    d = _drawer_dict()
    d["phases"][0]["view_class"] = "kitchen"
    assert "kitchen" in str(_error(d))


def test_duplicate_controller_rejected():
    d = _drawer_dict()
    d["phases"][1]["controller"] = d["phases"][0]["controller"]
    assert "controller" in str(_error(d))


def test_unknown_controller_rejected():
    d = _drawer_dict()
    d["phases"][0]["controller"] = "teleport"
    assert _error(d).path == "phases[0].controller"


def test_missing_anchor_rejected():
    d = _drawer_dict()
    del d["anchors"]["pregrasp"]
    assert "pregrasp" in str(_error(d))


def test_unknown_field_rejected():
    d = _drawer_dict()
    d["world"]["gravity"] = 9.81
    assert "gravity" in str(_error(d))


def test_bad_trigger_rejected():
    d = _drawer_dict()
    d["disturbances"]["light"][0]["trigger"]["kind"] = "moon_phase"
    assert "disturbances.light[0].trigger.kind" in str(_error(d))


def test_missing_geometry_rejected():
    d = _drawer_dict()
    d["world"]["drawer"] = None
    assert "drawer" in str(_error(d))


def test_parse_error_reports_location():
    with pytest.raises(ConfigError, match="line"):
        loads("{ not json")
