import os

import pytest

from macplane.config import ScenarioConfig, config_from_dict, load_config
from macplane.errors import ConfigError, UnknownAxisError
from macplane.runner import apply_axis
from macplane.scenarios import BUILTIN_SCENARIOS, builtin

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")

MINIMAL = {
    "name": "mini",
    "topology": {"nodes": ["a", "b"], "links": [["a", "b"]]},
    "flows": [{"src": "a", "dst": "b"}],
    "sim": {"duration_us": 1000, "seed": 1},
}


def test_minimal_two_node_config_is_valid():
    cfg = config_from_dict(MINIMAL)
    assert cfg.name == "mini"
    assert cfg.params.rts_threshold_bytes == 500  # defaults fill in


def test_unknown_keys_rejected():
    bad = dict(MINIMAL)
    bad["frobnicate"] = True
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_flow_referencing_unknown_node_rejected():
    bad = dict(MINIMAL)
    bad["flows"] = [{"src": "a", "dst": "zz"}]
    with pytest.raises(ConfigError) as exc:
        config_from_dict(bad)
    assert "zz" in str(exc.value)


def test_wrong_schema_version_rejected():
    bad = dict(MINIMAL)
    bad["schema_version"] = 99
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_vo_must_be_more_aggressive_than_bk():
    bad = dict(MINIMAL)
    bad["params"] = {"edca": {
        "VO": {"aifs_slots": 7, "cwmin": 15, "cwmax": 1023, "txop_limit_us": 0},
        "VI": {"aifs_slots": 2, "cwmin": 7, "cwmax": 15, "txop_limit_us": 0},
        "BE": {"aifs_slots": 3, "cwmin": 15, "cwmax": 1023, "txop_limit_us": 0},
        "BK": {"aifs_slots": 7, "cwmin": 15, "cwmax": 1023, "txop_limit_us": 0},
    }}
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_separated_requires_boundary():
    bad = dict(MINIMAL)
    bad["mac"] = {"variant": "separated"}
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_parse_error_reports_line():
    import tempfile
    with tempfile.NamedTemporaryFile("w", suffix=".yaml", delete=False) as fh:
        fh.write("name: x\ntopology: [unclosed\n")
        path = fh.name
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert "line" in str(exc.value)
    os.unlink(path)


@pytest.mark.parametrize("name", sorted(BUILTIN_SCENARIOS))
def test_builtin_equals_checked_in_file(name):
    on_disk = load_config(os.path.join(CONFIG_DIR, f"{name}.yaml"))
    assert on_disk == builtin(name)


@pytest.mark.parametrize("name", sorted(BUILTIN_SCENARIOS))
def test_every_builtin_also_validates_as_separated(name):
    cfg = builtin(name).model_copy(deep=True)
    cfg.mac.variant = "separated"
    # Only the mac field changes; the result must still validate.
    ScenarioConfig.model_validate(cfg.model_dump())


def test_apply_axis_mcs_and_threshold():
    cfg = builtin("p5")
    swept = apply_axis(cfg, "mcs", "qam4096")
    assert all(f.mcs == "qam4096" for f in swept.flows)
    swept = apply_axis(cfg, "rts_threshold", 9000)
    assert swept.params.rts_threshold_bytes == 9000


def test_apply_axis_bandwidth_sets_capabilities():
    swept = apply_axis(builtin("p5"), "bandwidth", 160)
    assert all(n.cap_mhz == 160 for n in swept.nodes.values())


def test_apply_axis_sp_duty_scales_durations():
    swept = apply_axis(builtin("p6"), "sp_duty", 0.5)
    assert swept.sp_table[0].duration_us == 5000
    swept = apply_axis(builtin("p6"), "sp_duty", 0)
    assert swept.sp_table[0].duration_us == 0


def test_apply_axis_n_stations_rebuilds_star():
    swept = apply_axis(builtin("p3"), "n_stations", 5)
    assert len(swept.flows) == 5
    assert len(swept.topology.nodes) == 6


def test_apply_axis_unknown_rejected():
    with pytest.raises(UnknownAxisError):
        apply_axis(builtin("p5"), "warp_factor", 9)
