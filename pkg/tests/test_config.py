import pytest

from pocmt.adversary import AdversaryConfig
from pocmt.config import (PRESETS, ConfigError, build_config, canonical_key, get_value,
                          load_config, parse_lines, point_label, serialize)
from pocmt.simulator import ExperimentConfig


def test_defaults_build_the_default_config():
    assert build_config({}) == ExperimentConfig()


def test_drift_preset_is_a_single_point_with_ten_humans():
    cfgs = load_config("drift")
    assert len(cfgs) == 1
    assert cfgs[0].adversary.adversary_humans == 10
    assert PRESETS["drift"].seeds == 10


def test_capacity_sweep_points_and_labels():
    cfgs = load_config("capacity-sweep")
    assert [c.adversary.adversary_humans for c in cfgs] == list(range(0, 51, 5))
    assert point_label(PRESETS["capacity-sweep"], cfgs[2]) == "m10"
    assert point_label(None, cfgs[0]) == "base"


def test_decay_ablation_sweeps_lambda():
    cfgs = load_config("decay-ablation")
    assert [c.protocol.decay_rate for c in cfgs] == [0.01, 0.05, 0.2]
    assert all(c.adversary.online_policy == "rotate:0.5" for c in cfgs)


def test_zero_sybils_is_valid():
    assert build_config({"adversary.sybil_count": "0"}).adversary.sybil_count == 0


def test_out_of_range_value_names_the_key():
    with pytest.raises(ConfigError, match=r"protocol\.slash_factor"):
        build_config({"slash_factor": "1.5"})


def test_unknown_key_and_bad_syntax_report_the_line():
    with pytest.raises(ConfigError, match=r"cfg:2: nonsense: unknown config key"):
        parse_lines(["seed=1", "nonsense=3"], source="cfg")
    with pytest.raises(ConfigError, match=r"cfg:1: expected key=value"):
        parse_lines(["seed 1"], source="cfg")
    with pytest.raises(ConfigError, match=r"run\.seed"):
        build_config({"seed": "one"})


def test_aliases_and_bare_names():
    assert canonical_key("lambda") == "protocol.decay_rate"
    assert canonical_key("protocol.theta") == "protocol.leader_scale"
    assert canonical_key("tau_h") == "protocol.human_solve_cap"
    assert canonical_key("sybil_count") == "adversary.sybil_count"
    cfg = build_config(parse_lines(["lambda = 0.2  # faster decay", "", "# comment"]))
    assert cfg.protocol.decay_rate == 0.2


def test_serialize_round_trips():
    cfg = build_config({"lambda": "0.01", "private_fork": "yes", "horizon_epochs": "77",
                        "online_policy": "rotate:0.25", "seed": "5"})
    text = serialize(cfg)
    assert build_config(parse_lines(text.splitlines())) == cfg
    assert "adversary.private_fork=true" in text.splitlines()


def test_config_file_with_overrides(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("adversary_humans=3\nseed=4\n")
    (cfg,) = load_config(str(path), ["seed=9"])
    assert cfg.adversary.adversary_humans == 3 and cfg.seed == 9
    (cfg,) = load_config("drift", {"adversary_humans": 0})
    assert get_value(cfg, "adversary_humans") == 0
    with pytest.raises(ConfigError, match="not a preset name"):
        load_config(str(tmp_path / "missing.cfg"))


def test_every_preset_builds():
    for name in PRESETS:
        assert load_config(name)
    (bft,) = load_config("bft-safety")
    assert bft.bft and bft.adversary == AdversaryConfig(sybil_count=20, adversary_humans=5,
                                                        equivocate=True)
