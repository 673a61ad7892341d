import pytest

from lvadbench import config as cfgmod
from lvadbench import kv
from lvadbench.config import (ConfigError, RunConfiguration, from_pairs,
                              to_pairs)


def test_kv_round_trip(tmp_path):
    pairs = {"a": 1, "b": 2.5, "c": "text", "d": True}
    path = tmp_path / "f.kv"
    kv.save(path, pairs, header="demo")
    assert kv.load(path) == pairs


def test_kv_parsing_rules():
    parsed = kv.loads("# comment\nx = 3\n\ny = 4.5  # trailing\nz = on\n")
    assert parsed == {"x": 3, "y": 4.5, "z": "on"}
    with pytest.raises(kv.KvError):
        kv.loads("no equals sign")
    with pytest.raises(kv.KvError):
        kv.loads("a = 1\na = 2")
    with pytest.raises(kv.KvError):
        kv.loads("= 1")


def test_default_config_round_trip(tmp_path):
    config = RunConfiguration()
    path = tmp_path / "run.kv"
    cfgmod.save(path, config)
    back = cfgmod.load(path)
    assert back == config


def test_save_load_save_is_identity(tmp_path):
    config = RunConfiguration(scenario="exercise", controller="pid", seed=17)
    p1 = tmp_path / "a.kv"
    p2 = tmp_path / "b.kv"
    cfgmod.save(p1, config)
    cfgmod.save(p2, cfgmod.load(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_missing_format_key_named():
    with pytest.raises(ConfigError, match="format"):
        from_pairs({"seed": 1})


def test_unknown_key_named():
    pairs = to_pairs(RunConfiguration())
    pairs["cvs.Rxx"] = 1.0
    with pytest.raises(ConfigError, match="Rxx"):
        from_pairs(pairs)
    pairs = to_pairs(RunConfiguration())
    pairs["frobnicate"] = 1.0
    with pytest.raises(ConfigError, match="frobnicate"):
        from_pairs(pairs)


def test_bad_values_rejected():
    pairs = to_pairs(RunConfiguration())
    pairs["controller.kind"] = "fuzzy"
    with pytest.raises(ConfigError, match="fuzzy"):
        from_pairs(pairs)
    pairs = to_pairs(RunConfiguration())
    pairs["scenario.kind"] = "sprint"
    with pytest.raises(ConfigError, match="sprint"):
        from_pairs(pairs)
    pairs = to_pairs(RunConfiguration())
    pairs["detector.step5_on_flvp"] = 3
    with pytest.raises(ConfigError):
        from_pairs(pairs)


def test_overrides_apply():
    pairs = to_pairs(RunConfiguration())
    pairs["cvs.Vtotal"] = 4800.0
    pairs["controller.mfac.lambda"] = 0.25
    pairs["protocol.run_end"] = 350.0
    config = from_pairs(pairs)
    assert config.cvs.Vtotal == 4800.0
    assert config.mfac.lam == 0.25
    assert config.protocol.run_end == 350.0


def test_mfac_lambda_key_spelled_out(tmp_path):
    path = tmp_path / "run.kv"
    cfgmod.save(path, RunConfiguration())
    text = path.read_text(encoding="utf-8")
    assert "controller.mfac.lambda = " in text
    assert "controller.mfac.lam =" not in text


def test_setup_carries_sections():
    config = RunConfiguration(seed=5)
    setup = config.setup()
    assert setup.cvs == config.cvs
    assert setup.pid == config.pid
    assert setup.protocol == config.protocol
