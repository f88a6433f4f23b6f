import pytest

from egoact.config import RunConfig
from egoact.dataio import write_json
from egoact.errors import ConfigError


def test_defaults_are_valid():
    cfg = RunConfig()
    assert cfg.features == ("hof", "logc", "cuboid")
    assert cfg.hof.grid_size == 4
    assert cfg.split.repeats == 100
    doc = cfg.to_dict()
    assert RunConfig.from_dict(doc).to_dict() == doc


def test_unknown_top_level_key_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"bogus": {}})


def test_unknown_section_key_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"svm": {"c_reg": 1.0, "momentum": 0.9}})


def test_constraint_enforced_at_load():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"svm": {"c_reg": -1.0}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"flow": {"alpha": 0.0}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"kernels": {"kind": "polynomial"}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"features": ["hof", "sift"]})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"split": {"mode": "loocv"}})


def test_section_values_applied():
    cfg = RunConfig.from_dict({
        "features": ["hof"],
        "bow": {"words": 8},
        "cuboid": {"sigma": 1.0, "tau": 2.0},
        "split": {"mode": "half_half", "repeats": 5},
    })
    assert cfg.features == ("hof",)
    assert cfg.bow.words == 8
    assert cfg.cuboid.sigma == 1.0
    assert cfg.split.mode == "half_half"


def test_replace_section():
    cfg = RunConfig().replace_section("svm", c_reg=2.5)
    assert cfg.svm.c_reg == 2.5
    assert RunConfig().svm.c_reg == 10.0


def test_load_from_file(tmp_path):
    path = tmp_path / "cfg.json"
    write_json(path, {"boost": {"trials": 4}})
    cfg = RunConfig.load(path)
    assert cfg.boost.trials == 4


def test_validation_inside_nested_dataclass():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"hof": {"grid_size": 0}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"synth": {"class_count": 1}})
