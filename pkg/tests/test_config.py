import pytest
import torch

from layoutflow.errors import InvalidConfig
from layoutflow.loaders import GLOBAL_CONFIG, create_from_config, get_by_path, load_config, parse_cli, register
from layoutflow.utils.seeding import STAGE_SAMPLE, STAGE_TRAIN, derive_seed, numpy_rng, torch_generator
from layoutflow.utils.smart_defaults import infer_config_path


def test_include_is_resolved_relative_and_overridden(tmp_path):
    (tmp_path / "base").mkdir()
    (tmp_path / "base" / "common.yml").write_text("seed: 1\ntrain:\n  lr: 0.1\n  epochs: 5\n")
    (tmp_path / "run.yml").write_text("__include__: [base/common.yml]\ntrain:\n  epochs: 2\n")
    cfg = load_config(tmp_path / "run.yml")
    assert cfg == {"seed": 1, "train": {"lr": 0.1, "epochs": 2}}


def test_load_config_errors(tmp_path):
    bad = tmp_path / "bad.yml"
    bad.write_text("- a\n- b\n")
    with pytest.raises(InvalidConfig):
        load_config(bad)
    with pytest.raises(InvalidConfig):
        load_config(tmp_path / "config.toml")
    empty = tmp_path / "empty.yml"
    empty.write_text("")
    assert load_config(empty) == {}


def test_parse_cli():
    assert parse_cli(["a.c=3", "b=10", "a.d=[0.2, 1]", "name=desk"]) == {
        "a": {"c": 3, "d": [0.2, 1]},
        "b": 10,
        "name": "desk",
    }
    assert parse_cli(None) == {}
    with pytest.raises(InvalidConfig):
        parse_cli(["a.c"])
    assert get_by_path({"a": {"b": 2}}, "a.b") == 2
    assert get_by_path({"a": {"b": 2}}, "a.x", "dflt") == "dflt"


def test_registry():
    @register("test_widgets", name="knob")
    class Knob:
        def __init__(self, size=1):
            self.size = size

    try:
        assert create_from_config("test_widgets", "knob").size == 1
        assert create_from_config("test_widgets", {"type": "knob", "size": 3}).size == 3
        assert create_from_config("test_widgets", {"type": "knob", "size": 3}, size=4).size == 4
        with pytest.raises(InvalidConfig):
            create_from_config("test_widgets", "dial")
        with pytest.raises(InvalidConfig):
            create_from_config("test_widgets", {"size": 3})
        with pytest.raises(AssertionError):
            register("test_widgets", name="knob")(Knob)
    finally:
        GLOBAL_CONFIG.pop("test_widgets", None)


def test_packaged_configs_are_found():
    assert infer_config_path("sweep_desk").name == "sweep_desk.yml"
    assert infer_config_path("match.yml").name == "match.yml"
    with pytest.raises(InvalidConfig):
        infer_config_path("nope")


def test_seeds_are_split_by_stage_and_index():
    assert derive_seed(7, STAGE_TRAIN, 0) == derive_seed(7, STAGE_TRAIN, 0)
    seeds = {derive_seed(7, stage, index) for stage in range(7) for index in range(5)}
    assert len(seeds) == 35
    assert derive_seed(8, STAGE_TRAIN, 0) != derive_seed(7, STAGE_TRAIN, 0)
    assert all(0 <= s < 2**63 for s in seeds)

    assert numpy_rng(1, STAGE_SAMPLE, 2).random() == numpy_rng(1, STAGE_SAMPLE, 2).random()
    a = torch.randn(4, generator=torch_generator(1, STAGE_SAMPLE, 2))
    b = torch.randn(4, generator=torch_generator(1, STAGE_SAMPLE, 2))
    assert torch.equal(a, b)
