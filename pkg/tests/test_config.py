import math
from dataclasses import replace

import numpy as np
import pytest
import yaml

from bevdet.config import PRESETS, STREAMS, PipelineConfig, config_from_dict, config_to_yaml, load_config, substream, substream_seed
from bevdet.errors import ConfigError

DEFAULT_YAML = __import__("pathlib").Path(__import__("bevdet").__file__).parent / "data" / "default.yaml"


def test_default_yaml_matches_builtin():
    assert load_config(DEFAULT_YAML) == PipelineConfig()


def test_yaml_roundtrip_custom(tmp_path):
    cfg = config_from_dict({"preset": "BEVDet-STTiny", "seed": 9, "bda_enabled": True, "mode": "train", "scene": {"visibility_view": None, "n_boxes": [2, 3]}})
    p = tmp_path / "c.yaml"
    p.write_text(config_to_yaml(cfg))
    back = load_config(p)
    assert back == cfg and back.hash() == cfg.hash()


def test_preset_sets_channels():
    for name, c in PRESETS.items():
        assert config_from_dict({"preset": name}).encoder.channels == c


def test_degrees_in_file():
    cfg = config_from_dict({"bda": {"rot_range_deg": [-10, 10]}})
    assert cfg.bda.rot_range == pytest.approx((math.radians(-10), math.radians(10)))


@pytest.mark.parametrize(
    "raw",
    [
        {"bogus": 1},
        {"grid": {"cell": 0.8}},
        {"preset": "BEVDet-R9000"},
        {"mode": "eval"},
        {"kernel": "gpu"},
        {"ida_enabled": "yes"},
        {"ida": {"crop_size_px": [700, 256]}},
        {"head": {"nms_radius_m": [1.0]}},
    ],
)
def test_rejects(raw):
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_rejects_off_center_grid_with_bda_rotation():
    with pytest.raises(ConfigError):
        config_from_dict({"bda_enabled": True, "grid": {"x_range_m": [0, 51.2]}})


def test_source_size_must_match_scene():
    with pytest.raises(ConfigError):
        replace(PipelineConfig(), scene=replace(PipelineConfig().scene, image_size=(800, 448)))


def test_bad_yaml(tmp_path):
    (tmp_path / "c.yaml").write_text("a: [")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "c.yaml")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="nope.yaml"):
        load_config(tmp_path / "nope.yaml")


def test_hash_tracks_content():
    a = PipelineConfig()
    assert a.hash() == PipelineConfig().hash()
    assert a.hash() != replace(a, seed=1).hash()


def test_substreams():
    assert STREAMS == ("scenegen", "ida", "bda")
    a = substream(0, "ida", 3, 1).random(4)
    assert np.array_equal(a, substream(0, "ida", 3, 1).random(4))
    assert not np.array_equal(a, substream(0, "bda", 3, 1).random(4))
    assert not np.array_equal(a, substream(0, "ida", 3, 2).random(4))
    assert substream_seed(1, "scenegen", 0) == substream_seed(1, "scenegen", 0)
    with pytest.raises(ConfigError):
        substream(0, "encoder")
