import pytest

from elvc.config import PipelineConfig, load_config, parse_config
from elvc.errors import ConfigError


def test_defaults():
    cfg = PipelineConfig()
    assert (cfg.stft.fft_size, cfg.stft.hop, cfg.mel.n_mels, cfg.mcc.order) == (512, 160, 80, 25)
    assert (cfg.wsola.frame_len, cfg.wsola.synthesis_hop, cfg.wsola.tolerance) == (512, 256, 256)
    assert cfg.train.batch_size == 16 and cfg.train.learning_rate == 0.0005


def test_parse_overrides():
    cfg = parse_config("# comment\nseed=7\nwsola.tolerance=128\ntrain.epochs=3\npaths.list=x.csv\n")
    assert cfg.seed == 7
    assert cfg.wsola.tolerance == 128
    assert cfg.train.epochs == 3
    assert cfg.paths == {"list": "x.csv"}


@pytest.mark.parametrize("text,key", [("stft.bogus=1", "stft.bogus"), ("nosuch.x=1", "nosuch.x"), ("train.epochs=abc", "train.epochs")])
def test_bad_keys_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key


def test_missing_input_path(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text(f"paths.list={tmp_path / 'absent.csv'}\n")
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.key == "paths.list"


def test_with_overrides_ignores_none():
    cfg = PipelineConfig().with_overrides("train", epochs=None, seed=4)
    assert cfg.train.seed == 4 and cfg.train.epochs == 100
