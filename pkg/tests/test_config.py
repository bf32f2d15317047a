import pytest

from specdiff.config import (
    RESUMABLE_KEYS,
    ConfigError,
    RunConfig,
    apply_overrides,
    config_diff,
    load_config,
    override,
    parse_config,
)


def test_text_roundtrip():
    cfg = override(RunConfig(), model__C=16, model__heads=2, sampler__kind="sde", data__header=True, seed=9)
    assert parse_config(cfg.to_text()) == cfg


def test_comments_and_blank_lines(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# smoke run\n\ntrain.steps = 20\nschedule.kind = cosine\n")
    cfg = load_config(p)
    assert cfg.train.steps == 20 and cfg.schedule.kind == "cosine"


@pytest.mark.parametrize(
    "text,needle",
    [
        ("model.width = 3\n", "model.width"),
        ("nosection = 3\n", "nosection"),
        ("train.steps = many\n", "train.steps (line 1)"),
        ("\n\nschedule.T = 0\n", "schedule.T"),
        ("model.heads = 5\n", "model.heads"),
        ("data.source = csv\n", "data.path"),
        ("just words\n", "line 1"),
        ("data.source = single_frequency\ndata.frequency_bin = 13\n", "data.frequency_bin"),
    ],
)
def test_errors_name_the_key(text, needle):
    with pytest.raises(ConfigError, match=needle.replace("(", r"\(").replace(")", r"\)")):
        parse_config(text)


def test_bool_parsing():
    assert apply_overrides(RunConfig(), [("sampler.final_denoise", "no")]).sampler.final_denoise is False
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), [("sampler.final_denoise", "maybe")])


def test_diff_and_resumable_keys():
    a = RunConfig()
    b = override(a, train__steps=900, sampler__kind="sde", model__C=64)
    assert config_diff(a, b) == ["model.C", "train.steps", "sampler.kind"]
    assert config_diff(a, b, ignore=RESUMABLE_KEYS) == ["model.C"]
