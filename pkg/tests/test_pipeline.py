import io

import numpy as np
import pytest

from specdiff import checkpoint as ckpt
from specdiff.config import ConfigError, RunConfig, override
from specdiff.pipeline import LOG_HEADER, ablation, sample_from_checkpoint, smoothed, train


def tiny(**kw):
    base = dict(
        model__C=8, model__heads=2, model__blocks=1, model__time_embed_dim=8,
        schedule__T=100, schedule__beta_max=0.1,
        train__steps=20, train__batch_size=8, train__checkpoint_every=10, train__log_every=5,
        data__n_samples=100, data__L=8, data__D=2, sampler__n=4, sampler__sde_steps=5,
    )
    base.update(kw)
    return override(RunConfig(), **base)


def test_train_writes_log_and_checkpoints(tmp_path):
    out = io.StringIO()
    res = train(tiny(), tmp_path, log_stream=out, command="specdiff train --out x")
    assert sorted(p.name for p in tmp_path.glob("*.bin")) == ["ckpt_0000010.bin", "final.bin"]
    lines = (tmp_path / "train_log.tsv").read_text().splitlines()
    assert lines[0] == "# format: specdiff-trainlog v1"
    assert lines[1] == "# command: specdiff train --out x"
    assert lines[2] == LOG_HEADER
    assert [int(r.split("\t")[0]) for r in lines[3:]] == [5, 10, 15, 20]
    assert out.getvalue().splitlines()[0] == LOG_HEADER
    assert len(res.losses) == 20 and ckpt.load(res.checkpoint_path).step == 20


def test_resume_is_bitwise_identical(tmp_path):
    full = train(tiny(), tmp_path / "full", log_stream=None)
    train(tiny(train__steps=10), tmp_path / "part", log_stream=None)
    resumed = train(tiny(), tmp_path / "part", resume=str(tmp_path / "part" / "final.bin"), log_stream=None)
    a, b = ckpt.load(full.checkpoint_path), ckpt.load(resumed.checkpoint_path)
    assert a.step == b.step == 20
    assert all(a.params[k].tobytes() == b.params[k].tobytes() for k in a.params)
    assert all(a.opt_state.v[k].tobytes() == b.opt_state.v[k].tobytes() for k in a.params)
    log = (tmp_path / "part" / "train_log.tsv").read_text().splitlines()
    assert [int(r.split("\t")[0]) for r in log[3:]] == [5, 10, 15, 20]


def test_resume_rejects_changed_model(tmp_path):
    train(tiny(train__steps=5), tmp_path, log_stream=None)
    with pytest.raises(ConfigError, match="model.C"):
        train(tiny(model__C=16), tmp_path, resume=str(tmp_path / "final.bin"), log_stream=None)


def test_sampling_is_seeded_and_sane(tmp_path):
    res = train(tiny(), tmp_path, log_stream=None)
    a, _ = sample_from_checkpoint(res.checkpoint_path, 6, seed=3)
    b, _ = sample_from_checkpoint(res.checkpoint_path, 6, seed=3)
    assert a.shape == (6, 8, 2) and a.tobytes() == b.tobytes()
    c, _ = sample_from_checkpoint(res.checkpoint_path, 3, overrides=[("sampler.kind", "sde"), ("sampler.sde_steps", "2")])
    assert np.all(np.isfinite(c))
    with pytest.raises(ConfigError):
        sample_from_checkpoint(res.checkpoint_path, 3, overrides=[("sampler.kind", "gibbs")])


def test_data_shape_mismatch_is_reported(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("\n".join(f"{i},{i * 2},{i * 3}" for i in range(40)) + "\n")
    with pytest.raises(ConfigError, match="data.D"):
        train(tiny(data__source="csv", data__path=str(path)), None, log_stream=None)


def test_smoothed_block_means():
    np.testing.assert_array_equal(smoothed(np.arange(10.0), 4), [1.5, 5.5])


def test_ablation_returns_one_report_per_seed():
    out = ablation(tiny(train__steps=3), seeds=(0, 1), n_samples=4)
    assert set(out) == {"interactive", "decoupled"}
    assert all(len(v) == 2 for v in out.values())
