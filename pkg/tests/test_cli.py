import subprocess
import sys

import numpy as np
import pytest

from specdiff.cli import main
from specdiff.data import read_samples_csv

TINY = [
    "--set", "model.C=8", "--set", "model.heads=2", "--set", "model.blocks=1", "--set", "model.time_embed_dim=8",
    "--set", "schedule.T=50", "--set", "schedule.beta_max=0.2",
    "--set", "train.steps=6", "--set", "train.batch_size=4", "--set", "train.log_every=3",
    "--set", "data.n_samples=50", "--set", "data.L=8", "--set", "data.D=2",
]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["train", "--out", str(out), "--seed", "1", *TINY]) == 0
    return out


def test_gen_data_is_seeded(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("--seed", 4, "gen-data", "--n", 5, "--L", 12, "--D", 3, "--out", a) == 0
    assert run("gen-data", "--n", 5, "--L", 12, "--D", 3, "--out", b, "--seed", 4) == 0
    assert a.read_text().splitlines()[2:] == b.read_text().splitlines()[2:]
    assert a.read_text().startswith("# format: specdiff-samples v1\n# command: specdiff ")
    assert read_samples_csv(a).samples.shape == (5, 12, 3)


def test_train_and_sample(trained, tmp_path, capsys):
    assert (trained / "final.bin").exists()
    s1, s2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
    for s in (s1, s2):
        assert run("sample", "--checkpoint", trained / "final.bin", "--n", 3, "--seed", 2, "--out", s) == 0
    assert s1.read_bytes().replace(b"s1.csv", b"") == s2.read_bytes().replace(b"s2.csv", b"")
    assert run("sample", "--checkpoint", trained / "final.bin", "--n", 2, "--sampler", "sde", "--sde-steps", 2, "--out", tmp_path / "e.csv") == 0
    assert np.all(np.isfinite(read_samples_csv(tmp_path / "e.csv").samples))


def test_metrics_table(trained, tmp_path, capsys):
    real, synth = tmp_path / "r.csv", tmp_path / "f.csv"
    run("gen-data", "--n", 20, "--L", 8, "--D", 2, "--out", real)
    run("sample", "--checkpoint", trained / "final.bin", "--n", 4, "--out", synth)
    capsys.readouterr()
    assert run("metrics", "--real", real, "--synth", synth, "--out", tmp_path / "m.tsv") == 0
    assert capsys.readouterr().out.startswith("metric\tvalue")
    assert (tmp_path / "m.tsv").read_text().startswith("# format: specdiff-table v1\n# command: ")


def test_verify_subset(capsys):
    assert run("verify", "--checks", "loss_equivalence,trig_orthogonality", "--seed", 0) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("check\tparams")
    assert any("expect-fail" in line and "\tfail\t" in line for line in out)


def test_flops(tmp_path, capsys):
    png = tmp_path / "f.png"
    assert run("flops", "--L", "24,256", "--width-rule", "const:64", "--plot", png) == 0
    out = capsys.readouterr().out
    assert "\n256\t64\t8388608\t4194304\t" in out
    assert png.exists()


def test_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        run("train", "--bogus")
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        run()
    assert e.value.code == 2
    assert run("train", "--out", tmp_path, "--set", "schedule.T=0") == 1
    assert "schedule.T" in capsys.readouterr().err
    assert run("flops", "--width-rule", "half") == 1
    assert run("sample", "--checkpoint", tmp_path / "missing.bin") == 2
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"garbage!")
    assert run("sample", "--checkpoint", bad) == 1


def test_config_file_flag(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("model.C = 8\nmodel.heads = 2\nmodel.blocks = 1\nmodel.time_embed_dim = 8\nschedule.T = 50\n"
                   "schedule.beta_max = 0.2\ntrain.steps = 2\ntrain.batch_size = 2\ndata.n_samples = 10\ndata.L = 8\ndata.D = 1\n")
    assert run("--config", cfg, "train", "--out", tmp_path / "r") == 0
    assert (tmp_path / "r" / "final.bin").exists()


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "specdiff.cli", "flops", "--L", "24"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("# 1 multiply-add")
