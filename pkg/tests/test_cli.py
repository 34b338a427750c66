"""End-to-end CLI: pipeline smoke, exit codes, byte determinism."""

import numpy as np
import pytest

from otmap.cli import main
from otmap.data import save_csv
from otmap.train import TrainConfig, save_config


def tiny_config(path, **kw):
    base = dict(minibatch=32, widths=(8, 8), max_outer_steps=30,
                eval_every=10, eval_size=32, seed=5)
    base.update(kw)
    save_config(TrainConfig(**base), path)
    return path


def run_train(tmp_path, out_name="run", n=64, benchmark="exp", seed=None):
    cfg = tiny_config(tmp_path / "tiny.cfg")
    out = tmp_path / out_name
    args = ["train", "--config", str(cfg), "--out", str(out),
            "--benchmark", benchmark, "--dim", "2", "--n", str(n)]
    if seed is not None:
        args += ["--seed", str(seed)]
    assert main(args) == 0
    return out


def test_pipeline_train_eval_plot_audit(tmp_path, capsys):
    out = run_train(tmp_path)
    for name in ("config.cfg", "run.json", "P.csv", "Q.csv", "pushforward.csv",
                 "metrics.csv", "generator.ckpt", "discriminator.ckpt"):
        assert (out / name).exists(), name

    assert main(["eval", "--run", str(out), "--eval-n", "40"]) == 0
    report = (out / "eval_report.csv").read_text().splitlines()
    assert report[0].startswith("n,d,seed,steps,holdout_mse")

    assert main(["plot", "--run", str(out)]) == 0
    for name in ("fig1_scatter.svg", "fig1_arrows.svg", "fig3_mse.svg",
                 "fig1_scatter.csv", "fig1_arrows.csv", "fig3_mse.csv"):
        assert (out / name).exists(), name

    assert main(["audit", "--checkpoint", str(out / "generator.ckpt"),
                 "--pairs", "2000"]) == 0
    captured = capsys.readouterr().out
    assert "max_ratio=" in captured


def test_baseline_identical_clouds_zero_cost(tmp_path, capsys):
    rng = np.random.default_rng(0)
    cloud = rng.normal(size=(20, 2))
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    save_csv(cloud, a)
    save_csv(cloud, b)
    assert main(["baseline", "--x", str(a), "--y", str(b), "--cost", "w2"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("cost=0.0")
    assert main(["baseline", "--x", str(a), "--y", str(b), "--cost", "w1",
                 "--out", str(tmp_path / "m.csv")]) == 0
    assert (tmp_path / "m.csv").read_text().splitlines()[1] == "i,sigma_i,cost_i"


def test_exit_codes(tmp_path):
    # unknown flag -> argparse usage error (SystemExit 2)
    with pytest.raises(SystemExit) as exc:
        main(["train", "--bogus-flag", "x"])
    assert exc.value.code == 2
    # malformed config -> 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("no_such_key = 3\n")
    assert main(["train", "--config", str(bad), "--out", str(tmp_path / "r")]) == 2
    # missing data file -> 3
    assert main(["baseline", "--x", str(tmp_path / "missing.csv"),
                 "--y", str(tmp_path / "missing.csv")]) == 3
    # mismatched clouds -> 3
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    save_csv(np.zeros((3, 2)), a)
    save_csv(np.zeros((4, 2)), b)
    assert main(["baseline", "--x", str(a), "--y", str(b)]) == 3
    # corrupt checkpoint -> 3
    ckpt = tmp_path / "fake.ckpt"
    ckpt.write_text("garbage\n")
    assert main(["audit", "--checkpoint", str(ckpt)]) == 3


def test_train_requires_out(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--benchmark", "exp"])
    assert exc.value.code == 2


def test_train_runs_deterministic(tmp_path):
    out1 = run_train(tmp_path, "run1")
    out2 = run_train(tmp_path, "run2")
    for name in ("metrics.csv", "generator.ckpt", "discriminator.ckpt",
                 "P.csv", "Q.csv", "pushforward.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_plot_byte_deterministic(tmp_path):
    out = run_train(tmp_path)
    fig1 = tmp_path / "figs1"
    fig2 = tmp_path / "figs2"
    assert main(["plot", "--run", str(out), "--out", str(fig1)]) == 0
    assert main(["plot", "--run", str(out), "--out", str(fig2)]) == 0
    for name in ("fig1_scatter.svg", "fig1_arrows.svg", "fig3_mse.svg"):
        assert (fig1 / name).read_bytes() == (fig2 / name).read_bytes(), name


def test_plot_missing_inputs_listed(tmp_path, capsys):
    empty = tmp_path / "empty_run"
    empty.mkdir()
    assert main(["plot", "--run", str(empty)]) == 3
    err = capsys.readouterr().err
    assert "P.csv" in err and "metrics.csv" in err


def test_approx_subcommand(tmp_path, capsys):
    assert main(["approx", "--target", "affine", "--width", "8", "--steps", "50",
                 "--out", str(tmp_path / "probe.csv")]) == 0
    assert "sup_error=" in capsys.readouterr().out
    lines = (tmp_path / "probe.csv").read_text().splitlines()
    assert lines[0] == "target,width,steps,sup_error"


def test_train_from_csv_clouds(tmp_path):
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, (64, 2))
    y = rng.uniform(-1, 1, (64, 2)) + 0.5
    xp, yp = tmp_path / "x.csv", tmp_path / "y.csv"
    save_csv(x, xp)
    save_csv(y, yp)
    cfg = tiny_config(tmp_path / "tiny.cfg")
    out = tmp_path / "csvrun"
    assert main(["train", "--config", str(cfg), "--out", str(out),
                 "--x", str(xp), "--y", str(yp)]) == 0
    assert main(["eval", "--run", str(out), "--eval-n", "32"]) == 0
    report = (out / "eval_report.csv").read_text().splitlines()[1]
    assert report.split(",")[4] == "nan"  # no ground truth for raw clouds
