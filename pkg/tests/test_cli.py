import numpy as np
import pytest

from dehazegan.cli import load_pair_dir, main
from dehazegan.imageio import load_image, save_image
from dehazegan.trainer import LOG_COLUMNS


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_no_arguments_is_usage_error(capsys):
    code, _, err = run(capsys)
    assert code == 2 and "usage:" in err


@pytest.mark.parametrize("argv", [["frobnicate"], ["eval", "--bogus"], ["train"], ["priors"]])
def test_bad_invocations_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "usage:" in err


def test_help_exits_zero(capsys):
    assert run(capsys, "--help")[0] == 0


def test_priors_on_constant_image(tmp_path, capsys):
    save_image(np.full((9, 9, 3), 0.6), tmp_path / "flat.ppm")
    assert run(capsys, "priors", tmp_path / "flat.ppm", "--out", tmp_path / "p")[0] == 0
    assert (load_image(tmp_path / "p" / "flat_hf.ppm") == 0).all()
    assert np.allclose(load_image(tmp_path / "p" / "flat_lf.ppm"), 153 / 255)


def test_synthesize_and_augment(tmp_path, capsys):
    clean = tmp_path / "clean"
    clean.mkdir()
    rng = np.random.default_rng(0)
    for name in ("a", "b"):
        save_image(rng.uniform(size=(32, 24, 3)), clean / f"{name}.ppm")
    assert run(capsys, "synthesize", "--clean", clean, "--out", tmp_path / "syn")[0] == 0
    for sub in ("hazy", "clean", "depth"):
        assert sorted(p.name for p in (tmp_path / "syn" / sub).iterdir()) == ["a.ppm", "b.ppm"]
    assert len(load_pair_dir(tmp_path / "syn")) == 2
    assert run(capsys, "augment", "--pairs", tmp_path / "syn", "--out", tmp_path / "aug")[0] == 0
    mask = load_image(tmp_path / "aug" / "mask" / "a.ppm")
    assert set(np.unique(mask)) <= {0.0, 1.0} and mask.any()


def test_orphan_pair_is_reported(tmp_path, capsys):
    assert run(capsys, "synthesize", "--scenes", "2", "--size", "32", "--out", tmp_path / "d")[0] == 0
    (tmp_path / "d" / "clean" / "scene001.ppm").unlink()
    code, _, err = run(capsys, "eval", "--checkpoint", tmp_path / "none.ckpt", "--pairs", tmp_path / "d")
    assert code == 1
    code, _, err = run(capsys, "augment", "--pairs", tmp_path / "d", "--out", tmp_path / "x")
    assert code == 1 and "hazy/scene001" in err


def test_train_eval_infer_small(tmp_path, capsys):
    assert run(capsys, "synthesize", "--scenes", "3", "--size", "32", "--out", tmp_path / "d")[0] == 0
    cfg = tmp_path / "toy.cfg"
    cfg.write_text("patch_size = 32\nbatch_size = 2\nwidth_factor = 16\nsteps = 3\ncheckpoint_every = 2\neval_every = 2\n")
    code, _, err = run(capsys, "train", "--config", cfg, "--data", tmp_path / "d", "--val", tmp_path / "d", "--out", tmp_path / "run")
    assert code == 0, err
    lines = (tmp_path / "run" / "train.log").read_text().splitlines()
    assert [len(line.split("\t")) for line in lines] == [4, 6, 4]
    assert (tmp_path / "run" / "step000002.ckpt").exists()
    code, out, _ = run(capsys, "eval", "--checkpoint", tmp_path / "run" / "final.ckpt", "--pairs", tmp_path / "d")
    assert code == 0 and out.splitlines()[3].startswith("MEAN\t")
    code, _, _ = run(capsys, "infer", "--checkpoint", tmp_path / "run" / "final.ckpt", "--input", tmp_path / "d" / "hazy", "--out", tmp_path / "out")
    assert code == 0 and len(list((tmp_path / "out").iterdir())) == 3
    assert len(LOG_COLUMNS) == 3


def test_config_errors_exit_2(tmp_path, capsys):
    code, _, err = run(capsys, "train", "--data", tmp_path, "--out", tmp_path / "r", "--set", "lr_g=fast")
    assert code == 2 and "lr_g: expected number" in err


def test_missing_checkpoint_is_runtime_error(tmp_path, capsys):
    code, _, err = run(capsys, "infer", "--checkpoint", tmp_path / "nope", "--input", tmp_path, "--out", tmp_path / "o")
    assert code == 1 and err
