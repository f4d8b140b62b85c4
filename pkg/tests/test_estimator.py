import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dehazegan.config import RunConfig
from dehazegan.estimator import DehazeGAN
from dehazegan.tensor import ShapeError
from conftest import make_pairs

TINY = dict(patch_size=32, batch_size=2, width_factor=16, steps=2)


def test_params_mirror_run_config():
    est = DehazeGAN()
    params = est.get_params()
    assert params.pop("warm_start") is False
    assert params == RunConfig().to_dict()
    assert clone(DehazeGAN(seed=4, saca=False)).get_params()["saca"] is False


def test_invalid_hyperparameters_surface_at_fit():
    with pytest.raises(ValueError):
        DehazeGAN(patch_size=30).fit([np.zeros((32, 32, 3))])


def test_unfitted_predict_raises():
    with pytest.raises(NotFittedError):
        DehazeGAN().predict([np.zeros((32, 32, 3))])


def test_fit_predict_score_paired():
    pairs = make_pairs(3, 32)
    hazy = np.stack([h for h, _ in pairs])
    clean = np.stack([c for _, c in pairs])
    est = DehazeGAN(**TINY).fit(hazy, clean)
    assert est.n_steps_ == 2 and len(est.history_) == 2
    out = est.predict(hazy)
    assert isinstance(out, np.ndarray) and out.shape == hazy.shape
    assert 0 < out.min() and out.max() < 1
    np.testing.assert_array_equal(est.transform(hazy), out)
    assert np.isfinite(est.score(hazy, clean))


def test_fit_on_clean_pool_and_odd_sizes():
    est = DehazeGAN(**TINY).fit([c for _, c in make_pairs(2, 40)])
    (restored,) = est.predict([np.full((21, 35, 3), 0.4)])
    assert restored.shape == (21, 35, 3)


def test_bad_inputs_rejected():
    est = DehazeGAN(**TINY)
    with pytest.raises(ShapeError):
        est.fit([np.zeros((32, 32))])
    with pytest.raises(ValueError):
        est.fit([np.zeros((32, 32, 3))], [np.zeros((32, 32, 3))] * 2)
    with pytest.raises(ValueError):
        est.fit([np.full((32, 32, 3), 2.0)])


def test_warm_start_continues_training():
    data = [c for _, c in make_pairs(2, 32)]
    cold = DehazeGAN(**{**TINY, "steps": 4}).fit(data)
    warm = DehazeGAN(**TINY, warm_start=True).fit(data)
    warm.set_params(steps=4).fit(data)
    assert warm.n_steps_ == 4
    assert [e["loss_g"] for e in warm.history_] == [e["loss_g"] for e in cold.history_]


def test_save_load(tmp_path):
    pairs = make_pairs(2, 32)
    est = DehazeGAN(**TINY).fit([c for _, c in pairs])
    est.save(tmp_path / "m.ckpt")
    again = DehazeGAN.load(tmp_path / "m.ckpt")
    assert again.get_params() == est.get_params()
    h = [pairs[0][0]]
    np.testing.assert_array_equal(again.predict(h)[0], est.predict(h)[0])
