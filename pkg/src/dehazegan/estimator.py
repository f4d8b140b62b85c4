"""scikit-learn style wrapper around the training loop.

``fit`` trains on images, ``predict``/``transform`` dehaze them and
``score`` reports mean PSNR against clean references.
"""

from __future__ import annotations

from dataclasses import fields

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .metrics import psnr
from .trainer import dehaze, resume_config, train_loop
from .validation import check_image_collection

_CONFIG_KEYS = tuple(f.name for f in fields(RunConfig))


class DehazeGAN(TransformerMixin, BaseEstimator):
    """Prior-guided dehazing GAN.

    Every hyperparameter mirrors a :class:`RunConfig` field. With
    ``warm_start=True`` a second ``fit`` continues from the fitted state
    until the (possibly raised) ``steps`` total is reached.
    """

    def __init__(
        self,
        patch_size=64,
        batch_size=4,
        lr_g=1e-4,
        lr_d=3e-4,
        lr_schedule="constant",
        beta1=0.5,
        beta2=0.9,
        lambda1=0.5,
        lambda2=0.5,
        glda_max_patch=50,
        glda_min_patch=8,
        glda_max_patches=8,
        glda_prob=0.5,
        glda=True,
        saca=True,
        msfa=True,
        hf_prior=True,
        lf_prior=True,
        simple_disc=False,
        non_saturating=False,
        d_steps=1,
        seed=0,
        steps=1000,
        width_factor=4,
        eval_every=50,
        checkpoint_every=100,
        beta_min=0.4,
        beta_max=1.6,
        airlight_min=0.7,
        airlight_max=1.0,
        depth_max=1.5,
        warm_start=False,
    ):
        self.patch_size = patch_size
        self.batch_size = batch_size
        self.lr_g = lr_g
        self.lr_d = lr_d
        self.lr_schedule = lr_schedule
        self.beta1 = beta1
        self.beta2 = beta2
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.glda_max_patch = glda_max_patch
        self.glda_min_patch = glda_min_patch
        self.glda_max_patches = glda_max_patches
        self.glda_prob = glda_prob
        self.glda = glda
        self.saca = saca
        self.msfa = msfa
        self.hf_prior = hf_prior
        self.lf_prior = lf_prior
        self.simple_disc = simple_disc
        self.non_saturating = non_saturating
        self.d_steps = d_steps
        self.seed = seed
        self.steps = steps
        self.width_factor = width_factor
        self.eval_every = eval_every
        self.checkpoint_every = checkpoint_every
        self.beta_min = beta_min
        self.beta_max = beta_max
        self.airlight_min = airlight_min
        self.airlight_max = airlight_max
        self.depth_max = depth_max
        self.warm_start = warm_start

    def to_config(self) -> RunConfig:
        return RunConfig(**{k: getattr(self, k) for k in _CONFIG_KEYS})

    def fit(self, X, y=None):
        """Train on clean images ``X`` (haze is synthesized), or on hazy ``X`` paired with clean ``y``."""
        cfg = self.to_config()
        X = check_image_collection(X, "X")
        if y is None:
            pool = X
        else:
            y = check_image_collection(y, "y")
            if len(y) != len(X):
                raise ValueError(f"X and y hold different numbers of images: {len(X)} vs {len(y)}")
            for i, (h, c) in enumerate(zip(X, y)):
                if h.shape != c.shape:
                    raise ValueError(f"pair {i}: hazy {h.shape} and clean {c.shape} differ")
            pool = list(zip(X, y))
        state = None
        if self.warm_start and hasattr(self, "state_"):
            state = self.state_
            resume_config(state, cfg)
        history = list(getattr(self, "history_", [])) if state is not None else []
        self.state_, log = train_loop(cfg, pool, state=state)
        self.history_ = history + log
        self.n_steps_ = self.state_.step
        return self

    def _check_fitted(self):
        if not hasattr(self, "state_"):
            raise NotFittedError("DehazeGAN is not fitted yet; call fit first")

    def predict(self, X):
        """Dehaze each image; returns a list (or an array for stacked input)."""
        self._check_fitted()
        stacked = isinstance(X, np.ndarray) and X.ndim == 4
        out = dehaze(self.state_.generator, check_image_collection(X, "X"))
        return np.stack(out) if stacked else out

    def transform(self, X):
        return self.predict(X)

    def score(self, X, y):
        """Mean PSNR (dB) of the dehazed ``X`` against clean ``y``."""
        restored = self.predict(X)
        clean = check_image_collection(y, "y")
        return float(np.mean([psnr(r, c) for r, c in zip(restored, clean)]))

    def save(self, path) -> None:
        self._check_fitted()
        save_checkpoint(self.state_, path)

    @classmethod
    def load(cls, path) -> DehazeGAN:
        state = load_checkpoint(path)
        est = cls(**state.config.to_dict())
        est.state_ = state
        est.history_ = []
        est.n_steps_ = state.step
        return est
