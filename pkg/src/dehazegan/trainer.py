"""Alternating adversarial training, batch construction and evaluation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .augment import glda, random_flips
from .config import ConfigError, RunConfig
from .discriminator import PatchDiscriminator
from .generator import Generator
from .haze import apply_haze, sample_haze_params
from .losses import LossWeights, discriminator_loss, generator_loss
from .metrics import psnr, ssim
from .optim import Adam
from .priors import prior_inputs_t
from .rng import RngStream, stream
from .tensor import NonFiniteError, ShapeError, Tensor, no_grad
from .validation import to_hwc, to_nchw

logger = logging.getLogger(__name__)

SLOT_CHANNELS = {"lf": 6, "hf": 6, "simple": 3}
LOG_COLUMNS = ("loss_g", "loss_d_lf", "loss_d_hf")


def disc_slots(cfg: RunConfig) -> list[str]:
    """Active discriminators; the plain 3-channel one only stands in when both priors are off."""
    slots = [s for s, on in (("lf", cfg.lf_prior), ("hf", cfg.hf_prior)) if on]
    if not slots and cfg.simple_disc:
        slots = ["simple"]
    return slots


def disc_inputs(x: Tensor, slots: Sequence[str]) -> dict[str, Tensor]:
    out = {}
    if "lf" in slots or "hf" in slots:
        lf_in, hf_in = prior_inputs_t(x)
        if "lf" in slots:
            out["lf"] = lf_in
        if "hf" in slots:
            out["hf"] = hf_in
    if "simple" in slots:
        out["simple"] = x
    return out


@dataclass
class ModelState:
    config: RunConfig
    generator: Generator
    discriminators: dict[str, PatchDiscriminator]
    opt_g: Adam
    opt_d: dict[str, Adam]
    step: int = 0

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def toggles(self) -> dict[str, bool]:
        return self.config.toggles()


def build_generator(cfg: RunConfig, rng: np.random.Generator | None = None) -> Generator:
    rng = rng if rng is not None else stream(cfg.seed, "init/generator")
    return Generator(rng, base_width=32 // cfg.width_factor, saca=cfg.saca, msfa=cfg.msfa)


def init_state(cfg: RunConfig) -> ModelState:
    gen = build_generator(cfg)
    discs = {
        slot: PatchDiscriminator(stream(cfg.seed, f"init/d_{slot}"), SLOT_CHANNELS[slot], cfg.width_factor)
        for slot in disc_slots(cfg)
    }
    opt_g = Adam(gen.parameters(), cfg.lr_g, cfg.beta1, cfg.beta2)
    opt_d = {s: Adam(d.parameters(), cfg.lr_d, cfg.beta1, cfg.beta2) for s, d in discs.items()}
    return ModelState(cfg, gen, discs, opt_g, opt_d)


ARCH_KEYS = ("width_factor", "seed")


def resume_config(state: ModelState, cfg: RunConfig) -> None:
    """Adopt ``cfg`` for a resumed run; toggles and architecture must not change."""
    old = state.config
    changed = [k for k in (*old.toggles(), *ARCH_KEYS) if getattr(old, k) != getattr(cfg, k)]
    if changed:
        raise ConfigError(f"cannot change {', '.join(changed)} when resuming")
    state.config = cfg
    set_learning_rates(state)
    for opt in [state.opt_g, *state.opt_d.values()]:
        opt.state.beta1, opt.state.beta2 = cfg.beta1, cfg.beta2


# ---------------------------------------------------------------------------
# batches
# ---------------------------------------------------------------------------

@dataclass
class Batch:
    hazy: np.ndarray  # N x 3 x P x P
    clean: np.ndarray
    tags: list[str] = field(default_factory=list)


def _crop(rng: np.random.Generator, images: Sequence[np.ndarray], size: int) -> list[np.ndarray]:
    h, w = images[0].shape[:2]
    if h < size or w < size:
        raise ShapeError(f"pool image {h}x{w} smaller than patch size {size}")
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    return [img[top : top + size, left : left + size] for img in images]


def build_batch(
    pool: Sequence,
    rng: RngStream,
    cfg: RunConfig,
    glda_prob: float | None = None,
    glda_count: int | None = None,
) -> Batch:
    """Sample ``cfg.batch_size`` aligned (hazy, clean) patches.

    Pool items are clean images (haze is synthesized per patch) or
    ``(hazy, clean)`` pairs. Each item draws from its own child stream so
    the result does not depend on construction order.
    """
    if len(pool) == 0:
        raise ValueError("empty image pool")
    prob = cfg.glda_prob if glda_prob is None else glda_prob
    hazy_out, clean_out, tags = [], [], []
    for i in range(cfg.batch_size):
        g = rng.child(f"item{i}").generator()
        item = pool[int(g.integers(len(pool)))]
        if isinstance(item, tuple):
            hazy, clean = _crop(g, item, cfg.patch_size)
            tag = "paired"
        else:
            (clean,) = _crop(g, [item], cfg.patch_size)
            params = sample_haze_params(
                cfg.patch_size,
                cfg.patch_size,
                g,
                (cfg.beta_min, cfg.beta_max),
                (cfg.airlight_min, cfg.airlight_max),
                cfg.depth_max,
            )
            hazy = apply_haze(clean, params)
            tag = "synthesized"
        if cfg.glda and g.random() < prob:
            hazy, _ = glda(clean, hazy, g, cfg.glda_max_patch, cfg.glda_min_patch, cfg.glda_max_patches, glda_count)
            tag = "glda"
        hazy, clean = random_flips(hazy, clean, g)
        hazy_out.append(hazy)
        clean_out.append(clean)
        tags.append(tag)
    return Batch(to_nchw(hazy_out), to_nchw(clean_out), tags)


# ---------------------------------------------------------------------------
# optimisation
# ---------------------------------------------------------------------------

def train_step(
    state: ModelState,
    batch: Batch,
    update_discriminators: bool = True,
    update_generator: bool = True,
) -> dict[str, float]:
    """One alternating step: each discriminator on detached fakes, then the generator.

    The generator's graph from the first forward pass is reused for its own
    update; its parameters have not changed in between, so this equals a
    fresh forward pass while the discriminator terms see the updated
    discriminators.
    """
    cfg = state.config
    gen = state.generator
    gen.train()
    scalars = dict.fromkeys(LOG_COLUMNS, math.nan)
    try:
        hazy, real = Tensor(batch.hazy), Tensor(batch.clean)
        fake = gen(hazy) if update_generator else _frozen_forward(gen, hazy)
        slots = list(state.discriminators)
        if slots and update_discriminators:
            with no_grad():
                real_in = disc_inputs(real, slots)
                fake_in = disc_inputs(fake.detach(), slots)
            for slot in slots:
                disc, opt = state.discriminators[slot], state.opt_d[slot]
                disc.train()
                for _ in range(cfg.d_steps):
                    opt.zero_grad()
                    loss_d = discriminator_loss(disc(real_in[slot]), disc(fake_in[slot]))
                    loss_d.backward()
                    opt.step()
                scalars["loss_d_hf" if slot == "hf" else "loss_d_lf"] = loss_d.item()
        if update_generator:
            fake_d_in = disc_inputs(fake, slots)
            d_out = {slot: state.discriminators[slot](fake_d_in[slot]) for slot in slots}
            loss_g, _ = generator_loss(
                real, fake, d_out, LossWeights(cfg.lambda1, cfg.lambda2), non_saturating=cfg.non_saturating
            )
            state.opt_g.zero_grad()
            loss_g.backward()
            state.opt_g.step()
            for disc in state.discriminators.values():
                disc.zero_grad()
            scalars["loss_g"] = loss_g.item()
    except NonFiniteError as err:
        raise NonFiniteError(f"step {state.step}: {err}") from None
    state.step += 1
    return scalars


def _frozen_forward(gen: Generator, hazy: Tensor) -> Tensor:
    gen.eval()
    with no_grad():
        out = gen(hazy)
    gen.train()
    return out


def lr_factor(cfg: RunConfig, step: int) -> float:
    """Multiplier on the base learning rates for the 0-based ``step``."""
    if cfg.lr_schedule == "cosine" and cfg.steps > 0:
        return 0.5 * (1.0 + math.cos(math.pi * min(step, cfg.steps) / cfg.steps))
    return 1.0


def set_learning_rates(state: ModelState, factor: float = 1.0) -> None:
    cfg = state.config
    state.opt_g.state.lr = cfg.lr_g * factor
    for opt in state.opt_d.values():
        opt.state.lr = cfg.lr_d * factor


def batch_stream(cfg: RunConfig, step: int) -> RngStream:
    return RngStream(cfg.seed, "batch", step)


def format_log_line(entry: dict) -> str:
    cols = [str(entry["step"])] + [f"{entry[k]:.6f}" for k in LOG_COLUMNS]
    if "psnr" in entry:
        cols += [f"{entry['psnr']:.4f}", f"{entry['ssim']:.6f}"]
    return "\t".join(cols)


def train_loop(
    cfg: RunConfig,
    pool: Sequence,
    state: ModelState | None = None,
    val_pairs: Sequence[tuple[np.ndarray, np.ndarray]] | None = None,
    on_checkpoint: Callable[[ModelState], None] | None = None,
    on_log: Callable[[dict], None] | None = None,
    until: int | None = None,
) -> tuple[ModelState, list[dict]]:
    """Run steps until ``state.step == cfg.steps``; resumes from ``state`` if given.

    Batches are keyed by the global step, so a resumed run reproduces the
    uninterrupted one exactly. ``until`` stops early at that global step
    while the learning-rate schedule still spans ``cfg.steps``.
    """
    if state is None:
        state = init_state(cfg)
    stop = cfg.steps if until is None else min(until, cfg.steps)
    log: list[dict] = []
    while state.step < stop:
        batch = build_batch(pool, batch_stream(cfg, state.step), cfg)
        set_learning_rates(state, lr_factor(cfg, state.step))
        entry = {"step": state.step + 1, **train_step(state, batch)}
        if val_pairs and state.step % cfg.eval_every == 0:
            table = evaluate_pairs(state.generator, [(str(i), h, c) for i, (h, c) in enumerate(val_pairs)])
            entry["psnr"], entry["ssim"] = table.mean
        log.append(entry)
        if on_log is not None:
            on_log(entry)
        logger.debug(format_log_line(entry))
        if on_checkpoint is not None and state.step % cfg.checkpoint_every == 0:
            on_checkpoint(state)
    return state, log


def train_discriminators(state: ModelState, pool: Sequence, steps: int, label: str = "disc-only") -> list[dict]:
    """Update only the discriminators, at their base rate, against the frozen generator's outputs."""
    set_learning_rates(state)
    log = []
    for i in range(steps):
        batch = build_batch(pool, RngStream(state.config.seed, label, i), state.config)
        log.append(train_step(state, batch, update_generator=False))
        state.step -= 1  # generator steps are what the counter tracks
    return log


# ---------------------------------------------------------------------------
# inference and evaluation
# ---------------------------------------------------------------------------

def dehaze(gen: Generator, images: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Run the generator in eval mode, symmetric-padding each image to a valid size."""
    gen.eval()
    out = []
    with no_grad():
        for img in images:
            h, w = img.shape[:2]
            ph = max(32, -(-h // 16) * 16) - h
            pw = max(32, -(-w // 16) * 16) - w
            padded = np.pad(img, ((0, ph), (0, pw), (0, 0)), mode="symmetric")
            res = gen(Tensor(to_nchw([padded]))).data
            out.append(to_hwc(res)[0][:h, :w])
    gen.train()
    return out


@dataclass
class EvalTable:
    rows: list[tuple[str, float, float]]
    mean: tuple[float, float]
    baseline: tuple[float, float]

    def format(self) -> str:
        lines = [f"{name}\t{p:.4f}\t{s:.6f}" for name, p, s in self.rows]
        lines.append(f"MEAN\t{self.mean[0]:.4f}\t{self.mean[1]:.6f}")
        lines.append(f"# hazy baseline\t{self.baseline[0]:.4f}\t{self.baseline[1]:.6f}")
        return "\n".join(lines) + "\n"


def score_table(named: Sequence[tuple[str, np.ndarray, np.ndarray, np.ndarray]]) -> EvalTable:
    """Rows from (name, restored, hazy, clean) tuples."""
    rows, base = [], []
    for name, restored, hazy, clean in named:
        rows.append((name, psnr(restored, clean), ssim(restored, clean)))
        base.append((psnr(hazy, clean), ssim(hazy, clean)))
    mean = (float(np.mean([r[1] for r in rows])), float(np.mean([r[2] for r in rows])))
    baseline = (float(np.mean([b[0] for b in base])), float(np.mean([b[1] for b in base])))
    return EvalTable(rows, mean, baseline)


def evaluate_pairs(gen: Generator, pairs: Sequence[tuple[str, np.ndarray, np.ndarray]]) -> EvalTable:
    """Score dehazed outputs of (name, hazy, clean) pairs, plus the hazy-input baseline."""
    restored = dehaze(gen, [h for _, h, _ in pairs])
    return score_table([(n, r, h, c) for (n, h, c), r in zip(pairs, restored)])
