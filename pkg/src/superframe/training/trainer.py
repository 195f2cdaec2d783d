from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Sequence

import jax
import jax.numpy as jnp
import optax
from chex import PRNGKey
from jax import Array
from tqdm.auto import tqdm

from superframe.clip import LRHRPair, VideoClip
from superframe.data import (
    BatchSampler,
    crop_to_multiple,
    degrade,
    load_clip,
    load_manifest,
    load_prepared,
    synthetic_dataset,
)
from superframe.data.degradation import MANIFEST_NAME
from superframe.data.io import atomic_write_bytes
from superframe.elements import DiscOutput, Discriminator, discriminate
from superframe.functional import (
    LOSS_TERMS,
    LossBundle,
    LossWeights,
    assemble_input,
    build_pingpong,
    feature_loss,
    gan_loss_d,
    gan_loss_g,
    pingpong_loss,
    pixel_loss,
    split_pingpong,
    total_generator_loss,
    triplet_starts,
    warping_loss,
)
from superframe.ops import bicubic_upsample
from superframe.systems import VideoSuperResolver, generate_sequence

from .config import TrainConfig
from .state import (
    TrainState,
    checkpoint_path,
    latest_checkpoint,
    read_checkpoint,
    restore_state,
    save_checkpoint,
)

__all__ = [
    "LOG_NAME",
    "Trainer",
    "TrainResult",
    "load_training_pairs",
    "pretrain_generator",
    "train",
    "infer",
]

logger = logging.getLogger(__name__)

LOG_NAME = "train_log.jsonl"
CHECKPOINT_DIR = "checkpoints"
# Generator, flow and discriminator fields; a checkpoint restores only into a
# config that agrees on all of them.
MODEL_FIELDS = (
    "n_neighbors",
    "scale",
    "flow_variant",
    "base_channels",
    "n_residual_blocks",
    "crop",
    "clip_length",
)


def _triplets(x: Array, starts: Sequence[int]) -> Array:
    """`(B T H W C)` -> `(B K 3 H W C)` with one entry per triplet start."""
    return jnp.stack([x[:, s : s + 3] for s in starts], axis=1)


def _augment(rng: PRNGKey, lr: Array, hr: Array) -> tuple[Array, Array]:
    """Flips the whole batch horizontally and/or vertically, LR and HR alike."""
    flip_w, flip_h = jax.random.bernoulli(rng, 0.5, (2,))
    lr = jnp.where(flip_w, lr[..., ::-1, :], lr)
    hr = jnp.where(flip_w, hr[..., ::-1, :], hr)
    lr = jnp.where(flip_h, lr[..., ::-1, :, :], lr)
    hr = jnp.where(flip_h, hr[..., ::-1, :, :], hr)
    return lr, hr


class Trainer:
    """
    Trains a ``VideoSuperResolver`` against a ``Discriminator``.

    Every step first updates the discriminator on real versus generated
    triplets (only while the adversarial weight is positive) and then the
    generator and flow estimator on ``total_generator_loss``. During the
    first ``pretrain_generator_steps`` steps only the generator objective
    without adversarial and feature terms is optimized.

    Both optimizers are Adam with the step size halved every
    ``decay_every`` steps. All randomness derives from ``config.seed``, so
    two runs with the same config produce identical states.

    Args:
        config: The run configuration.
    """

    def __init__(self, config: TrainConfig):
        self.config = config
        self.model = VideoSuperResolver(config.generator_config, config.flow_variant)
        self.discriminator = Discriminator()
        schedule = optax.piecewise_constant_schedule(
            config.learning_rate, {b: 0.5 for b in config.lr_boundaries}
        )
        self.schedule = schedule
        self.tx = optax.adam(schedule)
        self.disc_tx = optax.adam(schedule)
        self._steps = {
            "pretrain": jax.jit(
                partial(self._step, weights=config.pretrain_weights, update_disc=False)
            ),
            "adversarial": jax.jit(
                partial(
                    self._step,
                    weights=config.loss_weights,
                    update_disc=config.loss_weights.adv > 0,
                )
            ),
        }
        self._loss_fns = {
            phase: jax.jit(partial(self._generator_loss, weights=w))
            for phase, w in (
                ("pretrain", config.pretrain_weights),
                ("adversarial", config.loss_weights),
            )
        }

    @property
    def min_frames(self) -> int:
        """Frames a training clip needs: one discriminator triplet."""
        return 3

    def phase(self, step: int) -> str:
        return "pretrain" if step < self.config.pretrain_generator_steps else "adversarial"

    def init(self) -> TrainState:
        """The initial state; parameters are drawn from ``config.seed``."""
        cfg = self.config
        model_key, disc_key, rng = jax.random.split(jax.random.PRNGKey(cfg.seed), 3)
        lr = jnp.zeros((1, cfg.clip_length, cfg.crop, cfg.crop, 3))
        params = self.model.init(model_key, lr, train=True)
        hr_crop = cfg.crop * cfg.scale
        disc_input = jnp.zeros((1, hr_crop, hr_crop, self.discriminator.in_channels))
        disc_params = self.discriminator.init(disc_key, disc_input)
        return TrainState.create(params, disc_params, self.tx, self.disc_tx, rng)

    def generate(self, params, lr: Array) -> tuple[Array, Array | None]:
        """
        Unclamped SR outputs for a batch of LR clips `(B T h w 3)`: the
        forward results and, with ping-pong, the backward results.
        """
        if self.config.use_pingpong:
            sequence = build_pingpong(VideoClip(lr))
            outputs = self.model.apply(params, sequence.frames.frames, train=True)
            return split_pingpong(outputs, sequence.n)
        return self.model.apply(params, lr, train=True), None

    def _discriminate(self, disc_params, triplets: Array, lr_up: Array) -> DiscOutput:
        return discriminate(self.discriminator, disc_params, assemble_input(triplets, lr_up))

    def discriminator_loss(self, disc_params, lr: Array, hr: Array, sr: Array) -> Array:
        """``gan_loss_d`` over the non-overlapping triplets of real and generated clips."""
        starts = triplet_starts(lr.shape[1])
        lr_up = bicubic_upsample(_triplets(lr, starts), self.config.scale)
        real = self._discriminate(disc_params, _triplets(hr, starts), lr_up)
        fake = self._discriminate(disc_params, _triplets(sr, starts), lr_up)
        return gan_loss_d(real.logit, fake.logit)

    def _generator_loss(self, params, disc_params, lr: Array, hr: Array, weights: LossWeights):
        forward, backward = self.generate(params, lr)
        terms = {}
        if weights.pixel > 0:
            terms["pixel"] = pixel_loss(forward, hr)
        if weights.pp > 0:
            terms["pp"] = pingpong_loss(forward, backward)
        if weights.warp > 0:
            estimate = partial(self.model.apply, params, method=VideoSuperResolver.estimate_flow)
            terms["warp"] = warping_loss(lr, estimate)
        if weights.adv > 0 or weights.feat > 0:
            starts = triplet_starts(lr.shape[1])
            lr_up = bicubic_upsample(_triplets(lr, starts), self.config.scale)
            fake = self._discriminate(disc_params, _triplets(forward, starts), lr_up)
            if weights.adv > 0:
                terms["adv"] = gan_loss_g(fake.logit, self.config.non_saturating_gan)
            if weights.feat > 0:
                real = self._discriminate(disc_params, _triplets(hr, starts), lr_up)
                terms["feat"] = feature_loss(
                    fake.features,
                    jax.lax.stop_gradient(real.features),
                    weights.feature_layers,
                )
        bundle = total_generator_loss(terms, weights)
        return bundle.total, bundle

    def _step(
        self, state: TrainState, lr: Array, hr: Array, weights: LossWeights, update_disc: bool
    ) -> tuple[TrainState, LossBundle]:
        rng, aug_rng = jax.random.split(state.rng)
        if self.config.augment:
            lr, hr = _augment(aug_rng, lr, hr)
        disc_params, disc_opt_state = state.disc_params, state.disc_opt_state
        d_loss = jnp.zeros(())
        if update_disc:
            sr = jax.lax.stop_gradient(self.generate(state.params, lr)[0])
            d_loss, d_grads = jax.value_and_grad(self.discriminator_loss)(disc_params, lr, hr, sr)
            updates, disc_opt_state = self.disc_tx.update(d_grads, disc_opt_state, disc_params)
            disc_params = optax.apply_updates(disc_params, updates)
        loss_fn = partial(self._generator_loss, weights=weights)
        (_, bundle), grads = jax.value_and_grad(loss_fn, has_aux=True)(
            state.params, disc_params, lr, hr
        )
        updates, opt_state = self.tx.update(grads, state.opt_state, state.params)
        params = optax.apply_updates(state.params, updates)
        values = {name: getattr(bundle, name) for name in LOSS_TERMS + ("total",)}
        running = state.update_running({**values, "d_loss": d_loss})
        new_state = state.replace(
            step=state.step + 1,
            params=params,
            disc_params=disc_params,
            opt_state=opt_state,
            disc_opt_state=disc_opt_state,
            rng=rng,
            running=running,
            d_loss=d_loss,
        )
        return new_state, bundle

    def _check_batch(self, batch: LRHRPair) -> None:
        if batch.lr.frames.ndim != 5:
            raise ValueError(
                f"Training batches must have shape (B T h w 3), got {batch.lr.shape}"
            )
        if batch.num_frames < self.min_frames:
            raise ValueError(
                f"Training clips need a minimum of {self.min_frames} frames, "
                f"got {batch.num_frames}"
            )
        if batch.scale != self.config.scale:
            raise ValueError(f"Batch scale {batch.scale} does not match config scale {self.config.scale}")

    def train_step(self, state: TrainState, batch: LRHRPair) -> tuple[TrainState, LossBundle]:
        """
        One discriminator update followed by one generator and flow update.

        Args:
            state: The current state.
            batch: LR/HR clips of shape `(B T h w 3)` and `(B T 4h 4w 3)`.

        Returns:
            The updated state and the generator losses of this step.
        """
        self._check_batch(batch)
        step = self._steps[self.phase(int(state.step))]
        return step(state, batch.lr.frames, batch.hr.frames)

    def evaluate_loss(self, state: TrainState, batch: LRHRPair, phase: str = "adversarial") -> LossBundle:
        """The generator losses of ``batch`` without updating or augmenting."""
        self._check_batch(batch)
        _, bundle = self._loss_fns[phase](
            state.params, state.disc_params, batch.lr.frames, batch.hr.frames
        )
        return bundle

    def restore(self, path: str | Path) -> TrainState:
        """
        Restores a state saved by ``save_checkpoint``.

        Raises:
            ValueError: If the checkpoint was written with different model
                settings.
        """
        config, state_dict = read_checkpoint(path)
        diff = {
            k: (getattr(config, k), getattr(self.config, k))
            for k in MODEL_FIELDS
            if getattr(config, k) != getattr(self.config, k)
        }
        if diff:
            raise ValueError(f"Checkpoint {path} was written with different settings {diff}")
        return restore_state(self.init(), state_dict, path)

    def fit(
        self,
        state: TrainState,
        sampler: BatchSampler,
        until: int,
        output_dir: str | Path,
    ) -> TrainState:
        """
        Runs steps ``state.step .. until - 1``, appending one record per step
        to the training log and writing checkpoints every
        ``checkpoint_every`` steps and at ``until``.
        """
        output_dir = Path(output_dir)
        ckpt_dir = output_dir / CHECKPOINT_DIR
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        start = int(state.step)
        with open(output_dir / LOG_NAME, "a") as log:
            progress = tqdm(range(start, until), desc="train", initial=start, total=until, leave=False)
            for k in progress:
                t0 = time.perf_counter()
                phase = self.phase(k)
                state, bundle = self.train_step(state, sampler(k))
                record = {
                    "step": k,
                    "phase": phase,
                    "terms": {name: float(getattr(bundle, name)) for name in LOSS_TERMS},
                    "total": float(bundle.total),
                    "d_loss": float(state.d_loss),
                    "learning_rate": float(self.schedule(k)),
                    "wall_time": time.perf_counter() - t0,
                }
                log.write(json.dumps(record, sort_keys=True) + "\n")
                log.flush()
                progress.set_postfix(
                    {name: f"{float(v):.4g}" for name, v in state.running.items() if name in ("total", "d_loss")}
                )
                if (k + 1) % self.config.checkpoint_every == 0 or k + 1 == until:
                    save_checkpoint(checkpoint_path(ckpt_dir, k + 1), state, self.config)
        logger.info(
            "Trained steps %d..%d, running means %s",
            start,
            until - 1,
            {k: round(float(v), 6) for k, v in state.running.items()},
        )
        return state


def load_training_pairs(config: TrainConfig) -> list[LRHRPair]:
    """
    The LR/HR pairs a run trains on.

    ``dataset_root = "synthetic"`` builds translating-texture scenes large
    enough for the crop; a directory with a prepared manifest is loaded as
    is; any other directory is read as raw HR scenes and degraded with the
    configured blur.
    """
    if config.dataset_root == "synthetic":
        side = (config.crop + 8) * config.scale
        clips = synthetic_dataset(
            num_scenes=config.synthetic_scenes,
            num_frames=max(7, config.clip_length),
            shape=(side, side),
            seed=config.seed,
        )
        return [degrade(c, config.sigma, config.ksize, config.scale) for c in clips]
    root = Path(config.dataset_root)
    if (root / MANIFEST_NAME).is_file():
        return load_prepared(root)
    manifest = load_manifest(root, config.layout)
    pairs = []
    for scene_id in tqdm(manifest.scene_ids, desc="degrade", leave=False):
        hr = crop_to_multiple(load_clip(manifest, scene_id), config.scale)
        pairs.append(degrade(hr, config.sigma, config.ksize, config.scale))
    return pairs


def _truncate_log(log_path: Path, step: int) -> None:
    """
    Drops log records of steps at or after ``step``, which a resume repeats,
    and any partial record left by an interrupted write.
    """
    if not log_path.is_file():
        return
    lines = []
    for line in log_path.read_text().splitlines():
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            logger.warning("Dropping unreadable record in %s: %r", log_path, line[:80])
            continue
        if record["step"] < step:
            lines.append(line)
    atomic_write_bytes(log_path, "".join(line + "\n" for line in lines).encode())


@dataclass(frozen=True)
class TrainResult:
    state: TrainState
    checkpoint: Path
    log: Path


def _run(
    config: TrainConfig,
    until: int,
    pairs: Sequence[LRHRPair] | None,
    resume: bool | str | Path,
) -> TrainResult:
    trainer = Trainer(config)
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    ckpt_dir = output_dir / CHECKPOINT_DIR
    log_path = output_dir / LOG_NAME
    path = latest_checkpoint(ckpt_dir) if resume is True else (Path(resume) if resume else None)
    if path is not None:
        state = trainer.restore(path)
        logger.info("Resuming from %s at step %d", path, int(state.step))
    else:
        state = trainer.init()
        if log_path.exists():
            log_path.unlink()
    _truncate_log(log_path, int(state.step))
    if int(state.step) >= until:
        logger.info("Nothing to do: checkpoint is at step %d", int(state.step))
        return TrainResult(state, path, log_path)
    if pairs is None:
        pairs = load_training_pairs(config)
    sampler = BatchSampler(
        pairs,
        batch_size=config.batch_size,
        clip_length=config.clip_length,
        lr_crop=config.crop,
        seed=config.seed,
    )
    state = trainer.fit(state, sampler, until, output_dir)
    return TrainResult(state, checkpoint_path(ckpt_dir, until), log_path)


def pretrain_generator(
    config: TrainConfig,
    pairs: Sequence[LRHRPair] | None = None,
    resume: bool | str | Path = True,
) -> Path:
    """
    Runs only the generator-only phase of ``config`` and returns its
    checkpoint, from which ``train`` continues with the adversarial phase.

    Raises:
        ValueError: If ``config.pretrain_generator_steps`` is 0.
    """
    if config.pretrain_generator_steps <= 0:
        raise ValueError(
            "pretrain_generator needs pretrain_generator_steps > 0, "
            f"got {config.pretrain_generator_steps}"
        )
    return _run(config, config.pretrain_generator_steps, pairs, resume).checkpoint


def train(
    config: TrainConfig,
    pairs: Sequence[LRHRPair] | None = None,
    resume: bool | str | Path = True,
) -> TrainResult:
    """
    Runs ``config`` to ``total_steps``.

    The log ``train_log.jsonl`` and the checkpoints ``checkpoints/step_*.ckpt``
    go to ``config.output_dir``. With ``resume=True`` the run continues from
    the latest checkpoint there, and log records after it are discarded, so
    an interrupted run ends with the same log and state as an uninterrupted
    one. A path resumes from that checkpoint; ``False`` starts afresh.

    Args:
        config: The run configuration.
        pairs: Training pairs; loaded with ``load_training_pairs`` if omitted.
        resume: Where to resume from.
    """
    logger.info(
        "Training preset %s for %d steps (%d generator-only), %d neighbors, ping-pong %s",
        config.preset,
        config.total_steps,
        config.pretrain_generator_steps,
        config.n_neighbors,
        config.use_pingpong,
    )
    return _run(config, config.total_steps, pairs, resume)


def infer(
    checkpoint: str | Path, lr_clip: VideoClip, chunk_size: int = 8, scale: int | None = None
) -> VideoClip:
    """
    Super-resolves every frame of ``lr_clip`` with the model of a checkpoint.

    Frames are processed ``chunk_size`` targets at a time; every target still
    sees its neighbors from the whole clip. Outputs are clamped to [0, 1]
    and deterministic.

    Args:
        checkpoint: A checkpoint written by ``train``.
        lr_clip: The LR clip of shape `(T h w 3)`.
        chunk_size: Targets per forward pass.
        scale: The requested factor; must match the checkpoint's if given.

    Raises:
        ValueError: If ``scale`` differs from the checkpoint's or the clip
            is not a single clip.
    """
    config, state_dict = read_checkpoint(checkpoint)
    if scale is not None and scale != config.scale:
        raise ValueError(f"Requested scale {scale} but the checkpoint was trained for {config.scale}")
    if lr_clip.frames.ndim != 4:
        raise ValueError(f"infer expects a single clip of shape (T h w 3), got {lr_clip.shape}")
    model = VideoSuperResolver(config.generator_config, config.flow_variant)
    return generate_sequence(model, state_dict["params"], lr_clip, chunk_size)
