from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import Any

import jax
import jax.numpy as jnp
import optax
from chex import PRNGKey
from flax import serialization, struct
from jax import Array

from superframe.data.io import atomic_write_bytes
from superframe.errors import DataError, FormatError
from superframe.functional.losses import LOSS_TERMS

from .config import TrainConfig

__all__ = [
    "CHECKPOINT_FORMAT",
    "TrainState",
    "save_checkpoint",
    "read_checkpoint",
    "restore_state",
    "checkpoint_path",
    "latest_checkpoint",
]

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "superframe-ckpt/1"
RUNNING_KEYS = LOSS_TERMS + ("total", "d_loss")
RUNNING_DECAY = 0.9


class TrainState(struct.PyTreeNode):
    """
    All mutable state of a training run.

    Attributes:
        step: Number of completed optimization steps.
        params: Variables of the ``VideoSuperResolver`` (generator and flow
            estimator).
        disc_params: Variables of the ``Discriminator``.
        opt_state: Optimizer state of ``params``.
        disc_opt_state: Optimizer state of ``disc_params``.
        rng: Key of the batch augmentation, split every step.
        running: Exponential moving averages of the loss terms, the total and
            the discriminator loss.
        d_loss: Discriminator loss of the latest step (0 when it was not
            updated).
    """

    step: Array
    params: Any
    disc_params: Any
    opt_state: optax.OptState
    disc_opt_state: optax.OptState
    rng: PRNGKey
    running: dict[str, Array]
    d_loss: Array

    @classmethod
    def create(
        cls,
        params: Any,
        disc_params: Any,
        tx: optax.GradientTransformation,
        disc_tx: optax.GradientTransformation,
        rng: PRNGKey,
    ) -> TrainState:
        return cls(
            step=jnp.asarray(0, dtype=jnp.int32),
            params=params,
            disc_params=disc_params,
            opt_state=tx.init(params),
            disc_opt_state=disc_tx.init(disc_params),
            rng=rng,
            running={k: jnp.zeros(()) for k in RUNNING_KEYS},
            d_loss=jnp.zeros(()),
        )

    def update_running(self, values: dict[str, Array]) -> dict[str, Array]:
        """Running averages after this step's ``values``; the first step seeds them."""
        first = self.step == 0
        return {
            k: jnp.where(first, values[k], RUNNING_DECAY * v + (1 - RUNNING_DECAY) * values[k])
            for k, v in self.running.items()
        }


def checkpoint_path(directory: str | Path, step: int) -> Path:
    return Path(directory) / f"step_{step:07d}.ckpt"


def latest_checkpoint(directory: str | Path) -> Path | None:
    """The checkpoint with the highest step in ``directory``, if any."""
    directory = Path(directory)
    if not directory.is_dir():
        return None
    found = [
        (int(m.group(1)), p)
        for p in directory.iterdir()
        if (m := re.fullmatch(r"step_(\d+)\.ckpt", p.name))
    ]
    return max(found)[1] if found else None


def save_checkpoint(path: str | Path, state: TrainState, config: TrainConfig) -> Path:
    """
    Writes ``state`` with the config that produced it as a msgpack archive.

    The archive holds the format tag, the config, the seed, the step and the
    state with the generator/flow and the discriminator variables in
    separate sections. The file is replaced atomically.
    """
    path = Path(path)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "config": config.to_dict(),
        "seed": config.seed,
        "step": int(state.step),
        "state": serialization.to_state_dict(jax.device_get(state)),
    }
    atomic_write_bytes(path, serialization.msgpack_serialize(payload))
    logger.info("Saved checkpoint of step %d to %s", payload["step"], path)
    return path


def read_checkpoint(path: str | Path) -> tuple[TrainConfig, dict[str, Any]]:
    """
    Reads a checkpoint archive.

    Returns:
        The ``TrainConfig`` stored in the archive and the raw state dict,
        whose ``"params"`` entry can be passed to the model as is.

    Raises:
        DataError: If the file does not exist.
        FormatError: If the file is not a checkpoint of this format.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError("Checkpoint does not exist", path)
    try:
        payload = serialization.msgpack_restore(path.read_bytes())
    except Exception as e:
        raise FormatError(f"Cannot decode checkpoint ({e})", path) from e
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        found = payload.get("format") if isinstance(payload, dict) else None
        raise FormatError(
            f"Unsupported checkpoint format {found!r}, expected {CHECKPOINT_FORMAT!r}", path
        )
    try:
        config = TrainConfig.from_dict(payload["config"])
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"Checkpoint holds an invalid config ({e})", path) from e
    return config, payload["state"]


def restore_state(template: TrainState, state_dict: dict[str, Any], path: str | Path = "") -> TrainState:
    """
    Fills ``template`` with the values of a checkpoint's state dict.

    Raises:
        FormatError: If the structure or shapes do not match the template.
    """
    try:
        state = serialization.from_state_dict(template, state_dict)
    except (KeyError, ValueError, TypeError) as e:
        raise FormatError(f"Checkpoint does not match the model ({e})", path or None) from e
    mismatched = [
        jax.tree_util.keystr(k)
        for (k, a), b in zip(
            jax.tree_util.tree_leaves_with_path(template), jax.tree_util.tree_leaves(state)
        )
        if jnp.shape(a) != jnp.shape(b)
    ]
    if mismatched:
        raise FormatError(
            f"Checkpoint shapes do not match the model at {mismatched[:3]}", path or None
        )
    return jax.tree_util.tree_map(jnp.asarray, state)
