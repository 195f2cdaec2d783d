from __future__ import annotations

import logging
from typing import Sequence

import jax.numpy as jnp
import numpy as np

from superframe.clip import LRHRPair, VideoClip

from .degradation import crop_pair, sample_crop_offset

__all__ = ["BatchSampler"]

logger = logging.getLogger(__name__)


class BatchSampler:
    """
    Draws training batches of aligned LR/HR crops from a list of pairs.

    The degradation is applied once to whole clips before sampling, so every
    crop is cut from an already degraded frame. A batch depends only on
    ``(seed, step)``: batch ``k`` is drawn from
    ``numpy.random.default_rng([seed, k])``, which makes the order independent
    of how many batches were drawn before (and therefore of resuming).

    Args:
        pairs: The LR/HR pairs to sample from (unbatched clips).
        batch_size: Number of crops per batch.
        clip_length: Number of consecutive frames per crop.
        lr_crop: LR crop size in pixels.
        seed: Base seed.
    """

    def __init__(
        self,
        pairs: Sequence[LRHRPair],
        batch_size: int = 4,
        clip_length: int = 3,
        lr_crop: int = 32,
        seed: int = 0,
    ):
        if len(pairs) == 0:
            raise ValueError("BatchSampler needs at least one LR/HR pair")
        usable = [p for p in pairs if p.num_frames >= clip_length]
        if not usable:
            raise ValueError(
                f"No clip has the required minimum of {clip_length} frames"
            )
        for p in usable:
            if min(p.lr.spatial_shape) < lr_crop:
                raise ValueError(
                    f"Scene {p.scene_id!r} LR dims {p.lr.spatial_shape} are smaller "
                    f"than the crop size {lr_crop}"
                )
        if len(usable) < len(pairs):
            logger.warning(
                "Ignoring %d clips shorter than %d frames",
                len(pairs) - len(usable),
                clip_length,
            )
        self.pairs = usable
        self.batch_size = batch_size
        self.clip_length = clip_length
        self.lr_crop = lr_crop
        self.seed = seed

    def __call__(self, step: int) -> LRHRPair:
        """Returns batch ``step`` as a pair of clips of shape `(B T H W 3)`."""
        rng = np.random.default_rng([self.seed, step])
        lrs, hrs = [], []
        for _ in range(self.batch_size):
            pair = self.pairs[int(rng.integers(0, len(self.pairs)))]
            start = int(rng.integers(0, pair.num_frames - self.clip_length + 1))
            window = LRHRPair(
                pair.lr[start : start + self.clip_length],
                pair.hr[start : start + self.clip_length],
                pair.scale,
            )
            offset = sample_crop_offset(window.lr.spatial_shape, self.lr_crop, rng)
            crop = crop_pair(window, offset, self.lr_crop)
            lrs.append(np.asarray(crop.lr.frames))
            hrs.append(np.asarray(crop.hr.frames))
        scale = self.pairs[0].scale
        lr = VideoClip(jnp.asarray(np.stack(lrs)))
        hr = VideoClip(jnp.asarray(np.stack(hrs)))
        return LRHRPair(lr, hr, scale)
