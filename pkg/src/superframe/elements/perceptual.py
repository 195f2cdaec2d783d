from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

import jax
import jax.numpy as jnp
from flax import linen as nn
from flax import serialization
from jax import Array

from superframe.errors import DataError, FormatError
from superframe.typing import Frame

from .. import functional as sf

__all__ = ["PerceptualPyramid", "PerceptualDistance"]

logger = logging.getLogger(__name__)


class PerceptualPyramid(nn.Module):
    """
    A 5-stage convolutional feature pyramid used as the backbone of the
    perceptual distance.

    Frames in [0, 1] are mapped to [-1, 1]; every stage is a 3x3 convolution
    followed by a ReLU, and all stages but the first halve the resolution.

    Attributes:
        features: Widths of the stages.
    """

    features: tuple[int, ...] = (16, 32, 64, 64, 64)

    @nn.compact
    def __call__(self, frame: Frame) -> tuple[Array, ...]:
        x = 2.0 * frame - 1.0
        stages = []
        for i, width in enumerate(self.features):
            strides = (1, 1) if i == 0 else (2, 2)
            x = nn.relu(nn.Conv(width, (3, 3), strides=strides, padding="SAME")(x))
            stages.append(x)
        return tuple(stages)


class PerceptualDistance:
    """
    LPIPS-style distance with frozen backbone weights.

    By default the backbone is a ``PerceptualPyramid`` initialized from a
    fixed seed. Such a surrogate is deterministic and orders distortions
    sensibly, but its absolute values are not comparable with a pretrained
    network; load pretrained weights with ``from_weights`` for that.

    Args:
        params: Parameters of the backbone.
        module: The backbone.
        source: A label identifying the weights, stored in reports.
    """

    def __init__(self, params: Any, module: nn.Module | None = None, source: str = "custom"):
        self.module = module if module is not None else PerceptualPyramid()
        self.params = jax.lax.stop_gradient(params)
        self.source = source
        self._features = jax.jit(lambda frame: self.module.apply(self.params, frame))

    @classmethod
    def default(cls, seed: int = 0) -> PerceptualDistance:
        """The frozen random backbone initialized from ``seed``."""
        module = PerceptualPyramid()
        params = module.init(jax.random.PRNGKey(seed), jnp.zeros((1, 32, 32, 3)))
        return cls(params, module, source=f"random-pyramid(seed={seed})")

    @classmethod
    def from_weights(cls, path: str | Path, seed: int = 0) -> PerceptualDistance:
        """
        Loads backbone weights serialized with ``flax.serialization.to_bytes``.
        The file must match the ``PerceptualPyramid`` parameter structure.
        """
        path = Path(path)
        if not path.is_file():
            raise DataError("Perceptual weights file does not exist", path)
        template = cls.default(seed).params
        try:
            params = serialization.from_bytes(template, path.read_bytes())
        except (ValueError, KeyError, TypeError) as e:
            raise FormatError(f"Cannot restore perceptual weights ({e})", path) from e
        logger.info("Loaded perceptual weights from %s", path)
        return cls(params, source=str(path))

    def features(self, frame: Frame) -> tuple[Array, ...]:
        return self._features(jnp.asarray(frame))

    def __call__(self, a: Frame, b: Frame) -> Array:
        """The distance of shape `(B...)` between frames of shape `(B... H W 3)`."""
        return sf.lpips(a, b, self.features)
