from typing import Any

import jax.numpy as jnp
from flax import linen as nn
from flax import struct
from jax import Array

__all__ = ["DiscOutput", "Discriminator", "discriminate"]


class DiscOutput(struct.PyTreeNode):
    """
    Output of the ``Discriminator``.

    Attributes:
        logit: The pre-sigmoid score of shape `(B...)`, used by the losses.
        score: ``sigmoid(logit)`` clipped to stay strictly inside (0, 1), the
            estimated probability that the input triplet is real.
        features: The post-activation feature map of every stage; stage ``i``
            has spatial dims ``ceil(H / 2**i)`` x ``ceil(W / 2**i)``.
    """

    logit: Array
    score: Array
    features: tuple[Array, ...]


class Discriminator(nn.Module):
    """
    A spatio-temporal discriminator for triplets of consecutive frames
    conditioned on the upsampled LR triplet.

    The input raster (see ``assemble_input``) goes through one stride-2 3x3
    convolution with a leaky ReLU per entry of ``features``, is averaged over
    space and mapped to a single logit.

    Attributes:
        features: Widths of the stages.
        include_warped_triplet: Whether the input also carries a flow-warped
            triplet (27 instead of 18 channels).
        negative_slope: Slope of the leaky ReLU.
    """

    features: tuple[int, ...] = (32, 64, 64, 128)
    include_warped_triplet: bool = False
    negative_slope: float = 0.2

    @property
    def in_channels(self) -> int:
        return 27 if self.include_warped_triplet else 18

    @nn.compact
    def __call__(self, x: Array) -> DiscOutput:
        if x.ndim < 3 or x.shape[-1] != self.in_channels:
            raise ValueError(
                f"Discriminator input must have shape (B... H W {self.in_channels}), "
                f"got {x.shape}"
            )
        stages = []
        for width in self.features:
            x = nn.Conv(width, (3, 3), strides=(2, 2), padding="SAME")(x)
            x = nn.leaky_relu(x, self.negative_slope)
            stages.append(x)
        pooled = jnp.mean(x, axis=(-3, -2))
        logit = nn.Dense(1)(pooled)[..., 0]
        finfo = jnp.finfo(logit.dtype)
        score = jnp.clip(nn.sigmoid(logit), finfo.tiny, 1.0 - finfo.eps)
        return DiscOutput(logit, score, tuple(stages))


def discriminate(discriminator: Discriminator, variables: Any, x: Array) -> DiscOutput:
    """Functional form of ``discriminator(x)`` for an assembled input raster."""
    return discriminator.apply(variables, x)
