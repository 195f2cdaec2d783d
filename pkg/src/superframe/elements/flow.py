from typing import Any, Literal

import jax.numpy as jnp
from flax import linen as nn
from jax import Array

from superframe.ops import pooling_downsample, resize_flow
from superframe.typing import FlowField, Frame
from superframe.utils.shapes import _check_frame

from .. import functional as sf

__all__ = ["FlowNet", "FlowEstimator", "estimate_flow"]

FlowVariant = Literal["zero", "learned", "pyramid-classical", "pyramid"]


class _FlowRefinement(nn.Module):
    """Predicts a flow update from ``[dst, warped src, current flow]``."""

    features: tuple[int, ...] = (32, 64, 32)

    @nn.compact
    def __call__(self, x: Array) -> Array:
        for width in self.features:
            x = nn.relu(nn.Conv(width, (3, 3))(x))
        return nn.Conv(2, (3, 3), kernel_init=nn.initializers.zeros)(x)


class FlowNet(nn.Module):
    """
    A small coarse-to-fine convolutional flow network.

    Both frames are reduced into a pyramid of ``num_levels`` levels by 2x2
    average pooling. At every level, from coarse to fine, the current flow is
    upsampled, ``src`` is warped with it, and a level-specific refinement
    block predicts a correction from the concatenation of ``dst``, the warped
    ``src`` and the flow. The last convolution of every block starts at zero,
    so an untrained ``FlowNet`` returns zero motion.

    The returned flow follows the ``warp`` convention:
    ``warp(src, flownet(src, dst)) ≈ dst`` after training.

    Attributes:
        num_levels: Number of pyramid levels.
        features: Widths of the hidden convolutions of each refinement block.
    """

    num_levels: int = 3
    features: tuple[int, ...] = (32, 64, 32)

    @nn.compact
    def __call__(self, src: Frame, dst: Frame) -> FlowField:
        pyramid = [(src, dst)]
        for _ in range(self.num_levels - 1):
            s, d = pyramid[-1]
            if min(s.shape[-3], s.shape[-2]) >= 2:
                s, d = pooling_downsample(s), pooling_downsample(d)
            pyramid.append((s, d))
        s, _ = pyramid[-1]
        flow = jnp.zeros(s.shape[:-1] + (2,), dtype=s.dtype)
        for level, (s, d) in reversed(list(enumerate(pyramid))):
            if flow.shape[-3:-1] != s.shape[-3:-1]:
                flow = resize_flow(flow, s.shape[-3:-1])
            x = jnp.concatenate([d, sf.warp(s, flow), flow], axis=-1)
            flow = flow + _FlowRefinement(self.features, name=f"level_{level}")(x)
        return flow


class FlowEstimator(nn.Module):
    """
    Estimates the flow field ``F(src, dst)`` used to align neighbors with a
    target frame.

    Three variants are available:

    - ``"zero"`` always returns zero motion and has no parameters.
    - ``"learned"`` runs a ``FlowNet``; it is differentiable with respect to
      its parameters and trained by the warping loss.
    - ``"pyramid-classical"`` (or ``"pyramid"``) runs the classical
      ``pyramid_flow`` estimator, which is parameter-free and deterministic.

    Whatever the variant, the output has the spatial dims of the inputs.

    Attributes:
        variant: Which estimator to use.
        num_levels: Number of pyramid levels of the learned variant.
        features: Hidden widths of the learned variant.
    """

    variant: FlowVariant = "learned"
    num_levels: int = 3
    features: tuple[int, ...] = (32, 64, 32)

    @nn.compact
    def __call__(self, src: Frame, dst: Frame) -> FlowField:
        _check_frame(src, "src")
        _check_frame(dst, "dst")
        if src.shape != dst.shape:
            raise ValueError(
                f"src and dst must have equal shapes, got {src.shape} and {dst.shape}"
            )
        if self.variant == "zero":
            return sf.zero_flow(src)
        if self.variant in ("pyramid-classical", "pyramid"):
            return sf.pyramid_flow(src, dst)
        if self.variant == "learned":
            return FlowNet(self.num_levels, self.features, name="flownet")(src, dst)
        raise ValueError(
            f"variant must be 'zero', 'learned' or 'pyramid-classical', got {self.variant!r}"
        )


def estimate_flow(
    estimator: FlowEstimator, variables: Any, src: Frame, dst: Frame
) -> FlowField:
    """
    Functional form of ``estimator(src, dst)`` with the given ``variables``.
    Parameter-free variants accept an empty dict.
    """
    return estimator.apply(variables, src, dst)
