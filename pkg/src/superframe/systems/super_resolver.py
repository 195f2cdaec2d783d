from __future__ import annotations

from functools import partial
from typing import Any

import jax
import jax.numpy as jnp
import numpy as np
from flax import linen as nn
from jax import Array

from ..clip import VideoClip
from ..elements import FlowEstimator, Generator, GeneratorConfig, NeighborPack
from ..elements.flow import FlowVariant
from ..functional import neighbor_table
from ..typing import FlowField, Frame
from ..utils import count_params
from ..utils.shapes import _check_frame

__all__ = ["VideoSuperResolver", "generate_sequence", "describe"]


class VideoSuperResolver(nn.Module):
    """
    Super-resolves every frame of a clip from the frame and its neighbors.

    For each target frame ``t`` the neighbors are chosen by
    ``neighbor_indices`` (past first, reflected at the clip boundaries), the
    flow from every neighbor to the target is estimated by the
    ``FlowEstimator`` and the ``Generator`` produces the 4x frame. All targets
    are processed as one batch.

    Attributes:
        generator_config: Configuration of the ``Generator``.
        flow_variant: The ``FlowEstimator`` variant.
    """

    generator_config: GeneratorConfig = GeneratorConfig()
    flow_variant: FlowVariant = "learned"

    def setup(self):
        self.flow = FlowEstimator(self.flow_variant)
        self.generator = Generator(self.generator_config)

    def estimate_flow(self, src: Frame, dst: Frame) -> FlowField:
        """Flow with ``warp(src, flow) ≈ dst``, shape `(B... H W 2)`."""
        return self.flow(src, dst)

    def __call__(
        self, lr_frames: Array, target_indices: Array | None = None, train: bool = False
    ) -> Array:
        """
        Args:
            lr_frames: LR clip frames of shape `(B... T h w 3)`.
            target_indices: Frames to super-resolve, an int array of shape
                `(K)`. Defaults to all ``T`` frames.
            train: Outputs are clamped to [0, 1] only when ``False``.

        Returns:
            The SR frames of shape `(B... K 4h 4w 3)`.
        """
        _check_frame(lr_frames, "lr_frames")
        if lr_frames.ndim < 4:
            raise ValueError(
                f"lr_frames must have shape (B... T h w 3), got {lr_frames.shape}"
            )
        num_frames = lr_frames.shape[-4]
        table = jnp.asarray(neighbor_table(num_frames, self.generator_config.n_neighbors))
        if target_indices is None:
            target_indices = jnp.arange(num_frames)
        targets = jnp.take(lr_frames, target_indices, axis=-4)
        neighbors = jnp.take(lr_frames, table[target_indices], axis=-4)
        target_view = jnp.broadcast_to(targets[..., None, :, :, :], neighbors.shape)
        flows = self.flow(neighbors, target_view)
        return self.generator(targets, NeighborPack(neighbors, flows), train)


@partial(jax.jit, static_argnums=0)
def _apply(resolver: VideoSuperResolver, variables: Any, lr_frames: Array, targets: Array) -> Array:
    return resolver.apply(variables, lr_frames, targets, train=False)


def generate_sequence(
    resolver: VideoSuperResolver,
    variables: Any,
    clip: VideoClip,
    chunk_size: int | None = None,
) -> VideoClip:
    """
    Super-resolves every frame of an LR ``clip`` of shape `(T h w 3)`.

    Targets are processed ``chunk_size`` at a time (all at once by default);
    every target still sees its neighbors from the whole clip, so the result
    does not depend on ``chunk_size``. Outputs are clamped to [0, 1].

    Returns:
        The SR clip of shape `(T 4h 4w 3)` with the scene id of ``clip``.
    """
    if clip.frames.ndim != 4:
        raise ValueError(f"Expected a single clip of shape (T h w 3), got {clip.shape}")
    n = clip.num_frames
    chunk_size = n if chunk_size is None else max(1, min(chunk_size, n))
    outputs = []
    for start in range(0, n, chunk_size):
        # The last chunk repeats its final index to keep one compiled shape.
        targets = np.minimum(np.arange(start, start + chunk_size), n - 1)
        sr = _apply(resolver, variables, clip.frames, jnp.asarray(targets))
        outputs.append(sr[: min(chunk_size, n - start)])
    return clip.replace(frames=jnp.concatenate(outputs, axis=0))


def describe(
    generator_config: GeneratorConfig = GeneratorConfig(),
    flow_variant: FlowVariant = "learned",
) -> dict[str, int]:
    """
    Parameter counts of a ``VideoSuperResolver``: the total, the flow
    estimator, the generator and every top-level generator submodule
    (keys ``"generator/<name>"``).
    """
    model = VideoSuperResolver(generator_config, flow_variant)
    dummy = jnp.zeros((1, 8, 8, 3))
    shapes: Any = jax.eval_shape(
        lambda: model.init(jax.random.PRNGKey(0), dummy, train=True)
    )
    params = shapes["params"]
    counts = {
        "total": count_params(params),
        "flow": count_params(params.get("flow", {})),
        "generator": count_params(params["generator"]),
    }
    for name, sub in sorted(params["generator"].items()):
        counts[f"generator/{name}"] = count_params(sub)
    return counts
