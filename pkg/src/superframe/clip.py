from __future__ import annotations

import jax.numpy as jnp
import numpy as np
from flax import struct
from jax import Array
from typing_extensions import Self

from superframe.typing import ArrayLike

from .utils.shapes import _check_frame

__all__ = ["VideoClip", "LRHRPair"]


class VideoClip(struct.PyTreeNode):
    """
    An ordered sequence of RGB frames from one scene.

    The frames are stored as a single array of shape `(B... T H W 3)` where T
    is the number of frames. Values are real numbers in [0, 1] and channels are
    in RGB order. Most of ``superframe`` works with a single clip (no batch
    dimensions); the trainer stacks clips into a leading batch dimension.

    ``VideoClip`` is a pytree, so it can be passed through ``jax.jit`` and
    ``jax.vmap``; ``scene_id`` is static metadata.

    Attributes:
        frames: The frames of shape `(B... T H W 3)`.
        scene_id: A name identifying the scene the frames come from.
    """

    frames: Array
    scene_id: str = struct.field(pytree_node=False, default="")

    @classmethod
    def create(
        cls, frames: ArrayLike, scene_id: str = "", check_range: bool = True
    ) -> Self:
        """
        Create a ``VideoClip`` from an array or a list of frames.

        Args:
            frames: Either an array of shape `(T H W 3)` (optionally with
                leading batch dims) or a sequence of `(H W 3)` arrays, which
                must all have the same dimensions.
            scene_id: Name of the scene.
            check_range: Whether to verify that all values lie in [0, 1].
                Only possible for concrete (non-traced) arrays.
        """
        if isinstance(frames, (list, tuple)):
            if len(frames) == 0:
                raise ValueError("A VideoClip needs at least one frame")
            shapes = {tuple(f.shape) for f in frames}
            if len(shapes) != 1:
                raise ValueError(
                    f"All frames of a clip must share dimensions, got {sorted(shapes)}"
                )
            frames = jnp.stack([jnp.asarray(f) for f in frames])
        frames = jnp.asarray(frames)
        if frames.ndim < 4:
            raise ValueError(
                f"Clip frames must have shape (B... T H W 3), got {frames.shape}"
            )
        _check_frame(frames, "clip frames")
        if frames.shape[-4] < 1:
            raise ValueError("A VideoClip needs at least one frame")
        if check_range:
            values = np.asarray(frames)
            if values.size and (values.min() < 0.0 or values.max() > 1.0):
                raise ValueError(
                    f"Frame values must lie in [0, 1], got [{values.min()}, {values.max()}]"
                )
        return cls(frames, scene_id)

    @property
    def num_frames(self) -> int:
        """Number of frames T."""
        return self.frames.shape[-4]

    @property
    def spatial_shape(self) -> tuple[int, int]:
        """Height and width of every frame."""
        return (self.frames.shape[-3], self.frames.shape[-2])

    @property
    def shape(self) -> tuple[int, ...]:
        return self.frames.shape

    def __len__(self) -> int:
        return self.num_frames

    def __getitem__(self, index: int | slice) -> Array | Self:
        """An integer returns one frame `(B... H W 3)`; a slice returns a clip."""
        if isinstance(index, slice):
            return self.replace(frames=self.frames[..., index, :, :, :])
        return self.frames[..., index, :, :, :]

    def map_frames(self, fn) -> Self:
        """Applies ``fn`` to the frames array and wraps the result."""
        return self.replace(frames=fn(self.frames))


class LRHRPair(struct.PyTreeNode):
    """
    Aligned low- and high-resolution versions of the same clip.

    Attributes:
        lr: The low-resolution clip of spatial shape `(h w)`.
        hr: The high-resolution clip of spatial shape `(scale*h scale*w)`.
        scale: The integer resolution ratio between ``hr`` and ``lr``.
    """

    lr: VideoClip
    hr: VideoClip
    scale: int = struct.field(pytree_node=False, default=4)

    @classmethod
    def create(cls, lr: VideoClip, hr: VideoClip, scale: int = 4) -> Self:
        """Create a pair, validating length, scene and the resolution ratio."""
        if lr.num_frames != hr.num_frames:
            raise ValueError(
                f"LR and HR clips must have equal length, got {lr.num_frames} "
                f"and {hr.num_frames}"
            )
        if lr.scene_id != hr.scene_id:
            raise ValueError(
                f"LR and HR scene ids differ: {lr.scene_id!r} vs {hr.scene_id!r}"
            )
        h, w = lr.spatial_shape
        if hr.spatial_shape != (h * scale, w * scale):
            raise ValueError(
                f"HR dims {hr.spatial_shape} must be exactly {scale}x LR dims {(h, w)}"
            )
        return cls(lr, hr, scale)

    @property
    def scene_id(self) -> str:
        return self.hr.scene_id

    @property
    def num_frames(self) -> int:
        return self.hr.num_frames
