import jax.numpy as jnp
from einops import rearrange
from jax import Array

from superframe.utils.shapes import _check_frame

__all__ = ["assemble_input", "triplet_starts"]


def _check_triplet(x: Array, name: str) -> None:
    _check_frame(x, name)
    if x.ndim < 4 or x.shape[-4] != 3:
        raise ValueError(f"{name} must have shape (B... 3 H W 3), got {x.shape}")


def assemble_input(
    triplet: Array, lr_triplet_upsampled: Array, warped_triplet: Array | None = None
) -> Array:
    """
    Stacks a triplet of HR frames and the matching upsampled LR triplet into a
    single raster for the discriminator.

    The output channels are ``[f_{t-1}, f_t, f_{t+1}, u_{t-1}, u_t, u_{t+1}]``
    (18 channels), followed by the optional warped triplet (27 channels).

    Args:
        triplet: Real or generated frames of shape `(B... 3 H W 3)`.
        lr_triplet_upsampled: The upsampled LR frames, same shape.
        warped_triplet: Optional flow-warped frames, same shape.

    Returns:
        A raster of shape `(B... H W 18)` or `(B... H W 27)`.
    """
    parts = [("triplet", triplet), ("lr_triplet_upsampled", lr_triplet_upsampled)]
    if warped_triplet is not None:
        parts.append(("warped_triplet", warped_triplet))
    for name, x in parts:
        _check_triplet(x, name)
    shapes = {x.shape for _, x in parts}
    if len(shapes) != 1:
        raise ValueError(
            "All triplets must share one shape, got "
            + ", ".join(f"{name}={x.shape}" for name, x in parts)
        )
    return jnp.concatenate(
        [rearrange(x, "... t h w c -> ... h w (t c)") for _, x in parts], axis=-1
    )


def triplet_starts(num_frames: int) -> list[int]:
    """
    Start indices of the non-overlapping triplets ``[s, s+1, s+2]`` of a clip.

    Raises:
        ValueError: If the clip has fewer than 3 frames.
    """
    if num_frames < 3:
        raise ValueError(f"Triplets need a minimum of 3 frames, got {num_frames}")
    return list(range(0, num_frames - 2, 3))
