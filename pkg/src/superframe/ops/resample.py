import jax.numpy as jnp
from einops import reduce
from jax import Array
from jax.image import scale_and_translate

from superframe.typing import ArrayLike

__all__ = [
    "bicubic_resize",
    "bicubic_downsample",
    "bicubic_upsample",
    "pooling_downsample",
    "resize_flow",
]

_BORDER = 2


def bicubic_resize(data: ArrayLike, out_shape: tuple[int, int]) -> Array:
    """
    Resamples ``data`` of shape `(B... H W C)` to spatial shape ``out_shape``
    with the Keys cubic kernel (``a = -0.5``) and half-pixel centers.

    No antialiasing is applied when downsampling: output pixel ``j`` is the
    4-tap kernel sum around source coordinate ``(j + 0.5) * H / h - 0.5``.
    Taps falling outside the input take the value of the nearest border
    pixel.
    """
    data = jnp.asarray(data)
    ndim = data.ndim
    spatial_dims = (ndim - 3, ndim - 2)
    in_shape = data.shape[ndim - 3 : ndim - 1]
    scale = jnp.array(
        [out_shape[0] / in_shape[0], out_shape[1] / in_shape[1]], dtype=data.dtype
    )
    # Edge padding covers the 2-pixel kernel reach, so no tap is dropped.
    pad = [(0, 0)] * (ndim - 3) + [(_BORDER, _BORDER)] * 2 + [(0, 0)]
    data = jnp.pad(data, pad, mode="edge")
    translation = -_BORDER * scale
    shape = data.shape[: ndim - 3] + tuple(out_shape) + data.shape[-1:]
    return scale_and_translate(
        data,
        shape,
        spatial_dims,
        scale,
        translation,
        method="cubic",
        antialias=False,
    )


def bicubic_downsample(frame: ArrayLike, scale: int = 4) -> Array:
    """
    Downsamples ``frame`` of shape `(B... H W C)` by the integer factor
    ``scale`` with bicubic interpolation and clamps the result to [0, 1].

    Args:
        frame: The frame to downsample. ``H`` and ``W`` must be divisible by
            ``scale``; crop first otherwise.
        scale: The integer downsampling factor.

    Returns:
        The downsampled frame of shape `(B... H/scale W/scale C)`.
    """
    frame = jnp.asarray(frame)
    h, w = frame.shape[-3], frame.shape[-2]
    if scale < 1:
        raise ValueError(f"scale must be a positive integer, got {scale}")
    if h % scale != 0 or w % scale != 0:
        raise ValueError(
            f"Frame dims ({h}, {w}) must be divisible by scale {scale}; crop first"
        )
    out = bicubic_resize(frame, (h // scale, w // scale))
    return jnp.clip(out, 0.0, 1.0)


def bicubic_upsample(frame: ArrayLike, scale: int = 4) -> Array:
    """
    Upsamples ``frame`` of shape `(B... h w C)` by the integer factor ``scale``
    with bicubic interpolation. The result is not clamped, so it stays
    differentiable everywhere; clamp at display time if needed.
    """
    frame = jnp.asarray(frame)
    h, w = frame.shape[-3], frame.shape[-2]
    return bicubic_resize(frame, (h * scale, w * scale))


def pooling_downsample(
    data: Array, window_size: tuple[int, int] = (2, 2), reduction: str = "mean"
) -> Array:
    """
    Wrapper for downsampling input of shape `(B... H W C)` along `(H W)`.

    By default, downsampling is performed as a 2D average pooling. Trailing
    rows or columns that do not fill a whole window are dropped. Also accepts
    the other ``einops`` reductions (`'max'`, `'min'`, `'sum'`, `'prod'`).
    """
    h = (data.shape[-3] // window_size[0]) * window_size[0]
    w = (data.shape[-2] // window_size[1]) * window_size[1]
    return reduce(
        data[..., :h, :w, :],
        "... (h h_size) (w w_size) c -> ... h w c",
        reduction,
        h_size=window_size[0],
        w_size=window_size[1],
    )


def resize_flow(flow: Array, out_shape: tuple[int, int]) -> Array:
    """
    Resizes a flow field of shape `(B... h w 2)` to ``out_shape`` with linear
    interpolation and rescales the displacements by the per-axis size ratio,
    so vectors stay expressed in pixels of the new grid.
    """
    h, w = flow.shape[-3], flow.shape[-2]
    shape = flow.shape[:-3] + tuple(out_shape) + (2,)
    resized = jnp.asarray(
        scale_and_translate(
            flow,
            shape,
            (flow.ndim - 3, flow.ndim - 2),
            jnp.array([out_shape[0] / h, out_shape[1] / w], dtype=flow.dtype),
            jnp.zeros(2, dtype=flow.dtype),
            method="linear",
            antialias=False,
        )
    )
    ratio = jnp.array([out_shape[1] / w, out_shape[0] / h], dtype=flow.dtype)
    return resized * ratio
