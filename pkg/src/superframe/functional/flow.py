import math
from functools import partial

import jax
import jax.numpy as jnp
from jax import Array
from jax.scipy.ndimage import map_coordinates

from superframe.ops import gaussian_blur, pooling_downsample, resize_flow
from superframe.typing import FlowField, Frame
from superframe.utils.shapes import _check_flow, _check_frame, _check_same_spatial

__all__ = ["warp", "zero_flow", "luma", "pyramid_flow"]

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def _warp_single(frame: Array, flow: Array) -> Array:
    h, w = frame.shape[0], frame.shape[1]
    yy, xx = jnp.meshgrid(
        jnp.arange(h, dtype=flow.dtype), jnp.arange(w, dtype=flow.dtype), indexing="ij"
    )
    x = jnp.clip(xx + flow[..., 0], 0, w - 1)
    y = jnp.clip(yy + flow[..., 1], 0, h - 1)
    sample = partial(map_coordinates, coordinates=[y, x], order=1, mode="nearest")
    return jax.vmap(sample, in_axes=-1, out_axes=-1)(frame)


def warp(frame: Frame, flow: FlowField) -> Frame:
    """
    Resamples ``frame`` along ``flow`` with bilinear interpolation.

    Output pixel ``(x, y)`` is ``frame`` sampled at ``(x + dx, y + dy)``;
    sample coordinates are clamped to the frame, so pixels pointing outside
    repeat the border. The result is differentiable with respect to both
    arguments.

    Args:
        frame: The frame of shape `(B... H W C)`.
        flow: The displacements of shape `(B... H W 2)`, channel 0 being
            ``dx`` and channel 1 ``dy`` in pixels. Batch dims broadcast
            against those of ``frame``.

    Returns:
        The warped frame, same shape as ``frame`` after broadcasting.
    """
    frame, flow = jnp.asarray(frame), jnp.asarray(flow)
    _check_flow(flow)
    if frame.ndim < 3:
        raise ValueError(f"frame must have shape (B... H W C), got {frame.shape}")
    _check_same_spatial(frame, flow, names=("frame", "flow"))
    dtype = jnp.result_type(frame, flow, float)
    batch = jnp.broadcast_shapes(frame.shape[:-3], flow.shape[:-3])
    frame = jnp.broadcast_to(frame, batch + frame.shape[-3:]).astype(dtype)
    flow = jnp.broadcast_to(flow, batch + flow.shape[-3:]).astype(dtype)
    fn = _warp_single
    for _ in batch:
        fn = jax.vmap(fn)
    return fn(frame, flow)


def zero_flow(frame: Frame) -> FlowField:
    """An all-zero flow field matching the spatial dims of ``frame``."""
    return jnp.zeros(frame.shape[:-1] + (2,), dtype=jnp.result_type(frame, float))


def luma(frame: Frame) -> Array:
    """ITU-R 601 luma of an RGB ``frame``, keeping a singleton channel axis."""
    weights = jnp.asarray(LUMA_WEIGHTS, dtype=jnp.result_type(frame, float))
    return jnp.sum(frame * weights, axis=-1, keepdims=True)


def _reduce(x: Array) -> Array:
    return pooling_downsample(gaussian_blur(x, 1.0, 5))


def _lucas_kanade_step(
    src: Array, dst: Array, flow: Array, sigma: float, ksize: int, regularization: float
) -> Array:
    warped = warp(src, flow)[..., 0]
    error = dst[..., 0] - warped
    iy, ix = jnp.gradient(warped, axis=(-2, -1))
    products = jnp.stack(
        [ix * ix, ix * iy, iy * iy, ix * error, iy * error], axis=-1
    )
    a, b, c, rx, ry = jnp.moveaxis(gaussian_blur(products, sigma, ksize), -1, 0)
    a = a + regularization
    c = c + regularization
    det = a * c - b * b
    du = (c * rx - b * ry) / det
    dv = (a * ry - b * rx) / det
    # at most one pixel per iteration
    update = jnp.clip(jnp.stack([du, dv], axis=-1), -1.0, 1.0)
    return flow + update


@partial(
    jax.jit,
    static_argnames=("num_levels", "num_iterations", "window_sigma", "min_size"),
)
def pyramid_flow(
    src: Frame,
    dst: Frame,
    num_levels: int = 4,
    num_iterations: int = 5,
    window_sigma: float = 1.5,
    regularization: float = 1e-4,
    min_size: int = 8,
) -> FlowField:
    """
    Estimates dense optical flow with coarse-to-fine Lucas-Kanade.

    The flow follows the warping convention of ``warp``: the result ``d``
    satisfies ``warp(src, d) ≈ dst``, so content sitting 2 px further right
    in ``src`` than in ``dst`` gives ``dx ≈ +2``.

    Both frames are converted to luma and reduced by a light Gaussian blur
    followed by 2x2 average pooling into a pyramid of at most ``num_levels``
    levels whose smaller side stays at or above ``min_size``. Starting from zero motion at the coarsest level, each
    level runs ``num_iterations`` Gauss-Newton updates: ``src`` is warped with
    the current flow, and the local 2x2 structure tensor (summed with a
    Gaussian window of ``window_sigma``) is solved against the residual with
    Tikhonov ``regularization``. The flow is then upsampled to the next finer
    level. Every step is a fixed computation, so the estimate is
    deterministic.

    Args:
        src: The source frame of shape `(B... H W 3)`.
        dst: The destination frame, same shape as ``src``.
        num_levels: Maximum number of pyramid levels.
        num_iterations: Updates per level.
        window_sigma: Standard deviation of the aggregation window in pixels.
        regularization: Added to the diagonal of every structure tensor.
        min_size: Smallest allowed side length of a pyramid level.

    Returns:
        The flow of shape `(B... H W 2)`.
    """
    src, dst = jnp.asarray(src), jnp.asarray(dst)
    _check_frame(src, "src")
    _check_frame(dst, "dst")
    if src.shape != dst.shape:
        raise ValueError(f"src and dst must have equal shapes, got {src.shape} and {dst.shape}")
    ksize = 2 * math.ceil(2 * window_sigma) + 1
    pyramid = [(luma(src), luma(dst))]
    while len(pyramid) < num_levels:
        s, d = pyramid[-1]
        if min(s.shape[-3], s.shape[-2]) // 2 < min_size:
            break
        pyramid.append((_reduce(s), _reduce(d)))
    s, _ = pyramid[-1]
    flow = jnp.zeros(s.shape[:-1] + (2,), dtype=s.dtype)
    for s, d in reversed(pyramid):
        if flow.shape[-3:-1] != s.shape[-3:-1]:
            flow = resize_flow(flow, s.shape[-3:-1])
        for _ in range(num_iterations):
            flow = _lucas_kanade_step(s, d, flow, window_sigma, ksize, regularization)
    return flow
