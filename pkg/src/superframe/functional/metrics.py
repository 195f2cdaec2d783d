from typing import Callable, Sequence

import jax.numpy as jnp
import numpy as np
from jax import Array

from superframe.ops import separable_filter
from superframe.typing import FlowField, Frame
from superframe.utils import gaussian_kernel_1d

from .flow import luma, pyramid_flow

__all__ = [
    "psnr",
    "ssim",
    "lpips_from_features",
    "lpips",
    "tof_per_frame",
    "tof",
    "tlp_per_frame",
    "tlp",
]

FeatureFn = Callable[[Frame], Sequence[Array]]
DistanceFn = Callable[[Frame, Frame], Array]
FlowFn = Callable[[Frame, Frame], FlowField]


def _check_pair(a: Array, b: Array) -> tuple[Array, Array]:
    a, b = jnp.asarray(a), jnp.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"Frames must have equal shapes, got {a.shape} and {b.shape}")
    return a, b


def psnr(a: Frame, b: Frame, max_val: float = 255.0) -> Array:
    """
    Peak signal-to-noise ratio in dB between frames with values in [0, 1].

    Both frames are mapped to [0, 255] before computing
    ``10 * log10(max_val**2 / MSE)`` over all pixels and channels. Identical
    frames give ``inf``.

    Args:
        a: Frame of shape `(B... H W 3)`.
        b: Frame of the same shape.
        max_val: The peak value in the [0, 255] domain.

    Returns:
        The PSNR of shape `(B...)`.
    """
    a, b = _check_pair(a, b)
    mse = jnp.mean((255.0 * a - 255.0 * b) ** 2, axis=(-3, -2, -1))
    safe = jnp.where(mse == 0, 1.0, mse)
    return jnp.where(mse == 0, jnp.inf, 10.0 * jnp.log10(max_val**2 / safe))


def ssim(
    a: Frame,
    b: Frame,
    window_size: int = 11,
    sigma: float = 1.5,
    k1: float = 0.01,
    k2: float = 0.03,
    data_range: float = 255.0,
) -> Array:
    """
    Structural similarity of the luma of two frames.

    Frames are mapped to [0, 255] and converted to ITU-R 601 luma. Local
    statistics use a ``window_size`` Gaussian window of standard deviation
    ``sigma``; only positions where the window fits inside the frame are
    used, and the local SSIM values are averaged.

    Returns:
        The SSIM of shape `(B...)`, in [-1, 1].
    """
    a, b = _check_pair(a, b)
    h, w = a.shape[-3], a.shape[-2]
    if h < window_size or w < window_size:
        raise ValueError(
            f"Frames of dims ({h}, {w}) are smaller than the {window_size}x{window_size} SSIM window"
        )
    x, y = luma(255.0 * a), luma(255.0 * b)
    kernel = gaussian_kernel_1d(sigma, window_size).astype(x.dtype)

    def filt(z: Array) -> Array:
        return separable_filter(z, kernel, mode="valid")

    c1, c2 = (k1 * data_range) ** 2, (k2 * data_range) ** 2
    mu_x, mu_y = filt(x), filt(y)
    var_x = filt(x * x) - mu_x**2
    var_y = filt(y * y) - mu_y**2
    cov = filt(x * y) - mu_x * mu_y
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    )
    return jnp.mean(ssim_map, axis=(-3, -2, -1))


def lpips_from_features(
    feats_a: Sequence[Array], feats_b: Sequence[Array], epsilon: float = 1e-10
) -> Array:
    """
    Perceptual distance between two lists of feature maps: every map is
    normalized to unit length over its channels, the squared differences are
    summed over channels and averaged over space, and the stages are summed.
    """
    if len(feats_a) != len(feats_b):
        raise ValueError(
            f"Feature lists must have equal length, got {len(feats_a)} and {len(feats_b)}"
        )
    total = 0.0
    for fa, fb in zip(feats_a, feats_b):
        fa = fa / (jnp.sqrt(jnp.sum(fa**2, axis=-1, keepdims=True)) + epsilon)
        fb = fb / (jnp.sqrt(jnp.sum(fb**2, axis=-1, keepdims=True)) + epsilon)
        total = total + jnp.mean(jnp.sum((fa - fb) ** 2, axis=-1), axis=(-2, -1))
    return jnp.asarray(total)


def lpips(a: Frame, b: Frame, features_fn: FeatureFn) -> Array:
    """
    Perceptual distance between ``a`` and ``b`` under the feature
    extractor ``features_fn``; identical frames give 0.
    """
    a, b = _check_pair(a, b)
    return lpips_from_features(features_fn(a), features_fn(b))


def _check_clips(gt: Array, gen: Array, indices: Sequence[int] | None) -> list[int]:
    gt, gen = _check_pair(gt, gen)
    n = gt.shape[-4]
    if n < 2:
        raise ValueError(f"Temporal metrics need a minimum of 2 frames, got {n}")
    indices = list(range(1, n)) if indices is None else [int(t) for t in indices]
    if not indices:
        raise ValueError("No frames retained for the temporal metric")
    for t in indices:
        if not 1 <= t < n:
            raise ValueError(f"Temporal metric index {t} must lie in [1, {n - 1}]")
    return indices


def tof_per_frame(
    gt: Array,
    gen: Array,
    flow_fn: FlowFn = pyramid_flow,
    indices: Sequence[int] | None = None,
) -> np.ndarray:
    """
    Per-frame temporal optical-flow error between clips of shape `(T H W 3)`.

    For every retained ``t`` (default: all ``t >= 1``) the value is the mean
    over pixels of the L1 norm of ``OF(gt[t-1], gt[t]) - OF(gen[t-1], gen[t])``.
    """
    indices = _check_clips(gt, gen, indices)
    values = []
    for t in indices:
        diff = flow_fn(gt[t - 1], gt[t]) - flow_fn(gen[t - 1], gen[t])
        values.append(float(jnp.mean(jnp.sum(jnp.abs(diff), axis=-1))))
    return np.asarray(values)


def tof(
    gt: Array,
    gen: Array,
    flow_fn: FlowFn = pyramid_flow,
    indices: Sequence[int] | None = None,
) -> float:
    """Mean of ``tof_per_frame`` over the retained frames."""
    return float(np.mean(tof_per_frame(gt, gen, flow_fn, indices)))


def tlp_per_frame(
    gt: Array,
    gen: Array,
    distance_fn: DistanceFn,
    indices: Sequence[int] | None = None,
) -> np.ndarray:
    """
    Per-frame temporal perceptual error
    ``|LP(gt[t-1], gt[t]) - LP(gen[t-1], gen[t])|`` for every retained ``t``.
    """
    indices = _check_clips(gt, gen, indices)
    values = []
    for t in indices:
        d_gt = distance_fn(gt[t - 1], gt[t])
        d_gen = distance_fn(gen[t - 1], gen[t])
        values.append(float(jnp.abs(d_gt - d_gen)))
    return np.asarray(values)


def tlp(
    gt: Array,
    gen: Array,
    distance_fn: DistanceFn,
    indices: Sequence[int] | None = None,
) -> float:
    """Mean of ``tlp_per_frame`` over the retained frames."""
    return float(np.mean(tlp_per_frame(gt, gen, distance_fn, indices)))
