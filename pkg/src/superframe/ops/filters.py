from typing import Literal

import jax.numpy as jnp
from jax import Array

from superframe.typing import ArrayLike
from superframe.utils import gaussian_kernel_1d

__all__ = ["correlate1d", "separable_filter", "gaussian_blur"]


def correlate1d(
    data: ArrayLike,
    kernel: ArrayLike,
    axis: int,
    mode: Literal["reflect", "valid"] = "reflect",
) -> Array:
    """
    Correlates ``data`` with the 1D ``kernel`` along ``axis``.

    The correlation is computed as a weighted sum of shifted slices, so it is
    exact, differentiable and independent of FFT padding. With ``mode="reflect"``
    the input is mirror-padded without repeating the edge sample (``d c b | a b
    c d``) and the output has the same shape as ``data``. With ``mode="valid"``
    only fully overlapping positions are returned.

    Args:
        data: The input array.
        kernel: A 1D array of odd length.
        axis: The axis to filter along.
        mode: Either ``"reflect"`` or ``"valid"``.
    """
    data = jnp.asarray(data)
    kernel = jnp.asarray(kernel)
    axis = axis % data.ndim
    ksize = kernel.shape[0]
    radius = (ksize - 1) // 2
    if mode == "reflect":
        pad = [(0, 0)] * data.ndim
        pad[axis] = (radius, radius)
        data = jnp.pad(data, pad, mode="reflect")
    elif mode != "valid":
        raise ValueError(f"mode must be 'reflect' or 'valid', got {mode!r}")
    n_out = data.shape[axis] - ksize + 1
    if n_out < 1:
        raise ValueError(
            f"Axis {axis} of size {data.shape[axis]} is smaller than kernel size {ksize}"
        )
    out = 0.0
    for k in range(ksize):
        out = out + kernel[k] * jnp.take(data, jnp.arange(k, k + n_out), axis=axis)
    return out


def separable_filter(
    data: ArrayLike,
    kernel: ArrayLike,
    axes: tuple[int, int] = (-3, -2),
    mode: Literal["reflect", "valid"] = "reflect",
) -> Array:
    """Applies the same 1D ``kernel`` along both ``axes`` of ``data``."""
    for axis in axes:
        data = correlate1d(data, kernel, axis, mode=mode)
    return data


def gaussian_blur(frame: ArrayLike, sigma: float = 1.5, ksize: int = 13) -> Array:
    """
    Blurs ``frame`` of shape `(B... H W C)` with a separable Gaussian.

    The kernel is sampled from the Gaussian formula at integer offsets and
    normalized to sum 1, so constant frames are reproduced exactly. Borders are
    handled by reflect padding.

    Args:
        frame: The input of shape `(B... H W C)`.
        sigma: The standard deviation of the Gaussian in pixels. Must be
            positive.
        ksize: The number of taps per axis. Must be odd.

    Returns:
        The blurred frame, same shape as ``frame``.
    """
    kernel = gaussian_kernel_1d(sigma, ksize)
    return separable_filter(frame, kernel.astype(jnp.result_type(frame, kernel)))
