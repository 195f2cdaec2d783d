from typing import Any, Sequence

import jax
import jax.numpy as jnp
import numpy as np
from jax import Array

__all__ = [
    "gaussian_kernel_1d",
    "gaussian_kernel",
    "center_crop",
    "reflect_index",
    "count_params",
]


def gaussian_kernel_1d(sigma: float, ksize: int) -> Array:
    """
    Creates a 1D Gaussian kernel of odd length ``ksize`` normalized to sum 1.

    Args:
        sigma: The standard deviation of the Gaussian, in pixels. Must be
            positive.
        ksize: The number of taps. Must be odd and positive so that there is a
            center tap.

    Returns:
        The kernel as an array of shape ``(ksize,)``.
    """
    if ksize <= 0 or ksize % 2 == 0:
        raise ValueError(f"ksize must be an odd positive integer, got {ksize}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = (ksize - 1) // 2
    x = jnp.arange(-radius, radius + 1, dtype=jnp.result_type(float))
    phi = jnp.exp(-0.5 * (x / sigma) ** 2)
    return phi / phi.sum()


def gaussian_kernel(sigma: float, ksize: int, ndim: int = 2) -> Array:
    """
    Creates an ND isotropic Gaussian kernel as the outer product of
    ``gaussian_kernel_1d``. The result has shape ``(ksize,) * ndim`` and sums
    to 1.
    """
    k = gaussian_kernel_1d(sigma, ksize)
    kernel = k
    for _ in range(ndim - 1):
        kernel = jnp.multiply.outer(kernel, k)
    return kernel


def center_crop(u: Array, crop_length: Sequence[int | tuple[int, int] | None]) -> Array:
    """
    Crops ``u`` with lengths specified per axis in ``crop_length``, which
    should be iterable with same size as ``u.ndim``. An integer removes the
    same number of elements from both sides, a tuple ``(before, after)`` removes
    an asymmetric amount and ``None`` leaves the axis untouched.
    """
    crop = []
    for size, length in zip(u.shape, crop_length):
        if length is None:
            length = (0, 0)
        elif isinstance(length, int):
            length = (length, length)
        crop.append(slice(length[0], size - length[1]))
    return u[tuple(crop)]


def reflect_index(i: int, length: int) -> int:
    """
    Reflects index ``i`` into ``[0, length)`` without repeating the edge,
    i.e. ``-1 -> 1`` and ``length -> length - 2``. A length 1 sequence maps
    every index to 0.
    """
    if length == 1:
        return 0
    period = 2 * (length - 1)
    i = i % period
    return period - i if i >= length else i


def count_params(params: Any) -> int:
    """Total number of scalar entries over all leaves of a parameter pytree."""
    return int(sum(np.size(leaf) for leaf in jax.tree_util.tree_leaves(params)))
