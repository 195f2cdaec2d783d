import jax.numpy as jnp
import numpy as np
import pytest
from scipy import ndimage

from superframe.ops import correlate1d, gaussian_blur, separable_filter
from superframe.utils import gaussian_kernel, gaussian_kernel_1d


def test_gaussian_kernel():
    kernel = gaussian_kernel_1d(1.5, 13)
    x = np.arange(-6, 7)
    expected = np.exp(-0.5 * (x / 1.5) ** 2)
    assert np.allclose(kernel, expected / expected.sum())
    kernel_2d = gaussian_kernel(1.5, 5)
    assert kernel_2d.shape == (5, 5)
    assert np.isclose(kernel_2d.sum(), 1.0)


@pytest.mark.parametrize("ksize, sigma", [(4, 1.0), (0, 1.0), (5, 0.0), (5, -1.0)])
def test_gaussian_kernel_invalid(ksize, sigma):
    with pytest.raises(ValueError):
        gaussian_kernel_1d(sigma, ksize)


def test_correlate1d_against_scipy():
    rng = np.random.default_rng(0)
    data = rng.uniform(size=(12, 10, 3))
    kernel = np.array([0.1, 0.2, 0.4, 0.2, 0.05])
    for axis in (0, 1):
        result = correlate1d(data, kernel, axis)
        expected = ndimage.correlate1d(data, kernel, axis=axis, mode="mirror")
        assert np.allclose(result, expected, atol=1e-6)
    valid = correlate1d(data, kernel, 0, mode="valid")
    assert valid.shape == (8, 10, 3)
    assert np.allclose(valid, ndimage.correlate1d(data, kernel, axis=0)[2:-2], atol=1e-6)


def test_correlate1d_kernel_too_large():
    with pytest.raises(ValueError):
        correlate1d(np.zeros((3, 3, 1)), np.ones(5) / 5, 0, mode="valid")


def test_blur_constant():
    frame = jnp.full((20, 24, 3), 0.5)
    for sigma in (0.5, 1.5, 3.0):
        assert np.allclose(gaussian_blur(frame, sigma, 13), 0.5, atol=1e-6)


def test_blur_impulse():
    frame = np.zeros((9, 9, 1))
    frame[4, 4, 0] = 1.0
    blurred = gaussian_blur(frame, 1.5, 5)
    x = np.arange(-2, 3)
    k = np.exp(-0.5 * (x / 1.5) ** 2)
    k = k / k.sum()
    expected = np.zeros((9, 9))
    expected[2:7, 2:7] = np.outer(k, k)
    assert np.allclose(blurred[..., 0], expected, atol=1e-7)


def test_blur_against_scipy():
    rng = np.random.default_rng(1)
    frame = rng.uniform(size=(32, 32, 3))
    blurred = gaussian_blur(frame, 1.5, 13)
    # scipy's default truncate of 4 sigma gives the same 13 taps
    expected = ndimage.gaussian_filter(frame, sigma=(1.5, 1.5, 0), mode="mirror")
    assert np.allclose(blurred, expected, atol=1e-6)


def test_blur_semigroup():
    rng = np.random.default_rng(2)
    frame = rng.uniform(size=(64, 64, 1))
    # wide kernels so truncation stays below the tolerance
    twice = gaussian_blur(gaussian_blur(frame, 1.5, 21), 1.5, 21)
    once = gaussian_blur(frame, 1.5 * np.sqrt(2), 31)
    # the reflected border differs between the two, compare the center
    assert np.allclose(twice[24:40, 24:40], once[24:40, 24:40], atol=1e-5)


def test_blur_preserves_mean():
    rng = np.random.default_rng(3)
    frame = rng.uniform(size=(128, 128, 3))
    blurred = gaussian_blur(frame, 1.5, 13)
    assert abs(float(blurred.mean()) - frame.mean()) < 2e-3


def test_separable_filter_batch_dims():
    rng = np.random.default_rng(4)
    frames = rng.uniform(size=(2, 3, 10, 10, 3))
    kernel = gaussian_kernel_1d(1.0, 5)
    batched = separable_filter(frames, kernel)
    single = separable_filter(frames[1, 2], kernel)
    assert batched.shape == frames.shape
    assert np.allclose(batched[1, 2], single)
