import jax.numpy as jnp
import numpy as np
import pytest

from superframe.ops import (
    bicubic_downsample,
    bicubic_resize,
    bicubic_upsample,
    pooling_downsample,
    resize_flow,
)


def keys_weights(t: float) -> np.ndarray:
    """Weights of the taps at offsets -1, 0, 1, 2 for fractional position t."""
    a = -0.5

    def w(x):
        x = abs(x)
        if x <= 1:
            return (a + 2) * x**3 - (a + 3) * x**2 + 1
        if x < 2:
            return a * x**3 - 5 * a * x**2 + 8 * a * x - 4 * a
        return 0.0

    return np.array([w(t + 1), w(t), w(1 - t), w(2 - t)])


def resize_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Keys resampling from n_in to n_out samples with clamped border taps."""
    m = np.zeros((n_out, n_in))
    for j in range(n_out):
        center = (j + 0.5) * n_in / n_out - 0.5
        base = int(np.floor(center))
        for k, weight in zip(range(base - 1, base + 3), keys_weights(center - base)):
            m[j, min(max(k, 0), n_in - 1)] += weight
    return m


def downsample_matrix(n: int, scale: int) -> np.ndarray:
    return resize_matrix(n, n // scale)


def test_keys_weights_for_factor_four():
    assert np.allclose(keys_weights(0.5), [-0.0625, 0.5625, 0.5625, -0.0625])


def test_downsample_matches_keys_kernel():
    rng = np.random.default_rng(0)
    frame = rng.uniform(size=(32, 32, 3))
    m = downsample_matrix(32, 4)
    expected = np.einsum("ih,jw,hwc->ijc", m, m, frame)
    result = bicubic_resize(frame, (8, 8))
    assert result.shape == (8, 8, 3)
    assert np.allclose(result, expected, atol=1e-5)


def test_upsample_clamps_border_taps():
    rng = np.random.default_rng(1)
    frame = rng.uniform(size=(6, 5, 3))
    expected = np.einsum("ih,jw,hwc->ijc", resize_matrix(6, 24), resize_matrix(5, 20), frame)
    result = bicubic_upsample(frame, 4)
    assert result.shape == (24, 20, 3)
    assert np.allclose(result[:2], expected[:2], atol=1e-5)
    assert np.allclose(result[:, -2:], expected[:, -2:], atol=1e-5)
    assert np.allclose(result, expected, atol=1e-5)


@pytest.mark.parametrize("scale", [2, 4])
def test_downsample_shapes(scale):
    frames = jnp.zeros((2, 3, 16, 24, 3))
    assert bicubic_downsample(frames, scale).shape == (2, 3, 16 // scale, 24 // scale, 3)
    assert bicubic_upsample(frames, scale).shape == (2, 3, 16 * scale, 24 * scale, 3)


def test_downsample_clamps():
    frame = np.zeros((16, 16, 3))
    frame[:, 0::4] = 1.0
    frame[:, 3::4] = 1.0
    assert np.allclose(bicubic_resize(frame, (4, 4)), -0.125, atol=1e-6)
    assert np.allclose(bicubic_downsample(frame, 4), 0.0)
    assert np.allclose(bicubic_downsample(1.0 - frame, 4), 1.0)


def test_downsample_indivisible():
    with pytest.raises(ValueError):
        bicubic_downsample(jnp.zeros((18, 16, 3)), 4)


@pytest.mark.parametrize("value", [0.0, 0.3, 1.0])
def test_constants_preserved(value):
    frame = jnp.full((16, 20, 3), value)
    assert np.allclose(bicubic_downsample(frame, 4), value, atol=1e-6)
    assert np.allclose(bicubic_upsample(frame, 4), value, atol=1e-6)


def test_pooling_downsample():
    data = jnp.arange(16.0).reshape(4, 4, 1)
    out = pooling_downsample(data, (2, 2))
    assert out.shape == (2, 2, 1)
    assert np.allclose(out[..., 0], [[2.5, 4.5], [10.5, 12.5]])
    assert np.allclose(pooling_downsample(data, (2, 2), "max")[..., 0], [[5, 7], [13, 15]])


def test_pooling_drops_remainder():
    assert pooling_downsample(jnp.ones((5, 7, 3)), (2, 2)).shape == (2, 3, 3)


def test_resize_flow_rescales_vectors():
    flow = jnp.broadcast_to(jnp.array([1.0, 2.0]), (8, 16, 2))
    resized = resize_flow(flow, (32, 32))
    assert resized.shape == (32, 32, 2)
    # width grows by 2, height by 4
    assert np.allclose(resized[..., 0], 2.0, atol=1e-5)
    assert np.allclose(resized[..., 1], 8.0, atol=1e-5)
