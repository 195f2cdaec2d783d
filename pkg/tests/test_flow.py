import jax
import jax.numpy as jnp
import numpy as np
import pytest

from superframe.data import checkerboard_frame, ramp_frame, translating_clip
from superframe.elements import FlowEstimator, FlowNet, estimate_flow
from superframe.functional import luma, pyramid_flow, warp, zero_flow


def uniform_flow(shape, dx, dy):
    return jnp.broadcast_to(jnp.array([dx, dy], dtype=jnp.float32), tuple(shape) + (2,))


def test_warp_identity():
    frame = jnp.asarray(checkerboard_frame((12, 16)))
    assert np.array_equal(warp(frame, zero_flow(frame)), frame)


def test_warp_integer_shift():
    rng = np.random.default_rng(0)
    frame = rng.uniform(size=(10, 12, 3))
    shifted = warp(frame, uniform_flow((10, 12), 2.0, 0.0))
    assert np.allclose(shifted[:, :-2], frame[:, 2:], atol=1e-6)
    # samples beyond the right border repeat the last column
    assert np.allclose(shifted[:, -1], frame[:, -1], atol=1e-6)
    shifted = warp(frame, uniform_flow((10, 12), 0.0, -1.0))
    assert np.allclose(shifted[1:], frame[:-1], atol=1e-6)


def test_warp_half_pixel_on_ramp():
    frame = ramp_frame((4, 9), axis=1)
    warped = warp(frame, uniform_flow((4, 9), 0.5, 0.0))
    x = np.arange(8)
    assert np.allclose(warped[0, :8, 0], (x + 0.5) / 8, atol=1e-6)


def test_warp_linear_in_frame():
    rng = np.random.default_rng(1)
    f, g = rng.uniform(size=(2, 8, 8, 3))
    flow = jnp.asarray(rng.normal(size=(8, 8, 2)), dtype=jnp.float32)
    lhs = warp(0.3 * f + 0.7 * g, flow)
    rhs = 0.3 * warp(f, flow) + 0.7 * warp(g, flow)
    assert np.allclose(lhs, rhs, atol=1e-5)


def test_warp_broadcasts_batch_dims():
    rng = np.random.default_rng(2)
    frame = rng.uniform(size=(8, 8, 3))
    flows = jnp.stack([uniform_flow((8, 8), 1.0, 0.0), uniform_flow((8, 8), 0.0, 1.0)])
    warped = warp(frame, flows)
    assert warped.shape == (2, 8, 8, 3)
    assert np.allclose(warped[1], warp(frame, flows[1]))


def test_warp_differentiable_in_flow():
    frame = jnp.asarray(ramp_frame((6, 6), axis=1))
    grad = jax.grad(lambda d: warp(frame, uniform_flow((6, 6), d, 0.0))[2, 2, 0])(0.25)
    assert np.isclose(grad, 1 / 5, atol=1e-5)


def test_warp_shape_mismatch():
    with pytest.raises(ValueError):
        warp(jnp.zeros((8, 8, 3)), jnp.zeros((8, 6, 2)))


def test_luma():
    frame = jnp.ones((2, 2, 3)) * jnp.array([1.0, 0.0, 0.0])
    assert np.allclose(luma(frame), 0.299)
    assert luma(frame).shape == (2, 2, 1)


def test_pyramid_flow_translation():
    clip = translating_clip(2, (64, 64), velocity=(2.0, 0.0))
    src, dst = clip[1], clip[0]
    flow = pyramid_flow(src, dst)
    assert flow.shape == (64, 64, 2)
    interior = flow[16:-16, 16:-16]
    assert abs(float(interior[..., 0].mean()) - 2.0) < 0.5
    assert float(jnp.abs(interior[..., 1]).mean()) < 0.5
    aligned = jnp.abs(warp(src, flow) - dst)[16:-16, 16:-16].mean()
    unaligned = jnp.abs(src - dst)[16:-16, 16:-16].mean()
    assert aligned < 0.5 * unaligned


def test_pyramid_flow_static():
    clip = translating_clip(1, (32, 32))
    assert np.allclose(pyramid_flow(clip[0], clip[0]), 0.0, atol=1e-5)


def test_pyramid_flow_deterministic():
    clip = translating_clip(2, (32, 32), velocity=(1.0, 1.0))
    assert np.array_equal(pyramid_flow(clip[0], clip[1]), pyramid_flow(clip[0], clip[1]))


@pytest.mark.parametrize("variant", ["zero", "learned", "pyramid-classical", "pyramid"])
def test_estimator_variants_keep_dims(variant):
    clip = translating_clip(2, (24, 32))
    src, dst = clip.frames[:1], clip.frames[1:]
    estimator = FlowEstimator(variant)
    variables = estimator.init(jax.random.PRNGKey(0), src, dst)
    flow = estimate_flow(estimator, variables, src, dst)
    assert flow.shape == (1, 24, 32, 2)
    assert np.all(np.isfinite(flow))


def test_pyramid_classical_variant_is_pyramid_flow():
    clip = translating_clip(2, (32, 32), velocity=(2.0, 0.0))
    src, dst = clip.frames[0], clip.frames[1]
    for variant in ("pyramid-classical", "pyramid"):
        flow = estimate_flow(FlowEstimator(variant), {}, src, dst)
        assert np.array_equal(flow, pyramid_flow(src, dst))
    with pytest.raises(ValueError):
        estimate_flow(FlowEstimator("classical"), {}, src, dst)


def test_zero_variant_has_no_params():
    estimator = FlowEstimator("zero")
    frame = jnp.zeros((8, 8, 3))
    assert not jax.tree_util.tree_leaves(estimator.init(jax.random.PRNGKey(0), frame, frame))
    assert np.array_equal(estimate_flow(estimator, {}, frame, frame), zero_flow(frame))


def test_untrained_flownet_is_static():
    clip = translating_clip(2, (16, 16))
    net = FlowNet()
    variables = net.init(jax.random.PRNGKey(0), clip[0], clip[1])
    assert np.array_equal(net.apply(variables, clip[0], clip[1]), zero_flow(clip[0]))


def test_flownet_gradients_flow_to_params():
    clip = translating_clip(2, (16, 16), velocity=(1.0, 0.0))
    net = FlowNet(num_levels=2, features=(8, 8))
    variables = net.init(jax.random.PRNGKey(0), clip[0], clip[1])

    def loss(params):
        flow = net.apply({"params": params}, clip[0], clip[1])
        return jnp.mean((warp(clip[0], flow) - clip[1]) ** 2)

    grads = jax.grad(loss)(variables["params"])
    norms = [float(jnp.abs(g).sum()) for g in jax.tree_util.tree_leaves(grads)]
    assert max(norms) > 0


def test_estimator_rejects_mismatched_frames():
    estimator = FlowEstimator("zero")
    with pytest.raises(ValueError):
        estimator.init(jax.random.PRNGKey(0), jnp.zeros((8, 8, 3)), jnp.zeros((8, 4, 3)))
