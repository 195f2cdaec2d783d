import math

import jax
import jax.numpy as jnp
import numpy as np
import pytest
from chex import assert_shape

from superframe.elements import Discriminator, discriminate
from superframe.functional import assemble_input, triplet_starts


def triplets(key, shape=(2, 3, 20, 12, 3)):
    k1, k2, k3 = jax.random.split(key, 3)
    return (
        jax.random.uniform(k1, shape),
        jax.random.uniform(k2, shape),
        jax.random.uniform(k3, shape),
    )


def test_assemble_input_channel_order():
    frames, upsampled, warped = triplets(jax.random.PRNGKey(0))
    x = assemble_input(frames, upsampled)
    assert_shape(x, (2, 20, 12, 18))
    assert np.array_equal(x[..., 3:6], frames[:, 1])
    assert np.array_equal(x[..., 15:18], upsampled[:, 2])
    assert_shape(assemble_input(frames, upsampled, warped), (2, 20, 12, 27))


def test_assemble_input_validation():
    frames, upsampled, _ = triplets(jax.random.PRNGKey(1))
    with pytest.raises(ValueError):
        assemble_input(frames[:, :2], upsampled[:, :2])
    with pytest.raises(ValueError):
        assemble_input(frames, upsampled[..., :10, :])


def test_triplet_starts():
    assert triplet_starts(3) == [0]
    assert triplet_starts(7) == [0, 3]
    assert triplet_starts(9) == [0, 3, 6]
    with pytest.raises(ValueError):
        triplet_starts(2)


def test_discriminator_output():
    frames, upsampled, _ = triplets(jax.random.PRNGKey(2))
    x = assemble_input(frames, upsampled)
    disc = Discriminator()
    variables = disc.init(jax.random.PRNGKey(3), x)
    out = discriminate(disc, variables, x)
    assert_shape(out.logit, (2,))
    assert np.all((out.score > 0) & (out.score < 1))
    assert np.allclose(out.score, jax.nn.sigmoid(out.logit))
    assert len(out.features) == 4
    for i, f in enumerate(out.features, 1):
        assert f.shape[-3:-1] == (math.ceil(20 / 2**i), math.ceil(12 / 2**i))


@pytest.mark.parametrize("value", [0.0, 1.0])
def test_discriminator_score_on_constant_rasters(value):
    x = jnp.full((2, 16, 16, 18), value)
    disc = Discriminator()
    variables = disc.init(jax.random.PRNGKey(8), x)
    out = disc.apply(variables, x)
    assert np.all(np.isfinite(out.score))
    assert np.all((out.score > 0) & (out.score < 1))


@pytest.mark.parametrize("bias", [-40.0, 40.0])
def test_discriminator_score_saturated_logit(bias):
    x = jax.random.uniform(jax.random.PRNGKey(9), (2, 16, 16, 18))
    disc = Discriminator(features=(8, 8))
    variables = disc.init(jax.random.PRNGKey(10), x)
    params = dict(variables["params"])
    params["Dense_0"] = {**params["Dense_0"], "bias": jnp.full((1,), bias)}
    out = disc.apply({"params": params}, x)
    assert np.all((out.score > 0) & (out.score < 1))


def test_discriminator_input_gradient():
    x = jax.random.uniform(jax.random.PRNGKey(11), (1, 16, 16, 18))
    disc = Discriminator(features=(8, 8, 8, 8))
    variables = disc.init(jax.random.PRNGKey(12), x)

    def logit(x):
        return jnp.sum(disc.apply(variables, x).logit)

    grad = jax.grad(logit)(x)
    norm = jnp.linalg.norm(grad)
    assert float(norm) > 0.0
    eps = 1e-2
    direction = grad / norm
    fd = (logit(x + eps * direction) - logit(x - eps * direction)) / (2 * eps)
    assert float(fd) > 0.0


def test_discriminator_warped_input():
    frames, upsampled, warped = triplets(jax.random.PRNGKey(4), (1, 3, 8, 8, 3))
    disc = Discriminator(features=(8, 8), include_warped_triplet=True)
    x = assemble_input(frames, upsampled, warped)
    out = disc.apply(disc.init(jax.random.PRNGKey(5), x), x)
    assert_shape(out.logit, (1,))


def test_discriminator_rejects_channels():
    with pytest.raises(ValueError):
        Discriminator().init(jax.random.PRNGKey(0), jnp.zeros((1, 8, 8, 27)))


def test_discriminator_deterministic():
    frames, upsampled, _ = triplets(jax.random.PRNGKey(6))
    x = assemble_input(frames, upsampled)
    disc = Discriminator()
    variables = disc.init(jax.random.PRNGKey(7), x)
    assert np.array_equal(disc.apply(variables, x).logit, disc.apply(variables, x).logit)
