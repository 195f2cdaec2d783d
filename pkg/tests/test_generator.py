import jax
import jax.numpy as jnp
import numpy as np
import pytest
from chex import assert_shape

from superframe import VideoClip, VideoSuperResolver
from superframe.elements import Generator, GeneratorConfig, NeighborPack
from superframe.functional import neighbor_indices, neighbor_offsets, neighbor_table
from superframe.ops import bicubic_upsample
from superframe.systems import describe, generate_sequence

jax.config.update("jax_enable_x64", True)

# The smallest width the generator accepts keeps these tests fast.
C = 8


def config(**kwargs):
    return GeneratorConfig(**{"base_channels": C, "n_residual_blocks": 1, **kwargs})


def random_inputs(key, shape=(1, 6, 7), n_neighbors=2):
    k1, k2, k3 = jax.random.split(key, 3)
    a_t = jax.random.uniform(k1, shape + (3,))
    neighbors = jax.random.uniform(k2, (n_neighbors,) + shape + (3,))
    flows = jax.random.normal(k3, (n_neighbors,) + shape + (2,))
    return a_t, NeighborPack.create(list(neighbors), list(flows))


def test_neighbor_offsets():
    assert neighbor_offsets(4) == [-1, 1, -2, 2]
    with pytest.raises(ValueError):
        neighbor_offsets(0)


def test_neighbor_indices_reflect():
    assert neighbor_indices(0, 5, 2) == [1, 1]
    assert neighbor_indices(2, 5, 4) == [1, 3, 0, 4]
    assert neighbor_indices(4, 5, 3) == [3, 3, 2]
    assert neighbor_table(1, 2).tolist() == [[0, 0]]
    with pytest.raises(ValueError):
        neighbor_indices(5, 5, 2)


def test_config_validation():
    with pytest.raises(ValueError):
        GeneratorConfig(scale=2)
    with pytest.raises(ValueError):
        GeneratorConfig(base_channels=4)
    with pytest.raises(ValueError):
        GeneratorConfig(n_neighbors=0)


def test_neighbor_pack():
    _, pack = random_inputs(jax.random.PRNGKey(0), n_neighbors=3)
    assert pack.num_neighbors == 3
    assert_shape(pack.frames, (1, 3, 6, 7, 3))
    frame, flow = pack[1]
    assert_shape(frame, (1, 6, 7, 3))
    assert_shape(flow, (1, 6, 7, 2))
    with pytest.raises(ValueError):
        NeighborPack.create([jnp.zeros((4, 4, 3))], [])
    with pytest.raises(ValueError):
        NeighborPack.create([jnp.zeros((4, 4, 3))], [jnp.zeros((4, 5, 2))])


@pytest.mark.parametrize(
    "shape",
    [(1, int(h), int(w)) for h, w in np.random.default_rng(0).integers(1, 17, size=(20, 2))],
)
def test_generate_shape(shape):
    a_t, pack = random_inputs(jax.random.PRNGKey(1), shape)
    generator = Generator(config())
    variables = generator.init(jax.random.PRNGKey(2), a_t, pack)
    g_t = generator.apply(variables, a_t, pack)
    assert_shape(g_t, (shape[0], 4 * shape[1], 4 * shape[2], 3))
    assert float(g_t.min()) >= 0.0
    assert float(g_t.max()) <= 1.0


def test_generate_batched_shape():
    a_t, pack = random_inputs(jax.random.PRNGKey(1), (2, 6, 7))
    generator = Generator(config())
    g_t = generator.apply(generator.init(jax.random.PRNGKey(2), a_t, pack), a_t, pack)
    assert_shape(g_t, (2, 24, 28, 3))


def test_zero_init_reconstruction_is_bicubic():
    a_t, pack = random_inputs(jax.random.PRNGKey(3))
    generator = Generator(config(zero_init_reconstruction=True))
    variables = generator.init(jax.random.PRNGKey(4), a_t, pack)
    g_t = generator.apply(variables, a_t, pack, train=True)
    assert np.allclose(g_t, bicubic_upsample(a_t, 4), atol=1e-6)


def test_wrong_neighbor_count():
    a_t, pack = random_inputs(jax.random.PRNGKey(5), n_neighbors=3)
    with pytest.raises(ValueError):
        Generator(config(n_neighbors=2)).init(jax.random.PRNGKey(0), a_t, pack)


def test_stage_methods():
    a_t, pack = random_inputs(jax.random.PRNGKey(6))
    generator = Generator(config())
    variables = generator.init(jax.random.PRNGKey(7), a_t, pack)
    L = generator.apply(variables, a_t, method=Generator.extract_target_features)
    assert_shape(L, (1, 6, 7, C))
    M = generator.apply(variables, a_t, *pack[0], method=Generator.extract_neighbor_features)
    H = generator.apply(variables, L, M, method=Generator.project_encode)
    assert_shape(H, (1, 24, 28, C))
    assert generator.apply(variables, H, method=Generator.project_decode).shape == L.shape
    with pytest.raises(ValueError):
        generator.apply(variables, H[:, :22], method=Generator.project_decode)


def test_neighbor_features_depend_on_neighbor():
    a_t, pack = random_inputs(jax.random.PRNGKey(16))
    generator = Generator(config())
    variables = generator.init(jax.random.PRNGKey(17), a_t, pack)
    M_0 = generator.apply(variables, a_t, *pack[0], method=Generator.extract_neighbor_features)
    M_1 = generator.apply(variables, a_t, *pack[1], method=Generator.extract_neighbor_features)
    assert float(jnp.max(jnp.abs(M_0 - M_1))) > 1e-6


def test_project_encode_gradient_reaches_both_inputs():
    a_t, pack = random_inputs(jax.random.PRNGKey(18), (1, 4, 4))
    generator = Generator(config())
    variables = generator.init(jax.random.PRNGKey(19), a_t, pack)
    L = generator.apply(variables, a_t, method=Generator.extract_target_features)
    M = generator.apply(variables, a_t, *pack[0], method=Generator.extract_neighbor_features)
    weights = jax.random.normal(jax.random.PRNGKey(20), (1, 16, 16, C))

    def objective(L, M):
        return jnp.sum(generator.apply(variables, L, M, method=Generator.project_encode) * weights)

    grad_L, grad_M = jax.grad(objective, argnums=(0, 1))(L, M)
    d_L = grad_L / jnp.linalg.norm(grad_L)
    d_M = grad_M / jnp.linalg.norm(grad_M)
    eps = 1e-6
    # Central differences along the unit gradient direction are |grad|.
    fd_L = (objective(L + eps * d_L, M) - objective(L - eps * d_L, M)) / (2 * eps)
    fd_M = (objective(L, M + eps * d_M) - objective(L, M - eps * d_M)) / (2 * eps)
    assert float(fd_L) > 0.0
    assert float(fd_M) > 0.0
    assert np.isclose(fd_L, jnp.linalg.norm(grad_L), rtol=1e-3)
    assert np.isclose(fd_M, jnp.linalg.norm(grad_M), rtol=1e-3)


def test_reconstruct_depends_on_order():
    a_t, pack = random_inputs(jax.random.PRNGKey(21), n_neighbors=3)
    generator = Generator(config(n_neighbors=3))
    variables = generator.init(jax.random.PRNGKey(22), a_t, pack)
    H_list = list(jax.random.uniform(jax.random.PRNGKey(23), (3, 1, 24, 28, C)))
    forward = generator.apply(variables, H_list, method=Generator.reconstruct)
    assert_shape(forward, (1, 24, 28, 3))
    for order in ([2, 1, 0], [1, 0, 2]):
        permuted = generator.apply(variables, [H_list[k] for k in order], method=Generator.reconstruct)
        assert float(jnp.max(jnp.abs(forward - permuted))) > 1e-6
    with pytest.raises(ValueError):
        generator.apply(variables, [], method=Generator.reconstruct)


def test_generate_gradient_matches_finite_differences():
    a_t, pack = random_inputs(jax.random.PRNGKey(24), (1, 8, 8))
    generator = Generator(config())
    variables = generator.init(jax.random.PRNGKey(25), a_t, pack)
    variables = jax.tree_util.tree_map(lambda p: p.astype(jnp.float64), variables)
    weights = jax.random.normal(jax.random.PRNGKey(26), (1, 32, 32, 3), dtype=jnp.float64)

    def objective(variables, a_t):
        return jnp.sum(generator.apply(variables, a_t, pack, train=True) * weights)

    grad_vars, grad_a = jax.grad(objective, argnums=(0, 1))(variables, a_t)
    eps = 1e-6

    kernel = variables["params"]["neighbor_conv"]["kernel"]
    index = (1, 1, 4, 2)

    def with_kernel(delta):
        params = dict(variables["params"])
        params["neighbor_conv"] = {**params["neighbor_conv"], "kernel": kernel.at[index].add(delta)}
        return {**variables, "params": params}

    fd = (objective(with_kernel(eps), a_t) - objective(with_kernel(-eps), a_t)) / (2 * eps)
    analytic = grad_vars["params"]["neighbor_conv"]["kernel"][index]
    assert abs(fd - analytic) <= 1e-3 * abs(analytic)

    pixel = (0, 3, 5, 1)
    fd = (
        objective(variables, a_t.at[pixel].add(eps)) - objective(variables, a_t.at[pixel].add(-eps))
    ) / (2 * eps)
    analytic = grad_a[pixel]
    assert abs(fd - analytic) <= 1e-3 * abs(analytic)


def test_translated_neighbor_smoke():
    a_t, pack = random_inputs(jax.random.PRNGKey(8), n_neighbors=1)
    generator = Generator(config(n_neighbors=1))
    variables = generator.init(jax.random.PRNGKey(9), a_t, pack)
    still = NeighborPack.create([a_t], [jnp.zeros(a_t.shape[:-1] + (2,))])
    moved = NeighborPack.create(
        [jnp.roll(a_t, 1, axis=-2)], [jnp.broadcast_to(jnp.array([-1.0, 0.0]), a_t.shape[:-1] + (2,))]
    )
    for p in (still, moved):
        assert np.all(np.isfinite(generator.apply(variables, a_t, p)))


def test_describe_shares_projection_weights():
    two = describe(GeneratorConfig(n_neighbors=2))
    three = describe(GeneratorConfig(n_neighbors=3))
    assert two["total"] < three["total"]
    assert three["total"] - two["total"] == 3 * 3 * 32 * 3
    changed = [k for k in two if two[k] != three[k]]
    assert set(changed) == {"total", "generator", "generator/reconstruction"}


@pytest.mark.parametrize("flow_variant", ["zero", "learned"])
def test_video_super_resolver(flow_variant):
    frames = jax.random.uniform(jax.random.PRNGKey(10), (5, 6, 8, 3))
    model = VideoSuperResolver(config(), flow_variant)
    variables = model.init(jax.random.PRNGKey(11), frames)
    assert_shape(model.apply(variables, frames), (5, 24, 32, 3))
    some = model.apply(variables, frames, jnp.array([0, 4]))
    assert_shape(some, (2, 24, 32, 3))
    assert np.allclose(some, model.apply(variables, frames)[jnp.array([0, 4])], atol=1e-5)


def test_generate_sequence_chunking():
    clip = VideoClip(jax.random.uniform(jax.random.PRNGKey(12), (5, 6, 6, 3)), "s")
    model = VideoSuperResolver(config(), "zero")
    variables = model.init(jax.random.PRNGKey(13), clip.frames)
    whole = generate_sequence(model, variables, clip)
    chunked = generate_sequence(model, variables, clip, chunk_size=2)
    assert_shape(whole, (5, 24, 24, 3))
    assert whole.scene_id == "s"
    assert np.allclose(whole.frames, chunked.frames, atol=1e-5)
    with pytest.raises(ValueError):
        generate_sequence(model, variables, VideoClip(clip.frames[None]))


def test_generate_sequence_zero_init():
    clip = VideoClip(jax.random.uniform(jax.random.PRNGKey(14), (3, 5, 5, 3)))
    model = VideoSuperResolver(config(zero_init_reconstruction=True), "zero")
    variables = model.init(jax.random.PRNGKey(15), clip.frames)
    sr = generate_sequence(model, variables, clip)
    expected = jnp.clip(bicubic_upsample(clip.frames, 4), 0.0, 1.0)
    assert np.allclose(sr.frames, expected, atol=1e-6)
