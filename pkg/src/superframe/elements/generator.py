from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import jax.numpy as jnp
from chex import assert_equal_shape
from flax import linen as nn
from flax import struct
from jax import Array
from typing_extensions import Self

from superframe.ops import bicubic_upsample
from superframe.typing import FlowField, Frame
from superframe.utils.shapes import _check_flow, _check_frame, _check_same_spatial

__all__ = [
    "GeneratorConfig",
    "NeighborPack",
    "ProjectionState",
    "ResidualBlock",
    "UpProjection",
    "Generator",
]


@dataclass(frozen=True)
class GeneratorConfig:
    """
    Hyperparameters of the back-projection ``Generator``.

    Attributes:
        base_channels: Width C of every feature map.
        n_neighbors: Number of neighbor frames per target frame, which is also
            the number of projection steps.
        n_residual_blocks: Residual blocks applied to the projection error.
        scale: Resolution factor; only 4 is supported.
        bicubic_skip: Whether the output adds the bicubic upsampling of the
            target frame to the reconstructed residual.
        zero_init_reconstruction: Whether the final reconstruction convolution
            starts at zero, which makes an untrained generator with
            ``bicubic_skip`` return exactly the bicubic upsampling.
    """

    base_channels: int = 32
    n_neighbors: int = 2
    n_residual_blocks: int = 3
    scale: int = 4
    bicubic_skip: bool = True
    zero_init_reconstruction: bool = False

    def __post_init__(self):
        if self.scale != 4:
            raise ValueError(f"Only scale 4 is supported, got {self.scale}")
        if self.n_neighbors < 1:
            raise ValueError(f"n_neighbors must be at least 1, got {self.n_neighbors}")
        if self.base_channels < 8:
            raise ValueError(f"base_channels must be at least 8, got {self.base_channels}")
        if self.n_residual_blocks < 0:
            raise ValueError(
                f"n_residual_blocks must be non-negative, got {self.n_residual_blocks}"
            )


class NeighborPack(struct.PyTreeNode):
    """
    The neighbors of a target frame with the flow from each neighbor to the
    target.

    Attributes:
        frames: Neighbor LR frames of shape `(B... N h w 3)`.
        flows: Flows ``F(neighbor, target)`` of shape `(B... N h w 2)`.
    """

    frames: Array
    flows: Array

    @classmethod
    def create(cls, frames: Sequence[Frame], flows: Sequence[FlowField]) -> Self:
        """Stacks per-neighbor frames and flows along a new neighbor axis."""
        if len(frames) != len(flows):
            raise ValueError(
                f"Got {len(frames)} neighbor frames but {len(flows)} flows"
            )
        if len(frames) == 0:
            raise ValueError("A NeighborPack needs at least one neighbor")
        for frame, flow in zip(frames, flows):
            _check_frame(frame, "neighbor")
            _check_flow(flow)
            _check_same_spatial(
                frame, flow, frames[0], names=("neighbor", "flow", "first neighbor")
            )
        return cls(jnp.stack(frames, axis=-4), jnp.stack(flows, axis=-4))

    @property
    def num_neighbors(self) -> int:
        return self.frames.shape[-4]

    def __getitem__(self, k: int) -> tuple[Array, Array]:
        return self.frames[..., k, :, :, :], self.flows[..., k, :, :, :]


class ProjectionState(struct.PyTreeNode):
    """
    The state threaded through the projection steps.

    Attributes:
        L: LR feature map of shape `(B... h w C)`.
        H_list: HR feature maps of shape `(B... 4h 4w C)`, one per completed
            projection step.
    """

    L: Array
    H_list: tuple[Array, ...] = ()


class ResidualBlock(nn.Module):
    """``x + conv(prelu(conv(x)))`` with 3x3 kernels."""

    features: int

    @nn.compact
    def __call__(self, x: Array) -> Array:
        y = nn.Conv(self.features, (3, 3))(x)
        y = nn.PReLU()(y)
        y = nn.Conv(self.features, (3, 3))(y)
        return x + y


class _Upsample(nn.Module):
    """x4 upsampling as two stride-2 transposed convolutions."""

    features: int

    @nn.compact
    def __call__(self, x: Array) -> Array:
        for _ in range(2):
            x = nn.ConvTranspose(self.features, (3, 3), strides=(2, 2), padding="SAME")(x)
            x = nn.PReLU()(x)
        return x


class _Downsample(nn.Module):
    """x4 downsampling as two stride-2 convolutions."""

    features: int

    @nn.compact
    def __call__(self, x: Array) -> Array:
        for _ in range(2):
            x = nn.Conv(self.features, (3, 3), strides=(2, 2), padding="SAME")(x)
            x = nn.PReLU()(x)
        return x


class UpProjection(nn.Module):
    """
    Single-image up-projection with back-projection of the reconstruction
    error: ``H0 = up(L)``, ``e = down(H0) - L``, ``H = H0 + up'(e)``.
    """

    features: int

    @nn.compact
    def __call__(self, x: Array) -> Array:
        h0 = _Upsample(self.features, name="up")(x)
        error = _Downsample(self.features, name="down")(h0) - x
        return h0 + _Upsample(self.features, name="error_up")(error)


class Generator(nn.Module):
    """
    A recurrent back-projection super-resolution generator.

    For a target LR frame ``a_t`` and ``N`` neighbors with their flows, the
    generator extracts target features ``L_0`` and, for every neighbor ``k``,
    neighbor features ``M_k`` from ``[a_t, neighbor, flow]``. Projection step
    ``k`` consumes ``(L_{k-1}, M_k)``: the encoder up-projects both to HR
    (single-image path for ``L``, multi-image path for ``M``) and corrects the
    single-image estimate with residual blocks applied to their difference,
    giving ``H_k``; the decoder brings ``H_k`` back to LR as ``L_k``. All
    ``H_k`` are concatenated and convolved to a 3-channel residual that is
    added to the bicubic upsampling of ``a_t`` when ``bicubic_skip`` is set.

    The projection weights are shared by all steps, so the parameter count
    depends on ``n_neighbors`` only through the reconstruction convolution.

    Every stage is exposed as a method and can be called on its own with
    ``generator.apply(variables, ..., method=Generator.project_encode)``.

    Attributes:
        config: The ``GeneratorConfig``.
    """

    config: GeneratorConfig = GeneratorConfig()

    def setup(self):
        c = self.config.base_channels
        self.target_conv = nn.Conv(c, (3, 3))
        self.target_act = nn.PReLU()
        self.neighbor_conv = nn.Conv(c, (3, 3))
        self.neighbor_act = nn.PReLU()
        self.sisr = UpProjection(c)
        self.misr = _Upsample(c)
        self.residual_blocks = [ResidualBlock(c) for _ in range(self.config.n_residual_blocks)]
        self.decode_down = _Downsample(c)
        self.decode_block = ResidualBlock(c)
        kernel_init = (
            nn.initializers.zeros
            if self.config.zero_init_reconstruction
            else nn.initializers.lecun_normal()
        )
        self.reconstruction = nn.Conv(3, (3, 3), kernel_init=kernel_init)

    def extract_target_features(self, a_t: Frame) -> Array:
        """Features of shape `(B... h w C)` of the target frame."""
        _check_frame(a_t, "a_t")
        return self.target_act(self.target_conv(a_t))

    def extract_neighbor_features(self, a_t: Frame, neighbor: Frame, flow: FlowField) -> Array:
        """Features of shape `(B... h w C)` of ``[a_t, neighbor, flow]``."""
        _check_frame(a_t, "a_t")
        _check_frame(neighbor, "neighbor")
        _check_flow(flow)
        _check_same_spatial(a_t, neighbor, flow, names=("a_t", "neighbor", "flow"))
        x = jnp.concatenate([a_t, neighbor, flow], axis=-1)
        return self.neighbor_act(self.neighbor_conv(x))

    def project_encode(self, L_prev: Array, M_k: Array) -> Array:
        """HR features ``H_k`` of shape `(B... 4h 4w C)`."""
        _check_same_spatial(L_prev, M_k, names=("L_prev", "M_k"))
        h_sisr = self.sisr(L_prev)
        h_misr = self.misr(M_k)
        error = h_sisr - h_misr
        for block in self.residual_blocks:
            error = block(error)
        return h_sisr + error

    def project_decode(self, H_k: Array) -> Array:
        """LR features ``L_k`` of shape `(B... H/4 W/4 C)`."""
        h, w = H_k.shape[-3], H_k.shape[-2]
        if h % 4 != 0 or w % 4 != 0:
            raise ValueError(f"HR feature dims ({h}, {w}) must be divisible by 4")
        return self.decode_block(self.decode_down(H_k))

    def project_step(self, state: ProjectionState, M_k: Array) -> ProjectionState:
        """One encoder-decoder step, appending ``H_k`` and replacing ``L``."""
        H_k = self.project_encode(state.L, M_k)
        L_k = self.project_decode(H_k)
        assert_equal_shape([state.L, L_k])
        return ProjectionState(L_k, state.H_list + (H_k,))

    def reconstruct(self, H_list: Sequence[Array]) -> Array:
        """The 3-channel HR residual from the concatenated HR feature maps."""
        if len(H_list) == 0:
            raise ValueError("reconstruct needs at least one HR feature map")
        _check_same_spatial(*H_list)
        return self.reconstruction(jnp.concatenate(list(H_list), axis=-1))

    def generate(self, a_t: Frame, pack: NeighborPack, train: bool = False) -> Frame:
        """
        The super-resolved frame ``g_t`` of shape `(B... 4h 4w 3)`.

        Args:
            a_t: The target LR frame of shape `(B... h w 3)`.
            pack: Exactly ``n_neighbors`` neighbors and their flows.
            train: Outputs are clamped to [0, 1] only when ``False``.
        """
        if pack.num_neighbors != self.config.n_neighbors:
            raise ValueError(
                f"Expected {self.config.n_neighbors} neighbors, got {pack.num_neighbors}"
            )
        state = ProjectionState(self.extract_target_features(a_t))
        for k in range(pack.num_neighbors):
            neighbor, flow = pack[k]
            M_k = self.extract_neighbor_features(a_t, neighbor, flow)
            state = self.project_step(state, M_k)
        g_t = self.reconstruct(state.H_list)
        if self.config.bicubic_skip:
            g_t = g_t + bicubic_upsample(a_t, self.config.scale)
        return g_t if train else jnp.clip(g_t, 0.0, 1.0)

    def __call__(self, a_t: Frame, pack: NeighborPack, train: bool = False) -> Frame:
        return self.generate(a_t, pack, train)
