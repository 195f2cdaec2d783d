from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Callable, Mapping, Sequence

import jax.numpy as jnp
import optax
from einops import rearrange
from flax import struct
from jax import Array

from superframe.clip import VideoClip
from superframe.typing import FlowField, Frame

from .flow import warp

__all__ = [
    "LOSS_TERMS",
    "LossWeights",
    "LossBundle",
    "PingPongSequence",
    "build_pingpong",
    "split_pingpong",
    "pingpong_loss",
    "pixel_loss",
    "gan_loss_d",
    "gan_loss_g",
    "feature_loss",
    "warping_loss",
    "total_generator_loss",
]

LOSS_TERMS = ("pixel", "adv", "feat", "warp", "pp")


def _frames(x: VideoClip | Array) -> Array:
    return x.frames if isinstance(x, VideoClip) else jnp.asarray(x)


def _check_same_shape(a: Array, b: Array, names: tuple[str, str]) -> None:
    if a.shape != b.shape:
        raise ValueError(
            f"{names[0]} and {names[1]} must have equal shapes, got {a.shape} and {b.shape}"
        )


@dataclass(frozen=True)
class LossWeights:
    """
    Mixing coefficients of the generator objective.

    Attributes:
        pixel: Weight of the pixel-wise squared error.
        adv: Weight of the adversarial term.
        feat: Weight of the discriminator feature (cosine) term.
        warp: Weight of the flow warping term.
        pp: Weight of the ping-pong consistency term.
        feature_layers: Weight of every discriminator stage in the feature term.
    """

    pixel: float = 1.0
    adv: float = 0.01
    feat: float = 0.2
    warp: float = 1.0
    pp: float = 0.5
    feature_layers: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            values = value if isinstance(value, tuple) else (value,)
            if any(v < 0 for v in values):
                raise ValueError(f"Loss weight {f.name} must be non-negative, got {value}")
        if all(getattr(self, name) == 0 for name in LOSS_TERMS):
            raise ValueError("At least one loss weight must be positive")

    def __getitem__(self, name: str) -> float:
        return getattr(self, name)


class LossBundle(struct.PyTreeNode):
    """
    Per-term generator losses and their weighted ``total``. Terms whose
    weight is zero are recorded as 0.
    """

    pixel: Array
    adv: Array
    feat: Array
    warp: Array
    pp: Array
    total: Array

    def as_dict(self) -> dict[str, float]:
        return {name: float(getattr(self, name)) for name in LOSS_TERMS + ("total",)}


class PingPongSequence(struct.PyTreeNode):
    """
    A palindromic clip ``a_1, ..., a_n, ..., a_1`` of length ``2n - 1``.

    Attributes:
        frames: The palindromic clip.
        n: Length of the original clip.
    """

    frames: VideoClip
    n: int = struct.field(pytree_node=False)


def build_pingpong(clip: VideoClip) -> PingPongSequence:
    """
    Appends the reversed clip without its last frame, so that frame ``i`` and
    frame ``2n - 2 - i`` of the result are the same frame.

    Raises:
        ValueError: If the clip has fewer than 2 frames.
    """
    n = clip.num_frames
    if n < 2:
        raise ValueError(f"A ping-pong sequence needs a minimum of 2 frames, got {n}")
    backward = clip.frames[..., n - 2 :: -1, :, :, :]
    frames = jnp.concatenate([clip.frames, backward], axis=-4)
    return PingPongSequence(clip.replace(frames=frames), n)


def split_pingpong(outputs: Array, n: int) -> tuple[Array, Array]:
    """
    Splits outputs of shape `(B... 2n-1 H W C)` computed over a ping-pong
    sequence into the forward results ``g_1..g_n`` and the backward results
    ``g'_1..g'_n``, where ``g'_t`` is the output at the mirrored position.
    """
    if outputs.shape[-4] != 2 * n - 1:
        raise ValueError(
            f"Expected {2 * n - 1} ping-pong outputs for n={n}, got {outputs.shape[-4]}"
        )
    forward = outputs[..., :n, :, :, :]
    backward = outputs[..., n - 1 :, :, :, :][..., ::-1, :, :, :]
    return forward, backward


def pingpong_loss(forward: VideoClip | Array, backward: VideoClip | Array) -> Array:
    """Mean squared difference between forward and backward results."""
    forward, backward = _frames(forward), _frames(backward)
    _check_same_shape(forward, backward, ("forward", "backward"))
    return jnp.mean((forward - backward) ** 2)


def pixel_loss(g: Frame, b: Frame) -> Array:
    """Mean squared error between generated and ground-truth frames."""
    g, b = jnp.asarray(g), jnp.asarray(b)
    _check_same_shape(g, b, ("g", "b"))
    return jnp.mean((g - b) ** 2)


def gan_loss_d(logit_real: Array, logit_fake: Array) -> Array:
    """
    ``-[ln D(real) + ln(1 - D(fake))]`` averaged over the batch, computed from
    the discriminator logits.
    """
    real = optax.sigmoid_binary_cross_entropy(logit_real, jnp.ones_like(logit_real))
    fake = optax.sigmoid_binary_cross_entropy(logit_fake, jnp.zeros_like(logit_fake))
    return jnp.mean(real + fake)


def gan_loss_g(logit_fake: Array, non_saturating: bool = True) -> Array:
    """
    The generator's adversarial loss from the discriminator logits on
    generated triplets: ``-ln D(fake)`` by default, or the min-max form
    ``ln(1 - D(fake))`` (which is non-positive) when ``non_saturating`` is
    ``False``.
    """
    if non_saturating:
        return jnp.mean(
            optax.sigmoid_binary_cross_entropy(logit_fake, jnp.ones_like(logit_fake))
        )
    return -jnp.mean(
        optax.sigmoid_binary_cross_entropy(logit_fake, jnp.zeros_like(logit_fake))
    )


def feature_loss(
    feats_g: Sequence[Array],
    feats_b: Sequence[Array],
    weights: Sequence[float] | None = None,
    epsilon: float = 1e-8,
) -> Array:
    """
    ``sum_i w_i * (1 - cos(feats_g[i], feats_b[i]))`` where every feature map
    is flattened per batch element; the cosine is averaged over the batch.
    """
    if len(feats_g) != len(feats_b):
        raise ValueError(
            f"Feature lists must have equal length, got {len(feats_g)} and {len(feats_b)}"
        )
    if weights is None:
        weights = (1.0,) * len(feats_g)
    if len(weights) != len(feats_g):
        raise ValueError(
            f"Got {len(weights)} layer weights for {len(feats_g)} feature maps"
        )
    loss = 0.0
    for i, (fg, fb, w) in enumerate(zip(feats_g, feats_b, weights)):
        _check_same_shape(fg, fb, (f"feats_g[{i}]", f"feats_b[{i}]"))
        if w == 0:
            continue
        fg = rearrange(fg, "... h w c -> ... (h w c)")
        fb = rearrange(fb, "... h w c -> ... (h w c)")
        cos = optax.cosine_similarity(fg, fb, epsilon=epsilon)
        loss = loss + w * jnp.mean(1.0 - cos)
    return jnp.asarray(loss)


def warping_loss(
    frames: VideoClip | Array, estimate_fn: Callable[[Frame, Frame], FlowField]
) -> Array:
    """
    Mean squared error between every frame ``a_t`` and its predecessor warped
    onto it, ``warp(a_{t-1}, estimate_fn(a_{t-1}, a_t))``.

    Args:
        frames: LR frames of shape `(B... T H W 3)` with ``T >= 2``.
        estimate_fn: The flow estimator, called once on all consecutive pairs.
    """
    frames = _frames(frames)
    if frames.ndim < 4 or frames.shape[-4] < 2:
        raise ValueError(
            f"The warping loss needs a minimum of 2 frames, got shape {frames.shape}"
        )
    prev, cur = frames[..., :-1, :, :, :], frames[..., 1:, :, :, :]
    flow = estimate_fn(prev, cur)
    return jnp.mean((cur - warp(prev, flow)) ** 2)


def total_generator_loss(terms: Mapping[str, Array], weights: LossWeights) -> LossBundle:
    """
    Weighted sum of the loss ``terms`` in a fixed order.

    A term whose weight is zero contributes nothing and may be missing from
    ``terms``; a term with a positive weight must be present.
    """
    unknown = set(terms) - set(LOSS_TERMS)
    if unknown:
        raise ValueError(f"Unknown loss terms {sorted(unknown)}")
    values = {}
    total = jnp.asarray(0.0)
    for name in LOSS_TERMS:
        weight = weights[name]
        if weight == 0:
            values[name] = jnp.zeros(())
            continue
        if name not in terms:
            raise ValueError(f"Loss term {name!r} has weight {weight} but was not computed")
        values[name] = jnp.asarray(terms[name])
        total = total + weight * values[name]
    return LossBundle(total=total, **values)
