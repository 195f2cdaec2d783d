import numpy as np

from superframe.clip import VideoClip

__all__ = [
    "smooth_texture",
    "translating_clip",
    "ramp_frame",
    "checkerboard_frame",
    "constant_clip",
    "synthetic_dataset",
]


def smooth_texture(
    x: np.ndarray,
    y: np.ndarray,
    num_waves: int = 6,
    max_frequency: float = 0.15,
    seed: int = 0,
) -> np.ndarray:
    """
    Evaluates a smooth RGB texture at the (possibly fractional) pixel
    coordinates ``x`` and ``y``.

    The texture is a sum of ``num_waves`` plane waves per channel with random
    orientation, phase and frequency below ``max_frequency`` cycles per pixel,
    rescaled to lie in [0.1, 0.9]. Being analytic, it can be sampled at any
    sub-pixel offset, which makes exact translations possible.

    Returns:
        An array of shape ``x.shape + (3,)``.
    """
    rng = np.random.default_rng(seed)
    out = np.zeros(x.shape + (3,), dtype=np.float64)
    for c in range(3):
        for _ in range(num_waves):
            theta = rng.uniform(0, 2 * np.pi)
            freq = rng.uniform(0.2, 1.0) * max_frequency
            phase = rng.uniform(0, 2 * np.pi)
            kx, ky = freq * np.cos(theta), freq * np.sin(theta)
            out[..., c] += np.cos(2 * np.pi * (kx * x + ky * y) + phase)
    out /= num_waves
    return 0.5 + 0.4 * out


def translating_clip(
    num_frames: int,
    shape: tuple[int, int],
    velocity: tuple[float, float] = (2.0, 0.0),
    seed: int = 0,
    scene_id: str = "synthetic",
    **texture_kwargs,
) -> VideoClip:
    """
    Creates a clip of a smooth texture moving ``velocity = (vx, vy)`` pixels
    per frame, i.e. ``frame[t](x, y) = frame[0](x - t * vx, y - t * vy)``.
    """
    h, w = shape
    y, x = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    frames = [
        smooth_texture(x - t * velocity[0], y - t * velocity[1], seed=seed, **texture_kwargs)
        for t in range(num_frames)
    ]
    return VideoClip.create(np.stack(frames).astype(np.float32), scene_id)


def ramp_frame(shape: tuple[int, int], axis: int = 1, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """A linear ramp from ``low`` to ``high`` along ``axis`` (1 is horizontal)."""
    n = shape[axis]
    ramp = np.linspace(low, high, n, dtype=np.float64)
    ramp = ramp[None, :] if axis == 1 else ramp[:, None]
    return np.broadcast_to(ramp[..., None], tuple(shape) + (3,)).copy()


def checkerboard_frame(shape: tuple[int, int], square: int = 4) -> np.ndarray:
    """A binary checkerboard with ``square`` pixel cells, 1 in the top-left cell."""
    y, x = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")
    board = ((x // square + y // square) % 2 == 0).astype(np.float64)
    return np.repeat(board[..., None], 3, axis=-1)


def constant_clip(
    num_frames: int, shape: tuple[int, int], value: float = 0.5, scene_id: str = "constant"
) -> VideoClip:
    return VideoClip.create(
        np.full((num_frames, *shape, 3), value, dtype=np.float32), scene_id
    )


def synthetic_dataset(
    num_scenes: int = 4,
    num_frames: int = 7,
    shape: tuple[int, int] = (128, 128),
    max_speed: float = 2.0,
    seed: int = 0,
) -> list[VideoClip]:
    """
    A list of translating-texture HR clips with seeded random velocities of
    at most ``max_speed`` pixels per frame, named ``synthetic/0000``, ...
    """
    rng = np.random.default_rng(seed)
    clips = []
    for i in range(num_scenes):
        velocity = tuple(float(v) for v in rng.uniform(-max_speed, max_speed, size=2))
        clips.append(
            translating_clip(
                num_frames,
                shape,
                velocity,
                seed=int(rng.integers(0, 2**31 - 1)),
                scene_id=f"synthetic/{i:04d}",
            )
        )
    return clips
