from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from tqdm.auto import tqdm

from superframe.clip import LRHRPair, VideoClip
from superframe.errors import DataError, FormatError
from superframe.ops import bicubic_downsample, gaussian_blur

from .io import Layout, load_clip, load_manifest, load_scene_dir, write_frame

__all__ = [
    "DegradationConfig",
    "degrade",
    "crop_to_multiple",
    "sample_crop_offset",
    "crop_pair",
    "sample_crop",
    "prepare_dataset",
    "load_prepared",
    "MANIFEST_NAME",
]

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"


@dataclass(frozen=True)
class DegradationConfig:
    """
    Parameters of the blur-then-bicubic degradation.

    Attributes:
        sigma: Standard deviation of the Gaussian blur in HR pixels.
        ksize: Number of taps of the Gaussian blur, odd.
        scale: Integer downsampling factor.
    """

    sigma: float = 1.5
    ksize: int = 13
    scale: int = 4

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.ksize <= 0 or self.ksize % 2 == 0:
            raise ValueError(f"ksize must be an odd positive integer, got {self.ksize}")
        if self.scale < 1:
            raise ValueError(f"scale must be a positive integer, got {self.scale}")


def degrade(
    hr: VideoClip, sigma: float = 1.5, ksize: int = 13, scale: int = 4
) -> LRHRPair:
    """
    Produces the low-resolution counterpart of ``hr`` by blurring every frame
    with a Gaussian and then downsampling it bicubically.

    Args:
        hr: The high-resolution clip. Its dims must be divisible by ``scale``.
        sigma: Standard deviation of the blur.
        ksize: Number of taps of the blur, odd.
        scale: Downsampling factor.

    Returns:
        The aligned ``LRHRPair`` with ``lr[i] = bicubic_downsample(gaussian_blur(hr[i]))``.
    """
    lr_frames = bicubic_downsample(gaussian_blur(hr.frames, sigma, ksize), scale)
    return LRHRPair.create(VideoClip(lr_frames, hr.scene_id), hr, scale)


def crop_to_multiple(clip: VideoClip, multiple: int) -> VideoClip:
    """Drops trailing rows and columns so both dims are divisible by ``multiple``."""
    h, w = clip.spatial_shape
    h, w = (h // multiple) * multiple, (w // multiple) * multiple
    if h == 0 or w == 0:
        raise ValueError(
            f"Clip dims {clip.spatial_shape} are smaller than the scale {multiple}"
        )
    return clip.replace(frames=clip.frames[..., :h, :w, :])


def sample_crop_offset(
    lr_shape: tuple[int, int], lr_crop: int, rng: np.random.Generator
) -> tuple[int, int]:
    """Draws an ``(x, y)`` LR crop offset uniformly over the valid positions."""
    h, w = lr_shape
    if h < lr_crop or w < lr_crop:
        raise ValueError(f"LR dims {lr_shape} are smaller than the crop size {lr_crop}")
    x = int(rng.integers(0, w - lr_crop + 1))
    y = int(rng.integers(0, h - lr_crop + 1))
    return x, y


def crop_pair(pair: LRHRPair, lr_offset: tuple[int, int], lr_crop: int) -> LRHRPair:
    """
    Crops ``pair`` at the LR offset ``(x, y)``; the HR crop starts at
    ``(scale * x, scale * y)`` and is ``scale * lr_crop`` pixels wide.
    """
    x, y = lr_offset
    h, w = pair.lr.spatial_shape
    if x < 0 or y < 0 or x + lr_crop > w or y + lr_crop > h:
        raise ValueError(
            f"Crop of size {lr_crop} at offset {lr_offset} exceeds LR dims {(h, w)}"
        )
    s = pair.scale
    hr_crop = s * lr_crop
    lr = pair.lr.frames[..., y : y + lr_crop, x : x + lr_crop, :]
    hr = pair.hr.frames[..., s * y : s * y + hr_crop, s * x : s * x + hr_crop, :]
    return LRHRPair(pair.lr.replace(frames=lr), pair.hr.replace(frames=hr), s)


def sample_crop(pair: LRHRPair, lr_crop: int = 32, rng_seed: int = 0) -> LRHRPair:
    """
    Crops an aligned ``lr_crop`` x ``lr_crop`` LR patch and its HR counterpart
    at the same position in every frame of ``pair``. The position is drawn
    from ``numpy.random.default_rng(rng_seed)``, so equal seeds give equal
    crops.
    """
    rng = np.random.default_rng(rng_seed)
    offset = sample_crop_offset(pair.lr.spatial_shape, lr_crop, rng)
    return crop_pair(pair, offset, lr_crop)


def _scene_outputs(output: Path, scene_id: str, names: list[str]) -> list[Path]:
    return [output / sub / scene_id / name for sub in ("LR", "HR") for name in names]


def prepare_dataset(
    input_dir: str | Path,
    output_dir: str | Path,
    config: DegradationConfig = DegradationConfig(),
    layout: Layout = "flat-scene-dirs",
    force: bool = False,
) -> list[dict]:
    """
    Degrades every scene under ``input_dir`` and writes a mirrored tree with
    ``LR/<scene>`` and ``HR/<scene>`` frame directories plus a line-delimited
    JSON manifest with one record per scene.

    HR frames are cropped at the bottom and right so their dims are divisible by
    ``config.scale``. Scenes whose output files all exist are skipped unless
    ``force`` is set, and the manifest is only rewritten when its content
    changes, so a rerun without ``force`` rewrites nothing.

    Returns:
        The manifest records.
    """
    input_dir, output_dir = Path(input_dir), Path(output_dir)
    manifest = load_manifest(input_dir, layout)
    records = []
    for scene_id, paths in tqdm(manifest.scenes, desc="prepare", leave=False):
        names = [p.name for p in paths]
        outputs = _scene_outputs(output_dir, scene_id, names)
        if not force and all(p.is_file() for p in outputs):
            hr = load_scene_dir(output_dir / "HR" / scene_id, scene_id)
            lr_dims = [d // config.scale for d in hr.spatial_shape]
            logger.info("Skipping %s (already prepared)", scene_id)
        else:
            hr = crop_to_multiple(load_clip(manifest, scene_id), config.scale)
            pair = degrade(hr, config.sigma, config.ksize, config.scale)
            for t, name in enumerate(names):
                write_frame(output_dir / "HR" / scene_id / name, pair.hr[t])
                write_frame(output_dir / "LR" / scene_id / name, pair.lr[t])
            lr_dims = list(pair.lr.spatial_shape)
            logger.info("Prepared %s (%d frames)", scene_id, len(names))
        records.append(
            {
                "scene_id": scene_id,
                "frame_count": len(names),
                "hr_dims": list(hr.spatial_shape),
                "lr_dims": lr_dims,
                **asdict(config),
            }
        )
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    manifest_path = output_dir / MANIFEST_NAME
    if force or not manifest_path.is_file() or manifest_path.read_text() != text:
        manifest_path.write_text(text)
    return records


def load_prepared(root: str | Path) -> list[LRHRPair]:
    """
    Loads the LR/HR pairs of a tree written by ``prepare_dataset``.

    Raises:
        DataError: If the manifest or a frame is missing.
        FormatError: If a manifest line cannot be parsed or dims disagree.
    """
    root = Path(root)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DataError("Prepared dataset manifest does not exist", manifest_path)
    pairs = []
    for lineno, line in enumerate(manifest_path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            scene_id, scale = record["scene_id"], int(record["scale"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise FormatError(f"Malformed manifest line {lineno}", manifest_path) from e
        lr = load_scene_dir(root / "LR" / scene_id, scene_id)
        hr = load_scene_dir(root / "HR" / scene_id, scene_id)
        try:
            pairs.append(LRHRPair.create(lr, hr, scale))
        except ValueError as e:
            raise FormatError(str(e), root / "LR" / scene_id) from e
    if not pairs:
        raise DataError("Prepared dataset manifest lists no scenes", manifest_path)
    return pairs
