from __future__ import annotations

import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from PIL import Image, UnidentifiedImageError

from superframe.clip import VideoClip
from superframe.errors import DataError, FormatError
from superframe.typing import ArrayLike

__all__ = [
    "Layout",
    "DatasetManifest",
    "read_frame",
    "write_frame",
    "load_manifest",
    "load_clip",
    "load_scene_dir",
    "write_clip",
    "read_flow",
    "write_flow",
    "atomic_write_bytes",
]

logger = logging.getLogger(__name__)

Layout = Literal["flat-scene-dirs", "septuplet"]
FRAME_SUFFIXES = (".png",)


@dataclass(frozen=True)
class DatasetManifest:
    """
    The frame files of a dataset on disk, grouped by scene.

    Attributes:
        root: The dataset root directory.
        layout: ``"flat-scene-dirs"`` for one directory of frames per scene
            (Vid4/ToS3 style), or ``"septuplet"`` for ``sequences/<group>/<clip>``
            directories of seven frames (Vimeo-90k style).
        scenes: ``(scene_id, frame_paths)`` pairs; paths are sorted
            lexicographically within a scene.
    """

    root: Path
    layout: Layout
    scenes: tuple[tuple[str, tuple[Path, ...]], ...] = field(default_factory=tuple)

    @property
    def scene_ids(self) -> list[str]:
        return [scene_id for scene_id, _ in self.scenes]

    def frame_paths(self, scene_id: str) -> tuple[Path, ...]:
        for sid, paths in self.scenes:
            if sid == scene_id:
                return paths
        raise KeyError(f"Scene {scene_id!r} not in manifest of {self.root}")


def read_frame(path: str | Path) -> np.ndarray:
    """
    Decodes an 8-bit image file into a float32 RGB array of shape `(H W 3)`
    with values in [0, 1] (0 -> 0.0, 255 -> 1.0).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError("Frame file does not exist", path)
    try:
        with Image.open(path) as image:
            image.load()
            rgb = image.convert("RGB")
    except (UnidentifiedImageError, OSError) as e:
        raise DataError(f"Cannot decode image ({e.__class__.__name__})", path) from e
    return np.asarray(rgb, dtype=np.float32) / 255.0


def write_frame(path: str | Path, frame: ArrayLike) -> None:
    """
    Encodes a frame of shape `(H W 3)` with values in [0, 1] as an 8-bit PNG.
    Values are clipped to [0, 1] and rounded to the nearest 8-bit level, so a
    round trip loses at most 1/510 per value.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.clip(np.asarray(frame, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.round(values * 255.0).astype(np.uint8), mode="RGB").save(path)


def _frame_files(directory: Path) -> tuple[Path, ...]:
    return tuple(
        sorted(
            p
            for p in directory.iterdir()
            if p.is_file() and p.suffix.lower() in FRAME_SUFFIXES
        )
    )


def load_manifest(root: str | Path, layout: Layout = "flat-scene-dirs") -> DatasetManifest:
    """
    Scans ``root`` for scenes in the given ``layout``.

    For ``"flat-scene-dirs"``, every subdirectory of ``root`` containing PNG
    frames is one scene named after the directory; if ``root`` itself holds
    frames and no subdirectories do, ``root`` is a single scene. For
    ``"septuplet"``, scenes are ``sequences/<group>/<clip>`` directories and are
    named ``"<group>/<clip>"``; ``root`` may be the dataset directory or its
    ``sequences`` subdirectory.

    Raises:
        DataError: If ``root`` does not exist or contains no frames.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError("Dataset directory does not exist", root)
    scenes: list[tuple[str, tuple[Path, ...]]] = []
    if layout == "flat-scene-dirs":
        for scene_dir in sorted(p for p in root.iterdir() if p.is_dir()):
            files = _frame_files(scene_dir)
            if files:
                scenes.append((scene_dir.name, files))
        if not scenes:
            files = _frame_files(root)
            if files:
                scenes.append((root.name, files))
    elif layout == "septuplet":
        sequences = root / "sequences" if (root / "sequences").is_dir() else root
        for group in sorted(p for p in sequences.iterdir() if p.is_dir()):
            for clip_dir in sorted(p for p in group.iterdir() if p.is_dir()):
                files = _frame_files(clip_dir)
                if files:
                    scenes.append((f"{group.name}/{clip_dir.name}", files))
    else:
        raise ValueError(
            f"layout must be 'flat-scene-dirs' or 'septuplet', got {layout!r}"
        )
    if not scenes:
        raise DataError("No PNG frames found", root)
    logger.debug("Found %d scenes under %s (%s)", len(scenes), root, layout)
    return DatasetManifest(root, layout, tuple(scenes))


def load_clip(manifest: DatasetManifest, scene_id: str) -> VideoClip:
    """
    Decodes all frames of ``scene_id`` in filename order.

    Raises:
        DataError: If a frame file is missing or cannot be decoded.
        FormatError: If the frames of the scene have different dimensions.
    """
    paths = manifest.frame_paths(scene_id)
    frames = []
    for path in paths:
        frame = read_frame(path)
        if frames and frame.shape != frames[0].shape:
            raise FormatError(
                f"Frame dims {frame.shape[:2]} differ from {frames[0].shape[:2]} "
                f"in scene {scene_id!r}",
                path,
            )
        frames.append(frame)
    return VideoClip.create(np.stack(frames), scene_id, check_range=False)


def load_scene_dir(directory: str | Path, scene_id: str | None = None) -> VideoClip:
    """Loads a single directory of frames as a clip."""
    directory = Path(directory)
    manifest = load_manifest(directory, "flat-scene-dirs")
    if len(manifest.scenes) != 1:
        raise FormatError("Expected a single scene directory", directory)
    clip = load_clip(manifest, manifest.scene_ids[0])
    return clip.replace(scene_id=scene_id or clip.scene_id)


def write_clip(
    directory: str | Path, clip: VideoClip, pattern: str = "{:04d}.png"
) -> list[Path]:
    """Writes every frame of an unbatched ``clip`` to ``directory``."""
    directory = Path(directory)
    paths = []
    for t in range(clip.num_frames):
        path = directory / pattern.format(t + 1)
        write_frame(path, clip[t])
        paths.append(path)
    return paths


def write_flow(path: str | Path, flow: ArrayLike) -> None:
    """
    Writes a flow field of shape `(H W 2)` as a binary raster: two
    little-endian int32 values ``H W`` followed by row-major float32
    ``(dx, dy)`` pairs.
    """
    flow = np.asarray(flow, dtype="<f4")
    if flow.ndim != 3 or flow.shape[-1] != 2:
        raise ValueError(f"Flow must have shape (H W 2), got {flow.shape}")
    header = np.array(flow.shape[:2], dtype="<i4")
    atomic_write_bytes(path, header.tobytes() + flow.tobytes(order="C"))


def read_flow(path: str | Path) -> np.ndarray:
    """Reads a flow raster written by ``write_flow``."""
    path = Path(path)
    if not path.is_file():
        raise DataError("Flow file does not exist", path)
    raw = path.read_bytes()
    if len(raw) < 8:
        raise FormatError("Flow file is truncated", path)
    h, w = (int(v) for v in np.frombuffer(raw[:8], dtype="<i4"))
    if len(raw) != 8 + 4 * h * w * 2:
        raise FormatError(f"Flow payload does not match header ({h}, {w})", path)
    return np.frombuffer(raw[8:], dtype="<f4").reshape(h, w, 2).copy()


def atomic_write_bytes(path: str | Path, payload: bytes) -> None:
    """Writes ``payload`` to a temporary file next to ``path`` and renames it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
