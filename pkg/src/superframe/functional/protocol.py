from dataclasses import dataclass
from typing import Literal

from jax import Array

from superframe.utils import center_crop

__all__ = ["ProtocolConfig", "protocol_crop", "select_frames"]


@dataclass(frozen=True)
class ProtocolConfig:
    """
    The evaluation protocol.

    Attributes:
        border: Pixels removed from every side of a frame.
        divisor: After the border crop, frames are shrunk so that their LR
            dims are divisible by ``divisor``.
        spatial_skip: Frames ignored at the start and end of a clip for
            PSNR, SSIM and LPIPS.
        temporal_skip: Frames ignored at the start and end of a clip for tOF
            and tLP.
        scale: Resolution factor between HR and LR frames.
        border_at: Whether ``border`` is counted in ``"hr"`` or ``"lr"`` pixels.
    """

    border: int = 8
    divisor: int = 8
    spatial_skip: tuple[int, int] = (2, 2)
    temporal_skip: tuple[int, int] = (3, 2)
    scale: int = 4
    border_at: Literal["hr", "lr"] = "hr"

    def __post_init__(self):
        if self.border < 0:
            raise ValueError(f"border must be non-negative, got {self.border}")
        if self.divisor < 1:
            raise ValueError(f"divisor must be at least 1, got {self.divisor}")
        if self.scale < 1:
            raise ValueError(f"scale must be at least 1, got {self.scale}")
        for name in ("spatial_skip", "temporal_skip"):
            skip = getattr(self, name)
            if len(skip) != 2 or min(skip) < 0:
                raise ValueError(f"{name} must be two non-negative ints, got {skip}")
        if self.border_at not in ("hr", "lr"):
            raise ValueError(f"border_at must be 'hr' or 'lr', got {self.border_at!r}")


def _shrink(size: int, border: int, multiple: int) -> tuple[int, int]:
    inner = size - 2 * border
    target = (inner // multiple) * multiple
    if target <= 0:
        raise ValueError(
            f"Protocol crop of a side of {size} px (border {border}, multiple {multiple}) "
            "leaves nothing"
        )
    excess = inner - target
    return border + excess // 2, border + excess - excess // 2


def protocol_crop(
    frame: Array, cfg: ProtocolConfig = ProtocolConfig(), scale: Literal["hr", "lr"] = "hr"
) -> Array:
    """
    Crops ``frame`` of shape `(B... H W C)` for evaluation.

    First ``cfg.border`` pixels are removed from every side (converted to the
    frame's own scale), then the frame is shrunk around its center so that
    the corresponding LR dims are divisible by ``cfg.divisor``. An odd excess
    puts the extra pixel at the bottom or right. For example an HR side of 200
    px becomes 184 px after the border crop and 160 px (LR 40) after shrinking.

    Args:
        frame: The frame to crop.
        cfg: The protocol.
        scale: Whether ``frame`` is an ``"hr"`` or ``"lr"`` frame.
    """
    if scale == "hr":
        border = cfg.border if cfg.border_at == "hr" else cfg.border * cfg.scale
        multiple = cfg.divisor * cfg.scale
    elif scale == "lr":
        border = cfg.border if cfg.border_at == "lr" else cfg.border // cfg.scale
        multiple = cfg.divisor
    else:
        raise ValueError(f"scale must be 'hr' or 'lr', got {scale!r}")
    crop = [None] * frame.ndim
    crop[-3] = _shrink(frame.shape[-3], border, multiple)
    crop[-2] = _shrink(frame.shape[-2], border, multiple)
    return center_crop(frame, crop)


def select_frames(
    n_frames: int,
    kind: Literal["spatial", "temporal"],
    cfg: ProtocolConfig = ProtocolConfig(),
) -> list[int]:
    """
    0-based indices of the frames retained for spatial or temporal metrics.
    With the default protocol and 10 frames, these are ``[2..7]`` for spatial
    and ``[3..7]`` for temporal metrics.

    Raises:
        ValueError: If the clip is too short to retain any frame.
    """
    if kind == "spatial":
        first, last = cfg.spatial_skip
    elif kind == "temporal":
        first, last = cfg.temporal_skip
    else:
        raise ValueError(f"kind must be 'spatial' or 'temporal', got {kind!r}")
    minimum = first + last + 1
    if n_frames < minimum:
        raise ValueError(
            f"{kind.capitalize()} metrics need a minimum of {minimum} frames, got {n_frames}"
        )
    return list(range(first, n_frames - last))
