from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from superframe.data.io import atomic_write_bytes
from superframe.errors import DataError, FormatError
from superframe.functional.protocol import ProtocolConfig

__all__ = [
    "SCHEMA_VERSION",
    "SPATIAL_METRICS",
    "TEMPORAL_METRICS",
    "SceneMetrics",
    "MetricReport",
]

SCHEMA_VERSION = 1
SPATIAL_METRICS = ("psnr", "ssim", "lpips")
TEMPORAL_METRICS = ("tof", "tlp")
# Display scales of LPIPS and tLP in reports.
LPIPS_SCALE = 10.0
TLP_SCALE = 100.0
INF = "inf"


def _encode(value: float) -> float | str:
    return INF if math.isinf(value) else value


def _decode(value: float | str) -> float:
    return math.inf if value == INF else float(value)


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def _psnr_mean(values: list[float]) -> float | str | None:
    finite = [v for v in values if not math.isinf(v)]
    if values and not finite:
        return INF
    return _mean(finite)


@dataclass
class SceneMetrics:
    """
    Per-frame metrics of one scene.

    Spatial metrics are listed in the order of ``spatial_indices`` and
    temporal metrics in the order of ``temporal_indices``. Infinite PSNR
    values (identical frames) are kept per frame but left out of means.
    """

    scene_id: str
    spatial_indices: list[int]
    temporal_indices: list[int]
    psnr: list[float] = field(default_factory=list)
    ssim: list[float] = field(default_factory=list)
    lpips: list[float] = field(default_factory=list)
    tof: list[float] = field(default_factory=list)
    tlp: list[float] = field(default_factory=list)

    def __post_init__(self):
        for name in SPATIAL_METRICS:
            if len(getattr(self, name)) != len(self.spatial_indices):
                raise ValueError(
                    f"Scene {self.scene_id!r}: {name} has {len(getattr(self, name))} "
                    f"values for {len(self.spatial_indices)} frames"
                )
        for name in TEMPORAL_METRICS:
            if len(getattr(self, name)) != len(self.temporal_indices):
                raise ValueError(
                    f"Scene {self.scene_id!r}: {name} has {len(getattr(self, name))} "
                    f"values for {len(self.temporal_indices)} frames"
                )

    @property
    def inf_psnr_frames(self) -> list[int]:
        return [t for t, v in zip(self.spatial_indices, self.psnr) if math.isinf(v)]

    def means(self) -> dict[str, Any]:
        return _summary(self.psnr, self.ssim, self.lpips, self.tof, self.tlp)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["psnr"] = [_encode(v) for v in self.psnr]
        d["inf_psnr_frames"] = self.inf_psnr_frames
        d["mean"] = self.means()
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> SceneMetrics:
        return cls(
            scene_id=d["scene_id"],
            spatial_indices=[int(t) for t in d["spatial_indices"]],
            temporal_indices=[int(t) for t in d["temporal_indices"]],
            psnr=[_decode(v) for v in d["psnr"]],
            **{name: [float(v) for v in d[name]] for name in ("ssim", "lpips", "tof", "tlp")},
        )


def _summary(psnr, ssim, lpips, tof, tlp) -> dict[str, Any]:
    lpips_mean, tlp_mean = _mean(lpips), _mean(tlp)
    return {
        "psnr": _psnr_mean(psnr),
        "ssim": _mean(ssim),
        "lpips": lpips_mean,
        "lpips_x10": None if lpips_mean is None else LPIPS_SCALE * lpips_mean,
        "tof": _mean(tof),
        "tlp": tlp_mean,
        "tlp_x100": None if tlp_mean is None else TLP_SCALE * tlp_mean,
    }


@dataclass
class MetricReport:
    """
    Metrics of a model over a set of scenes, with the protocol used.

    Attributes:
        model: Identity of the evaluated model (checkpoint path, ``"bicubic"``).
        scenes: Per-scene, per-frame metrics in scene-id order.
        protocol: The evaluation protocol.
        metadata: Further descriptive fields, e.g. the tOF norm and the
            perceptual backbone.
    """

    model: str
    scenes: list[SceneMetrics]
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    metadata: dict[str, Any] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def scene_ids(self) -> list[str]:
        return [s.scene_id for s in self.scenes]

    def aggregate(self) -> dict[str, Any]:
        """Means over all retained frames of all scenes."""
        return _summary(
            *[
                [v for s in self.scenes for v in getattr(s, name)]
                for name in SPATIAL_METRICS + TEMPORAL_METRICS
            ]
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "model": self.model,
            "protocol": asdict(self.protocol),
            "metadata": self.metadata,
            "scenes": [s.to_dict() for s in self.scenes],
            "aggregate": self.aggregate(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> MetricReport:
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(
                f"Unsupported report schema {d.get('schema_version')!r}, "
                f"expected {SCHEMA_VERSION}"
            )
        protocol = {
            k: tuple(v) if isinstance(v, list) else v for k, v in d["protocol"].items()
        }
        return cls(
            model=d["model"],
            scenes=[SceneMetrics.from_dict(s) for s in d["scenes"]],
            protocol=ProtocolConfig(**protocol),
            metadata=dict(d.get("metadata", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    def save(self, path: str | Path) -> None:
        """Writes the report as JSON and the per-frame rows as CSV next to it."""
        path = Path(path)
        atomic_write_bytes(path, self.to_json().encode())
        atomic_write_bytes(path.with_suffix(".csv"), self.to_csv().encode())

    @classmethod
    def load(cls, path: str | Path) -> MetricReport:
        path = Path(path)
        if not path.is_file():
            raise DataError("Report file does not exist", path)
        try:
            return cls.from_dict(json.loads(path.read_text()))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise FormatError(f"Malformed metric report ({e})", path) from e

    def csv_rows(self) -> list[dict[str, Any]]:
        """One row per scene and frame that is retained by any metric."""
        rows = []
        for s in self.scenes:
            spatial = dict(zip(s.spatial_indices, zip(s.psnr, s.ssim, s.lpips)))
            temporal = dict(zip(s.temporal_indices, zip(s.tof, s.tlp)))
            for t in sorted(set(spatial) | set(temporal)):
                psnr, ssim, lpips = spatial.get(t, (None, None, None))
                tof, tlp = temporal.get(t, (None, None))
                rows.append(
                    {
                        "scene_id": s.scene_id,
                        "frame": t,
                        "psnr": None if psnr is None else _encode(psnr),
                        "ssim": ssim,
                        "lpips": lpips,
                        "tof": tof,
                        "tlp": tlp,
                    }
                )
        return rows

    def to_csv(self) -> str:
        buffer = io.StringIO()
        columns = ["scene_id", "frame", *SPATIAL_METRICS, *TEMPORAL_METRICS]
        writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in self.csv_rows():
            writer.writerow({k: "" if v is None else v for k, v in row.items()})
        return buffer.getvalue()
