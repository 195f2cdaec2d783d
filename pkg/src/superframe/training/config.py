from __future__ import annotations

import ast
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Literal

from superframe.data.io import Layout
from superframe.elements.flow import FlowVariant
from superframe.elements.generator import GeneratorConfig
from superframe.errors import DataError, FormatError
from superframe.functional.losses import LossWeights

__all__ = [
    "Preset",
    "PRESETS",
    "TrainConfig",
    "resolve_config",
    "load_config",
    "dump_config",
    "save_config",
]

Preset = Literal["exp4_1", "exp4_2", "exp4_3", "rbpn_only"]

# Fields fixed by every experiment preset; everything else keeps its default
# unless overridden.
PRESETS: dict[str, dict[str, Any]] = {
    "exp4_1": {"n_neighbors": 2, "use_pingpong": True},
    "exp4_2": {"n_neighbors": 3, "use_pingpong": False},
    "exp4_3": {"n_neighbors": 3, "use_pingpong": False},
    "rbpn_only": {
        "n_neighbors": 3,
        "use_pingpong": False,
        "adv_weight": 0.0,
        "feat_weight": 0.0,
        "pp_weight": 0.0,
    },
}

# Share of ``total_steps`` spent on generator-only pretraining by ``exp4_3``.
PRETRAIN_FRACTION = 0.25


@dataclass(frozen=True)
class TrainConfig:
    """
    Everything that determines a training run.

    Build one with ``resolve_config``, which fills in the preset's fields;
    constructing it directly only validates. A config file lists these
    fields as ``key = value`` lines.

    Attributes:
        preset: The experiment this run reproduces.
        n_neighbors: Neighbor frames per target fed to the generator.
        use_pingpong: Whether clips are extended to ping-pong sequences and
            the ping-pong loss is applied.
        pretrain_generator_steps: Generator-only steps at the start of the
            run; counted in ``total_steps``.
        total_steps: Number of optimization steps.
        learning_rate: Initial step size of both optimizers.
        decay_every: Steps between halvings of the step size; defaults to a
            third of ``total_steps``.
        batch_size: Crops per batch.
        crop: LR crop size in pixels.
        scale: Super-resolution factor.
        clip_length: Frames per training crop.
        seed: Seed of initialization, batch order and augmentation.
        dataset_root: ``"synthetic"`` or a directory of HR scenes or of a
            prepared LR/HR tree.
        layout: Directory layout of raw HR scenes.
        synthetic_scenes: Number of scenes of the synthetic dataset.
        sigma: Blur used to degrade raw HR scenes.
        ksize: Blur taps used to degrade raw HR scenes.
        augment: Whether batches are randomly flipped.
        flow_variant: The ``FlowEstimator`` variant.
        base_channels: Generator feature width.
        n_residual_blocks: Residual blocks per projection step.
        zero_init_reconstruction: Start the generator at bicubic upsampling.
        non_saturating_gan: Use ``-ln D(fake)`` as the generator's
            adversarial loss instead of ``ln(1 - D(fake))``.
        pixel_weight, adv_weight, feat_weight, warp_weight, pp_weight: Loss
            weights.
        feature_layers: Weight of every discriminator stage in the feature
            loss.
        checkpoint_every: Steps between checkpoints.
        output_dir: Directory of the log and checkpoints.
    """

    preset: Preset = "exp4_1"
    n_neighbors: int = 2
    use_pingpong: bool = True
    pretrain_generator_steps: int = 0
    total_steps: int = 2000
    learning_rate: float = 1e-4
    decay_every: int | None = None
    batch_size: int = 4
    crop: int = 32
    scale: int = 4
    clip_length: int = 3
    seed: int = 0
    dataset_root: str = "synthetic"
    layout: Layout = "flat-scene-dirs"
    synthetic_scenes: int = 4
    sigma: float = 1.5
    ksize: int = 13
    augment: bool = True
    flow_variant: FlowVariant = "learned"
    base_channels: int = 32
    n_residual_blocks: int = 3
    zero_init_reconstruction: bool = False
    non_saturating_gan: bool = True
    pixel_weight: float = 1.0
    adv_weight: float = 0.01
    feat_weight: float = 0.2
    warp_weight: float = 1.0
    pp_weight: float = 0.5
    feature_layers: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0)
    checkpoint_every: int = 500
    output_dir: str = "runs/train"

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"Unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        if self.total_steps < 1:
            raise ValueError(f"total_steps must be positive, got {self.total_steps}")
        if not 0 <= self.pretrain_generator_steps < self.total_steps:
            raise ValueError(
                f"pretrain_generator_steps must lie in [0, total_steps={self.total_steps}), "
                f"got {self.pretrain_generator_steps}"
            )
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.decay_every is not None and self.decay_every < 1:
            raise ValueError(f"decay_every must be positive, got {self.decay_every}")
        if self.clip_length < 3:
            raise ValueError(
                f"clip_length must be at least 3 (one discriminator triplet), "
                f"got {self.clip_length}"
            )
        for name in ("batch_size", "crop", "checkpoint_every", "synthetic_scenes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.crop % 4 != 0:
            raise ValueError(f"crop must be a multiple of 4, got {self.crop}")
        # Both raise on invalid values.
        self.generator_config
        self.loss_weights
        self._check_preset()

    def _check_preset(self):
        for name, value in PRESETS[self.preset].items():
            if getattr(self, name) != value:
                raise ValueError(
                    f"Preset {self.preset} requires {name} = {value!r}, "
                    f"got {getattr(self, name)!r}"
                )
        if self.preset == "exp4_3" and self.pretrain_generator_steps == 0:
            raise ValueError("Preset exp4_3 requires pretrain_generator_steps > 0")

    @property
    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(
            base_channels=self.base_channels,
            n_neighbors=self.n_neighbors,
            n_residual_blocks=self.n_residual_blocks,
            scale=self.scale,
            zero_init_reconstruction=self.zero_init_reconstruction,
        )

    @property
    def loss_weights(self) -> LossWeights:
        """Weights of the adversarial phase; ``pp`` is 0 without ping-pong."""
        return LossWeights(
            pixel=self.pixel_weight,
            adv=self.adv_weight,
            feat=self.feat_weight,
            warp=self.warp_weight,
            pp=self.pp_weight if self.use_pingpong else 0.0,
            feature_layers=tuple(self.feature_layers),
        )

    @property
    def pretrain_weights(self) -> LossWeights:
        """Weights of the generator-only phase: no adversarial or feature term."""
        return replace(self.loss_weights, adv=0.0, feat=0.0)

    @property
    def effective_neighbors(self) -> int:
        """Frames seen per target; ping-pong doubles them with a backward pass."""
        return 2 * self.n_neighbors if self.use_pingpong else self.n_neighbors

    @property
    def lr_boundaries(self) -> list[int]:
        every = self.decay_every or max(1, self.total_steps // 3)
        return list(range(every, self.total_steps, every))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> TrainConfig:
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


def resolve_config(preset: Preset = "exp4_1", **overrides: Any) -> TrainConfig:
    """
    The ``TrainConfig`` of ``preset`` with ``overrides`` applied.

    ``exp4_3`` pretrains for a quarter of ``total_steps`` unless
    ``pretrain_generator_steps`` is given.

    Raises:
        ValueError: If the preset or a key is unknown, or an override
            contradicts the preset.
    """
    if preset not in PRESETS:
        raise ValueError(f"Unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    names = {f.name for f in fields(TrainConfig)}
    unknown = sorted(set(overrides) - names)
    if unknown:
        raise ValueError(f"Unknown config keys {unknown}")
    values = {**PRESETS[preset], **overrides, "preset": preset}
    if preset == "exp4_3" and "pretrain_generator_steps" not in overrides:
        total = values.get("total_steps", TrainConfig.total_steps)
        values["pretrain_generator_steps"] = max(1, int(total * PRETRAIN_FRACTION))
    return TrainConfig(**values)


def _parse_value(raw: str) -> Any:
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw


def load_config(path: str | Path, **overrides: Any) -> TrainConfig:
    """
    Reads a flat ``key = value`` config file; ``#`` starts a comment. Values
    are Python literals, anything else is taken as a string. Keyword
    ``overrides`` take precedence over the file.

    Raises:
        DataError: If the file does not exist.
        FormatError: If a line is malformed or names an unknown key.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError("Config file does not exist", path)
    names = {f.name for f in fields(TrainConfig)}
    values: dict[str, Any] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise FormatError(f"Line {lineno} is not of the form 'key = value'", path)
        if key not in names:
            raise FormatError(f"Unknown config key {key!r} on line {lineno}", path)
        values[key] = _parse_value(raw.strip())
    values.update(overrides)
    for key, value in values.items():
        if isinstance(value, list):
            values[key] = tuple(value)
    return resolve_config(values.pop("preset", "exp4_1"), **values)


def dump_config(config: TrainConfig) -> str:
    """The config as ``key = value`` lines, readable by ``load_config``."""
    return "".join(f"{k} = {v!r}\n" for k, v in config.to_dict().items())


def save_config(config: TrainConfig, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_config(config))
