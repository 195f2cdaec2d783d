from __future__ import annotations

import logging
from typing import Mapping, Sequence

import jax.numpy as jnp
from tqdm.auto import tqdm

from superframe.clip import LRHRPair, VideoClip
from superframe.elements.perceptual import PerceptualDistance
from superframe.errors import ProtocolError
from superframe.functional import metrics
from superframe.functional.flow import pyramid_flow
from superframe.functional.protocol import ProtocolConfig, protocol_crop, select_frames
from superframe.ops import bicubic_upsample

from .report import MetricReport, SceneMetrics

__all__ = ["evaluate", "evaluate_scene", "bicubic_baseline"]

logger = logging.getLogger(__name__)


def _by_scene(clips: Mapping[str, VideoClip] | Sequence[VideoClip]) -> dict[str, VideoClip]:
    if isinstance(clips, Mapping):
        return dict(clips)
    by_scene = {}
    for clip in clips:
        if clip.scene_id in by_scene:
            raise ProtocolError(f"Duplicate scene id {clip.scene_id!r}")
        by_scene[clip.scene_id] = clip
    return by_scene


def evaluate_scene(
    gen: VideoClip,
    gt: VideoClip,
    cfg: ProtocolConfig,
    distance: PerceptualDistance,
    flow_fn=pyramid_flow,
) -> SceneMetrics:
    """
    Metrics of one generated clip against its ground truth.

    Both clips are cropped with ``protocol_crop``; PSNR, SSIM and LPIPS are
    computed on the spatially retained frames and tOF and tLP on the
    temporally retained frames.

    Raises:
        ProtocolError: If the clips differ in shape or the metrics reject them
            (too few frames, frames smaller than the SSIM window).
    """
    if gen.shape != gt.shape:
        raise ProtocolError(
            f"Scene {gt.scene_id!r}: generated clip {gen.shape} does not match "
            f"ground truth {gt.shape}"
        )
    try:
        return _scene_metrics(gen, gt, cfg, distance, flow_fn)
    except ValueError as e:
        raise ProtocolError(f"Scene {gt.scene_id!r}: {e}") from e


def _scene_metrics(
    gen: VideoClip,
    gt: VideoClip,
    cfg: ProtocolConfig,
    distance: PerceptualDistance,
    flow_fn,
) -> SceneMetrics:
    n = gt.num_frames
    spatial = select_frames(n, "spatial", cfg)
    temporal = select_frames(n, "temporal", cfg)
    gen_frames = protocol_crop(gen.frames, cfg, "hr")
    gt_frames = protocol_crop(gt.frames, cfg, "hr")
    idx = jnp.asarray(spatial)
    psnr = metrics.psnr(gen_frames[idx], gt_frames[idx])
    ssim = metrics.ssim(gen_frames[idx], gt_frames[idx])
    lpips = [float(distance(gen_frames[t], gt_frames[t])) for t in spatial]
    tof = metrics.tof_per_frame(gt_frames, gen_frames, flow_fn, temporal)
    tlp = metrics.tlp_per_frame(gt_frames, gen_frames, distance, temporal)
    return SceneMetrics(
        scene_id=gt.scene_id,
        spatial_indices=spatial,
        temporal_indices=temporal,
        psnr=[float(v) for v in psnr],
        ssim=[float(v) for v in ssim],
        lpips=lpips,
        tof=[float(v) for v in tof],
        tlp=[float(v) for v in tlp],
    )


def evaluate(
    gen_clips: Mapping[str, VideoClip] | Sequence[VideoClip],
    gt_clips: Mapping[str, VideoClip] | Sequence[VideoClip],
    cfg: ProtocolConfig = ProtocolConfig(),
    distance: PerceptualDistance | None = None,
    model: str = "unknown",
    flow_fn=pyramid_flow,
) -> MetricReport:
    """
    Evaluates generated clips against ground-truth clips scene by scene.

    Scenes are matched by ``scene_id`` and processed in sorted order, so the
    report is a pure function of its inputs.

    Args:
        gen_clips: Generated HR clips, as a list or keyed by scene id.
        gt_clips: Ground-truth HR clips.
        cfg: The evaluation protocol.
        distance: Perceptual distance; defaults to ``PerceptualDistance.default()``.
        model: Identity of the evaluated model, stored in the report.
        flow_fn: Flow estimator of the temporal metric.

    Raises:
        ProtocolError: If there are no scenes, the scene sets differ, or a clip
            violates the protocol (too short, mismatched dims).
    """
    gen, gt = _by_scene(gen_clips), _by_scene(gt_clips)
    if not gt and not gen:
        raise ProtocolError("No scenes to evaluate")
    missing, extra = sorted(set(gt) - set(gen)), sorted(set(gen) - set(gt))
    if missing or extra:
        raise ProtocolError(
            f"Scene sets differ: missing generated scenes {missing}, "
            f"scenes without ground truth {extra}"
        )
    distance = distance if distance is not None else PerceptualDistance.default()
    scenes = []
    for scene_id in tqdm(sorted(gt), desc="evaluate", leave=False):
        scenes.append(evaluate_scene(gen[scene_id], gt[scene_id], cfg, distance, flow_fn))
        logger.info("Evaluated %s: %s", scene_id, scenes[-1].means())
    return MetricReport(
        model=model,
        scenes=scenes,
        protocol=cfg,
        metadata={
            "tof_norm": "mean per-pixel L1",
            "tof_flow": "pyramid lucas-kanade",
            "lpips_backbone": distance.source,
            "lpips_display_scale": 10,
            "tlp_display_scale": 100,
        },
    )


def bicubic_baseline(
    pairs: Sequence[LRHRPair],
    cfg: ProtocolConfig = ProtocolConfig(),
    distance: PerceptualDistance | None = None,
) -> MetricReport:
    """Evaluates plain bicubic upsampling of the LR clips; no model involved."""
    gen = [
        p.hr.replace(frames=jnp.clip(bicubic_upsample(p.lr.frames, p.scale), 0.0, 1.0))
        for p in pairs
    ]
    return evaluate(gen, [p.hr for p in pairs], cfg, distance, model="bicubic")
