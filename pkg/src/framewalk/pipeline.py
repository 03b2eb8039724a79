"""Keyframes in, interpolated (optionally detail-transferred) video out.

Keyframes are dataset indices or arbitrary same-shaped images. Each segment
is rendered with round(transition * fps) frames sampled along the latent path
including both endpoints, so the first and last outputs are exactly the
keyframes' own reconstructions; hold times prepend extra copies of a
keyframe's frame.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .checkpoint import ModelBundle
from .datasets import FrameSequence, save_sequence
from .denoise import BlendParams, denoise_sequence, format_report
from .manifold import sample_path_segments
from .validation import ContractError, ExportError, check_frame
from .warping import warp

logger = logging.getLogger(__name__)

# Keyframes whose PCA residual exceeds this are flagged as out-of-distribution.
RESIDUAL_WARNING = 0.35


def round_half_up(x: float) -> int:
    """Deterministic frame-count rounding: .5 always rounds up."""
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class Keyframe:
    """One anchor pose: a dataset frame index or an explicit image."""

    ref: int | np.ndarray
    hold: float = 0.0  # seconds to hold this pose
    transition: float = 1.0  # seconds to the next keyframe

    def __post_init__(self):
        if self.hold < 0:
            raise ContractError("hold time must be >= 0")
        if self.transition <= 0:
            raise ContractError("transition duration must be > 0")


@dataclass(frozen=True)
class KeyframeSpec:
    keyframes: tuple[Keyframe, ...]

    def __post_init__(self):
        if len(self.keyframes) < 2:
            raise ContractError("need at least 2 keyframes")

    @classmethod
    def from_indices(cls, indices, transition: float = 1.0, hold: float = 0.0) -> "KeyframeSpec":
        return cls(tuple(Keyframe(ref=int(i), hold=hold, transition=transition) for i in indices))


@dataclass(frozen=True)
class RenderJob:
    keyframes: KeyframeSpec
    fps: float = 30.0
    path_mode: str = "linear"
    denoise: bool = False
    blend: BlendParams = field(default_factory=BlendParams)

    def __post_init__(self):
        if self.fps <= 0:
            raise ContractError("fps must be > 0")
        if self.path_mode not in ("linear", "spline"):
            raise ContractError(f"unknown path mode {self.path_mode!r}")


@dataclass
class RenderResult:
    sequence: FrameSequence
    report: dict


def _resolve_keyframe(ref, seq: FrameSequence) -> np.ndarray:
    if isinstance(ref, (int, np.integer)):
        return seq.frame(int(ref)).pixels
    frame = check_frame(ref, "keyframe image")
    if frame.shape != seq.frame_shape:
        raise ContractError(f"keyframe shape {frame.shape} does not match dataset {seq.frame_shape}")
    return frame.astype(np.float32)


def synthesize(job: RenderJob, model: ModelBundle, seq: FrameSequence) -> RenderResult:
    """Render a keyframe job with a trained model.

    Without a GAN component the renderer falls back to deformation-based
    hallucination: each path frame warps the nearest keyframe by the
    difference of their configuration points. The fallback and any
    out-of-distribution keyframes are flagged in the report.
    """
    manifold = model.manifold
    keys = [_resolve_keyframe(kf.ref, seq) for kf in job.keyframes.keyframes]
    codes = [manifold.encoder_.transform_frame(k) for k in keys]

    residuals = [manifold.encoder_.reconstruction_residual(k) for k in keys]
    report: dict = {
        "mode": "gan" if model.generator is not None else "warp-fallback",
        "keyframe_residuals": residuals,
        "flags": [],
    }
    for i, res in enumerate(residuals):
        if res > RESIDUAL_WARNING:
            report["flags"].append(f"keyframe {i} looks out of distribution (basis residual {res:.3f})")
    if model.generator is None:
        report["flags"].append("no GAN in archive: frames hallucinated by warping the nearest keyframe")

    steps = [round_half_up(kf.transition * job.fps) for kf in job.keyframes.keyframes[:-1]]
    if any(n < 2 for n in steps):
        raise ContractError("every transition needs at least 2 frames; raise fps or duration")
    segments = sample_path_segments(codes, [n - 1 for n in steps], mode=job.path_mode)

    def render_one(code: np.ndarray) -> np.ndarray:
        point = manifold.decode(code)
        if model.generator is not None:
            return model.generator.generate_frame(point)
        nearest = int(np.argmin([np.linalg.norm(code - kc) for kc in codes]))
        key_point = manifold.decode(codes[nearest])
        return warp(keys[nearest], point - key_point).astype(np.float32)

    def render_codes(code_block: np.ndarray) -> list[np.ndarray]:
        # One frame per forward pass: output is bit-identical regardless of
        # how a job is segmented, and matches a standalone
        # encode -> decode -> generate call on the same code.
        return [render_one(np.asarray(code)) for code in code_block]

    key_frames_rendered = [render_one(code) for code in codes]
    output: list[np.ndarray] = []
    segment_spans = []
    for i, segment in enumerate(segments):
        kf = job.keyframes.keyframes[i]
        output.extend([key_frames_rendered[i]] * round_half_up(kf.hold * job.fps))
        start = len(output)
        segment_frames = render_codes(np.asarray(segment))
        # Endpoint frames come from the same code path as the keyframes themselves.
        segment_frames[0] = key_frames_rendered[i]
        segment_frames[-1] = key_frames_rendered[i + 1]
        output.extend(segment_frames)
        segment_spans.append((start, len(output)))
    last = job.keyframes.keyframes[-1]
    output.extend([key_frames_rendered[-1]] * round_half_up(last.hold * job.fps))

    if job.denoise:
        start_key, end_key = keys[0], keys[-1]
        denoised, detail_report = denoise_sequence(
            output,
            (start_key, end_key),
            seq,
            manifold.encoder_,
            job.blend,
            return_report=True,
        )
        output = [f.astype(np.float32) for f in denoised]
        report["detail_transfer"] = detail_report

    report["segment_spans"] = segment_spans
    report["frame_count"] = len(output)
    sequence = FrameSequence(np.stack(output), fps=job.fps, name=f"{seq.name}-render")
    return RenderResult(sequence=sequence, report=report)


def export_video(seq: FrameSequence, out_dir: str | Path, report: dict | None = None) -> Path:
    """Write a rendered sequence: lossless frames + manifest, mp4 when possible."""
    if len(seq) == 0:
        raise ExportError("refusing to export an empty sequence")
    out = Path(out_dir)
    try:
        save_sequence(seq, out)
    except OSError as exc:
        raise ExportError(f"cannot write to {out}: {exc}") from exc
    if report is not None:
        (out / "render_report.json").write_text(json.dumps(report, indent=2, default=float))
        if "detail_transfer" in report:
            (out / "detail_report.txt").write_text(format_report(report["detail_transfer"]))
    _try_write_container(seq, out / "video.mp4")
    return out


def _try_write_container(seq: FrameSequence, path: Path) -> bool:
    h, w = seq.frame_shape[:2]
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"mp4v"), seq.fps, (w, h))
    if not writer.isOpened():
        logger.warning("no usable video encoder; wrote frames + manifest only")
        return False
    try:
        for frame in seq.pixels:
            rgb = np.round(frame * 255.0).astype(np.uint8)
            if rgb.shape[2] == 1:
                rgb = np.repeat(rgb, 3, axis=2)
            writer.write(cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR))
    finally:
        writer.release()
    return True
