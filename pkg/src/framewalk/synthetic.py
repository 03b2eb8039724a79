"""Synthetic desk-scale clips with known motion, for demos and tests."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .datasets import FrameSequence


def _textured_background(size: int, channels: int, rng: np.random.Generator) -> np.ndarray:
    noise = rng.standard_normal((size, size, channels))
    smooth = gaussian_filter(noise, sigma=(6, 6, 0))
    smooth -= smooth.min()
    smooth /= max(smooth.max(), 1e-9)
    return 0.3 + 0.3 * smooth  # mid-gray with gentle structure


def _gaussian_blob(size: int, cy: float, cx: float, sigma: float) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size]
    return np.exp(-((ys - cy) ** 2 + (xs - cx) ** 2) / (2.0 * sigma**2))


def moving_blobs_clip(
    n_frames: int = 200,
    size: int = 64,
    channels: int = 3,
    fps: float = 30.0,
    seed: int = 7,
    name: str = "blobs",
) -> FrameSequence:
    """Two soft blobs orbiting over a static textured background.

    Motion is periodic and stays inside the frame, so the pose space is a
    closed low-dimensional curve: ideal for sanity-checking manifold
    training at desk scale.
    """
    rng = np.random.default_rng(seed)
    background = _textured_background(size, channels, rng)
    center = size / 2.0
    bright_color = np.array([0.95, 0.85, 0.35][:channels])
    dark_color = np.array([0.05, 0.10, 0.30][:channels])

    frames = np.empty((n_frames, size, size, channels), dtype=np.float32)
    for t in range(n_frames):
        phase = 2.0 * np.pi * t / 90.0
        by = center - size * 0.11 + size * 0.16 * np.sin(phase)
        bx = center + size * 0.16 * np.cos(phase)
        dy = center + size * 0.14 + size * 0.10 * np.sin(1.7 * phase + 1.0)
        dx = center + size * 0.18 * np.cos(0.85 * phase)

        frame = background.copy()
        bright = _gaussian_blob(size, by, bx, sigma=size * 0.09)[:, :, None]
        dark = _gaussian_blob(size, dy, dx, sigma=size * 0.07)[:, :, None]
        frame = frame * (1.0 - bright) + bright * bright_color
        frame = frame * (1.0 - dark) + dark * dark_color
        frames[t] = np.clip(frame, 0.0, 1.0)
    return FrameSequence(frames, fps=fps, name=name)
