"""Clip ingestion, the on-disk dataset format, batching, and the training curriculum.

A dataset lives on disk as a directory of lossless per-frame PNGs plus a JSON
manifest; in memory it is a :class:`FrameSequence` wrapping one float32 array.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from .validation import ContractError, IngestionError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
DATASET_FORMAT = "framewalk-dataset"
IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


@dataclass(frozen=True)
class Frame:
    """One raster image of a clip, values in [0, 1]."""

    pixels: np.ndarray  # (H, W, C) float32
    index: int
    timestamp: float


class FrameSequence:
    """An ordered clip of same-shaped frames.

    Read-only after construction; safe to share across threads.
    """

    def __init__(self, pixels: np.ndarray, fps: float, name: str = "clip"):
        arr = np.asarray(pixels, dtype=np.float32)
        if arr.ndim == 3:
            arr = arr[:, :, :, None]
        if arr.ndim != 4 or arr.shape[3] not in (1, 3):
            raise ContractError(f"sequence pixels must be (N, H, W, C) with C in {{1, 3}}, got {arr.shape}")
        if arr.shape[0] < 1:
            raise ContractError("sequence must contain at least one frame")
        if not np.all(np.isfinite(arr)):
            raise ContractError("sequence contains non-finite values")
        lo, hi = float(arr.min()), float(arr.max())
        if lo < -1e-6 or hi > 1 + 1e-6:
            raise ContractError(f"sequence values must lie in [0, 1], got range [{lo}, {hi}]")
        if fps <= 0:
            raise ContractError(f"fps must be positive, got {fps}")
        self._pixels = np.clip(arr, 0.0, 1.0)
        self._pixels.setflags(write=False)
        self.fps = float(fps)
        self.name = name

    @property
    def pixels(self) -> np.ndarray:
        """All frames as a read-only (N, H, W, C) array."""
        return self._pixels

    @property
    def frame_shape(self) -> tuple[int, int, int]:
        return self._pixels.shape[1:]

    @property
    def frames(self) -> list[Frame]:
        return [self.frame(i) for i in range(len(self))]

    def frame(self, i: int) -> Frame:
        if not 0 <= i < len(self):
            raise ContractError(f"frame index {i} out of range [0, {len(self)})")
        return Frame(pixels=self._pixels[i], index=i, timestamp=i / self.fps)

    def __len__(self) -> int:
        return self._pixels.shape[0]

    def __getitem__(self, i: int) -> Frame:
        return self.frame(i)

    def __iter__(self):
        return (self.frame(i) for i in range(len(self)))

    def __repr__(self) -> str:
        n, h, w, c = self._pixels.shape
        return f"FrameSequence(name={self.name!r}, frames={n}, shape={h}x{w}x{c}, fps={self.fps})"


@dataclass(frozen=True)
class DatasetSpec:
    """Recipe for turning a raw clip into a training dataset.

    ``crop`` is either ``center`` (per-frame center square) or ``bbox`` (one
    user-supplied window applied identically to every frame, expanded by
    ``expand`` pixels per side and squared up before use).
    """

    source: str | Path
    resolution: int = 128
    crop: str = "center"
    bbox: tuple[int, int, int, int] | None = None  # x, y, w, h
    expand: int = 0
    frame_limit: int | None = None
    fps: float | None = None  # required for image directories, read from video otherwise
    name: str | None = None

    def __post_init__(self):
        if self.crop not in ("center", "bbox"):
            raise ContractError(f"crop must be 'center' or 'bbox', got {self.crop!r}")
        if self.crop == "bbox" and self.bbox is None:
            raise ContractError("bbox crop requires an explicit bbox")
        if self.expand < 0:
            raise ContractError("bbox expansion must be >= 0")
        if self.resolution < 4:
            raise ContractError(f"target resolution too small: {self.resolution}")
        if self.frame_limit is not None and self.frame_limit < 2:
            raise ContractError("frame_limit must allow at least 2 frames")


def _list_image_files(directory: Path) -> list[Path]:
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)
    if not files:
        raise IngestionError(f"no image files found in {directory}")
    return files


def _read_image(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float32) / 255.0
    except Exception as exc:
        raise IngestionError(f"cannot decode image {path}: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def _iter_video_frames(path: Path):
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise IngestionError(f"cannot open video {path}")
    fps = cap.get(cv2.CAP_PROP_FPS) or 0.0
    try:
        while True:
            ok, bgr = cap.read()
            if not ok:
                break
            rgb = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB).astype(np.float32) / 255.0
            yield fps, rgb
    finally:
        cap.release()


def _square_window(bbox: tuple[int, int, int, int], expand: int, shape: tuple[int, int]) -> tuple[int, int, int]:
    """Expand a bbox per side, square it up, and shift it inside the frame."""
    x, y, w, h = bbox
    side = max(w, h) + 2 * expand
    cx, cy = x + w / 2.0, y + h / 2.0
    img_h, img_w = shape
    if side > min(img_h, img_w):
        logger.warning("crop window %dpx exceeds frame %dx%d; shrinking", side, img_w, img_h)
        side = min(img_h, img_w)
    x0 = int(round(cx - side / 2.0))
    y0 = int(round(cy - side / 2.0))
    x0 = min(max(x0, 0), img_w - side)
    y0 = min(max(y0, 0), img_h - side)
    return x0, y0, side


def _crop_frame(arr: np.ndarray, spec: DatasetSpec) -> np.ndarray:
    h, w = arr.shape[:2]
    if spec.crop == "bbox":
        x0, y0, side = _square_window(spec.bbox, spec.expand, (h, w))
        return arr[y0 : y0 + side, x0 : x0 + side]
    side = min(h, w)
    y0 = (h - side) // 2
    x0 = (w - side) // 2
    return arr[y0 : y0 + side, x0 : x0 + side]


def _resize_frame(arr: np.ndarray, resolution: int) -> np.ndarray:
    if arr.shape[0] == resolution and arr.shape[1] == resolution:
        return arr
    out = cv2.resize(arr, (resolution, resolution), interpolation=cv2.INTER_LINEAR)
    if out.ndim == 2:  # cv2 drops singleton channels
        out = out[:, :, None]
    return out


def ingest(spec: DatasetSpec) -> FrameSequence:
    """Decode, crop, and bilinearly downsample a clip per its dataset spec.

    Sources: a directory of numbered images, or any container OpenCV decodes.
    Frames are processed in order; ``frame_limit`` keeps the first N frames.
    """
    source = Path(spec.source)
    if not source.exists():
        raise IngestionError(f"source does not exist: {source}")

    frames: list[np.ndarray] = []
    fps = spec.fps
    if source.is_dir():
        if (source / MANIFEST_NAME).exists():
            seq = load_sequence(source)
            fps = fps or seq.fps
            raw_iter = ((fps, seq.pixels[i]) for i in range(len(seq)))
        else:
            files = _list_image_files(source)
            raw_iter = ((fps, _read_image(p)) for p in files)
    else:
        raw_iter = _iter_video_frames(source)

    for src_fps, raw in raw_iter:
        if fps is None and src_fps:
            fps = float(src_fps)
        processed = _resize_frame(_crop_frame(raw, spec), spec.resolution)
        frames.append(np.clip(processed, 0.0, 1.0))
        if spec.frame_limit is not None and len(frames) >= spec.frame_limit:
            break

    if len(frames) < 2:
        raise IngestionError(f"source {source} yielded {len(frames)} frames; need at least 2")
    name = spec.name or source.stem
    return FrameSequence(np.stack(frames), fps=fps or 30.0, name=name)


def save_sequence(seq: FrameSequence, out_dir: str | Path, crop: dict | None = None) -> Path:
    """Write a sequence as zero-padded 8-bit PNGs plus a manifest."""
    out = Path(out_dir)
    frames_dir = out / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    n, h, w, c = seq.pixels.shape
    files = []
    for i in range(n):
        rel = f"frames/{i:06d}.png"
        arr = np.round(seq.pixels[i] * 255.0).astype(np.uint8)
        img = Image.fromarray(arr[:, :, 0], mode="L") if c == 1 else Image.fromarray(arr, mode="RGB")
        img.save(out / rel)
        files.append(rel)
    manifest = {
        "format": DATASET_FORMAT,
        "version": 1,
        "name": seq.name,
        "fps": seq.fps,
        "resolution": [h, w],
        "channels": c,
        "frame_count": n,
        "duration_seconds": n / seq.fps,
        "crop": crop or {},
        "files": files,
    }
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2))
    return out


def load_manifest(directory: str | Path) -> dict:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise IngestionError(f"no {MANIFEST_NAME} in {directory}")
    manifest = json.loads(path.read_text())
    if manifest.get("format") != DATASET_FORMAT:
        raise IngestionError(f"{path} is not a {DATASET_FORMAT} manifest")
    return manifest


def load_sequence(directory: str | Path) -> FrameSequence:
    """Load a dataset directory written by :func:`save_sequence`."""
    directory = Path(directory)
    manifest = load_manifest(directory)
    frames = [_read_image(directory / rel) for rel in manifest["files"]]
    if manifest["channels"] == 1:
        frames = [f[:, :, :1] for f in frames]
    return FrameSequence(np.stack(frames), fps=manifest["fps"], name=manifest["name"])


def batch_sequential(seq: FrameSequence, batch_size: int, start: int, active_count: int | None = None) -> list[Frame]:
    """Return ``batch_size`` consecutive frames beginning at ``start``.

    ``active_count`` caps the usable prefix of the clip (curriculum training);
    it defaults to the full length.
    """
    limit = len(seq) if active_count is None else min(active_count, len(seq))
    if batch_size < 1:
        raise ContractError("batch_size must be >= 1")
    if start < 0 or start + batch_size > limit:
        raise ContractError(f"batch [{start}, {start + batch_size}) out of range for {limit} active frames")
    return [seq.frame(i) for i in range(start, start + batch_size)]


@dataclass(frozen=True)
class CurriculumState:
    """Progressive training schedule over a clip prefix.

    The active prefix starts at ``seed_size`` frames and grows by
    ``increment`` after every ``epochs_per_stage`` epochs until the whole
    clip is covered.
    """

    total_frames: int
    seed_size: int = 100
    increment: int = 100
    epochs_per_stage: int = 50
    active: int = field(default=-1)
    epoch: int = 0

    def __post_init__(self):
        if self.total_frames < 1:
            raise ContractError("total_frames must be >= 1")
        if self.seed_size < 1 or self.seed_size > self.total_frames:
            raise ContractError(f"seed_size {self.seed_size} outside [1, {self.total_frames}]")
        if self.increment < 1:
            raise ContractError("increment must be >= 1")
        if self.active == -1:
            object.__setattr__(self, "active", self.seed_size)
        if not self.seed_size <= self.active <= self.total_frames:
            raise ContractError(f"active count {self.active} outside [{self.seed_size}, {self.total_frames}]")

    @property
    def stage_complete(self) -> bool:
        return self.epoch >= self.epochs_per_stage

    @property
    def finished(self) -> bool:
        return self.active >= self.total_frames and self.stage_complete

    def schedule(self) -> list[int]:
        """Active frame counts of every stage, in order."""
        counts = [self.seed_size]
        while counts[-1] < self.total_frames:
            counts.append(min(counts[-1] + self.increment, self.total_frames))
        return counts


def curriculum_epoch(state: CurriculumState) -> CurriculumState:
    """Record one finished epoch at the current stage."""
    return replace(state, epoch=state.epoch + 1)


def curriculum_advance(state: CurriculumState) -> CurriculumState:
    """Grow the active prefix by one increment; a no-op at full coverage."""
    new_active = min(state.active + state.increment, state.total_frames)
    if new_active == state.active:
        return state
    return replace(state, active=new_active, epoch=0)
