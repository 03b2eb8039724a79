"""Bilinear deformation warps and multi-step reconstruction losses.

The deformation operator gathers: output pixel (r, c) is the bilinear sample
of the input at (r + dy, c + dx), with out-of-range samples clamped to the
border. Everything here is pure; the tensor variants are differentiable and
shared with the trainers.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .validation import ContractError, check_field, check_frame, check_same_shape


def warp_tensor(frames: torch.Tensor, fields: torch.Tensor) -> torch.Tensor:
    """Warp a batch of frames, channels last.

    Args:
        frames: (B, H, W, C) tensor.
        fields: (B, H, W, 2) tensor of (dx, dy) offsets in pixels.

    Returns:
        (B, H, W, C) tensor of border-clamped bilinear samples.
    """
    b, h, w, _ = frames.shape
    dtype, device = frames.dtype, frames.device
    ys = torch.arange(h, dtype=dtype, device=device).view(1, h, 1) + fields[..., 1]
    xs = torch.arange(w, dtype=dtype, device=device).view(1, 1, w) + fields[..., 0]
    xs = xs.clamp(0, w - 1)
    ys = ys.clamp(0, h - 1)
    x0 = xs.floor().clamp(0, max(w - 2, 0))
    y0 = ys.floor().clamp(0, max(h - 2, 0))
    wx = (xs - x0).unsqueeze(-1)
    wy = (ys - y0).unsqueeze(-1)
    x0 = x0.long()
    y0 = y0.long()
    x1 = (x0 + 1).clamp(0, w - 1)
    y1 = (y0 + 1).clamp(0, h - 1)
    batch = torch.arange(b, device=device).view(b, 1, 1)
    tl = frames[batch, y0, x0]
    tr = frames[batch, y0, x1]
    bl = frames[batch, y1, x0]
    br = frames[batch, y1, x1]
    top = tl + (tr - tl) * wx
    bottom = bl + (br - bl) * wx
    return top + (bottom - top) * wy


def _check_pair(frame, field):
    arr = check_frame(frame)
    fld = check_field(field, grid_shape=arr.shape[:2])
    return arr, fld


def warp(frame: np.ndarray, field: np.ndarray) -> np.ndarray:
    """Apply a displacement field to one frame (the deformation operator)."""
    arr, fld = _check_pair(frame, field)
    out = warp_tensor(
        torch.from_numpy(np.ascontiguousarray(arr, dtype=np.float64)).unsqueeze(0),
        torch.from_numpy(np.ascontiguousarray(fld, dtype=np.float64)).unsqueeze(0),
    )
    return out.squeeze(0).numpy().astype(arr.dtype)


def _check_fields(frame, fields):
    if len(fields) == 0:
        raise ContractError("need at least one displacement field")
    arr = check_frame(frame)
    checked = [check_field(f, grid_shape=arr.shape[:2]) for f in fields]
    return arr, checked


def summed_reconstruct(frame: np.ndarray, fields: list[np.ndarray]) -> np.ndarray:
    """Warp once by the running sum of the fields."""
    arr, checked = _check_fields(frame, fields)
    total = np.zeros_like(checked[0], dtype=np.float64)
    for f in checked:
        total += f
    return warp(arr, total)


def composed_reconstruct(frame: np.ndarray, fields: list[np.ndarray]) -> np.ndarray:
    """Warp repeatedly, one field per step."""
    arr, checked = _check_fields(frame, fields)
    out = arr
    for f in checked:
        out = warp(out, f)
    return out


def summed_reconstruct_tensor(frame: torch.Tensor, fields: torch.Tensor) -> torch.Tensor:
    """All partial summed reconstructions of a window.

    ``frame`` is (H, W, C); ``fields`` is (T, H, W, 2). Step i of the result
    warps the frame by fields[0] + ... + fields[i].
    """
    sums = torch.cumsum(fields, dim=0)
    return warp_tensor(frame.unsqueeze(0).expand(fields.shape[0], -1, -1, -1), sums)


def composed_reconstruct_tensor(
    frame: torch.Tensor, fields: torch.Tensor, teacher_frames: torch.Tensor | None = None
) -> torch.Tensor:
    """All partial composed reconstructions of a window.

    Each step warps the previous reconstruction; when ``teacher_frames``
    (T, H, W, C) is given, step i instead warps ground-truth frame i
    (teacher forcing).
    """
    outputs = []
    current = frame
    for i in range(fields.shape[0]):
        source = teacher_frames[i] if teacher_frames is not None else current
        current = warp_tensor(source.unsqueeze(0), fields[i].unsqueeze(0)).squeeze(0)
        outputs.append(current)
    return torch.stack(outputs)


def _frames_to_array(frames) -> np.ndarray:
    stacked = [np.asarray(f.pixels if hasattr(f, "pixels") else f) for f in frames]
    return np.stack(stacked)


def deformation_loss(pred_frames, true_frames) -> float:
    """Mean over frames of the mean per-pixel L1 error."""
    pred = _frames_to_array(pred_frames)
    true = _frames_to_array(true_frames)
    if pred.shape[0] != true.shape[0]:
        raise ContractError(f"frame counts differ: {pred.shape[0]} vs {true.shape[0]}")
    check_same_shape(pred, true, "frame lists")
    return float(np.mean(np.abs(pred.astype(np.float64) - true.astype(np.float64))))


def error_accumulation_curves(seq, model) -> tuple[list[float], list[float]]:
    """Per-frame L1 of summed vs composed reconstruction, growing from frame 0.

    ``model`` must expose ``displacement_fields(seq) -> (N-1, H, W, 2)``.
    Mirrors the accumulated-error comparison of the two reconstruction paths.
    """
    fields = np.asarray(model.displacement_fields(seq))
    pixels = seq.pixels.astype(np.float64)
    f0 = torch.from_numpy(pixels[0])
    fields_t = torch.from_numpy(fields.astype(np.float64))
    with torch.no_grad():
        summed = summed_reconstruct_tensor(f0, fields_t).numpy()
        composed = composed_reconstruct_tensor(f0, fields_t).numpy()
    true = pixels[1:]
    summed_curve = np.mean(np.abs(summed - true), axis=(1, 2, 3))
    composed_curve = np.mean(np.abs(composed - true), axis=(1, 2, 3))
    return summed_curve.tolist(), composed_curve.tolist()


def save_field(field: np.ndarray, path: str | Path) -> None:
    """Serialize one displacement field as a 2-channel float array."""
    np.save(Path(path), check_field(field).astype(np.float32))


def load_field(path: str | Path) -> np.ndarray:
    return check_field(np.load(Path(path)))
