"""Shared argument checks and exception types."""

from __future__ import annotations

import numpy as np
from sklearn.exceptions import NotFittedError


class ContractError(ValueError):
    """An argument violates an operation's contract."""


class IngestionError(RuntimeError):
    """A clip source could not be decoded."""


class ExportError(RuntimeError):
    """A sequence could not be written to disk."""


class TrainingError(RuntimeError):
    """Training diverged or reached a non-recoverable state."""


def check_frame(pixels, name: str = "frame") -> np.ndarray:
    """Validate a single image array.

    Accepts (H, W) or (H, W, C) with C in {1, 3}; values must be finite and
    inside [0, 1]. Grayscale input is promoted to a trailing channel axis.
    """
    arr = np.asarray(pixels)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ContractError(f"{name} must be (H, W) or (H, W, C) with C in {{1, 3}}, got {arr.shape}")
    if not np.issubdtype(arr.dtype, np.floating):
        raise ContractError(f"{name} must hold real values in [0, 1], got dtype {arr.dtype}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite values")
    if arr.min() < -1e-6 or arr.max() > 1 + 1e-6:
        raise ContractError(f"{name} values must lie in [0, 1], got range [{arr.min()}, {arr.max()}]")
    return arr


def check_field(field, grid_shape: tuple[int, int] | None = None, name: str = "field") -> np.ndarray:
    """Validate an (H, W, 2) displacement field in pixel units."""
    arr = np.asarray(field)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ContractError(f"{name} must be (H, W, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite values")
    if grid_shape is not None and arr.shape[:2] != tuple(grid_shape):
        raise ContractError(f"{name} grid {arr.shape[:2]} does not match frame grid {tuple(grid_shape)}")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "arrays") -> None:
    if a.shape != b.shape:
        raise ContractError(f"{what} must share a shape: {a.shape} vs {b.shape}")


def check_fitted(estimator, attribute: str) -> None:
    """Raise sklearn's NotFittedError when a trained attribute is missing."""
    if getattr(estimator, attribute, None) is None:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() before using this method."
        )
