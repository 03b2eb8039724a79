"""Orthonormal linear frame encoder fit by principal component analysis.

The encoder is a deliberate design constraint, not a convenience: as an
orthonormal matrix its operator 2-norm is exactly 1, so a bounded image
perturbation can only cause a bounded perturbation of the latent code.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import ContractError, check_fitted

_RANK_RTOL = 1e-10


def _as_flat_frames(X) -> tuple[np.ndarray, tuple[int, ...] | None]:
    """Coerce FrameSequence / (n, H, W, C) / (n, d) input to (n, d) float64."""
    if hasattr(X, "pixels"):
        X = X.pixels
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim == 2:
        return arr, None
    if arr.ndim in (3, 4):
        if arr.ndim == 3:  # single (H, W, C) frame
            arr = arr[None]
        return arr.reshape(arr.shape[0], -1), arr.shape[1:]
    raise ContractError(f"cannot interpret input of shape {arr.shape} as frames")


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Make the first non-negligible coefficient of each row positive."""
    fixed = components.copy()
    for row in fixed:
        nonzero = np.flatnonzero(np.abs(row) > 1e-12)
        if nonzero.size and row[nonzero[0]] < 0:
            row *= -1.0
    return fixed


def power_iteration_norm(matrix: np.ndarray, iters: int = 200, seed: int = 0) -> float:
    """Largest singular value of a linear map, by power iteration on AᵀA."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(matrix.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = matrix.T @ (matrix @ v)
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        v = w / norm
    return float(np.linalg.norm(matrix @ v))


class PCAEncoder(TransformerMixin, BaseEstimator):
    """Mean-centered orthonormal projection onto the top principal directions.

    Fitted attributes: ``mean_`` (d,), ``components_`` (n_components, d) with
    orthonormal rows and deterministic signs, ``explained_variance_``
    (n_components,), and ``frame_shape_`` when fit from image-shaped input.
    """

    def __init__(self, n_components: int = 200):
        self.n_components = n_components

    def fit(self, X, y=None):
        flat, frame_shape = _as_flat_frames(X)
        n, d = flat.shape
        if self.n_components < 1:
            raise ContractError("n_components must be >= 1")
        if self.n_components > min(n, d):
            raise ContractError(f"n_components={self.n_components} exceeds min(n_frames, pixels)={min(n, d)}")

        mean = flat.mean(axis=0)
        centered = flat - mean
        if n <= d:
            # Gram trick: eigenvectors of the n x n inner-product matrix.
            gram = centered @ centered.T
            eigvals, eigvecs = np.linalg.eigh(gram)
            order = np.argsort(eigvals)[::-1]
            eigvals = np.clip(eigvals[order], 0.0, None)
            eigvecs = eigvecs[:, order]
            cutoff = max(eigvals[0], 0.0) * _RANK_RTOL
            rank = int(np.sum(eigvals > cutoff))
            if rank < self.n_components:
                raise ContractError(
                    f"degenerate variance: data rank {rank} < n_components {self.n_components}"
                )
            top = eigvals[: self.n_components]
            components = (eigvecs[:, : self.n_components].T @ centered) / np.sqrt(top)[:, None]
            variance = top / max(n - 1, 1)
        else:
            cov = centered.T @ centered / max(n - 1, 1)
            eigvals, eigvecs = np.linalg.eigh(cov)
            order = np.argsort(eigvals)[::-1]
            eigvals = np.clip(eigvals[order], 0.0, None)
            eigvecs = eigvecs[:, order]
            cutoff = max(eigvals[0], 0.0) * _RANK_RTOL
            rank = int(np.sum(eigvals > cutoff))
            if rank < self.n_components:
                raise ContractError(
                    f"degenerate variance: data rank {rank} < n_components {self.n_components}"
                )
            components = eigvecs[:, : self.n_components].T
            variance = eigvals[: self.n_components]

        # Gram-trick rows are orthogonal only to eigensolver accuracy; re-orthonormalize.
        q, r = np.linalg.qr(components.T)
        components = (q * np.sign(np.diag(r))).T
        self.components_ = _fix_signs(components)
        self.mean_ = mean
        self.explained_variance_ = variance
        self.frame_shape_ = frame_shape
        return self

    def transform(self, X) -> np.ndarray:
        """Project frames to latent codes: z = B (flatten(f) - mean)."""
        check_fitted(self, "components_")
        flat, _ = _as_flat_frames(X)
        if flat.shape[1] != self.mean_.shape[0]:
            raise ContractError(f"frame size {flat.shape[1]} does not match basis size {self.mean_.shape[0]}")
        return (flat - self.mean_) @ self.components_.T

    def transform_frame(self, frame) -> np.ndarray:
        """Encode one frame to a single latent code vector."""
        return self.transform(np.asarray(frame)[None] if np.asarray(frame).ndim != 2 else frame)[0]

    def inverse_transform(self, Z) -> np.ndarray:
        """Map codes back to flattened frame space: mean + Bᵀ z."""
        check_fitted(self, "components_")
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        if Z.shape[1] != self.components_.shape[0]:
            raise ContractError(f"code dim {Z.shape[1]} does not match basis rank {self.components_.shape[0]}")
        return Z @ self.components_ + self.mean_

    def reconstruction_residual(self, frame) -> float:
        """Relative norm of the part of a frame outside the basis span."""
        check_fitted(self, "components_")
        flat, _ = _as_flat_frames(frame)
        centered = flat - self.mean_
        recon = (centered @ self.components_.T) @ self.components_
        denom = max(np.linalg.norm(centered), 1e-12)
        return float(np.linalg.norm(centered - recon) / denom)

    def operator_norm(self, iters: int = 200) -> float:
        """Largest singular value of the encoder map (should be 1)."""
        check_fitted(self, "components_")
        return power_iteration_norm(self.components_, iters=iters)
