"""Configuration-manifold learning.

A clip is embedded by a fixed orthonormal PCA encoder into a low-dimensional
code space; a deep convolutional decoder maps codes to per-pixel deformation
states ("configuration points"). Finite differences of consecutive
configuration points act as displacement fields, so the decoder is trained by
rebuilding each batch from its first frame with the summed and composed warp
paths and penalizing the per-pixel L1 error of both.
"""

from __future__ import annotations

import logging
import math

import numpy as np
import torch
from scipy.interpolate import CubicSpline
from sklearn.base import BaseEstimator
from torch import nn

from .datasets import CurriculumState, curriculum_advance, curriculum_epoch
from .pca import PCAEncoder
from .validation import ContractError, TrainingError, check_fitted, check_same_shape
from .warping import composed_reconstruct_tensor, summed_reconstruct_tensor, warp_tensor

logger = logging.getLogger(__name__)


def displacement_between(xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
    """Finite-difference displacement field between two configuration points."""
    xa = np.asarray(xa)
    xb = np.asarray(xb)
    check_same_shape(xa, xb, "configuration points")
    if xa.ndim != 3 or xa.shape[2] != 2:
        raise ContractError(f"configuration points must be (H, W, 2), got {xa.shape}")
    return xb - xa


def _upsample_widths(width: int, ups: int) -> list[int]:
    widths = [width]
    for _ in range(ups):
        widths.append(max(width // 2 ** (len(widths)), 16))
    return widths


class ConfigurationDecoder(nn.Module):
    """Code-to-configuration decoder: one dense projection, then stride-2
    transposed-convolution blocks up to the frame grid, linear 2-channel head.

    The head is zero-initialized so an untrained model outputs zero
    displacement everywhere; ``out_gain`` scales the head so that useful
    pixel-sized displacements are reachable at tiny learning rates.
    """

    BASE = 4

    def __init__(self, code_dim: int, grid_size: int, width: int = 128, out_gain: float = 256.0):
        super().__init__()
        ups = math.log2(grid_size / self.BASE)
        if grid_size < self.BASE or ups != int(ups):
            raise ContractError(f"grid size must be {self.BASE}*2^k, got {grid_size}")
        widths = _upsample_widths(width, int(ups))
        self.code_dim = code_dim
        self.grid_size = grid_size
        self.out_gain = float(out_gain)
        self.fc = nn.Linear(code_dim, widths[0] * self.BASE * self.BASE)
        self.blocks = nn.ModuleList(
            nn.ConvTranspose2d(widths[i], widths[i + 1], kernel_size=4, stride=2, padding=1)
            for i in range(int(ups))
        )
        self.head = nn.Conv2d(widths[-1], 2, kernel_size=3, padding=1)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        h = torch.nn.functional.elu(self.fc(z))
        h = h.view(z.shape[0], -1, self.BASE, self.BASE)
        for block in self.blocks:
            h = torch.nn.functional.elu(block(h))
        x = self.head(h) * self.out_gain
        return x.permute(0, 2, 3, 1)  # (B, H, W, 2)


def _window_starts(active: int, batch_size: int, rng: np.random.Generator | None) -> list[int]:
    """Tile the active prefix with batch windows; the tail window may overlap."""
    window = min(batch_size, active)
    starts = list(range(0, active - window + 1, window))
    if starts[-1] != active - window:
        starts.append(active - window)
    if rng is not None:
        rng.shuffle(starts)
    return starts


def _batch_loss(
    decoder: nn.Module,
    codes: torch.Tensor,
    frames: torch.Tensor,
    teacher_forcing: bool,
) -> torch.Tensor:
    """Summed plus composed reconstruction L1 for one sequential window."""
    x = decoder(codes)
    if not torch.isfinite(x).all():
        raise TrainingError("decoder produced non-finite configuration points")
    fields = x[1:] - x[:-1]
    target = frames[1:]
    summed = summed_reconstruct_tensor(frames[0], fields)
    teacher = frames[:-1] if teacher_forcing else None
    composed = composed_reconstruct_tensor(frames[0], fields, teacher_frames=teacher)
    return torch.mean(torch.abs(summed - target)) + torch.mean(torch.abs(composed - target))


class ManifoldEmbedding(BaseEstimator):
    """Asymmetric autoencoder over a clip: PCA encoder, deep decoder.

    Parameters mirror the training recipe: adaptive-moment updates at
    ``learning_rate``, windows of ``batch_size`` sequential frames, and a
    progressive curriculum seeded with ``seed_frames`` frames that grows by
    ``increment`` every ``epochs_per_stage`` epochs.

    Fitted attributes: ``encoder_`` (PCAEncoder), ``decoder_``
    (ConfigurationDecoder), ``frame_shape_``, ``history_``.
    """

    def __init__(
        self,
        n_components: int = 200,
        width: int = 128,
        out_gain: float = 256.0,
        learning_rate: float = 1e-5,
        batch_size: int = 32,
        seed_frames: int = 100,
        increment: int = 100,
        epochs_per_stage: int = 50,
        teacher_forcing: bool = False,
        device: str = "cpu",
        random_state: int = 0,
        encoder: PCAEncoder | None = None,
    ):
        self.n_components = n_components
        self.width = width
        self.out_gain = out_gain
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed_frames = seed_frames
        self.increment = increment
        self.epochs_per_stage = epochs_per_stage
        self.teacher_forcing = teacher_forcing
        self.device = device
        self.random_state = random_state
        self.encoder = encoder

    def _build_decoder(self, grid_size: int) -> ConfigurationDecoder:
        return ConfigurationDecoder(
            code_dim=self.n_components, grid_size=grid_size, width=self.width, out_gain=self.out_gain
        )

    def _check_sequence(self, X) -> np.ndarray:
        pixels = X.pixels if hasattr(X, "pixels") else np.asarray(X, dtype=np.float32)
        if pixels.ndim != 4:
            raise ContractError(f"expected (N, H, W, C) frames, got shape {pixels.shape}")
        if pixels.shape[0] < 2:
            raise ContractError("need at least 2 frames to learn a manifold")
        if pixels.shape[1] != pixels.shape[2]:
            raise ContractError("frames must be square")
        return np.asarray(pixels, dtype=np.float32)

    def fit(self, X, y=None, progress_callback=None):
        """Fit the encoder basis on the full clip, then train the decoder."""
        pixels = self._check_sequence(X)
        n, h, _, _ = pixels.shape
        if self.seed_frames < 2:
            raise ContractError("seed_frames must be >= 2")

        torch.manual_seed(self.random_state)
        encoder = self.encoder
        if encoder is None or getattr(encoder, "components_", None) is None:
            encoder = PCAEncoder(n_components=self.n_components).fit(pixels)
        if encoder.components_.shape[0] != self.n_components:
            raise ContractError(
                f"prefit encoder rank {encoder.components_.shape[0]} != n_components {self.n_components}"
            )
        decoder = self._build_decoder(h).to(self.device)

        state = CurriculumState(
            total_frames=n,
            seed_size=min(self.seed_frames, n),
            increment=self.increment,
            epochs_per_stage=self.epochs_per_stage,
        )
        history = _train_decoder(
            decoder=decoder,
            codes=encoder.transform(pixels),
            pixels=pixels,
            state=state,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            teacher_forcing=self.teacher_forcing,
            device=self.device,
            seed=self.random_state,
            progress_callback=progress_callback,
        )

        self.encoder_ = encoder
        self.decoder_ = decoder
        self.frame_shape_ = tuple(pixels.shape[1:])
        self.history_ = history
        return self

    # -- inference ---------------------------------------------------------

    def transform(self, X) -> np.ndarray:
        """Frames to latent codes via the orthonormal encoder."""
        check_fitted(self, "encoder_")
        return self.encoder_.transform(X)

    def decode_batch(self, Z) -> np.ndarray:
        """Codes to configuration points, (B, H, W, 2)."""
        check_fitted(self, "decoder_")
        Z = np.atleast_2d(np.array(Z, dtype=np.float32))
        if Z.shape[1] != self.n_components:
            raise ContractError(f"code dim {Z.shape[1]} != n_components {self.n_components}")
        self.decoder_.eval()
        with torch.no_grad():
            x = self.decoder_(torch.from_numpy(Z).to(self.device))
        return x.cpu().numpy()

    def decode(self, z) -> np.ndarray:
        """One code to one configuration point, (H, W, 2)."""
        return self.decode_batch(np.asarray(z)[None])[0]

    def configuration_points(self, X) -> np.ndarray:
        return self.decode_batch(self.transform(X))

    def displacement_fields(self, X) -> np.ndarray:
        """Consecutive finite differences of a clip's configuration points."""
        points = self.configuration_points(X)
        return points[1:] - points[:-1]

    def one_step_error(self, X) -> float:
        """Mean per-pixel L1 of warping each frame onto its successor."""
        pixels = self._check_sequence(X)
        fields = torch.from_numpy(self.displacement_fields(pixels))
        sources = torch.from_numpy(np.array(pixels[:-1]))
        with torch.no_grad():
            predicted = warp_tensor(sources, fields)
        return float(torch.mean(torch.abs(predicted - torch.from_numpy(np.array(pixels[1:])))))


def _train_decoder(
    decoder: nn.Module,
    codes: np.ndarray,
    pixels: np.ndarray,
    state: CurriculumState,
    learning_rate: float,
    batch_size: int,
    teacher_forcing: bool,
    device: str,
    seed: int,
    progress_callback=None,
) -> dict:
    """Curriculum training loop; returns a history dict of per-epoch losses."""
    codes_t = torch.from_numpy(np.asarray(codes, dtype=np.float32)).to(device)
    frames_t = torch.from_numpy(np.array(pixels)).to(device)
    optimizer = torch.optim.Adam(decoder.parameters(), lr=learning_rate)
    rng = np.random.default_rng(seed)

    def epoch_pass(active: int, train: bool) -> float:
        losses = []
        for start in _window_starts(active, batch_size, rng if train else None):
            window = slice(start, min(start + batch_size, active))
            loss = _batch_loss(decoder, codes_t[window], frames_t[window], teacher_forcing)
            if not torch.isfinite(loss):
                raise TrainingError(f"non-finite loss at window start {start} (active={active})")
            if train:
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
            losses.append(float(loss.detach()))
        return float(np.mean(losses))

    schedule = state.schedule()
    total_epochs = max(len(schedule) * state.epochs_per_stage, 1)
    # Initial/final/stage evaluations all run over the full clip so they are
    # directly comparable regardless of the curriculum stage.
    with torch.no_grad():
        initial = epoch_pass(state.total_frames, train=False)
    history = {"initial_loss": initial, "stages": [], "epoch_losses": []}
    done = 0
    while True:
        stage = {"active_frames": state.active, "losses": []}
        for _ in range(state.epochs_per_stage):
            mean_loss = epoch_pass(state.active, train=True)
            stage["losses"].append(mean_loss)
            history["epoch_losses"].append(mean_loss)
            state = curriculum_epoch(state)
            done += 1
            if progress_callback is not None:
                progress_callback(done / total_epochs, f"stage {state.active} frames, loss {mean_loss:.5f}")
        with torch.no_grad():
            stage["eval_loss"] = epoch_pass(state.total_frames, train=False)
        history["stages"].append(stage)
        logger.info("stage done: active=%d eval loss %.6f", state.active, stage["eval_loss"])
        if state.active >= state.total_frames:
            break
        state = curriculum_advance(state)
    history["final_loss"] = history["stages"][-1]["eval_loss"]
    return history


# -- latent paths ------------------------------------------------------------


def _check_keys(keys) -> np.ndarray:
    arr = [np.asarray(k, dtype=np.float64).ravel() for k in keys]
    if len(arr) < 2:
        raise ContractError("need at least 2 keys for a path")
    dim = arr[0].shape[0]
    if any(a.shape[0] != dim for a in arr):
        raise ContractError("all keys must share one latent dimension")
    return np.stack(arr)


def sample_path_segments(keys, steps_per_segment: list[int], mode: str = "linear") -> list[np.ndarray]:
    """Sample each key-to-key segment at ``steps + 1`` points including both ends.

    ``linear`` interpolates each segment affinely; ``spline`` evaluates one
    C2 interpolating cubic with centripetal (root-chord) parameterization.
    """
    pts = _check_keys(keys)
    if len(steps_per_segment) != len(pts) - 1:
        raise ContractError(f"need {len(pts) - 1} step counts, got {len(steps_per_segment)}")
    if any(s < 1 for s in steps_per_segment):
        raise ContractError("steps per segment must be >= 1")

    if mode == "linear":
        segments = []
        for i, steps in enumerate(steps_per_segment):
            t = np.linspace(0.0, 1.0, steps + 1)[:, None]
            segments.append((1.0 - t) * pts[i] + t * pts[i + 1])
        return segments
    if mode == "spline":
        chords = np.sqrt(np.linalg.norm(np.diff(pts, axis=0), axis=1))
        knots = np.concatenate([[0.0], np.cumsum(np.maximum(chords, 1e-9))])
        spline = CubicSpline(knots, pts, axis=0, bc_type="natural")
        segments = []
        for i, steps in enumerate(steps_per_segment):
            t = np.linspace(knots[i], knots[i + 1], steps + 1)
            seg = spline(t)
            seg[0] = pts[i]  # pin endpoints exactly
            seg[-1] = pts[i + 1]
            segments.append(seg)
        return segments
    raise ContractError(f"unknown path mode {mode!r}")


def latent_path(keys, steps_per_segment: int, mode: str = "linear") -> list[np.ndarray]:
    """A single path through all keys with uniform per-segment step counts."""
    pts = _check_keys(keys)
    segments = sample_path_segments(pts, [steps_per_segment] * (len(pts) - 1), mode=mode)
    path = [segments[0][0]]
    for seg in segments:
        path.extend(seg[1:])
    return path
