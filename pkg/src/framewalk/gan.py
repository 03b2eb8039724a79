"""Adversarial frame synthesis from configuration points.

The generator maps a per-pixel deformation state to a frame; it is trained
against real frames with an L1 reconstruction term plus an adversarial term.
The discriminator is deliberately trained with plain SGD and soft, sometimes
flipped labels, which keeps it from overpowering the generator.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass

import numpy as np
import torch
from sklearn.base import BaseEstimator
from torch import nn

from .datasets import CurriculumState, curriculum_advance, curriculum_epoch
from .manifold import ManifoldEmbedding, _window_starts
from .validation import ContractError, TrainingError, check_fitted

logger = logging.getLogger(__name__)

_LOGIT_CLAMP = 15.0  # keeps sigmoid outputs strictly inside (0, 1) in float32


@dataclass(frozen=True)
class GanTrainConfig:
    """Adversarial training recipe.

    Real frames get labels in ``real_label_range``, synthesized frames in
    ``fake_label_range``; each pair is swapped with ``flip_probability``.
    """

    generator_lr: float = 1e-5
    discriminator_lr: float = 1e-5
    batch_size: int = 32
    real_label_range: tuple[float, float] = (0.0, 0.1)
    fake_label_range: tuple[float, float] = (0.9, 1.0)
    flip_probability: float = 0.1
    adv_weight: float = 1.0
    recon_weight: float = 100.0

    def __post_init__(self):
        for lo, hi in (self.real_label_range, self.fake_label_range):
            if not (0.0 <= lo <= hi <= 1.0):
                raise ContractError(f"label range [{lo}, {hi}] must lie inside [0, 1]")
        if max(*self.real_label_range) > min(*self.fake_label_range) and max(
            *self.fake_label_range
        ) > min(*self.real_label_range):
            raise ContractError("real and fake label ranges must be disjoint")
        if not 0.0 <= self.flip_probability <= 1.0:
            raise ContractError("flip_probability must be a probability")


def discriminator_labels(
    n: int, config: GanTrainConfig, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Sample soft labels for one batch, swapping each pair with the flip probability."""
    if n < 1:
        raise ContractError("need n >= 1 labels")
    real = rng.uniform(*config.real_label_range, size=n)
    fake = rng.uniform(*config.fake_label_range, size=n)
    flip = rng.random(n) < config.flip_probability
    real_out = np.where(flip, fake, real)
    fake_out = np.where(flip, real, fake)
    return real_out, fake_out


def _conv_widths(base_width: int, downs: int) -> list[int]:
    return [base_width * 2**i for i in range(downs)]


class FrameSynthesisNet(nn.Module):
    """Encoder-decoder generator: stride-2 convolutions down to a 4x4
    bottleneck, mirrored transposed convolutions back up, bounded output.

    ``logit_gain`` scales the pre-sigmoid head so the output can traverse its
    range at tiny learning rates.
    """

    BASE = 4

    def __init__(self, grid_size: int, in_channels: int = 2, out_channels: int = 3, base_width: int = 32, logit_gain: float = 200.0):
        super().__init__()
        downs = int(np.log2(grid_size / self.BASE))
        if grid_size < self.BASE or grid_size != self.BASE * 2**downs:
            raise ContractError(f"grid size must be {self.BASE}*2^k, got {grid_size}")
        widths = _conv_widths(base_width, downs)
        self.grid_size = grid_size
        self.logit_gain = float(logit_gain)
        self.down = nn.ModuleList(
            nn.Conv2d(in_channels if i == 0 else widths[i - 1], widths[i], 4, stride=2, padding=1)
            for i in range(downs)
        )
        self.bottleneck = nn.Conv2d(widths[downs - 1], widths[downs - 1], 3, padding=1)
        self.up = nn.ModuleList(
            nn.ConvTranspose2d(widths[downs - 1 - i], widths[max(downs - 2 - i, 0)], 4, stride=2, padding=1)
            for i in range(downs)
        )
        self.head = nn.Conv2d(widths[0], out_channels, 3, padding=1)
        # Zero head: start at mid-gray with the sigmoid at its steepest, not
        # saturated by gain-amplified random logits.
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, H, W, 2) configuration points -> (B, H, W, C) frames in [0, 1]."""
        h = x.permute(0, 3, 1, 2)
        for conv in self.down:
            h = torch.nn.functional.elu(conv(h))
        h = torch.nn.functional.elu(self.bottleneck(h))
        for conv in self.up:
            h = torch.nn.functional.elu(conv(h))
        logits = (self.head(h) * self.logit_gain).clamp(-_LOGIT_CLAMP, _LOGIT_CLAMP)
        return torch.sigmoid(logits).permute(0, 2, 3, 1)


class FrameCriticNet(nn.Module):
    """Encoder-architecture discriminator with a single squashed output."""

    BASE = 4

    def __init__(self, grid_size: int, in_channels: int = 3, base_width: int = 32):
        super().__init__()
        downs = int(np.log2(grid_size / self.BASE))
        if grid_size < self.BASE or grid_size != self.BASE * 2**downs:
            raise ContractError(f"grid size must be {self.BASE}*2^k, got {grid_size}")
        widths = _conv_widths(base_width, downs)
        self.convs = nn.ModuleList(
            nn.Conv2d(in_channels if i == 0 else widths[i - 1], widths[i], 4, stride=2, padding=1)
            for i in range(downs)
        )
        self.fc = nn.Linear(widths[-1] * self.BASE * self.BASE, 1)

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        """(B, H, W, C) frames -> (B,) scores strictly inside (0, 1)."""
        h = frames.permute(0, 3, 1, 2)
        for conv in self.convs:
            h = torch.nn.functional.elu(conv(h))
        logits = self.fc(h.flatten(1)).squeeze(1).clamp(-_LOGIT_CLAMP, _LOGIT_CLAMP)
        return torch.sigmoid(logits)


class FrameGenerator(BaseEstimator):
    """GAN generator over a trained manifold.

    ``fit`` freezes the manifold, decodes each training frame to its
    configuration point, and alternates discriminator (SGD, binary
    cross-entropy on soft labels) and generator (Adam, adversarial plus
    L1-reconstruction) updates under the same progressive curriculum used for
    the manifold.

    Fitted attributes: ``generator_``, ``discriminator_``, ``history_``.
    """

    def __init__(
        self,
        manifold: ManifoldEmbedding | None = None,
        base_width: int = 32,
        logit_gain: float = 200.0,
        learning_rate: float = 1e-5,
        discriminator_lr: float = 1e-5,
        batch_size: int = 32,
        seed_frames: int = 100,
        increment: int = 100,
        epochs_per_stage: int = 50,
        adv_weight: float = 1.0,
        recon_weight: float = 100.0,
        flip_probability: float = 0.1,
        device: str = "cpu",
        random_state: int = 0,
    ):
        self.manifold = manifold
        self.base_width = base_width
        self.logit_gain = logit_gain
        self.learning_rate = learning_rate
        self.discriminator_lr = discriminator_lr
        self.batch_size = batch_size
        self.seed_frames = seed_frames
        self.increment = increment
        self.epochs_per_stage = epochs_per_stage
        self.adv_weight = adv_weight
        self.recon_weight = recon_weight
        self.flip_probability = flip_probability
        self.device = device
        self.random_state = random_state

    def _train_config(self) -> GanTrainConfig:
        return GanTrainConfig(
            generator_lr=self.learning_rate,
            discriminator_lr=self.discriminator_lr,
            batch_size=self.batch_size,
            flip_probability=self.flip_probability,
            adv_weight=self.adv_weight,
            recon_weight=self.recon_weight,
        )

    def _build_nets(self, grid_size: int, channels: int) -> tuple[FrameSynthesisNet, FrameCriticNet]:
        gen = FrameSynthesisNet(
            grid_size, in_channels=2, out_channels=channels, base_width=self.base_width, logit_gain=self.logit_gain
        )
        disc = FrameCriticNet(grid_size, in_channels=channels, base_width=self.base_width)
        return gen, disc

    def fit(self, X, y=None, progress_callback=None, checkpoint_callback=None):
        if self.manifold is None:
            raise ContractError("FrameGenerator requires a fitted manifold")
        check_fitted(self.manifold, "decoder_")
        pixels = self.manifold._check_sequence(X)
        n, h, _, c = pixels.shape

        torch.manual_seed(self.random_state)
        generator, discriminator = self._build_nets(h, c)
        generator.to(self.device)
        discriminator.to(self.device)

        points = self.manifold.configuration_points(pixels).astype(np.float32)
        state = CurriculumState(
            total_frames=n,
            seed_size=min(max(self.seed_frames, 2), n),
            increment=self.increment,
            epochs_per_stage=self.epochs_per_stage,
        )
        history = _train_gan_loop(
            generator,
            discriminator,
            points=points,
            pixels=pixels,
            state=state,
            config=self._train_config(),
            device=self.device,
            seed=self.random_state,
            progress_callback=progress_callback,
            checkpoint_callback=checkpoint_callback,
        )
        self.generator_ = generator
        self.discriminator_ = discriminator
        self.history_ = history
        self.frame_shape_ = (h, h, c)
        return self

    def predict(self, X) -> np.ndarray:
        """Configuration points (B, H, W, 2) -> frames (B, H, W, C)."""
        check_fitted(self, "generator_")
        arr = np.array(X, dtype=np.float32)  # copy: sequences expose read-only arrays
        if arr.ndim == 3:
            arr = arr[None]
        if arr.ndim != 4 or arr.shape[3] != 2:
            raise ContractError(f"expected configuration points (B, H, W, 2), got {arr.shape}")
        if arr.shape[1] != self.generator_.grid_size:
            raise ContractError(
                f"grid {arr.shape[1]} does not match generator grid {self.generator_.grid_size}"
            )
        self.generator_.eval()
        with torch.no_grad():
            frames = self.generator_(torch.from_numpy(arr).to(self.device))
        return frames.cpu().numpy()

    def generate_frame(self, x) -> np.ndarray:
        return self.predict(np.asarray(x)[None])[0]

    def reconstruct(self, X) -> np.ndarray:
        """Round-trip frames through encode -> decode -> generate."""
        points = self.manifold.configuration_points(X)
        return self.predict(points)

    def reconstruction_error(self, X) -> float:
        pixels = self.manifold._check_sequence(X)
        return float(np.mean(np.abs(self.reconstruct(pixels) - pixels)))

    def discriminate(self, frames) -> np.ndarray:
        check_fitted(self, "discriminator_")
        arr = np.array(frames, dtype=np.float32)
        if arr.ndim == 3:
            arr = arr[None]
        self.discriminator_.eval()
        with torch.no_grad():
            scores = self.discriminator_(torch.from_numpy(arr).to(self.device))
        return scores.cpu().numpy()


def _train_gan_loop(
    generator: FrameSynthesisNet,
    discriminator: FrameCriticNet,
    points: np.ndarray,
    pixels: np.ndarray,
    state: CurriculumState,
    config: GanTrainConfig,
    device: str,
    seed: int,
    progress_callback=None,
    checkpoint_callback=None,
) -> dict:
    points_t = torch.from_numpy(np.array(points)).to(device)
    frames_t = torch.from_numpy(np.array(pixels)).to(device)
    opt_g = torch.optim.Adam(generator.parameters(), lr=config.generator_lr)
    opt_d = torch.optim.SGD(discriminator.parameters(), lr=config.discriminator_lr)
    bce = nn.functional.binary_cross_entropy
    rng = np.random.default_rng(seed)

    def recon_l1() -> float:
        with torch.no_grad():
            total, count = 0.0, 0
            for start in range(0, len(frames_t), 64):
                chunk = slice(start, start + 64)
                total += float(torch.abs(generator(points_t[chunk]) - frames_t[chunk]).sum())
                count += frames_t[chunk].numel()
        return total / count

    history = {
        "initial_recon_l1": recon_l1(),
        "stages": [],
        "label_min": np.inf,
        "label_max": -np.inf,
    }
    last_good = (copy.deepcopy(generator.state_dict()), copy.deepcopy(discriminator.state_dict()))
    schedule = state.schedule()
    total_epochs = max(len(schedule) * state.epochs_per_stage, 1)
    done = 0
    while True:
        stage = {"active_frames": state.active, "d_losses": [], "g_losses": []}
        for _ in range(state.epochs_per_stage):
            d_epoch, g_epoch = [], []
            for start in _window_starts(state.active, config.batch_size, rng):
                window = slice(start, min(start + config.batch_size, state.active))
                real = frames_t[window]

                def diverged(where: str):
                    generator.load_state_dict(last_good[0])
                    discriminator.load_state_dict(last_good[1])
                    return TrainingError(
                        f"non-finite {where} at window {start} (active={state.active}); "
                        "last stage checkpoint restored"
                    )

                fake = generator(points_t[window])
                d_real = discriminator(real)
                d_fake = discriminator(fake.detach())
                if not (torch.isfinite(fake).all() and torch.isfinite(d_real).all() and torch.isfinite(d_fake).all()):
                    raise diverged("forward pass")

                real_labels, fake_labels = discriminator_labels(real.shape[0], config, rng)
                history["label_min"] = min(history["label_min"], real_labels.min(), fake_labels.min())
                history["label_max"] = max(history["label_max"], real_labels.max(), fake_labels.max())

                opt_d.zero_grad()
                loss_d = bce(d_real, torch.from_numpy(real_labels).float().to(device)) + bce(
                    d_fake, torch.from_numpy(fake_labels).float().to(device)
                )
                loss_d.backward()
                opt_d.step()

                # The generator graph is still valid: the D step touched only
                # discriminator parameters.
                opt_g.zero_grad()
                adv_targets = torch.from_numpy(
                    rng.uniform(*config.real_label_range, size=real.shape[0])
                ).float().to(device)
                d_adv = discriminator(fake)
                if not torch.isfinite(d_adv).all():
                    raise diverged("discriminator score")
                loss_g = config.adv_weight * bce(d_adv, adv_targets) + config.recon_weight * torch.mean(
                    torch.abs(fake - real)
                )
                loss_g.backward()
                opt_g.step()

                if not (torch.isfinite(loss_d) and torch.isfinite(loss_g)):
                    raise diverged("loss")
                d_epoch.append(float(loss_d.detach()))
                g_epoch.append(float(loss_g.detach()))
            stage["d_losses"].append(float(np.mean(d_epoch)))
            stage["g_losses"].append(float(np.mean(g_epoch)))
            state = curriculum_epoch(state)
            done += 1
            if progress_callback is not None:
                progress_callback(done / total_epochs, f"gan stage {state.active}, g={stage['g_losses'][-1]:.4f}")
        history["stages"].append(stage)
        last_good = (copy.deepcopy(generator.state_dict()), copy.deepcopy(discriminator.state_dict()))
        if checkpoint_callback is not None:
            checkpoint_callback(state.active)
        logger.info("gan stage done: active=%d g=%.5f d=%.5f", state.active, stage["g_losses"][-1], stage["d_losses"][-1])
        if state.active >= state.total_frames:
            break
        state = curriculum_advance(state)
    history["final_recon_l1"] = recon_l1()
    return history
