"""Model archives: one zip holding the encoder basis, decoder weights,
optional GAN weights, and every training config, behind a format tag.

Weights are stored as named numpy arrays rather than pickles so archives stay
portable and inspectable.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .gan import FrameGenerator
from .manifold import ManifoldEmbedding
from .pca import PCAEncoder
from .validation import ContractError

FORMAT_TAG = "framewalk-model"
FORMAT_VERSION = 1


def _state_to_arrays(module: torch.nn.Module, prefix: str) -> dict[str, np.ndarray]:
    return {f"{prefix}/{key}": value.cpu().numpy() for key, value in module.state_dict().items()}


def _load_state(module: torch.nn.Module, arrays: dict[str, np.ndarray], prefix: str) -> None:
    state = {
        key[len(prefix) + 1 :]: torch.from_numpy(np.array(value))
        for key, value in arrays.items()
        if key.startswith(prefix + "/")
    }
    module.load_state_dict(state)


def _json_params(estimator) -> dict:
    params = estimator.get_params(deep=False)
    return {k: v for k, v in params.items() if isinstance(v, (int, float, str, bool, type(None)))}


@dataclass
class ModelBundle:
    """A trained manifold plus (optionally) its GAN, as loaded from an archive."""

    manifold: ManifoldEmbedding
    generator: FrameGenerator | None = None
    metadata: dict | None = None

    def save(self, path: str | Path) -> Path:
        return save_model(path, self.manifold, self.generator)


def save_model(path: str | Path, manifold: ManifoldEmbedding, generator: FrameGenerator | None = None) -> Path:
    """Write a versioned model archive; overwrites any existing file."""
    if getattr(manifold, "decoder_", None) is None:
        raise ContractError("manifold must be fitted before saving")
    arrays: dict[str, np.ndarray] = {
        "pca/mean": manifold.encoder_.mean_,
        "pca/components": manifold.encoder_.components_,
        "pca/explained_variance": manifold.encoder_.explained_variance_,
    }
    arrays.update(_state_to_arrays(manifold.decoder_, "decoder"))
    manifest = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "components": ["pca", "decoder"],
        "frame_shape": list(manifold.frame_shape_),
        "manifold": {"params": _json_params(manifold), "history": getattr(manifold, "history_", None)},
    }
    if generator is not None and getattr(generator, "generator_", None) is not None:
        arrays.update(_state_to_arrays(generator.generator_, "generator"))
        arrays.update(_state_to_arrays(generator.discriminator_, "discriminator"))
        manifest["components"] += ["generator", "discriminator"]
        gan_history = dict(getattr(generator, "history_", {}) or {})
        gan_history.pop("stages", None)  # keep the manifest small
        manifest["gan"] = {"params": _json_params(generator), "history": gan_history}

    buffer = io.BytesIO()
    np.savez_compressed(buffer, **arrays)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as archive:
        archive.writestr("model.json", json.dumps(manifest, indent=2, default=float))
        archive.writestr("weights.npz", buffer.getvalue())
    return path


def load_model(path: str | Path, device: str = "cpu") -> ModelBundle:
    """Restore a model archive written by :func:`save_model`."""
    path = Path(path)
    if not path.exists():
        raise ContractError(f"model archive not found: {path}")
    with zipfile.ZipFile(path) as archive:
        manifest = json.loads(archive.read("model.json"))
        with np.load(io.BytesIO(archive.read("weights.npz"))) as npz:
            arrays = {key: npz[key] for key in npz.files}

    if manifest.get("format") != FORMAT_TAG:
        raise ContractError(f"{path} is not a {FORMAT_TAG} archive")
    if manifest.get("version") != FORMAT_VERSION:
        raise ContractError(f"unsupported archive version {manifest.get('version')}")

    frame_shape = tuple(manifest["frame_shape"])
    params = dict(manifest["manifold"]["params"])
    params["device"] = device
    manifold = ManifoldEmbedding(**params)
    encoder = PCAEncoder(n_components=params["n_components"])
    encoder.mean_ = arrays["pca/mean"]
    encoder.components_ = arrays["pca/components"]
    encoder.explained_variance_ = arrays["pca/explained_variance"]
    encoder.frame_shape_ = frame_shape
    decoder = manifold._build_decoder(frame_shape[0]).to(device)
    _load_state(decoder, arrays, "decoder")
    decoder.eval()
    manifold.encoder_ = encoder
    manifold.decoder_ = decoder
    manifold.frame_shape_ = frame_shape
    manifold.history_ = manifest["manifold"].get("history")

    generator = None
    if "generator" in manifest.get("components", []):
        gan_params = dict(manifest["gan"]["params"])
        gan_params["device"] = device
        generator = FrameGenerator(manifold=manifold, **gan_params)
        gen_net, disc_net = generator._build_nets(frame_shape[0], frame_shape[2])
        _load_state(gen_net, arrays, "generator")
        _load_state(disc_net, arrays, "discriminator")
        gen_net.to(device).eval()
        disc_net.to(device).eval()
        generator.generator_ = gen_net
        generator.discriminator_ = disc_net
        generator.history_ = manifest["gan"].get("history")
        generator.frame_shape_ = frame_shape

    return ModelBundle(manifold=manifold, generator=generator, metadata=manifest)
