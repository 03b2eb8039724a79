"""framewalk: keyframe-driven image-based animation from a single short clip.

Learns a configuration manifold (orthonormal PCA encoder, deep decoder whose
finite differences act as displacement fields), renders latent paths between
keyframes with a GAN, and sharpens results by detail transfer from the source
clip.
"""

from .checkpoint import ModelBundle, load_model, save_model
from .datasets import (
    CurriculumState,
    DatasetSpec,
    Frame,
    FrameSequence,
    batch_sequential,
    curriculum_advance,
    ingest,
    load_sequence,
    save_sequence,
)
from .denoise import BlendParams, CandidateGraph, DetailTransfer, denoise_sequence, knn_candidates, min_cost_path
from .flow import estimate_flow, flow_warp
from .gan import FrameGenerator, GanTrainConfig, discriminator_labels
from .manifold import ManifoldEmbedding, displacement_between, latent_path
from .pca import PCAEncoder
from .pipeline import Keyframe, KeyframeSpec, RenderJob, export_video, synthesize
from .poisson import screened_poisson_blend
from .validation import ContractError, ExportError, IngestionError, TrainingError
from .warping import (
    composed_reconstruct,
    deformation_loss,
    error_accumulation_curves,
    summed_reconstruct,
    warp,
)

__version__ = "0.1.0"

__all__ = [
    "BlendParams",
    "CandidateGraph",
    "ContractError",
    "CurriculumState",
    "DatasetSpec",
    "DetailTransfer",
    "ExportError",
    "Frame",
    "FrameGenerator",
    "FrameSequence",
    "GanTrainConfig",
    "IngestionError",
    "Keyframe",
    "KeyframeSpec",
    "ManifoldEmbedding",
    "ModelBundle",
    "PCAEncoder",
    "RenderJob",
    "TrainingError",
    "batch_sequential",
    "composed_reconstruct",
    "curriculum_advance",
    "deformation_loss",
    "denoise_sequence",
    "discriminator_labels",
    "displacement_between",
    "error_accumulation_curves",
    "estimate_flow",
    "export_video",
    "flow_warp",
    "ingest",
    "knn_candidates",
    "latent_path",
    "load_model",
    "load_sequence",
    "min_cost_path",
    "save_model",
    "save_sequence",
    "screened_poisson_blend",
    "summed_reconstruct",
    "synthesize",
    "warp",
]
