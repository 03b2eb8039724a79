"""Data-driven detail transfer for synthesized frames.

For every synthesized frame: find the k training frames whose latent codes
are nearest, warp each toward the frame by dense flow, pick one candidate per
frame with a minimum-cost path through the layered candidate graph (data term
against the synthesized frame, smoothness term against the previous choice),
then composite the chosen source's gradients onto the synthesized colors with
a screened Poisson solve.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .datasets import Frame, FrameSequence
from .flow import flow_warp
from .pca import PCAEncoder
from .poisson import screened_poisson_blend
from .validation import ContractError, check_fitted, check_frame, check_same_shape

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BlendParams:
    """Weights of the detail-transfer stage.

    alpha scales the data term, beta the path-smoothness term, lam the
    Poisson screening (how much synthesized color survives), k the number of
    nearest-neighbor candidates per frame.
    """

    alpha: float = 1.0
    beta: float = 1.0
    lam: float = 50.0
    k: int = 5

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ContractError("alpha and beta must be >= 0")
        if self.lam < 0:
            raise ContractError("lambda must be >= 0")
        if self.k < 1:
            raise ContractError("k must be >= 1")


def knn_candidates(
    target_z: np.ndarray,
    seq: FrameSequence,
    encoder: PCAEncoder,
    k: int,
    codes: np.ndarray | None = None,
) -> list[tuple[int, Frame]]:
    """The k frames with codes nearest the query, ascending by distance.

    Ties break toward the lower frame index. ``codes`` may carry precomputed
    codes for the sequence to skip re-encoding.
    """
    if k < 1 or k > len(seq):
        raise ContractError(f"k={k} outside [1, {len(seq)}]")
    if codes is None:
        codes = encoder.transform(seq.pixels)
    target = np.asarray(target_z, dtype=np.float64).ravel()
    if target.shape[0] != codes.shape[1]:
        raise ContractError(f"query dim {target.shape[0]} != code dim {codes.shape[1]}")
    distances = np.linalg.norm(codes - target, axis=1)
    order = np.lexsort((np.arange(len(distances)), distances))[:k]
    return [(int(i), seq.frame(int(i))) for i in order]


def edge_cost(
    warped_candidate: np.ndarray,
    target: np.ndarray,
    prev_chosen: np.ndarray | None,
    params: BlendParams,
) -> float:
    """Matching cost of one candidate: data term plus optional smoothness term."""
    cand = check_frame(warped_candidate, "candidate")
    tgt = check_frame(target, "target")
    check_same_shape(cand, tgt, "candidate/target")
    cost = params.alpha * float(np.mean(np.abs(tgt.astype(np.float64) - cand.astype(np.float64))))
    if prev_chosen is not None:
        prev = check_frame(prev_chosen, "previous choice")
        check_same_shape(cand, prev, "candidate/previous")
        cost += params.beta * float(np.mean(np.abs(cand.astype(np.float64) - prev.astype(np.float64))))
    return cost


@dataclass
class CandidateGraph:
    """Layered DAG from a start keyframe through per-frame candidates to an end keyframe.

    ``nodes[i]`` holds layer i's (frame index, warped image) pairs;
    ``entry_costs`` (k0,), ``transition_costs[i]`` (k_i, k_{i+1}) and
    ``exit_costs`` (k_last,) carry the edge weights.
    """

    nodes: list[list[tuple[int, np.ndarray | None]]]
    entry_costs: np.ndarray
    transition_costs: list[np.ndarray] = field(default_factory=list)
    exit_costs: np.ndarray | None = None

    def __post_init__(self):
        if not self.nodes or any(len(layer) == 0 for layer in self.nodes):
            raise ContractError("graph needs at least one non-empty candidate layer")
        self.entry_costs = np.asarray(self.entry_costs, dtype=np.float64)
        if self.entry_costs.shape != (len(self.nodes[0]),):
            raise ContractError("entry cost shape does not match first layer")
        if len(self.transition_costs) != len(self.nodes) - 1:
            raise ContractError(f"need {len(self.nodes) - 1} transition matrices, got {len(self.transition_costs)}")
        self.transition_costs = [np.asarray(m, dtype=np.float64) for m in self.transition_costs]
        for i, matrix in enumerate(self.transition_costs):
            if matrix.shape != (len(self.nodes[i]), len(self.nodes[i + 1])):
                raise ContractError(f"transition matrix {i} has shape {matrix.shape}")
        if self.exit_costs is None:
            self.exit_costs = np.zeros(len(self.nodes[-1]))
        self.exit_costs = np.asarray(self.exit_costs, dtype=np.float64)
        if self.exit_costs.shape != (len(self.nodes[-1]),):
            raise ContractError("exit cost shape does not match last layer")
        for costs in [self.entry_costs, *self.transition_costs, self.exit_costs]:
            if np.any(costs < 0) or not np.all(np.isfinite(costs)):
                raise ContractError("edge costs must be finite and >= 0")


def min_cost_path(graph: CandidateGraph) -> list[tuple[int, np.ndarray | None]]:
    """One candidate per layer minimizing the total edge cost.

    Among equal-cost optima, returns the lexicographically smallest sequence
    of layer positions (dynamic program with greedy forward tie-breaking).
    """
    layers = graph.nodes
    # suffix[i][a]: cheapest cost from node a of layer i through the sink.
    suffix = [None] * len(layers)
    suffix[-1] = graph.exit_costs.copy()
    for i in range(len(layers) - 2, -1, -1):
        suffix[i] = np.min(graph.transition_costs[i] + suffix[i + 1][None, :], axis=1)

    chosen = []
    totals = graph.entry_costs + suffix[0]
    position = int(np.argmin(totals))  # argmin takes the first (lowest) index on ties
    chosen.append(layers[0][position])
    for i in range(len(layers) - 1):
        step_totals = graph.transition_costs[i][position] + suffix[i + 1]
        position = int(np.argmin(step_totals))
        chosen.append(layers[i + 1][position])
    return chosen


def path_cost(graph: CandidateGraph, positions: list[int]) -> float:
    """Total edge cost of an explicit node-position sequence (for verification)."""
    total = float(graph.entry_costs[positions[0]])
    for i in range(len(positions) - 1):
        total += float(graph.transition_costs[i][positions[i], positions[i + 1]])
    return total + float(graph.exit_costs[positions[-1]])


def build_candidate_graph(
    synth_frames: list[np.ndarray],
    keyframes: tuple[np.ndarray, np.ndarray],
    seq: FrameSequence,
    encoder: PCAEncoder,
    params: BlendParams,
    codes: np.ndarray | None = None,
) -> CandidateGraph:
    """Assemble the detail-transfer graph for a synthesized segment.

    Candidates are flow-warped toward their synthesized frame before any cost
    is computed. Entry edges carry only the data term (no previous choice);
    exit edges carry the smoothness term against the end keyframe.
    """
    if len(synth_frames) == 0:
        raise ContractError("need at least one synthesized frame")
    if codes is None:
        codes = encoder.transform(seq.pixels)
    start_key, end_key = (check_frame(kf) for kf in keyframes)

    nodes: list[list[tuple[int, np.ndarray]]] = []
    for target in synth_frames:
        target = check_frame(target, "synthesized frame")
        picks = knn_candidates(encoder.transform_frame(target), seq, encoder, params.k, codes=codes)
        nodes.append([(idx, flow_warp(frame.pixels, target)) for idx, frame in picks])

    def data_term(layer: int, candidate: np.ndarray) -> float:
        return params.alpha * float(np.mean(np.abs(synth_frames[layer] - candidate)))

    def smooth_term(a: np.ndarray, b: np.ndarray) -> float:
        return params.beta * float(np.mean(np.abs(a - b)))

    entry = np.array([data_term(0, image) for _, image in nodes[0]])
    transitions = []
    for i in range(len(nodes) - 1):
        matrix = np.array(
            [
                [data_term(i + 1, b_img) + smooth_term(b_img, a_img) for _, b_img in nodes[i + 1]]
                for _, a_img in nodes[i]
            ]
        )
        transitions.append(matrix)
    exits = np.array([smooth_term(end_key, image) for _, image in nodes[-1]])
    return CandidateGraph(nodes=nodes, entry_costs=entry, transition_costs=transitions, exit_costs=exits)


def denoise_sequence(
    synth_frames,
    keyframes: tuple[np.ndarray, np.ndarray],
    seq: FrameSequence,
    encoder: PCAEncoder,
    params: BlendParams = BlendParams(),
    codes: np.ndarray | None = None,
    return_report: bool = False,
):
    """Detail-transfer every synthesized frame; returns frames (and optionally a report)."""
    frames = [np.asarray(f.pixels if hasattr(f, "pixels") else f, dtype=np.float32) for f in synth_frames]
    graph = build_candidate_graph(frames, keyframes, seq, encoder, params, codes=codes)
    chosen = min_cost_path(graph)
    blended = [
        screened_poisson_blend(target, picked_image, params.lam)
        for target, (_, picked_image) in zip(frames, chosen)
    ]
    if not return_report:
        return blended
    report = {
        "candidates": [[idx for idx, _ in layer] for layer in graph.nodes],
        "path": [idx for idx, _ in chosen],
        "params": {"alpha": params.alpha, "beta": params.beta, "lambda": params.lam, "k": params.k},
    }
    return blended, report


def format_report(report: dict) -> str:
    """Human-readable per-frame candidate/choice dump."""
    lines = [
        "detail transfer report",
        f"params: alpha={report['params']['alpha']} beta={report['params']['beta']} "
        f"lambda={report['params']['lambda']} k={report['params']['k']}",
    ]
    for i, (candidates, choice) in enumerate(zip(report["candidates"], report["path"])):
        lines.append(f"frame {i:4d}: candidates={candidates} chosen={choice}")
    return "\n".join(lines)


class DetailTransfer(BaseEstimator):
    """Detail-transfer stage bound to one clip and encoder.

    ``fit`` caches the clip's latent codes; ``denoise`` runs the candidate
    search, path solve, and Poisson blend for a synthesized segment.
    """

    def __init__(self, encoder: PCAEncoder | None = None, alpha: float = 1.0, beta: float = 1.0, lam: float = 50.0, k: int = 5):
        self.encoder = encoder
        self.alpha = alpha
        self.beta = beta
        self.lam = lam
        self.k = k

    def params(self) -> BlendParams:
        return BlendParams(alpha=self.alpha, beta=self.beta, lam=self.lam, k=self.k)

    def fit(self, X, y=None):
        if self.encoder is None or getattr(self.encoder, "components_", None) is None:
            raise ContractError("DetailTransfer requires a fitted encoder")
        seq = X if isinstance(X, FrameSequence) else FrameSequence(np.asarray(X), fps=30.0)
        self.seq_ = seq
        self.codes_ = self.encoder.transform(seq.pixels)
        return self

    def denoise(self, synth_frames, keyframes, return_report: bool = False):
        check_fitted(self, "codes_")
        return denoise_sequence(
            synth_frames,
            keyframes,
            self.seq_,
            self.encoder,
            self.params(),
            codes=self.codes_,
            return_report=return_report,
        )
