"""Command-line entry points.

Every subcommand exits 0 on success; contract and runtime failures print one
machine-readable line (``error: {...}`` JSON) on stderr and exit 1; argument
errors keep argparse's usage text and exit 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="framewalk", description="Keyframe-driven image-based animation toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="enable info logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="decode, crop, and downsample a clip into a dataset directory")
    p.add_argument("--src", required=True, help="video file or directory of numbered images")
    p.add_argument("--crop", choices=["center", "bbox"], default="center")
    p.add_argument("--bbox", default=None, help="X,Y,W,H window (bbox crop only)")
    p.add_argument("--expand", type=int, default=0, help="pixels to expand the bbox per side")
    p.add_argument("--res", type=int, default=128, help="square output resolution")
    p.add_argument("--fps", type=float, default=None, help="frame rate (required for image directories)")
    p.add_argument("--limit", type=int, default=None, help="keep only the first N frames")
    p.add_argument("--name", default=None)
    p.add_argument("--out", required=True, help="dataset directory to write")

    p = sub.add_parser("train-manifold", help="fit the encoder basis and train the configuration decoder")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--zdim", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--seed-frames", type=int, default=100)
    p.add_argument("--increment", type=int, default=100)
    p.add_argument("--stage-epochs", type=int, default=50)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--out-gain", type=float, default=256.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--device", default="cpu")
    p.add_argument("--out", required=True, help="model archive to write")

    p = sub.add_parser("train-gan", help="train the frame generator against a trained manifold")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="existing model archive with a trained manifold")
    p.add_argument("--epochs-per-stage", type=int, default=50)
    p.add_argument("--seed-frames", type=int, default=100)
    p.add_argument("--increment", type=int, default=100)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--base-width", type=int, default=32)
    p.add_argument("--logit-gain", type=float, default=200.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--device", default="cpu")
    p.add_argument("--out", required=True, help="model archive to write (may equal --model)")

    p = sub.add_parser("interpolate", help="render in-between frames for chosen keyframes")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="dataset directory the keyframe indices refer to")
    p.add_argument("--keys", default=None, help="comma-separated dataset frame indices, e.g. 120,845")
    p.add_argument("--job", default=None, help="JSON job document (service schema); overrides the flag values")
    p.add_argument("--seconds", type=float, default=3.0, help="transition duration per segment")
    p.add_argument("--hold", type=float, default=0.0, help="hold time per keyframe")
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--mode", choices=["linear", "spline"], default="linear")
    p.add_argument("--denoise", action="store_true", help="run detail transfer on the rendered frames")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=50.0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("denoise", help="detail-transfer an already rendered frame directory")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="dataset directory supplying detail candidates")
    p.add_argument("--frames", required=True, help="rendered frame directory to denoise")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=50.0)
    p.add_argument("--keys", default=None, help="dataset indices of the segment endpoints, e.g. 10,42")
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="run the local HTTP service")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-root", default=None)

    p = sub.add_parser("synth-clip", help="write a synthetic moving-blobs dataset for experiments")
    p.add_argument("--frames", type=int, default=200)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    return parser


def _parse_csv_ints(text: str, what: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        from .validation import ContractError

        raise ContractError(f"cannot parse {what} {text!r}: expected comma-separated integers") from exc


def _cmd_ingest(args) -> int:
    from .datasets import DatasetSpec, ingest, save_sequence

    bbox = tuple(_parse_csv_ints(args.bbox, "--bbox")) if args.bbox else None
    if bbox is not None and len(bbox) != 4:
        from .validation import ContractError

        raise ContractError("--bbox needs exactly X,Y,W,H")
    spec = DatasetSpec(
        source=args.src,
        resolution=args.res,
        crop=args.crop,
        bbox=bbox,
        expand=args.expand,
        frame_limit=args.limit,
        fps=args.fps,
        name=args.name,
    )
    seq = ingest(spec)
    crop_meta = {"mode": args.crop, "bbox": list(bbox) if bbox else None, "expand": args.expand}
    save_sequence(seq, args.out, crop=crop_meta)
    print(json.dumps({"dataset": str(args.out), "frames": len(seq), "resolution": list(seq.frame_shape)}))
    return 0


def _cmd_train_manifold(args) -> int:
    from .checkpoint import save_model
    from .datasets import load_sequence
    from .manifold import ManifoldEmbedding

    seq = load_sequence(args.data)
    model = ManifoldEmbedding(
        n_components=args.zdim,
        width=args.width,
        out_gain=args.out_gain,
        learning_rate=args.lr,
        batch_size=args.batch,
        seed_frames=args.seed_frames,
        increment=args.increment,
        epochs_per_stage=args.stage_epochs,
        device=args.device,
        random_state=args.seed,
    )
    model.fit(seq, progress_callback=_log_progress)
    save_model(args.out, model)
    print(
        json.dumps(
            {
                "model": str(args.out),
                "initial_loss": model.history_["initial_loss"],
                "final_loss": model.history_["final_loss"],
                "one_step_l1": model.one_step_error(seq),
            }
        )
    )
    return 0


def _cmd_train_gan(args) -> int:
    from .checkpoint import load_model, save_model
    from .datasets import load_sequence
    from .gan import FrameGenerator

    seq = load_sequence(args.data)
    bundle = load_model(args.model, device=args.device)
    generator = FrameGenerator(
        manifold=bundle.manifold,
        base_width=args.base_width,
        logit_gain=args.logit_gain,
        learning_rate=args.lr,
        batch_size=args.batch,
        seed_frames=args.seed_frames,
        increment=args.increment,
        epochs_per_stage=args.epochs_per_stage,
        device=args.device,
        random_state=args.seed,
    )
    generator.fit(seq, progress_callback=_log_progress)
    save_model(args.out, bundle.manifold, generator)
    print(
        json.dumps(
            {
                "model": str(args.out),
                "initial_recon_l1": generator.history_["initial_recon_l1"],
                "final_recon_l1": generator.history_["final_recon_l1"],
            }
        )
    )
    return 0


def _cmd_interpolate(args) -> int:
    from .checkpoint import load_model
    from .datasets import load_sequence
    from .denoise import BlendParams
    from .pipeline import KeyframeSpec, RenderJob, export_video, synthesize
    from .validation import ContractError

    seq = load_sequence(args.data)
    bundle = load_model(args.model)
    if args.job:
        # same JSON document the HTTP service accepts for interpolate jobs
        from .service import InterpolateConfig

        parsed = InterpolateConfig.model_validate(json.loads(Path(args.job).read_text()))
        job = RenderJob(
            keyframes=KeyframeSpec.from_indices(parsed.keys, transition=parsed.seconds, hold=parsed.hold),
            fps=parsed.fps,
            path_mode=parsed.mode,
            denoise=parsed.denoise,
            blend=BlendParams(alpha=parsed.alpha, beta=parsed.beta, lam=parsed.lam, k=parsed.k),
        )
    else:
        if not args.keys:
            raise ContractError("provide --keys or a --job document")
        keys = _parse_csv_ints(args.keys, "--keys")
        job = RenderJob(
            keyframes=KeyframeSpec.from_indices(keys, transition=args.seconds, hold=args.hold),
            fps=args.fps,
            path_mode=args.mode,
            denoise=args.denoise,
            blend=BlendParams(alpha=args.alpha, beta=args.beta, lam=args.lam, k=args.k),
        )
    result = synthesize(job, bundle, seq)
    export_video(result.sequence, args.out, report=result.report)
    print(json.dumps({"out": str(args.out), "frames": len(result.sequence), "mode": result.report["mode"]}))
    return 0


def _cmd_denoise(args) -> int:
    from .checkpoint import load_model
    from .datasets import FrameSequence, load_sequence, save_sequence
    from .denoise import BlendParams, denoise_sequence, format_report

    seq = load_sequence(args.data)
    rendered = load_sequence(args.frames)
    bundle = load_model(args.model)
    params = BlendParams(alpha=args.alpha, beta=args.beta, lam=args.lam, k=args.k)
    if args.keys:
        key_indices = _parse_csv_ints(args.keys, "--keys")
        start_key, end_key = seq.frame(key_indices[0]).pixels, seq.frame(key_indices[-1]).pixels
    else:
        start_key, end_key = rendered.frame(0).pixels, rendered.frame(len(rendered) - 1).pixels
    frames, report = denoise_sequence(
        list(rendered.pixels), (start_key, end_key), seq, bundle.manifold.encoder_, params, return_report=True
    )
    out_seq = FrameSequence(np.stack(frames), fps=rendered.fps, name=f"{rendered.name}-denoised")
    save_sequence(out_seq, args.out)
    Path(args.out, "detail_report.txt").write_text(format_report(report))
    print(json.dumps({"out": str(args.out), "frames": len(out_seq), "path": report["path"]}))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app, resolve_settings

    settings = resolve_settings(data_root=args.data_root, port=args.port)
    app = create_app(settings.data_root, device=settings.device)
    uvicorn.run(app, host=args.host, port=settings.port)
    return 0


def _cmd_synth_clip(args) -> int:
    from .datasets import save_sequence
    from .synthetic import moving_blobs_clip

    seq = moving_blobs_clip(n_frames=args.frames, size=args.size, fps=args.fps, seed=args.seed)
    save_sequence(seq, args.out)
    print(json.dumps({"dataset": str(args.out), "frames": len(seq)}))
    return 0


def _log_progress(fraction: float, message: str) -> None:
    logger.info("%5.1f%% %s", 100.0 * fraction, message)


_COMMANDS = {
    "ingest": _cmd_ingest,
    "train-manifold": _cmd_train_manifold,
    "train-gan": _cmd_train_gan,
    "interpolate": _cmd_interpolate,
    "denoise": _cmd_denoise,
    "serve": _cmd_serve,
    "synth-clip": _cmd_synth_clip,
}


def run_cli(argv: list[str] | None = None) -> int:
    """Parse and dispatch; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help (0) and usage errors (2)
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:
        from .validation import ContractError, ExportError, IngestionError, TrainingError

        kinds = {ContractError: "contract", IngestionError: "ingestion", ExportError: "export", TrainingError: "training"}
        kind = next((name for cls, name in kinds.items() if isinstance(exc, cls)), "internal")
        print(f'error: {json.dumps({"kind": kind, "message": str(exc)})}', file=sys.stderr)
        if kind == "internal":
            logger.exception("unhandled failure")
        return 1


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
