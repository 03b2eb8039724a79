"""Local HTTP service: project browsing, training control, render previews.

Projects, jobs, and renders persist as plain JSON and image files under one
data root, so the service is stateless across restarts. Long-running work
always goes through the per-project job queue; every training/render endpoint
returns a job id immediately and never blocks on the work itself.
"""

from __future__ import annotations

import io
import json
import logging
import os
import queue
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, Response
from PIL import Image
from pydantic import BaseModel, Field, ValidationError

from .validation import ContractError, IngestionError, TrainingError

logger = logging.getLogger(__name__)

JOB_KINDS = ("ingest", "train-manifold", "train-gan", "interpolate", "denoise")
TERMINAL_STATES = ("done", "failed")
THUMBNAIL_MAX_SIDE = 128


@dataclass(frozen=True)
class ServiceSettings:
    data_root: Path
    port: int = 8765
    device: str = "cpu"


def resolve_settings(data_root: str | None = None, port: int | None = None) -> ServiceSettings:
    """Merge explicit arguments with FRAMEWALK_* environment variables."""
    root = Path(data_root or os.environ.get("FRAMEWALK_DATA_ROOT", "framewalk-data"))
    return ServiceSettings(
        data_root=root,
        port=int(port or os.environ.get("FRAMEWALK_PORT", 8765)),
        device=os.environ.get("FRAMEWALK_DEVICE", "cpu"),
    )


# -- request/response schemas -------------------------------------------------


class ProjectCreate(BaseModel):
    name: str = Field(min_length=1, max_length=120)
    dataset: str | None = None  # existing dataset directory to attach


class JobRequest(BaseModel):
    kind: Literal["ingest", "train-manifold", "train-gan", "interpolate", "denoise"]
    config: dict[str, Any] = Field(default_factory=dict)


class InterpolateConfig(BaseModel):
    keys: list[int] = Field(min_length=2)
    seconds: float = Field(default=1.0, gt=0)
    hold: float = Field(default=0.0, ge=0)
    fps: float = Field(default=10.0, gt=0)
    mode: Literal["linear", "spline"] = "linear"
    denoise: bool = False
    alpha: float = Field(default=1.0, ge=0)
    beta: float = Field(default=1.0, ge=0)
    lam: float = Field(default=50.0, ge=0, alias="lambda")
    k: int = Field(default=5, ge=1)

    model_config = {"populate_by_name": True}


_CONFIG_MODELS: dict[str, type[BaseModel] | None] = {
    "ingest": None,
    "train-manifold": None,
    "train-gan": None,
    "interpolate": InterpolateConfig,
    "denoise": None,
}


# -- persistence ---------------------------------------------------------------


class ProjectStore:
    """Disk-backed project and job records with an in-process cache."""

    def __init__(self, root: Path):
        self.root = Path(root)
        (self.root / "projects").mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _project_dir(self, project_id: str) -> Path:
        return self.root / "projects" / project_id

    @staticmethod
    def _write_atomic(path: Path, text: str) -> None:
        # status reads are lock-free, so writers must never leave a torn file
        tmp = path.with_suffix(".tmp")
        tmp.write_text(text)
        tmp.replace(path)

    def list_projects(self) -> list[dict]:
        projects = []
        for meta in sorted(self.root.glob("projects/*/project.json")):
            projects.append(json.loads(meta.read_text()))
        return projects

    def create_project(self, name: str, dataset: str | None) -> dict:
        project_id = uuid.uuid4().hex[:12]
        record = {
            "id": project_id,
            "name": name,
            "dataset": dataset,
            "model": None,
            "created_at": time.time(),
        }
        pdir = self._project_dir(project_id)
        pdir.mkdir(parents=True)
        self._write_atomic(pdir / "project.json", json.dumps(record, indent=2))
        self._write_atomic(pdir / "jobs.json", "[]")
        return record

    def get_project(self, project_id: str) -> dict:
        meta = self._project_dir(project_id) / "project.json"
        if not meta.exists():
            raise HTTPException(status_code=404, detail=f"no project {project_id}")
        return json.loads(meta.read_text())

    def update_project(self, project_id: str, **fields) -> dict:
        with self._lock:
            record = self.get_project(project_id)
            record.update(fields)
            self._write_atomic(self._project_dir(project_id) / "project.json", json.dumps(record, indent=2))
        return record

    def list_jobs(self, project_id: str) -> list[dict]:
        self.get_project(project_id)
        return json.loads((self._project_dir(project_id) / "jobs.json").read_text())

    def get_job(self, project_id: str, job_id: str) -> dict:
        for job in self.list_jobs(project_id):
            if job["id"] == job_id:
                return job
        raise HTTPException(status_code=404, detail=f"no job {job_id}")

    def append_job(self, project_id: str, job: dict) -> None:
        with self._lock:
            jobs = self.list_jobs(project_id)
            jobs.append(job)
            self._write_atomic(self._project_dir(project_id) / "jobs.json", json.dumps(jobs, indent=2, default=float))

    def update_job(self, project_id: str, job_id: str, **fields) -> None:
        with self._lock:
            jobs = self.list_jobs(project_id)
            for job in jobs:
                if job["id"] == job_id:
                    if job["state"] in TERMINAL_STATES:
                        return  # terminal states are immutable
                    job.update(fields)
                    break
            self._write_atomic(self._project_dir(project_id) / "jobs.json", json.dumps(jobs, indent=2, default=float))

    def render_dir(self, project_id: str, job_id: str) -> Path:
        return self._project_dir(project_id) / "renders" / job_id

    def dataset_dir(self, project_id: str) -> Path:
        return self._project_dir(project_id) / "dataset"

    def model_path(self, project_id: str) -> Path:
        return self._project_dir(project_id) / "model.fwm"


# -- job execution -------------------------------------------------------------


class JobRunner:
    """One worker thread per project; jobs on a project run strictly in order."""

    def __init__(self, store: ProjectStore, device: str = "cpu"):
        self.store = store
        self.device = device
        self._queues: dict[str, queue.Queue] = {}
        self._lock = threading.Lock()

    def _worker(self, project_id: str, jobs: queue.Queue) -> None:
        while True:
            job = jobs.get()
            if job is None:
                return
            self._run_job(project_id, job)

    def _queue_for(self, project_id: str) -> queue.Queue:
        with self._lock:
            if project_id not in self._queues:
                q: queue.Queue = queue.Queue()
                thread = threading.Thread(target=self._worker, args=(project_id, q), daemon=True)
                thread.start()
                self._queues[project_id] = q
            return self._queues[project_id]

    def submit(self, project_id: str, kind: str, config: dict) -> dict:
        job = {
            "id": uuid.uuid4().hex[:12],
            "kind": kind,
            "state": "queued",
            "progress": 0.0,
            "message": "queued",
            "config": config,
            "created_at": time.time(),
            "started_at": None,
            "finished_at": None,
        }
        self.store.append_job(project_id, job)
        self._queue_for(project_id).put(job)
        return job

    def _run_job(self, project_id: str, job: dict) -> None:
        job_id = job["id"]
        update = lambda **kw: self.store.update_job(project_id, job_id, **kw)  # noqa: E731
        update(state="running", message="started", started_at=time.time())
        try:
            handler = _JOB_HANDLERS[job["kind"]]
            result = handler(self, project_id, job_id, job["config"], update)
            update(state="done", progress=1.0, message="done", finished_at=time.time(), result=result)
        except Exception as exc:
            logger.exception("job %s failed", job_id)
            update(state="failed", message=str(exc), finished_at=time.time())


def _progress_hook(update, lo: float = 0.0, hi: float = 1.0):
    def hook(fraction: float, message: str) -> None:
        update(progress=lo + (hi - lo) * float(fraction), message=message)

    return hook


def _job_ingest(runner: JobRunner, project_id: str, job_id: str, config: dict, update) -> dict:
    from .datasets import DatasetSpec, ingest, save_sequence

    spec = DatasetSpec(
        source=config["src"],
        resolution=int(config.get("res", 128)),
        crop=config.get("crop", "center"),
        bbox=tuple(config["bbox"]) if config.get("bbox") else None,
        expand=int(config.get("expand", 0)),
        frame_limit=config.get("limit"),
        fps=config.get("fps"),
        name=config.get("name"),
    )
    seq = ingest(spec)
    out = runner.store.dataset_dir(project_id)
    save_sequence(seq, out, crop={"mode": spec.crop, "bbox": spec.bbox, "expand": spec.expand})
    runner.store.update_project(project_id, dataset=str(out))
    return {"frames": len(seq), "dataset": str(out)}


def _load_project_sequence(runner: JobRunner, project_id: str):
    from .datasets import load_sequence

    project = runner.store.get_project(project_id)
    if not project.get("dataset"):
        raise ContractError("project has no dataset; run an ingest job first")
    return load_sequence(project["dataset"])


def _job_train_manifold(runner: JobRunner, project_id: str, job_id: str, config: dict, update) -> dict:
    from .checkpoint import save_model
    from .manifold import ManifoldEmbedding

    seq = _load_project_sequence(runner, project_id)
    model = ManifoldEmbedding(
        n_components=int(config.get("zdim", 200)),
        width=int(config.get("width", 128)),
        out_gain=float(config.get("out_gain", 256.0)),
        learning_rate=float(config.get("lr", 1e-5)),
        batch_size=int(config.get("batch", 32)),
        seed_frames=int(config.get("seed_frames", 100)),
        increment=int(config.get("increment", 100)),
        epochs_per_stage=int(config.get("stage_epochs", 50)),
        device=runner.device,
        random_state=int(config.get("seed", 0)),
    )
    model.fit(seq, progress_callback=_progress_hook(update))
    path = runner.store.model_path(project_id)
    save_model(path, model)
    runner.store.update_project(project_id, model=str(path))
    return {"model": str(path), "final_loss": model.history_["final_loss"]}


def _job_train_gan(runner: JobRunner, project_id: str, job_id: str, config: dict, update) -> dict:
    from .checkpoint import load_model, save_model
    from .gan import FrameGenerator

    seq = _load_project_sequence(runner, project_id)
    project = runner.store.get_project(project_id)
    if not project.get("model"):
        raise ContractError("project has no trained manifold; run train-manifold first")
    bundle = load_model(project["model"], device=runner.device)
    generator = FrameGenerator(
        manifold=bundle.manifold,
        base_width=int(config.get("base_width", 32)),
        logit_gain=float(config.get("logit_gain", 200.0)),
        learning_rate=float(config.get("lr", 1e-5)),
        batch_size=int(config.get("batch", 32)),
        seed_frames=int(config.get("seed_frames", 100)),
        increment=int(config.get("increment", 100)),
        epochs_per_stage=int(config.get("epochs_per_stage", 50)),
        device=runner.device,
        random_state=int(config.get("seed", 0)),
    )
    generator.fit(seq, progress_callback=_progress_hook(update))
    path = runner.store.model_path(project_id)
    save_model(path, bundle.manifold, generator)
    runner.store.update_project(project_id, model=str(path))
    return {"model": str(path), "final_recon_l1": generator.history_["final_recon_l1"]}


def _job_interpolate(runner: JobRunner, project_id: str, job_id: str, config: dict, update) -> dict:
    from .checkpoint import load_model
    from .denoise import BlendParams
    from .pipeline import KeyframeSpec, RenderJob, export_video, synthesize

    parsed = InterpolateConfig.model_validate(config)
    seq = _load_project_sequence(runner, project_id)
    project = runner.store.get_project(project_id)
    if not project.get("model"):
        raise ContractError("project has no trained model; run train-manifold first")
    bundle = load_model(project["model"], device=runner.device)
    job = RenderJob(
        keyframes=KeyframeSpec.from_indices(parsed.keys, transition=parsed.seconds, hold=parsed.hold),
        fps=parsed.fps,
        path_mode=parsed.mode,
        denoise=parsed.denoise,
        blend=BlendParams(alpha=parsed.alpha, beta=parsed.beta, lam=parsed.lam, k=parsed.k),
    )
    update(progress=0.1, message="rendering")
    result = synthesize(job, bundle, seq)
    out = runner.store.render_dir(project_id, job_id)
    export_video(result.sequence, out, report=result.report)
    return {"frames": len(result.sequence), "render": str(out), "mode": result.report["mode"]}


def _job_denoise(runner: JobRunner, project_id: str, job_id: str, config: dict, update) -> dict:
    from .checkpoint import load_model
    from .datasets import FrameSequence, load_sequence, save_sequence
    from .denoise import BlendParams, denoise_sequence

    seq = _load_project_sequence(runner, project_id)
    project = runner.store.get_project(project_id)
    if not project.get("model"):
        raise ContractError("project has no trained model")
    source_render = config.get("render_job")
    frames_dir = runner.store.render_dir(project_id, source_render) if source_render else Path(config["frames"])
    rendered = load_sequence(frames_dir)
    bundle = load_model(project["model"], device=runner.device)
    params = BlendParams(
        alpha=float(config.get("alpha", 1.0)),
        beta=float(config.get("beta", 1.0)),
        lam=float(config.get("lambda", 50.0)),
        k=int(config.get("k", 5)),
    )
    start_key, end_key = rendered.frame(0).pixels, rendered.frame(len(rendered) - 1).pixels
    frames, report = denoise_sequence(
        list(rendered.pixels), (start_key, end_key), seq, bundle.manifold.encoder_, params, return_report=True
    )
    out = runner.store.render_dir(project_id, job_id)
    out_seq = FrameSequence(np.stack(frames), fps=rendered.fps, name=f"{rendered.name}-denoised")
    save_sequence(out_seq, out)
    return {"frames": len(out_seq), "render": str(out), "path": report["path"]}


_JOB_HANDLERS = {
    "ingest": _job_ingest,
    "train-manifold": _job_train_manifold,
    "train-gan": _job_train_gan,
    "interpolate": _job_interpolate,
    "denoise": _job_denoise,
}


# -- image helpers -------------------------------------------------------------


def _png_bytes(path: Path, max_side: int | None = None) -> bytes:
    with Image.open(path) as img:
        if max_side and max(img.size) > max_side:
            img.thumbnail((max_side, max_side))
        buffer = io.BytesIO()
        img.save(buffer, format="PNG")
        return buffer.getvalue()


# -- app ------------------------------------------------------------------------


def create_app(data_root: str | Path, device: str = "cpu") -> FastAPI:
    store = ProjectStore(Path(data_root))
    runner = JobRunner(store, device=device)
    app = FastAPI(title="framewalk service", version="0.1.0")
    app.state.store = store
    app.state.runner = runner

    @app.exception_handler(ContractError)
    @app.exception_handler(IngestionError)
    @app.exception_handler(TrainingError)
    async def _domain_error(request, exc):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/projects")
    def list_projects() -> list[dict]:
        return store.list_projects()

    @app.post("/projects", status_code=201)
    def create_project(body: ProjectCreate) -> dict:
        if body.dataset is not None:
            from .datasets import load_manifest

            load_manifest(body.dataset)  # raises on a bad dataset reference
        return store.create_project(body.name, body.dataset)

    @app.get("/projects/{project_id}")
    def get_project(project_id: str) -> dict:
        project = store.get_project(project_id)
        if project.get("dataset"):
            from .datasets import load_manifest

            try:
                manifest = load_manifest(project["dataset"])
                project["frame_count"] = manifest["frame_count"]
                project["resolution"] = manifest["resolution"]
                project["fps"] = manifest["fps"]
            except IngestionError:
                project["frame_count"] = None
        return project

    @app.get("/projects/{project_id}/frames/{index}")
    def get_frame(project_id: str, index: int, full: bool = False) -> Response:
        from .datasets import load_manifest

        project = store.get_project(project_id)
        if not project.get("dataset"):
            raise HTTPException(status_code=404, detail="project has no dataset")
        manifest = load_manifest(project["dataset"])
        files = manifest["files"]
        if not 0 <= index < len(files):
            raise HTTPException(status_code=404, detail=f"frame {index} out of range [0, {len(files)})")
        path = Path(project["dataset"]) / files[index]
        return Response(content=_png_bytes(path, None if full else THUMBNAIL_MAX_SIDE), media_type="image/png")

    @app.get("/projects/{project_id}/jobs")
    def list_jobs(project_id: str) -> list[dict]:
        return store.list_jobs(project_id)

    @app.post("/projects/{project_id}/jobs", status_code=202)
    def submit_job(project_id: str, body: JobRequest) -> dict:
        store.get_project(project_id)
        model = _CONFIG_MODELS.get(body.kind)
        if model is not None:
            try:
                model.model_validate(body.config)
            except ValidationError as exc:
                raise HTTPException(status_code=422, detail=json.loads(exc.json())) from exc
        # Submitted config is stored verbatim so clients can verify it round-trips.
        return runner.submit(project_id, body.kind, body.config)

    @app.get("/projects/{project_id}/jobs/{job_id}")
    def get_job(project_id: str, job_id: str) -> dict:
        return store.get_job(project_id, job_id)

    @app.get("/projects/{project_id}/render/{job_id}/{frame}")
    def get_render_frame(project_id: str, job_id: str, frame: int) -> Response:
        store.get_project(project_id)
        render_dir = store.render_dir(project_id, job_id)
        path = render_dir / "frames" / f"{frame:06d}.png"
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"no rendered frame {frame} for job {job_id}")
        return Response(content=_png_bytes(path), media_type="image/png")

    ui_dir = os.environ.get("FRAMEWALK_UI_DIR")
    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
