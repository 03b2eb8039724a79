import json

import cv2
import numpy as np
import pytest
from PIL import Image

from framewalk.datasets import (
    CurriculumState,
    DatasetSpec,
    FrameSequence,
    batch_sequential,
    curriculum_advance,
    curriculum_epoch,
    ingest,
    load_manifest,
    load_sequence,
    save_sequence,
)
from framewalk.validation import ContractError, IngestionError


def write_images(directory, frames):
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        arr = np.round(frame * 255).astype(np.uint8)
        Image.fromarray(arr).save(directory / f"{i:04d}.png")


@pytest.fixture
def image_dir(tmp_path, rng):
    frames = rng.random((12, 54, 96, 3))
    write_images(tmp_path / "raw", frames)
    return tmp_path / "raw"


class TestIngest:
    def test_center_crop_shape_contract(self, image_dir):
        seq = ingest(DatasetSpec(source=image_dir, resolution=32, fps=24.0))
        assert len(seq) == 12
        assert seq.pixels.shape == (12, 32, 32, 3)
        assert seq.fps == 24.0
        assert seq.pixels.min() >= 0.0 and seq.pixels.max() <= 1.0

    def test_bbox_expansion_window(self, tmp_path, rng):
        frames = rng.random((3, 300, 300, 3))
        write_images(tmp_path / "face", frames)
        spec = DatasetSpec(
            source=tmp_path / "face", resolution=230, crop="bbox", bbox=(30, 40, 200, 200), expand=15, fps=30.0
        )
        seq = ingest(spec)
        # 200x200 box + 15px per side = 230px window centered at (130, 140)
        stored = np.round(frames[0, 25:255, 15:245] * 255) / 255
        assert seq.pixels.shape == (3, 230, 230, 3)
        assert np.allclose(seq.pixels[0], stored, atol=1e-6)

    def test_bbox_window_shifts_inside_frame(self, tmp_path, rng):
        frames = rng.random((2, 100, 100, 3))
        write_images(tmp_path / "edge", frames)
        spec = DatasetSpec(source=tmp_path / "edge", resolution=40, crop="bbox", bbox=(80, 80, 30, 30), expand=5, fps=30.0)
        seq = ingest(spec)  # window would overflow; must shift, not error
        assert seq.pixels.shape == (2, 40, 40, 3)

    def test_no_op_resize_is_bit_identical(self, tmp_path, rng):
        frames = rng.random((4, 64, 64, 3))
        write_images(tmp_path / "sq", frames)
        stored = np.round(frames * 255).astype(np.float32) / 255
        seq = ingest(DatasetSpec(source=tmp_path / "sq", resolution=64, fps=30.0))
        assert np.array_equal(seq.pixels, stored.astype(np.float32))

    def test_ingest_is_idempotent(self, image_dir):
        spec = DatasetSpec(source=image_dir, resolution=32, fps=24.0)
        a, b = ingest(spec), ingest(spec)
        assert np.array_equal(a.pixels, b.pixels)

    def test_mixed_frame_sizes_center_crop(self, tmp_path, rng):
        d = tmp_path / "mixed"
        d.mkdir()
        Image.fromarray(np.zeros((40, 60, 3), np.uint8)).save(d / "0000.png")
        Image.fromarray(np.zeros((80, 50, 3), np.uint8)).save(d / "0001.png")
        seq = ingest(DatasetSpec(source=d, resolution=16, fps=10.0))
        assert seq.pixels.shape == (2, 16, 16, 3)

    def test_frame_limit_takes_prefix(self, image_dir):
        seq = ingest(DatasetSpec(source=image_dir, resolution=16, frame_limit=5, fps=24.0))
        full = ingest(DatasetSpec(source=image_dir, resolution=16, fps=24.0))
        assert len(seq) == 5
        assert np.array_equal(seq.pixels, full.pixels[:5])

    def test_unreadable_source_raises(self, tmp_path):
        with pytest.raises(IngestionError):
            ingest(DatasetSpec(source=tmp_path / "missing", resolution=32))

    def test_single_frame_source_rejected(self, tmp_path, rng):
        write_images(tmp_path / "one", rng.random((1, 32, 32, 3)))
        with pytest.raises(IngestionError):
            ingest(DatasetSpec(source=tmp_path / "one", resolution=16, fps=10.0))

    def test_video_container_ingest(self, tmp_path, rng):
        path = tmp_path / "clip.mp4"
        writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"mp4v"), 10.0, (48, 36))
        if not writer.isOpened():
            pytest.skip("no mp4 encoder available")
        for _ in range(8):
            writer.write((rng.random((36, 48, 3)) * 255).astype(np.uint8))
        writer.release()
        seq = ingest(DatasetSpec(source=path, resolution=24))
        assert seq.pixels.shape == (8, 24, 24, 3)
        assert seq.fps == pytest.approx(10.0)

    def test_bad_spec_fields(self, image_dir):
        with pytest.raises(ContractError):
            DatasetSpec(source=image_dir, resolution=32, crop="bbox")  # bbox missing
        with pytest.raises(ContractError):
            DatasetSpec(source=image_dir, resolution=32, expand=-1)
        with pytest.raises(ContractError):
            DatasetSpec(source=image_dir, resolution=32, crop="weird")


class TestDatasetDirectory:
    def test_save_load_round_trip(self, tmp_path, tiny_clip):
        save_sequence(tiny_clip, tmp_path / "ds", crop={"mode": "center"})
        loaded = load_sequence(tmp_path / "ds")
        stored = np.round(tiny_clip.pixels * 255) / 255
        assert np.allclose(loaded.pixels, stored, atol=1e-9)
        assert loaded.fps == tiny_clip.fps
        assert loaded.name == tiny_clip.name

    def test_manifest_contents(self, tmp_path, tiny_clip):
        save_sequence(tiny_clip, tmp_path / "ds")
        manifest = load_manifest(tmp_path / "ds")
        assert manifest["frame_count"] == len(tiny_clip)
        assert manifest["resolution"] == [32, 32]
        assert manifest["channels"] == 3
        assert manifest["fps"] == tiny_clip.fps
        assert len(manifest["files"]) == len(tiny_clip)
        assert manifest["duration_seconds"] == pytest.approx(len(tiny_clip) / tiny_clip.fps)

    def test_resave_is_bit_identical(self, tmp_path, tiny_clip):
        save_sequence(tiny_clip, tmp_path / "a")
        save_sequence(tiny_clip, tmp_path / "b")
        for rel in load_manifest(tmp_path / "a")["files"]:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_load_rejects_foreign_manifest(self, tmp_path):
        (tmp_path / "manifest.json").write_text(json.dumps({"format": "other"}))
        with pytest.raises(IngestionError):
            load_sequence(tmp_path)


class TestFrameSequence:
    def test_frame_accessors(self, tiny_clip):
        frame = tiny_clip.frame(3)
        assert frame.index == 3
        assert frame.timestamp == pytest.approx(3 / tiny_clip.fps)
        with pytest.raises(ContractError):
            tiny_clip.frame(len(tiny_clip))

    def test_value_range_enforced(self):
        with pytest.raises(ContractError):
            FrameSequence(np.full((2, 4, 4, 3), 1.5, dtype=np.float32), fps=10)
        with pytest.raises(ContractError):
            FrameSequence(np.zeros((2, 4, 4, 3), dtype=np.float32), fps=0)


class TestBatching:
    def test_full_batch(self, tiny_clip):
        frames = batch_sequential(tiny_clip, 32, 0)
        assert [f.index for f in frames] == list(range(32))

    def test_singleton(self, tiny_clip):
        frames = batch_sequential(tiny_clip, 1, 39)
        assert [f.index for f in frames] == [39]

    def test_overflow_rejected(self, tiny_clip):
        with pytest.raises(ContractError):
            batch_sequential(tiny_clip, 32, 20)

    def test_active_count_limits_range(self, tiny_clip):
        with pytest.raises(ContractError):
            batch_sequential(tiny_clip, 10, 15, active_count=20)

    def test_batches_tile_the_sequence(self, tiny_clip):
        pieces = [batch_sequential(tiny_clip, 8, s) for s in range(0, 40, 8)]
        flat = [f.index for piece in pieces for f in piece]
        assert flat == list(range(40))
        rebuilt = np.stack([f.pixels for piece in pieces for f in piece])
        assert np.array_equal(rebuilt, tiny_clip.pixels)


class TestCurriculum:
    def test_schedule_and_advances(self):
        state = CurriculumState(total_frames=500, seed_size=100, increment=100, epochs_per_stage=50)
        assert state.schedule() == [100, 200, 300, 400, 500]
        actives = [state.active]
        for _ in range(10):
            state = curriculum_advance(state)
            actives.append(state.active)
        assert actives[:5] == [100, 200, 300, 400, 500]
        assert actives[-1] == 500  # saturation is a no-op
        assert all(b >= a for a, b in zip(actives, actives[1:]))

    def test_reaches_total_in_expected_advances(self):
        state = CurriculumState(total_frames=450, seed_size=100, increment=100)
        advances = 0
        while state.active < state.total_frames:
            state = curriculum_advance(state)
            advances += 1
        assert advances == int(np.ceil((450 - 100) / 100))

    def test_epoch_counter_and_stage_completion(self):
        state = CurriculumState(total_frames=10, seed_size=5, increment=5, epochs_per_stage=2)
        assert not state.stage_complete
        state = curriculum_epoch(curriculum_epoch(state))
        assert state.stage_complete
        state = curriculum_advance(state)
        assert state.active == 10 and state.epoch == 0

    def test_invalid_states_rejected(self):
        with pytest.raises(ContractError):
            CurriculumState(total_frames=10, seed_size=20)
        with pytest.raises(ContractError):
            CurriculumState(total_frames=0)
