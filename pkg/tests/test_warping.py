import numpy as np
import pytest

from framewalk.validation import ContractError
from framewalk.warping import (
    composed_reconstruct,
    deformation_loss,
    error_accumulation_curves,
    load_field,
    save_field,
    summed_reconstruct,
    warp,
)


def random_frame(rng, h=16, w=16, c=3):
    return rng.random((h, w, c))


def constant_field(h, w, dx, dy):
    field = np.zeros((h, w, 2))
    field[:, :, 0] = dx
    field[:, :, 1] = dy
    return field


def shift_oracle(frame, dx, dy):
    """Index-shift reference for integer-translation warps (interior only)."""
    h, w = frame.shape[:2]
    out = np.zeros_like(frame)
    for r in range(h):
        for c in range(w):
            rr, cc = r + dy, c + dx
            if 0 <= rr < h and 0 <= cc < w:
                out[r, c] = frame[rr, cc]
    return out


class TestWarp:
    def test_zero_field_is_identity_exact(self, rng):
        frame = random_frame(rng)
        out = warp(frame, np.zeros((16, 16, 2)))
        assert np.array_equal(out, frame)

    def test_integer_translation_matches_index_shift_oracle(self, rng):
        frame = random_frame(rng)
        for dx, dy in [(3, 0), (0, 2), (-2, 1)]:
            out = warp(frame, constant_field(16, 16, dx, dy))
            oracle = shift_oracle(frame, dx, dy)
            rs = slice(max(-dy, 0), 16 - max(dy, 0))
            cs = slice(max(-dx, 0), 16 - max(dx, 0))
            assert np.array_equal(out[rs, cs], oracle[rs, cs])

    def test_2x2_exact_pixel_centers(self):
        frame = np.array([[0.1, 0.5], [0.7, 0.9]])[:, :, None]
        field = np.zeros((2, 2, 2))
        field[0, 0] = (1, 1)  # gather (1, 1)
        field[0, 1] = (0, 0)  # stay
        field[1, 0] = (0, -1)  # gather (0, 0)
        field[1, 1] = (-1, -1)  # gather (0, 0)
        out = warp(frame, field)
        expected = np.array([[0.9, 0.5], [0.1, 0.1]])[:, :, None]
        assert np.array_equal(out, expected)

    def test_fractional_sample_hand_computed(self):
        frame = np.array([[0.2, 0.6], [0.4, 1.0]])[:, :, None]
        field = np.zeros((2, 2, 2))
        field[0, 0] = (0.5, 0.0)
        out = warp(frame, field)
        assert out[0, 0, 0] == pytest.approx(0.4, abs=1e-12)  # midpoint of 0.2 and 0.6

    def test_linear_in_frame_argument(self, rng):
        f1, f2 = random_frame(rng), random_frame(rng)
        field = rng.uniform(-3, 3, size=(16, 16, 2))
        a, b = 0.3, 0.6
        lhs = warp(a * f1 + b * f2, field)
        rhs = a * warp(f1, field) + b * warp(f2, field)
        assert np.abs(lhs - rhs).max() < 1e-6

    def test_output_bounded_by_input_range(self, rng):
        frame = 0.2 + 0.6 * random_frame(rng)
        field = rng.uniform(-5, 5, size=(16, 16, 2))
        out = warp(frame, field)
        assert out.min() >= frame.min() - 1e-9
        assert out.max() <= frame.max() + 1e-9

    def test_border_clamp(self, rng):
        frame = random_frame(rng)
        out = warp(frame, constant_field(16, 16, 100.0, 0.0))
        assert np.array_equal(out, np.repeat(frame[:, -1:, :], 16, axis=1))

    def test_shape_mismatch_rejected(self, rng):
        with pytest.raises(ContractError):
            warp(random_frame(rng), np.zeros((8, 8, 2)))

    def test_nan_field_rejected(self, rng):
        field = np.zeros((16, 16, 2))
        field[3, 3, 0] = np.nan
        with pytest.raises(ContractError):
            warp(random_frame(rng), field)


class TestReconstruction:
    def test_single_field_all_paths_agree(self, rng):
        frame = random_frame(rng)
        field = rng.uniform(-2, 2, size=(16, 16, 2))
        direct = warp(frame, field)
        assert np.array_equal(summed_reconstruct(frame, [field]), direct)
        assert np.array_equal(composed_reconstruct(frame, [field]), direct)

    def test_cancelling_fields_restore_frame(self, rng):
        frame = random_frame(rng)
        u = rng.uniform(-2, 2, size=(16, 16, 2))
        assert np.array_equal(summed_reconstruct(frame, [u, -u]), frame)

    def test_translation_fields_sum_to_shift(self, rng):
        frame = random_frame(rng)
        fields = [constant_field(16, 16, 1, 0), constant_field(16, 16, 2, 0)]
        summed = summed_reconstruct(frame, fields)
        composed = composed_reconstruct(frame, fields)
        oracle = shift_oracle(frame, 3, 0)
        assert np.array_equal(summed[:, :13], oracle[:, :13])
        assert np.abs(summed[:, :13] - composed[:, :13]).max() < 1e-6

    def test_rotational_fields_differ_between_paths(self, rng):
        frame = random_frame(rng, 24, 24)
        ys, xs = np.mgrid[0:24, 0:24].astype(float)
        cy = cx = 11.5
        theta = 0.35
        rot_x = np.cos(theta) * (xs - cx) - np.sin(theta) * (ys - cy) + cx - xs
        rot_y = np.sin(theta) * (xs - cx) + np.cos(theta) * (ys - cy) + cy - ys
        field = np.stack([rot_x, rot_y], axis=2)
        summed = summed_reconstruct(frame, [field, field])
        composed = composed_reconstruct(frame, [field, field])
        assert np.mean(np.abs(summed - composed)) > 1e-3

    def test_empty_field_list_rejected(self, rng):
        with pytest.raises(ContractError):
            summed_reconstruct(random_frame(rng), [])
        with pytest.raises(ContractError):
            composed_reconstruct(random_frame(rng), [])


class TestDeformationLoss:
    def test_identical_sequences_zero(self, rng):
        frames = [random_frame(rng) for _ in range(4)]
        assert deformation_loss(frames, frames) == 0.0

    def test_uniform_offset_closed_form(self, rng):
        true = [0.2 + 0.5 * random_frame(rng) for _ in range(3)]
        pred = [f + 0.1 for f in true]
        assert deformation_loss(pred, true) == pytest.approx(0.1, abs=1e-9)

    def test_single_bad_frame_mean_over_frames(self, rng):
        true = [0.3 * np.ones((8, 8, 1)) for _ in range(5)]
        pred = [t.copy() for t in true]
        pred[2] = pred[2] + 0.25
        assert deformation_loss(pred, true) == pytest.approx(0.25 / 5, abs=1e-9)

    def test_length_mismatch_rejected(self, rng):
        frames = [random_frame(rng) for _ in range(3)]
        with pytest.raises(ContractError):
            deformation_loss(frames, frames[:2])

    def test_symmetry_and_triangle_inequality(self, rng):
        x, y, z = (random_frame(rng) for _ in range(3))
        assert deformation_loss([x], [y]) == deformation_loss([y], [x])
        assert deformation_loss([x], [z]) <= deformation_loss([x], [y]) + deformation_loss([y], [z]) + 1e-12


class _FieldStubModel:
    """Stands in for a trained manifold: returns preset one-step fields."""

    def __init__(self, fields):
        self._fields = np.asarray(fields)

    def displacement_fields(self, seq):
        return self._fields


def _translating_scene(n, size=24, exact=True):
    """Blob translating 1px/frame; constant background keeps clamped warps exact."""
    from framewalk.datasets import FrameSequence

    frames = np.full((n, size, size, 1), 0.25, dtype=np.float32)
    ys, xs = np.mgrid[0:size, 0:size]
    for i in range(n):
        blob = np.exp(-((ys - size / 2) ** 2 + (xs - (5 + i)) ** 2) / 6.0)
        frames[i, :, :, 0] += 0.6 * blob.astype(np.float32)
    return FrameSequence(np.clip(frames, 0, 1), fps=30.0)


class TestErrorAccumulationCurves:
    def test_perfect_fields_give_zero_curves(self):
        seq = _translating_scene(6)
        # Blob moves right 1px/frame, so each output gathers one column left.
        fields = np.zeros((5, 24, 24, 2))
        fields[:, :, :, 0] = -1.0
        summed, composed = error_accumulation_curves(seq, _FieldStubModel(fields))
        assert len(summed) == len(composed) == 5
        assert max(summed) < 5e-3 and max(composed) < 5e-3

    def test_full_frame_translation_curves_non_decreasing(self, rng):
        from framewalk.datasets import FrameSequence

        base = rng.random((40, 40))
        frames = np.stack([base[:, i : i + 24] for i in range(8)])[:, :24, :, None].astype(np.float32)
        seq = FrameSequence(frames, fps=30.0)
        fields = np.zeros((7, 24, 24, 2))
        fields[:, :, :, 0] = 1.0
        summed, composed = error_accumulation_curves(seq, _FieldStubModel(fields))
        assert np.all(np.diff(summed) >= -1e-9)
        assert np.all(np.diff(composed) >= -1e-9)

    def test_random_fields_bounded_by_max_l1(self, rng):
        seq = _translating_scene(5)
        fields = rng.uniform(-4, 4, size=(4, 24, 24, 2))
        summed, composed = error_accumulation_curves(seq, _FieldStubModel(fields))
        assert all(0.0 <= v <= 1.0 for v in summed + composed)
        assert all(np.isfinite(v) for v in summed + composed)


def test_field_round_trip(tmp_path, rng):
    field = rng.uniform(-3, 3, size=(8, 8, 2)).astype(np.float32)
    save_field(field, tmp_path / "u.npy")
    assert np.array_equal(load_field(tmp_path / "u.npy"), field)
