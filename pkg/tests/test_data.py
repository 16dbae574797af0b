"""Frame loading, annotations, window sampling, synthetic generation."""

import json

import numpy as np
import numpy.testing as npt
import pytest
from PIL import Image

from strokenet.data import (
    FRAME_PATTERN, StrokeAnnotation, SyntheticSpec, VideoAnnotations,
    encode_video_tten, generate_synthetic, load_annotations,
    load_frame_sequence, normalize, sample_class_windows,
    sample_detection_windows, save_annotations, sliding_window_starts,
    write_synthetic_dataset,
)


def write_frames(dirpath, frames):
    dirpath.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        Image.fromarray(frame).save(dirpath / FRAME_PATTERN.format(i))


class TestFrameLoading:
    def test_black_frames_zero_tensor(self, tmp_path):
        frames = np.zeros((3, 8, 10, 3), dtype=np.uint8)
        write_frames(tmp_path / "v", frames)
        seq = load_frame_sequence(tmp_path / "v")
        clip = normalize(seq.read_all())
        assert clip.shape == (1, 3, 3, 8, 10)
        assert not clip.data.any()

    def test_full_white_is_exactly_one(self):
        frames = np.full((2, 4, 4, 3), 255, dtype=np.uint8)
        clip = normalize(frames)
        npt.assert_array_equal(clip.data, np.ones_like(clip.data))

    def test_png_and_tten_load_identically(self, tmp_path):
        rng = np.random.default_rng(0)
        frames = rng.integers(0, 256, (4, 6, 5, 3)).astype(np.uint8)
        write_frames(tmp_path / "png", frames)
        encode_video_tten(tmp_path / "clip.tten", frames)
        from_png = load_frame_sequence(tmp_path / "png").read_all()
        from_tten = load_frame_sequence(tmp_path / "clip.tten").read_all()
        npt.assert_array_equal(from_png, from_tten)
        npt.assert_array_equal(normalize(from_png).data, normalize(from_tten).data)

    def test_inconsistent_sizes_rejected(self, tmp_path):
        d = tmp_path / "v"
        d.mkdir()
        Image.fromarray(np.zeros((4, 4, 3), np.uint8)).save(d / FRAME_PATTERN.format(0))
        Image.fromarray(np.zeros((5, 4, 3), np.uint8)).save(d / FRAME_PATTERN.format(1))
        seq = load_frame_sequence(d)
        with pytest.raises(ValueError, match="expected"):
            seq.read_all()

    def test_gap_in_frame_numbers_rejected(self, tmp_path):
        d = tmp_path / "v"
        d.mkdir()
        Image.fromarray(np.zeros((4, 4, 3), np.uint8)).save(d / FRAME_PATTERN.format(0))
        Image.fromarray(np.zeros((4, 4, 3), np.uint8)).save(d / FRAME_PATTERN.format(2))
        with pytest.raises(ValueError, match="contiguous"):
            load_frame_sequence(d)

    def test_loaded_pixels_within_unit_range(self, tmp_path):
        rng = np.random.default_rng(1)
        frames = rng.integers(0, 256, (3, 5, 5, 3)).astype(np.uint8)
        write_frames(tmp_path / "v", frames)
        clip = normalize(load_frame_sequence(tmp_path / "v").read_all())
        assert clip.data.min() >= 0.0
        assert clip.data.max() <= 1.0


class TestAnnotations:
    def test_empty_strokes(self, tmp_path):
        path = tmp_path / "a.json"
        path.write_text('{"video":"v","frame_count":100,"strokes":[]}')
        ann = load_annotations(path)
        assert ann.strokes == []

    def test_overlap_names_both(self, tmp_path):
        path = tmp_path / "a.json"
        path.write_text(json.dumps({
            "video": "v", "frame_count": 100,
            "strokes": [{"begin": 0, "end": 50, "label": 0},
                        {"begin": 40, "end": 80, "label": 1}]}))
        with pytest.raises(ValueError, match="strokes 0 and 1 overlap"):
            load_annotations(path)

    def test_round_trip(self, tmp_path):
        ann = VideoAnnotations("clip", 200, [
            StrokeAnnotation(10, 50, 2), StrokeAnnotation(60, 100, 0)])
        path = tmp_path / "a.json"
        save_annotations(path, ann)
        assert load_annotations(path) == ann

    def test_bad_interval_rejected(self, tmp_path):
        path = tmp_path / "a.json"
        path.write_text(json.dumps({
            "video": "v", "frame_count": 30,
            "strokes": [{"begin": 20, "end": 20, "label": 0}]}))
        with pytest.raises(ValueError, match="stroke 0"):
            load_annotations(path)

    def test_label_range_enforced(self, tmp_path):
        path = tmp_path / "a.json"
        path.write_text(json.dumps({
            "video": "v", "frame_count": 30,
            "strokes": [{"begin": 0, "end": 10, "label": 7}]}))
        with pytest.raises(ValueError, match="label 7"):
            load_annotations(path, num_classes=4)


class TestClassWindows:
    def test_exact_length_stroke(self):
        ann = VideoAnnotations("v", 100, [StrokeAnnotation(20, 36, 3)])
        rng = np.random.default_rng(0)
        (sample,) = sample_class_windows(ann, 16, rng)
        assert sample.start == 20
        assert sample.label == 3
        npt.assert_array_equal(sample.frame_indices(), np.arange(20, 36))

    def test_short_stroke_padded(self):
        ann = VideoAnnotations("v", 100, [StrokeAnnotation(40, 52, 1)])
        (sample,) = sample_class_windows(ann, 16, np.random.default_rng(0))
        idx = sample.frame_indices()
        assert len(idx) == 16
        assert sample.label == 1
        assert idx.min() == 40 and idx.max() == 51   # edge repetition, in-stroke
        assert (np.diff(idx) >= 0).all()
        assert idx[0] == idx[1] == 40                # two padded head frames

    def test_long_stroke_windows_inside(self):
        ann = VideoAnnotations("v", 300, [StrokeAnnotation(50, 200, 0)])
        rng = np.random.default_rng(1)
        for _ in range(50):
            (sample,) = sample_class_windows(ann, 16, rng)
            assert 50 <= sample.start
            assert sample.start + 16 <= 200

    def test_start_distribution_uniform(self):
        # stroke of T+4 frames: 5 legal starts; chi-square sanity at df=4
        ann = VideoAnnotations("v", 100, [StrokeAnnotation(10, 30, 0)])
        rng = np.random.default_rng(2)
        counts = np.zeros(5)
        for _ in range(1000):
            (sample,) = sample_class_windows(ann, 16, rng)
            counts[sample.start - 10] += 1
        expected = 1000 / 5
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        assert chi2 < 18.47  # 0.999 quantile of chi-square with 4 dof


class TestDetectionWindows:
    def test_no_negative_room_errors(self):
        ann = VideoAnnotations("v", 50, [StrokeAnnotation(0, 50, 0)])
        with pytest.raises(ValueError, match="no stroke-free room"):
            sample_detection_windows(ann, 16, np.random.default_rng(0))

    def test_ratio_balances_counts(self):
        strokes = [StrokeAnnotation(i * 60, i * 60 + 20, 0) for i in range(10)]
        ann = VideoAnnotations("v", 700, strokes)
        samples = sample_detection_windows(ann, 16, np.random.default_rng(1), ratio=1.0)
        assert sum(1 for s in samples if s.label == 1) == 10
        assert sum(1 for s in samples if s.label == 0) == 10

    def test_negatives_never_touch_strokes(self):
        rng = np.random.default_rng(3)
        strokes = [StrokeAnnotation(30, 80, 0), StrokeAnnotation(150, 260, 1)]
        ann = VideoAnnotations("v", 400, strokes)
        for _ in range(20):
            for s in sample_detection_windows(ann, 16, rng, ratio=2.0):
                if s.label == 0:
                    lo, hi = s.start, s.start + 16
                    overlap = any(max(lo, st.begin) < min(hi, st.end)
                                  for st in strokes)
                    assert not overlap
                    assert 0 <= lo and hi <= 400


class TestSlidingStarts:
    def test_short_video_empty(self):
        assert sliding_window_starts(10, 16, 4) == []

    def test_stride_coverage(self):
        starts = sliding_window_starts(100, 16, 4)
        assert starts[0] == 0
        assert starts[-1] <= 84
        assert all(b - a == 4 for a, b in zip(starts, starts[1:]))


class TestSynthetic:
    def test_same_seed_byte_identical(self):
        spec = SyntheticSpec(num_classes=2, clips_per_class=2, frame_count=12,
                             width=16, height=16, seed=5)
        a = generate_synthetic(spec)
        b = generate_synthetic(spec)
        assert len(a) == len(b) == 4
        for va, vb in zip(a, b):
            assert va.name == vb.name
            npt.assert_array_equal(va.frames, vb.frames)
            assert va.poses == vb.poses
            assert va.annotations == vb.annotations

    def test_annotations_within_bounds(self):
        spec = SyntheticSpec(num_classes=3, clips_per_class=1, frame_count=400,
                             width=24, height=24, seed=6, strokes_per_clip=4,
                             videos=2)
        for video in generate_synthetic(spec):
            assert video.annotations.frame_count == 400
            for s in video.annotations.strokes:
                assert 0 <= s.begin < s.end <= 400
                assert 0 <= s.label < 3

    def test_detection_video_leaves_idle_room(self):
        spec = SyntheticSpec(num_classes=4, frame_count=2000, width=32,
                             height=32, seed=7, strokes_per_clip=10, videos=1)
        (video,) = generate_synthetic(spec)
        assert len(video.annotations.strokes) == 10
        covered = sum(s.end - s.begin for s in video.annotations.strokes)
        assert covered < 2000 * 0.7

    def test_classes_move_differently(self):
        spec = SyntheticSpec(num_classes=4, clips_per_class=1, frame_count=16,
                             width=32, height=32, seed=8)
        videos = generate_synthetic(spec)
        # motion direction differs across classes: compare mid-clip blob rows/cols
        centers = []
        for video in videos:
            mid = video.frames[8]
            ys, xs = np.nonzero(mid.any(axis=2))
            centers.append((ys.mean(), xs.mean()))
        assert len({(round(y), round(x)) for y, x in centers}) >= 3

    def test_written_dataset_matches_manifest(self, tmp_path):
        spec = SyntheticSpec(num_classes=2, clips_per_class=1, frame_count=8,
                             width=16, height=16, seed=9)
        manifest = write_synthetic_dataset(spec, tmp_path / "ds")
        root = tmp_path / "ds"
        on_disk = sorted(str(p.relative_to(root)) for p in root.rglob("*")
                         if p.is_file() and p.name != "manifest.json")
        assert on_disk == manifest["files"]
        saved = json.loads((root / "manifest.json").read_text())
        assert saved == manifest

    def test_pose_track_follows_blob(self):
        spec = SyntheticSpec(num_classes=1, clips_per_class=1, frame_count=12,
                             width=48, height=48, seed=10)
        (video,) = generate_synthetic(spec)
        for f, pose_frame in enumerate(video.poses):
            (person,) = pose_frame.persons
            nose = person.keypoints[0]
            ys, xs = np.nonzero(video.frames[f].any(axis=2))
            assert abs(nose.x - xs.mean()) < 12
            assert abs(nose.y - ys.mean()) < 14
