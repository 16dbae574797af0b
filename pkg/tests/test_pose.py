"""Pose stream parsing and deterministic skeleton rasterization."""

import numpy as np
import numpy.testing as npt
import pytest

from strokenet.pose import (
    BLACK, OVERLAY, COCO_EDGES, Keypoint, PersonPose, PoseFrame, SkeletonSpec,
    compose_frame, parse_keypoint_stream, rasterize_skeleton,
    write_keypoint_stream,
)


def person_at(points, score=1.0, confidence=1.0):
    """Person with the given keypoints placed; None entries get confidence 0."""
    kps = []
    for i in range(17):
        pt = points[i] if i < len(points) else None
        if pt is None:
            kps.append(Keypoint(0.0, 0.0, 0.0))
        else:
            kps.append(Keypoint(pt[0], pt[1], confidence))
    return PersonPose(keypoints=tuple(kps), score=score)


def full_person(cx, cy, spread=10.0, score=1.0, confidence=1.0):
    rng = np.random.default_rng(99)
    pts = [(cx + float(rng.uniform(-spread, spread)),
            cy + float(rng.uniform(-spread, spread))) for _ in range(17)]
    return person_at(pts, score=score, confidence=confidence)


class TestStreamParsing:
    def test_empty_persons_line(self, tmp_path):
        path = tmp_path / "kp.jsonl"
        path.write_text('{"frame":0,"persons":[]}\n')
        frames = parse_keypoint_stream(path)
        assert len(frames) == 1
        assert frames[0].persons == ()

    def test_gap_synthesized_empty(self, tmp_path):
        path = tmp_path / "kp.jsonl"
        person = {"score": 1.0, "keypoints": [[1.0, 2.0, 1.0]] * 17}
        path.write_text(
            '{"frame":0,"persons":[]}\n'
            f'{{"frame":2,"persons":[{__import__("json").dumps(person)}]}}\n')
        frames = parse_keypoint_stream(path)
        assert [f.frame_index for f in frames] == [0, 1, 2]
        assert frames[1].persons == ()
        assert len(frames[2].persons) == 1

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        frames = []
        for i in range(4):
            persons = tuple(
                PersonPose(
                    keypoints=tuple(Keypoint(float(rng.uniform(0, 64)),
                                             float(rng.uniform(0, 64)),
                                             float(rng.uniform(0, 1)))
                                    for _ in range(17)),
                    score=float(rng.uniform(0, 1)))
                for _ in range(i % 3))
            frames.append(PoseFrame(frame_index=i, persons=persons))
        path = tmp_path / "kp.jsonl"
        write_keypoint_stream(path, frames)
        assert parse_keypoint_stream(path) == frames

    def test_malformed_line_names_lineno(self, tmp_path):
        path = tmp_path / "kp.jsonl"
        path.write_text('{"frame":0,"persons":[]}\n{oops\n')
        with pytest.raises(ValueError, match="line 2"):
            parse_keypoint_stream(path)

    def test_wrong_keypoint_count_rejected(self, tmp_path):
        path = tmp_path / "kp.jsonl"
        path.write_text('{"frame":0,"persons":[{"score":1.0,"keypoints":[[0,0,1]]}]}\n')
        with pytest.raises(ValueError, match="17"):
            parse_keypoint_stream(path)

    def test_duplicate_frame_rejected(self, tmp_path):
        path = tmp_path / "kp.jsonl"
        path.write_text('{"frame":1,"persons":[]}\n{"frame":1,"persons":[]}\n')
        with pytest.raises(ValueError, match="duplicate"):
            parse_keypoint_stream(path)


class TestRasterize:
    def test_below_threshold_leaves_canvas(self):
        canvas = np.zeros((32, 32, 3), dtype=np.uint8)
        spec = SkeletonSpec(confidence_threshold=0.5)
        out = rasterize_skeleton(canvas, [full_person(16, 16, confidence=0.2)], spec)
        npt.assert_array_equal(out, canvas)

    def test_low_person_score_skipped(self):
        canvas = np.zeros((32, 32, 3), dtype=np.uint8)
        spec = SkeletonSpec(person_threshold=0.5)
        out = rasterize_skeleton(canvas, [full_person(16, 16, score=0.3)], spec)
        npt.assert_array_equal(out, canvas)

    def test_horizontal_edge_exact_pixels(self):
        # one left_shoulder->right_shoulder edge, thickness 1, no discs
        canvas = np.zeros((16, 24, 3), dtype=np.uint8)
        color = (10, 200, 30)
        spec = SkeletonSpec(edges=[((5, 6), color)], line_thickness=1,
                            keypoint_radius=0, keypoint_color=color,
                            confidence_threshold=0.3)
        pts = [None] * 5 + [(4.0, 7.0), (15.0, 7.0)]
        person = person_at(pts)
        out = rasterize_skeleton(canvas, [person], spec)
        expected = np.zeros_like(canvas)
        expected[7, 4:16] = color   # the row segment, endpoints included
        npt.assert_array_equal(out, expected)

    def test_person_outside_canvas_clipped(self):
        canvas = np.zeros((16, 16, 3), dtype=np.uint8)
        out = rasterize_skeleton(canvas, [full_person(500.0, 500.0, spread=4)],
                                 SkeletonSpec())
        npt.assert_array_equal(out, canvas)

    def test_is_pure_and_deterministic(self):
        canvas = np.zeros((40, 40, 3), dtype=np.uint8)
        person = full_person(20, 20)
        spec = SkeletonSpec()
        first = rasterize_skeleton(canvas, [person], spec)
        second = rasterize_skeleton(canvas, [person], spec)
        npt.assert_array_equal(first, second)
        assert canvas.sum() == 0  # input untouched

    def test_palette_closed(self):
        canvas = np.zeros((48, 48, 3), dtype=np.uint8)
        spec = SkeletonSpec()
        out = rasterize_skeleton(canvas, [full_person(24, 24)], spec)
        drawn = out[np.any(out != 0, axis=2)]
        palette = spec.palette()
        for pixel in {tuple(p) for p in drawn}:
            assert pixel in palette

    def test_threshold_monotone(self):
        canvas = np.zeros((48, 48, 3), dtype=np.uint8)
        rng = np.random.default_rng(3)
        kps = tuple(Keypoint(float(rng.uniform(5, 43)), float(rng.uniform(5, 43)),
                             float(rng.uniform(0, 1))) for _ in range(17))
        person = PersonPose(keypoints=kps, score=1.0)
        drawn_counts = []
        for thr in [0.1, 0.3, 0.5, 0.7, 0.9]:
            spec = SkeletonSpec(confidence_threshold=thr)
            out = rasterize_skeleton(canvas, [person], spec)
            drawn = set(zip(*np.nonzero(np.any(out != 0, axis=2))))
            drawn_counts.append(drawn)
        for lower, higher in zip(drawn_counts, drawn_counts[1:]):
            assert higher <= lower  # raising the threshold never adds pixels


class TestComposeFrame:
    def test_black_empty(self):
        out = compose_frame(BLACK, None, PoseFrame(0), SkeletonSpec(), size=(8, 12))
        npt.assert_array_equal(out, np.zeros((8, 12, 3), dtype=np.uint8))

    def test_overlay_empty_equals_base(self):
        base = np.random.default_rng(4).integers(0, 256, (8, 8, 3)).astype(np.uint8)
        out = compose_frame(OVERLAY, base, PoseFrame(0), SkeletonSpec())
        npt.assert_array_equal(out, base)

    def test_overlay_without_base_rejected(self):
        with pytest.raises(ValueError, match="base"):
            compose_frame(OVERLAY, None, PoseFrame(0), SkeletonSpec())

    def test_black_and_overlay_draw_same_pixels(self):
        rng = np.random.default_rng(5)
        base = rng.integers(1, 255, (48, 48, 3)).astype(np.uint8)
        poses = PoseFrame(0, (full_person(24, 24),))
        spec = SkeletonSpec()
        black = compose_frame(BLACK, None, poses, spec, size=(48, 48))
        over = compose_frame(OVERLAY, base, poses, spec)
        diff_black = np.any(black != 0, axis=2)
        diff_over = np.any(over != base, axis=2)
        # overlay can coincide with the base color; it may never exceed black's set
        assert set(zip(*np.nonzero(diff_over))) <= set(zip(*np.nonzero(diff_black)))
        # and where the base differs from every palette color, sets agree
        npt.assert_array_equal(black[diff_over], over[diff_over])

    def test_black_nonzero_only_on_skeleton(self):
        poses = PoseFrame(0, (full_person(24, 24),))
        spec = SkeletonSpec()
        out = compose_frame(BLACK, None, poses, spec, size=(48, 48))
        redrawn = rasterize_skeleton(np.zeros((48, 48, 3), np.uint8),
                                     poses.persons, spec)
        npt.assert_array_equal(out, redrawn)


class TestValidation:
    def test_bad_confidence(self):
        with pytest.raises(ValueError, match="confidence"):
            Keypoint(0, 0, 1.5)

    def test_wrong_keypoint_count(self):
        with pytest.raises(ValueError, match="17"):
            PersonPose(keypoints=(Keypoint(0, 0, 1.0),) * 5, score=1.0)

    def test_edge_index_validated(self):
        with pytest.raises(ValueError, match="17"):
            SkeletonSpec(edges=[((0, 99), (1, 2, 3))])

    def test_default_edges_cover_six_limb_groups(self):
        colors = {color for _, color in COCO_EDGES}
        assert len(colors) == 6
