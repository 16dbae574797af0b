"""Decision methods, segment extraction, and detection metrics."""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strokenet.decision import (
    GAUSSIAN, MAP_THRESHOLDS, MEAN, NO_WINDOW, VOTE, VOTE_SLIDING,
    DecisionMethod, Segment, WindowPrediction, aggregate_clip,
    average_precision, classification_metrics, extract_segments,
    map_score, matched_iou_stats, stroke_probability_curve, temporal_iou,
    vote_sliding_window,
)

from oracles import average_precision_ref, temporal_iou_ref, vote_curve_ref


def wp(start, probs, length=16):
    return WindowPrediction(start, length, np.asarray(probs, dtype=float))


class TestAggregateClip:
    def test_single_window_all_methods_agree(self):
        pred = wp(10, [0.1, 0.7, 0.2])
        outs = {}
        for variant in (NO_WINDOW, MEAN, GAUSSIAN, VOTE):
            probs, label = aggregate_clip([pred], DecisionMethod(variant, sigma=4.0))
            outs[variant] = (probs, label)
        labels = {label for _, label in outs.values()}
        assert labels == {1}
        for variant in (NO_WINDOW, MEAN, GAUSSIAN):
            npt.assert_array_equal(outs[variant][0], pred.probs)

    def test_vote_majority(self):
        preds = [wp(0, [0.6, 0.4]), wp(4, [0.7, 0.3]), wp(8, [0.2, 0.8])]
        probs, label = aggregate_clip(preds, DecisionMethod(VOTE))
        assert label == 0
        npt.assert_allclose(probs, [2 / 3, 1 / 3])

    def test_vote_tie_takes_lowest_class(self):
        preds = [wp(0, [0.9, 0.1]), wp(4, [0.1, 0.9])]
        _, label = aggregate_clip(preds, DecisionMethod(VOTE))
        assert label == 0

    def test_gaussian_huge_sigma_equals_mean(self):
        rng = np.random.default_rng(0)
        preds = []
        for i in range(7):
            raw = rng.random(4)
            preds.append(wp(i * 8, raw / raw.sum()))
        mean_probs, _ = aggregate_clip(preds, DecisionMethod(MEAN))
        gauss_probs, _ = aggregate_clip(preds, DecisionMethod(GAUSSIAN, sigma=1e6))
        npt.assert_allclose(gauss_probs, mean_probs, atol=1e-6)

    def test_no_window_picks_nearest_center(self):
        preds = [wp(0, [0.9, 0.1]), wp(40, [0.1, 0.9])]
        probs, label = aggregate_clip(preds, DecisionMethod(NO_WINDOW), center=50.0)
        assert label == 1

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            aggregate_clip([], DecisionMethod(MEAN))

    def test_sliding_variant_rejected_for_clips(self):
        with pytest.raises(ValueError, match="clip"):
            aggregate_clip([wp(0, [1.0, 0.0])], DecisionMethod(VOTE_SLIDING))


class TestVoteSliding:
    def test_all_stroke_windows(self):
        preds = [wp(s, [0.2, 0.8], length=8) for s in range(0, 32, 4)]
        curve = vote_sliding_window(preds, 48)
        covered = np.zeros(48, dtype=bool)
        for p in preds:
            covered[p.start:p.start + 8] = True
        npt.assert_array_equal(curve[covered], 1.0)
        npt.assert_array_equal(curve[~covered], 0.0)

    def test_no_windows_all_zero(self):
        npt.assert_array_equal(vote_sliding_window([], 20), np.zeros(20))

    def test_matches_tally_oracle(self):
        rng = np.random.default_rng(1)
        preds = []
        for _ in range(15):
            raw = rng.random(2)
            preds.append(wp(int(rng.integers(0, 50)), raw / raw.sum(),
                            length=int(rng.integers(4, 12))))
        curve = vote_sliding_window(preds, 60)
        ref = vote_curve_ref([(p.start, p.length, p.probs) for p in preds],
                             60, stroke_class=1)
        npt.assert_allclose(curve, ref, atol=1e-12)
        assert curve.min() >= 0.0 and curve.max() <= 1.0

    def test_mean_and_gaussian_curves_bounded(self):
        rng = np.random.default_rng(2)
        preds = []
        for s in range(0, 40, 4):
            raw = rng.random(2)
            preds.append(wp(s, raw / raw.sum(), length=8))
        for method in (DecisionMethod(MEAN), DecisionMethod(GAUSSIAN, sigma=3.0)):
            curve = stroke_probability_curve(preds, 56, method)
            assert curve.min() >= 0.0 and curve.max() <= 1.0


class TestExtractSegments:
    def test_zero_curve(self):
        assert extract_segments(np.zeros(30), 0.5, 2) == []

    def test_constant_curve(self):
        segs = extract_segments(np.ones(12), 0.5, 3)
        assert segs == [Segment(0, 12, 1, 1.0)]

    def test_run_length_case(self):
        curve = np.array([0, 1, 1, 0, 1, 1, 1], dtype=float)
        segs = extract_segments(curve, 0.5, 2)
        assert [(s.begin, s.end) for s in segs] == [(1, 3), (4, 7)]

    def test_short_runs_dropped(self):
        curve = np.array([1, 0, 1, 1, 1, 0, 1], dtype=float)
        segs = extract_segments(curve, 0.5, 3)
        assert [(s.begin, s.end) for s in segs] == [(2, 5)]

    def test_segments_disjoint_and_sorted(self):
        rng = np.random.default_rng(3)
        curve = rng.random(200)
        segs = extract_segments(curve, 0.5, 2)
        for a, b in zip(segs, segs[1:]):
            assert a.end <= b.begin

    def test_score_is_mean_curve(self):
        curve = np.array([0.0, 0.6, 0.8, 1.0, 0.0])
        (seg,) = extract_segments(curve, 0.5, 2)
        npt.assert_allclose(seg.score, (0.6 + 0.8 + 1.0) / 3)

    def test_threshold_validated(self):
        with pytest.raises(ValueError, match="threshold"):
            extract_segments(np.ones(5), 1.5, 1)


class TestTemporalIou:
    def test_identical(self):
        assert temporal_iou(Segment(3, 9, 0), Segment(3, 9, 1)) == 1.0

    def test_disjoint(self):
        assert temporal_iou(Segment(0, 5, 0), Segment(5, 9, 0)) == 0.0

    def test_canonical_third(self):
        got = temporal_iou(Segment(0, 10, 0), Segment(5, 15, 0))
        assert got == 5 / 15
        assert got == temporal_iou_ref(0, 10, 5, 15)

    @given(st.integers(0, 40), st.integers(1, 20), st.integers(0, 40),
           st.integers(1, 20))
    @settings(max_examples=200, deadline=None)
    def test_matches_frame_set_oracle(self, b1, l1, b2, l2):
        a, b = Segment(b1, b1 + l1, 0), Segment(b2, b2 + l2, 0)
        got = temporal_iou(a, b)
        assert got == pytest.approx(temporal_iou_ref(b1, b1 + l1, b2, b2 + l2))
        assert got == temporal_iou(b, a)
        assert 0.0 <= got <= 1.0
        assert (got == 1.0) == ((b1, l1) == (b2, l2))


def _random_instance(rng, max_preds=6, max_gts=4):
    gts = []
    cursor = 0
    for _ in range(int(rng.integers(0, max_gts + 1))):
        begin = cursor + int(rng.integers(0, 8))
        length = int(rng.integers(2, 12))
        gts.append(Segment(begin, begin + length, 0))
        cursor = begin + length + int(rng.integers(1, 6))
    preds = []
    for _ in range(int(rng.integers(0, max_preds + 1))):
        begin = int(rng.integers(0, 60))
        length = int(rng.integers(2, 14))
        preds.append(Segment(begin, begin + length, 0,
                             score=float(rng.random())))
    return preds, gts


class TestAveragePrecision:
    def test_perfect_single(self):
        assert average_precision([Segment(0, 10, 0, 0.9)],
                                 [Segment(0, 10, 0)], 0.5) == 1.0

    def test_no_predictions(self):
        assert average_precision([], [Segment(0, 10, 0)], 0.5) == 0.0

    def test_empty_gt_rules(self):
        assert average_precision([Segment(0, 5, 0, 0.5)], [], 0.5) == 0.0
        assert average_precision([], [], 0.5) == 1.0

    def test_matching_plus_spurious(self):
        preds = [Segment(0, 10, 0, 0.9), Segment(30, 40, 0, 0.8)]
        gts = [Segment(0, 10, 0)]
        got = average_precision(preds, gts, 0.5)
        ref = average_precision_ref([(0, 10, 0.9), (30, 40, 0.8)], [(0, 10)], 0.5)
        assert got == pytest.approx(ref) == 1.0

    def test_high_scoring_spurious_halves_ap(self):
        preds = [Segment(30, 40, 0, 0.95), Segment(0, 10, 0, 0.9)]
        gts = [Segment(0, 10, 0)]
        got = average_precision(preds, gts, 0.5)
        assert got == pytest.approx(0.5)

    def test_random_instances_match_bruteforce(self):
        rng = np.random.default_rng(4)
        for _ in range(120):
            preds, gts = _random_instance(rng)
            thr = float(rng.choice([0.3, 0.5, 0.7]))
            got = average_precision(preds, gts, thr)
            ref = average_precision_ref(
                [(p.begin, p.end, p.score) for p in preds],
                [(g.begin, g.end) for g in gts], thr)
            assert got == pytest.approx(ref, abs=1e-12)

    def test_removing_spurious_never_lowers_ap(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            preds, gts = _random_instance(rng)
            if not gts:
                continue
            base = average_precision(preds, gts, 0.5)
            _, flags, order = __import__("strokenet.decision", fromlist=["match_segments"]) \
                .match_segments(preds, gts, 0.5)
            spurious = [preds[i] for i, f in zip(order, flags) if not f]
            for victim in spurious:
                pruned = [p for p in preds if p is not victim]
                assert average_precision(pruned, gts, 0.5) >= base - 1e-12


class TestMapScore:
    def test_default_thresholds(self):
        assert MAP_THRESHOLDS == (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85,
                                  0.9, 0.95)

    def test_perfect_detection(self):
        segs = [Segment(0, 10, 0, 0.9), Segment(20, 35, 0, 0.8)]
        gts = [Segment(0, 10, 0), Segment(20, 35, 0)]
        m, per = map_score(segs, gts)
        assert m == 1.0
        assert all(v == 1.0 for v in per.values())

    def test_classwise_averages_over_labels(self):
        preds = [Segment(0, 10, 0, 0.9), Segment(20, 30, 1, 0.9)]
        gts = [Segment(0, 10, 0), Segment(20, 30, 1), Segment(40, 50, 1)]
        m_all, _ = map_score(preds, gts, iou_thresholds=(0.5,), classwise=False)
        m_cls, _ = map_score(preds, gts, iou_thresholds=(0.5,), classwise=True)
        assert m_all == pytest.approx(2 / 3)
        assert m_cls == pytest.approx((1.0 + 0.5) / 2)

    def test_matched_iou_stats(self):
        preds = [Segment(0, 10, 0, 0.9), Segment(100, 110, 0, 0.8)]
        gts = [Segment(0, 10, 0), Segment(50, 60, 0)]
        matched, over_gt = matched_iou_stats(preds, gts, 0.5)
        assert matched == 1.0
        assert over_gt == 0.5


class TestClassificationMetrics:
    def test_all_correct(self):
        acc, confusion = classification_metrics([0, 1, 2], [0, 1, 2], 3)
        assert acc == 1.0
        npt.assert_array_equal(confusion, np.eye(3, dtype=int))

    def test_all_wrong(self):
        acc, _ = classification_metrics([1, 2, 0], [0, 1, 2], 3)
        assert acc == 0.0

    def test_random_matches_hand_tally(self):
        rng = np.random.default_rng(6)
        true = rng.integers(0, 4, 50)
        pred = rng.integers(0, 4, 50)
        acc, confusion = classification_metrics(pred, true, 4)
        assert acc == pytest.approx(sum(int(p == t) for p, t in zip(pred, true)) / 50)
        for t in range(4):
            for p in range(4):
                assert confusion[t, p] == sum(
                    1 for tt, pp in zip(true, pred) if tt == t and pp == p)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            classification_metrics([0, 1], [0], 2)
