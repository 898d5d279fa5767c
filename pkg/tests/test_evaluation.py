"""Greedy matching, average precision, full evaluation, threshold sweeps."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_record, oracle_average_precision, oracle_greedy_flags
from logokit.errors import InputError
from logokit.evaluation import (
    Detection,
    average_precision,
    evaluate,
    match_detections,
    threshold_sweep,
)
from logokit.geometry import Box, iou
from logokit.seeding import derive_rng


def det(score, box, image_id="img1", category="Heinz"):
    return Detection(image_id=image_id, category=category, score=score, box=box)


class TestMatchDetections:
    def test_single_clear_match(self):
        # IoU((0,0,10,10), (0,0,10,6)) = 60/100 = 0.6
        pairs = match_detections([det(0.9, Box(0, 0, 10, 10))],
                                 [Box(0, 0, 10, 6)], 0.5)
        assert pairs == [(det(0.9, Box(0, 0, 10, 10)), True)]

    def test_one_to_one_higher_score_wins(self):
        low = det(0.4, Box(0, 0, 10, 10))
        high = det(0.8, Box(0, 0, 10, 9))
        pairs = match_detections([low, high], [Box(0, 0, 10, 10)], 0.5)
        assert pairs == [(high, True), (low, False)]

    def test_boundary_iou_matches(self):
        # IoU((0,0,10,10), (0,0,10,5)) is exactly 0.5; the bound is closed.
        pairs = match_detections([det(0.9, Box(0, 0, 10, 10))],
                                 [Box(0, 0, 10, 5)], 0.5)
        assert pairs[0][1] is True

    def test_score_tie_keeps_input_order(self):
        first = det(0.7, Box(0, 0, 10, 10))
        second = det(0.7, Box(0, 0, 10, 8))
        pairs = match_detections([first, second], [Box(0, 0, 10, 10)], 0.5)
        assert pairs == [(first, True), (second, False)]

    def test_takes_best_free_ground_truth(self):
        gt_a, gt_b = Box(0, 0, 10, 10), Box(20, 0, 30, 10)
        # Overlaps gt_a at 0.6 and gt_b not at all.
        d1 = det(0.9, Box(0, 0, 10, 6))
        # Overlaps gt_a at ~0.43 and gt_b at 0.8: must take gt_b.
        d2 = det(0.8, Box(20, 0, 30, 8))
        pairs = match_detections([d1, d2], [gt_a, gt_b], 0.5)
        assert [m for _, m in pairs] == [True, True]

    def test_threshold_validation(self):
        with pytest.raises(InputError):
            match_detections([], [], 0.0)
        with pytest.raises(InputError):
            match_detections([], [], 1.0)

    def test_score_range_validation(self):
        with pytest.raises(InputError):
            det(1.5, Box(0, 0, 1, 1))

    @settings(max_examples=60)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(0, 4))
    def test_agrees_with_independent_greedy_oracle(self, seed, n_det, n_gt):
        rng = derive_rng(seed, "match-oracle")

        def random_box():
            x, y = rng.uniform(0, 40, size=2)
            w, h = rng.uniform(2, 30, size=2)
            return Box(float(x), float(y), float(x + w), float(y + h))

        detections = [det(round(float(rng.uniform(0.05, 0.95)), 2), random_box())
                      for _ in range(n_det)]
        gts = [random_box() for _ in range(n_gt)]
        pairs = match_detections(detections, gts, 0.5)
        flags = [matched for _, matched in pairs]
        oracle = oracle_greedy_flags(
            [(d.score, d.box) for d in detections], gts, 0.5)
        assert flags == oracle
        assert sum(flags) <= len(gts)  # one-to-one


class TestAveragePrecision:
    def test_single_true_positive(self):
        assert average_precision([True], 1) == 1.0

    def test_tp_then_fp(self):
        assert average_precision([True, False], 1) == 1.0

    def test_fp_then_tp(self):
        assert average_precision([False, True], 1) == 0.5

    def test_no_detections(self):
        assert average_precision([], 5) == 0.0

    def test_hand_computed_three_flag_case(self):
        # flags [TP, FP, TP], 2 GTs: envelope area = 0.5*1 + 0.5*(2/3)
        assert average_precision([True, False, True], 2) == \
            pytest.approx(0.5 + 0.5 * 2 / 3, abs=1e-15)

    def test_eleven_point_variant(self):
        # Same flags, 11-point: 6 levels see precision 1.0, 5 levels see 2/3.
        value = average_precision([True, False, True], 2, interpolation="11point")
        assert value == pytest.approx((6 * 1.0 + 5 * 2 / 3) / 11, abs=1e-15)
        assert average_precision([False, True], 1,
                                 interpolation="11point") == pytest.approx(0.5)

    def test_validation(self):
        with pytest.raises(InputError):
            average_precision([True], 0)
        with pytest.raises(InputError):
            average_precision([True], 1, interpolation="41point")

    @settings(max_examples=80)
    @given(st.lists(st.booleans(), max_size=12), st.integers(1, 12))
    def test_matches_envelope_oracle(self, flags, num_gt):
        if sum(flags) > num_gt:
            flags = flags[:num_gt]  # cannot have more TPs than ground truths
        got = average_precision(flags, num_gt)
        assert abs(got - oracle_average_precision(flags, num_gt)) < 1e-12
        assert 0.0 <= got <= 1.0

    @given(st.lists(st.booleans(), min_size=1, max_size=10), st.integers(1, 10))
    def test_appending_false_positive_never_raises_ap(self, flags, num_gt):
        if sum(flags) > num_gt:
            flags = flags[:num_gt]
        assert average_precision(flags + [False], num_gt) <= \
            average_precision(flags, num_gt) + 1e-15


GT_MANIFEST = [
    make_record("img1.jpg", objects=(("Heinz", 0, 0, 10, 10),
                                     ("Acme", 50, 50, 70, 70))),
    make_record("img2.jpg", objects=(("Heinz", 0, 0, 20, 20),
                                     ("Nike", 30, 30, 44, 44))),
]


class TestEvaluate:
    def test_perfect_detections(self):
        detections = [
            det(1.0, Box(0, 0, 10, 10), "img1.jpg", "Heinz"),
            det(1.0, Box(50, 50, 70, 70), "img1.jpg", "Acme"),
            det(1.0, Box(0, 0, 20, 20), "img2.jpg", "Heinz"),
            det(1.0, Box(30, 30, 44, 44), "img2.jpg", "Nike"),
        ]
        report = evaluate(detections, GT_MANIFEST, 0.5)
        assert report.per_class_ap == {"Heinz": 1.0, "Acme": 1.0, "Nike": 1.0}
        assert report.map == 1.0
        assert report.no_gt_classes == {}

    def test_no_detections(self):
        report = evaluate([], GT_MANIFEST, 0.5)
        assert report.map == 0.0
        assert set(report.per_class_ap) == {"Heinz", "Acme", "Nike"}
        assert all(v == 0.0 for v in report.per_class_ap.values())

    def test_three_class_hand_fixture(self):
        detections = [
            # Heinz on img1: exact hit -> [TP]
            det(0.9, Box(0, 0, 10, 10), "img1.jpg", "Heinz"),
            # Acme: miss scored above a hit -> [FP, TP], AP 0.5 (num_gt 1)
            det(0.9, Box(0, 0, 5, 5), "img1.jpg", "Acme"),
            det(0.6, Box(50, 50, 70, 70), "img1.jpg", "Acme"),
            # Nike: hit above a miss -> [TP, FP], AP 1.0
            det(0.8, Box(30, 30, 44, 44), "img2.jpg", "Nike"),
            det(0.3, Box(0, 0, 3, 3), "img2.jpg", "Nike"),
        ]
        report = evaluate(detections, GT_MANIFEST, 0.5)
        # Heinz has 2 GTs but only one was detected: AP = recall reached = 0.5
        assert report.per_class_ap["Heinz"] == 0.5
        assert report.per_class_ap["Acme"] == 0.5
        assert report.per_class_ap["Nike"] == 1.0
        assert report.map == pytest.approx((0.5 + 0.5 + 1.0) / 3)

    def test_unknown_image_id_named(self):
        with pytest.raises(InputError, match="ghost.jpg"):
            evaluate([det(0.5, Box(0, 0, 5, 5), "ghost.jpg")], GT_MANIFEST, 0.5)

    def test_class_without_ground_truth_reported_not_averaged(self):
        detections = [
            det(1.0, Box(0, 0, 10, 10), "img1.jpg", "Heinz"),
            det(0.9, Box(0, 0, 9, 9), "img1.jpg", "Ghost"),
            det(0.8, Box(1, 1, 8, 8), "img2.jpg", "Ghost"),
        ]
        report = evaluate(detections, GT_MANIFEST, 0.5)
        assert report.no_gt_classes == {"Ghost": 2}
        assert "Ghost" not in report.per_class_ap
        # Heinz: one of its two GTs found -> AP 0.5; Acme and Nike undetected.
        assert report.map == pytest.approx((0.5 + 0.0 + 0.0) / 3)

    def test_matching_is_per_image(self):
        # A detection on img2 cannot claim img1's ground truth even with a
        # perfectly aligned box.
        detections = [det(0.9, Box(0, 0, 10, 10), "img2.jpg", "Acme")]
        report = evaluate(detections, GT_MANIFEST, 0.5)
        assert report.per_class_ap["Acme"] == 0.0

    def test_pr_curve_consistency(self):
        detections = [
            det(0.9, Box(0, 0, 10, 10), "img1.jpg", "Heinz"),
            det(0.7, Box(2, 2, 4, 4), "img1.jpg", "Heinz"),
            det(0.5, Box(0, 0, 20, 20), "img2.jpg", "Heinz"),
        ]
        report = evaluate(detections, GT_MANIFEST, 0.5)
        curve = report.pr_curves["Heinz"]
        assert [p.score_threshold for p in curve] == [0.9, 0.7, 0.5]
        tp = 0
        for rank, point in enumerate(curve, start=1):
            tp_here = round(point.precision * rank)
            assert point.precision == pytest.approx(tp_here / rank)
            assert point.recall == pytest.approx(tp_here / 2)  # 2 Heinz GTs
            assert tp_here >= tp
            tp = tp_here
        recalls = [p.recall for p in curve]
        assert recalls == sorted(recalls)

    def test_detection_order_invariance(self):
        detections = [
            det(0.9, Box(0, 0, 10, 10), "img1.jpg", "Heinz"),
            det(0.7, Box(2, 2, 4, 4), "img1.jpg", "Heinz"),
            det(0.8, Box(30, 30, 44, 44), "img2.jpg", "Nike"),
            det(0.6, Box(50, 50, 70, 70), "img1.jpg", "Acme"),
        ]
        base = evaluate(detections, GT_MANIFEST, 0.5)
        assert evaluate(detections[::-1], GT_MANIFEST, 0.5) == base


class TestThresholdSweep:
    def test_perfect_fixture_flat_at_one(self):
        detections = [det(1.0, Box(0, 0, 10, 10), "img1.jpg", "Heinz"),
                      det(1.0, Box(50, 50, 70, 70), "img1.jpg", "Acme"),
                      det(1.0, Box(0, 0, 20, 20), "img2.jpg", "Heinz"),
                      det(1.0, Box(30, 30, 44, 44), "img2.jpg", "Nike")]
        sweep = threshold_sweep(detections, GT_MANIFEST,
                                [0.5, 0.6, 0.7, 0.8, 0.9])
        assert all(value == 1.0 for _, value in sweep)

    def test_steps_down_as_overlaps_fail(self):
        manifest = [make_record("im.jpg", objects=(("Heinz", 0, 0, 10, 10),
                                                   ("Heinz", 100, 0, 110, 10)))]
        detections = [
            det(0.9, Box(0, 0, 10, 5.5), "im.jpg", "Heinz"),    # IoU 0.55
            det(0.8, Box(100, 0, 110, 7.5), "im.jpg", "Heinz"),  # IoU 0.75
        ]
        assert iou(detections[0].box, Box(0, 0, 10, 10)) == pytest.approx(0.55)
        assert iou(detections[1].box, Box(100, 0, 110, 10)) == pytest.approx(0.75)
        sweep = dict(threshold_sweep(detections, manifest, [0.5, 0.6, 0.8]))
        assert sweep[0.5] == 1.0           # both matched
        assert sweep[0.6] == 0.25          # flags [FP, TP] with 2 GTs
        assert sweep[0.8] == 0.0           # nothing matches

    def test_seven_point_default_range(self):
        thresholds = [0.5 + 0.05 * i for i in range(7)]
        detections = [det(1.0, Box(0, 0, 10, 10), "img1.jpg", "Heinz")]
        sweep = threshold_sweep(detections, GT_MANIFEST, thresholds)
        assert len(sweep) == 7
        assert [t for t, _ in sweep] == thresholds

    def test_empty_thresholds_rejected(self):
        with pytest.raises(InputError):
            threshold_sweep([], GT_MANIFEST, [])

    @settings(max_examples=40)
    @given(st.integers(0, 2**32 - 1))
    def test_map_non_increasing_in_threshold(self, seed):
        rng = derive_rng(seed, "sweep-monotone")
        categories = ["Heinz", "Acme"]
        manifest = []
        for i in range(2):
            objects = tuple(
                (categories[int(rng.integers(0, 2))],
                 float(x := rng.uniform(0, 60)), float(y := rng.uniform(0, 60)),
                 float(x + rng.uniform(5, 30)), float(y + rng.uniform(5, 30)))
                for _ in range(int(rng.integers(1, 4)))
            )
            manifest.append(make_record(f"im{i}.jpg", objects=objects))
        detections = []
        for _ in range(int(rng.integers(0, 7))):
            x, y = rng.uniform(0, 60, size=2)
            detections.append(det(
                round(float(rng.uniform(0.05, 0.95)), 3),
                Box(float(x), float(y), float(x + rng.uniform(5, 30)),
                    float(y + rng.uniform(5, 30))),
                f"im{int(rng.integers(0, 2))}.jpg",
                categories[int(rng.integers(0, 2))],
            ))
        values = [m for _, m in threshold_sweep(
            detections, manifest, [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8])]
        assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
