import csv
import json

import numpy as np
import pytest

from layoutflow.errors import DataError, InvalidConfig
from layoutflow.metrics import (
    TABLE_COLUMNS,
    CropPair,
    EvalRecord,
    ScoreSummary,
    aggregate_similarity,
    average_precision,
    build_scorer,
    crop_scene,
    image_success_ratio,
    instance_success_ratio,
    iou,
    match_instances,
    mean_iou,
    summarize,
    write_summary_json,
    write_table_csv,
)
from layoutflow.metrics.similarity import Scorer
from layoutflow.prompt import BBox
from layoutflow.scenes import DetectedBox, detect, render, sample_layout

RED, GREEN, BLUE = 0, 1, 2
TOP_LEFT = BBox(0.0, 0.0, 0.5, 0.5)
BOTTOM_RIGHT = BBox(0.5, 0.5, 1.0, 1.0)
TOP_RIGHT = BBox(0.5, 0.0, 1.0, 0.5)


def det(class_id, box, score=1.0):
    return DetectedBox(class_id, box, score)


@pytest.fixture
def records():
    partial = EvalRecord(((RED, TOP_LEFT), (GREEN, BOTTOM_RIGHT)), (det(RED, TOP_LEFT),))
    complete = EvalRecord(
        ((RED, TOP_LEFT), (GREEN, BOTTOM_RIGHT), (BLUE, TOP_RIGHT)),
        (det(RED, TOP_LEFT), det(GREEN, BOTTOM_RIGHT), det(BLUE, TOP_RIGHT)),
    )
    return [partial, complete]


def test_iou():
    assert iou(BBox(0, 0, 0.5, 0.5), BBox(0.25, 0.25, 0.75, 0.75)) == pytest.approx(1 / 7)
    assert iou(TOP_LEFT, BOTTOM_RIGHT) == 0.0
    assert iou(TOP_LEFT, TOP_LEFT) == 1.0


def test_success_ratios(records):
    assert instance_success_ratio(records) == {"L2": 0.5, "L3": 1.0, "avg": pytest.approx(0.8)}
    assert image_success_ratio(records) == {"L2": 0.0, "L3": 1.0, "avg": 0.5}
    assert mean_iou(records) == pytest.approx(0.8)


def test_success_is_strictly_above_half():
    half = BBox(0.0, 0.0, 0.5, 0.25)
    m = match_instances(((RED, TOP_LEFT),), (det(RED, half),))
    assert m.ious[0] == 0.5
    assert m.success == (False,)
    assert not m.image_success


def test_matching_respects_class_and_score():
    gt = ((RED, TOP_LEFT), (RED, BOTTOM_RIGHT))
    detections = (det(GREEN, TOP_LEFT), det(RED, BOTTOM_RIGHT, 0.4), det(RED, TOP_LEFT, 0.9))
    m = match_instances(gt, detections)
    assert m.matched == (2, 1)
    assert m.ious == (1.0, 1.0)


def test_greedy_matching_takes_best_overlap_first():
    gt = ((RED, BBox(0.0, 0.0, 0.4, 0.4)), (RED, BBox(0.1, 0.0, 0.5, 0.4)))
    detections = (det(RED, BBox(0.1, 0.0, 0.5, 0.4), 0.9), det(RED, BBox(0.0, 0.0, 0.4, 0.4), 0.8))
    assert match_instances(gt, detections).matched == (1, 0)


def test_unmatched_instances_score_zero():
    m = match_instances(((RED, TOP_LEFT),), (det(RED, BOTTOM_RIGHT),))
    assert m.matched == (None,)
    assert m.ious == (0.0,)


def test_average_precision_single_detection():
    # IoU 0.66 passes the thresholds 0.50 .. 0.65
    record = EvalRecord(((RED, TOP_LEFT),), (det(RED, BBox(0.0, 0.0, 0.5, 0.33)),))
    ap, ap50, ap75 = average_precision([record])
    assert ap50 == 1.0
    assert ap75 == 0.0
    assert ap == pytest.approx(0.4)


def test_average_precision_ranked_false_positive():
    record = EvalRecord(((RED, TOP_LEFT),), (det(RED, BOTTOM_RIGHT, 0.9), det(RED, TOP_LEFT, 0.8)))
    ap, ap50, ap75 = average_precision([record])
    assert ap == pytest.approx(0.5)
    assert ap50 == pytest.approx(0.5)


def test_average_precision_perfect_and_custom_thresholds(records):
    complete = records[1]
    assert average_precision([complete]) == (1.0, 1.0, 1.0)
    ap, ap50, ap75 = average_precision([complete], thresholds=[0.5])
    assert (ap, ap50, ap75) == (1.0, 1.0, 0.0)


def test_average_precision_missed_class_counts(records):
    # green in the partial record has no detection: recall 1/2 for green
    ap, ap50, _ = average_precision(records)
    assert ap50 == pytest.approx((1.0 + 51 / 101 + 1.0) / 3)
    assert ap == pytest.approx(ap50)


def test_empty_inputs():
    with pytest.raises(DataError):
        EvalRecord(())
    with pytest.raises(DataError):
        summarize([])
    with pytest.raises(DataError):
        mean_iou([])


class Cosine(Scorer):
    name = "cosine_stub"
    output_range = "cosine"

    def __init__(self, value):
        self.value = value

    def __call__(self, pair):
        return self.value


def test_scorers():
    pair = CropPair("red_rect", TOP_LEFT, TOP_LEFT, np.ones((2, 2, 3)) * (1.0, 0.0, 0.0))
    assert build_scorer("constant")(pair) == 0.5
    assert build_scorer({"type": "constant", "value": 0.9})(pair) == 0.9
    assert build_scorer("box_iou")(pair) == 1.0
    assert build_scorer("color_match")(pair) == 1.0
    assert build_scorer("color_match")(CropPair("red_rect")) == 0.0
    with pytest.raises(InvalidConfig):
        build_scorer("clip")


def test_aggregate_similarity():
    pairs = [CropPair("red_rect", TOP_LEFT, TOP_LEFT), CropPair("red_rect", BOTTOM_RIGHT, None)]
    result = aggregate_similarity(pairs, "box_iou")
    assert result.mean == 1.0
    assert (result.n_pairs, result.n_failed, result.scorer) == (2, 1, "box_iou")

    assert aggregate_similarity(pairs, Cosine(0.0)).mean == 0.5
    assert aggregate_similarity(pairs, Cosine(-1.0)).mean == 0.0
    failed = aggregate_similarity(pairs, Cosine(1.5))
    assert failed.mean is None and failed.n_failed == 2
    assert aggregate_similarity([], "constant").mean is None


def test_crop_scene():
    spec = sample_layout(4)
    scene = render(spec)
    for class_id, box in spec.instances[-1:]:
        crop = crop_scene(scene, box)
        assert crop.size > 0
        assert np.allclose(crop, spec.palette.color(class_id))


def test_summarize_rendered_scenes():
    specs = [sample_layout(seed) for seed in range(20)]
    records = []
    for spec in specs:
        scene = render(spec)
        records.append(EvalRecord(spec.instances, tuple(detect(scene, spec.palette)), scene))
    summary = summarize(records, text_scorer="color_match", image_scorer="box_iou")
    assert summary.miou == 1.0
    assert summary.instance_sr["avg"] == 1.0 and summary.image_sr["avg"] == 1.0
    assert (summary.ap, summary.ap50, summary.ap75) == (1.0, 1.0, 1.0)
    assert 0.0 < summary.clip_t_mean <= 1.0
    assert summary.dino_mean == 1.0
    assert summary.scorers == {"clip_t": "color_match", "dino": "box_iou"}
    assert summary.n_images == 20


def test_report_files(records, tmp_path):
    summary = summarize(records)
    path = write_table_csv([("run", summary)], tmp_path / "table.csv")
    with path.open() as f:
        rows = list(csv.DictReader(f))
    assert tuple(rows[0]) == TABLE_COLUMNS
    assert rows[0]["instance_sr_L2"] == "0.500000"
    assert rows[0]["instance_sr_L4"] == ""
    assert rows[0]["miou"] == "0.800000"

    out = write_summary_json(summary, tmp_path / "nested" / "summary.json")
    body = json.loads(out.read_text())
    assert body["matcher"] == "greedy-coco"
    assert ScoreSummary.from_dict(body) == summary
