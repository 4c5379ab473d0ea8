import itertools
import math

import numpy as np
import pytest
from PIL import Image

from layoutflow.errors import (
    DataError,
    InvalidConfig,
    NonFiniteCost,
    NoValidPlacement,
    OutOfRange,
    ShapeMismatch,
    WeightsOffSimplex,
)
from layoutflow.loaders import create_from_config
from layoutflow.pipeline import (
    AcceptThresholds,
    Assignment,
    Candidate,
    CopyPasteOutpainter,
    CostWeights,
    FilterConfig,
    PlacementConfig,
    ScoreMatrix,
    Verdict,
    accept_scene,
    assign,
    combined_cost,
    crop_gate,
    filter_candidates,
    normalize_scores,
    refine_gate,
    sample_placement,
    sample_subject_set,
    verdict_to_dict,
)
from layoutflow.prompt import BBox, round3


def brute_force(cost):
    """Lexicographically first optimal injective assignment, by enumeration."""
    M, N = cost.shape
    best, best_perm = math.inf, None
    for perm in itertools.permutations(range(N), M):
        total = sum(cost[i, j] for i, j in enumerate(perm))
        if total < best - 1e-9:
            best, best_perm = total, perm
    return best, tuple(enumerate(best_perm))


def test_assign_matches_brute_force():
    rng = np.random.default_rng(0)
    for trial in range(1000):
        M = int(rng.integers(1, 6))
        N = int(rng.integers(M, 6))
        if trial % 2:
            # small integer costs produce many ties
            cost = rng.integers(0, 3, size=(M, N)).astype(np.float64)
        else:
            cost = rng.uniform(0, 1, size=(M, N))
        total, pairs = brute_force(cost)
        a = assign(cost)
        assert a.accepted
        assert a.total_cost == pytest.approx(total, abs=1e-9)
        assert a.pairs == pairs
        assert len({j for _, j in a.pairs}) == M


def test_assign_tie_break_is_lexicographic():
    a = assign(np.zeros((2, 3)))
    assert a.pairs == ((0, 0), (1, 1))
    a = assign(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert a.pairs == ((0, 1), (1, 0))


def test_assign_row_constant_invariance():
    rng = np.random.default_rng(1)
    for _ in range(100):
        cost = rng.uniform(0, 1, size=(3, 5))
        shifted = cost + rng.uniform(-2, 2, size=(3, 1))
        assert assign(cost).pairs == assign(shifted).pairs


def test_assign_incomplete_and_errors():
    a = assign(np.zeros((3, 2)))
    assert not a.accepted
    assert a.pairs == ()
    assert math.isnan(a.total_cost)
    assert a.verdict.reasons == ("IncompleteMatching",)
    with pytest.raises(DataError):
        assign(np.zeros((0, 3)))
    with pytest.raises(NonFiniteCost):
        assign(np.array([[0.1, np.nan]]))
    with pytest.raises(ShapeMismatch):
        assign(np.zeros(3))


def test_cost_weights():
    CostWeights(0.5, 0.25, 0.25)
    CostWeights.from_dict({"alpha": 0.3333333333333333, "beta": 0.3333333333333333, "gamma": 0.3333333333333334})
    with pytest.raises(WeightsOffSimplex):
        CostWeights(0.5, 0.5, 0.5)
    with pytest.raises(WeightsOffSimplex):
        CostWeights(1.5, -0.5, 0.0)
    with pytest.raises(InvalidConfig):
        CostWeights.from_dict({"delta": 1.0})


def test_combined_cost():
    scores = ScoreMatrix.from_triples([[(1.0, 1.0, 1.0), (0.0, 0.0, 0.0)], [(0.3, 0.6, 0.9), (0.5, 0.5, 0.5)]])
    cost = combined_cost(scores)
    np.testing.assert_allclose(cost, [[0.0, 1.0], [0.4, 0.5]], atol=1e-12)
    cost = combined_cost(scores, CostWeights(1.0, 0.0, 0.0))
    np.testing.assert_allclose(cost[1], [0.7, 0.5], atol=1e-12)
    assert scores[1, 0].s_i == 0.9
    with pytest.raises(OutOfRange):
        combined_cost(ScoreMatrix.from_triples([[(1.2, 0.0, 0.0)]]))
    with pytest.raises(NonFiniteCost):
        combined_cost(ScoreMatrix.from_triples([[(np.inf, 0.0, 0.0)]]))


def test_score_matrix_shapes():
    with pytest.raises(ShapeMismatch):
        ScoreMatrix(np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2)))
    with pytest.raises(ShapeMismatch):
        ScoreMatrix.from_triples([[0.1, 0.2]])
    with pytest.raises(DataError):
        ScoreMatrix.from_dict({"s_t": [[0.1]], "s_d": [[0.1]]})
    assert ScoreMatrix.from_dict({"s_t": [[0.1, 0.2]], "s_d": [[0.1, 0.2]], "s_i": [[0.1, 0.2]]}).shape == (1, 2)


def test_normalize_scores():
    scores = ScoreMatrix(np.array([[2.0, 4.0], [6.0, 10.0]]), np.full((2, 2), 0.7), np.array([[-0.5, 0.5], [1.5, 0.2]]))
    out = normalize_scores(scores)
    np.testing.assert_allclose(out.s_t, [[0.0, 0.25], [0.5, 1.0]])
    np.testing.assert_allclose(out.s_d, np.full((2, 2), 0.7))
    np.testing.assert_allclose(out.s_i, [[0.0, 0.5], [1.0, 0.35]])
    clipped = normalize_scores(scores, "clip")
    np.testing.assert_allclose(clipped.s_i, [[0.0, 0.5], [1.0, 0.2]])
    with pytest.raises(InvalidConfig):
        normalize_scores(scores, "zscore")
    with pytest.raises(NonFiniteCost):
        normalize_scores(ScoreMatrix([[np.nan]], [[0.0]], [[0.0]]))


def test_accept_scene():
    scores = ScoreMatrix.from_triples([[(0.9, 0.9, 0.9), (0.1, 0.9, 0.9)], [(0.1, 0.2, 0.9), (0.9, 0.9, 0.9)]])
    a = assign(combined_cost(scores))
    assert a.pairs == ((0, 0), (1, 1))
    assert accept_scene(a, scores) == Verdict(True, ())

    b = Assignment(((0, 1), (1, 0)), 0.0, Verdict(True))
    verdict = accept_scene(b, scores)
    assert not verdict.accepted
    assert verdict.reasons == (
        "LowScore(subject=0, box=1, s_t=0.100 < 0.25)",
        "LowScore(subject=1, box=0, s_t=0.100 < 0.25)",
        "LowScore(subject=1, box=0, s_d=0.200 < 0.3)",
    )
    # thresholds are inclusive
    edge = ScoreMatrix.from_triples([[(0.25, 0.30, 0.50)]])
    assert accept_scene(assign(combined_cost(edge)), edge).accepted

    incomplete = assign(np.zeros((2, 1)))
    assert accept_scene(incomplete, scores).reasons == ("IncompleteMatching",)
    assert AcceptThresholds.from_dict({"t_min": 0.1}).t_min == 0.1


def test_verdict_to_dict():
    a = assign(np.array([[0.2, 0.1]]))
    body = verdict_to_dict("scene-1", a, a.verdict)
    assert body == {
        "scene_id": "scene-1",
        "assignment": [[0, 1]],
        "total_cost": 0.1,
        "verdict": "accepted",
        "reasons": [],
    }
    bad = assign(np.zeros((2, 1)))
    body = verdict_to_dict(7, bad, bad.verdict)
    assert body["assignment"] is None and body["total_cost"] is None
    assert body["scene_id"] == "7" and body["verdict"] == "rejected"


def test_sample_placement_ratio_and_bounds():
    cfg = PlacementConfig()
    for i in range(10_000):
        r, box = sample_placement(3, cfg, aspect=1.5, index=i)
        assert 0.6 <= r <= 0.8
        assert 0.0 <= box.x1 < box.x2 <= 1.0 and 0.0 <= box.y1 < box.y2 <= 1.0
        assert round3(box.width) == round3(r)
        assert round3(box.height) == round3(r / 1.5)


def test_sample_placement_square_keeps_ratio_on_grid():
    for i in range(10_000):
        r, box = sample_placement(9, PlacementConfig(), index=i)
        assert round3(box.width) == round3(box.height) == round3(r)
        assert box.x2 <= 1.0 and box.y2 <= 1.0


def test_sample_placement_is_seeded():
    assert sample_placement(1, index=4) == sample_placement(1, index=4)
    assert sample_placement(1, index=4) != sample_placement(1, index=5)
    r, box = sample_placement(0, PlacementConfig(r_min=0.7, r_max=0.7), source_size=(256, 512))
    assert r == 0.7
    assert round3(box.width) == 0.35 and round3(box.height) == 0.7


def test_sample_placement_errors():
    with pytest.raises(NoValidPlacement):
        sample_placement(0, PlacementConfig(), source_size=(1024, 512))
    with pytest.raises(NoValidPlacement):
        sample_placement(0, PlacementConfig(), aspect=0.0)
    with pytest.raises(InvalidConfig):
        PlacementConfig(r_min=0.9, r_max=0.8)
    with pytest.raises(InvalidConfig):
        PlacementConfig.from_dict({"ratio": 0.5})


def test_gates():
    assert crop_gate(0.25)
    assert not crop_gate(0.2499)
    assert refine_gate(0.25, 0.5)
    assert not refine_gate(0.3, 0.49)
    assert not refine_gate(0.2, 0.9)
    with pytest.raises(OutOfRange):
        crop_gate(1.1)
    with pytest.raises(OutOfRange):
        refine_gate(0.5, -0.1)


def square(x, y, side):
    return BBox(x, y, x + side, y + side)


def test_filter_area_bounds_are_inclusive():
    candidates = [
        Candidate(BBox(0.0, 0.0, 0.5, 0.4), 0.9),  # 0.20
        Candidate(BBox(0.0, 0.0, 1.0, 0.6), 0.8),  # 0.60
        Candidate(BBox(0.0, 0.0, 0.4, 0.4), 0.7),  # 0.16
        Candidate(BBox(0.0, 0.0, 0.8, 0.8), 0.6),  # 0.64
    ]
    result = filter_candidates(candidates, FilterConfig(dedup_iou=1.0, min_subjects=2))
    assert result.kept == (0, 1)
    assert result.accepted


def test_filter_deduplicates_by_score():
    candidates = [
        Candidate(square(0.0, 0.0, 0.5), 0.5),
        Candidate(square(0.0, 0.0, 0.5), 0.9),
        Candidate(square(0.5, 0.5, 0.5), 0.4),
        Candidate(square(0.5, 0.0, 0.5), 0.4),
        Candidate(square(0.5, 0.0, 0.5), 0.4),
    ]
    result = filter_candidates(candidates)
    assert result.kept == (1, 2, 3)
    assert result.accepted and result.reasons == ()


def test_filter_too_few_subjects():
    result = filter_candidates([Candidate(square(0.0, 0.0, 0.5), 0.9), Candidate(square(0.5, 0.5, 0.5), 0.9)])
    assert result.kept == (0, 1)
    assert not result.accepted
    assert result.reasons == ("TooFewSubjects",)
    assert filter_candidates([]).reasons == ("TooFewSubjects",)
    with pytest.raises(InvalidConfig):
        FilterConfig(area_min=0.7, area_max=0.6)


def test_sample_subject_set():
    bank = ["dog", "cat", "teapot", "bicycle", "vase", "lamp"]
    for i in range(200):
        subjects = sample_subject_set(9, bank, index=i)
        assert 2 <= len(subjects) <= 4
        assert len(set(subjects)) == len(subjects)
        assert set(subjects) <= set(bank)
    assert sample_subject_set(9, bank, index=3) == sample_subject_set(9, bank, index=3)
    with pytest.raises(InvalidConfig):
        sample_subject_set(0, bank[:3])
    with pytest.raises(InvalidConfig):
        sample_subject_set(0, bank, k_min=3, k_max=2)


def test_copy_paste_outpainter():
    reference = Image.new("RGB", (10, 20), (200, 10, 10))
    painter = create_from_config("outpainter", {"type": "copy_paste", "resample": "NEAREST"})
    assert isinstance(painter, CopyPasteOutpainter)
    r, box = sample_placement(0, PlacementConfig(canvas_width=64, canvas_height=64), aspect=0.5)
    out = painter.compose(reference, box, (64, 64))
    assert out.size == (64, 64)
    x1, y1, x2, y2 = painter.box_pixels(box, (64, 64))
    assert out.getpixel(((x1 + x2) // 2, (y1 + y2) // 2)) == (200, 10, 10)
    outside = (x1 - 1, y1) if x1 > 0 else (x2, y1)
    assert out.getpixel(outside) == (255, 255, 255)
