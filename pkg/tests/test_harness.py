import copy
import json

import pytest

from layoutflow.errors import DataError, InvalidConfig, MalformedManifest, ShapeMismatch, StageError
from layoutflow.harness import (
    SWEEP_CSV_COLUMNS,
    ExperimentConfig,
    SweepReport,
    plot_sweep,
    read_sweep_csv,
    run_benchmark,
    run_match,
    validate_report,
)
from layoutflow.loaders import parse_cli
from layoutflow.pipeline import FilterConfig

TINY = {
    "seed": 3,
    "output_dir": "unused",
    "dataset": {"n_train": 16, "n_heldout": 4, "layout": {"height": 16, "width": 16}},
    "train": {"epochs": 1, "batch_size": 8, "model": {"hidden_dim": 16, "time_dim": 4}},
    "sampler": {"num_steps": 2},
    "sweep": {"s_coord": [1.0], "baseline": True},
}


@pytest.fixture(autouse=True)
def no_output_override(monkeypatch):
    monkeypatch.delenv("LAYOUTFLOW_OUTPUT_DIR", raising=False)


def tiny(**overrides):
    return ExperimentConfig(copy.deepcopy(TINY), **overrides)


def write_manifest(tmp_path, scenes, name="manifest.json"):
    path = tmp_path / name
    path.write_text(json.dumps({"scenes": scenes}))
    return path


def scene(scene_id, s_t, s_d=None, s_i=None, **extra):
    body = {"scene_id": scene_id, "scores": {"s_t": s_t, "s_d": s_d or s_t, "s_i": s_i or s_t}}
    body.update(extra)
    return body


class TestExperimentConfig:
    def test_packaged_config(self):
        cfg = ExperimentConfig.from_file("sweep_desk")
        assert cfg.train_config.optimizer == "Adam"
        assert cfg.train_config.epochs == 30
        assert cfg.train_config.model.prediction == "data"
        assert cfg.train_config.scene_shape == (3, 32, 32)
        assert cfg.sampler_config.num_steps == 20
        assert cfg.sampler_config.timestep_shift == 4.0
        assert cfg.sweep == [0.2, 0.6, 1.0, 1.4]
        assert cfg.n_heldout == 200

    def test_overrides(self):
        cfg = ExperimentConfig.from_file("sweep_desk", parse_cli(["train.epochs=2", "sweep.s_coord=[0.5]"]))
        assert cfg.train_config.epochs == 2
        assert cfg.train_config.lr == 0.002
        assert cfg.sweep == [0.5]

    def test_sampler_for(self):
        cfg = tiny()
        assert not cfg.sampler_for(None).guidance.coord_enabled
        point = cfg.sampler_for(0.6)
        assert point.guidance.coord_enabled and point.guidance.scales.s_coord == 0.6
        assert point.num_steps == 2 and point.seed == 3

    @pytest.mark.parametrize(
        "overrides",
        [
            {"epochs": 3},
            {"sweep": {"s_coord": [1.0, 0.2]}},
            {"sweep": {"s_coord": []}},
            {"sweep": {"s_coord": [-0.5]}},
            {"dataset": {"n_train": 0}},
            {"eval": {"tol": 0.3}},
            {"train": {"optimizer": "Nope"}},
        ],
    )
    def test_validation(self, overrides):
        with pytest.raises(InvalidConfig):
            tiny(**overrides)

    def test_unknown_config_name(self):
        with pytest.raises(InvalidConfig):
            ExperimentConfig.from_file("no_such_config")

    def test_config_hash(self):
        a, b = tiny(), tiny(output_dir="elsewhere")
        assert a.config_hash() == b.config_hash()
        assert a.config_hash().startswith("sha256:")
        assert tiny(seed=4).config_hash() != a.config_hash()

    def test_match_sections(self):
        cfg = ExperimentConfig.from_file("match")
        assert cfg.match_weights.gamma == pytest.approx(1 / 3)
        assert cfg.match_thresholds.d_min == 0.30
        assert cfg.match_filter == FilterConfig()
        assert cfg.match_normalize == "minmax"


class TestRunMatch:
    def test_empty_manifest(self, tmp_path):
        empty = tmp_path / "empty.json"
        empty.write_text("")
        for path in (empty, write_manifest(tmp_path, [])):
            result = run_match(path)
            assert result["verdicts"] == []
            assert result["summary"]["n_scenes"] == 0
            assert result["summary"]["accepted"] == 0
            assert result["summary"]["mean_total_cost"] is None

    def test_perfect_scores_are_accepted(self, tmp_path):
        path = write_manifest(tmp_path, [scene("a", [[0.0, 1.0], [1.0, 0.0]])])
        out = tmp_path / "out" / "verdicts.json"
        result = run_match(path, output=out)
        (verdict,) = result["verdicts"]
        assert verdict == {
            "scene_id": "a",
            "assignment": [[0, 1], [1, 0]],
            "total_cost": pytest.approx(0.0, abs=1e-12),
            "verdict": "accepted",
            "reasons": [],
        }
        assert json.loads(out.read_text()) == result

    def test_more_subjects_than_boxes(self, tmp_path):
        path = write_manifest(tmp_path, [scene("a", [[0.9, 0.8], [0.7, 0.6], [0.5, 0.4]])])
        result = run_match(path)
        assert result["verdicts"][0]["verdict"] == "rejected"
        assert result["verdicts"][0]["reasons"] == ["IncompleteMatching"]
        assert result["verdicts"][0]["assignment"] is None
        assert result["summary"]["by_reason"] == {"IncompleteMatching": 1}

    def test_low_raw_score_is_rejected(self, tmp_path):
        path = write_manifest(
            tmp_path,
            [scene("low", [[0.1]], s_d=[[0.9]], s_i=[[0.9]]), scene("ok", [[0.9]])],
        )
        result = run_match(path)
        low, ok = result["verdicts"]
        assert low["reasons"] == ["LowScore(subject=0, box=0, s_t=0.100 < 0.25)"]
        assert ok["verdict"] == "accepted"
        assert result["summary"] == {
            "n_scenes": 2,
            "accepted": 1,
            "rejected": 1,
            "by_reason": {"LowScore": 1},
            "mean_total_cost": pytest.approx((low["total_cost"] + ok["total_cost"]) / 2),
        }

    def test_candidates_are_filtered_first(self, tmp_path):
        candidates = [
            {"box": [0.0, 0.0, 0.5, 0.5], "score": 0.9},
            {"box": [0.0, 0.0, 0.1, 0.1], "score": 0.9},
            {"box": [0.5, 0.5, 1.0, 1.0], "score": 0.9},
        ]
        # subject 0 likes the tiny box most, but it is filtered away
        s_t = [[0.6, 1.0, 0.3], [0.3, 0.2, 0.9]]
        path = write_manifest(tmp_path, [scene("c", s_t, candidates=candidates)])
        result = run_match(path, filter_cfg=FilterConfig(min_subjects=2))
        assert result["verdicts"][0]["assignment"] == [[0, 0], [1, 2]]

        # three subjects but only two boxes survive the area band
        s_t = [[0.6, 1.0, 0.3], [0.3, 0.2, 0.9], [0.5, 0.5, 0.5]]
        path = write_manifest(tmp_path, [scene("c3", s_t, candidates=candidates)], name="three.json")
        result = run_match(path)
        assert result["verdicts"][0]["reasons"] == ["TooFewSubjects"]

    def test_two_subject_scene_with_candidates(self, tmp_path):
        candidates = [
            {"box": [0.0, 0.0, 0.5, 0.5], "score": 0.8},
            {"box": [0.5, 0.5, 1.0, 1.0], "score": 0.7},
        ]
        s_t = [[0.2, 0.9], [0.9, 0.3]]
        path = write_manifest(tmp_path, [scene("k2", s_t, candidates=candidates)])
        # the default filter keeps min_subjects=3 for corpus filtering; matching needs one box per subject
        result = run_match(path, filter_cfg=FilterConfig())
        (verdict,) = result["verdicts"]
        assert verdict["verdict"] == "accepted"
        assert verdict["assignment"] == [[0, 1], [1, 0]]

    def test_malformed_manifest(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"scenes": [\n  {"scene_id": "a",\n   "scores": }\n]}')
        with pytest.raises(MalformedManifest) as info:
            run_match(bad)
        assert info.value.line == 3

        for body in (
            [{"scene_id": "a"}],
            [scene("a", [[0.1, 0.2], [0.3]])],
            [scene("a", [[0.1]], candidates=[{"score": 0.3}])],
            [scene("a", [[0.1]], candidates=[])],
            [{"scene_id": "a", "scores": {"s_t": [], "s_d": [], "s_i": []}}],
        ):
            with pytest.raises(MalformedManifest):
                run_match(write_manifest(tmp_path, body, name="m.json"))


def test_sweep_plot(tmp_path):
    csv_path = tmp_path / "sweep.csv"
    csv_path.write_text(
        ",".join(SWEEP_CSV_COLUMNS) + "\n0.2,0.3,0.1,0.2,0.05,0.4,0.1\n1,0.6,0.4,0.7,0.3,0.8,0.5\n"
    )
    assert read_sweep_csv(csv_path)["miou"] == [0.3, 0.6]
    png = plot_sweep(csv_path, tmp_path / "plots" / "sweep.png")
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    csv_path.write_text("s_coord,miou\n0.2,0.3\n")
    with pytest.raises(MalformedManifest) as info:
        read_sweep_csv(csv_path)
    assert info.value.line == 1


def test_tiny_benchmark(tmp_path):
    report = run_benchmark(tiny(), tmp_path / "run")
    out = tmp_path / "run"
    assert report.complete and report.failed_stage is None
    assert [e.s_coord for e in report.entries] == [1.0]
    assert report.baseline is not None and report.baseline.n_images == 4
    assert report.training["steps"] == 2
    for name in ("report.json", "sweep.csv", "table.csv", "run.json", "run.log", "model.pt", "metrics.jsonl"):
        assert (out / name).exists(), name

    body = json.loads((out / "report.json").read_text())
    validate_report(body)
    assert SweepReport.from_dict(body).to_dict() == report.to_dict()
    assert "started" not in json.dumps(body)
    assert len(read_sweep_csv(out / "sweep.csv")["s_coord"]) == 1
    tracked = [json.loads(line) for line in (out / "metrics.jsonl").read_text().splitlines()]
    assert tracked[-1]["s_coord=1"]["miou"] == report.entry(1.0).summary.miou
    assert tracked[-1]["step"] == 3

    again = run_benchmark(tiny(), tmp_path / "again")
    assert again.to_dict() == report.to_dict()


def test_benchmark_output_dir_is_unique(tmp_path):
    (tmp_path / "taken").mkdir()
    run_benchmark(tiny(output_dir=str(tmp_path / "taken"), sweep={"s_coord": [1.0], "baseline": False}))
    assert (tmp_path / "taken_1" / "report.json").exists()


def test_failed_stage_is_flushed(tmp_path):
    cfg = tiny(train={"divergence_threshold": 1e-12})
    with pytest.raises(StageError) as info:
        run_benchmark(cfg, tmp_path / "run")
    assert info.value.stage == "train"
    assert info.value.exit_code == 4
    body = json.loads((tmp_path / "run" / "report.json").read_text())
    assert body["failed_stage"] == "train" and body["complete"] is False


def test_detection_failure_is_its_own_stage(tmp_path, monkeypatch):
    from layoutflow.harness import benchmark

    def broken_detect(scene, *args, **kwargs):
        raise ShapeMismatch(f"cannot read a {scene.pixels.shape} scene")

    monkeypatch.setattr(benchmark, "detect", broken_detect)
    with pytest.raises(StageError) as info:
        run_benchmark(tiny(), tmp_path / "run")
    assert info.value.stage == "detect"
    assert info.value.exit_code == 3
    body = json.loads((tmp_path / "run" / "report.json").read_text())
    assert body["failed_stage"] == "detect" and body["baseline"] is None


def test_report_schema_rejects_bad_values():
    body = SweepReport().to_dict()
    body["provenance"] = {"config_hash": "sha256:" + "0" * 64, "seed": 0, "versions": {}}
    validate_report(body)
    body["provenance"]["config_hash"] = "md5:abc"
    with pytest.raises(DataError):
        validate_report(body)


@pytest.mark.slow
class TestDeskBenchmark:
    """Full desk-scale run of the packaged sweep."""

    @pytest.fixture(scope="class")
    def report(self, tmp_path_factory):
        cfg = ExperimentConfig.from_file("sweep_desk")
        return run_benchmark(cfg, tmp_path_factory.mktemp("sweep_desk"))

    def test_coordinates_beat_stripped_baseline(self, report):
        assert report.entry(1.0).summary.miou - report.baseline.miou >= 0.2

    def test_stronger_coordinate_guidance_helps(self, report):
        assert report.entry(1.0).summary.miou > report.entry(0.2).summary.miou

    def test_single_point_sweep(self, tmp_path):
        overrides = parse_cli(["sweep.s_coord=[0.2]", "sweep.baseline=false", "train.epochs=1"])
        cfg = ExperimentConfig.from_file("sweep_desk", overrides)
        report = run_benchmark(cfg, tmp_path / "single")
        assert [e.s_coord for e in report.entries] == [0.2]
