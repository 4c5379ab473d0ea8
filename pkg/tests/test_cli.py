import json
import sys

import pytest
import yaml
from click.testing import CliRunner
from PIL import Image

from layoutflow.cli import cli, main
from layoutflow.prompt import dump_layout, parse_prompt, prompt_to_layout

TINY_YAML = {
    "seed": 1,
    "dataset": {"n_train": 16, "n_heldout": 3, "layout": {"height": 16, "width": 16}},
    "train": {"epochs": 1, "batch_size": 8, "model": {"hidden_dim": 16, "time_dim": 4}},
    "sampler": {"num_steps": 2},
    "sweep": {"s_coord": [0.6, 1.0], "baseline": True},
}


@pytest.fixture(autouse=True)
def no_output_override(monkeypatch):
    monkeypatch.delenv("LAYOUTFLOW_OUTPUT_DIR", raising=False)


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.yml"
    path.write_text(yaml.safe_dump(TINY_YAML))
    return str(path)


def test_prompt_parse(runner):
    result = runner.invoke(cli, ["prompt", "parse", "a red_rect <bbox>[0.1,0.2,0.3,0.4]</bbox> on the left"])
    assert result.exit_code == 0, result.output
    body = json.loads(result.output)
    assert body["caption"] == "a red_rect on the left"
    assert body["instances"][0]["subject"] == "red_rect"
    assert body["instances"][0]["boxes"] == [[0.1, 0.2, 0.3, 0.4]]
    assert body["violations"] == []


def test_prompt_parse_reports_violations(runner):
    result = runner.invoke(cli, ["prompt", "parse", "2 dogs <bbox>[0.1,0.2,0.3,0.4]</bbox>"])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["violations"][0].startswith("CountMismatch")


def test_prompt_strip(runner):
    text = "3 dogs <bbox>[0.1,0.2,0.3,0.4]</bbox>, <bbox>[0.5,0.6,0.7,0.8]</bbox>, <bbox>[0.2,0.3,0.4,0.5]</bbox> play."
    result = runner.invoke(cli, ["prompt", "strip", text])
    assert result.exit_code == 0
    assert result.output.strip() == "3 dogs play."


def test_prompt_format(runner, tmp_path):
    doc = prompt_to_layout(parse_prompt("a cat <bbox>[0.1,0.2,0.3,0.4]</bbox> naps"))
    path = tmp_path / "layout.json"
    dump_layout(doc, path)
    result = runner.invoke(cli, ["prompt", "format", str(path)])
    assert result.exit_code == 0, result.output
    assert result.output.strip() == "a cat <bbox>[0.1,0.2,0.3,0.4]</bbox> naps"


def test_sample_needs_exactly_one_source(runner):
    result = runner.invoke(cli, ["sample", "--model", "missing.pt"])
    assert result.exit_code == 2
    assert "exactly one" in result.output


@pytest.mark.parametrize(
    "argv, code",
    [
        (["prompt", "parse", "a dog <bbox>[0.5,0.2,0.3,0.4]</bbox>"], 3),
        (["prompt", "parse", "a dog <bbox>[0.1,0.2,0.3</bbox>"], 3),
        (["sweep", "--config", "no_such_config"], 2),
        (["sweep", "--set", "train.epochs"], 2),
        (["prompt", "strip", "a dog"], 0),
    ],
)
def test_main_exit_codes(monkeypatch, argv, code):
    monkeypatch.setattr(sys, "argv", ["layoutflow", *argv])
    with pytest.raises(SystemExit) as info:
        main()
    assert info.value.code == code


def test_match_command(runner, tmp_path):
    manifest = tmp_path / "manifest.json"
    scores = {"s_t": [[0.9]], "s_d": [[0.9]], "s_i": [[0.9]]}
    manifest.write_text(json.dumps({"scenes": [{"scene_id": "a", "scores": scores}]}))
    out = tmp_path / "verdicts.json"
    result = runner.invoke(cli, ["match", "-m", str(manifest), "-o", str(out)])
    assert result.exit_code == 0, result.output
    body = json.loads(out.read_text())
    assert body["summary"]["accepted"] == 1


def test_train_sample_eval(runner, tiny_config, tmp_path):
    run_dir = tmp_path / "run"
    result = runner.invoke(cli, ["-q", "train", "-c", tiny_config, "-o", str(run_dir)])
    assert result.exit_code == 0, result.output
    model = run_dir / "model.pt"
    assert model.exists()

    png = tmp_path / "one.png"
    prompt = "a red_rect <bbox>[0.1,0.1,0.5,0.5]</bbox> and a blue_rect <bbox>[0.5,0.5,0.9,0.9]</bbox>."
    result = runner.invoke(cli, ["sample", "-c", tiny_config, "-m", str(model), "-p", prompt, "-o", str(png)])
    assert result.exit_code == 0, result.output
    assert Image.open(png).size == (16, 16)

    archive = tmp_path / "archive"
    result = runner.invoke(
        cli, ["sample", "-c", tiny_config, "-m", str(model), "-n", "3", "--s-coord", "1.2", "-o", str(archive)]
    )
    assert result.exit_code == 0, result.output
    assert len(json.loads((archive / "index.json").read_text())["scenes"]) == 3

    summary = tmp_path / "summary.json"
    result = runner.invoke(cli, ["eval", "-c", tiny_config, "-a", str(archive), "-o", str(summary)])
    assert result.exit_code == 0, result.output
    body = json.loads(summary.read_text())
    assert body["n_images"] == 3
    assert 0.0 <= body["miou"] <= 1.0


def test_sweep_command(runner, tiny_config, tmp_path):
    out = tmp_path / "sweep"
    result = runner.invoke(cli, ["sweep", "-c", tiny_config, "-s", "sweep.baseline=false", "-o", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "report.json").read_text())
    assert [e["s_coord"] for e in report["sweep"]] == [0.6, 1.0]
    assert report["baseline"] is None
    assert (out / "sweep.png").exists()
