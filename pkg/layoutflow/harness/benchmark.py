"""
Desk-scale layout-control benchmark: synthetic corpus, toy flow-matching model, coordinate-guidance
sweep over held-out layouts, oracle detection and layout scores.

Outputs in the run directory:

- ``report.json``  sweep report (schema-checked, rewritten after every sweep point)
- ``sweep.csv``    ``s_coord,miou,ap,ap50,ap75,instance_sr_avg,image_sr_avg``
- ``table.csv``    per-level success ratios and position accuracy, one row per run
- ``run.json``     wall-clock timestamps, kept out of the report so reports stay comparable
- ``model.pt``     trained checkpoint, ``metrics.jsonl`` training and sweep metrics, ``run.log`` console log
"""

import csv
import json
import platform
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from .. import __version__
from ..errors import LayoutflowError, StageError
from ..flowmatch import ClassVocab, TrainResult, ToyScene, sample_batch, save_checkpoint, train
from ..metrics import EvalRecord, ScoreSummary, summarize, write_table_csv
from ..prompt import LayoutPrompt, parse_prompt, strip_coordinates
from ..scenes import LayoutSamplerConfig, LayoutSpec, Palette, detect, render, sample_layout
from ..utils.logging import (
    LOGGER,
    ExperimentLogger,
    JsonlLogger,
    WandbLogger,
    attach_file_handler,
    detach_file_handler,
)
from ..utils.seeding import STAGE_DATASET, STAGE_HELDOUT, derive_seed
from ..utils.smart_defaults import infer_output_path
from .config import ExperimentConfig
from .schema import validate_report

__all__ = [
    "SweepEntry",
    "SweepReport",
    "build_layouts",
    "detect_scenes",
    "score_records",
    "evaluate_scenes",
    "run_benchmark",
    "SWEEP_CSV_COLUMNS",
    "REPORT_FORMAT",
]

REPORT_FORMAT = "layoutflow-sweep"
SWEEP_CSV_COLUMNS = ("s_coord", "miou", "ap", "ap50", "ap75", "instance_sr_avg", "image_sr_avg")


@dataclass
class SweepEntry:
    s_coord: float
    summary: ScoreSummary

    def to_dict(self) -> Dict[str, Any]:
        return {"s_coord": self.s_coord, "summary": self.summary.to_dict()}


@dataclass
class SweepReport:
    entries: List[SweepEntry] = field(default_factory=list)
    baseline: Optional[ScoreSummary] = None
    provenance: Dict[str, Any] = field(default_factory=dict)
    training: Dict[str, Any] = field(default_factory=dict)
    complete: bool = False
    failed_stage: Optional[str] = None

    def entry(self, s_coord: float) -> SweepEntry:
        for e in self.entries:
            if e.s_coord == s_coord:
                return e
        raise KeyError(s_coord)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": REPORT_FORMAT,
            "version": 1,
            "complete": self.complete,
            "failed_stage": self.failed_stage,
            "provenance": dict(self.provenance),
            "training": dict(self.training),
            "baseline": None if self.baseline is None else self.baseline.to_dict(),
            "sweep": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SweepReport":
        return cls(
            entries=[SweepEntry(e["s_coord"], ScoreSummary.from_dict(e["summary"])) for e in data["sweep"]],
            baseline=None if data.get("baseline") is None else ScoreSummary.from_dict(data["baseline"]),
            provenance=dict(data.get("provenance", {})),
            training=dict(data.get("training", {})),
            complete=bool(data.get("complete", False)),
            failed_stage=data.get("failed_stage"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def build_layouts(
    seed: int, n: int, cfg: LayoutSamplerConfig, palette: Palette, stage: int = STAGE_DATASET
) -> List[LayoutSpec]:
    return [sample_layout(derive_seed(seed, stage, i), cfg, palette) for i in range(n)]


def detect_scenes(
    specs: Sequence[LayoutSpec],
    scenes: Sequence[ToyScene],
    cfg: ExperimentConfig,
) -> List[EvalRecord]:
    return [
        EvalRecord(spec.instances, tuple(detect(scene, cfg.palette, cfg.detect_tol, cfg.min_area)), scene)
        for spec, scene in zip(specs, scenes)
    ]


def score_records(records: Sequence[EvalRecord], cfg: ExperimentConfig) -> ScoreSummary:
    return summarize(records, cfg.text_scorer, cfg.image_scorer, cfg.palette)


def evaluate_scenes(
    specs: Sequence[LayoutSpec],
    scenes: Sequence[ToyScene],
    cfg: ExperimentConfig,
) -> ScoreSummary:
    """Oracle detection followed by scoring."""
    return score_records(detect_scenes(specs, scenes, cfg), cfg)


def _provenance(cfg: ExperimentConfig) -> Dict[str, Any]:
    return {
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "versions": {
            "layoutflow": __version__,
            "torch": torch.__version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }


def _write_sweep_csv(report: SweepReport, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SWEEP_CSV_COLUMNS)
        for e in report.entries:
            s = e.summary
            writer.writerow(
                [f"{e.s_coord:g}"]
                + [f"{v:.6f}" for v in (s.miou, s.ap, s.ap50, s.ap75, s.instance_sr["avg"], s.image_sr["avg"])]
            )


def _flush(report: SweepReport, out: Path) -> None:
    body = report.to_dict()
    validate_report(body)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    _write_sweep_csv(report, out / "sweep.csv")
    rows: List[Tuple[str, ScoreSummary]] = []
    if report.baseline is not None:
        rows.append(("baseline", report.baseline))
    rows.extend((f"s_coord={e.s_coord:g}", e.summary) for e in report.entries)
    write_table_csv(rows, out / "table.csv")


@contextmanager
def _stage(name: str, report: SweepReport, out: Path) -> Iterator[None]:
    try:
        yield
    except LayoutflowError as e:
        if isinstance(e, StageError):
            raise
        LOGGER.error(f"Stage '{name}' failed: {e}")
        report.failed_stage = name
        try:
            _flush(report, out)
        except (LayoutflowError, OSError) as flush_error:
            LOGGER.error(f"Could not flush partial results: {flush_error}")
        raise StageError(name, e) from e


def _loggers(cfg: ExperimentConfig, out: Path) -> List[ExperimentLogger]:
    loggers: List[ExperimentLogger] = [JsonlLogger(out)]
    if cfg.use_wandb:
        loggers.append(WandbLogger(project="layoutflow", name=out.name, config=cfg.to_dict()))
    return loggers


def _log_summary(loggers: Sequence[ExperimentLogger], tag: str, summary: ScoreSummary, step: int) -> None:
    for lg in loggers:
        lg.log_metrics({tag: summary.to_dict()}, step)


def run_benchmark(
    cfg: Union[ExperimentConfig, Dict[str, Any]], output_dir: Optional[Union[str, Path]] = None
) -> SweepReport:
    if isinstance(cfg, dict):
        cfg = ExperimentConfig(cfg)
    # an explicit directory is reused as given
    out = infer_output_path(output_dir or cfg.output_dir, unique=output_dir is None)
    report = SweepReport(provenance=_provenance(cfg))
    started = time.time()
    log_handler = attach_file_handler(out / "run.log")
    loggers: List[ExperimentLogger] = []
    try:
        LOGGER.info(f"Benchmark output directory: {out}")
        loggers = _loggers(cfg, out)
        _run_stages(cfg, out, report, loggers)
        run_meta = {"started": started, "finished": time.time(), "output_dir": str(out)}
        (out / "run.json").write_text(json.dumps(run_meta, indent=2) + "\n", encoding="utf-8")
    finally:
        for lg in loggers:
            lg.close()
        detach_file_handler(log_handler)
    LOGGER.info(f"Report written to {out / 'report.json'}")
    return report


def _run_stages(cfg: ExperimentConfig, out: Path, report: SweepReport, loggers: List[ExperimentLogger]) -> None:
    LOGGER.separator("Dataset")
    with _stage("dataset", report, out):
        train_specs = build_layouts(cfg.seed, cfg.n_train, cfg.layout_config, cfg.palette, STAGE_DATASET)
        heldout_specs = build_layouts(cfg.seed, cfg.n_heldout, cfg.layout_config, cfg.palette, STAGE_HELDOUT)
        dataset = [(spec.to_prompt(), render(spec)) for spec in train_specs]
        prompts: List[LayoutPrompt] = [spec.to_prompt() for spec in heldout_specs]
        LOGGER.info(f"{len(dataset)} training scenes, {len(prompts)} held-out layouts")

    LOGGER.separator("Train")
    with _stage("train", report, out):
        vocab = ClassVocab(cfg.palette.names)
        result: TrainResult = train(cfg.train_config, dataset, vocab, loggers)
        save_checkpoint(result.model, vocab, out / "model.pt")
        report.training = {
            "steps": result.steps,
            "final_loss": float(result.history[-1]) if result.history else None,
        }
    step = result.steps

    if cfg.baseline:
        LOGGER.separator("Baseline (coordinates stripped)")
        with _stage("sample", report, out):
            stripped = [parse_prompt(strip_coordinates(p)) for p in prompts]
            scenes = sample_batch(result.model, stripped, cfg.sampler_for(None), vocab)
        with _stage("detect", report, out):
            records = detect_scenes(heldout_specs, scenes, cfg)
        with _stage("score", report, out):
            report.baseline = score_records(records, cfg)
            LOGGER.info(f"baseline  mIoU {report.baseline.miou:.4f}  AP {report.baseline.ap:.4f}")
            _log_summary(loggers, "baseline", report.baseline, step)
        with _stage("write", report, out):
            _flush(report, out)

    for s_coord in cfg.sweep:
        LOGGER.separator(f"Sweep s_coord={s_coord:g}")
        with _stage("sample", report, out):
            scenes = sample_batch(result.model, prompts, cfg.sampler_for(s_coord), vocab)
        with _stage("detect", report, out):
            records = detect_scenes(heldout_specs, scenes, cfg)
        with _stage("score", report, out):
            summary = score_records(records, cfg)
            report.entries.append(SweepEntry(s_coord, summary))
            LOGGER.info(
                f"s_coord={s_coord:g}  mIoU {summary.miou:.4f}  AP {summary.ap:.4f}  "
                f"AP50 {summary.ap50:.4f}  instance SR {summary.instance_sr['avg']:.4f}"
            )
            step += 1
            _log_summary(loggers, f"s_coord={s_coord:g}", summary, step)
        with _stage("write", report, out):
            _flush(report, out)

    report.complete = True
    with _stage("write", report, out):
        _flush(report, out)
