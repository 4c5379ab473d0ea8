from .config import ExperimentConfig
from .schema import REPORT_SCHEMA_PATH, load_report_schema, validate_report
from .benchmark import (
    SweepEntry,
    SweepReport,
    SWEEP_CSV_COLUMNS,
    build_layouts,
    detect_scenes,
    score_records,
    evaluate_scenes,
    run_benchmark,
)
from .match import load_manifest, match_scene, run_match
from .plotting import plot_sweep, read_sweep_csv
