import csv
import json
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

from .coco_position import ScoreSummary

__all__ = ["LEVELS", "TABLE_COLUMNS", "table_row", "write_table_csv", "write_summary_json"]

LEVELS = ("L2", "L3", "L4", "L5", "L6")

# instance SR by level, image SR by level, then position accuracy
TABLE_COLUMNS = (
    ("name",)
    + tuple(f"instance_sr_{lv}" for lv in LEVELS + ("avg",))
    + tuple(f"image_sr_{lv}" for lv in LEVELS + ("avg",))
    + ("miou", "ap", "ap50", "ap75")
)


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def table_row(name: str, summary: ScoreSummary) -> Dict[str, str]:
    """Absent levels are left blank."""
    row = {"name": name}
    for lv in LEVELS + ("avg",):
        row[f"instance_sr_{lv}"] = _fmt(summary.instance_sr.get(lv))
        row[f"image_sr_{lv}"] = _fmt(summary.image_sr.get(lv))
    for key in ("miou", "ap", "ap50", "ap75"):
        row[key] = _fmt(getattr(summary, key))
    return row


def write_table_csv(rows: Sequence[Tuple[str, ScoreSummary]], path: Union[str, Path]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=TABLE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for name, summary in rows:
            writer.writerow(table_row(name, summary))
    return path


def write_summary_json(summary: ScoreSummary, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
