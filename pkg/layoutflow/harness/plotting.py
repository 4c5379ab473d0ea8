import csv
from pathlib import Path
from typing import Dict, List, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..errors import MalformedManifest  # noqa: E402
from .benchmark import SWEEP_CSV_COLUMNS  # noqa: E402

__all__ = ["read_sweep_csv", "plot_sweep"]

PLOTTED = ("miou", "ap", "ap50", "ap75")


def read_sweep_csv(path: Union[str, Path]) -> Dict[str, List[float]]:
    with Path(path).open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != SWEEP_CSV_COLUMNS:
            raise MalformedManifest(f"{path}: expected columns {','.join(SWEEP_CSV_COLUMNS)}", line=1)
        columns: Dict[str, List[float]] = {name: [] for name in SWEEP_CSV_COLUMNS}
        for row in reader:
            for name in SWEEP_CSV_COLUMNS:
                columns[name].append(float(row[name]))
    return columns


def plot_sweep(csv_path: Union[str, Path], png_path: Union[str, Path]) -> Path:
    """Position accuracy against the coordinate guidance scale, one line per metric."""
    data = read_sweep_csv(csv_path)
    png_path = Path(png_path)
    png_path.parent.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        for name in PLOTTED:
            ax.plot(data["s_coord"], data[name], marker="o", label=name)
        ax.set_xlabel("s_coord")
        ax.set_ylabel("score")
        ax.set_ylim(0.0, 1.0)
        ax.grid(True, alpha=0.3)
        ax.legend(loc="lower right")
        ax.set_title("Coordinate guidance sweep")
        fig.tight_layout()
        fig.savefig(png_path, dpi=120)
    finally:
        plt.close(fig)
    return png_path
