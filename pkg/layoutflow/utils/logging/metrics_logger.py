import json
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, Union


class ExperimentLogger(ABC):
    @abstractmethod
    def log_metrics(self, metrics: Dict[str, Any], step: int) -> None:
        pass

    @abstractmethod
    def log_hyperparams(self, params: Dict[str, Any]) -> None:
        pass

    @abstractmethod
    def close(self) -> None:
        pass


class JsonlLogger(ExperimentLogger):
    """Appends one JSON object per call to ``<run_dir>/metrics.jsonl``."""

    def __init__(self, run_dir: Union[str, Path], filename: str = "metrics.jsonl"):
        self.path = Path(run_dir) / filename
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")

    def log_metrics(self, metrics: Dict[str, Any], step: int) -> None:
        self._fh.write(json.dumps({"step": step, **metrics}, sort_keys=True) + "\n")
        self._fh.flush()

    def log_hyperparams(self, params: Dict[str, Any]) -> None:
        self._fh.write(json.dumps({"hyperparams": params}, sort_keys=True, default=str) + "\n")
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()
