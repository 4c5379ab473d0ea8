try:
    import wandb
except ImportError:
    wandb = None

from typing import Any, Dict, Optional

from .metrics_logger import ExperimentLogger


def flatten_metrics(metrics: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    """``{"instance_sr": {"L2": 0.5}}`` -> ``{"instance_sr/L2": 0.5}``; ``None`` values are dropped."""
    flat = {}
    for k, v in metrics.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(flatten_metrics(v, f"{key}/"))
        elif v is not None:
            flat[key] = v
    return flat


class WandbLogger(ExperimentLogger):
    """Weights & Biases tracker, available with the ``tracking`` extra."""

    def __init__(
        self,
        project: str = "layoutflow",
        name: Optional[str] = None,
        config: Optional[Dict[str, Any]] = None,
        prefix: str = "",
        **kwargs,
    ):
        if wandb is None:
            raise ImportError("Wandb is not installed. Please install it with `pip install layoutflow[tracking]`.")
        self.prefix = prefix
        self.run = wandb.init(project=project, name=name, config=config, **kwargs)

    def log_metrics(self, metrics: Dict[str, Any], step: int) -> None:
        self.run.log(flatten_metrics(metrics, self.prefix), step=step)

    def log_hyperparams(self, params: Dict[str, Any]) -> None:
        self.run.config.update(params, allow_val_change=True)

    def close(self) -> None:
        if self.run is not None:
            self.run.finish()
            self.run = None
