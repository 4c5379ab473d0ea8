from .glob_logger import LOGGER, attach_file_handler, configure_logger, detach_file_handler, set_verbosity
from .metrics_logger import ExperimentLogger, JsonlLogger
from .wandb import WandbLogger, flatten_metrics

__all__ = [
    "LOGGER",
    "configure_logger",
    "set_verbosity",
    "attach_file_handler",
    "detach_file_handler",
    "ExperimentLogger",
    "JsonlLogger",
    "WandbLogger",
    "flatten_metrics",
]
