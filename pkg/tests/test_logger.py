import json
import logging

import pytest

from layoutflow.errors import NonFinite
from layoutflow.utils import MetricLogger, SmoothedValue
from layoutflow.utils.logging import (
    JsonlLogger,
    attach_file_handler,
    detach_file_handler,
    flatten_metrics,
    set_verbosity,
)
from layoutflow.utils.logging.glob_logger import (
    LOGGER,
    ColorLogger,
    add_separator_method,
    configure_logger,
    platform_safe_emojis,
)


class ListHandler(logging.Handler):
    def __init__(self):
        super().__init__()
        self.messages = []

    def emit(self, record):
        self.messages.append(record.getMessage())


@pytest.fixture
def test_logger():
    """Fixture to create a test logger with separator support."""
    logger = configure_logger(name="test_logger", verbose=True)
    return add_separator_method(logger)


def test_platform_safe_emojis():
    """Test that emojis are correctly processed."""
    assert platform_safe_emojis(":fire:") == "🔥"
    assert platform_safe_emojis(":warning:") == "⚠️"
    assert platform_safe_emojis("plain text") == "plain text"


def test_logger_separator(test_logger):
    handler = ListHandler()
    test_logger.addHandler(handler)
    try:
        test_logger.separator("Train")
        test_logger.separator("")
    finally:
        test_logger.removeHandler(handler)
    titled, plain = handler.messages
    assert len(titled) == 85 and " Train " in titled
    assert plain == "-" * 85


def test_logger_configuration():
    """Test that the logger is configured correctly."""
    logger = configure_logger(name="dummy_logger", verbose=True)
    assert logger.name == "dummy_logger"
    assert logger.level == logging.INFO
    configure_logger(name="dummy_logger", verbose=False)
    assert logger.level == logging.ERROR
    assert sum(1 for h in logger.handlers if getattr(h, "_layoutflow", False)) == 1


def test_set_verbosity():
    set_verbosity(False)
    try:
        assert LOGGER.level == logging.ERROR
    finally:
        set_verbosity(True)
    assert LOGGER.level == logging.INFO


def test_color_formatter():
    record = logging.LogRecord("x", logging.ERROR, __file__, 1, "boom", None, None)
    assert "boom" in ColorLogger("%(message)s").format(record)


def test_jsonl_logger(tmp_path):
    logger = JsonlLogger(tmp_path / "run")
    logger.log_hyperparams({"lr": 0.1, "path": tmp_path})
    logger.log_metrics({"loss": 0.5}, step=3)
    logger.close()
    logger.close()
    lines = [json.loads(line) for line in (tmp_path / "run" / "metrics.jsonl").read_text().splitlines()]
    assert lines == [{"hyperparams": {"lr": 0.1, "path": str(tmp_path)}}, {"loss": 0.5, "step": 3}]


def test_file_handler_mirrors_logger(tmp_path, test_logger):
    handler = attach_file_handler(tmp_path / "logs" / "run.log", test_logger)
    try:
        test_logger.info("written to disk")
    finally:
        detach_file_handler(handler, test_logger)
    test_logger.info("not written")
    text = (tmp_path / "logs" / "run.log").read_text()
    assert "INFO" in text and "written to disk" in text
    assert "not written" not in text
    assert handler not in test_logger.handlers


def test_metric_logger_averages():
    meters = MetricLogger(delimiter="  ")
    seen = list(meters.log_every([1.0, 2.0, 6.0], print_freq=0, header="Epoch: [0]", start_step=5))
    for value in seen:
        meters.update(loss=value)
    assert meters.averages() == {"loss": 3.0}
    assert meters.meters["loss"].median == 2.0
    assert "loss: 2.0000 (3.0000)" in str(meters)
    assert list(meters.log_every([], print_freq=1)) == []

    with pytest.raises(NonFinite):
        meters.update(loss=float("nan"))
    with pytest.raises(TypeError):
        meters.update(loss="high")


def test_smoothed_value_window():
    meter = SmoothedValue(window_size=2, fmt="{value:.1f}/{max:.1f}")
    assert str(meter) == "-"
    for v in (5.0, 1.0, 3.0):
        meter.update(v)
    assert str(meter) == "3.0/3.0"
    assert meter.avg == 2.0 and meter.global_avg == 3.0


def test_flatten_metrics():
    flat = flatten_metrics({"miou": 0.5, "instance_sr": {"L2": 1.0, "L3": None}, "clip_t_mean": None}, "sweep/")
    assert flat == {"sweep/miou": 0.5, "sweep/instance_sr/L2": 1.0}
