"""
Training progress meters.

``MetricLogger.log_every`` wraps the batch list of one epoch and reports windowed medians,
running averages, the global step and an ETA through ``LOGGER``.
"""

import datetime
import math
import time
from collections import defaultdict, deque
from typing import Dict, Iterable, Iterator, Optional, Sized, TypeVar

import numpy as np

from ..errors import NonFinite
from .logging import LOGGER

__all__ = ["SmoothedValue", "MetricLogger"]

T = TypeVar("T")


class SmoothedValue(object):
    """Windowed series with a running total; ``fmt`` sees median, avg, global_avg, max and value."""

    def __init__(self, window_size: int = 20, fmt: Optional[str] = None):
        self.fmt = fmt or "{median:.4f} ({global_avg:.4f})"
        self.window = deque(maxlen=window_size)
        self.total = 0.0
        self.count = 0

    def update(self, value: float, n: int = 1) -> None:
        value = float(value)
        if not math.isfinite(value):
            raise NonFinite(f"meter received {value}")
        self.window.append(value)
        self.count += n
        self.total += value * n

    @property
    def median(self) -> float:
        return float(np.median(self.window))

    @property
    def avg(self) -> float:
        return float(np.mean(self.window))

    @property
    def global_avg(self) -> float:
        return self.total / self.count if self.count else math.nan

    @property
    def max(self) -> float:
        return float(np.max(self.window))

    @property
    def value(self) -> float:
        return self.window[-1]

    def __str__(self) -> str:
        if not self.window:
            return "-"
        return self.fmt.format(
            median=self.median, avg=self.avg, global_avg=self.global_avg, max=self.max, value=self.value
        )


class MetricLogger(object):
    def __init__(self, delimiter: str = "\t"):
        self.meters: Dict[str, SmoothedValue] = defaultdict(SmoothedValue)
        self.delimiter = delimiter

    def update(self, **kwargs: float) -> None:
        for k, v in kwargs.items():
            if hasattr(v, "item"):
                v = v.item()
            if not isinstance(v, (float, int)):
                raise TypeError(f"meter '{k}' expects a number, got {type(v).__name__}")
            self.meters[k].update(v)

    def add_meter(self, name: str, meter: SmoothedValue) -> None:
        self.meters[name] = meter

    def averages(self) -> Dict[str, float]:
        return {k: m.global_avg for k, m in self.meters.items() if m.count}

    def __str__(self) -> str:
        return self.delimiter.join(f"{name}: {meter}" for name, meter in self.meters.items())

    def log_every(
        self, iterable: Iterable[T], print_freq: int, header: str = "", start_step: int = 0
    ) -> Iterator[T]:
        """
        Yield from ``iterable`` and log every ``print_freq`` items and on the last one.
        ``start_step`` offsets the reported global step. ``print_freq <= 0`` silences progress lines.
        """
        items = list(iterable) if not isinstance(iterable, Sized) else iterable
        total = len(items)
        if total == 0:
            return
        iter_time = SmoothedValue(fmt="{avg:.4f}")
        width = len(str(total))
        start = end = time.perf_counter()
        for i, obj in enumerate(items):
            yield obj
            iter_time.update(time.perf_counter() - end)
            if print_freq > 0 and (i % print_freq == 0 or i == total - 1):
                eta = datetime.timedelta(seconds=int(iter_time.global_avg * (total - i - 1)))
                LOGGER.info(
                    self.delimiter.join(
                        [
                            header,
                            f"[{i:{width}d}/{total}]",
                            f"step: {start_step + i}",
                            f"eta: {eta}",
                            str(self),
                            f"time: {iter_time}",
                        ]
                    )
                )
            end = time.perf_counter()
        elapsed = time.perf_counter() - start
        LOGGER.info(f"{header} Total time: {datetime.timedelta(seconds=int(elapsed))} ({elapsed / total:.4f} s / it)")
