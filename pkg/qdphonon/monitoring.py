"""
Timing and evaluation counts of the numerical kernels.

Quadratures, least-squares fits and the numeric indistinguishability run
inside :meth:`PerformanceMonitor.track`; fit reports carry the resulting
summary.
"""
import threading
import time
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from statistics import mean, median, stdev
from typing import Dict, Iterator, List, Optional

EMPTY_STATS: Dict[str, float] = {
    "count": 0,
    "total_duration": 0.0,
    "avg_duration": 0.0,
    "median_duration": 0.0,
    "max_duration": 0.0,
    "std_dev": 0.0,
    "error_rate": 0.0,
    "evaluations": 0,
}


@dataclass
class Sample:
    """One timed call."""
    timestamp: datetime
    duration: float
    evaluations: int = 0


@dataclass
class Tracker:
    """Handle yielded by :meth:`PerformanceMonitor.track`.

    Code inside the block adds integrand or model evaluations to
    ``evaluations``.
    """
    evaluations: int = 0


@dataclass
class OperationMetrics:
    """Samples and failures of one named operation."""
    samples: List[Sample] = field(default_factory=list)
    errors: int = 0
    last_error: Optional[str] = None

    def add(self, duration: float, evaluations: int = 0) -> None:
        self.samples.append(Sample(datetime.now(), duration, evaluations))

    def record_error(self, error_msg: str) -> None:
        self.errors += 1
        self.last_error = error_msg

    def get_stats(self) -> Dict[str, float]:
        """Duration statistics, error rate and total evaluations."""
        if not self.samples:
            return dict(EMPTY_STATS)
        durations = [s.duration for s in self.samples]
        n = len(durations)
        return {
            "count": n,
            "total_duration": sum(durations),
            "avg_duration": mean(durations),
            "median_duration": median(durations),
            "max_duration": max(durations),
            "std_dev": stdev(durations) if n > 1 else 0.0,
            "error_rate": self.errors / n,
            "evaluations": sum(s.evaluations for s in self.samples),
        }

    def drop_before(self, cutoff: datetime) -> None:
        self.samples = [s for s in self.samples if s.timestamp >= cutoff]

    def __len__(self) -> int:
        return len(self.samples)


class PerformanceMonitor:
    def __init__(self, metrics_ttl: int = 3600):
        """
        Args:
            metrics_ttl: seconds a sample is kept for the detailed summary
        """
        self.metrics: Dict[str, OperationMetrics] = defaultdict(OperationMetrics)
        self.metrics_ttl = metrics_ttl
        self._lock = threading.Lock()

    def record_operation(self, operation: str, duration: float, error: Optional[str] = None,
                         evaluations: int = 0) -> None:
        """Record one call of ``operation`` that took ``duration`` seconds."""
        with self._lock:
            metrics = self.metrics[operation]
            metrics.add(duration, evaluations)
            if error:
                metrics.record_error(error)

    @contextmanager
    def track(self, operation: str) -> Iterator[Tracker]:
        """Time the enclosed block and record it under ``operation``.

        Failures are recorded with their message and re-raised.
        """
        tracker = Tracker()
        start = time.perf_counter()
        try:
            yield tracker
        except Exception as e:
            self.record_operation(operation, time.perf_counter() - start, str(e),
                                  tracker.evaluations)
            raise
        self.record_operation(operation, time.perf_counter() - start,
                              evaluations=tracker.evaluations)

    def get_average_times(self) -> Dict[str, float]:
        with self._lock:
            return {op: m.get_stats()["avg_duration"] for op, m in self.metrics.items()}

    def get_detailed_metrics(self) -> Dict[str, Dict[str, float]]:
        """Statistics of every operation, ignoring samples older than the TTL."""
        cutoff = datetime.now() - timedelta(seconds=self.metrics_ttl)
        with self._lock:
            for metrics in self.metrics.values():
                metrics.drop_before(cutoff)
            return {op: m.get_stats() for op, m in self.metrics.items()}

    def get_operation_stats(self, operation: str) -> Dict[str, float]:
        with self._lock:
            if operation not in self.metrics:
                return {}
            return self.metrics[operation].get_stats()

    def reset(self) -> None:
        with self._lock:
            self.metrics.clear()


monitor = PerformanceMonitor()
