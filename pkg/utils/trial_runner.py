"""
Trial runner for experiment pipelines
Runs independent trials on a thread pool and folds results in trial-index order
"""

import logging
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, Iterable, List, Optional

from config import Config


class TrialRunner:
    """
    Executes trial functions in parallel; results always come back in index order,
    so serial and parallel runs fold identically
    """

    def __init__(self, threads: Optional[int] = None):
        self.threads = max(1, int(threads or Config.THREADS))
        self.logger = logging.getLogger(__name__)

        # Performance metrics
        self.performance_metrics = {
            'total_trials': 0,
            'total_batches': 0,
            'average_trial_time': 0.0,
            'wall_time': 0.0
        }

        # Trial time tracking
        self.trial_times = deque(maxlen=1000)
        self._metrics_lock = threading.Lock()

    def _timed(self, fn: Callable[[int], Any], index: int) -> Any:
        started = time.perf_counter()
        result = fn(index)
        elapsed = time.perf_counter() - started
        with self._metrics_lock:
            self.trial_times.append(elapsed)
            total = self.performance_metrics['total_trials'] + 1
            average = self.performance_metrics['average_trial_time']
            self.performance_metrics['total_trials'] = total
            self.performance_metrics['average_trial_time'] = average + (elapsed - average) / total
        return result

    def run(self, fn: Callable[[int], Any], indices: Iterable[int]) -> List[Any]:
        """Call fn(index) for every index; the first failure propagates"""
        indices = list(indices)
        started = time.perf_counter()
        if self.threads == 1 or len(indices) <= 1:
            results = [self._timed(fn, index) for index in indices]
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                results = list(pool.map(lambda index: self._timed(fn, index), indices))
        with self._metrics_lock:
            self.performance_metrics['total_batches'] += 1
            self.performance_metrics['wall_time'] += time.perf_counter() - started
        self.logger.debug(f"Batch of {len(indices)} trials finished on {self.threads} threads")
        return results

    def get_performance_insights(self) -> Dict[str, Any]:
        """Timing summary for the run manifest"""
        with self._metrics_lock:
            recent = list(self.trial_times)
            metrics = dict(self.performance_metrics)
        slowest = max(recent) if recent else 0.0
        return {
            'threads': self.threads,
            'total_trials': metrics['total_trials'],
            'total_batches': metrics['total_batches'],
            'average_trial_time': round(metrics['average_trial_time'], 6),
            'slowest_recent_trial': round(slowest, 6),
            'wall_time': round(metrics['wall_time'], 3)
        }
