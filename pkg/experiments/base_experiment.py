from abc import ABC, abstractmethod
from typing import Any, Dict, Optional
import logging
import math
import time

from config import ExperimentConfig
from models.sampling import PointSet, SeedSpec, sample_fixed_count, sample_ppp
from utils.errors import TorusCoverError
from utils.trial_runner import TrialRunner


class BaseExperiment(ABC):
    """Base class for all experiment pipelines"""

    def __init__(self, experiment_name: str, runner: Optional[TrialRunner] = None):
        self.experiment_name = experiment_name
        self.runner = runner or TrialRunner()
        self.logger = logging.getLogger(f"Experiment.{experiment_name}")
        self.runs_completed = 0
        self.last_duration = 0.0

    @abstractmethod
    def process(self, config: ExperimentConfig) -> Any:
        """Run the pipeline on a validated configuration"""
        pass

    def run(self, config: ExperimentConfig) -> Any:
        started = time.perf_counter()
        self.logger.info(f"Starting {self.experiment_name} ({config.trials} trials, seed {config.master_seed})")
        try:
            result = self.process(config)
        except TorusCoverError as e:
            self.logger.error(f"{self.experiment_name} failed: {e}")
            raise
        self.last_duration = time.perf_counter() - started
        self.runs_completed += 1
        self.logger.info(f"{self.experiment_name} finished in {self.last_duration:.2f}s")
        return result

    def sample_trial(self, config: ExperimentConfig, intensity: float, trial_index: int) -> PointSet:
        """Point configuration of one trial, from the process the config names"""
        torus = config.build_torus()
        seed = SeedSpec(config.master_seed, trial_index)
        if config.process == 'fixed_count':
            return sample_fixed_count(torus, math.floor(intensity * torus.volume), seed, cap=config.sample_cap)
        return sample_ppp(torus, intensity, seed, cap=config.sample_cap)

    def get_status(self) -> Dict[str, Any]:
        """Get pipeline status information"""
        return {
            'experiment_name': self.experiment_name,
            'runs_completed': self.runs_completed,
            'last_duration': round(self.last_duration, 3),
            'performance': self.runner.get_performance_insights()
        }
