from typing import Any, Dict, Optional
import logging
import time

from config import ExperimentConfig
from utils.trial_runner import TrialRunner
from .coverage_scan import CoverageScanExperiment, run_cover
from .e123_diagnostics import E123Experiment
from .lemma_suite import LemmaSuiteExperiment
from .multiplicity_profile import MultiplicityProfileExperiment
from .second_moment import SecondMomentExperiment


class ExperimentOrchestrator:
    """Coordinates the experiment pipelines over one shared trial runner"""

    def __init__(self, threads: Optional[int] = None):
        self.logger = logging.getLogger("ExperimentOrchestrator")
        self.runner = TrialRunner(threads)

        # Initialize pipelines
        self.pipelines = {
            'scan': CoverageScanExperiment(self.runner),
            'multiplicity': MultiplicityProfileExperiment(self.runner),
            'e123': E123Experiment(self.runner),
            'second-moment': SecondMomentExperiment(self.runner),
            'verify-lemmas': LemmaSuiteExperiment(self.runner),
        }
        self.logger.info(f"Experiment orchestrator initialized with {self.runner.threads} threads")

    def run_experiment(self, name: str, config: ExperimentConfig) -> Any:
        """Run one named pipeline; `cover` is a single-intensity scan"""
        started = time.time()
        if name == 'cover':
            self.logger.info("Starting cover phase")
            result = run_cover(config, self.runner)
        else:
            pipeline = self.pipelines.get(name)
            if pipeline is None:
                raise KeyError(name)
            result = pipeline.run(config)
        self.logger.info(f"{name} completed in {time.time() - started:.2f}s")
        return result

    def get_status(self) -> Dict[str, Any]:
        return {
            'pipelines': {name: pipeline.get_status() for name, pipeline in self.pipelines.items()},
            'performance': self.runner.get_performance_insights()
        }
