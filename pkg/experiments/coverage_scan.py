"""
Intensity-coverage scans: independent trials per grid intensity, sound coverage
verdicts, isotonic coverage curve and the fitted 50% threshold with a bootstrap CI.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from config import ExperimentConfig
from experiments.base_experiment import BaseExperiment
from models.coverage import CoverageStatus, certify_coverage, covering_density, max_multiplicity
from models.sampling import SeedSpec
from utils.statistics import bootstrap_threshold, isotonic_fit, proportion_ci, threshold_crossing
from utils.trial_runner import TrialRunner


@dataclass
class TrialRecord:
    trial_index: int
    intensity: float
    trial_seed: int
    point_count: int
    status: str
    density: float
    mult_lower: Optional[int]
    mult_upper: Optional[int]
    witness: Optional[str]


@dataclass
class ScanTable:
    rows: pd.DataFrame
    trials: List[TrialRecord]
    threshold: Optional[float]
    threshold_ci: Optional[List[float]]
    extrapolated: bool
    normalized_threshold: Optional[float]
    warnings: List[str] = field(default_factory=list)

    def trial_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(record) for record in self.trials],
                            columns=[name for name in TrialRecord.__dataclass_fields__])

    def summary(self) -> Dict[str, Any]:
        return {
            'threshold': self.threshold,
            'threshold_ci': self.threshold_ci,
            'extrapolated': self.extrapolated,
            'normalized_threshold': self.normalized_threshold,
            'warnings': self.warnings,
        }


def trial_index_for(grid_index: int, trial: int, trials: int) -> int:
    """Seeds are keyed by position in the whole scan, so grid points never share a stream"""
    return grid_index * trials + trial


class CoverageScanExperiment(BaseExperiment):
    """Coverage scans over an intensity grid, and single-intensity cover runs"""

    def __init__(self, runner: Optional[TrialRunner] = None):
        super().__init__("CoverageScan", runner)

    def run_trial(self, config: ExperimentConfig, intensity: float, trial_index: int) -> TrialRecord:
        body = config.build_body()
        torus = config.build_torus()
        net = config.build_net()
        X = self.sample_trial(config, intensity, trial_index)
        verdict = certify_coverage(X, body, torus, net)
        lower = upper = None
        if config.profile_max_multiplicity:
            bounds = max_multiplicity(X, body, torus, net)
            lower, upper = bounds.lower, bounds.upper
        witness = None
        if verdict.witness is not None:
            witness = ' '.join(f"{value:.12g}" for value in verdict.witness)
        self.logger.debug(f"Trial {trial_index} at intensity {intensity}: {verdict.status.value}, |X|={len(X)}")
        return TrialRecord(
            trial_index=trial_index,
            intensity=intensity,
            trial_seed=SeedSpec(config.master_seed, trial_index).trial_seed,
            point_count=len(X),
            status=verdict.status.value,
            density=covering_density(X, body, torus),
            mult_lower=lower,
            mult_upper=upper,
            witness=witness,
        )

    def run_grid(self, config: ExperimentConfig, grid: List[float]) -> List[TrialRecord]:
        records = []
        config.build_net()  # shared read-only by the workers
        for grid_index, intensity in enumerate(grid):
            indices = [trial_index_for(grid_index, t, config.trials) for t in range(config.trials)]
            records.extend(self.runner.run(lambda index: self.run_trial(config, intensity, index), indices))
        return records

    def process(self, config: ExperimentConfig) -> ScanTable:
        grid = sorted(set(config.intensity_grid()))
        self.logger.info(f"Starting coverage phase over {len(grid)} intensities")
        records = self.run_grid(config, grid)
        return self.summarize(config, grid, records)

    def summarize(self, config: ExperimentConfig, grid: List[float], records: List[TrialRecord]) -> ScanTable:
        rng = SeedSpec(config.master_seed, 0).generator('bootstrap')
        rows, warnings = [], []
        covered, undetermined, totals = [], [], []
        for intensity in grid:
            group = [r for r in records if r.intensity == intensity]
            counts = {status: sum(r.status == status.value for r in group) for status in CoverageStatus}
            trials = len(group)
            fraction = counts[CoverageStatus.COVERED] / trials
            low, high = proportion_ci(counts[CoverageStatus.COVERED], trials, rng, config.bootstrap_resamples)
            undetermined_fraction = counts[CoverageStatus.UNDETERMINED] / trials
            flagged = undetermined_fraction > config.undetermined_cap
            if flagged:
                message = (f"undetermined fraction {undetermined_fraction:.3f} above cap "
                           f"{config.undetermined_cap} at intensity {intensity}")
                warnings.append(message)
                self.logger.warning(message)
            uppers = [r.mult_upper for r in group if r.mult_upper is not None]
            lowers = [r.mult_lower for r in group if r.mult_lower is not None]
            rows.append({
                'intensity': intensity,
                'trials': trials,
                'covered_count': counts[CoverageStatus.COVERED],
                'uncovered_count': counts[CoverageStatus.UNCOVERED],
                'undetermined_count': counts[CoverageStatus.UNDETERMINED],
                'coverage_fraction': fraction,
                'coverage_ci_low': low,
                'coverage_ci_high': high,
                'mean_density': float(np.mean([r.density for r in group])) if group else 0.0,
                'mean_mult_lower': float(np.mean(lowers)) if lowers else float('nan'),
                'mean_mult_upper': float(np.mean(uppers)) if uppers else float('nan'),
                'undetermined_flag': flagged,
            })
            covered.append(counts[CoverageStatus.COVERED])
            undetermined.append(counts[CoverageStatus.UNDETERMINED])
            totals.append(trials)

        table = pd.DataFrame(rows)
        covered = np.asarray(covered)
        undetermined = np.asarray(undetermined)
        totals = np.asarray(totals)
        # undetermined verdicts count as not covered in the point estimate
        fitted = isotonic_fit(grid, covered / totals, totals)
        table['smoothed_fraction'] = fitted
        threshold, extrapolated = threshold_crossing(grid, fitted)
        if extrapolated:
            self.logger.warning(f"Coverage curve never brackets 0.5; threshold clamped to {threshold}")
        ci = list(bootstrap_threshold(grid, covered, totals, config.bootstrap_resamples, rng))
        if undetermined.sum() and any(row['undetermined_flag'] for row in rows):
            # widen to bracket both resolutions of undetermined verdicts
            optimistic = bootstrap_threshold(grid, covered + undetermined, totals, config.bootstrap_resamples, rng)
            ci = [min(ci[0], optimistic[0]), max(ci[1], optimistic[1])]

        body = config.build_body()
        n = config.dimension
        normalized = threshold * body.volume() / (n * math.log(n)) if n >= 2 else None
        return ScanTable(rows=table, trials=records, threshold=threshold, threshold_ci=ci,
                         extrapolated=extrapolated, normalized_threshold=normalized, warnings=warnings)


def run_coverage_scan(config: ExperimentConfig, runner: Optional[TrialRunner] = None) -> ScanTable:
    return CoverageScanExperiment(runner).run(config)


def run_cover(config: ExperimentConfig, runner: Optional[TrialRunner] = None) -> ScanTable:
    """`trials` coverage trials at the single configured intensity"""
    experiment = CoverageScanExperiment(runner)
    intensity = config.single_intensity()
    records = experiment.run_grid(config, [intensity])
    return experiment.summarize(config, [intensity], records)
