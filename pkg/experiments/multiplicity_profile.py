"""
Multiplicity profiles: the law of the multiplicity at a fixed reference point
against Poisson(ρ·vol(K)), the distribution of maximal-multiplicity bounds and the
covering density.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from scipy import stats

from config import ExperimentConfig
from experiments.base_experiment import BaseExperiment
from models.analytic import multiplicity_ceiling, solve_xi
from models.coverage import covering_density, max_multiplicity, multiplicity_at
from models.sampling import SeedSpec
from utils.statistics import (empirical_pmf, mean_and_error, poisson_chisquare, poisson_total_variation,
                              z_score)
from utils.trial_runner import TrialRunner


@dataclass
class ProfileTrial:
    trial_index: int
    trial_seed: int
    point_count: int
    reference_multiplicity: int
    mult_lower: Optional[int]
    mult_upper: Optional[int]
    density: float


@dataclass
class MultiplicityProfile:
    trials: List[ProfileTrial]
    report: Dict[str, Any]

    def trial_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(t) for t in self.trials], columns=list(ProfileTrial.__dataclass_fields__))


class MultiplicityProfileExperiment(BaseExperiment):
    def __init__(self, runner: Optional[TrialRunner] = None):
        super().__init__("MultiplicityProfile", runner)

    def run_trial(self, config: ExperimentConfig, intensity: float, trial_index: int) -> ProfileTrial:
        body = config.build_body()
        torus = config.build_torus()
        X = self.sample_trial(config, intensity, trial_index)
        lower = upper = None
        if config.profile_max_multiplicity:
            bounds = max_multiplicity(X, body, torus, config.build_net())
            lower, upper = bounds.lower, bounds.upper
        return ProfileTrial(
            trial_index=trial_index,
            trial_seed=SeedSpec(config.master_seed, trial_index).trial_seed,
            point_count=len(X),
            reference_multiplicity=multiplicity_at(X, body, config.reference_point, torus),
            mult_lower=lower,
            mult_upper=upper,
            density=covering_density(X, body, torus),
        )

    def process(self, config: ExperimentConfig) -> MultiplicityProfile:
        intensity = config.single_intensity()
        body = config.build_body()
        n = config.dimension
        if config.profile_max_multiplicity:
            config.build_net()
        self.logger.info(f"Starting profile phase at intensity {intensity}")
        trials = self.runner.run(lambda index: self.run_trial(config, intensity, index), range(config.trials))

        lam = intensity * body.volume()
        values = [t.reference_multiplicity for t in trials]
        pmf = empirical_pmf(values)
        support = np.arange(len(pmf))
        reference = stats.poisson.pmf(support, lam) if lam > 0 else (support == 0).astype(float)
        density_mean, density_error = mean_and_error([t.density for t in trials])
        # the density is |X|·vol(K)/vol(T), so its law is Poisson(ρ·vol(T)) scaled
        torus_volume = config.build_torus().volume
        density_sigma = math.sqrt(lam * body.volume() / torus_volume / len(trials))
        density_expected = lam
        if config.process == 'fixed_count':
            density_expected, density_sigma = math.floor(intensity * torus_volume) * body.volume() / torus_volume, 0.0

        report = {
            'intensity': intensity,
            'poisson_mean': lam,
            'process': config.process,
            'reference_point': list(config.reference_point),
            'pmf': [float(p) for p in pmf],
            'poisson_pmf': [float(p) for p in reference],
            'total_variation': poisson_total_variation(values, lam),
            'chi_squared': poisson_chisquare(values, lam),
            'density_mean': density_mean,
            'density_standard_error': density_error,
            'density_expected': density_expected,
            'density_z': z_score(density_mean, density_expected, density_sigma),
        }
        uppers = [t.mult_upper for t in trials if t.mult_upper is not None]
        if uppers:
            upper_pmf = empirical_pmf(uppers)
            report['upper_bound_pmf'] = [float(p) for p in upper_pmf]
            report['upper_bound_mean'] = float(np.mean(uppers))
            report['lower_bound_mean'] = float(np.mean([t.mult_lower for t in trials]))
            if n >= 2:
                report['normalized_upper'] = float(np.mean(uppers)) / (n * math.log(n))
                report['multiplicity_ceiling'] = multiplicity_ceiling(config.delta, n)
        report['commentary'] = {
            'xi': solve_xi(config.tolerance),
            'e': math.e,
            'note': 'multiplicity e versus xi compares constructions; reported, not tested',
        }
        return MultiplicityProfile(trials=trials, report=report)


def run_multiplicity_profile(config: ExperimentConfig, runner: Optional[TrialRunner] = None) -> MultiplicityProfile:
    return MultiplicityProfileExperiment(runner).run(config)
