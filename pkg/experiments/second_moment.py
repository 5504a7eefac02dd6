"""
Second-moment lower-bound experiment. Targets P are a greedy maximal packing; B counts
targets left uncovered by X + K. Analytic moments come from exact pairwise overlap
volumes over all pairs, with E[B_p B_p'] = exp(−2ρ·vol(K) + ρ·vol(K ∩ (K + p − p'))).
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config import ExperimentConfig
from experiments.base_experiment import BaseExperiment
from models.analytic import (hypercube_target_intensity, intensity_formulas, isotropic_target_intensity,
                             second_moment_bound)
from models.bodies import Ball, Cube, ball_overlap_volume, isotropic_constant
from models.coverage import uncovered_count
from models.sampling import PointSet, SeedSpec
from models.torus import CandidateStream, greedy_maximal_packing, minimal_image, overlapping_lifts
from utils.errors import InputError
from utils.statistics import binomial_sigma, mean_and_error, variance_and_error, z_score
from utils.trial_runner import TrialRunner

ALL_PAIRS_LIMIT = 2000


@dataclass
class TargetTrial:
    trial_index: int
    trial_seed: int
    point_count: int
    uncovered: int


@dataclass
class SecondMomentReport:
    targets: PointSet
    trials: List[TargetTrial]
    report: Dict[str, Any]

    def trial_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(t) for t in self.trials], columns=list(TargetTrial.__dataclass_fields__))


def pair_overlaps(targets: PointSet, body) -> Dict[str, np.ndarray]:
    """Pairs i < j whose body translates overlap, with their overlap volumes"""
    if isinstance(body, Cube):
        first, second, gaps = targets.neighbour_pairs(body.side, 'linf')
        volumes = np.prod(np.maximum(body.side - np.abs(gaps), 0.0), axis=1)
    elif isinstance(body, Ball):
        first, second, gaps = targets.neighbour_pairs(2.0 * body.radius, 'l2')
        distances = np.linalg.norm(gaps, axis=1)
        unique, inverse = np.unique(distances, return_inverse=True)
        volumes = np.array([ball_overlap_volume(body.n, body.radius, d) for d in unique])[inverse]
    else:
        raise InputError(f"exact overlap volumes are available for balls and cubes, not {body.kind}", key='body')

    # one overlapping lift per pair, else overlaps would be undercounted
    distinct = np.unique(np.round(gaps, 12), axis=0) if len(gaps) else gaps
    for gap in distinct:
        if len(overlapping_lifts(targets.torus, body, gap)) > 1:
            raise InputError("a target pair overlaps through more than one lattice lift; "
                             "the torus must pack K - K", key='torus_sides')
    keep = volumes > 0
    return {'first': first[keep], 'second': second[keep], 'gaps': gaps[keep], 'volumes': volumes[keep]}


def _overlap_volumes(body, gaps: np.ndarray, cache: Dict[float, float]) -> np.ndarray:
    if isinstance(body, Cube):
        return np.prod(np.maximum(body.side - np.abs(gaps), 0.0), axis=1)
    distances = np.linalg.norm(gaps, axis=1)
    volumes = np.zeros(len(distances))
    for k in np.flatnonzero(distances < 2.0 * body.radius):
        d = float(distances[k])
        if d not in cache:
            cache[d] = ball_overlap_volume(body.n, body.radius, d)
        volumes[k] = cache[d]
    return volumes


def all_pairs_moments(targets: PointSet, body, intensity: float) -> Dict[str, float]:
    """E[B] and Var[B] summed over every ordered pair p ≠ p', without neighbour search or split"""
    if not isinstance(body, (Ball, Cube)):
        raise InputError(f"exact overlap volumes are available for balls and cubes, not {body.kind}", key='body')
    points = targets.points
    count = len(points)
    q = math.exp(-intensity * body.volume())
    cache: Dict[float, float] = {}
    covariances = []
    for i in range(count):
        gaps = minimal_image(targets.torus, np.delete(points, i, axis=0) - points[i])
        # E[B_p B_p'] − E[B_p] E[B_p'] = q² (e^{ρ·vol(K ∩ (K + p − p'))} − 1)
        covariances.append(q * q * math.fsum(np.expm1(intensity * _overlap_volumes(body, gaps, cache))))
    return {'expectation': count * q, 'variance': count * q * (1.0 - q) + math.fsum(covariances)}


def analytic_moments(count: int, intensity: float, body_volume: float, overlaps: Dict[str, np.ndarray],
                     delta_radius: float, near_pairs: int,
                     reference_variance: Optional[float] = None) -> Dict[str, Any]:
    """
    E[B], Var[B] over the overlapping pairs, and the split at distance Δ: Σ₁ (raw pair
    moments within Δ), near covariance and Σ₂ (covariance beyond Δ).
    near_pairs counts ordered pairs p ≠ p' within Δ. Both variances are compared with
    reference_variance when one is given, e.g. from `all_pairs_moments`.
    """
    q = math.exp(-intensity * body_volume)
    boosts = np.exp(intensity * overlaps['volumes'])
    within = np.linalg.norm(overlaps['gaps'], axis=1) <= delta_radius
    expectation = count * q
    # each unordered overlapping pair appears twice among ordered pairs
    variance = count * q * (1.0 - q) + 2.0 * q * q * math.fsum(boosts - 1.0)
    near_overlapping = 2 * int(within.sum())
    sigma1 = (count * q + (near_pairs - near_overlapping) * q * q
              + 2.0 * q * q * math.fsum(boosts[within]))
    near_cov = count * q * (1.0 - q) + 2.0 * q * q * math.fsum(boosts[within] - 1.0)
    sigma2 = 2.0 * q * q * math.fsum(boosts[~within] - 1.0)
    reference = variance if reference_variance is None else reference_variance
    scale = max(abs(reference), 1e-300)
    return {
        'q': q,
        'expectation': expectation,
        'variance': variance,
        'variance_all_pairs': reference_variance,
        'variance_identity_gap': None if reference_variance is None else abs(variance - reference) / scale,
        'sigma1': sigma1,
        'near_covariance': near_cov,
        'sigma2': sigma2,
        'partition_gap': abs(near_cov + sigma2 - reference) / scale,
        'variance_within_split': variance <= sigma1 + sigma2 * (1.0 + 1e-12),
        'sigma1_cube_variant': expectation,
        'overlapping_pairs': int(len(boosts)),
    }


class SecondMomentExperiment(BaseExperiment):
    def __init__(self, runner: Optional[TrialRunner] = None):
        super().__init__("SecondMoment", runner)

    def build_targets(self, config: ExperimentConfig) -> PointSet:
        torus = config.build_torus()
        separation = 2.0 * config.target_radius
        self.logger.info(f"Starting target phase: {config.target_norm} separation {separation:.4g}")
        targets = greedy_maximal_packing(torus, separation, CandidateStream.grid(config.target_step),
                                         norm=config.target_norm, cap=config.probe_cap)
        if len(targets) < 2:
            raise InputError(f"target packing has {len(targets)} point(s); at least 2 are needed for pairs",
                             key='target_radius')
        return targets

    def lower_bound_intensity(self, config: ExperimentConfig) -> Optional[float]:
        """ρ·vol(K) = n ln n − (1+δ) n ln ln n for cubes, (n ln n)/2 − (1+δ) n ln ln n otherwise"""
        body = config.build_body()
        if config.dimension < 3:
            return None
        formulas = intensity_formulas(config.dimension, config.delta, body.volume())
        if isinstance(body, Cube):
            return formulas['lower_cube'] / body.volume()
        return formulas['lower_general']

    def resolve_intensity(self, config: ExperimentConfig, targets: PointSet) -> Tuple[float, str]:
        """Configured intensity, else the target-count formula, else the lower-bound intensity"""
        if config.intensity is not None:
            return config.intensity, 'configured'
        torus = config.build_torus()
        body = config.build_body()
        try:
            if isinstance(body, Cube):
                intensity = hypercube_target_intensity(len(targets), torus.volume)
            else:
                intensity = isotropic_target_intensity(len(targets), config.dimension, config.omega)
            reason = f"target-count intensity {intensity:.4g} is not positive"
        except InputError as e:
            intensity, reason = None, str(e)
        if intensity is not None and intensity > 0:
            return intensity, 'target_count'

        # desk-scale packings are usually smaller than the target-count formulas need
        fallback = self.lower_bound_intensity(config)
        if fallback is None or not fallback > 0:
            raise InputError(f"no default intensity for {len(targets)} targets ({reason}); set 'intensity'",
                             key='intensity')
        self.logger.warning(f"{reason}; using the lower-bound intensity {fallback:.6g}")
        return fallback, 'lower_bound'

    def split_radius(self, config: ExperimentConfig, intensity: float) -> float:
        """Δ = 8 L_K (f_n + log₃ ρ), clamped at 0"""
        body = config.build_body()
        isotropic = config.isotropic_constant or isotropic_constant(body)
        if intensity <= 0:
            return 0.0
        return max(0.0, 8.0 * isotropic * (config.f_n + math.log(intensity, 3)))

    def run_trial(self, config: ExperimentConfig, targets: PointSet, intensity: float,
                  trial_index: int) -> TargetTrial:
        X = self.sample_trial(config, intensity, trial_index)
        return TargetTrial(
            trial_index=trial_index,
            trial_seed=SeedSpec(config.master_seed, trial_index).trial_seed,
            point_count=len(X),
            uncovered=uncovered_count(targets, X, config.build_body(), config.build_torus()),
        )

    def process(self, config: ExperimentConfig) -> SecondMomentReport:
        body = config.build_body()
        torus = config.build_torus()
        targets = self.build_targets(config)
        intensity, intensity_source = self.resolve_intensity(config, targets)
        overlaps = pair_overlaps(targets, body)
        reference = None
        if len(targets) <= ALL_PAIRS_LIMIT:
            reference = all_pairs_moments(targets, body, intensity)['variance']

        delta_radius = self.split_radius(config, intensity)
        if delta_radius >= torus.diameter('l2'):
            near_pairs = len(targets) * (len(targets) - 1)
        else:
            near_pairs = int(targets.count_within(targets.points, delta_radius).sum()) - len(targets)
        moments = analytic_moments(len(targets), intensity, body.volume(), overlaps, delta_radius, near_pairs,
                                   reference_variance=reference)

        self.logger.info(f"Starting sampling phase: {len(targets)} targets, intensity {intensity:.6g}")
        trials = self.runner.run(lambda index: self.run_trial(config, targets, intensity, index),
                                 range(config.trials))
        values = [t.uncovered for t in trials]
        mean, mean_error = mean_and_error(values)
        variance, variance_error = variance_and_error(values)
        p_zero = sum(v == 0 for v in values) / len(values)
        p_zero_sigma = binomial_sigma(p_zero, len(values))
        bound = second_moment_bound(moments['expectation'], moments['variance'])
        empirical_bound = variance / (mean * mean) if mean > 0 else None

        report = {
            'targets': len(targets),
            'target_separation': 2.0 * config.target_radius,
            'target_norm': config.target_norm,
            'target_covering_radius': targets.metadata.get('covering_radius'),
            'intensity': intensity,
            'intensity_source': intensity_source,
            'split_radius': delta_radius,
            'analytic': moments,
            'empirical': {
                'expectation': mean,
                'expectation_error': mean_error,
                'variance': variance,
                'variance_error': variance_error,
                'p_zero': p_zero,
                'p_zero_sigma': p_zero_sigma,
            },
            'z_expectation': z_score(mean, moments['expectation'], mean_error),
            'z_variance': z_score(variance, moments['variance'], variance_error),
            'analytic_bound': bound,
            'empirical_bound': empirical_bound,
            'bound_holds': p_zero <= bound + 3.0 * p_zero_sigma,
        }
        return SecondMomentReport(targets=targets, trials=trials, report=report)


def run_second_moment(config: ExperimentConfig, runner: Optional[TrialRunner] = None) -> SecondMomentReport:
    return SecondMomentExperiment(runner).run(config)
