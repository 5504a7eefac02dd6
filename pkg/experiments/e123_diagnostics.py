"""
Event diagnostics for the ball upper-bound construction: ε- and μ-nets built as
greedy maximal packings, the map φ from the ε-net to its nearest μ-net point, and
per-trial evaluation of the count event E0 and the events E1, E2, E3.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from config import ExperimentConfig
from experiments.base_experiment import BaseExperiment
from models.analytic import (choose_beta, count_concentration_bound, density_ceiling, multiplicity_ceiling,
                             net_radii, saturation_threshold, solve_xi)
from models.bodies import Ball
from models.coverage import saturated_mask
from models.sampling import PointSet, SeedSpec
from models.torus import CandidateStream, greedy_maximal_packing, nearest_assignment
from utils.errors import InputError
from utils.statistics import wilson_interval
from utils.trial_runner import TrialRunner

DIAGNOSTIC_LABEL = 'diagnostic: the construction guarantees these events only in the limit n -> infinity'


@dataclass
class EventTrial:
    trial_index: int
    trial_seed: int
    point_count: int
    e0: bool
    e1: bool
    e2: bool
    e3: bool
    consistent: bool
    saturated_fraction: float
    max_neighbourhood: int


@dataclass
class EventReport:
    trials: List[EventTrial]
    report: Dict[str, Any]

    def trial_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(t) for t in self.trials], columns=list(EventTrial.__dataclass_fields__))


@dataclass(frozen=True)
class Construction:
    radius: float
    eps: float
    mu: float
    beta: float
    eps_net: PointSet
    mu_net: PointSet
    phi: np.ndarray
    multiplicity_limit: float


class E123Experiment(BaseExperiment):
    def __init__(self, runner: Optional[TrialRunner] = None, delta: Optional[float] = None):
        super().__init__("E123Diagnostics", runner)
        self.delta = delta

    def construct(self, config: ExperimentConfig, delta: float) -> Construction:
        body = config.build_body()
        torus = config.build_torus()
        if not isinstance(body, Ball):
            raise InputError("event diagnostics follow the ball construction; set body=ball", key='body')
        n = config.dimension
        if n < 2:
            raise InputError("event diagnostics need n >= 2", key='dimension')
        eps, mu = net_radii(n, delta, body.radius)
        eps = config.eps_override or eps
        mu = config.mu_override or mu
        if not eps < body.radius:
            raise InputError(f"eps={eps} must stay below the radius {body.radius}", key='eps_override')

        self.logger.info(f"Starting net construction phase (eps={eps:.4g}, mu={mu:.4g})")
        eps_net = greedy_maximal_packing(torus, eps, CandidateStream.grid(eps / 2.0), cap=config.probe_cap)
        mu_net = greedy_maximal_packing(torus, mu, CandidateStream.grid(mu / 2.0), cap=config.probe_cap)
        phi = nearest_assignment(eps_net, mu_net, torus).indices
        return Construction(
            radius=body.radius, eps=eps, mu=mu, beta=choose_beta(delta),
            eps_net=eps_net, mu_net=mu_net, phi=phi,
            multiplicity_limit=multiplicity_ceiling(delta, n, solve_xi(config.tolerance)),
        )

    def run_trial(self, config: ExperimentConfig, net: Construction, intensity: float, delta: float,
                  trial_index: int) -> EventTrial:
        torus = config.build_torus()
        n = config.dimension
        r, eps = net.radius, net.eps
        X = self.sample_trial(config, intensity, trial_index)

        mu_saturated = saturated_mask(net.mu_net.points, X, eps, net.beta, n, torus, radius=r)
        near = X.count_within(net.eps_net.points, r - eps, 'l2')
        far = X.count_within(net.eps_net.points, r + eps, 'l2')
        # E3: each z has a point within r − ε, or φ(z) is not saturated
        e3 = bool(np.all((near > 0) | ~mu_saturated[net.phi]))
        e1 = bool(mu_saturated.all())
        e2 = bool(far.max() <= net.multiplicity_limit) if len(far) else True
        # E1 and E3 force a point of X within r − ε of every z
        consistent = not (e1 and e3) or bool(np.all(near > 0))
        return EventTrial(
            trial_index=trial_index,
            trial_seed=SeedSpec(config.master_seed, trial_index).trial_seed,
            point_count=len(X),
            e0=len(X) <= (1.0 + delta) * intensity * torus.volume,
            e1=e1,
            e2=e2,
            e3=e3,
            consistent=consistent,
            saturated_fraction=float(mu_saturated.mean()) if len(mu_saturated) else 0.0,
            max_neighbourhood=int(far.max()) if len(far) else 0,
        )

    def process(self, config: ExperimentConfig) -> EventReport:
        delta = config.delta if self.delta is None else self.delta
        body = config.build_body()
        n = config.dimension
        net = self.construct(config, delta)
        # default: the construction intensity (1/2 + δ) n ln n / vol(K)
        intensity = config.intensity
        if intensity is None:
            intensity = (0.5 + delta) * n * math.log(n) / body.volume()

        self.logger.info(f"Starting event phase at intensity {intensity:.6g}")
        trials = self.runner.run(lambda index: self.run_trial(config, net, intensity, delta, index),
                                 range(config.trials))
        inconsistent = [t.trial_index for t in trials if not t.consistent]
        if inconsistent:
            self.logger.error(f"Event consistency violated in trials {inconsistent[:10]}")

        frequencies = {}
        for event in ('e0', 'e1', 'e2', 'e3'):
            hits = sum(getattr(t, event) for t in trials)
            frequencies[event] = {
                'frequency': hits / len(trials),
                'ci': list(wilson_interval(hits, len(trials))),
            }
        both = sum(t.e1 and t.e3 for t in trials)
        c_eps = net.eps_net.metadata.get('covering_radius')
        torus_volume = config.build_torus().volume
        lam = intensity * torus_volume
        mean_count = float(np.mean([t.point_count for t in trials]))
        report = {
            'label': DIAGNOSTIC_LABEL,
            'intensity': intensity,
            'delta': delta,
            'eps': net.eps,
            'mu': net.mu,
            'beta': net.beta,
            'saturation_threshold': saturation_threshold(net.beta, n),
            'multiplicity_limit': net.multiplicity_limit,
            'density_ceiling': density_ceiling(delta, n),
            'mean_density': mean_count * body.volume() / torus_volume,
            'eps_net_size': len(net.eps_net),
            'mu_net_size': len(net.mu_net),
            'eps_net_covering_radius': c_eps,
            'implied_covering_radius': net.radius - net.eps + c_eps if c_eps is not None else None,
            'implied_cover_frequency': both / len(trials),
            'events': frequencies,
            'count_bound': count_concentration_bound(lam, delta) if lam > 0 else None,
            'mean_saturated_fraction': float(np.mean([t.saturated_fraction for t in trials])),
            'consistency_violations': len(inconsistent),
        }
        return EventReport(trials=trials, report=report)


def run_e123_diagnostics(config: ExperimentConfig, delta: Optional[float] = None,
                         runner: Optional[TrialRunner] = None) -> EventReport:
    return E123Experiment(runner, delta).run(config)
