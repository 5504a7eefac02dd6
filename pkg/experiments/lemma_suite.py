"""
Non-asymptotic inequality ledger. Every row evaluates one inequality on an instance
grid and records the worst margin (bound minus value, negative means violated).
Monte-Carlo rows carry a 3σ allowance.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import stats

from config import ExperimentConfig
from experiments.base_experiment import BaseExperiment
from experiments.second_moment import analytic_moments
from models.analytic import (analytic_constants, ball_volume_ratio, chain_smallest_n, nu_asymptotic, nu_exact,
                             nu_recursion_residual, packing_cardinality_bounds, poisson_lower_tail,
                             poisson_upper_tail, second_moment_bound)
from models.bodies import (Ball, Cube, SlabSpec, ball_overlap_volume, ball_symmetric_difference_bound,
                           cube_overlap_volume, isotropic_constant, slab_tail_volume_mc, small_overlap_bound)
from models.sampling import SeedSpec
from models.torus import CandidateStream, greedy_maximal_packing
from utils.errors import LemmaFailure
from utils.trial_runner import TrialRunner

@dataclass
class LedgerRow:
    check: str
    instances: int
    worst_margin: float
    passed: bool
    witness: str = ''

    def to_dict(self) -> Dict[str, Any]:
        return {'check': self.check, 'instances': self.instances, 'worst_margin': self.worst_margin,
                'status': 'pass' if self.passed else 'FAIL', 'witness': self.witness}


@dataclass
class LemmaLedger:
    rows: List[LedgerRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def failures(self) -> List[LedgerRow]:
        return [row for row in self.rows if not row.passed]

    def raise_for_failures(self):
        failed = self.failures()
        if failed:
            names = ', '.join(row.check for row in failed)
            raise LemmaFailure(f"{len(failed)} inequality check(s) failed: {names}",
                               rows=[row.to_dict() for row in failed])

    def to_text(self) -> str:
        width = max([len(row.check) for row in self.rows] + [len('check')])
        lines = [f"{'check'.ljust(width)}  instances  worst_margin            status  witness"]
        for row in self.rows:
            status = 'pass' if row.passed else 'FAIL'
            lines.append(f"{row.check.ljust(width)}  {row.instances:>9d}  {row.worst_margin:>22.15e}  "
                         f"{status:<6}  {row.witness}")
        lines.append(f"overall: {'pass' if self.passed else 'FAIL'}")
        return '\n'.join(lines) + '\n'


def _row(check: str, margins: List[Tuple[float, str]]) -> LedgerRow:
    """Row from (margin, instance label) pairs; passes when no margin is negative"""
    worst, witness = min(margins, key=lambda item: item[0])
    passed = worst >= 0.0
    return LedgerRow(check=check, instances=len(margins), worst_margin=float(worst), passed=passed,
                     witness='' if passed else witness)


def _relative_slack(value: float) -> float:
    return 1e-12 * abs(value)


class LemmaSuiteExperiment(BaseExperiment):
    def __init__(self, runner: Optional[TrialRunner] = None):
        super().__init__("LemmaSuite", runner)

    def _rng(self, config: ExperimentConfig, row_index: int) -> np.random.Generator:
        return SeedSpec(config.master_seed, row_index).generator('monte_carlo')

    def check_poisson_tails(self, config: ExperimentConfig) -> LedgerRow:
        margins = []
        for lam in (5.0, 20.0):
            for sigma in (0.5, 1.0):
                upper_exact = stats.poisson.sf(math.ceil((1.0 + sigma) * lam) - 1, lam)
                upper = poisson_upper_tail(lam, sigma)
                margins.append((upper - upper_exact + _relative_slack(upper), f"upper lam={lam} sigma={sigma}"))
                lower_exact = stats.poisson.cdf(math.floor((1.0 - sigma) * lam), lam)
                lower = poisson_lower_tail(lam, sigma)
                margins.append((lower - lower_exact + _relative_slack(lower), f"lower lam={lam} sigma={sigma}"))
        return _row('poisson tail bounds', margins)

    def check_crude_tail(self, config: ExperimentConfig) -> LedgerRow:
        margins = []
        for x in np.linspace(0.0, 1.0, 101):
            value = math.exp(x - (1.0 + x) * math.log1p(x))
            bound = math.exp(-x * x / 10.0)
            margins.append((bound - value + _relative_slack(bound), f"x={x:.2f}"))
        return _row('crude poisson tail e^x/(1+x)^(1+x) <= e^(-x^2/10)', margins)

    def check_ball_difference(self, config: ExperimentConfig) -> LedgerRow:
        margins = []
        for n in (10, 20):
            radius = 1.0
            d = radius * n ** -0.6
            exact = Ball(n, radius).volume() - ball_overlap_volume(n, radius, d)
            bound = ball_symmetric_difference_bound(n, radius, d)
            margins.append((bound - exact, f"n={n} d={d:.6g}"))
        return _row('ball symmetric difference <= d vol(B^(n-1))', margins)

    def check_volume_layer(self, config: ExperimentConfig) -> List[LedgerRow]:
        rows = [
            _row('nu_2 = pi, nu_3 = 4pi/3', [
                (1e-12 - abs(nu_exact(2) - math.pi), 'n=2'),
                (1e-12 - abs(nu_exact(3) - 4.0 * math.pi / 3.0), 'n=3'),
            ]),
            _row('nu recursion identity', [(1e-12 - nu_recursion_residual(n), f"n={n}") for n in range(2, 101)]),
        ]
        gaps = [abs(nu_asymptotic(n) / nu_exact(n) - 1.0) for n in (10, 50, 100)]
        margins = [(0.05 - gap, f"n={n}") for n, gap in zip((10, 50, 100), gaps)]
        margins += [(gaps[i] - gaps[i + 1], f"step {i}") for i in range(len(gaps) - 1)]
        rows.append(_row('nu asymptotic within 5% and improving', margins))
        ratios = [(abs(ball_volume_ratio(n) - 1.0), n) for n in (10, 100, 1000)]
        rows.append(_row('ball volume ratio tends to 1', [
            (ratios[i][0] - ratios[i + 1][0], f"n={ratios[i + 1][1]}") for i in range(len(ratios) - 1)]))
        return rows

    def check_small_overlap(self, config: ExperimentConfig) -> LedgerRow:
        rng = self._rng(config, 1)
        isotropic = isotropic_constant(Cube(2, 1.0))
        margins = []
        for n in range(2, 9):
            found = 0
            while found < 100:
                x = rng.uniform(-1.0, 1.0, size=n)
                norm = float(np.linalg.norm(x))
                if norm < 4.0 * isotropic:
                    continue
                found += 1
                bound = small_overlap_bound(isotropic, norm)
                margins.append((bound - cube_overlap_volume(1.0, x), f"n={n} x={np.round(x, 6).tolist()}"))
        return _row('cube small-overlap bound', margins)

    def check_slab_tails(self, config: ExperimentConfig) -> LedgerRow:
        n = 6
        cube = Cube(n, 1.0)
        isotropic = isotropic_constant(cube)
        direction = self._rng(config, 2).standard_normal(n)
        margins = []
        for t in (1.0, 2.0, 3.0):
            seed = SeedSpec(config.master_seed, 100 + int(t)).stream_seed('monte_carlo')
            estimate, error = slab_tail_volume_mc(cube, SlabSpec(tuple(direction), 2.0 * t * isotropic),
                                                  config.mc_samples, seed)
            bound = math.sqrt(3.0) / 4.0 * 3.0 ** (-t / 2.0)
            margins.append((bound - estimate + 3.0 * error, f"t={t}"))
            if t == 1.0:
                margins.append((0.25 - estimate + 3.0 * error, 'markov t=1'))
        return _row('cube slab tails (markov and borell), 3 sigma', margins)

    def check_isotropic_mc(self, config: ExperimentConfig) -> LedgerRow:
        n = 6
        rng = self._rng(config, 3)
        points = Cube(n, 1.0).sample_uniform(config.mc_samples, rng)
        direction = rng.standard_normal(n)
        direction /= np.linalg.norm(direction)
        squares = (points @ direction) ** 2
        estimate = float(squares.mean())
        error = float(squares.std(ddof=1) / math.sqrt(len(squares)))
        target = isotropic_constant(Cube(n, 1.0)) ** 2
        return _row('cube isotropic constant by monte carlo, 3 sigma',
                    [(3.0 * error - abs(estimate - target), f"estimate={estimate:.6g} target={target:.6g}")])

    def check_amgm_chain(self, config: ExperimentConfig) -> LedgerRow:
        n = 9
        rng = self._rng(config, 4)
        floor = 2.0 * math.log(n)
        margins = []
        for _ in range(1000):
            total = rng.uniform(floor, float(n))
            spacings = rng.exponential(size=n)
            x = total * spacings / spacings.sum() * rng.choice((-1.0, 1.0), size=n)
            product = float(np.prod(np.maximum(1.0 - np.abs(x), 0.0)))
            middle = max((1.0 - np.abs(x).sum() / n) ** n, 0.0)
            chain_floor = (1.0 - floor / n) ** n
            label = f"x={np.round(x, 6).tolist()}"
            margins.append((middle - product + _relative_slack(middle), f"am-gm {label}"))
            margins.append((chain_floor - middle, f"monotone {label}"))
            margins.append((1.0 / (n * n) - chain_floor, 'n^-2'))
        return _row('cube am-gm chain at n=9', margins)

    def check_packing_counts(self, config: ExperimentConfig) -> LedgerRow:
        torus = config.build_torus()
        separation = config.build_body().circumradius()
        packing = greedy_maximal_packing(torus, separation, CandidateStream.grid(separation / 2.0),
                                         cap=config.probe_cap)
        # separation s packs balls of radius s/2 and its grid covering radius stays below 2s
        lower, upper = packing_cardinality_bounds(torus.volume, Ball(torus.n, separation))
        count = len(packing)
        return _row('greedy packing cardinality within volume bounds', [
            (count - lower, f"|P|={count} lower={lower:.6g}"),
            (upper - count, f"|P|={count} upper={upper:.6g}"),
        ])

    def check_constants(self, config: ExperimentConfig) -> LedgerRow:
        constants = analytic_constants(config.tolerance, config.delta)
        return _row('xi and xi0 roots and identity', [
            (config.tolerance - constants.xi_residual, 'xi residual'),
            (config.tolerance - constants.xi0_residual, 'xi0 residual'),
            (1e-9 - constants.xi0_identity_gap, 'xi0 = 2 xi - 1'),
            (5e-6 - abs(constants.xi - 1.79556), 'xi printed value'),
        ])

    def check_chain(self, config: ExperimentConfig) -> LedgerRow:
        found = chain_smallest_n(config.delta)
        margins = []
        for key in ('lower_chain_n', 'upper_chain_n'):
            value = found[key]
            margins.append((1.0 if value is not None else -1.0, f"{key} not found"))
        return _row('net-radius chains reach a finite n', margins)

    def check_second_moment_instances(self, config: ExperimentConfig) -> LedgerRow:
        empty = {'volumes': np.zeros(0), 'gaps': np.zeros((0, 1))}
        margins = []
        for load in (0.1, 0.5, 1.0, 2.0, 5.0):
            single = analytic_moments(1, load, 1.0, empty, 0.0, 0)
            q = math.exp(-load)
            margins.append((1e-15 - abs(single['expectation'] - q), f"E single load={load}"))
            margins.append((1e-15 - abs(single['variance'] - q * (1.0 - q)), f"Var single load={load}"))
            # P[B = 0] = 1 − q for a single target
            margins.append((second_moment_bound(q, q * (1.0 - q)) - (1.0 - q), f"bound single load={load}"))
            # two unit intervals at offset g: B = 2 exactly when their union holds no point
            for gap in (0.25, 0.6, 1.5):
                shared = cube_overlap_volume(1.0, [gap])
                p_two = math.exp(-load * (2.0 - shared))
                p_one = 2.0 * (q - p_two)
                p_zero = 1.0 - p_one - p_two
                pmf_mean = p_one + 2.0 * p_two
                pmf_variance = p_one + 4.0 * p_two - pmf_mean * pmf_mean
                overlaps = {'volumes': np.array([shared]), 'gaps': np.array([[gap]])}
                pair = analytic_moments(2, load, 1.0, overlaps, 1.0, 2)
                margins.append((1e-10 - abs(pair['variance'] - pmf_variance) / pmf_variance,
                                f"Var pair pmf load={load} gap={gap}"))
                margins.append((second_moment_bound(pmf_mean, pmf_variance) - p_zero,
                                f"bound pair pmf load={load} gap={gap}"))
        return _row('second-moment bernoulli instances', margins)

    def process(self, config: ExperimentConfig) -> LemmaLedger:
        self.logger.info("Starting inequality phase")
        checks: List[Callable[[ExperimentConfig], Any]] = [
            self.check_poisson_tails,
            self.check_crude_tail,
            self.check_ball_difference,
            self.check_volume_layer,
            self.check_small_overlap,
            self.check_slab_tails,
            self.check_isotropic_mc,
            self.check_amgm_chain,
            self.check_packing_counts,
            self.check_constants,
            self.check_chain,
            self.check_second_moment_instances,
        ]
        ledger = LemmaLedger()
        for check in checks:
            result = check(config)
            ledger.rows.extend(result if isinstance(result, list) else [result])
        for row in ledger.failures():
            self.logger.warning(f"Inequality check failed: {row.check} at {row.witness}")
        return ledger


def run_lemma_suite(config: ExperimentConfig, runner: Optional[TrialRunner] = None) -> LemmaLedger:
    return LemmaSuiteExperiment(runner).run(config)
