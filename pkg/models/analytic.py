"""
Closed-form layer: the constants ξ and ξ₀, β(δ), unit-ball volumes, Poisson tail
bounds, construction intensities, packing-cardinality bounds and the second-moment
inequality.

Asymptotic formulas are evaluated at finite n with their o(1) terms dropped; the
records returned here label them as such.
"""

import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Tuple

from scipy import optimize
from scipy.special import gammaln

from config import Config
from models.bodies import Body, log_unit_ball_volume
from utils.errors import InputError, NumericError

ASYMPTOTIC_LABEL = 'asymptotic, error unquantified'


def _xi_residual(x: float) -> float:
    return math.log(2.0 * x / math.e) - 1.0 / (2.0 * x)


def _xi0_residual(x: float) -> float:
    # log form of e^x/(1+x)^{1+x} = e^{−2}
    return x - (1.0 + x) * math.log1p(x) + 2.0


def _bracketed_root(residual, lower: float, upper: float, tolerance: float, name: str) -> float:
    if tolerance < 1e-14:
        raise InputError(f"root tolerance must be at least 1e-14, got {tolerance}", key='tolerance')
    if residual(lower) * residual(upper) >= 0:
        raise NumericError(f"{name} residual does not change sign on [{lower}, {upper}]")
    root = optimize.brentq(residual, lower, upper, xtol=tolerance / 4.0, rtol=1e-15,
                           maxiter=200)
    # polish with Newton steps on the bracket when the residual is above tolerance
    for _ in range(8):
        value = residual(root)
        if abs(value) <= tolerance:
            return root
        step = 1e-7 * max(1.0, abs(root))
        slope = (residual(root + step) - residual(root - step)) / (2.0 * step)
        root = min(max(root - value / slope, lower), upper)
    value = residual(root)
    if abs(value) > tolerance:
        raise NumericError(f"{name} root residual above tolerance", achieved_tolerance=abs(value))
    return root


def solve_xi(tolerance: float = Config.ROOT_TOLERANCE) -> float:
    """Root of ln(2x/e) = 1/(2x) on [1, 3]"""
    return _bracketed_root(_xi_residual, 1.0, 3.0, tolerance, 'xi')


def solve_xi0(tolerance: float = Config.ROOT_TOLERANCE) -> float:
    """Root of e^x/(1+x)^{1+x} = e^{−2} on [2, 3]"""
    return _bracketed_root(_xi0_residual, 2.0, 3.0, tolerance, 'xi0')


def _beta_margin(beta: float, delta: float) -> float:
    return (1.0 + 0.5 * delta) * (beta - 1.0 - beta * math.log(beta)) + 1.0


def choose_beta(delta: float) -> float:
    """Largest β in (0,1) with (1 + δ/2)(β − 1 − β ln β) ≤ −1"""
    if not 0.0 < delta < 1.0:
        raise InputError(f"delta must lie in (0, 1), got {delta}", key='delta')
    # the margin is increasing in β, negative near 0 and positive at 1
    lower, upper = 1e-300, 1.0 - 1e-15
    beta = optimize.brentq(lambda b: _beta_margin(b, delta), lower, upper, xtol=1e-300, rtol=1e-15, maxiter=500)
    while _beta_margin(beta, delta) > 0:
        beta = math.nextafter(beta, 0.0)
    if abs(_beta_margin(beta, delta)) > 1e-10:
        raise NumericError(f"beta residual above 1e-10 at delta={delta}",
                           achieved_tolerance=abs(_beta_margin(beta, delta)))
    return beta


@dataclass(frozen=True)
class AnalyticConstants:
    xi: float
    xi0: float
    beta: Optional[float]
    delta: Optional[float]
    tolerance: float
    xi_residual: float
    xi0_residual: float
    xi0_identity_gap: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def analytic_constants(tolerance: float = Config.ROOT_TOLERANCE, delta: Optional[float] = None) -> AnalyticConstants:
    xi = solve_xi(tolerance)
    xi0 = solve_xi0(tolerance)
    beta = choose_beta(delta) if delta is not None else None
    return AnalyticConstants(
        xi=xi,
        xi0=xi0,
        beta=beta,
        delta=delta,
        tolerance=tolerance,
        xi_residual=abs(_xi_residual(xi)),
        xi0_residual=abs(_xi0_residual(xi0)),
        xi0_identity_gap=abs(xi0 - (2.0 * xi - 1.0)),
    )


def _check_dimension(n: int):
    if int(n) != n or n < 1:
        raise InputError(f"dimension must be a positive integer, got {n}", key='dimension')


def log_nu_exact(n: int) -> float:
    _check_dimension(n)
    return log_unit_ball_volume(n)


def nu_exact(n: int) -> float:
    """ν_n = π^{n/2}/Γ(n/2 + 1), evaluated in log space"""
    return math.exp(log_nu_exact(n))


def log_nu_asymptotic(n: int) -> float:
    _check_dimension(n)
    return 0.5 * n * math.log(2.0 * math.pi * math.e) - 0.5 * math.log(math.pi * n) - 0.5 * n * math.log(n)


def nu_asymptotic(n: int) -> float:
    """(2πe)^{n/2}/√(πn) · n^{−n/2}"""
    return math.exp(log_nu_asymptotic(n))


def poisson_upper_tail(lam: float, sigma: float) -> float:
    """Bound (e^σ/(1+σ)^{1+σ})^λ on P[X ≥ (1+σ)λ]"""
    if not lam > 0:
        raise InputError(f"lambda must be positive, got {lam}")
    if not sigma >= 0:
        raise InputError(f"upper-tail sigma must be nonnegative, got {sigma}")
    return math.exp(lam * (sigma - (1.0 + sigma) * math.log1p(sigma)))


def poisson_lower_tail(lam: float, sigma: float) -> float:
    """Bound (e^{−σ}/(1−σ)^{1−σ})^λ on P[X ≤ (1−σ)λ]"""
    if not lam > 0:
        raise InputError(f"lambda must be positive, got {lam}")
    if not 0.0 < sigma <= 1.0:
        raise InputError(f"lower-tail sigma must lie in (0, 1), got {sigma}")
    if sigma == 1.0:
        return math.exp(-lam)
    return math.exp(lam * (-sigma - (1.0 - sigma) * math.log1p(-sigma)))


def count_concentration_bound(lam: float, delta: float) -> Dict[str, float]:
    """Failure bounds for the event |X| ≤ (1+δ)λ"""
    return {
        'tail_bound': poisson_upper_tail(lam, delta),
        'crude_bound': math.exp(-delta * delta * lam / 10.0),
    }


def hypercube_target_intensity(packing_count: int, torus_volume: float) -> float:
    """ρ = ln|P| − ln vol(T), the intensity at which E[B] = vol(T)"""
    if not packing_count > torus_volume:
        raise InputError(f"hypercube intensity needs |P| > vol(T), got |P|={packing_count}, vol(T)={torus_volume}")
    return math.log(packing_count) - math.log(torus_volume)


def isotropic_target_intensity(packing_count: int, n: int, omega: float = 1.0) -> float:
    """ρ = ln|P| − n(ln ln ln|P| + ω)"""
    if not packing_count > math.exp(math.e):
        raise InputError(f"isotropic intensity needs |P| > e^e, got {packing_count}")
    return math.log(packing_count) - n * (math.log(math.log(math.log(packing_count))) + omega)


def intensity_formulas(n: int, delta: float, body_volume: float, packing_count: Optional[int] = None,
                       torus_volume: Optional[float] = None, omega: float = 1.0) -> Dict[str, Any]:
    """Intensities of the ball upper bound and the general, cube and isotropic lower bounds"""
    if int(n) != n or n < 3:
        raise InputError(f"intensity formulas need n >= 3 so that ln ln n > 0, got {n}", key='dimension')
    if not 0.0 < delta < 1.0:
        raise InputError(f"upper-bound intensity needs 0 < delta < 1, got {delta}", key='delta')
    if not body_volume > 0:
        raise InputError(f"body volume must be positive, got {body_volume}")
    n_log_n = n * math.log(n)
    n_loglog_n = n * math.log(math.log(n))
    record = {
        'n': n,
        'delta': delta,
        'upper_ball': (0.5 + delta) * n_log_n / nu_exact(n),
        'lower_general': (0.5 * n_log_n - (1.0 + delta) * n_loglog_n) / body_volume,
        'lower_cube': n_log_n - (1.0 + delta) * n_loglog_n,
        'lower_isotropic': None,
        'hypercube_targets': None,
        'label': ASYMPTOTIC_LABEL,
    }
    if packing_count is not None:
        record['lower_isotropic'] = isotropic_target_intensity(packing_count, n, omega)
        if torus_volume is not None:
            record['hypercube_targets'] = hypercube_target_intensity(packing_count, torus_volume)
    return record


def packing_cardinality_bounds(torus_volume: float, body: Body) -> Tuple[float, float]:
    """(vol(T)/vol(2K), vol(T)/vol(K/2)) for a maximal packing of K/2 translates"""
    if not torus_volume > 0:
        raise InputError(f"torus volume must be positive, got {torus_volume}")
    return torus_volume / body.scaled(2.0).volume(), torus_volume / body.scaled(0.5).volume()


def second_moment_bound(expectation: float, variance: float) -> float:
    """P[X = 0] ≤ Var[X]/E[X]²"""
    if not expectation > 0:
        raise InputError(f"expectation must be positive, got {expectation}")
    if variance < 0:
        raise InputError(f"variance must be nonnegative, got {variance}")
    return variance / (expectation * expectation)


def net_radii(n: int, delta: float, radius: float = 1.0) -> Tuple[float, float]:
    """(ε, μ) = (r/(n ln n), r·n^{−1/2−δ/4})"""
    if n < 2:
        raise InputError(f"net radii need n >= 2, got {n}", key='dimension')
    return radius / (n * math.log(n)), radius * n ** (-0.5 - 0.25 * delta)


def saturation_threshold(beta: float, n: int) -> float:
    return 0.5 * beta * n * math.log(n)


def multiplicity_ceiling(delta: float, n: int, xi: Optional[float] = None) -> float:
    """(ξ + 10δ) n ln n"""
    xi = solve_xi() if xi is None else xi
    return (xi + 10.0 * delta) * n * math.log(n)


def density_ceiling(delta: float, n: int) -> float:
    """(1/2 + 2δ) n ln n"""
    return (0.5 + 2.0 * delta) * n * math.log(n)


def _lower_chain_holds(n: int, delta: float) -> bool:
    eps = 1.0 / (n * math.log(n))
    return (2.0 / (2.0 + delta)) * (0.5 + delta) * math.exp(n * math.log1p(-eps)) >= 0.5 + delta / 3.0


def _upper_chain_holds(n: int, delta: float) -> bool:
    eps = 1.0 / (n * math.log(n))
    return (0.5 + delta) * math.exp(n * math.log1p(eps)) <= 0.5 + 2.0 * delta


def _smallest_n(holds, delta: float, n_limit: int) -> Optional[int]:
    # both chains are monotone in n: find a true point, then bisect
    if holds(2, delta):
        return 2
    upper = 4
    while not holds(upper, delta):
        if upper >= n_limit:
            return None
        upper = min(upper * 2, n_limit)
    lower = upper // 2
    while upper - lower > 1:
        middle = (lower + upper) // 2
        if holds(middle, delta):
            upper = middle
        else:
            lower = middle
    return upper


def chain_smallest_n(delta: float, n_limit: int = 10 ** 300) -> Dict[str, Optional[int]]:
    """Smallest n at which the two (1 ± ε)^n chains of the ball construction hold"""
    if not 0.0 < delta < 1.0:
        raise InputError(f"delta must lie in (0, 1), got {delta}", key='delta')
    return {
        'delta': delta,
        'lower_chain_n': _smallest_n(_lower_chain_holds, delta, n_limit),
        'upper_chain_n': _smallest_n(_upper_chain_holds, delta, n_limit),
    }


def ball_volume_ratio(n: int, radius: float = 1.0) -> float:
    """vol(B_r^{n−1})/vol(B_r^n) · r√(2π)/√n, which tends to 1"""
    _check_dimension(n)
    log_ratio = log_unit_ball_volume(n - 1) - log_unit_ball_volume(n) - math.log(radius)
    return math.exp(log_ratio) * radius * math.sqrt(2.0 * math.pi) / math.sqrt(n)


def nu_recursion_residual(n: int) -> float:
    """Relative gap between ν_n and ν_{n−1}·√π·Γ((n+1)/2)/Γ(n/2+1)"""
    if n < 2:
        raise InputError(f"recursion starts at n = 2, got {n}")
    log_rhs = (log_nu_exact(n - 1) + 0.5 * math.log(math.pi)
               + float(gammaln(0.5 * (n + 1))) - float(gammaln(0.5 * n + 1.0)))
    return abs(math.expm1(log_rhs - log_nu_exact(n)))
