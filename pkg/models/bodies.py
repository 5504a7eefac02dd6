"""
Convex bodies centered at the origin: balls, cubes, cross-polytopes and ellipsoids.

Covers membership, exact volumes, translated-overlap volumes, difference bodies,
isotropic constants, slab tails and the closed-form overlap bounds built on them.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from config import Config
from utils.errors import InputError, NotIsotropicError, NumericError

BODY_KINDS = ('ball', 'cube', 'cross_polytope', 'ellipsoid')


def log_unit_ball_volume(n: int) -> float:
    """ln ν_n = (n/2) ln π − ln Γ(n/2 + 1); n = 0 gives 0 (point measure)"""
    if n < 0:
        raise InputError(f"dimension must be nonnegative, got {n}")
    return 0.5 * n * math.log(math.pi) - float(gammaln(0.5 * n + 1.0))


@dataclass(frozen=True)
class Body(ABC):
    n: int

    kind = 'body'

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InputError(f"body dimension must be a positive integer, got {self.n}", key='dimension')

    @abstractmethod
    def volume(self) -> float:
        pass

    @abstractmethod
    def circumradius(self) -> float:
        pass

    @abstractmethod
    def scaled(self, factor: float) -> 'Body':
        pass

    @abstractmethod
    def contains_many(self, points: np.ndarray) -> np.ndarray:
        """Membership of each row of an (m, n) array in the closed body"""
        pass

    def norm_ball(self) -> Optional[Tuple[float, float]]:
        """(norm order, radius) when the body is a ball of some ℓp norm"""
        return None

    def sample_uniform(self, count: int, rng: np.random.Generator) -> np.ndarray:
        raise InputError(f"uniform sampling is not available for {self.kind}")

    def describe(self) -> dict:
        return {'kind': self.kind, 'dimension': self.n}


@dataclass(frozen=True)
class Ball(Body):
    radius: float = 1.0

    kind = 'ball'

    def __post_init__(self):
        super().__post_init__()
        if not self.radius > 0 or not math.isfinite(self.radius):
            raise InputError(f"ball radius must be positive, got {self.radius}", key='radius')

    def volume(self) -> float:
        return math.exp(log_unit_ball_volume(self.n) + self.n * math.log(self.radius))

    def circumradius(self) -> float:
        return self.radius

    def scaled(self, factor: float) -> 'Ball':
        return Ball(self.n, self.radius * factor)

    def contains_many(self, points: np.ndarray) -> np.ndarray:
        return np.linalg.norm(points, axis=-1) <= self.radius

    def norm_ball(self):
        return 2.0, self.radius

    def sample_uniform(self, count, rng):
        directions = rng.standard_normal((count, self.n))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = self.radius * rng.random(count) ** (1.0 / self.n)
        return directions * radii[:, None]

    def describe(self):
        return {'kind': self.kind, 'dimension': self.n, 'radius': self.radius}


@dataclass(frozen=True)
class Cube(Body):
    side: float = 1.0

    kind = 'cube'

    def __post_init__(self):
        super().__post_init__()
        if not self.side > 0 or not math.isfinite(self.side):
            raise InputError(f"cube side must be positive, got {self.side}", key='side')

    def volume(self) -> float:
        return self.side ** self.n

    def circumradius(self) -> float:
        return 0.5 * self.side * math.sqrt(self.n)

    def scaled(self, factor: float) -> 'Cube':
        return Cube(self.n, self.side * factor)

    def contains_many(self, points):
        return np.max(np.abs(points), axis=-1) <= 0.5 * self.side

    def norm_ball(self):
        return np.inf, 0.5 * self.side

    def sample_uniform(self, count, rng):
        return (rng.random((count, self.n)) - 0.5) * self.side

    def describe(self):
        return {'kind': self.kind, 'dimension': self.n, 'side': self.side}


@dataclass(frozen=True)
class CrossPolytope(Body):
    l1_radius: float = 1.0

    kind = 'cross_polytope'

    def __post_init__(self):
        super().__post_init__()
        if not self.l1_radius > 0 or not math.isfinite(self.l1_radius):
            raise InputError(f"cross-polytope radius must be positive, got {self.l1_radius}", key='l1_radius')

    def volume(self) -> float:
        # (2a)^n / n!
        return math.exp(self.n * math.log(2.0 * self.l1_radius) - float(gammaln(self.n + 1.0)))

    def circumradius(self) -> float:
        return self.l1_radius

    def scaled(self, factor: float) -> 'CrossPolytope':
        return CrossPolytope(self.n, self.l1_radius * factor)

    def contains_many(self, points):
        return np.sum(np.abs(points), axis=-1) <= self.l1_radius

    def norm_ball(self):
        return 1.0, self.l1_radius

    def sample_uniform(self, count, rng):
        spacings = rng.standard_exponential((count, self.n + 1))
        simplex = spacings[:, :self.n] / spacings.sum(axis=1, keepdims=True)
        signs = rng.choice(np.array([-1.0, 1.0]), size=(count, self.n))
        return self.l1_radius * simplex * signs

    def describe(self):
        return {'kind': self.kind, 'dimension': self.n, 'l1_radius': self.l1_radius}


@dataclass(frozen=True)
class Ellipsoid(Body):
    semi_axes: Tuple[float, ...] = field(default=())

    kind = 'ellipsoid'

    def __post_init__(self):
        object.__setattr__(self, 'semi_axes', tuple(float(a) for a in self.semi_axes))
        super().__post_init__()
        if len(self.semi_axes) != self.n:
            raise InputError(f"ellipsoid needs {self.n} semi-axes, got {len(self.semi_axes)}", key='semi_axes')
        if any(not a > 0 or not math.isfinite(a) for a in self.semi_axes):
            raise InputError(f"semi-axes must be positive, got {self.semi_axes}", key='semi_axes')

    def volume(self) -> float:
        return math.exp(log_unit_ball_volume(self.n) + sum(math.log(a) for a in self.semi_axes))

    def circumradius(self) -> float:
        return max(self.semi_axes)

    def scaled(self, factor: float) -> 'Ellipsoid':
        return Ellipsoid(self.n, tuple(a * factor for a in self.semi_axes))

    def contains_many(self, points):
        axes = np.asarray(self.semi_axes)
        return np.sum((points / axes) ** 2, axis=-1) <= 1.0

    def sample_uniform(self, count, rng):
        unit = Ball(self.n, 1.0).sample_uniform(count, rng)
        return unit * np.asarray(self.semi_axes)

    def describe(self):
        return {'kind': self.kind, 'dimension': self.n, 'semi_axes': list(self.semi_axes)}


@dataclass(frozen=True)
class SlabSpec:
    """The slab S_x(w) = {y : |<y, x/|x|>| < w}"""
    direction: Tuple[float, ...]
    half_width: float

    def __post_init__(self):
        object.__setattr__(self, 'direction', tuple(float(v) for v in self.direction))
        if not np.linalg.norm(self.direction) > 0:
            raise InputError("slab direction must be a nonzero vector")
        if self.half_width < 0:
            raise InputError(f"slab half-width must be nonnegative, got {self.half_width}")

    def unit_direction(self) -> np.ndarray:
        direction = np.asarray(self.direction)
        return direction / np.linalg.norm(direction)

    def contains_many(self, points: np.ndarray) -> np.ndarray:
        return np.abs(points @ self.unit_direction()) < self.half_width


def body_from_spec(kind: str, n: int, radius: Optional[float] = None, side: Optional[float] = None,
                   l1_radius: Optional[float] = None,
                   semi_axes: Optional[Sequence[float]] = None) -> Body:
    """Build a body from its configuration record"""
    if kind == 'ball':
        if radius is None:
            raise InputError("ball body needs 'radius'", key='radius')
        return Ball(n, float(radius))
    if kind == 'cube':
        if side is None:
            raise InputError("cube body needs 'side'", key='side')
        return Cube(n, float(side))
    if kind == 'cross_polytope':
        if l1_radius is None:
            raise InputError("cross-polytope body needs 'l1_radius'", key='l1_radius')
        return CrossPolytope(n, float(l1_radius))
    if kind == 'ellipsoid':
        if semi_axes is None:
            raise InputError("ellipsoid body needs 'semi_axes'", key='semi_axes')
        return Ellipsoid(n, tuple(semi_axes))
    raise InputError(f"unknown body kind '{kind}', expected one of {', '.join(BODY_KINDS)}", key='body')


def _as_point(body: Body, point) -> np.ndarray:
    point = np.asarray(point, dtype=float)
    if point.shape[-1:] != (body.n,):
        raise InputError(f"point dimension {point.shape[-1:]} does not match body dimension {body.n}")
    return point


def contains(body: Body, point) -> bool:
    return bool(body.contains_many(_as_point(body, point)[None, :])[0])


def volume(body: Body) -> float:
    return body.volume()


def circumradius(body: Body) -> float:
    return body.circumradius()


def difference_body(body: Body) -> Body:
    """K − K, which is 2K for every supported (centrally symmetric) variant"""
    return body.scaled(2.0)


def cube_overlap_volume(side: float, offset) -> float:
    """vol(C ∩ (C + offset)) for the cube of the given side centered at the origin"""
    gaps = side - np.abs(np.asarray(offset, dtype=float))
    return float(np.prod(np.maximum(gaps, 0.0)))


def ball_overlap_volume(n: int, radius: float, center_distance: float,
                        tolerance: Optional[float] = None) -> float:
    """vol(B_r(0) ∩ B_r(x)) with |x| = center_distance, by 1-D quadrature over cap slices"""
    if center_distance < 0:
        raise InputError(f"center distance must be nonnegative, got {center_distance}")
    full = Ball(n, radius).volume()
    if center_distance == 0:
        return full
    if center_distance >= 2.0 * radius:
        return 0.0
    if n == 1:
        return 2.0 * radius - center_distance

    tolerance = Config.QUAD_TOLERANCE if tolerance is None else tolerance
    # slices of the lens: 2 ν_{n−1} r^n ∫_{d/2r}^1 (1 − u²)^{(n−1)/2} du
    scale = 2.0 * math.exp(log_unit_ball_volume(n - 1) + n * math.log(radius))
    exponent = 0.5 * (n - 1)
    lower = center_distance / (2.0 * radius)
    abs_tolerance = tolerance * full / scale
    value, error = integrate.quad(lambda u: (1.0 - u * u) ** exponent, lower, 1.0,
                                  epsabs=abs_tolerance, epsrel=0.0, limit=200)
    if error > abs_tolerance:
        raise NumericError(f"ball overlap quadrature did not converge at n={n}, d={center_distance}",
                           achieved_tolerance=error * scale / full)
    return float(min(max(scale * value, 0.0), full))


def ball_symmetric_difference_bound(n: int, radius: float, center_distance: float) -> float:
    """d · vol(B_r^{n−1}), which dominates vol(B_r(x₁) \\ B_r(x₂)); vol(B^0) is taken as 1"""
    if center_distance < 0:
        raise InputError(f"center distance must be nonnegative, got {center_distance}")
    if n == 1:
        return float(center_distance)
    return center_distance * Ball(n - 1, radius).volume()


def unit_volume(body: Body) -> Body:
    """Rescale a body to volume one"""
    return body.scaled(body.volume() ** (-1.0 / body.n))


def isotropic_constant(body: Body) -> float:
    """L_K of the body rescaled to volume one, in closed form"""
    n = body.n
    if isinstance(body, Cube):
        return 1.0 / math.sqrt(12.0)
    if isinstance(body, Ball):
        # r_n = ν_n^{−1/n}, L² = r_n²/(n + 2)
        log_r = -log_unit_ball_volume(n) / n
        return math.exp(log_r) / math.sqrt(n + 2.0)
    if isinstance(body, CrossPolytope):
        # volume one at a = (n!)^{1/n}/2, second moment 2a²/((n+1)(n+2))
        log_a = float(gammaln(n + 1.0)) / n - math.log(2.0)
        return math.exp(log_a) * math.sqrt(2.0 / ((n + 1.0) * (n + 2.0)))
    if isinstance(body, Ellipsoid):
        normalized = unit_volume(body)
        moments = [a * a / (n + 2.0) for a in normalized.semi_axes]
        if not np.allclose(moments, moments[0], rtol=1e-12, atol=0.0):
            raise NotIsotropicError("ellipsoid is not in isotropic position", moments)
        return math.sqrt(moments[0])
    raise InputError(f"no isotropic constant for {body.kind}")


def small_overlap_bound(isotropic: float, offset_norm: float) -> float:
    """3^{−|x|/(8L)}, asserted only for |x| ≥ 4L"""
    if isotropic <= 0:
        raise InputError(f"isotropic constant must be positive, got {isotropic}")
    if offset_norm < 4.0 * isotropic:
        raise InputError(f"offset norm {offset_norm} is below 4L = {4.0 * isotropic}; "
                         "the small-overlap bound is not asserted there")
    return 3.0 ** (-offset_norm / (8.0 * isotropic))


def slab_tail_volume_mc(body: Body, slab: SlabSpec, sample_count: int, seed: int) -> Tuple[float, float]:
    """Monte-Carlo estimate of vol(K \\ S) with its binomial standard error"""
    if sample_count < 10_000:
        raise InputError(f"slab tail estimates need at least 10^4 samples, got {sample_count}")
    if len(slab.direction) != body.n:
        raise InputError(f"slab direction has dimension {len(slab.direction)}, body has {body.n}")
    rng = np.random.default_rng(seed)
    points = body.sample_uniform(sample_count, rng)
    outside = ~slab.contains_many(points)
    fraction = float(outside.mean())
    body_volume = body.volume()
    std_error = math.sqrt(fraction * (1.0 - fraction) / sample_count)
    return fraction * body_volume, std_error * body_volume
