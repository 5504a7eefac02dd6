"""
Flat tori over rectangular lattices: reduction to the fundamental domain, the
quotient metric, packing-torus checks, probe nets, greedy maximal packings and the
nearest-point assignment between packings.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from config import Config
from models.bodies import Body, difference_body
from utils.errors import InputError, ResourceError

logger = logging.getLogger(__name__)

NORM_ORDERS = {'l1': 1.0, 'l2': 2.0, 'linf': np.inf}


def norm_order(norm: str) -> float:
    try:
        return NORM_ORDERS[norm]
    except KeyError:
        raise InputError(f"unknown norm '{norm}', expected one of {', '.join(NORM_ORDERS)}")


def norm_slack_factor(body_order: float, net_order: float, n: int) -> float:
    """max |v|_p over |v|_q ≤ 1: how far a q-ball of radius 1 reaches in the body norm p"""
    if body_order >= net_order:
        return 1.0
    inverse = (0.0 if net_order == np.inf else 1.0 / net_order) - 1.0 / body_order
    return n ** (-inverse)


@dataclass(frozen=True)
class Lattice:
    """Rectangular lattice diag(c_1, ..., c_n) Z^n"""
    side_lengths: Tuple[float, ...]

    def __post_init__(self):
        sides = tuple(float(c) for c in self.side_lengths)
        object.__setattr__(self, 'side_lengths', sides)
        if not sides:
            raise InputError("a lattice needs at least one side length", key='torus_sides')
        if any(not c > 0 or not math.isfinite(c) for c in sides):
            raise InputError(f"lattice side lengths must be positive, got {sides}", key='torus_sides')

    @property
    def n(self) -> int:
        return len(self.side_lengths)

    @property
    def determinant(self) -> float:
        return float(np.prod(self.side_lengths))


@dataclass(frozen=True)
class Torus:
    lattice: Lattice

    @classmethod
    def from_sides(cls, sides: Sequence[float]) -> 'Torus':
        return cls(Lattice(tuple(sides)))

    @property
    def n(self) -> int:
        return self.lattice.n

    @property
    def sides(self) -> np.ndarray:
        return np.asarray(self.lattice.side_lengths)

    @property
    def volume(self) -> float:
        return self.lattice.determinant

    @property
    def half_min_side(self) -> float:
        return 0.5 * min(self.lattice.side_lengths)

    def diameter(self, norm: str = 'l2') -> float:
        return float(np.linalg.norm(0.5 * self.sides, ord=norm_order(norm)))

    def check_dimension(self, points: np.ndarray):
        if points.shape[-1] != self.n:
            raise InputError(f"point dimension {points.shape[-1]} does not match torus dimension {self.n}")


def reduce(torus: Torus, point) -> np.ndarray:
    """Canonical representative in ∏[0, c_i)"""
    point = np.asarray(point, dtype=float)
    torus.check_dimension(point)
    sides = torus.sides
    reduced = np.mod(point, sides)
    # np.mod can round tiny negatives up to the side itself
    return np.where(reduced >= sides, reduced - sides, reduced)


def minimal_image(torus: Torus, difference) -> np.ndarray:
    """Per-axis shortest representative of a difference vector, components in [−c_i/2, c_i/2]"""
    difference = np.asarray(difference, dtype=float)
    sides = torus.sides
    return difference - sides * np.rint(difference / sides)


def torus_distance(torus: Torus, x, y, norm: str = 'l2') -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    torus.check_dimension(x)
    torus.check_dimension(y)
    return float(np.linalg.norm(minimal_image(torus, x - y), ord=norm_order(norm)))


def _lifts(torus: Torus, vector: np.ndarray, reach: float) -> np.ndarray:
    """All vector + λ with λ in the lattice and |vector + λ|_∞ ≤ reach"""
    sides = torus.sides
    ranges = []
    for i in range(torus.n):
        lo = math.ceil((-reach - vector[i]) / sides[i])
        hi = math.floor((reach - vector[i]) / sides[i])
        ranges.append(range(lo, hi + 1))
    shifts = np.array(list(itertools.product(*ranges)), dtype=float).reshape(-1, torus.n)
    return vector + shifts * sides


def is_packing_torus(torus: Torus, body: Body) -> bool:
    """True iff the lattice translates of the body are pairwise disjoint"""
    if body.n != torus.n:
        raise InputError(f"body dimension {body.n} does not match torus dimension {torus.n}")
    # K ∩ (K + λ) ≠ ∅ iff λ ∈ K − K
    doubled = difference_body(body)
    candidates = _lifts(torus, np.zeros(torus.n), doubled.circumradius())
    nonzero = np.any(candidates != 0.0, axis=1)
    if not np.any(nonzero):
        return True
    return not bool(np.any(doubled.contains_many(candidates[nonzero])))


def overlapping_lifts(torus: Torus, body: Body, difference) -> np.ndarray:
    """Lattice lifts q of a difference vector with body ∩ (body + q) ≠ ∅"""
    difference = minimal_image(torus, np.asarray(difference, dtype=float))
    doubled = difference_body(body)
    candidates = _lifts(torus, difference, doubled.circumradius())
    return candidates[doubled.contains_many(candidates)]


@dataclass(frozen=True)
class ProbeNet:
    """Axis-aligned grid with a certified covering radius, materialized on demand"""
    torus: Torus
    shape: Tuple[int, ...]
    covering_radius: float
    norm: str
    requested_radius: float

    @property
    def cardinality(self) -> int:
        return int(np.prod(self.shape, dtype=object))

    @property
    def spacing(self) -> np.ndarray:
        return self.torus.sides / np.asarray(self.shape, dtype=float)

    def coordinates(self, indices: np.ndarray) -> np.ndarray:
        """Coordinates of grid points given an (m, n) array of integer indices"""
        shape = np.asarray(self.shape, dtype=float)
        return self.torus.sides * (np.asarray(indices, dtype=float) / shape)

    def box_points(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Grid points with lo ≤ index < hi, in C order"""
        axes = [np.arange(lo[i], hi[i]) for i in range(self.torus.n)]
        mesh = np.meshgrid(*axes, indexing='ij')
        indices = np.stack([m.ravel() for m in mesh], axis=1)
        return self.coordinates(indices)

    def box_center(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        return self.torus.sides * ((lo + hi - 1) / 2.0) / np.asarray(self.shape, dtype=float)

    def box_radius(self, lo: np.ndarray, hi: np.ndarray) -> float:
        """Net-norm radius of a ball around the box center covering every probe cell in the box"""
        half_extent = (hi - lo - 1) / 2.0 * self.spacing
        return float(np.linalg.norm(half_extent, ord=norm_order(self.norm))) + self.covering_radius

    def iter_chunks(self, chunk_size: int = 65536) -> Iterator[np.ndarray]:
        total = self.cardinality
        shape = self.shape
        for start in range(0, total, chunk_size):
            flat = np.arange(start, min(start + chunk_size, total))
            indices = np.stack(np.unravel_index(flat, shape), axis=1)
            yield self.coordinates(indices)

    def points(self, cap: Optional[int] = None) -> np.ndarray:
        cap = Config.PROBE_CAP if cap is None else cap
        if self.cardinality > cap:
            raise ResourceError(f"materializing {self.cardinality} probes exceeds the cap of {cap}; "
                                "raise probe_cap or use a coarser net")
        return np.concatenate(list(self.iter_chunks()), axis=0) if self.cardinality else np.zeros((0, self.torus.n))

    def point_set(self, cap: Optional[int] = None):
        from models.sampling import PointSet
        return PointSet(self.torus, self.points(cap))


def _grid_shape(torus: Torus, h: float, norm: str) -> Tuple[int, ...]:
    if h >= torus.diameter(norm):
        return (1,) * torus.n
    spacing = 2.0 * h / math.sqrt(torus.n) if norm == 'l2' else 2.0 * h
    # shave a relative ulp so exact divisions do not gain a row
    return tuple(max(1, math.ceil(c / spacing * (1.0 - 1e-12))) for c in torus.lattice.side_lengths)


def build_probe_net(torus: Torus, h: float, norm: str = 'l2', cap: Optional[int] = None) -> ProbeNet:
    if not h > 0:
        raise InputError(f"net radius must be positive, got {h}", key='net_radius')
    if norm not in ('l2', 'linf'):
        raise InputError(f"probe nets certify l2 or linf radii, got '{norm}'")
    cap = Config.PROBE_CAP if cap is None else cap
    shape = _grid_shape(torus, h, norm)
    cardinality = int(np.prod(shape, dtype=object))
    if cardinality > cap:
        raise ResourceError(f"probe net of radius {h} needs {cardinality} points, above the cap of {cap}; "
                            f"set probe_cap >= {cardinality} or increase net_radius")
    spacing = torus.sides / np.asarray(shape, dtype=float)
    covering = float(np.linalg.norm(spacing / 2.0, ord=norm_order(norm)))
    logger.debug(f"Probe net {shape} ({norm}) with covering radius {covering:.6g}")
    return ProbeNet(torus=torus, shape=shape, covering_radius=covering, norm=norm, requested_radius=h)


def default_net_radius(torus: Torus, body: Body, norm: str = 'l2', cap: Optional[int] = None) -> float:
    """min(0.02, circumradius/10), coarsened only as far as the probe cap requires"""
    cap = Config.PROBE_CAP if cap is None else cap
    h = min(0.02, body.circumradius() / 10.0)
    factor = math.sqrt(torus.n) / 2.0 if norm == 'l2' else 0.5
    # smallest h with ∏ ceil(c_i / s) ≤ cap, grown geometrically
    while int(np.prod(_grid_shape(torus, h, norm), dtype=object)) > cap:
        h = max(h * 1.05, factor * float(np.prod(torus.sides)) ** (1.0 / torus.n) / cap ** (1.0 / torus.n))
    return h


@dataclass(frozen=True)
class CandidateStream:
    """Order in which greedy packing considers candidate points"""
    kind: str
    step: Optional[float] = None
    seed: Optional[int] = None
    count: Optional[int] = None

    @classmethod
    def grid(cls, step: float) -> 'CandidateStream':
        if not step > 0:
            raise InputError(f"grid step must be positive, got {step}", key='target_step')
        return cls('grid', step=step)

    @classmethod
    def seeded_uniform(cls, seed: int, count: int) -> 'CandidateStream':
        if count < 1:
            raise InputError(f"uniform candidate stream needs a positive count, got {count}")
        return cls('seeded_uniform', seed=seed, count=count)

    def grid_shape(self, torus: Torus) -> Tuple[int, ...]:
        return tuple(max(1, math.ceil(c / self.step * (1.0 - 1e-12))) for c in torus.lattice.side_lengths)

    def size(self, torus: Torus) -> int:
        if self.kind == 'grid':
            return int(np.prod(self.grid_shape(torus), dtype=object))
        return int(self.count)

    def chunks(self, torus: Torus, chunk_size: int = 65536) -> Iterator[np.ndarray]:
        if self.kind == 'grid':
            shape = self.grid_shape(torus)
            grid = ProbeNet(torus, shape, 0.0, 'linf', 0.0)
            yield from grid.iter_chunks(chunk_size)
            return
        from models.sampling import SeedSpec
        rng = SeedSpec(self.seed, 0).generator('candidates')
        remaining = int(self.count)
        while remaining > 0:
            size = min(chunk_size, remaining)
            yield reduce(torus, rng.random((size, torus.n)) * torus.sides)
            remaining -= size


def grid_covering_slack(torus: Torus, step_shape: Tuple[int, ...], norm: str) -> float:
    """How far any torus point can be from the nearest grid candidate, in the given norm"""
    spacing = torus.sides / np.asarray(step_shape, dtype=float)
    return float(np.linalg.norm(spacing / 2.0, ord=norm_order(norm)))


def greedy_maximal_packing(torus: Torus, separation: float, stream: CandidateStream, norm: str = 'l2',
                           cap: Optional[int] = None):
    """Accept each candidate whose torus distance to every accepted point exceeds the separation"""
    from models.sampling import PointSet

    if not separation > 0:
        raise InputError(f"separation must be positive, got {separation}", key='target_radius')
    if separation >= torus.diameter(norm):
        logger.warning(f"Separation {separation} reaches the torus diameter; the packing is a single point")
    cap = Config.PROBE_CAP if cap is None else cap
    if stream.size(torus) > cap:
        raise ResourceError(f"candidate stream of {stream.size(torus)} points exceeds the cap of {cap}; "
                            "coarsen the step or raise probe_cap (eps_override for the ε-net)")

    order = norm_order(norm)
    sides = torus.sides
    cells = np.maximum(1, np.floor(sides / separation).astype(int))
    cell_edge = sides / cells
    offsets = [sorted({o % int(m) for o in (-1, 0, 1)}) for m in cells]
    neighbourhood = list(itertools.product(*offsets))
    buckets = {}
    accepted: List[np.ndarray] = []

    for chunk in stream.chunks(torus):
        cell_ids = np.minimum((chunk // cell_edge).astype(int), cells - 1)
        for point, cell in zip(chunk, cell_ids):
            near = []
            for offset in neighbourhood:
                key = tuple((cell + offset) % cells)
                bucket = buckets.get(key)
                if bucket:
                    near.extend(bucket)
            if near:
                gaps = minimal_image(torus, np.asarray([accepted[i] for i in near]) - point)
                if np.min(np.linalg.norm(gaps, ord=order, axis=1)) <= separation:
                    continue
            buckets.setdefault(tuple(cell), []).append(len(accepted))
            accepted.append(point)

    points = np.asarray(accepted) if accepted else np.zeros((0, torus.n))
    packing = PointSet(torus, points)
    packing.metadata.update({'separation': separation, 'norm': norm, 'stream': stream.kind})
    if stream.kind == 'grid':
        # maximal w.r.t. the grid: covering radius within the grid resolution of the separation
        packing.metadata['covering_radius'] = separation + grid_covering_slack(torus, stream.grid_shape(torus), norm)
    logger.debug(f"Greedy packing accepted {len(accepted)} of {stream.size(torus)} candidates")
    return packing


@dataclass(frozen=True)
class Assignment:
    indices: np.ndarray
    distances: np.ndarray

    @property
    def max_distance(self) -> float:
        return float(self.distances.max()) if len(self.distances) else 0.0


def nearest_assignment(source, target, torus: Torus, chunk_size: int = 512) -> Assignment:
    """Map each source point to a torus-nearest target point, ties to the lexicographically smallest"""
    if len(target) == 0:
        raise InputError("nearest assignment needs a nonempty target set")
    targets = target.points
    # lexsort keys are read last-to-first, so reverse the columns for first-coordinate priority
    order = np.lexsort(targets.T[::-1])
    ordered = targets[order]
    indices = np.empty(len(source), dtype=int)
    distances = np.empty(len(source))
    for start in range(0, len(source), chunk_size):
        block = source.points[start:start + chunk_size]
        gaps = minimal_image(torus, ordered[None, :, :] - block[:, None, :])
        dist = np.linalg.norm(gaps, axis=2)
        best = np.argmin(dist, axis=1)
        indices[start:start + len(block)] = order[best]
        distances[start:start + len(block)] = dist[np.arange(len(block)), best]
    return Assignment(indices=indices, distances=distances)
