"""
Seeded random sources, Poisson point processes and fixed-count configurations on
tori, plus the PointSet container with its cell-list index.

Seeding contract: every random draw of a trial comes from its own generator,
seeded by SplitMix64 mixing of (master_seed, trial_index, draw). The constants
below are part of the output format; changing them changes every run.
"""

import csv
import logging
import math
import threading
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from config import Config
from models.bodies import Body
from models.torus import Torus, minimal_image, norm_order, reduce
from utils.errors import InputError, ResourceError

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MULTIPLIER_1 = 0xBF58476D1CE4E5B9
MIX_MULTIPLIER_2 = 0x94D049BB133111EB

# draw counters per named draw within a trial
DRAWS: Dict[str, int] = {
    'count': 1,
    'points': 2,
    'candidates': 3,
    'bootstrap': 4,
    'monte_carlo': 5,
}


def splitmix64(value: int) -> int:
    z = (value + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * MIX_MULTIPLIER_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MULTIPLIER_2) & MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    trial_index: int = 0

    def __post_init__(self):
        if int(self.master_seed) != self.master_seed or not 0 <= self.master_seed <= MASK64:
            raise InputError(f"master seed must be a 64-bit unsigned integer, got {self.master_seed}",
                             key='master_seed')
        if int(self.trial_index) != self.trial_index or self.trial_index < 0:
            raise InputError(f"trial index must be a nonnegative integer, got {self.trial_index}")

    @property
    def trial_seed(self) -> int:
        """Per-trial 64-bit key, recorded in trial logs"""
        return splitmix64((splitmix64(int(self.master_seed)) + int(self.trial_index)) & MASK64)

    def stream_seed(self, draw: Union[str, int]) -> int:
        counter = DRAWS[draw] if isinstance(draw, str) else int(draw)
        return splitmix64((self.trial_seed + counter) & MASK64)

    def generator(self, draw: Union[str, int]) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.stream_seed(draw)))


class CellIndex:
    """Cell lists over the fundamental domain, cell edge at least `reach` on every axis"""

    def __init__(self, torus: Torus, points: np.ndarray, reach: float):
        sides = torus.sides
        limit = max(1024, 4 * len(points))
        per_axis = np.floor(sides / reach) if reach > 0 else np.full(torus.n, float(limit))
        cells = np.clip(per_axis, 1, limit).astype(np.int64)
        # coarser cells stay valid, they only widen the candidate lists
        while np.prod(cells, dtype=float) > limit and np.any(cells > 1):
            cells = np.maximum(1, cells // 2)
        self.torus = torus
        self.reach = reach
        self.cells = cells
        self.cell_edge = sides / cells
        self.strides = np.concatenate([np.cumprod(cells[::-1])[::-1][1:], [1]]).astype(np.int64)
        axis_offsets = [sorted({o % int(m) for o in (-1, 0, 1)}) for m in cells]
        mesh = np.meshgrid(*axis_offsets, indexing='ij')
        self.offsets = np.stack([m.ravel() for m in mesh], axis=1).astype(np.int64)

        flat = self.flat_ids(self.cell_of(points)) if len(points) else np.zeros(0, dtype=np.int64)
        self.order = np.argsort(flat, kind='stable')
        total_cells = int(np.prod(cells))
        self.starts = np.searchsorted(flat[self.order], np.arange(total_cells + 1))

    def cell_of(self, points: np.ndarray) -> np.ndarray:
        cell = np.floor(points / self.cell_edge).astype(np.int64)
        return np.clip(cell, 0, self.cells - 1)

    def flat_ids(self, cells: np.ndarray) -> np.ndarray:
        return (cells * self.strides).sum(axis=-1)


class PointSet:
    """Finite configuration of reduced points on a torus"""

    def __init__(self, torus: Torus, points=None):
        points = np.zeros((0, torus.n)) if points is None else np.asarray(points, dtype=float)
        points = points.reshape(-1, torus.n) if points.size else np.zeros((0, torus.n))
        self.torus = torus
        self.points = reduce(torus, points) if len(points) else points
        self.metadata: Dict[str, object] = {}
        self._index: Optional[CellIndex] = None
        self._index_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.points)

    def register_radius(self, reach: float) -> CellIndex:
        """Index whose cells are at least `reach` wide, rebuilt only when the reach grows"""
        with self._index_lock:
            if self._index is None or self._index.reach < reach:
                self._index = CellIndex(self.torus, self.points, reach)
            return self._index

    def _gather(self, queries: np.ndarray, reach: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(query ids, point ids, minimal-image displacements) for candidates near each query"""
        index = self.register_radius(reach)
        # cells are laid over the fundamental domain, so queries must be reduced first
        queries = reduce(self.torus, queries)
        neighbours = (index.cell_of(queries)[:, None, :] + index.offsets[None, :, :]) % index.cells
        flat = index.flat_ids(neighbours)
        starts = index.starts[flat].ravel()
        lengths = index.starts[flat + 1].ravel() - starts
        total = int(lengths.sum())
        query_ids = np.repeat(np.repeat(np.arange(len(queries)), len(index.offsets)), lengths)
        positions = np.repeat(starts, lengths) + (np.arange(total) - np.repeat(np.cumsum(lengths) - lengths, lengths))
        point_ids = index.order[positions]
        displacements = minimal_image(self.torus, self.points[point_ids] - queries[query_ids])
        return query_ids, point_ids, displacements

    def _chunked(self, queries, reach: float):
        queries = np.asarray(queries, dtype=float).reshape(-1, self.torus.n)
        index = self.register_radius(reach)
        # bound the candidate pairs held at once, not just the query count
        per_query = len(index.offsets) * max(1.0, len(self.points) / (len(index.starts) - 1))
        step = max(1, int(2_000_000 // per_query))
        for start in range(0, len(queries), step):
            block = queries[start:start + step]
            yield start, block, self._gather(block, reach)

    def count_within(self, queries, radius, norm: str = 'l2') -> np.ndarray:
        """Number of points within torus distance `radius` (scalar or per query) of each query"""
        queries = np.asarray(queries, dtype=float).reshape(-1, self.torus.n)
        counts = np.zeros(len(queries), dtype=np.int64)
        radii = np.broadcast_to(np.asarray(radius, dtype=float), (len(queries),))
        if len(self.points) == 0 or len(queries) == 0 or radii.max() < 0:
            return counts
        order = norm_order(norm)
        for start, block, (query_ids, _, disp) in self._chunked(queries, float(radii.max())):
            hit = np.linalg.norm(disp, ord=order, axis=1) <= radii[start + query_ids]
            counts[start:start + len(block)] = np.bincount(query_ids[hit], minlength=len(block))
        return counts

    def count_in_body(self, queries, body: Body) -> np.ndarray:
        """Number of points p with query − p in the body, for each query"""
        norm_ball = body.norm_ball()
        if norm_ball is not None:
            order, radius = norm_ball
            norm = {1.0: 'l1', 2.0: 'l2'}.get(order, 'linf')
            return self.count_within(queries, radius, norm)
        queries = np.asarray(queries, dtype=float).reshape(-1, self.torus.n)
        counts = np.zeros(len(queries), dtype=np.int64)
        if len(self.points) == 0 or len(queries) == 0:
            return counts
        for start, block, (query_ids, _, disp) in self._chunked(queries, body.circumradius()):
            hit = body.contains_many(disp)
            counts[start:start + len(block)] = np.bincount(query_ids[hit], minlength=len(block))
        return counts

    def query_ball(self, query, radius: float, norm: str = 'l2') -> np.ndarray:
        """Sorted indices of the points within torus distance `radius` of one query"""
        query = np.asarray(query, dtype=float).reshape(1, self.torus.n)
        if radius < 0 or len(self.points) == 0:
            return np.zeros(0, dtype=np.int64)
        _, point_ids, disp = self._gather(query, radius)
        hit = np.linalg.norm(disp, ord=norm_order(norm), axis=1) <= radius
        return np.sort(point_ids[hit])

    def query_ball_bruteforce(self, query, radius: float, norm: str = 'l2') -> np.ndarray:
        query = np.asarray(query, dtype=float).reshape(1, self.torus.n)
        disp = minimal_image(self.torus, self.points - query)
        return np.flatnonzero(np.linalg.norm(disp, ord=norm_order(norm), axis=1) <= radius)

    def neighbour_pairs(self, reach: float, norm: str = 'l2') -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Index pairs i < j within torus distance `reach`, with the displacement p_j − p_i"""
        empty = (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros((0, self.torus.n)))
        if len(self.points) < 2 or reach < 0:
            return empty
        order = norm_order(norm)
        firsts, seconds, gaps = [], [], []
        for start, block, (query_ids, point_ids, disp) in self._chunked(self.points, reach):
            owners = start + query_ids
            keep = (point_ids > owners) & (np.linalg.norm(disp, ord=order, axis=1) <= reach)
            firsts.append(owners[keep])
            seconds.append(point_ids[keep])
            gaps.append(disp[keep])
        if not firsts:
            return empty
        return np.concatenate(firsts), np.concatenate(seconds), np.concatenate(gaps)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.points, columns=[f"x{i}" for i in range(self.torus.n)])

    def to_csv(self, path: str):
        with open(path, 'w', newline='') as handle:
            handle.write(f"dim,count\n{self.torus.n},{len(self)}\n")
            self.to_frame().to_csv(handle, index=False, lineterminator='\n')

    @classmethod
    def from_csv(cls, path: str, torus: Torus) -> 'PointSet':
        with open(path, newline='') as handle:
            reader = csv.reader(handle)
            next(reader)
            dim, count = (int(v) for v in next(reader))
            if dim != torus.n:
                raise InputError(f"point file has dimension {dim}, torus has {torus.n}")
            frame = pd.read_csv(handle)
        if len(frame) != count:
            raise InputError(f"point file declares {count} points but holds {len(frame)}")
        return cls(torus, frame.to_numpy(dtype=float))


def sample_poisson_count(lam: float, seed: SeedSpec) -> int:
    try:
        lam = float(lam)
    except (TypeError, ValueError):
        raise InputError(f"Poisson mean must be a number, got {lam!r}", key='intensity')
    if math.isnan(lam) or lam < 0 or math.isinf(lam):
        raise InputError(f"Poisson mean must be a finite nonnegative number, got {lam}", key='intensity')
    if lam == 0:
        return 0
    # numpy uses inversion for small means and transformed rejection above
    return int(seed.generator('count').poisson(lam))


def _uniform_points(torus: Torus, count: int, seed: SeedSpec) -> PointSet:
    # row-major fill from one stream: a smaller count yields a prefix of a larger one
    raw = seed.generator('points').random((count, torus.n))
    return PointSet(torus, raw * torus.sides)


def sample_ppp(torus: Torus, intensity: float, seed: SeedSpec, cap: Optional[int] = None) -> PointSet:
    """Poisson point process: Poisson(intensity·vol(T)) count, then i.i.d. uniform points"""
    if not intensity >= 0 or math.isinf(intensity):
        raise InputError(f"intensity must be finite and nonnegative, got {intensity}", key='intensity')
    cap = Config.SAMPLE_CAP if cap is None else cap
    expected = intensity * torus.volume
    if expected > cap:
        raise ResourceError(f"expected point count {expected:.4g} exceeds the sample cap of {cap}; "
                            "raise sample_cap or lower the intensity")
    count = sample_poisson_count(expected, seed)
    points = _uniform_points(torus, count, seed)
    points.metadata.update({'intensity': intensity, 'trial_seed': seed.trial_seed})
    return points


def sample_fixed_count(torus: Torus, count: int, seed: SeedSpec, cap: Optional[int] = None) -> PointSet:
    """Exactly `count` i.i.d. uniform points"""
    if int(count) != count or count < 0:
        raise InputError(f"point count must be a nonnegative integer, got {count}")
    cap = Config.SAMPLE_CAP if cap is None else cap
    if count > cap:
        raise ResourceError(f"point count {count} exceeds the sample cap of {cap}; raise sample_cap")
    points = _uniform_points(torus, int(count), seed)
    points.metadata.update({'count': int(count), 'trial_seed': seed.trial_seed})
    return points
