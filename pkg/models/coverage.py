"""
Measurement layer: pointwise and maximal multiplicity, covering density, sound
coverage certificates on probe nets, uncovered-target counts and saturation.

Certificates and multiplicity bounds walk the probe grid in boxes. A box whose
circumscribed net ball is settled by one shrink/expand test is decided without
visiting its probes; everything else is split until it is small enough to check
probe by probe, so the outcome is the probe-by-probe outcome.
"""

import heapq
import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from models.analytic import saturation_threshold
from models.bodies import Body
from models.sampling import PointSet
from models.torus import ProbeNet, Torus, minimal_image, norm_order, norm_slack_factor, reduce
from utils.errors import InputError

logger = logging.getLogger(__name__)

LEAF_SIZE = 4096
WITNESS_CANDIDATES = 64


class CoverageStatus(str, Enum):
    COVERED = 'covered'
    UNCOVERED = 'uncovered'
    UNDETERMINED = 'undetermined'


@dataclass(frozen=True)
class CoverageVerdict:
    status: CoverageStatus
    witness: Optional[Tuple[float, ...]]
    probe_radius_used: float


@dataclass(frozen=True)
class MultiplicityBounds:
    lower: int
    upper: int


def check_injective(body: Body, torus: Torus):
    """Translates of the body must embed in the torus: circumradius below half the shortest side"""
    if body.n != torus.n:
        raise InputError(f"body dimension {body.n} does not match torus dimension {torus.n}", key='dimension')
    if not body.circumradius() < torus.half_min_side:
        raise InputError(
            f"body circumradius {body.circumradius():.6g} is not below half the shortest torus side "
            f"{torus.half_min_side:.6g}; the projection R^n -> T is not injective on translates", key='torus_sides')


def net_norm_for(body: Body) -> str:
    """Net norm whose slack is tightest for the body"""
    norm_ball = body.norm_ball()
    if norm_ball is None:
        raise InputError(f"no probe-net certificate for {body.kind} bodies", key='body')
    return 'l2' if norm_ball[0] == 2.0 else 'linf'


def _body_norm(body: Body) -> Tuple[str, float]:
    norm_ball = body.norm_ball()
    if norm_ball is None:
        raise InputError(f"no probe-net certificate for {body.kind} bodies", key='body')
    order, radius = norm_ball
    return {1.0: 'l1', 2.0: 'l2'}.get(order, 'linf'), radius


def slack_factor(body: Body, net: ProbeNet) -> float:
    order, _ = body.norm_ball()
    return norm_slack_factor(order, norm_order(net.norm), body.n)


def multiplicity_at(X: PointSet, body: Body, point, torus: Torus) -> int:
    """μ_K(X, x) = |{p ∈ X : x − p ∈ K}|"""
    check_injective(body, torus)
    point = reduce(torus, point)
    return int(X.count_in_body(point.reshape(1, -1), body)[0])


def covering_density(X: PointSet, body: Body, torus: Torus) -> float:
    check_injective(body, torus)
    return len(X) * body.volume() / torus.volume


def _split(lo: np.ndarray, hi: np.ndarray) -> List[Tuple[np.ndarray, np.ndarray]]:
    pieces = []
    for a, b in zip(lo, hi):
        if b - a > 1:
            middle = (a + b) // 2
            pieces.append([(a, middle), (middle, b)])
        else:
            pieces.append([(a, b)])
    children = []
    for combo in itertools.product(*pieces):
        children.append((np.array([c[0] for c in combo]), np.array([c[1] for c in combo])))
    return children


def _box_size(lo: np.ndarray, hi: np.ndarray) -> int:
    return int(np.prod(hi - lo, dtype=object))


def _deepest(X: PointSet, candidates: np.ndarray, norm: str, torus: Torus) -> np.ndarray:
    """Candidate farthest from X (first one on ties)"""
    if len(X) == 0:
        return candidates[0]
    order = norm_order(norm)
    depth = np.array([np.min(np.linalg.norm(minimal_image(torus, X.points - c), ord=order, axis=1))
                      for c in candidates])
    return candidates[int(np.argmax(depth))]


def certify_coverage(X: PointSet, body: Body, torus: Torus, net: ProbeNet,
                     leaf_size: int = LEAF_SIZE) -> CoverageVerdict:
    """Covered if every probe cell is covered, Uncovered with a probe of multiplicity zero, else Undetermined"""
    check_injective(body, torus)
    norm, radius = _body_norm(body)
    factor = slack_factor(body, net)
    h = net.covering_radius
    shrunk = radius - factor * h
    if shrunk <= 0:
        raise InputError(f"net slack {factor * h:.4g} consumes the body size {radius:.4g}; use a finer net",
                         key='net_radius')

    undetermined = False
    frontier = [(np.zeros(torus.n, dtype=np.int64), np.asarray(net.shape, dtype=np.int64))]
    while frontier:
        boxes, leaves = [], []
        for lo, hi in frontier:
            (leaves if _box_size(lo, hi) <= leaf_size else boxes).append((lo, hi))

        next_frontier = []
        if boxes:
            centers = np.array([net.box_center(lo, hi) for lo, hi in boxes])
            reaches = np.array([radius - factor * net.box_radius(lo, hi) for lo, hi in boxes])
            settled = np.zeros(len(boxes), dtype=bool)
            usable = reaches > 0
            if np.any(usable):
                settled[usable] = X.count_within(centers[usable], reaches[usable], norm) > 0
            for (lo, hi), done in zip(boxes, settled):
                if not done:
                    next_frontier.extend(_split(lo, hi))

        for lo, hi in leaves:
            probes = net.box_points(lo, hi)
            covered = X.count_within(probes, shrunk, norm) > 0
            if covered.all():
                continue
            rest = probes[~covered]
            empty = np.flatnonzero(X.count_within(rest, radius, norm) == 0)
            if empty.size:
                witness = _deepest(X, rest[empty[:WITNESS_CANDIDATES]], norm, torus)
                return CoverageVerdict(CoverageStatus.UNCOVERED, tuple(float(v) for v in witness), h)
            undetermined = True
        frontier = next_frontier

    status = CoverageStatus.UNDETERMINED if undetermined else CoverageStatus.COVERED
    return CoverageVerdict(status, None, h)


def max_multiplicity(X: PointSet, body: Body, torus: Torus, net: ProbeNet,
                     leaf_size: int = LEAF_SIZE) -> MultiplicityBounds:
    """Exact probe maxima at the true and at the slack-expanded body size"""
    check_injective(body, torus)
    norm, radius = _body_norm(body)
    if len(X) == 0:
        return MultiplicityBounds(0, 0)
    factor = slack_factor(body, net)
    expanded = radius + factor * net.covering_radius

    def bound(lo, hi) -> int:
        reach = radius + factor * net.box_radius(lo, hi)
        return int(X.count_within(net.box_center(lo, hi).reshape(1, -1), reach, norm)[0])

    best_lower = best_upper = 0
    counter = itertools.count()
    root = (np.zeros(torus.n, dtype=np.int64), np.asarray(net.shape, dtype=np.int64))
    heap = [(-len(X), next(counter), root[0], root[1])]
    # best-first: stop once no box can beat the running lower maximum
    while heap:
        negative, _, lo, hi = heapq.heappop(heap)
        if -negative <= best_lower:
            break
        if _box_size(lo, hi) > leaf_size:
            for child_lo, child_hi in _split(lo, hi):
                heapq.heappush(heap, (-bound(child_lo, child_hi), next(counter), child_lo, child_hi))
            continue
        probes = net.box_points(lo, hi)
        best_lower = max(best_lower, int(X.count_within(probes, radius, norm).max()))
        best_upper = max(best_upper, int(X.count_within(probes, expanded, norm).max()))
    return MultiplicityBounds(best_lower, max(best_upper, best_lower))


def uncovered_count(targets: PointSet, X: PointSet, body: Body, torus: Torus) -> int:
    """B = number of targets outside X + K"""
    check_injective(body, torus)
    if len(targets) == 0:
        return 0
    return int(np.count_nonzero(X.count_in_body(targets.points, body) == 0))


def saturated_mask(points, X: PointSet, eps: float, beta: float, n: int, torus: Torus,
                   radius: float = 1.0) -> np.ndarray:
    if not 0 < eps < radius:
        raise InputError(f"saturation needs 0 < eps < r, got eps={eps}, r={radius}", key='eps_override')
    threshold = saturation_threshold(beta, n)
    counts = X.count_within(np.asarray(points, dtype=float).reshape(-1, torus.n), radius - eps, 'l2')
    return counts >= math.ceil(threshold) if threshold > 0 else np.ones(len(counts), dtype=bool)


def is_saturated(y, X: PointSet, eps: float, beta: float, n: int, torus: Torus, radius: float = 1.0) -> bool:
    """At least (β/2) n ln n points of X within torus distance r − ε of y"""
    return bool(saturated_mask(y, X, eps, beta, n, torus, radius)[0])
