#!/usr/bin/env python3
"""
Tests for seeding, point processes and the PointSet index
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import tempfile

import numpy as np
import pytest
from scipy import stats

from models.bodies import Cube, Ellipsoid
from models.sampling import (PointSet, SeedSpec, sample_fixed_count, sample_poisson_count, sample_ppp,
                             splitmix64)
from models.torus import Torus
from utils.errors import InputError, ResourceError
from utils.statistics import poisson_chisquare


def test_seed_spec():
    print("🌱 Testing seed derivation...")
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    a = SeedSpec(42, 3)
    assert a.trial_seed == SeedSpec(42, 3).trial_seed
    assert a.trial_seed != SeedSpec(42, 4).trial_seed
    assert a.trial_seed != SeedSpec(43, 3).trial_seed
    assert a.stream_seed('count') != a.stream_seed('points')
    assert np.array_equal(a.generator('points').random(5), SeedSpec(42, 3).generator('points').random(5))
    SeedSpec(2 ** 64 - 1, 0)
    with pytest.raises(InputError):
        SeedSpec(-1, 0)
    with pytest.raises(InputError):
        SeedSpec(2 ** 64, 0)
    print("✅ Seed derivation checks passed")


def test_poisson_count():
    assert sample_poisson_count(0.0, SeedSpec(1)) == 0
    counts = [sample_poisson_count(20.0, SeedSpec(1, t)) for t in range(2000)]
    assert abs(np.mean(counts) - 20.0) < 4.0 * np.sqrt(20.0 / 2000)
    with pytest.raises(InputError):
        sample_poisson_count(-1.0, SeedSpec(1))
    with pytest.raises(InputError):
        sample_poisson_count(float('nan'), SeedSpec(1))


def test_sample_ppp():
    print("🎲 Testing Poisson point processes...")
    torus = Torus.from_sides((2.0, 3.0))
    assert len(sample_ppp(torus, 0.0, SeedSpec(5))) == 0

    first = sample_ppp(torus, 4.0, SeedSpec(5, 7))
    second = sample_ppp(torus, 4.0, SeedSpec(5, 7))
    assert np.array_equal(first.points, second.points)
    assert np.all(first.points >= 0.0) and np.all(first.points < torus.sides)
    assert first.metadata['trial_seed'] == SeedSpec(5, 7).trial_seed

    # points of one trial are uniform on the torus
    pooled = np.concatenate([sample_ppp(torus, 50.0, SeedSpec(8, t)).points for t in range(20)])
    assert stats.kstest(pooled[:, 0] / 2.0, 'uniform').pvalue > 1e-4

    with pytest.raises(ResourceError):
        sample_ppp(torus, 1e9, SeedSpec(5), cap=1000)
    with pytest.raises(InputError):
        sample_ppp(torus, -1.0, SeedSpec(5))
    print("✅ Poisson point process checks passed")


def test_ppp_counts_and_independence():
    """Total counts are Poisson, and counts in disjoint boxes are uncorrelated"""
    print("📦 Testing Poisson counts over disjoint boxes...")
    torus = Torus.from_sides((4.0, 4.0))
    trials = 10_000
    totals = np.zeros(trials, dtype=np.int64)
    left = np.zeros(trials, dtype=np.int64)
    corner = np.zeros(trials, dtype=np.int64)
    for t in range(trials):
        points = sample_ppp(torus, 2.0, SeedSpec(61, t)).points
        totals[t] = len(points)
        left[t] = int(np.sum(points[:, 0] < 1.0))
        corner[t] = int(np.sum((points[:, 0] >= 2.0) & (points[:, 1] >= 2.0)))

    assert abs(totals.mean() - 32.0) < 3.0 * np.sqrt(32.0 / trials)
    # Var of the sample variance of Poisson(λ) counts is about (λ + 2λ²)/trials
    assert abs(totals.var(ddof=1) - 32.0) < 5.0 * np.sqrt((32.0 + 2.0 * 32.0 ** 2) / trials)
    assert poisson_chisquare(totals, 32.0)['p_value'] > 1e-4
    assert poisson_chisquare(left, 8.0)['p_value'] > 1e-4
    assert poisson_chisquare(corner, 8.0)['p_value'] > 1e-4
    correlation = np.corrcoef(left, corner)[0, 1]
    assert abs(correlation) < 4.0 / np.sqrt(trials)
    print("✅ Poisson count checks passed")


def test_sample_fixed_count():
    torus = Torus.from_sides((1.0, 1.0, 1.0))
    assert len(sample_fixed_count(torus, 0, SeedSpec(3))) == 0
    ten = sample_fixed_count(torus, 10, SeedSpec(3, 1))
    three = sample_fixed_count(torus, 3, SeedSpec(3, 1))
    assert len(ten) == 10
    assert np.array_equal(three.points, ten.points[:3])
    with pytest.raises(ResourceError):
        sample_fixed_count(torus, 11, SeedSpec(3), cap=10)
    with pytest.raises(InputError):
        sample_fixed_count(torus, 2.5, SeedSpec(3))


def test_index_queries():
    print("🔎 Testing cell-list queries...")
    torus = Torus.from_sides((3.0, 2.0))
    points = sample_fixed_count(torus, 500, SeedSpec(17))
    rng = np.random.default_rng(1)
    queries = rng.random((40, 2)) * torus.sides
    for norm in ('l1', 'l2', 'linf'):
        for radius in (0.05, 0.3, 0.9):
            counts = points.count_within(queries, radius, norm)
            for query, count in zip(queries, counts):
                expected = points.query_ball_bruteforce(query, radius, norm)
                assert count == len(expected)
                assert np.array_equal(points.query_ball(query, radius, norm), expected)

    # queries outside the fundamental domain see the same neighbours
    shifted = queries + np.array([3.0, -4.0]) * rng.integers(-3, 4, size=(40, 1))
    assert np.array_equal(points.count_within(shifted, 0.3), points.count_within(queries, 0.3))

    # radius larger than the torus sees every point
    assert np.all(points.count_within(queries[:3], 10.0) == 500)
    assert PointSet(torus).count_within(queries, 1.0).tolist() == [0] * 40
    print("✅ Cell-list query checks passed")


def test_count_in_body():
    torus = Torus.from_sides((4.0, 4.0))
    points = sample_fixed_count(torus, 300, SeedSpec(2))
    cube = Cube(2, 1.0)
    ellipse = Ellipsoid(2, (0.9, 0.4))
    queries = np.array([[0.1, 0.2], [3.9, 3.9], [2.0, 1.0]])
    for body in (cube, ellipse):
        counts = points.count_in_body(queries, body)
        for query, count in zip(queries, counts):
            gaps = points.points - query
            gaps -= torus.sides * np.rint(gaps / torus.sides)
            assert count == int(body.contains_many(gaps).sum())


def test_neighbour_pairs():
    torus = Torus.from_sides((2.0, 2.0))
    points = sample_fixed_count(torus, 200, SeedSpec(4))
    first, second, gaps = points.neighbour_pairs(0.25)
    found = set(zip(first.tolist(), second.tolist()))
    expected = set()
    for i in range(len(points)):
        for j in points.query_ball_bruteforce(points.points[i], 0.25):
            if j > i:
                expected.add((i, int(j)))
    assert found == expected
    assert np.allclose(gaps, np.mod(points.points[second] - points.points[first] + 1.0, 2.0) - 1.0)


def test_point_file():
    torus = Torus.from_sides((2.0, 2.0))
    points = sample_fixed_count(torus, 25, SeedSpec(6))
    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, 'points.csv')
        points.to_csv(path)
        with open(path) as handle:
            assert handle.readline().strip() == 'dim,count'
            assert handle.readline().strip() == '2,25'
        loaded = PointSet.from_csv(path, torus)
        assert np.allclose(loaded.points, points.points)
        with pytest.raises(InputError):
            PointSet.from_csv(path, Torus.from_sides((2.0, 2.0, 2.0)))


def main():
    """Main test function"""
    print("🧪 Torus Cover - Sampling Tests")
    print("=" * 70)

    tests = [
        ("Seed Spec", test_seed_spec),
        ("Poisson Count", test_poisson_count),
        ("Poisson Point Process", test_sample_ppp),
        ("Disjoint Box Counts", test_ppp_counts_and_independence),
        ("Fixed Count", test_sample_fixed_count),
        ("Index Queries", test_index_queries),
        ("Count In Body", test_count_in_body),
        ("Neighbour Pairs", test_neighbour_pairs),
        ("Point File", test_point_file),
    ]

    passed = 0
    for test_name, test_func in tests:
        try:
            test_func()
            passed += 1
        except Exception as e:
            print(f"❌ {test_name} test failed: {e!r}")

    print("\n" + "=" * 70)
    print(f"📊 Test Results: {passed}/{len(tests)} tests passed")
    return passed == len(tests)


if __name__ == '__main__':
    success = main()
    sys.exit(0 if success else 1)
