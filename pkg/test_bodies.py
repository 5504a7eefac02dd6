#!/usr/bin/env python3
"""
Tests for convex bodies: membership, volumes, overlaps and isotropic constants
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import math

import numpy as np
import pytest

from models.bodies import (Ball, Cube, CrossPolytope, Ellipsoid, SlabSpec, ball_overlap_volume,
                           ball_symmetric_difference_bound, body_from_spec, contains, cube_overlap_volume,
                           difference_body, isotropic_constant, slab_tail_volume_mc, small_overlap_bound, volume)
from utils.errors import InputError, NotIsotropicError


def test_membership():
    """Closed bodies contain their boundary"""
    print("📐 Testing membership...")
    assert contains(Ball(3, 1.0), (0.0, 0.0, 0.0))
    assert contains(Cube(2, 1.0), (0.5, 0.5))
    assert not contains(Cube(2, 1.0), (0.51, 0.0))
    assert contains(CrossPolytope(2, 1.0), (0.5, 0.5))
    assert not contains(CrossPolytope(2, 1.0), (0.6, 0.5))
    with pytest.raises(InputError):
        contains(Ball(3, 1.0), (0.0, 0.0))
    print("✅ Membership checks passed")


def test_volumes():
    print("📦 Testing volumes...")
    assert math.isclose(volume(Ball(2, 1.0)), math.pi, rel_tol=1e-12)
    assert math.isclose(volume(Ball(3, 1.0)), 4.0 * math.pi / 3.0, rel_tol=1e-12)
    for n in (1, 5, 40):
        assert math.isclose(volume(Cube(n, 1.0)), 1.0, rel_tol=1e-12)
    assert math.isclose(volume(CrossPolytope(2, 1.0)), 2.0, rel_tol=1e-12)
    assert math.isclose(volume(Ellipsoid(2, (1.0, 2.0))), 2.0 * math.pi, rel_tol=1e-12)
    print("✅ Volume checks passed")


def test_difference_body():
    assert difference_body(Ball(3, 1.0)) == Ball(3, 2.0)
    assert difference_body(Cube(4, 1.0)) == Cube(4, 2.0)
    assert difference_body(CrossPolytope(2, 1.0)) == CrossPolytope(2, 2.0)


def test_cube_overlap():
    print("🧊 Testing cube overlaps...")
    assert cube_overlap_volume(1.0, (0.0, 0.0, 0.0)) == 1.0
    assert cube_overlap_volume(1.0, (1.0, 0.2)) == 0.0
    assert cube_overlap_volume(1.0, (0.5, 0.5)) == pytest.approx(0.25)

    # Monte-Carlo cross-check of the product formula
    rng = np.random.default_rng(11)
    offset = np.array([0.5, 0.5])
    points = rng.random((200_000, 2)) - 0.5
    inside = np.max(np.abs(points - offset), axis=1) <= 0.5
    assert abs(inside.mean() - 0.25) < 0.005
    print("✅ Cube overlap checks passed")


def test_ball_overlap():
    print("⚪ Testing ball overlaps...")
    assert ball_overlap_volume(3, 1.0, 0.0) == pytest.approx(Ball(3, 1.0).volume())
    assert ball_overlap_volume(3, 1.0, 2.0) == 0.0
    assert ball_overlap_volume(3, 1.0, 2.5) == 0.0
    assert ball_overlap_volume(1, 1.0, 1.0) == pytest.approx(1.0)
    # lens of two unit disks at distance 1
    lens = 2.0 * math.acos(0.5) - 0.5 * math.sqrt(3.0)
    assert ball_overlap_volume(2, 1.0, 1.0) == pytest.approx(lens, rel=1e-9)
    # 3-D lens: π(4r + d)(2r − d)²/12
    d = 0.7
    assert ball_overlap_volume(3, 1.0, d) == pytest.approx(math.pi * (4.0 + d) * (2.0 - d) ** 2 / 12.0, rel=1e-9)
    with pytest.raises(InputError):
        ball_overlap_volume(3, 1.0, -0.1)
    print("✅ Ball overlap checks passed")


def test_overlaps_against_monte_carlo():
    """Closed-form cube overlaps and quadrature ball overlaps agree with sampled estimates"""
    print("🎲 Testing overlaps against Monte-Carlo...")
    rng = np.random.default_rng(29)
    samples = 20_000
    for n in range(2, 9):
        points = Cube(n, 1.0).sample_uniform(samples, rng)
        for offset in rng.uniform(-1.0, 1.0, size=(100, n)):
            exact = cube_overlap_volume(1.0, offset)
            estimate = float(np.mean(np.max(np.abs(points - offset), axis=1) <= 0.5))
            sigma = math.sqrt(max(exact * (1.0 - exact), 1e-12) / samples)
            assert abs(estimate - exact) <= 5.0 * sigma

    ball = Ball(4, 1.0)
    points = ball.sample_uniform(100_000, rng)
    for d in np.linspace(0.0, 1.9, 8):
        exact = ball_overlap_volume(4, 1.0, d)
        fraction = float(np.mean(np.linalg.norm(points - np.array([d, 0.0, 0.0, 0.0]), axis=1) <= 1.0))
        p = exact / ball.volume()
        assert abs(fraction - p) <= 5.0 * math.sqrt(max(p * (1.0 - p), 1e-12) / len(points))
    print("✅ Monte-Carlo overlap checks passed")


def test_disjoint_slabs():
    """S and S + x never meet when S is the slab of half-width |x|/2 across x"""
    rng = np.random.default_rng(37)
    for n in range(2, 7):
        x = rng.standard_normal(n)
        norm = float(np.linalg.norm(x))
        slab = SlabSpec(tuple(x), norm / 2.0)
        points = rng.uniform(-2.0 * norm, 2.0 * norm, size=(100_000, n))
        in_slab = slab.contains_many(points)
        in_shifted = slab.contains_many(points - x)
        assert in_slab.any() and in_shifted.any()
        assert not np.any(in_slab & in_shifted)


def test_symmetric_difference_bound():
    assert ball_symmetric_difference_bound(2, 1.0, 0.0) == 0.0
    assert ball_symmetric_difference_bound(2, 1.0, 0.1) == pytest.approx(0.2)
    for n in (2, 5, 10):
        d = n ** -0.6
        exact = Ball(n, 1.0).volume() - ball_overlap_volume(n, 1.0, d)
        assert exact <= ball_symmetric_difference_bound(n, 1.0, d)


def test_isotropic_constant():
    print("📏 Testing isotropic constants...")
    for n in (1, 3, 12):
        assert isotropic_constant(Cube(n, 2.0)) == pytest.approx(1.0 / math.sqrt(12.0))
    assert isotropic_constant(Ball(1, 5.0)) == pytest.approx(1.0 / math.sqrt(12.0))
    radius = (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0)
    assert isotropic_constant(Ball(3, 1.0)) == pytest.approx(radius / math.sqrt(5.0))
    assert isotropic_constant(Ellipsoid(3, (2.0, 2.0, 2.0))) == pytest.approx(isotropic_constant(Ball(3, 1.0)))
    with pytest.raises(NotIsotropicError):
        isotropic_constant(Ellipsoid(2, (1.0, 3.0)))

    # second moment of the volume-one ball by sampling
    rng = np.random.default_rng(5)
    samples = Ball(3, radius).sample_uniform(400_000, rng)[:, 0] ** 2
    error = samples.std() / math.sqrt(len(samples))
    assert abs(samples.mean() - radius ** 2 / 5.0) < 4.0 * error
    print("✅ Isotropic constant checks passed")


def test_small_overlap_bound():
    L = 1.0 / math.sqrt(12.0)
    assert small_overlap_bound(L, 8.0 * L) == pytest.approx(1.0 / 3.0)
    assert small_overlap_bound(L, 4.0 * L) == pytest.approx(3.0 ** -0.5)
    assert small_overlap_bound(L, 1.2) == pytest.approx(3.0 ** (-1.2 / (8.0 * L)))
    assert small_overlap_bound(L, 1.2) == pytest.approx(0.56504, abs=1e-5)
    with pytest.raises(InputError):
        small_overlap_bound(L, 3.9 * L)


def test_slab_tails():
    print("🔪 Testing slab tails...")
    cube = Cube(6, 1.0)
    wide = SlabSpec((1, 0, 0, 0, 0, 0), 2.0 / math.sqrt(12.0))
    estimate, error = slab_tail_volume_mc(cube, wide, 20_000, seed=3)
    assert estimate == 0.0 and error == 0.0
    empty = SlabSpec((1, 1, 0, 0, 0, 0), 0.0)
    estimate, _ = slab_tail_volume_mc(cube, empty, 20_000, seed=3)
    assert estimate == pytest.approx(1.0)
    with pytest.raises(InputError):
        slab_tail_volume_mc(cube, wide, 100, seed=3)
    print("✅ Slab tail checks passed")


def test_body_from_spec():
    assert body_from_spec('ball', 2, radius=0.5) == Ball(2, 0.5)
    assert body_from_spec('ellipsoid', 2, semi_axes=[1, 2]).describe()['semi_axes'] == [1.0, 2.0]
    for kind, kwargs in (('ball', {}), ('cube', {}), ('polygon', {'radius': 1.0})):
        with pytest.raises(InputError):
            body_from_spec(kind, 2, **kwargs)
    with pytest.raises(InputError):
        Ball(2, -1.0)
    with pytest.raises(InputError):
        Ellipsoid(3, (1.0, 2.0))


def main():
    """Main test function"""
    print("🧪 Torus Cover - Body Tests")
    print("=" * 70)

    tests = [
        ("Membership", test_membership),
        ("Volumes", test_volumes),
        ("Difference Body", test_difference_body),
        ("Cube Overlap", test_cube_overlap),
        ("Ball Overlap", test_ball_overlap),
        ("Monte-Carlo Overlaps", test_overlaps_against_monte_carlo),
        ("Disjoint Slabs", test_disjoint_slabs),
        ("Symmetric Difference", test_symmetric_difference_bound),
        ("Isotropic Constant", test_isotropic_constant),
        ("Small Overlap Bound", test_small_overlap_bound),
        ("Slab Tails", test_slab_tails),
        ("Body From Spec", test_body_from_spec),
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
