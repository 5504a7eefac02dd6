#!/usr/bin/env python3
"""
Tests for the experiment pipelines: coverage scans, multiplicity profiles,
event diagnostics, second-moment runs and the inequality ledger
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import math

import numpy as np
import pandas as pd
import pytest

from cli import DEFAULT_LEMMA_CONFIG
from config import config_from_mapping
from experiments.coverage_scan import run_cover, run_coverage_scan, trial_index_for
from experiments.e123_diagnostics import run_e123_diagnostics
from experiments.lemma_suite import LedgerRow, LemmaLedger, run_lemma_suite
from experiments.multiplicity_profile import run_multiplicity_profile
from experiments.orchestrator import ExperimentOrchestrator
from experiments.second_moment import all_pairs_moments, analytic_moments, pair_overlaps, run_second_moment
from models.bodies import Ball, Cube
from models.sampling import PointSet
from models.torus import Torus
from utils.errors import InputError, LemmaFailure, exit_code_for
from utils.trial_runner import TrialRunner

DISK = {'body': 'ball', 'dimension': '2', 'radius': '0.5', 'torus_side': '4'}


def disk_config(**overrides):
    return config_from_mapping(DISK, {key: str(value) for key, value in overrides.items()})


def test_trial_indices():
    assert trial_index_for(0, 3, 10) == 3
    assert trial_index_for(2, 0, 10) == 20
    seen = {trial_index_for(g, t, 5) for g in range(4) for t in range(5)}
    assert len(seen) == 20


def test_scan_without_points():
    print("📉 Testing an empty-intensity scan...")
    config = disk_config(intensities='0,0.1', trials=4, bootstrap_resamples=20)
    table = run_coverage_scan(config, TrialRunner(1))
    first = table.rows.iloc[0]
    assert first['intensity'] == 0.0
    assert first['coverage_fraction'] == 0.0
    assert first['uncovered_count'] == 4
    assert table.threshold == pytest.approx(0.1)
    assert table.extrapolated
    assert len(table.trial_frame()) == 8
    print("✅ Empty-intensity scan checks passed")


def test_scan_well_above_threshold():
    print("📈 Testing a saturated scan...")
    body = Ball(2, 0.5)
    intensity = 10.0 * 2 * math.log(2) / body.volume()
    table = run_cover(disk_config(intensity=intensity, trials=20, bootstrap_resamples=20,
                                  profile_max_multiplicity='false'), TrialRunner(2))
    row = table.rows.iloc[0]
    assert row['coverage_fraction'] >= 0.9
    assert row['coverage_ci_low'] <= row['coverage_fraction'] <= row['coverage_ci_high']
    assert row['mean_density'] == pytest.approx(20.0 * math.log(2), rel=0.2)
    assert math.isnan(row['mean_mult_upper'])
    print("✅ Saturated scan checks passed")


def test_scan_thread_invariance():
    """Reports do not depend on how many threads ran the trials"""
    print("🧵 Testing thread invariance...")
    config = config_from_mapping({'body': 'ball', 'dimension': '2', 'radius': '0.5', 'torus_side': '3',
                                  'intensities': '1,3', 'trials': '6', 'bootstrap_resamples': '50',
                                  'master_seed': '99'})
    serial = run_coverage_scan(config, TrialRunner(1))
    parallel = run_coverage_scan(config, TrialRunner(4))
    pd.testing.assert_frame_equal(serial.trial_frame(), parallel.trial_frame())
    pd.testing.assert_frame_equal(serial.rows, parallel.rows)
    assert serial.summary() == parallel.summary()
    print("✅ Thread invariance checks passed")


def test_scan_needs_an_intensity():
    with pytest.raises(InputError):
        run_coverage_scan(disk_config(trials=2), TrialRunner(1))


def test_multiplicity_profile():
    print("🔢 Testing multiplicity profiles...")
    empty = run_multiplicity_profile(disk_config(intensity=0, trials=10, profile_max_multiplicity='false'),
                                     TrialRunner(1))
    assert empty.report['pmf'] == [1.0]
    assert empty.report['total_variation'] == 0.0
    assert empty.report['density_mean'] == 0.0

    profile = run_multiplicity_profile(disk_config(intensity=2.0, trials=300, profile_max_multiplicity='false'),
                                       TrialRunner(2))
    report = profile.report
    assert report['poisson_mean'] == pytest.approx(2.0 * Ball(2, 0.5).volume())
    assert report['total_variation'] < 0.2
    assert abs(sum(report['pmf']) - 1.0) < 1e-12
    assert abs(report['density_z']) < 5.0
    assert len(profile.trial_frame()) == 300
    print("✅ Multiplicity profile checks passed")


def test_multiplicity_fixed_count():
    profile = run_multiplicity_profile(disk_config(intensity=1.5, trials=8, process='fixed_count',
                                                   profile_max_multiplicity='false'), TrialRunner(1))
    counts = {t.point_count for t in profile.trials}
    assert counts == {math.floor(1.5 * 16.0)}
    assert profile.report['density_z'] == 0.0


def test_multiplicity_bounds_profile():
    profile = run_multiplicity_profile(disk_config(intensity=3.0, trials=3, net_radius=0.05), TrialRunner(1))
    for trial in profile.trials:
        assert trial.mult_lower <= trial.mult_upper
    assert 'upper_bound_mean' in profile.report
    assert profile.report['multiplicity_ceiling'] > 0


def test_e123_diagnostics():
    print("🧮 Testing event diagnostics...")
    empty = run_e123_diagnostics(disk_config(intensity=0, trials=3), runner=TrialRunner(1))
    assert all(not t.e1 for t in empty.trials)
    assert all(t.point_count == 0 for t in empty.trials)
    assert empty.report['events']['e1']['frequency'] == 0.0

    default = run_e123_diagnostics(disk_config(trials=5), runner=TrialRunner(2))
    report = default.report
    assert report['intensity'] == pytest.approx(0.8 * 2 * math.log(2) / Ball(2, 0.5).volume())
    assert report['consistency_violations'] == 0
    assert report['eps'] == pytest.approx(0.5 / (2 * math.log(2)))
    assert report['eps_net_size'] > 0 and report['mu_net_size'] > 0
    assert report['label'].startswith('diagnostic')
    assert report['density_ceiling'] == pytest.approx(1.1 * 2 * math.log(2))
    assert report['mean_density'] >= 0.0

    with pytest.raises(InputError):
        run_e123_diagnostics(config_from_mapping({'body': 'cube', 'dimension': '2', 'side': '1',
                                                  'torus_side': '4', 'trials': '2'}), runner=TrialRunner(1))
    print("✅ Event diagnostic checks passed")


def test_analytic_moments():
    none = {'volumes': np.zeros(0), 'gaps': np.zeros((0, 2))}
    far = analytic_moments(2, 1.0, 0.5, none, 1.0, 0)
    q = math.exp(-0.5)
    assert far['expectation'] == pytest.approx(2.0 * q)
    assert far['variance'] == pytest.approx(2.0 * q * (1.0 - q))
    assert far['variance_identity_gap'] is None

    # two targets sharing 0.2 of volume: B = 2 exactly when the union of their bodies is empty
    p_two = math.exp(-1.0 * (2.0 * 0.5 - 0.2))
    p_one = 2.0 * (q - p_two)
    mean = p_one + 2.0 * p_two
    pmf_variance = p_one + 4.0 * p_two - mean * mean
    overlap = {'volumes': np.array([0.2]), 'gaps': np.array([[0.3, 0.0]])}
    near = analytic_moments(2, 1.0, 0.5, overlap, 1.0, 2, reference_variance=pmf_variance)
    assert near['expectation'] == pytest.approx(mean)
    assert near['variance'] == pytest.approx(pmf_variance, rel=1e-12)
    assert near['variance_identity_gap'] < 1e-10
    assert near['partition_gap'] < 1e-10
    assert near['variance_within_split']
    assert near['overlapping_pairs'] == 1

    off = analytic_moments(2, 1.0, 0.5, overlap, 1.0, 2, reference_variance=1.01 * pmf_variance)
    assert off['partition_gap'] > 1e-3
    assert off['variance_identity_gap'] > 1e-3


def test_all_pairs_moments():
    torus = Torus.from_sides((4.0, 4.0))
    targets = PointSet(torus, [[0.0, 0.0], [0.6, 0.0], [2.0, 2.0], [3.7, 0.0]])
    for body in (Ball(2, 0.5), Cube(2, 1.0)):
        for intensity in (0.5, 2.0):
            brute = all_pairs_moments(targets, body, intensity)
            split = analytic_moments(len(targets), intensity, body.volume(), pair_overlaps(targets, body), 0.0, 0)
            assert brute['expectation'] == pytest.approx(split['expectation'])
            assert brute['variance'] == pytest.approx(split['variance'], rel=1e-12)

    # a lone target is a Bernoulli variable
    lone = all_pairs_moments(PointSet(torus, [[1.0, 1.0]]), Ball(2, 0.5), 2.0)
    q = math.exp(-2.0 * Ball(2, 0.5).volume())
    assert lone['variance'] == pytest.approx(q * (1.0 - q))


def test_pair_overlaps():
    torus = Torus.from_sides((4.0, 4.0))
    targets = PointSet(torus, [[0.0, 0.0], [0.6, 0.0], [2.0, 2.0]])
    found = pair_overlaps(targets, Ball(2, 0.5))
    assert found['first'].tolist() == [0] and found['second'].tolist() == [1]
    lens = 2.0 * 0.25 * math.acos(0.6) - 0.3 * math.sqrt(1.0 - 0.36)
    assert found['volumes'][0] == pytest.approx(lens, rel=1e-9)


def test_second_moment():
    print("📐 Testing the second-moment pipeline...")
    result = run_second_moment(disk_config(intensity=1.0, trials=300, master_seed=5), TrialRunner(2))
    report = result.report
    assert report['targets'] >= 2
    assert report['target_separation'] == pytest.approx(0.5)
    assert report['analytic']['partition_gap'] < 1e-9
    assert report['intensity_source'] == 'configured'
    assert report['analytic']['variance_identity_gap'] < 1e-9
    assert report['analytic']['variance_within_split']
    assert abs(report['z_expectation']) < 5.0
    assert report['bound_holds']
    assert len(result.trial_frame()) == 300

    with pytest.raises(InputError):
        run_second_moment(disk_config(intensity=1.0, trials=2, target_radius=3.0), TrialRunner(1))
    print("✅ Second-moment checks passed")


def test_second_moment_cube_defaults():
    """The three-dimensional cube on a side-6 torus runs without a hand-picked intensity"""
    print("🧊 Testing the cube second-moment defaults...")
    config = config_from_mapping({'body': 'cube', 'dimension': '3', 'side': '1', 'torus_side': '6',
                                  'trials': '5000', 'master_seed': '7'})
    result = run_second_moment(config, TrialRunner(2))
    report = result.report
    n = 3
    assert report['targets'] == 53
    assert report['intensity_source'] == 'lower_bound'
    assert report['intensity'] == pytest.approx(n * math.log(n) - 1.3 * n * math.log(math.log(n)))
    assert report['analytic']['expectation'] == pytest.approx(53 * math.exp(-report['intensity']))
    assert report['analytic']['partition_gap'] < 1e-10
    assert report['analytic']['variance_identity_gap'] < 1e-10
    assert abs(report['z_expectation']) < 4.0
    assert abs(report['z_variance']) < 4.0
    assert report['bound_holds']
    print("✅ Cube second-moment default checks passed")


def test_lemma_ledger():
    print("📒 Testing the inequality ledger...")
    config = config_from_mapping(DEFAULT_LEMMA_CONFIG, {'mc_samples': '200000'})
    ledger = run_lemma_suite(config, TrialRunner(1))
    assert ledger.passed, ledger.to_text()
    ledger.raise_for_failures()
    text = ledger.to_text()
    assert text.rstrip().endswith('overall: pass')
    assert len(ledger.rows) >= 12

    broken = LemmaLedger([LedgerRow('made-up check', 1, -0.5, False, 'x=1')])
    with pytest.raises(LemmaFailure) as caught:
        broken.raise_for_failures()
    assert exit_code_for(caught.value) == 3
    assert 'FAIL' in broken.to_text()
    print("✅ Inequality ledger checks passed")


def test_orchestrator():
    orchestrator = ExperimentOrchestrator(threads=2)
    table = orchestrator.run_experiment('cover', disk_config(intensity=0, trials=2, bootstrap_resamples=10))
    assert table.rows.iloc[0]['coverage_fraction'] == 0.0
    with pytest.raises(KeyError):
        orchestrator.run_experiment('walk', disk_config(intensity=0, trials=2))
    status = orchestrator.get_status()
    assert set(status['pipelines']) == {'scan', 'multiplicity', 'e123', 'second-moment', 'verify-lemmas'}
    assert status['performance']['threads'] == 2


def main():
    """Main test function"""
    print("🧪 Torus Cover - Experiment Tests")
    print("=" * 70)

    tests = [
        ("Trial Indices", test_trial_indices),
        ("Scan Without Points", test_scan_without_points),
        ("Scan Above Threshold", test_scan_well_above_threshold),
        ("Thread Invariance", test_scan_thread_invariance),
        ("Scan Needs Intensity", test_scan_needs_an_intensity),
        ("Multiplicity Profile", test_multiplicity_profile),
        ("Fixed Count Profile", test_multiplicity_fixed_count),
        ("Multiplicity Bounds Profile", test_multiplicity_bounds_profile),
        ("Event Diagnostics", test_e123_diagnostics),
        ("Analytic Moments", test_analytic_moments),
        ("All Pairs Moments", test_all_pairs_moments),
        ("Pair Overlaps", test_pair_overlaps),
        ("Second Moment", test_second_moment),
        ("Cube Second Moment Defaults", test_second_moment_cube_defaults),
        ("Inequality Ledger", test_lemma_ledger),
        ("Orchestrator", test_orchestrator),
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
