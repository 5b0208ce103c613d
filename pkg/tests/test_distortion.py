from fractions import Fraction as F
import math

import numpy as np
import pytest

from imdyn.distortion import (bound_multiplicity, bound_sum, distortion_trials, empirical_distortion,
                              extension_bound, intersection_multiplicity, measure_extension)
from imdyn.errors import PreconditionError
from imdyn.fixtures import random_affine_map, smooth_quadratic, steep_shallow, tent
from imdyn.map_model import classify


class TestIntersectionMultiplicity:
    """Test the largest number of intervals covering one point."""

    def test_overlaps(self):
        assert intersection_multiplicity([(0, F(1, 2)), (F(1, 4), F(3, 4)), (F(3, 5), F(9, 10))]) == 2

    def test_touching_closed_intervals(self):
        assert intersection_multiplicity([(0, F(1, 2)), (F(1, 2), 1)]) == 2

    def test_empty(self):
        assert intersection_multiplicity([]) == 0


class TestBounds:
    """Test the distortion bounds."""

    def test_bound_multiplicity(self):
        report = classify(steep_shallow())
        assert bound_multiplicity(report, 2) == 16, "(e^K e^(LM))^S with e^K = e^M = 2 and L = 1"

    def test_bound_sum_affine(self):
        assert bound_sum(tent(), (0, F(1, 4)), 2) == 1

    def test_bound_sum_requires_one_branch(self):
        with pytest.raises(PreconditionError):
            bound_sum(tent(), (F(1, 4), F(3, 4)), 1)

    def test_extension_bound(self):
        assert extension_bound(F(1, 10), F(1, 5), 0) == 1
        assert extension_bound(F(1, 10), F(1, 5), 5) == pytest.approx(math.exp(-1))

    def test_extension_bound_order(self):
        with pytest.raises(PreconditionError):
            extension_bound(F(1, 5), F(1, 10), 0)


class TestEmpiricalDistortion:
    """Test the measured distortion of iterates."""

    def test_across_jump(self):
        report = empirical_distortion(steep_shallow(), (F(1, 5), F(4, 5)), 1)
        assert report.empirical == 2, "Slopes 3 and 3/2 on either side of 2/5"
        assert report.multiplicity == 1
        assert report.bound_multiplicity == 4
        assert report.bound_sum is None
        assert report.telescoped == 2
        assert report.passed

    def test_tent_has_no_distortion(self):
        report = empirical_distortion(tent(), (F(1, 10), F(3, 10)), 3)
        assert report.empirical == 1
        assert report.passed

    def test_degenerate_interval(self):
        report = empirical_distortion(tent(), (F(1, 3), F(1, 3)), 4)
        assert report.empirical == 1 and report.passed

    def test_smooth_map(self):
        report = empirical_distortion(smooth_quadratic(), (0.01, 0.02), 3)
        assert report.bound_sum is not None, "J, f(J) and f^2(J) stay inside the left branch"
        assert 1 <= report.empirical <= report.bound_sum
        assert report.passed

    def test_smooth_map_random_intervals(self):
        f = smooth_quadratic()
        rng = np.random.default_rng(23)
        checked = 0
        for _ in range(100):
            lo = float(rng.uniform(0.0, 0.3))
            segment = (lo, lo + float(rng.uniform(1e-3, 0.05)))
            report = empirical_distortion(f, segment, int(rng.integers(1, 4)))
            if report.bound_sum is None:
                continue
            checked += 1
            assert report.empirical <= report.bound_sum, f"Summed-length bound fails on {segment}"
        assert checked >= 20, "Most intervals near 0 keep their first iterates inside one branch"


class TestMeasureExtension:
    """Test the relative extension of nested intervals."""

    def test_tent(self):
        trial = measure_extension(tent(), (0, F(1, 4)), (0, F(1, 8)), 2)
        assert (trial.sigma, trial.tau) == (F(3, 8), F(3, 4))
        assert trial.rho == 1
        assert trial.bound == 1
        assert trial.passed

    def test_shared_endpoint_required(self):
        with pytest.raises(PreconditionError):
            measure_extension(tent(), (0, F(1, 4)), (F(1, 16), F(1, 8)), 1)

    def test_random_affine_maps(self):
        rng = np.random.default_rng(31)
        checked = 0
        for _ in range(200):
            f = random_affine_map(rng)
            a = F(int(rng.integers(0, 999_000)), 10 ** 6)
            b = a + F(int(rng.integers(1, 100)), 10 ** 6)
            d = b + F(int(rng.integers(1, 100)), 10 ** 6)
            try:
                trial = measure_extension(f, (a, d), (a, b), int(rng.integers(1, 5)))
            except PreconditionError:
                continue
            checked += 1
            assert trial.rho == trial.bound, "Affine iterates scale J and T by the same factor"
            assert trial.passed
        assert checked >= 100


class TestDistortionTrials:
    """Test the randomized distortion suite."""

    def test_random_maps_pass(self):
        trials = distortion_trials(7, 1000, n_max=8, workers=1)
        assert [map_id for map_id, _ in trials[:3]] == ['random-7-0', 'random-7-1', 'random-7-2']
        assert len(trials) == 1000
        assert max(report.n for _, report in trials) <= 8
        assert all(report.passed for _, report in trials), "Affine maps never exceed the distortion bounds"

    def test_reproducible_across_workers(self):
        assert distortion_trials(11, 6, n_max=3, workers=1) == distortion_trials(11, 6, n_max=3, workers=3)

    def test_fixed_map(self):
        trials = distortion_trials(3, 4, n_max=3, f=steep_shallow(), workers=2)
        assert [map_id for map_id, _ in trials] == ['trial-0', 'trial-1', 'trial-2', 'trial-3']
        assert all(report.passed for _, report in trials)
