from fractions import Fraction as F

import numpy as np
import pytest

from imdyn.errors import AnalysisRefusal, ArithmeticModeError, PreconditionError, UnresolvedError
from imdyn.expansion_certifier import ExpansionRefusal, expansion_n
from imdyn.fixtures import FIXTURES, bimodal, smooth_quadratic, steep_shallow, tent
from imdyn.map_model import evaluate, evaluate_array
from imdyn.measure_lab import (EndpointTag, Niceness, closest_returns, density_gap_check, first_return,
                               nearest_turning_point, nice_test, omega_approx, psi, pushforward_gap,
                               symmetric_interval, ulam_acip, ulam_edges, vk_components)
from imdyn.scalar import Mode

HALF = F(1, 2)


class TestSymmetricInterval:
    """Test the symmetric intervals around a turning point."""

    def test_tent(self):
        window = symmetric_interval(tent(), HALF, F(2, 5))
        assert (window.lo, window.hi) == (F(2, 5), F(3, 5))
        assert window.contains(HALF)
        assert not window.contains(F(3, 5)), "U_x is open"

    def test_collapsed_at_turning_point(self):
        window = symmetric_interval(tent(), HALF, HALF)
        assert window.degenerate
        assert window.interval.empty

    def test_nearest_turning_point(self):
        assert nearest_turning_point(bimodal(), F(9, 10)) == F(2, 3)


class TestNiceTest:
    """Test whether orbits avoid their own symmetric interval."""

    @pytest.mark.parametrize("x,verdict,witness", [
        (F(2, 5), Niceness.NICE, None),
        (F(49, 100), Niceness.NICE, None),
        (F(3, 10), Niceness.NOT_NICE, 1),
        (F(7, 16), Niceness.NOT_NICE, 3),
    ])
    def test_tent(self, x, verdict, witness):
        result = nice_test(tent(), x)
        assert result.verdict is verdict
        assert result.witness == witness


class TestFirstReturn:
    """Test the first-return partition into a symmetric interval."""

    def test_transfer_times(self):
        f = tent()
        structure = first_return(f, symmetric_interval(f, HALF, F(2, 5)), horizon=4)
        first = [(component.lo, component.hi) for component in structure.components if component.time == 1]
        assert first == [(F(1, 5), F(3, 10)), (F(7, 10), F(4, 5))]
        assert structure.component_containing(F(1, 4)).time == 1
        assert structure.component_containing(F(3, 8)).time == 2
        assert HALF in structure.unresolved, "The orbit of 1/2 falls onto the fixed point 0"

    def test_components_are_disjoint(self):
        f = tent()
        structure = first_return(f, symmetric_interval(f, HALF, F(2, 5)), horizon=5)
        for left, right in zip(structure.components, structure.components[1:]):
            assert left.hi <= right.lo

    @pytest.mark.parametrize("name,x", [('tent', F(2, 5)), ('tent_9_5', F(2, 5)), ('steep_shallow', F(3, 10))])
    def test_endpoints_come_from_the_window_or_breakpoints(self, name, x):
        f = FIXTURES[name]()
        c = nearest_turning_point(f, x)
        base = symmetric_interval(f, c, x)
        structure = first_return(f, base, horizon=5)
        window_ends = {base.lo, base.hi}
        piece_ends = set(f.breakpoints)
        assert structure.components
        for component in structure.components:
            for e in (component.lo, component.hi):
                orbit = [e]
                for _ in range(component.time):
                    orbit.append(evaluate(f, orbit[-1]))
                on_window = any(y in window_ends for y in orbit)
                on_piece_end = any(y in piece_ends for y in orbit[:-1])
                assert on_window or on_piece_end, f"{e} maps onto neither the window boundary nor a breakpoint"


class TestPsi:
    """Test the symmetric interval mapped onto the return component of f(c)."""

    def test_renormalizable_tent(self):
        window = psi(FIXTURES['tent_13_10'](), F(10, 23), horizon=4)
        assert (window.lo, window.hi) == (F(10, 23), F(13, 23))

    def test_peak_never_returns(self):
        with pytest.raises(UnresolvedError):
            psi(tent(), F(2, 5), horizon=4)

    def test_requires_nice_point(self):
        with pytest.raises(PreconditionError):
            psi(tent(), F(3, 10), horizon=4)


class TestClosestReturns:
    """Test the sequence of closest returns."""

    def test_tent(self):
        returns = closest_returns(tent(), F(3, 10), HALF, 3, horizon=20)
        assert returns.times == (0, 1)
        assert returns.points == (F(3, 10), F(3, 5))

    def test_orbit_stays_away(self):
        with pytest.raises(UnresolvedError):
            closest_returns(bimodal(), 1, F(1, 3), 3)


class TestVkComponents:
    """Test the components of points entering their symmetric interval at time k."""

    def test_tent_first_entry(self):
        components = vk_components(tent(), HALF, 1)
        assert [(component.lo, component.hi) for component in components] == [(0, F(1, 3)), (F(2, 3), 1)]
        assert (components[0].lo_tag, components[0].hi_tag) == (EndpointTag.WINDOW, EndpointTag.RETURNS)
        assert (components[1].lo_tag, components[1].hi_tag) == (EndpointTag.RETURNS, EndpointTag.WINDOW)

    @pytest.mark.parametrize("name", ['tent', 'tent_9_5', 'tent_13_10', 'steep_shallow'])
    @pytest.mark.parametrize("k", range(1, 7))
    def test_endpoints_return_or_bound_the_window(self, name, k):
        f = FIXTURES[name]()
        for component in vk_components(f, f.turning_points[0], k):
            assert EndpointTag.OTHER not in (component.lo_tag, component.hi_tag), \
                f"V_{k} component ({component.lo}, {component.hi}) has an endpoint of unknown origin"

    def test_float_map_rejected(self):
        with pytest.raises(ArithmeticModeError):
            vk_components(smooth_quadratic(), 0.5, 1)

    def test_k_must_be_positive(self):
        with pytest.raises(PreconditionError):
            vk_components(tent(), HALF, 0)


class TestOmegaApprox:
    """Test the omega-limit covers."""

    def test_preperiodic_turning_point(self):
        approx = omega_approx(tent(), HALF, burn=10, steps=20, eps_list=[F(1, 100)])
        assert approx.arithmetic is Mode.EXACT
        assert approx.tail == (0,)
        assert approx.covers[0].cover_length == F(1, 50), "A single point is covered by one ball"

    def test_period_two_orbit(self):
        approx = omega_approx(tent(), F(2, 5), burn=5, steps=10, eps_list=[F(1, 100), F(1, 4)])
        assert approx.tail == (F(2, 5), F(4, 5))
        small, large = approx.covers
        assert (small.cover_length, small.component_count) == (F(1, 25), 2)
        assert (large.cover_length, large.component_count) == (F(9, 10), 1)

    def test_falls_back_to_floats(self):
        approx = omega_approx(FIXTURES['tent_9_5'](), HALF, burn=100, steps=5000,
                              eps_list=[F(1, 10), F(1, 100)])
        assert approx.arithmetic is Mode.FLOAT
        coarse, fine = approx.covers
        assert 0 < fine.cover_length <= coarse.cover_length

    @pytest.mark.parametrize("steps", [0, -1])
    def test_empty_tail_rejected(self, steps):
        with pytest.raises(PreconditionError):
            omega_approx(FIXTURES['tent_9_5'](), HALF, burn=10, steps=steps)


class TestDensityGapCheck:
    """Test the finite-horizon hypotheses on nested symmetric intervals."""

    def test_pass(self):
        f = tent()
        check = density_gap_check(f, HALF, symmetric_interval(f, HALF, F(9, 20)),
                                  symmetric_interval(f, HALF, F(2, 5)), 2)
        assert check.passed, check.reason

    def test_boundary_not_nice(self):
        f = tent()
        check = density_gap_check(f, HALF, symmetric_interval(f, HALF, F(9, 20)),
                                  symmetric_interval(f, HALF, F(7, 16)), 2)
        assert not check.passed
        assert check.witness == 3

    def test_ratio_too_small(self):
        f = tent()
        check = density_gap_check(f, HALF, symmetric_interval(f, HALF, F(9, 20)),
                                  symmetric_interval(f, HALF, F(2, 5)), 3)
        assert not check.passed

    def test_nesting_required(self):
        f = tent()
        with pytest.raises(PreconditionError):
            density_gap_check(f, HALF, symmetric_interval(f, HALF, F(2, 5)),
                              symmetric_interval(f, HALF, F(9, 20)), 2)


class TestUlam:
    """Test the Ulam estimate of the invariant density."""

    def test_tent_uniform(self):
        f = tent()
        estimate = ulam_acip(f, 64, expansion_n(f))
        assert estimate.converged
        np.testing.assert_allclose(estimate.density, 1.0, atol=1e-9)
        assert pushforward_gap(estimate, range(10)) < 1e-9

    def test_single_bin(self):
        f = tent()
        estimate = ulam_acip(f, 1, expansion_n(f))
        assert estimate.bin_count == 1
        np.testing.assert_allclose(estimate.density, [1.0])

    def test_steep_shallow_preserves_lebesgue(self):
        f = steep_shallow()
        estimate = ulam_acip(f, 30, expansion_n(f))
        np.testing.assert_allclose(estimate.density, 5 / 6, atol=1e-9)
        assert F(2, 15) in estimate.edges, "Preimages of the breakpoint refine the grid"

    def test_edges(self):
        assert ulam_edges(tent(), 4) == [0, F(1, 4), F(1, 2), F(3, 4), 1]

    def test_refusal_without_certificate(self):
        f = tent()
        with pytest.raises(AnalysisRefusal):
            ulam_acip(f, 10, None)
        with pytest.raises(AnalysisRefusal):
            ulam_acip(f, 10, ExpansionRefusal(3, F(1, 2), (0, 0, 0)))

    def test_tent_fine_grid(self):
        f = tent()
        estimate = ulam_acip(f, 1024, expansion_n(f))
        assert estimate.bin_count == 1024
        assert estimate.converged
        np.testing.assert_allclose(estimate.density, 1.0, atol=1e-9)

    @pytest.mark.parametrize("name,m", [('tent', 64), ('tent_9_5', 100), ('steep_shallow', 30)])
    def test_transfer_rows_are_stochastic(self, name, m):
        f = FIXTURES[name]()
        estimate = ulam_acip(f, m, expansion_n(f))
        row_sums = np.asarray(estimate.transfer.sum(axis=1)).ravel()
        np.testing.assert_allclose(row_sums, 1.0, atol=1e-12, err_msg="Every bin sends all of its mass somewhere")

    def test_converged_means_both_residuals_small(self):
        f = FIXTURES['tent_9_5']()
        estimate = ulam_acip(f, 64, expansion_n(f))
        assert estimate.converged
        assert estimate.step_residual < 1e-12 and estimate.residual < 1e-12

    def test_iteration_cap_is_not_convergence(self):
        f = FIXTURES['tent_9_5']()
        estimate = ulam_acip(f, 64, expansion_n(f), max_iterations=1)
        assert not estimate.converged, "Uniform mass is not invariant when the image misses (9/10, 1]"
        assert estimate.iterations == 1

    def test_invariance_on_random_unions(self):
        f = FIXTURES['tent_9_5']()
        estimate = ulam_acip(f, 64, expansion_n(f))
        rng = np.random.default_rng(2024)
        for _ in range(200):
            size = int(rng.integers(1, estimate.bin_count + 1))
            bins = rng.choice(estimate.bin_count, size=size, replace=False)
            assert pushforward_gap(estimate, bins) < 1e-9

    def test_matches_orbit_histogram(self):
        f = FIXTURES['tent_9_5']()
        estimate = ulam_acip(f, 256, expansion_n(f))
        rng = np.random.default_rng(7)
        points = rng.random(10_000)
        for _ in range(50):
            points = evaluate_array(f, points)
        samples = []
        for _ in range(100):
            points = evaluate_array(f, points)
            samples.append(points)
        coarse = 16
        counts, _ = np.histogram(np.concatenate(samples), bins=coarse, range=(0.0, 1.0))
        empirical = counts / counts.sum()
        lows = np.array([float(lo) for lo in estimate.edges[:-1]])
        predicted = np.array([estimate.masses[(lows >= k / coarse) & (lows < (k + 1) / coarse)].sum()
                              for k in range(coarse)])
        assert np.abs(empirical - predicted).sum() < 0.05, "10^6 orbit samples follow the Ulam density"
