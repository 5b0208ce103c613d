from fractions import Fraction as F

import numpy as np
import pytest

from imdyn.errors import PreconditionError
from imdyn.fixtures import FIXTURES, REPELLING_NON_RENORMALIZABLE, tent
from imdyn.map_model import evaluate_array
from imdyn.renormalization import (interval_orbit, is_renormalizable, renorm_tower, restrictive_interval,
                                   verify_restrictive)

HALF = F(1, 2)


class TestRestrictiveInterval:
    """Test the search for restrictive intervals around a turning point."""

    def test_period_two_of_slow_tent(self):
        f = FIXTURES['tent_13_10']()
        found = restrictive_interval(f, HALF, 2)
        assert found is not None, "A tent of slope 13/10 renormalizes with period 2"
        assert found.segment == (F(10, 23), F(13, 23))
        assert found.images[2] == (F(91, 200), F(13, 23))
        assert found.boundary_touching, "J and f(J) share the fixed point 13/23"
        assert verify_restrictive(f, found)

    def test_full_tent_has_none(self):
        assert restrictive_interval(tent(), HALF, 2) is None

    def test_period_one_rejected(self):
        with pytest.raises(PreconditionError):
            restrictive_interval(tent(), HALF, 1)

    def test_interval_orbit(self):
        f = FIXTURES['tent_13_10']()
        images = interval_orbit(f, (F(10, 23), F(13, 23)), 1)
        assert images == [(F(10, 23), F(13, 23)), (F(13, 23), F(13, 20))]


class TestRenormTower:
    """Test the nested towers of restrictive intervals."""

    def test_single_level(self):
        tower = renorm_tower(FIXTURES['tent_13_10'](), HALF, 8)
        assert tower.depth == 1
        assert tower.levels[0].q == 2

    def test_two_levels(self):
        f = FIXTURES['tent_11_10']()
        tower = renorm_tower(f, HALF, 4)
        assert [level.q for level in tower.levels] == [2, 4]
        assert tower.levels[0].segment == (F(10, 21), F(11, 21))
        assert tower.levels[1].segment == (F(110, 221), F(111, 221))
        outer, inner = tower.levels
        assert outer.lo < inner.lo and inner.hi < outer.hi, "Levels are nested"
        assert all(verify_restrictive(f, level) for level in tower.levels)

    @pytest.mark.parametrize("name,periods", [("tent_11_10", [2, 4]), ("tent_13_10", [2])])
    def test_tower_at_period_ten(self, name, periods):
        tower = renorm_tower(FIXTURES[name](), HALF, 10)
        assert [level.q for level in tower.levels] == periods

    @pytest.mark.parametrize("name", ["tent_11_10", "tent_13_10"])
    def test_levels_return_by_sampling(self, name):
        f = FIXTURES[name]()
        tol = 1e-12
        for level in renorm_tower(f, HALF, 10).levels:
            lo, hi = float(level.lo), float(level.hi)
            values = np.linspace(lo, hi, 1000)
            for i in range(1, level.q + 1):
                values = evaluate_array(f, values)
                if i < level.q:
                    assert not np.any((values > lo + tol) & (values < hi - tol)), \
                        f"f^{i}(J) enters the interior of J for q={level.q}"
            assert np.all((values >= lo - tol) & (values <= hi + tol)), f"f^{level.q}(J) leaves J"


class TestIsRenormalizable:
    """Test the per-turning-point verdicts."""

    @pytest.mark.parametrize("name", REPELLING_NON_RENORMALIZABLE)
    def test_non_renormalizable(self, name):
        f = FIXTURES[name]()
        results = is_renormalizable(f, 6)
        assert [result.c for result in results] == list(f.turning_points)
        assert all(result.depth == 0 for result in results), f"{name} admits no restrictive interval"
        assert not any(result.suspect for result in results)

    def test_not_suspect_below_horizon(self):
        [result] = is_renormalizable(FIXTURES['tent_13_10'](), 8)
        assert result.depth == 1
        assert not result.suspect

    def test_suspect_at_horizon(self):
        [result] = is_renormalizable(FIXTURES['tent_11_10'](), 2)
        assert result.depth == 1
        assert result.suspect, "A tower as deep as the horizon allows is flagged"

    @pytest.mark.parametrize("name,depth", [("tent_11_10", 2), ("tent_13_10", 1)])
    def test_depth_at_period_ten(self, name, depth):
        [result] = is_renormalizable(FIXTURES[name](), 10)
        assert result.depth == depth
        assert not result.suspect, "Depth stays below floor(log2 10) = 3"

    @pytest.mark.parametrize("name", ["tent", "tent_9_5", "tent_17_10", "steep_shallow"])
    def test_steep_maps_at_period_ten(self, name):
        f = FIXTURES[name]()
        assert all(result.depth == 0 for result in is_renormalizable(f, 10)), f"{name} admits no restrictive interval"
