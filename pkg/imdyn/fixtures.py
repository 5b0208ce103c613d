"""
Named maps shared by the command line, the tests and the documentation.
"""
from fractions import Fraction
from typing import Callable, Dict

import numpy as np

from imdyn.map_model import PiecewiseMap, SmoothBranch, affine_map
from imdyn.scalar import float_arithmetic

# Breakpoint values of random maps are multiples of 1/RANDOM_VALUE_DENOMINATOR; it is prime,
# so no product of slopes of a random map is +1 or -1.
RANDOM_VALUE_DENOMINATOR = 1009
RANDOM_BREAKPOINT_DENOMINATOR = 60


def tent(slope=2) -> PiecewiseMap:
    """Symmetric tent on [0, 1] with turning point 1/2 and peak slope/2."""
    s = Fraction(slope)
    return affine_map((0, Fraction(1, 2), 1), ((s, 0), (-s, s)))


def steep_shallow() -> PiecewiseMap:
    """Full unimodal map on [0, 6/5] with slopes 3 and -3/2 and turning point 2/5."""
    return affine_map((0, Fraction(2, 5), Fraction(6, 5)), ((3, 0), (Fraction(-3, 2), Fraction(9, 5))))


def bimodal() -> PiecewiseMap:
    """Full bimodal map on [0, 1] with slopes 3, -3, 3."""
    return affine_map((0, Fraction(1, 3), Fraction(2, 3), 1), ((3, 0), (-3, 2), (3, -2)))


def one_contracting() -> PiecewiseMap:
    """Unimodal map whose middle branch contracts (|slope| = 4/5); 3/4 is a derivative jump."""
    return affine_map((0, Fraction(1, 2), Fraction(3, 4), 1),
                      ((2, 0), (Fraction(-4, 5), Fraction(7, 5)), (-2, Fraction(23, 10))))


def attracting_everywhere() -> PiecewiseMap:
    """Unimodal map whose attracting fixed point 1/4 attracts the whole interval."""
    return affine_map((0, Fraction(1, 2), 1),
                      ((Fraction(1, 2), Fraction(1, 8)), (Fraction(-3, 4), Fraction(3, 4))))


def attracting_fixed() -> PiecewiseMap:
    """Unimodal map with a repelling fixed point at 0, an attracting fixed point at 3/5 and a jump at 1/5."""
    return affine_map((0, Fraction(1, 5), Fraction(4, 5), 1),
                      ((2, 0), (Fraction(1, 2), Fraction(3, 10)), (Fraction(-7, 2), Fraction(7, 2))))


def cliff_attractor() -> PiecewiseMap:
    """Attracting fixed point 2/3 whose basin stops short of the turning point 1/4."""
    return affine_map((0, Fraction(1, 4), Fraction(3, 4), Fraction(7, 8), 1),
                      ((4, 0), (Fraction(-4, 5), Fraction(6, 5)), (3, Fraction(-33, 20)), (-3, Fraction(18, 5))))


def smooth_quadratic(a: float = 1.5, b: float = 1.0) -> PiecewiseMap:
    """
    Symmetric unimodal map with quadratic-plus-linear branches
    :param a: Linear coefficient, the minimum of |Df|
    :param b: Quadratic coefficient; a/2 + b/4 must not exceed 1
    :return: A float-mode map whose ln|Df| is Lipschitz with constant 2b/a on each branch
    """
    lipschitz = 2 * b / a
    left = SmoothBranch(func=lambda x: a * x + b * x * x,
                        dfunc=lambda x: a + 2 * b * x,
                        lower=a, upper=a + b, lipschitz=lipschitz)
    right = SmoothBranch(func=lambda x: a * (1 - x) + b * (1 - x) * (1 - x),
                         dfunc=lambda x: -(a + 2 * b * (1 - x)),
                         lower=a, upper=a + b, lipschitz=lipschitz)
    return PiecewiseMap(breakpoints=(0.0, 0.5, 1.0), branches=(left, right), arithmetic=float_arithmetic())


def random_affine_map(rng: np.random.Generator, max_branches: int = 4) -> PiecewiseMap:
    """
    Random continuous affine map of [0, 1] into itself
    :param rng: The numpy random generator
    :param max_branches: The largest number of branches
    :return: A map with between 2 and max_branches branches
    """
    count = int(rng.integers(2, max_branches + 1))
    interior = sorted(int(k) for k in rng.choice(np.arange(1, RANDOM_BREAKPOINT_DENOMINATOR), count - 1,
                                                 replace=False))
    breakpoints = [Fraction(0), *(Fraction(k, RANDOM_BREAKPOINT_DENOMINATOR) for k in interior), Fraction(1)]

    values = [int(rng.integers(0, RANDOM_VALUE_DENOMINATOR))]
    while len(values) < len(breakpoints):
        candidate = int(rng.integers(0, RANDOM_VALUE_DENOMINATOR))
        if candidate != values[-1]:
            values.append(candidate)
    values = [Fraction(v, RANDOM_VALUE_DENOMINATOR) for v in values]

    branches = []
    for (x0, x1), (y0, y1) in zip(zip(breakpoints, breakpoints[1:]), zip(values, values[1:])):
        slope = (y1 - y0) / (x1 - x0)
        branches.append((slope, y0 - slope * x0))
    return affine_map(breakpoints, branches)


FIXTURES: Dict[str, Callable[[], PiecewiseMap]] = {
    'tent': tent,
    'tent_9_5': lambda: tent(Fraction(9, 5)),
    'tent_17_10': lambda: tent(Fraction(17, 10)),
    'tent_13_10': lambda: tent(Fraction(13, 10)),
    'tent_11_10': lambda: tent(Fraction(11, 10)),
    'steep_shallow': steep_shallow,
    'bimodal': bimodal,
    'one_contracting': one_contracting,
    'attracting_everywhere': attracting_everywhere,
    'attracting_fixed': attracting_fixed,
    'cliff_attractor': cliff_attractor,
}

# Maps whose periodic orbits are all repelling and which admit no restrictive interval
REPELLING_NON_RENORMALIZABLE = ('tent', 'tent_9_5', 'tent_17_10', 'steep_shallow', 'bimodal')
