"""
Orbits, derivative cocycles and exhaustive enumeration of periodic orbits.

Periodic points of period dividing n are the fixed points of the monotone branches of f^n,
so enumerating branch words finds all of them.
"""
from dataclasses import dataclass
from enum import Enum
import logging
from typing import Dict, List, Optional, Sequence, Tuple

from scipy.optimize import bisect as root_bisect

from imdyn import config
from imdyn.errors import BudgetExceededError, NonIsolatedPeriodicPointsError, PreconditionError
from imdyn.map_model import (BranchWord, MonotoneBranch, PiecewiseMap, Side, deriv, evaluate,
                             restricted_branches)
from imdyn.scalar import Scalar, format_scalar

logger = logging.getLogger(__name__)


class Hyperbolicity(str, Enum):
    REPELLING = 'repelling'
    ATTRACTING = 'attracting'
    NON_HYPERBOLIC = 'non_hyperbolic'


class TurningOrbitType(str, Enum):
    PERIODIC = 'periodic'
    PREPERIODIC = 'preperiodic'
    NON_RECURRENT_AT_HORIZON = 'non_recurrent_at_horizon'
    RECURRENT_SUSPECT = 'recurrent_suspect'


@dataclass(frozen=True)
class OrbitSegment:
    start: Scalar
    points: Tuple[Scalar, ...]
    derivatives: Tuple[Tuple[Scalar, Scalar], ...]


@dataclass(frozen=True)
class OrbitDerivative:
    left: Scalar
    right: Scalar
    left_steps: Tuple[Scalar, ...]
    right_steps: Tuple[Scalar, ...]

    @property
    def magnitude(self) -> Scalar:
        return min(abs(self.left), abs(self.right))

    @property
    def weakest_steps(self) -> Tuple[Scalar, ...]:
        """Per-step |Df| along the one-sided chain attaining the magnitude."""
        steps = self.left_steps if abs(self.left) <= abs(self.right) else self.right_steps
        return tuple(abs(step) for step in steps)


@dataclass(frozen=True)
class PeriodicOrbit:
    points: Tuple[Scalar, ...]
    multiplier_left: Scalar
    multiplier_right: Scalar
    hyperbolicity: Hyperbolicity
    word: BranchWord
    steps: Tuple[Scalar, ...]

    @property
    def period(self) -> int:
        return len(self.points)

    @property
    def multiplier(self) -> Scalar:
        """|Df^n| at the base point, liminf convention."""
        return min(abs(self.multiplier_left), abs(self.multiplier_right))


def iterate(f: PiecewiseMap, x: Scalar, n: int) -> OrbitSegment:
    points = [x]
    derivatives = []
    for _ in range(n):
        derivatives.append((deriv(f, points[-1], Side.LEFT), deriv(f, points[-1], Side.RIGHT)))
        points.append(evaluate(f, points[-1]))
    return OrbitSegment(start=x, points=tuple(points), derivatives=tuple(derivatives))


def _chain(f: PiecewiseMap, x: Scalar, n: int, side: Side) -> Tuple[Scalar, Tuple[Scalar, ...]]:
    product = f.coerce(1)
    steps = []
    for _ in range(n):
        d = deriv(f, x, side)
        steps.append(d)
        product *= d
        if d < 0:
            side = side.flipped()
        x = evaluate(f, x)
    return product, tuple(steps)


def orbit_derivative(f: PiecewiseMap, x: Scalar, n: int) -> OrbitDerivative:
    """
    One-sided derivatives of f^n at x; the side flips after every orientation-reversing step
    :param f: The map
    :param x: A point of the domain
    :param n: The iterate
    :return: Both one-sided chain products and their per-step factors
    """
    left, left_steps = _chain(f, x, n, Side.LEFT)
    right, right_steps = _chain(f, x, n, Side.RIGHT)
    return OrbitDerivative(left=left, right=right, left_steps=left_steps, right_steps=right_steps)


def classify_multipliers(f: PiecewiseMap, left: Scalar, right: Scalar) -> Hyperbolicity:
    arith = f.arithmetic
    magnitudes = (abs(left), abs(right))
    if all(arith.gt(m, 1) for m in magnitudes):
        return Hyperbolicity.REPELLING
    if all(arith.lt(m, 1) for m in magnitudes):
        return Hyperbolicity.ATTRACTING
    return Hyperbolicity.NON_HYPERBOLIC


def classify_periodic(f: PiecewiseMap, orbit: PeriodicOrbit) -> Hyperbolicity:
    return classify_multipliers(f, orbit.multiplier_left, orbit.multiplier_right)


def check_budget(f: PiecewiseMap, n: int, budget: Optional[int] = None):
    budget = config.word_budget() if budget is None else budget
    requested = f.branch_count ** n
    if requested > budget:
        raise BudgetExceededError(requested, budget)


def _fixed_points_of_branches(f: PiecewiseMap, branches: Sequence[MonotoneBranch]) -> Dict[Scalar, BranchWord]:
    arith = f.arithmetic
    found: Dict[Scalar, BranchWord] = {}
    for branch in branches:
        if branch.slope is not None:
            if branch.slope == 1:
                if branch.intercept == 0:
                    raise NonIsolatedPeriodicPointsError(
                        f'f^{len(branch.word)} is the identity on [{format_scalar(branch.lo)}, {format_scalar(branch.hi)}]')
                continue
            x = branch.intercept / (1 - branch.slope)
            if branch.lo <= x <= branch.hi:
                found.setdefault(x, branch.word)
        else:
            x = _smooth_fixed_point(f, branch)
            if x is not None and not any(arith.eq(x, y) for y in found):
                found[x] = branch.word
    return found


def _smooth_fixed_point(f: PiecewiseMap, branch: MonotoneBranch) -> Optional[float]:
    def gap(x):
        y = x
        for index in branch.word:
            y = f.branches[index].value(y)
        return y - x

    lo, hi = float(branch.lo), float(branch.hi)
    g_lo, g_hi = gap(lo), gap(hi)
    if abs(g_lo) <= f.arithmetic.tolerance:
        return lo
    if abs(g_hi) <= f.arithmetic.tolerance:
        return hi
    if g_lo * g_hi > 0:
        return None
    return root_bisect(gap, lo, hi, xtol=1e-15)


def fixed_points(f: PiecewiseMap, n: int, budget: Optional[int] = None) -> List[Scalar]:
    """
    All solutions of f^n(x) = x, periods dividing n included
    :param f: The map
    :param n: The iterate
    :param budget: Word budget, from the configuration when None
    :return: The sorted solutions
    """
    return sorted(_fixed_point_words(f, n, budget))


def _fixed_point_words(f: PiecewiseMap, n: int, budget: Optional[int]) -> Dict[Scalar, BranchWord]:
    check_budget(f, n, budget)
    branches = restricted_branches(f, None, n, workers=config.worker_count())
    logger.debug('Enumerated %d monotone branches of f^%d', len(branches), n)
    return _fixed_points_of_branches(f, branches)


def periodic_orbits(f: PiecewiseMap, n: int, budget: Optional[int] = None) -> List[PeriodicOrbit]:
    """
    The complete set of periodic orbits of minimal period n
    :param f: The map
    :param n: The period
    :param budget: Word budget, from the configuration when None
    :return: The orbits, sorted by word; each orbit starts at its smallest point
    """
    if n < 1:
        raise PreconditionError('The period must be at least 1')
    words = _fixed_point_words(f, n, budget)
    arith = f.arithmetic
    orbits: Dict[Scalar, PeriodicOrbit] = {}
    claimed = set()
    for x in sorted(words):
        if x in claimed or (not arith.exact and any(arith.eq(x, y) for y in claimed)):
            continue
        points = iterate(f, x, n).points
        if any(arith.eq(points[d], x) for d in range(1, n) if n % d == 0):
            continue
        cycle = points[:n]
        base_index = min(range(n), key=lambda k: cycle[k])
        cycle = cycle[base_index:] + cycle[:base_index]
        base = cycle[0]
        cocycle = orbit_derivative(f, base, n)
        word = words.get(base) or _nearest_word(words, base, arith)
        orbits[base] = PeriodicOrbit(
            points=cycle,
            multiplier_left=cocycle.left,
            multiplier_right=cocycle.right,
            hyperbolicity=classify_multipliers(f, cocycle.left, cocycle.right),
            word=word,
            steps=cocycle.weakest_steps)
        claimed.update(cycle)
    result = sorted(orbits.values(), key=lambda orbit: orbit.word)
    logger.info('Found %d orbits of minimal period %d', len(result), n)
    return result


def _nearest_word(words: Dict[Scalar, BranchWord], x: Scalar, arith) -> BranchWord:
    for point, word in words.items():
        if arith.eq(point, x):
            return word
    raise PreconditionError(f'No branch word realises the orbit through {format_scalar(x)}')


def minimax_rotation(steps: Sequence[Scalar], bound: Scalar) -> Optional[int]:
    """
    Find a cyclic start whose partial products of per-step |Df| stay below a bound
    :param steps: The per-step derivative magnitudes around a cycle
    :param bound: The bound C, at least the full product
    :return: The first feasible rotation index, None when no rotation is feasible
    """
    total = 1
    for step in steps:
        total *= step
    if total > bound:
        raise PreconditionError(f'|Df^n| = {format_scalar(total)} exceeds C = {format_scalar(bound)}')
    n = len(steps)
    for start in range(n):
        partial = 1
        for j in range(n):
            partial *= steps[(start + j) % n]
            if partial > bound:
                break
        else:
            return start
    return None


def minimax_start(orbit: PeriodicOrbit, bound: Scalar) -> Optional[Scalar]:
    """
    :param orbit: A periodic orbit with |Df^n| <= bound
    :param bound: The bound C
    :return: An orbit point q with |Df^j(q)| <= C for every 1 <= j <= n, or None
    """
    start = minimax_rotation(orbit.steps, bound)
    if start is None:
        logger.warning('No rotation of the orbit through %s keeps partial products below %s',
                       format_scalar(orbit.points[0]), format_scalar(bound))
        return None
    return orbit.points[start]


def turning_orbit_type(f: PiecewiseMap, c: Scalar, horizon: int = config.DEFAULT_NICE_HORIZON) -> TurningOrbitType:
    """
    Classify the forward orbit of a turning point by exact iteration
    :param f: The map
    :param c: A turning point
    :param horizon: Number of iterates to inspect
    :return: periodic or preperiodic when the orbit closes up, otherwise a verdict at the horizon
    """
    seen = {c: 0}
    x = c
    distances = []
    for k in range(1, horizon + 1):
        x = evaluate(f, x)
        if x in seen:
            return TurningOrbitType.PERIODIC if x == c else TurningOrbitType.PREPERIODIC
        seen[x] = k
        distances.append(abs(x - c))
    half = len(distances) // 2
    if half and min(distances[half:]) < min(distances[:half]):
        return TurningOrbitType.RECURRENT_SUSPECT
    return TurningOrbitType.NON_RECURRENT_AT_HORIZON
