"""
Growth of derivatives along periodic orbits and eventual-expansion certificates.
"""
from dataclasses import dataclass
from fractions import Fraction
import logging
import math
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import portion as P

from imdyn import config
from imdyn.errors import CertificateError, NonHyperbolicOrbitError, PreconditionError, UnresolvedError
from imdyn.intervals import Segment, union
from imdyn.map_model import (BranchWord, MonotoneBranch, PiecewiseMap, branch_levels, classify, evaluate,
                             extend_branch, identity_branch, image_interval, preimage, restricted_branches)
from imdyn.orbit_engine import (Hyperbolicity, PeriodicOrbit, check_budget, fixed_points, orbit_derivative,
                                periodic_orbits)
from imdyn.scalar import Scalar, exact_root, format_scalar, log_abs

logger = logging.getLogger(__name__)

BASIN_BISECTION_STEPS = 24


def _magnitude(branch: MonotoneBranch) -> Scalar:
    return abs(branch.slope) if branch.slope is not None else branch.deriv_lower


# ===== K_n table =====

@dataclass(frozen=True)
class KnRow:
    n: int
    k_n: Optional[Scalar]
    orbit_count: int
    attaining_word: Optional[BranchWord]


@dataclass(frozen=True)
class KnTable:
    rows: Tuple[KnRow, ...]

    def value(self, n: int) -> Optional[Scalar]:
        return self.rows[n - 1].k_n


def kn_table(f: PiecewiseMap, n_max: int, budget: Optional[int] = None) -> KnTable:
    """
    Minimum of |Df^n| over the orbits of minimal period n, for every n <= n_max
    :param f: The map
    :param n_max: The largest period
    :param budget: Word budget, from the configuration when None
    :return: The table; periods without orbits have no value
    """
    check_budget(f, n_max, budget)
    rows = []
    for n in range(1, n_max + 1):
        orbits = periodic_orbits(f, n, budget)
        if orbits:
            weakest = min(orbits, key=lambda orbit: orbit.multiplier)
            rows.append(KnRow(n, weakest.multiplier, len(orbits), weakest.word))
        else:
            rows.append(KnRow(n, None, 0, None))
    return KnTable(tuple(rows))


# ===== |Df^N| > 1 =====

@dataclass(frozen=True)
class ExpansionCertificate:
    n: int
    min_expansion: Scalar
    worst_word: BranchWord


@dataclass(frozen=True)
class ExpansionRefusal:
    n_limit: int
    min_expansion: Scalar
    worst_word: BranchWord

    @property
    def reason(self) -> str:
        return (f'no N <= {self.n_limit} with |Df^N| > 1: word {"-".join(map(str, self.worst_word))} '
                f'has |Df^{self.n_limit}| = {format_scalar(self.min_expansion)}')


def expansion_n(f: PiecewiseMap, n_limit: int = config.DEFAULT_EXPANSION_LIMIT,
                budget: Optional[int] = None) -> Union[ExpansionCertificate, ExpansionRefusal]:
    """
    Smallest N <= n_limit with |Df^N| > 1 on the whole interval
    :param f: The map
    :param n_limit: The largest iterate to try
    :param budget: Word budget per level, from the configuration when None
    :return: A certificate, or a refusal carrying the worst word at the last level enumerated
    """
    budget = config.word_budget() if budget is None else budget
    levels = branch_levels(f, None, n_limit)
    level: List[MonotoneBranch] = []
    worst, reached = None, 0
    for n in range(1, n_limit + 1):
        if worst is not None and len(level) * f.branch_count > budget:
            logger.warning('Level N=%d may exceed the word budget of %d, stopping at N=%d', n, budget, reached)
            break
        level = next(levels)
        worst = min(level, key=_magnitude)
        reached = n
        lowest = _magnitude(worst)
        logger.debug('N=%d: %d words, min |Df^N| = %s', n, len(level), format_scalar(lowest))
        if f.arithmetic.gt(lowest, 1):
            logger.info('Expansion certified at N=%d with min |Df^N| = %s', n, format_scalar(lowest))
            return ExpansionCertificate(n, lowest, worst.word)
    refusal = ExpansionRefusal(reached, _magnitude(worst), worst.word)
    logger.warning('Expansion refused: %s', refusal.reason)
    return refusal


# ===== Points avoiding an open set =====

@dataclass(frozen=True)
class AvoidanceSet:
    avoid: P.Interval
    n: int
    levels: Tuple[P.Interval, ...]
    min_deriv_per_k: Tuple[Optional[Scalar], ...]

    @property
    def gamma(self) -> P.Interval:
        return self.levels[-1]


def gamma_n(f: PiecewiseMap, avoid: P.Interval, n: int) -> AvoidanceSet:
    """
    Points whose first n+1 iterates avoid an open set, with the minimum of |Df^k| on each level
    :param f: The map
    :param avoid: A finite union of open intervals
    :param n: The horizon
    :return: Gamma_0 ... Gamma_n and min |Df^k| over Gamma_k (None when Gamma_k is empty)
    """
    a, b = f.domain
    base = P.closed(a, b) - avoid
    levels = [base]
    for _ in range(n):
        levels.append(base & preimage(f, levels[-1]))

    minima: List[Optional[Scalar]] = [f.coerce(1) if not base.empty else None]
    level = [identity_branch(f)]
    for k in range(1, n + 1):
        gamma = levels[k]
        level = [child for parent in level for index in range(f.branch_count)
                 if (child := extend_branch(f, parent, index)) is not None
                 and not (gamma & P.closed(child.lo, child.hi)).empty]
        minima.append(min((_magnitude(branch) for branch in level), default=None))
    return AvoidanceSet(avoid=avoid, n=n, levels=tuple(levels), min_deriv_per_k=tuple(minima))


# ===== Immediate basins =====

@dataclass(frozen=True)
class Basin:
    orbit: PeriodicOrbit
    intervals: Tuple[Segment, ...]


@dataclass(frozen=True)
class BasinSet:
    basins: Tuple[Basin, ...]
    period_bound: int

    @property
    def attractors(self) -> Tuple[PeriodicOrbit, ...]:
        return tuple(basin.orbit for basin in self.basins)

    def interior(self, f: PiecewiseMap) -> P.Interval:
        """Union of the basin interiors relative to the domain; a periodic domain endpoint stays outside."""
        a, b = f.domain
        parts = []
        for basin in self.basins:
            period = 2 * basin.orbit.period
            for lo, hi in basin.intervals:
                if lo < hi:
                    left = P.CLOSED if lo == a and not _returns(f, a, period) else P.OPEN
                    right = P.CLOSED if hi == b and not _returns(f, b, period) else P.OPEN
                    parts.append(P.Interval.from_atomic(left, lo, hi, right))
        return union(parts)


def _returns(f: PiecewiseMap, x: Scalar, n: int) -> bool:
    y = x
    for _ in range(n):
        y = evaluate(f, y)
    return f.arithmetic.eq(x, y)


def iterate_image(f: PiecewiseMap, lo: Scalar, hi: Scalar, n: int) -> Segment:
    for _ in range(n):
        lo, hi = image_interval(f, lo, hi)
    return lo, hi


def _invariant(f: PiecewiseMap, lo: Scalar, hi: Scalar, period: int) -> bool:
    image_lo, image_hi = iterate_image(f, lo, hi, period)
    return lo <= image_lo and image_hi <= hi


def _basin_interval(f: PiecewiseMap, x: Scalar, period: int, neighbours: Sequence[Scalar]) -> Segment:
    a, b = f.domain
    limit_lo = max((y for y in neighbours if y < x), default=a)
    limit_hi = min((y for y in neighbours if y > x), default=b)
    if _invariant(f, limit_lo, limit_hi, period):
        return limit_lo, limit_hi

    pieces = [branch for branch in restricted_branches(f, None, period) if branch.contains(x)]
    room_lo = max((x - branch.lo for branch in pieces if branch.lo < x), default=0)
    room_hi = max((branch.hi - x for branch in pieces if branch.hi > x), default=0)
    radius = min(r for r in (room_lo, room_hi) if r > 0)
    lo, hi = x - min(radius, room_lo), x + min(radius, room_hi)
    if not _invariant(f, lo, hi, period):
        logger.warning('Contraction neighbourhood of %s is not invariant', format_scalar(x))
        return x, x

    for _ in range(BASIN_BISECTION_STEPS):
        if lo > limit_lo:
            middle = (lo + limit_lo) / 2
            if _invariant(f, middle, hi, period):
                lo = middle
            else:
                limit_lo = middle
        if hi < limit_hi:
            middle = (hi + limit_hi) / 2
            if _invariant(f, lo, middle, period):
                hi = middle
            else:
                limit_hi = middle
    return lo, hi


def immediate_basins(f: PiecewiseMap, period_bound: int = config.DEFAULT_PERIOD_BOUND,
                     orbits: Optional[Iterable[PeriodicOrbit]] = None) -> BasinSet:
    """
    Immediate basins of the attracting orbits of period <= period_bound
    :param f: The map
    :param period_bound: The largest period searched for attractors
    :param orbits: Periodic orbits already enumerated up to the bound
    :return: Per attractor, one invariant interval around each orbit point
    """
    if orbits is None:
        orbits = [orbit for n in range(1, period_bound + 1) for orbit in periodic_orbits(f, n)]
    basins = []
    for orbit in orbits:
        if orbit.hyperbolicity is not Hyperbolicity.ATTRACTING:
            continue
        neighbours = fixed_points(f, 2 * orbit.period)
        intervals = tuple(_basin_interval(f, x, orbit.period, neighbours) for x in orbit.points)
        basins.append(Basin(orbit, intervals))
        logger.info('Attractor of period %d at %s, basin %s', orbit.period, format_scalar(orbit.points[0]),
                    ', '.join(f'[{format_scalar(lo)}, {format_scalar(hi)}]' for lo, hi in intervals))
    return BasinSet(tuple(basins), period_bound)


# ===== Growth away from the excluded set =====

@dataclass(frozen=True)
class ManeReport:
    avoid: P.Interval
    n_max: int
    minima: Tuple[Optional[Scalar], ...]
    growth: Optional[Scalar]
    constant: Optional[Scalar]
    certified: bool
    empty_from: Optional[int]
    basins: BasinSet


def _fit_growth(minima: Sequence[Optional[Scalar]], n_max: int) -> Tuple[Optional[Scalar], Optional[Scalar]]:
    points = [(k, m) for k, m in enumerate(minima) if k >= 1 and m is not None]
    upper = [(k, m) for k, m in points if 2 * k >= n_max]
    if len(upper) < 2:
        return None, None

    ratios = {upper[i + 1][1] / upper[i][1] for i in range(len(upper) - 1)
              if upper[i + 1][0] == upper[i][0] + 1}
    if len(ratios) == 1 and all(isinstance(m, Fraction) for _, m in upper) and len(upper) == upper[-1][0] - upper[0][0] + 1:
        growth = ratios.pop()
        constant = min(m / growth ** k for k, m in points)
        return growth, constant

    slope, _ = np.polyfit([float(k) for k, _ in upper], [log_abs(m) for _, m in upper], 1)
    growth = math.exp(slope)
    constant = min(float(m) / growth ** k for k, m in points)
    return growth, constant


def mane_growth(f: PiecewiseMap, avoid: P.Interval, n_max: int,
                period_bound: int = config.DEFAULT_PERIOD_BOUND) -> ManeReport:
    """
    Growth of min |Df^n| over the points avoiding an open set and the immediate basins
    :param f: The map
    :param avoid: A finite union of open intervals
    :param n_max: The horizon
    :param period_bound: Largest period searched for periodic orbits outside the set
    :return: Per-n minima, the fitted growth rate and constant, and whether the growth is certified
    """
    orbits = [orbit for n in range(1, period_bound + 1) for orbit in periodic_orbits(f, n)]
    for orbit in orbits:
        if orbit.hyperbolicity is Hyperbolicity.NON_HYPERBOLIC and not any(x in avoid for x in orbit.points):
            raise NonHyperbolicOrbitError(orbit)

    basins = immediate_basins(f, period_bound, orbits)
    excluded = avoid | basins.interior(f)
    minima = gamma_n(f, excluded, n_max).min_deriv_per_k
    empty_from = next((k for k, m in enumerate(minima) if m is None), None)
    if empty_from is not None:
        logger.warning('Points avoiding the excluded set vanish at n=%d', empty_from)
        return ManeReport(avoid, n_max, minima, None, None, False, empty_from, basins)

    growth, constant = _fit_growth(minima, n_max)
    upper = [m for k, m in enumerate(minima) if 2 * k >= n_max and k >= 1]
    increasing = all(x < y for x, y in zip(upper, upper[1:]))
    certified = growth is not None and growth > 1 and increasing and any(m > 1 for m in minima)
    return ManeReport(avoid, n_max, minima, growth, constant, certified, None, basins)


# ===== Uniform hyperbolicity from samples =====

@dataclass(frozen=True)
class HyperbolicSample:
    point: Scalar
    n: int
    bound: Scalar


@dataclass(frozen=True)
class HyperbolicCertificate:
    constant: Scalar
    rate: Scalar
    n: int
    bound: Scalar


def hyperbolic_certificate(f: PiecewiseMap, samples: Sequence[HyperbolicSample], m: Optional[Scalar] = None,
                           horizon: int = 24) -> HyperbolicCertificate:
    """
    Turn per-point expansion bounds into |Df^n(x)| >= C * rate^n for all n
    :param f: The map
    :param samples: Points with an iterate n_x and a bound lambda > 1 on |Df^(n_x)|
    :param m: The minimum of |Df| over the interval, from the class report when None
    :param horizon: Iterates on which the tighter constant m^N is checked
    :return: The constant C and the rate lambda^(1/N)
    """
    if not samples:
        raise PreconditionError('At least one sample is required')
    for sample in samples:
        if not sample.bound > 1:
            raise PreconditionError(f'Sample bound {format_scalar(sample.bound)} is not larger than 1')
        observed = orbit_derivative(f, sample.point, sample.n).magnitude
        if observed < sample.bound:
            raise CertificateError(f'|Df^{sample.n}({format_scalar(sample.point)})| = {format_scalar(observed)} '
                                   f'is below {format_scalar(sample.bound)}')

    if m is None:
        m = classify(f).min_abs_deriv
    lam = min(sample.bound for sample in samples)
    n = max(sample.n for sample in samples)
    rate = exact_root(lam, n) if isinstance(lam, Fraction) else None
    if rate is None:
        rate = float(lam) ** (1.0 / n)

    if m >= 1:
        return HyperbolicCertificate(constant=1 / lam, rate=rate, n=n, bound=lam)

    tight = m ** n
    if all(_holds(f, sample.point, tight, rate, horizon) for sample in samples):
        return HyperbolicCertificate(constant=tight, rate=rate, n=n, bound=lam)
    logger.info('Constant m^N does not hold on the samples, using m^N / lambda')
    return HyperbolicCertificate(constant=tight / lam, rate=rate, n=n, bound=lam)


def _holds(f: PiecewiseMap, x: Scalar, constant: Scalar, rate: Scalar, horizon: int) -> bool:
    cocycle = orbit_derivative(f, x, horizon)
    steps = cocycle.weakest_steps
    partial = 1
    for k, step in enumerate(steps, start=1):
        partial *= step
        if isinstance(rate, Fraction) and isinstance(partial, Fraction):
            if partial < constant * rate ** k:
                return False
        elif log_abs(partial) < log_abs(constant) + k * math.log(rate) - 1e-12:
            return False
    return True


@dataclass(frozen=True)
class HyperbolicNeighborhood:
    n: int
    radius: Scalar


def hyperbolic_neighborhood(f: PiecewiseMap, points: Sequence[Scalar],
                            n_limit: int = config.DEFAULT_EXPANSION_LIMIT) -> HyperbolicNeighborhood:
    """
    Smallest N with |Df^N| > 3 at the points, and the radius of the open neighbourhood where |Df^N| > 2
    :param f: An affine map
    :param points: Points of a hyperbolic set
    :param n_limit: The largest iterate to try
    :return: N and the radius delta_0 found by covering search (not claimed maximal)
    """
    for n in range(1, n_limit + 1):
        if not all(orbit_derivative(f, x, n).magnitude > 3 for x in points):
            continue
        weak = [branch for branch in restricted_branches(f, None, n) if _magnitude(branch) <= 2]
        a, b = f.domain
        radius = b - a
        for x in points:
            for branch in weak:
                if branch.lo <= x <= branch.hi:
                    radius = 0
                else:
                    radius = min(radius, branch.lo - x if branch.lo > x else x - branch.hi)
        if radius > 0:
            return HyperbolicNeighborhood(n, radius)
    raise UnresolvedError(f'No iterate up to {n_limit} expands by more than 3 near the points')
