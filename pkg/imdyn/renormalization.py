"""
Restrictive intervals around turning points and the towers they stack into.
"""
from dataclasses import dataclass
import logging
import math
from typing import List, Optional, Tuple

from imdyn.errors import PreconditionError, TauDomainError
from imdyn.intervals import Segment, contains, overlap_interiors, touch
from imdyn.map_model import PiecewiseMap, image_interval, tau, tau_domain
from imdyn.orbit_engine import fixed_points
from imdyn.scalar import Scalar, format_scalar

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RestrictiveInterval:
    """
    A closed interval J around a turning point with f^q(J) inside J
    ``images`` holds J, f(J), ..., f^q(J); the last one is the return witness.
    """
    c: Scalar
    lo: Scalar
    hi: Scalar
    q: int
    images: Tuple[Segment, ...]
    boundary_touching: bool

    @property
    def segment(self) -> Segment:
        return self.lo, self.hi

    @property
    def length(self) -> Scalar:
        return self.hi - self.lo


@dataclass(frozen=True)
class RenormTower:
    c: Scalar
    q_max: int
    levels: Tuple[RestrictiveInterval, ...]

    @property
    def depth(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class TurningPointRenormalization:
    tower: RenormTower
    suspect: bool

    @property
    def c(self) -> Scalar:
        return self.tower.c

    @property
    def depth(self) -> int:
        return self.tower.depth


def interval_orbit(f: PiecewiseMap, segment: Segment, q: int) -> List[Segment]:
    """
    :return: The exact images J, f(J), ..., f^q(J) of a closed interval
    """
    images = [segment]
    for _ in range(q):
        images.append(image_interval(f, *images[-1]))
    return images


def _check(f: PiecewiseMap, c: Scalar, segment: Segment, q: int) -> Optional[RestrictiveInterval]:
    lo, hi = segment
    if not lo < c < hi:
        return None
    images = interval_orbit(f, segment, q)
    if not contains(segment, images[q]):
        return None
    cycle = images[:q]
    touching = False
    for i in range(q):
        for j in range(i + 1, q):
            if overlap_interiors(cycle[i], cycle[j]):
                return None
            touching = touching or touch(cycle[i], cycle[j])
    return RestrictiveInterval(c=c, lo=lo, hi=hi, q=q, images=tuple(images), boundary_touching=touching)


def verify_restrictive(f: PiecewiseMap, interval: RestrictiveInterval) -> bool:
    """Recompute both invariants of a restrictive interval from its endpoints alone."""
    return _check(f, interval.c, interval.segment, interval.q) is not None


def restrictive_interval(f: PiecewiseMap, c: Scalar, q: int,
                         within: Optional[Segment] = None) -> Optional[RestrictiveInterval]:
    """
    Search the symmetric candidates [p, tau(p)] built from periodic points of period dividing q
    :param f: An affine map
    :param c: A turning point
    :param q: The return period, at least 2
    :param within: Candidates must lie strictly inside this interval
    :return: The largest candidate passing both invariants, or None
    """
    if q < 2:
        raise PreconditionError('An f-invariant interval is not a renormalization, q must be at least 2')
    w_lo, w_hi = tau_domain(f, c)
    best = None
    for p in fixed_points(f, q):
        if p == c or not w_lo <= p <= w_hi:
            continue
        try:
            partner = tau(f, c, p)
        except TauDomainError:
            continue
        segment = (min(p, partner), max(p, partner))
        if within is not None and (not contains(within, segment) or segment == tuple(within)):
            continue
        candidate = _check(f, c, segment, q)
        if candidate is not None and (best is None or candidate.length > best.length):
            best = candidate
    if best is not None:
        logger.info('Restrictive interval of period %d around %s: [%s, %s]', q, format_scalar(c),
                    format_scalar(best.lo), format_scalar(best.hi))
    return best


def renorm_tower(f: PiecewiseMap, c: Scalar, q_max: int) -> RenormTower:
    """
    Greedily stack nested restrictive intervals whose periods are proper multiples of each other
    :param f: An affine map
    :param c: A turning point
    :param q_max: The largest period searched
    :return: The tower; depth 0 means non-renormalizable at this horizon
    """
    levels = []
    period = 1
    within = None
    while True:
        found = None
        for q in range(2 * period, q_max + 1, period):
            found = restrictive_interval(f, c, q, within)
            if found is not None:
                break
        if found is None:
            break
        levels.append(found)
        period, within = found.q, found.segment
    return RenormTower(c=c, q_max=q_max, levels=tuple(levels))


def is_renormalizable(f: PiecewiseMap, q_max: int) -> List[TurningPointRenormalization]:
    """
    Tower depth per turning point; a tower as deep as the horizon allows is flagged as solenoid-suspect
    :param f: An affine map
    :param q_max: The largest period searched
    :return: One entry per turning point, left to right
    """
    horizon_depth = int(math.floor(math.log2(q_max))) if q_max >= 2 else 0
    result = []
    for c in f.turning_points:
        tower = renorm_tower(f, c, q_max)
        suspect = tower.depth >= 1 and tower.depth == horizon_depth
        if suspect:
            logger.warning('Turning point %s: tower of depth %d saturates the horizon q_max=%d',
                           format_scalar(c), tower.depth, q_max)
        result.append(TurningPointRenormalization(tower=tower, suspect=suspect))
    return result
