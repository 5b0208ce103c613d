"""
Piecewise monotone interval maps with nowhere-vanishing derivative.

A map is described by its breakpoints ``a = b_0 < b_1 < ... < b_L = b`` and one strictly
monotone branch per piece ``[b_{i-1}, b_i]``. Affine branches use global coordinates,
``f(x) = slope * x + intercept``. Smooth branches are a sealed extension: they supply an
evaluator, its derivative, bounds on ``|Df|`` and a Lipschitz constant of ``ln|Df|``.
"""
from bisect import bisect_left, bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
import logging
import math
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import portion as P
from scipy.optimize import bisect as root_bisect

from imdyn.errors import (ContinuityError, DomainError, ImageEscapesDomainError, MapDefinitionError,
                          MapSyntaxError, PreconditionError, TauDomainError, ZeroSlopeError)
from imdyn.intervals import Segment, atoms, union
from imdyn.scalar import EXACT, Arithmetic, Scalar, format_scalar, log_abs, parse_scalar

logger = logging.getLogger(__name__)

BranchWord = Tuple[int, ...]


class Side(str, Enum):
    LEFT = 'left'
    RIGHT = 'right'

    def flipped(self) -> 'Side':
        return Side.RIGHT if self is Side.LEFT else Side.LEFT


@dataclass(frozen=True)
class AffineBranch:
    slope: Scalar
    intercept: Scalar

    lipschitz = 0

    def value(self, x: Scalar) -> Scalar:
        return self.slope * x + self.intercept

    def derivative(self, x: Scalar) -> Scalar:
        return self.slope

    def inverse(self, y: Scalar, lo: Scalar, hi: Scalar) -> Scalar:
        return (y - self.intercept) / self.slope

    def derivative_bounds(self) -> Tuple[Scalar, Scalar]:
        return abs(self.slope), abs(self.slope)


@dataclass(frozen=True)
class SmoothBranch:
    """
    A monotone branch given by callables
    :param func: Evaluates the branch
    :param dfunc: Evaluates the derivative of the branch
    :param lower: Lower bound of |Df| on the piece
    :param upper: Upper bound of |Df| on the piece
    :param lipschitz: Lipschitz constant of ln|Df| on the piece
    """
    func: Callable[[float], float]
    dfunc: Callable[[float], float]
    lower: float
    upper: float
    lipschitz: float

    def value(self, x: Scalar) -> float:
        return float(self.func(float(x)))

    def derivative(self, x: Scalar) -> float:
        return float(self.dfunc(float(x)))

    def inverse(self, y: Scalar, lo: Scalar, hi: Scalar) -> float:
        lo, hi, y = float(lo), float(hi), float(y)
        at_lo, at_hi = self.value(lo) - y, self.value(hi) - y
        if at_lo == 0.0:
            return lo
        if at_hi == 0.0:
            return hi
        if at_lo * at_hi > 0:
            # rounding at the edge of the piece
            return lo if abs(at_lo) < abs(at_hi) else hi
        return root_bisect(lambda x: self.value(x) - y, lo, hi, xtol=1e-15)

    def derivative_bounds(self) -> Tuple[float, float]:
        return self.lower, self.upper


Branch = Union[AffineBranch, SmoothBranch]


@dataclass(frozen=True)
class PiecewiseMap:
    breakpoints: Tuple[Scalar, ...]
    branches: Tuple[Branch, ...]
    arithmetic: Arithmetic = EXACT

    def __post_init__(self):
        object.__setattr__(self, 'breakpoints', tuple(self.breakpoints))
        object.__setattr__(self, 'branches', tuple(self.branches))
        self._validate()

    def _validate(self):
        arith = self.arithmetic
        points = self.breakpoints
        if len(points) < 2:
            raise MapDefinitionError('A map needs a domain with two endpoints')
        if any(not arith.lt(lo, hi) for lo, hi in zip(points, points[1:])):
            raise MapDefinitionError('Breakpoints must be strictly increasing inside the domain')
        if len(self.branches) != len(points) - 1:
            raise MapDefinitionError(f'Expected {len(points) - 1} branches, got {len(self.branches)}')
        if arith.exact and not self.is_affine:
            raise MapDefinitionError('Smooth branches require float arithmetic')

        for index, (branch, (lo, hi)) in enumerate(zip(self.branches, self.pieces)):
            if isinstance(branch, AffineBranch):
                if branch.slope == 0:
                    raise ZeroSlopeError(f'Branch {index} has zero slope')
            else:
                self._check_smooth(index, branch, lo, hi)

        for index in range(1, len(points) - 1):
            left = self.branches[index - 1].value(points[index])
            right = self.branches[index].value(points[index])
            if not arith.eq(left, right):
                raise ContinuityError(f'Branches {index - 1} and {index} disagree at {format_scalar(points[index])}: '
                                      f'{format_scalar(left)} != {format_scalar(right)}')

        a, b = self.domain
        for index, (branch, (lo, hi)) in enumerate(zip(self.branches, self.pieces)):
            for value in (branch.value(lo), branch.value(hi)):
                if arith.lt(value, a) or arith.gt(value, b):
                    raise ImageEscapesDomainError(f'Branch {index} maps outside the domain: {format_scalar(value)}')

    def _check_smooth(self, index: int, branch: SmoothBranch, lo, hi):
        if not 0 < branch.lower <= branch.upper:
            raise MapDefinitionError(f'Branch {index} has invalid derivative bounds')
        slack = 1e-9
        signs = set()
        for x in np.linspace(float(lo), float(hi), 17):
            d = branch.derivative(x)
            if not branch.lower - slack <= abs(d) <= branch.upper + slack:
                raise MapDefinitionError(f'Branch {index}: |Df({x})| = {abs(d)} outside the supplied bounds')
            signs.add(d > 0)
        if len(signs) != 1:
            raise MapDefinitionError(f'Branch {index} is not monotone')

    @property
    def domain(self) -> Segment:
        return self.breakpoints[0], self.breakpoints[-1]

    @property
    def interior_breakpoints(self) -> Tuple[Scalar, ...]:
        return self.breakpoints[1:-1]

    @cached_property
    def pieces(self) -> Tuple[Segment, ...]:
        return tuple(zip(self.breakpoints, self.breakpoints[1:]))

    @property
    def branch_count(self) -> int:
        return len(self.branches)

    @property
    def is_affine(self) -> bool:
        return all(isinstance(branch, AffineBranch) for branch in self.branches)

    @cached_property
    def orientations(self) -> Tuple[int, ...]:
        """+1 for increasing branches, -1 for decreasing ones."""
        result = []
        for branch, (lo, hi) in zip(self.branches, self.pieces):
            slope = branch.derivative((lo + hi) / 2)
            result.append(1 if slope > 0 else -1)
        return tuple(result)

    @cached_property
    def turning_points(self) -> Tuple[Scalar, ...]:
        return tuple(b for i, b in enumerate(self.interior_breakpoints)
                     if self.orientations[i] != self.orientations[i + 1])

    def contains(self, x: Scalar) -> bool:
        a, b = self.domain
        return self.arithmetic.le(a, x) and self.arithmetic.le(x, b)

    def coerce(self, x) -> Scalar:
        return self.arithmetic.coerce(x)


@dataclass(frozen=True)
class ClassReport:
    """
    Class membership of a map and its derivative constants.
    ``exp_var_log_deriv`` and ``exp_max_jump`` hold e^K and e^M, exact for affine maps.
    """
    in_e: bool
    in_d: bool
    in_c: bool
    deriv_bound_c: Scalar
    var_log_deriv: float
    jump_count_l: int
    max_jump_m: float
    lipschitz_k: Optional[Scalar]
    exp_var_log_deriv: Scalar
    exp_max_jump: Scalar
    min_abs_deriv: Scalar


@dataclass(frozen=True)
class MonotoneBranch:
    """
    One monotone branch of f^n: the word, its domain and the composed derivative data.
    ``slope`` and ``intercept`` are set for affine maps only.
    """
    word: BranchWord
    lo: Scalar
    hi: Scalar
    image_lo: Scalar
    image_hi: Scalar
    deriv_lower: Scalar
    deriv_upper: Scalar
    slope: Optional[Scalar] = None
    intercept: Optional[Scalar] = None

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    @property
    def length(self) -> Scalar:
        return self.hi - self.lo

    @property
    def domain(self) -> Segment:
        return self.lo, self.hi

    def contains(self, x: Scalar) -> bool:
        return self.lo <= x <= self.hi

    def value(self, x: Scalar) -> Scalar:
        return self.slope * x + self.intercept


# ===== Construction =====

def affine_map(breakpoints: Sequence, branches: Sequence[Tuple], arithmetic: Arithmetic = EXACT) -> PiecewiseMap:
    """
    Build an affine map
    :param breakpoints: All breakpoints, domain endpoints included
    :param branches: ``(slope, intercept)`` pairs, left to right
    :param arithmetic: The arithmetic mode of the map
    :return: The validated map
    """
    coerce = arithmetic.coerce
    return PiecewiseMap(
        breakpoints=tuple(coerce(b) for b in breakpoints),
        branches=tuple(AffineBranch(coerce(s), coerce(t)) for s, t in branches),
        arithmetic=arithmetic)


def parse_map(text: str, arithmetic: Arithmetic = EXACT) -> PiecewiseMap:
    """
    Parse a map-definition document
    :param text: The document: ``domain``, ``breakpoints`` and one ``branch`` line per piece
    :param arithmetic: The arithmetic mode of the returned map
    :return: The validated map
    """
    lines = []
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split('#', 1)[0].strip()
        if content:
            lines.append((number, content.split()))
    if len(lines) < 2:
        raise MapSyntaxError('Expected a domain line and a breakpoints line')

    number, tokens = lines[0]
    if tokens[0] != 'domain' or len(tokens) != 3:
        raise MapSyntaxError(f'Line {number}: expected "domain <lo> <hi>"')
    lo, hi = parse_scalar(tokens[1]), parse_scalar(tokens[2])

    number, tokens = lines[1]
    if tokens[0] != 'breakpoints':
        raise MapSyntaxError(f'Line {number}: expected "breakpoints <b_1> ... <b_(L-1)>"')
    interior = [parse_scalar(token) for token in tokens[1:]]
    breakpoints = [lo, *interior, hi]

    branches = []
    for index, (number, tokens) in enumerate(lines[2:]):
        if len(tokens) != 5 or tokens[0] != 'branch':
            raise MapSyntaxError(f'Line {number}: expected "branch <i> affine slope=<s> intercept=<t>"')
        if tokens[1] != str(index):
            raise MapSyntaxError(f'Line {number}: branch {tokens[1]} out of order, expected {index}')
        if tokens[2] != 'affine':
            raise MapSyntaxError(f'Line {number}: unsupported branch kind {tokens[2]!r}')
        values = {}
        for token in tokens[3:]:
            key, _, literal = token.partition('=')
            if key not in ('slope', 'intercept') or not literal:
                raise MapSyntaxError(f'Line {number}: malformed field {token!r}')
            values[key] = parse_scalar(literal)
        if set(values) != {'slope', 'intercept'}:
            raise MapSyntaxError(f'Line {number}: slope and intercept are both required')
        branches.append((values['slope'], values['intercept']))

    if len(branches) != len(breakpoints) - 1:
        raise MapSyntaxError(f'Expected {len(breakpoints) - 1} branch lines, found {len(branches)}')
    return affine_map(breakpoints, branches, arithmetic)


def dump_map(f: PiecewiseMap) -> str:
    """
    :param f: An affine map
    :return: The map-definition document describing the map
    """
    a, b = f.domain
    lines = [f'domain {format_scalar(a)} {format_scalar(b)}',
             ' '.join(['breakpoints', *(format_scalar(x) for x in f.interior_breakpoints)])]
    for index, branch in enumerate(f.branches):
        if not isinstance(branch, AffineBranch):
            raise PreconditionError('Only affine maps can be written as documents')
        lines.append(f'branch {index} affine slope={format_scalar(branch.slope)} '
                     f'intercept={format_scalar(branch.intercept)}')
    return '\n'.join(lines) + '\n'


# ===== Evaluation =====

def _check_domain(f: PiecewiseMap, x: Scalar):
    if not f.contains(x):
        a, b = f.domain
        raise DomainError(f'{format_scalar(x)} is outside the domain [{format_scalar(a)}, {format_scalar(b)}]')


def branch_index(f: PiecewiseMap, x: Scalar) -> int:
    """Index of the branch used at x; a breakpoint belongs to the branch on its right."""
    return min(bisect_right(f.interior_breakpoints, x), f.branch_count - 1)


def evaluate(f: PiecewiseMap, x: Scalar) -> Scalar:
    _check_domain(f, x)
    return f.branches[branch_index(f, x)].value(x)


def deriv(f: PiecewiseMap, x: Scalar, side: Side = Side.RIGHT) -> Scalar:
    """
    One-sided derivative of f at x
    :param f: The map
    :param x: A point of the domain
    :param side: The side of approach; at a domain endpoint the only available branch is used
    :return: The derivative of the branch on that side
    """
    _check_domain(f, x)
    if side is Side.LEFT:
        index = bisect_left(f.interior_breakpoints, x)
    else:
        index = bisect_right(f.interior_breakpoints, x)
    index = min(index, f.branch_count - 1)
    return f.branches[index].derivative(x)


def itinerary(f: PiecewiseMap, x: Scalar, n: int) -> BranchWord:
    word = []
    for _ in range(n):
        index = branch_index(f, x)
        word.append(index)
        x = f.branches[index].value(x)
    return tuple(word)


def evaluate_array(f: PiecewiseMap, xs: np.ndarray) -> np.ndarray:
    """Vectorised float evaluation of f."""
    xs = np.asarray(xs, dtype=float)
    interior = np.array([float(b) for b in f.interior_breakpoints])
    index = np.minimum(np.searchsorted(interior, xs, side='right'), f.branch_count - 1)
    if f.is_affine:
        slopes = np.array([float(branch.slope) for branch in f.branches])
        intercepts = np.array([float(branch.intercept) for branch in f.branches])
        return slopes[index] * xs + intercepts[index]
    out = np.empty_like(xs)
    for i, branch in enumerate(f.branches):
        mask = index == i
        if mask.any():
            out[mask] = [branch.value(x) for x in xs[mask]]
    return out


def image_interval(f: PiecewiseMap, lo: Scalar, hi: Scalar) -> Segment:
    """
    :param f: The map
    :param lo: Left end of a closed interval
    :param hi: Right end of a closed interval
    :return: The closed interval f([lo, hi])
    """
    values = [evaluate(f, lo), evaluate(f, hi)]
    values.extend(evaluate(f, b) for b in f.interior_breakpoints if lo < b < hi)
    return min(values), max(values)


def preimage(f: PiecewiseMap, target: P.Interval) -> P.Interval:
    """
    Exact preimage of a union of intervals, bounds (open/closed) preserved
    :param f: The map
    :param target: A union of intervals
    :return: f^{-1}(target) as a union of intervals
    """
    parts = []
    for index, (branch, (lo, hi)) in enumerate(zip(f.branches, f.pieces)):
        v_lo, v_hi = branch.value(lo), branch.value(hi)
        covered = target & P.closed(min(v_lo, v_hi), max(v_lo, v_hi))
        increasing = f.orientations[index] > 0
        for atom in atoms(covered):
            x1 = branch.inverse(atom.lower, lo, hi)
            x2 = branch.inverse(atom.upper, lo, hi)
            if increasing:
                pulled = P.Interval.from_atomic(atom.left, x1, x2, atom.right)
            else:
                pulled = P.Interval.from_atomic(atom.right, x2, x1, atom.left)
            parts.append(pulled & P.closed(lo, hi))
    return union(parts)


# ===== The involution around a turning point =====

def _turning_index(f: PiecewiseMap, c: Scalar) -> int:
    if c not in f.turning_points:
        raise PreconditionError(f'{format_scalar(c)} is not a turning point')
    return f.breakpoints.index(c)


def lap(f: PiecewiseMap, c: Scalar, side: Side) -> Tuple[int, ...]:
    """
    :param f: The map
    :param c: A turning point
    :param side: Which side of c
    :return: Indices of the branches forming the maximal monotone lap adjacent to c, outward order
    """
    position = _turning_index(f, c)
    step, start = (-1, position - 1) if side is Side.LEFT else (1, position)
    indices = [start]
    while 0 <= indices[-1] + step < f.branch_count and \
            f.orientations[indices[-1] + step] == f.orientations[start]:
        indices.append(indices[-1] + step)
    return tuple(indices)


def lap_bounds(f: PiecewiseMap, c: Scalar, side: Side) -> Segment:
    indices = lap(f, c, side)
    return f.pieces[min(indices)][0], f.pieces[max(indices)][1]


def _lap_inverse(f: PiecewiseMap, indices: Sequence[int], y: Scalar) -> Optional[Scalar]:
    arith = f.arithmetic
    for index in indices:
        lo, hi = f.pieces[index]
        branch = f.branches[index]
        v1, v2 = branch.value(lo), branch.value(hi)
        if arith.le(min(v1, v2), y) and arith.le(y, max(v1, v2)):
            x = branch.inverse(y, lo, hi)
            return min(max(x, lo), hi)
    return None


def tau_domain(f: PiecewiseMap, c: Scalar) -> Segment:
    """
    The closed interval around a turning point c on which the involution is defined
    :param f: The map
    :param c: A turning point
    :return: ``(lo, hi)`` with lo <= c <= hi
    """
    left_lo, _ = lap_bounds(f, c, Side.LEFT)
    _, right_hi = lap_bounds(f, c, Side.RIGHT)
    peak = evaluate(f, c)
    v_left, v_right = evaluate(f, left_lo), evaluate(f, right_hi)
    level = v_left if abs(v_left - peak) <= abs(v_right - peak) else v_right
    lo = _lap_inverse(f, lap(f, c, Side.LEFT), level)
    hi = _lap_inverse(f, lap(f, c, Side.RIGHT), level)
    return lo, hi


def tau(f: PiecewiseMap, c: Scalar, y: Scalar) -> Scalar:
    """
    The point on the other side of c with the same image as y
    :param f: The map
    :param c: A turning point
    :param y: A point of the domain of the involution
    :return: tau(y), with tau(c) = c
    """
    _check_domain(f, y)
    if f.arithmetic.eq(y, c):
        return c
    side = Side.LEFT if y < c else Side.RIGHT
    lo, hi = lap_bounds(f, c, side)
    if not (f.arithmetic.le(lo, y) and f.arithmetic.le(y, hi)):
        raise TauDomainError(f'{format_scalar(y)} is outside the monotone lap next to {format_scalar(c)}')
    partner = _lap_inverse(f, lap(f, c, side.flipped()), evaluate(f, y))
    if partner is None:
        raise TauDomainError(f'f({format_scalar(y)}) is not attained on the other side of {format_scalar(c)}')
    return partner


# ===== Classes and constants =====

def classify(f: PiecewiseMap) -> ClassReport:
    """
    Class membership (E in D in C) with the derivative constants C, K, L and M
    :param f: The map
    :return: The class report
    """
    arith = f.arithmetic
    bounds = [branch.derivative_bounds() for branch in f.branches]
    lowest = min(low for low, _ in bounds)
    highest = max(high for _, high in bounds)
    deriv_bound_c = max(highest, 1 / lowest)

    ratios = []
    for index, b in enumerate(f.interior_breakpoints):
        left = abs(f.branches[index].derivative(b))
        right = abs(f.branches[index + 1].derivative(b))
        if f.is_affine:
            if left != right:
                ratios.append(max(left, right) / min(left, right))
        elif abs(math.log(left) - math.log(right)) > max(arith.tolerance, 1e-9):
            ratios.append(max(left, right) / min(left, right))

    if f.is_affine:
        exp_var = Fraction(1)
        for ratio in ratios:
            exp_var *= ratio
        exp_max = max(ratios, default=Fraction(1))
        var_log = sum(log_abs(ratio) for ratio in ratios)
        lipschitz = Fraction(0)
    else:
        within = sum(branch.lipschitz * float(hi - lo) for branch, (lo, hi) in zip(f.branches, f.pieces))
        var_log = within + sum(math.log(ratio) for ratio in ratios)
        exp_var = math.exp(var_log)
        exp_max = max(ratios, default=1.0)
        lipschitz = max(branch.lipschitz for branch in f.branches)

    report = ClassReport(
        in_e=not ratios,
        in_d=True,
        in_c=True,
        deriv_bound_c=deriv_bound_c,
        var_log_deriv=var_log,
        jump_count_l=len(ratios),
        max_jump_m=log_abs(exp_max) if ratios else 0.0,
        lipschitz_k=lipschitz,
        exp_var_log_deriv=exp_var,
        exp_max_jump=exp_max,
        min_abs_deriv=lowest)
    logger.debug('Classified map: E=%s K=%s L=%d', report.in_e, report.var_log_deriv, report.jump_count_l)
    return report


# ===== Monotone branches of iterates =====

def identity_branch(f: PiecewiseMap, interval: Optional[Segment] = None) -> MonotoneBranch:
    lo, hi = interval if interval is not None else f.domain
    one = f.coerce(1)
    return MonotoneBranch(word=(), lo=lo, hi=hi, image_lo=lo, image_hi=hi,
                          deriv_lower=one, deriv_upper=one,
                          slope=one if f.is_affine else None,
                          intercept=f.coerce(0) if f.is_affine else None)


def _invert_word(f: PiecewiseMap, word: BranchWord, y: Scalar) -> Scalar:
    for index in reversed(word):
        lo, hi = f.pieces[index]
        y = min(max(f.branches[index].inverse(y, lo, hi), lo), hi)
    return y


def extend_branch(f: PiecewiseMap, parent: MonotoneBranch, index: int,
                  allow_degenerate: bool = False) -> Optional[MonotoneBranch]:
    """
    Restrict a monotone branch of f^n to the points whose n-th image lies in piece ``index``
    :param f: The map
    :param parent: A monotone branch of f^n
    :param index: The next letter of the word
    :param allow_degenerate: Keep single-point results
    :return: The monotone branch of f^(n+1) for the extended word, or None
    """
    arith = f.arithmetic
    piece_lo, piece_hi = f.pieces[index]
    a, b = max(parent.image_lo, piece_lo), min(parent.image_hi, piece_hi)
    if arith.lt(b, a) or (not allow_degenerate and not arith.lt(a, b)):
        return None
    branch = f.branches[index]
    if parent.slope is not None:
        x1 = (a - parent.intercept) / parent.slope
        x2 = (b - parent.intercept) / parent.slope
        slope = branch.slope * parent.slope
        intercept = branch.slope * parent.intercept + branch.intercept
    else:
        x1, x2 = _invert_word(f, parent.word, a), _invert_word(f, parent.word, b)
        slope = intercept = None
    v1, v2 = branch.value(a), branch.value(b)
    low, high = branch.derivative_bounds()
    return MonotoneBranch(word=parent.word + (index,), lo=min(x1, x2), hi=max(x1, x2),
                          image_lo=min(v1, v2), image_hi=max(v1, v2),
                          deriv_lower=parent.deriv_lower * low, deriv_upper=parent.deriv_upper * high,
                          slope=slope, intercept=intercept)


def _descend(f: PiecewiseMap, roots: List[MonotoneBranch], depth: int) -> List[MonotoneBranch]:
    level = roots
    for _ in range(depth):
        level = [child for parent in level for index in range(f.branch_count)
                 if (child := extend_branch(f, parent, index)) is not None]
    return level


def branch_levels(f: PiecewiseMap, interval: Optional[Segment], depth: int) -> Iterator[List[MonotoneBranch]]:
    """
    Yield the non-degenerate monotone branches of f, f^2, ..., f^depth restricted to an interval
    :param f: The map
    :param interval: The restricting closed interval, the whole domain when None
    :param depth: The largest iterate
    :return: One list per iterate, words in lexicographic order
    """
    level = [identity_branch(f, interval)]
    for _ in range(depth):
        level = _descend(f, level, 1)
        yield level


def restricted_branches(f: PiecewiseMap, interval: Optional[Segment], n: int,
                        workers: int = 1) -> List[MonotoneBranch]:
    """
    Non-degenerate monotone branches of f^n restricted to an interval, in word order
    :param f: The map
    :param interval: The restricting closed interval, the whole domain when None
    :param n: The iterate
    :param workers: Subtrees of the first letter are descended in parallel when > 1
    :return: The monotone branches
    """
    roots = [identity_branch(f, interval)]
    if n == 0:
        return roots
    first = _descend(f, roots, 1)
    if workers <= 1 or len(first) <= 1:
        return _descend(f, first, n - 1)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        subtrees = list(executor.map(lambda root: _descend(f, [root], n - 1), first))
    return [branch for subtree in subtrees for branch in subtree]


def compose_branch(f: PiecewiseMap, word: BranchWord) -> Optional[MonotoneBranch]:
    """
    The maximal interval realising a branch word, by backward interval intersection
    :param f: The map
    :param word: Branch indices w_0 ... w_(n-1)
    :return: The (possibly single-point) monotone branch, or None when no point realises the word
    """
    if not word:
        return identity_branch(f)
    arith = f.arithmetic
    lo, hi = f.pieces[word[-1]]
    for index in reversed(word[:-1]):
        piece_lo, piece_hi = f.pieces[index]
        branch = f.branches[index]
        v1, v2 = branch.value(piece_lo), branch.value(piece_hi)
        a, b = max(lo, min(v1, v2)), min(hi, max(v1, v2))
        if arith.lt(b, a):
            return None
        x1, x2 = branch.inverse(a, piece_lo, piece_hi), branch.inverse(b, piece_lo, piece_hi)
        lo, hi = max(min(x1, x2), piece_lo), min(max(x1, x2), piece_hi)

    result = identity_branch(f, (lo, hi))
    for index in word:
        result = extend_branch(f, result, index, allow_degenerate=True)
        if result is None:
            return None
    return result
