"""
Return structure near turning points, omega-limit covers and invariant densities.

Symmetric intervals U_x = (x, tau(x)) around a turning point c organise the first-return
analysis; the Ulam estimator discretises the transfer operator of an eventually expanding map.
"""
from bisect import bisect_left, bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import portion as P
from scipy import sparse

from imdyn import config
from imdyn.errors import AnalysisRefusal, ArithmeticModeError, BudgetExceededError, PreconditionError, UnresolvedError
from imdyn.expansion_certifier import ExpansionCertificate
from imdyn.intervals import Segment, atoms, drop_points, length, union
from imdyn.map_model import PiecewiseMap, evaluate, preimage, restricted_branches, tau, tau_domain
from imdyn.scalar import Mode, Scalar, format_scalar

logger = logging.getLogger(__name__)


# ===== Symmetric intervals and nice points =====

@dataclass(frozen=True)
class SymmetricInterval:
    c: Scalar
    x: Scalar
    lo: Scalar
    hi: Scalar

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    @property
    def interval(self) -> P.Interval:
        return P.open(self.lo, self.hi) if self.lo < self.hi else P.empty()

    @property
    def length(self) -> Scalar:
        return self.hi - self.lo

    def contains(self, y: Scalar) -> bool:
        return self.lo < y < self.hi


def symmetric_interval(f: PiecewiseMap, c: Scalar, x: Scalar) -> SymmetricInterval:
    """
    :param f: The map
    :param c: A turning point
    :param x: A point where tau is defined
    :return: The open interval between x and tau(x); empty when x = c
    """
    partner = tau(f, c, x)
    return SymmetricInterval(c=c, x=x, lo=min(x, partner), hi=max(x, partner))


def nearest_turning_point(f: PiecewiseMap, x: Scalar) -> Scalar:
    if not f.turning_points:
        raise PreconditionError('The map has no turning point')
    return min(f.turning_points, key=lambda c: abs(c - x))


class Niceness(str, Enum):
    NICE = 'nice'
    NOT_NICE = 'not_nice'
    UNKNOWN = 'unknown_at_horizon'


@dataclass(frozen=True)
class NiceResult:
    verdict: Niceness
    witness: Optional[int] = None

    def __bool__(self):
        return self.verdict is Niceness.NICE


def nice_test(f: PiecewiseMap, x: Scalar, horizon: int = config.DEFAULT_NICE_HORIZON,
              c: Optional[Scalar] = None) -> NiceResult:
    """
    Decide whether the forward orbit of x avoids U_x
    :param f: The map
    :param x: The base point
    :param horizon: Number of iterates inspected
    :param c: The turning point, the nearest one when None
    :return: nice once the orbit closes up outside U_x, not_nice with the first entry time, or unknown
    """
    c = nearest_turning_point(f, x) if c is None else c
    window = symmetric_interval(f, c, x)
    seen = {x}
    y = x
    for k in range(1, horizon + 1):
        y = evaluate(f, y)
        if window.contains(y):
            return NiceResult(Niceness.NOT_NICE, k)
        if y in seen:
            return NiceResult(Niceness.NICE)
        seen.add(y)
    logger.warning('Orbit of %s neither closes nor enters U_x within %d iterates', format_scalar(x), horizon)
    return NiceResult(Niceness.UNKNOWN)


# ===== First return =====

@dataclass(frozen=True)
class ReturnComponent:
    interval: P.Interval
    time: int

    @property
    def lo(self) -> Scalar:
        return self.interval.lower

    @property
    def hi(self) -> Scalar:
        return self.interval.upper


@dataclass(frozen=True)
class ReturnStructure:
    base: SymmetricInterval
    components: Tuple[ReturnComponent, ...]
    unresolved: P.Interval
    horizon: int

    def component_containing(self, y: Scalar) -> Optional[ReturnComponent]:
        for component in self.components:
            if y in component.interval:
                return component
        return None


def first_return(f: PiecewiseMap, base: SymmetricInterval,
                 horizon: int = config.DEFAULT_RETURN_HORIZON) -> ReturnStructure:
    """
    Partition the domain into maximal intervals of constant transfer time into U_x
    :param f: The map
    :param base: The symmetric interval U_x
    :param horizon: The largest transfer time
    :return: Components sorted by position, with the set of points not returning by the horizon
    """
    target = base.interval
    a, b = f.domain
    # points whose first visit to U_x, counting time 0, happens at time k
    hitting = target
    reached = P.empty()
    components = []
    budget = config.word_budget()
    for k in range(1, horizon + 1):
        if hitting.empty:
            break
        returning = drop_points(preimage(f, hitting))
        components.extend(ReturnComponent(atom, k) for atom in atoms(returning))
        if len(components) > budget:
            raise BudgetExceededError(len(components), budget)
        reached = reached | returning
        hitting = returning - target
    components.sort(key=lambda component: (component.lo, component.hi))
    unresolved = P.closed(a, b) - reached
    logger.info('First return to (%s, %s): %d components, unresolved measure %s', format_scalar(base.lo),
                format_scalar(base.hi), len(components), format_scalar(length(unresolved)))
    return ReturnStructure(base=base, components=tuple(components), unresolved=unresolved, horizon=horizon)


def psi(f: PiecewiseMap, z: Scalar, c: Optional[Scalar] = None,
        horizon: int = config.DEFAULT_RETURN_HORIZON) -> SymmetricInterval:
    """
    The symmetric interval U_x around c with f(U_x) equal to the return component S_z containing f(c)
    :param f: The map
    :param z: A nice point near c
    :param c: The turning point, the nearest one when None
    :param horizon: Horizon of the first-return analysis
    :return: U_x
    """
    c = nearest_turning_point(f, z) if c is None else c
    verdict = nice_test(f, z, config.DEFAULT_NICE_HORIZON, c)
    if verdict.verdict is not Niceness.NICE:
        raise PreconditionError(f'{format_scalar(z)} is not a nice point ({verdict.verdict.value})')
    structure = first_return(f, symmetric_interval(f, c, z), horizon)
    peak = evaluate(f, c)
    component = structure.component_containing(peak)
    if component is None:
        raise UnresolvedError(f'f(c) = {format_scalar(peak)} lies in no return component within {horizon} steps')
    w_lo, w_hi = tau_domain(f, c)
    pulled = preimage(f, component.interval) & P.closed(w_lo, w_hi)
    around = next(atom for atom in atoms(pulled) if c in atom)
    return SymmetricInterval(c=c, x=around.lower, lo=around.lower, hi=around.upper)


# ===== Closest returns =====

@dataclass(frozen=True)
class ClosestReturns:
    times: Tuple[int, ...]
    points: Tuple[Scalar, ...]


def closest_returns(f: PiecewiseMap, x: Scalar, c: Scalar, count: int,
                    horizon: int = config.DEFAULT_NICE_HORIZON) -> ClosestReturns:
    """
    Times n(0) < n(1) < ... with f^n(i+1)(x) in the symmetric interval of f^n(i)(x)
    :param f: The map
    :param x: The starting point
    :param c: A turning point
    :param count: The number of return times wanted
    :param horizon: The number of iterates inspected
    :return: The return times found; fewer than count when U collapses or the horizon ends
    """
    w_lo, w_hi = tau_domain(f, c)
    y = x
    start = None
    for k in range(horizon + 1):
        if w_lo <= y <= w_hi:
            start = k
            break
        y = evaluate(f, y)
    if start is None:
        raise UnresolvedError(f'The orbit of {format_scalar(x)} does not enter [{format_scalar(w_lo)}, '
                              f'{format_scalar(w_hi)}] within {horizon} iterates')

    times, points = [start], [y]
    window = symmetric_interval(f, c, y)
    k = start
    while len(times) < count and not window.degenerate and k < horizon:
        k += 1
        y = evaluate(f, y)
        if window.contains(y):
            times.append(k)
            points.append(y)
            window = symmetric_interval(f, c, y)
    return ClosestReturns(times=tuple(times), points=tuple(points))


# ===== V_k components =====

class EndpointTag(str, Enum):
    RETURNS = 'returns'
    WINDOW = 'window'
    OTHER = 'other'


@dataclass(frozen=True)
class VkComponent:
    k: int
    interval: P.Interval
    lo_tag: EndpointTag
    hi_tag: EndpointTag

    @property
    def lo(self) -> Scalar:
        return self.interval.lower

    @property
    def hi(self) -> Scalar:
        return self.interval.upper


def _positive(slope: Scalar, offset: Scalar, strict: bool) -> P.Interval:
    """Solve slope * y + offset > 0 (or >= 0) over the reals."""
    if slope == 0:
        holds = offset > 0 if strict else offset >= 0
        return P.open(-P.inf, P.inf) if holds else P.empty()
    root = -offset / slope
    if slope > 0:
        return P.open(root, P.inf) if strict else P.closedopen(root, P.inf)
    return P.open(-P.inf, root) if strict else P.openclosed(-P.inf, root)


def _affine(p: Scalar, q: Scalar, at_p: Scalar, at_q: Scalar) -> Tuple[Scalar, Scalar]:
    slope = (at_q - at_p) / (q - p)
    return slope, at_p - slope * p


def _iterate_values(f: PiecewiseMap, y: Scalar, k: int) -> List[Scalar]:
    values = [y]
    for _ in range(k):
        values.append(evaluate(f, values[-1]))
    return values


def _window_between(f: PiecewiseMap, c: Scalar, p: Scalar, q: Scalar, k: int) -> P.Interval:
    """V_k inside an elementary piece [p, q] on which tau and f, ..., f^k are affine."""
    at_p, at_q = _iterate_values(f, p, k), _iterate_values(f, q, k)
    t_slope, t_offset = _affine(p, q, tau(f, c, p), tau(f, c, q))
    # (y, tau y) on the left of c, (tau y, y) on the right
    if q <= c:
        lower, upper = (1, 0), (t_slope, t_offset)
    else:
        lower, upper = (t_slope, t_offset), (1, 0)

    def inside(i: int) -> P.Interval:
        g_slope, g_offset = _affine(p, q, at_p[i], at_q[i])
        above = _positive(g_slope - lower[0], g_offset - lower[1], strict=True)
        below = _positive(upper[0] - g_slope, upper[1] - g_offset, strict=True)
        return above & below

    result = P.closed(p, q) & inside(k)
    for i in range(1, k):
        result = result - inside(i)
    return result


def vk_components(f: PiecewiseMap, c: Scalar, k: int, window: Optional[Segment] = None) -> List[VkComponent]:
    """
    Components of V_k: points y whose k-th iterate is the first to enter (y, tau(y))
    :param f: An exact affine map
    :param c: A turning point
    :param k: The return time, at least 1
    :param window: The neighbourhood W of c, the domain of tau when None
    :return: The components, left to right, with each endpoint tagged
    """
    if not f.arithmetic.exact or not f.is_affine:
        raise ArithmeticModeError('V_k components are computed for exact affine maps only')
    if k < 1:
        raise PreconditionError('k must be at least 1')
    w_lo, w_hi = tau_domain(f, c)
    if window is not None:
        w_lo, w_hi = max(w_lo, window[0]), min(w_hi, window[1])

    cuts = {w_lo, w_hi, c}
    for b in f.interior_breakpoints:
        if w_lo < b < w_hi:
            cuts.add(b)
            cuts.add(tau(f, c, b))
    for branch in restricted_branches(f, (w_lo, w_hi), k):
        cuts.update((branch.lo, branch.hi))
    cuts = sorted(y for y in cuts if w_lo <= y <= w_hi)

    found = union(_window_between(f, c, p, q, k) for p, q in zip(cuts, cuts[1:]))
    components = []
    for atom in atoms(drop_points(found)):
        tags = []
        for a in (atom.lower, atom.upper):
            if a in (w_lo, w_hi):
                tags.append(EndpointTag.WINDOW)
            else:
                image = _iterate_values(f, a, k)[-1]
                tags.append(EndpointTag.RETURNS if image in (a, tau(f, c, a)) else EndpointTag.OTHER)
        components.append(VkComponent(k=k, interval=atom, lo_tag=tags[0], hi_tag=tags[1]))
    logger.debug('V_%d around %s: %d components', k, format_scalar(c), len(components))
    return components


# ===== Omega-limit covers =====

@dataclass(frozen=True)
class OmegaCover:
    eps: Scalar
    cover_length: Scalar
    component_count: int


@dataclass(frozen=True)
class OmegaApprox:
    seed: Scalar
    burn: int
    steps: int
    arithmetic: Mode
    tail: Tuple[Scalar, ...]
    covers: Tuple[OmegaCover, ...]


def _exact_tail(f: PiecewiseMap, seed: Scalar, burn: int, steps: int) -> Optional[List[Scalar]]:
    """The distinct points f^(burn+1)(seed), ..., f^(burn+steps)(seed), or None past the exact budget."""
    total = burn + steps
    orbit = [seed]
    index: Dict[Scalar, int] = {seed: 0}
    while len(orbit) <= total:
        if len(orbit) > config.EXACT_ITERATION_STEPS:
            return None
        x = evaluate(f, orbit[-1])
        if x in index:
            start = index[x]
            period = len(orbit) - start
            last = min(total, max(burn + 1, start) + period)
            return sorted({orbit[i] if i < start else orbit[start + (i - start) % period]
                           for i in range(burn + 1, last + 1)})
        if x.denominator.bit_length() > config.EXACT_DENOMINATOR_BITS:
            return None
        index[x] = len(orbit)
        orbit.append(x)
    return sorted(set(orbit[burn + 1:total + 1]))


def _float_tail(f: PiecewiseMap, seed: Scalar, burn: int, steps: int) -> np.ndarray:
    interior = [float(b) for b in f.interior_breakpoints]
    last = f.branch_count - 1
    if f.is_affine:
        slopes = [float(branch.slope) for branch in f.branches]
        intercepts = [float(branch.intercept) for branch in f.branches]
        step = lambda x, i: slopes[i] * x + intercepts[i]
    else:
        step = lambda x, i: f.branches[i].value(x)
    a, b = (float(v) for v in f.domain)
    x = float(seed)
    tail = np.empty(steps)
    for t in range(burn + steps):
        x = min(max(step(x, min(bisect_right(interior, x), last)), a), b)
        if t >= burn:
            tail[t - burn] = x
    return np.unique(tail)


def _cover(points: Sequence[Scalar], eps: Scalar) -> OmegaCover:
    gaps = [y - x for x, y in zip(points, points[1:])]
    breaks = [gap for gap in gaps if gap > 2 * eps]
    count = len(breaks) + 1
    spread = points[-1] - points[0] - sum(breaks)
    return OmegaCover(eps=eps, cover_length=spread + 2 * eps * count, component_count=count)


def omega_approx(f: PiecewiseMap, seed: Scalar, burn: int = config.DEFAULT_BURN,
                 steps: int = config.DEFAULT_STEPS,
                 eps_list: Sequence[Scalar] = config.DEFAULT_EPS_LIST) -> OmegaApprox:
    """
    Upper estimates of the Lebesgue measure of the omega-limit set of a seed
    :param f: The map
    :param seed: The starting point, typically a turning point
    :param burn: Iterates discarded before the tail
    :param steps: Length of the tail
    :param eps_list: Radii of the covering balls, one cover per radius
    :return: The tail and the length of the merged eps-cover for each radius
    """
    if steps < 1:
        raise PreconditionError(f'The tail needs at least one point, got steps={steps}')
    tail = _exact_tail(f, seed, burn, steps) if f.arithmetic.exact else None
    if tail is not None:
        mode = Mode.EXACT
        covers = tuple(_cover(tail, Fraction(eps)) for eps in eps_list)
    else:
        if f.arithmetic.exact:
            logger.warning('Orbit of %s does not close within the exact budget, iterating in float64',
                           format_scalar(seed))
        mode = Mode.FLOAT
        tail = _float_tail(f, seed, burn, steps)
        covers = tuple(_float_cover(tail, float(eps)) for eps in eps_list)
        tail = tuple(float(x) for x in tail)
    for cover in covers:
        logger.info('eps=%s cover_length=%s components=%d', format_scalar(cover.eps),
                    format_scalar(cover.cover_length), cover.component_count)
    return OmegaApprox(seed=seed, burn=burn, steps=steps, arithmetic=mode, tail=tuple(tail), covers=covers)


def _float_cover(points: np.ndarray, eps: float) -> OmegaCover:
    gaps = np.diff(points)
    breaks = gaps > 2 * eps
    count = int(breaks.sum()) + 1
    spread = float(points[-1] - points[0] - gaps[breaks].sum())
    return OmegaCover(eps=eps, cover_length=spread + 2 * eps * count, component_count=count)


# ===== Density gap =====

@dataclass(frozen=True)
class GapCheck:
    passed: bool
    reason: str
    witness: Optional[int] = None


def density_gap_check(f: PiecewiseMap, c: Scalar, inner: SymmetricInterval, outer: SymmetricInterval,
                      lam: Scalar, horizon: int = config.DEFAULT_NICE_HORIZON) -> GapCheck:
    """
    Check at a finite horizon the hypotheses that force the omega-limit set of c to have measure zero
    :param f: The map
    :param c: A turning point
    :param inner: P, symmetric around c
    :param outer: Q, symmetric around c and containing P
    :param lam: The required ratio |Q| / |P|
    :param horizon: Iterates used for the nice test and the orbit tail
    :return: pass, or fail with the violated hypothesis
    """
    if not (outer.lo <= inner.lo and inner.hi <= outer.hi):
        raise PreconditionError('P must lie inside Q')

    boundary = nice_test(f, outer.x, horizon, c)
    if boundary.verdict is Niceness.NOT_NICE:
        return GapCheck(False, f'boundary of Q is not nice (enters U at step {boundary.witness})', boundary.witness)
    if boundary.verdict is Niceness.UNKNOWN:
        return GapCheck(False, f'boundary of Q is not known to be nice within {horizon} iterates')

    tail = _exact_tail(f, c, horizon // 2, horizon - horizon // 2) if f.arithmetic.exact else None
    if tail is None:
        tail = [float(x) for x in _float_tail(f, c, horizon // 2, horizon - horizon // 2)]
    strays = [y for y in tail if outer.contains(y) and not inner.contains(y)]
    if strays:
        return GapCheck(False, f'orbit tail meets Q outside P at {format_scalar(strays[0])}')

    if inner.length == 0 or outer.length < lam * inner.length:
        return GapCheck(False, f'|Q|/|P| is below {format_scalar(lam)}')
    return GapCheck(True, f'hypotheses verified at horizon {horizon} (orbit tail as proxy for the limit set)')


# ===== Ulam estimator =====

@dataclass(frozen=True)
class UlamDensity:
    edges: Tuple[Scalar, ...]
    masses: np.ndarray
    density: np.ndarray
    residual: float
    step_residual: float
    iterations: int
    converged: bool
    transfer: sparse.csr_matrix

    @property
    def bin_count(self) -> int:
        return len(self.edges) - 1


def ulam_edges(f: PiecewiseMap, m: int) -> List[Scalar]:
    """
    Uniform grid refined by the breakpoints and, for m > 1, their first preimages
    :param f: The map
    :param m: The number of uniform bins
    :return: The sorted bin edges
    """
    a, b = f.domain
    edges = {a + (b - a) * f.coerce(Fraction(k, m)) for k in range(m + 1)}
    if m > 1:
        edges.update(f.breakpoints)
        for y in f.interior_breakpoints:
            for branch, (lo, hi) in zip(f.branches, f.pieces):
                v_lo, v_hi = sorted((branch.value(lo), branch.value(hi)))
                if v_lo <= y <= v_hi:
                    edges.add(min(max(branch.inverse(y, lo, hi), lo), hi))
    return sorted(edges)


def ulam_transfer_row(f: PiecewiseMap, edges: Sequence[Scalar], i: int) -> Dict[int, Scalar]:
    """
    Row i of the Ulam matrix: P[i][j] = |B_i intersected with f^-1(B_j)| / |B_i|
    :return: The non-zero entries; exact rationals for exact affine maps
    """
    lo_i, hi_i = edges[i], edges[i + 1]
    width = hi_i - lo_i
    last = len(edges) - 2
    row: Dict[int, Scalar] = {}
    for branch, (lo, hi) in zip(f.branches, f.pieces):
        s_lo, s_hi = max(lo_i, lo), min(hi_i, hi)
        if not s_lo < s_hi:
            continue
        u, v = sorted((branch.value(s_lo), branch.value(s_hi)))
        first = max(bisect_right(edges, u) - 1, 0)
        for j in range(min(first, last), min(bisect_left(edges, v), last + 1)):
            y0, y1 = max(u, edges[j]), min(v, edges[j + 1])
            if y0 < y1:
                share = abs(branch.inverse(y1, s_lo, s_hi) - branch.inverse(y0, s_lo, s_hi)) / width
                row[j] = row.get(j, 0) + share
    return row


def ulam_acip(f: PiecewiseMap, m: int, certificate: Optional[ExpansionCertificate],
              tolerance: float = config.ULAM_TOLERANCE,
              max_iterations: int = config.ULAM_MAX_ITERATIONS) -> UlamDensity:
    """
    Estimate the absolutely continuous invariant density by Ulam's method
    :param f: The map
    :param m: The number of uniform bins before refinement
    :param certificate: Evidence that some iterate of f expands
    :param tolerance: L1 tolerance on successive iterates and on the invariance residual
    :param max_iterations: The power iteration cap
    :return: Bin masses, the piecewise constant density and both residuals
    """
    if not isinstance(certificate, ExpansionCertificate):
        raise AnalysisRefusal('no expansion certificate: the map is not known to be eventually expanding')
    if m < 1:
        raise PreconditionError('At least one bin is required')

    edges = ulam_edges(f, m)
    n = len(edges) - 1
    workers = config.worker_count()
    with ThreadPoolExecutor(max_workers=workers) as executor:
        rows = list(executor.map(lambda i: ulam_transfer_row(f, edges, i), range(n)))
    data, indices, indptr = [], [], [0]
    for row in rows:
        for j in sorted(row):
            indices.append(j)
            data.append(float(row[j]))
        indptr.append(len(indices))
    transfer = sparse.csr_matrix((data, indices, indptr), shape=(n, n))
    adjoint = transfer.T.tocsr()

    widths = np.array([float(hi - lo) for lo, hi in zip(edges, edges[1:])])
    masses = widths / widths.sum()
    step_residual = residual = float('inf')
    iterations = 0
    converged = False
    while iterations < max_iterations:
        pushed = adjoint @ masses
        pushed /= pushed.sum()
        step_residual = float(np.abs(pushed - masses).sum())
        masses = pushed
        iterations += 1
        if step_residual < tolerance:
            residual = float(np.abs(adjoint @ masses - masses).sum())
            if residual < tolerance:
                converged = True
                break
    if not converged:
        residual = float(np.abs(adjoint @ masses - masses).sum())
        logger.warning('Ulam power iteration stopped at %d iterations, residual %.3e', iterations, residual)
    logger.info('Ulam density on %d bins after %d iterations, residual %.3e', n, iterations, residual)
    return UlamDensity(edges=tuple(edges), masses=masses, density=masses / widths, residual=residual,
                       step_residual=step_residual, iterations=iterations, converged=converged, transfer=transfer)


def pushforward_gap(estimate: UlamDensity, bins: Sequence[int]) -> float:
    """
    :param estimate: An Ulam density
    :param bins: Indices of the bins forming a set A
    :return: |mass of f^-1(A) - mass of A| under the estimated density
    """
    pushed = estimate.transfer.T @ estimate.masses
    selected = list(bins)
    return float(abs(pushed[selected].sum() - estimate.masses[selected].sum()))
