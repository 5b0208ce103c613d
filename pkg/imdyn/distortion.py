"""
Distortion of iterates on intervals and the bounds that control it.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from imdyn import config
from imdyn.errors import PreconditionError
from imdyn.fixtures import random_affine_map
from imdyn.intervals import Segment
from imdyn.map_model import ClassReport, PiecewiseMap, classify, image_interval, restricted_branches
from imdyn.orbit_engine import orbit_derivative
from imdyn.scalar import Scalar, format_scalar

logger = logging.getLogger(__name__)

SMOOTH_SAMPLES = 33


@dataclass(frozen=True)
class DistortionReport:
    """
    Empirical distortion of f^n on J next to the bounds that apply to it.
    ``bound_sum`` is None when some iterate of J crosses a breakpoint.
    """
    interval: Segment
    n: int
    empirical: Scalar
    multiplicity: int
    bound_multiplicity: Scalar
    bound_sum: Optional[Scalar]
    telescoped: Scalar
    passed: bool


@dataclass(frozen=True)
class ExtensionTrial:
    rho: Scalar
    sigma: Scalar
    tau: Scalar
    bound: Scalar

    @property
    def passed(self) -> bool:
        return self.rho >= self.bound


def intersection_multiplicity(intervals: Sequence[Segment]) -> int:
    """
    Maximum number of closed intervals covering a single point
    :param intervals: ``(lo, hi)`` pairs
    :return: The multiplicity, 0 for an empty collection
    """
    events = []
    for lo, hi in intervals:
        events.append((lo, 0))
        events.append((hi, 1))
    # starts sort before ends at equal coordinates
    events.sort()
    depth = best = 0
    for _, kind in events:
        if kind == 0:
            depth += 1
            best = max(best, depth)
        else:
            depth -= 1
    return best


def bound_multiplicity(report: ClassReport, multiplicity: int) -> Scalar:
    """
    :param report: The class report of the map
    :param multiplicity: The intersection multiplicity S of the iterates of J
    :return: e^(S(K + LM)), exact for affine maps
    """
    return (report.exp_var_log_deriv * report.exp_max_jump ** report.jump_count_l) ** multiplicity


def _crosses_breakpoint(f: PiecewiseMap, lo: Scalar, hi: Scalar) -> bool:
    return any(lo < b < hi for b in f.interior_breakpoints)


def bound_sum(f: PiecewiseMap, segment: Segment, n: int) -> Scalar:
    """
    :param f: A map whose log-derivative is Lipschitz on each branch
    :param segment: An interval J on which every iterate f^i, i < n, stays inside one branch
    :param n: The iterate
    :return: e^(K * sum |f^i(J)|)
    """
    if n == 0:
        return f.coerce(1)
    lo, hi = segment
    total = 0
    for i in range(n):
        if _crosses_breakpoint(f, lo, hi):
            raise PreconditionError(f'f^{i}(J) = [{format_scalar(lo)}, {format_scalar(hi)}] crosses a breakpoint')
        total += hi - lo
        lo, hi = image_interval(f, lo, hi)
    lipschitz = classify(f).lipschitz_k
    if lipschitz == 0:
        return f.coerce(1)
    return math.exp(float(lipschitz) * float(total))


def extension_bound(sigma: Scalar, tau: Scalar, lipschitz: Scalar) -> Scalar:
    """
    Lower bound e^(-K tau) (tau/sigma - 1) on |T \\ J| / |J|
    :param sigma: Sum of the lengths of the iterates of J
    :param tau: Sum of the lengths of the iterates of T
    :param lipschitz: The constant K
    :return: The bound, exact when K = 0
    """
    if not 0 < sigma < tau:
        raise PreconditionError(f'Need 0 < sigma < tau, got sigma={format_scalar(sigma)}, tau={format_scalar(tau)}')
    if lipschitz < 0:
        raise PreconditionError('K must be non-negative')
    if lipschitz == 0:
        return tau / sigma - 1
    return math.exp(-float(lipschitz) * float(tau)) * (float(tau) / float(sigma) - 1)


def _length_sum(f: PiecewiseMap, segment: Segment, n: int) -> Scalar:
    lo, hi = segment
    total = 0
    for i in range(n):
        if _crosses_breakpoint(f, lo, hi):
            raise PreconditionError(f'|Df^n| is not continuous on the interval: f^{i} crosses a breakpoint')
        total += hi - lo
        lo, hi = image_interval(f, lo, hi)
    return total


def measure_extension(f: PiecewiseMap, outer: Segment, inner: Segment, n: int) -> ExtensionTrial:
    """
    Compare the relative extension of nested intervals with its lower bound
    :param f: The map
    :param outer: T = (a, d)
    :param inner: J = (a, b), sharing the left endpoint with T
    :param n: The iterate, at least 1
    :return: The measured ratio |T \\ J| / |J|, the length sums and the bound
    """
    if inner[0] != outer[0] or not inner[0] < inner[1] < outer[1]:
        raise PreconditionError('J and T must share their left endpoint with J strictly inside T')
    sigma = _length_sum(f, inner, n)
    tau = _length_sum(f, outer, n)
    rho = (outer[1] - inner[1]) / (inner[1] - inner[0])
    return ExtensionTrial(rho=rho, sigma=sigma, tau=tau, bound=extension_bound(sigma, tau, classify(f).lipschitz_k))


def _telescoped(f: PiecewiseMap, iterates: Sequence[Segment]) -> Scalar:
    product = f.coerce(1)
    exponent = 0.0
    for lo, hi in iterates:
        for index, b in enumerate(f.interior_breakpoints):
            if lo < b < hi:
                left = abs(f.branches[index].derivative(b))
                right = abs(f.branches[index + 1].derivative(b))
                product *= max(left, right) / min(left, right)
        for branch, (p_lo, p_hi) in zip(f.branches, f.pieces):
            overlap = min(hi, p_hi) - max(lo, p_lo)
            if overlap > 0 and branch.lipschitz:
                exponent += branch.lipschitz * float(overlap)
    return product if exponent == 0 else float(product) * math.exp(exponent)


def _sampled_ratio(f: PiecewiseMap, segment: Segment, n: int) -> float:
    values = []
    for branch in restricted_branches(f, segment, n):
        for x in np.linspace(float(branch.lo), float(branch.hi), SMOOTH_SAMPLES)[1:-1]:
            values.append(float(orbit_derivative(f, float(x), n).magnitude))
    if not values:
        return 1.0
    return max(values) / min(values)


def empirical_distortion(f: PiecewiseMap, segment: Segment, n: int) -> DistortionReport:
    """
    Sup ratio of |Df^n| over J with every applicable bound
    :param f: The map
    :param segment: The closed interval J
    :param n: The iterate
    :return: The report; exact for affine maps, sampled inside each monotone branch otherwise
    """
    lo, hi = segment
    report = classify(f)
    if lo == hi:
        one = f.coerce(1)
        return DistortionReport(interval=segment, n=n, empirical=one, multiplicity=0,
                                bound_multiplicity=one, bound_sum=one, telescoped=one, passed=True)

    iterates = [segment]
    for _ in range(n - 1):
        iterates.append(image_interval(f, *iterates[-1]))
    iterates = iterates[:n]
    multiplicity = intersection_multiplicity(iterates)

    if f.is_affine:
        slopes = [abs(branch.slope) for branch in restricted_branches(f, segment, n)]
        empirical = max(slopes) / min(slopes)
    else:
        empirical = _sampled_ratio(f, segment, n)

    try:
        summed = bound_sum(f, segment, n)
    except PreconditionError:
        summed = None
    by_multiplicity = bound_multiplicity(report, multiplicity)
    telescoped = _telescoped(f, iterates)

    arith = f.arithmetic
    passed = arith.le(empirical, by_multiplicity) and arith.le(empirical, telescoped) and \
        (summed is None or arith.le(empirical, summed))
    if not passed:
        logger.warning('Distortion of f^%d on [%s, %s] exceeds a bound: %s', n, format_scalar(lo),
                       format_scalar(hi), format_scalar(empirical))
    return DistortionReport(interval=segment, n=n, empirical=empirical, multiplicity=multiplicity,
                            bound_multiplicity=by_multiplicity, bound_sum=summed, telescoped=telescoped,
                            passed=passed)


def random_segment(rng: np.random.Generator, f: PiecewiseMap, denominator: int = 1000) -> Segment:
    """A random closed interval of the domain with endpoints on a rational grid."""
    a, b = f.domain
    i, j = sorted(rng.choice(denominator + 1, size=2, replace=False))
    width = b - a
    return a + width * Fraction(int(i), denominator), a + width * Fraction(int(j), denominator)


def _trial(seed: int, index: int, n_max: int, f: Optional[PiecewiseMap]) -> Tuple[str, DistortionReport]:
    rng = np.random.default_rng([seed, index])
    if f is None:
        f = random_affine_map(rng)
        map_id = f'random-{seed}-{index}'
    else:
        map_id = f'trial-{index}'
    n = int(rng.integers(1, n_max + 1))
    return map_id, empirical_distortion(f, random_segment(rng, f), n)


def distortion_trials(seed: int, trials: int, n_max: int = 8, f: Optional[PiecewiseMap] = None,
                      workers: Optional[int] = None) -> List[Tuple[str, DistortionReport]]:
    """
    Randomized distortion checks with a fixed seed schedule
    :param seed: The base seed; trial i uses the seed sequence (seed, i)
    :param trials: The number of trials
    :param n_max: The largest iterate
    :param f: A fixed map, random affine maps when None
    :param workers: Worker threads, from the configuration when None
    :return: ``(map_id, report)`` per trial, in trial order
    """
    workers = config.worker_count() if workers is None else workers
    with ThreadPoolExecutor(max_workers=workers) as executor:
        results = list(executor.map(lambda index: _trial(seed, index, n_max, f), range(trials)))
    failures = sum(not report.passed for _, report in results)
    logger.info('%d distortion trials, %d violations', trials, failures)
    return results
