"""
CSV and key-value renderings of the analysis results.
Rationals are written as p/q, floats as the shortest round-trip decimal.
"""
import csv
import io
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from imdyn.distortion import DistortionReport
from imdyn.expansion_certifier import ExpansionCertificate, ExpansionRefusal, KnTable, ManeReport
from imdyn.intervals import segments
from imdyn.map_model import BranchWord, ClassReport
from imdyn.measure_lab import OmegaApprox, ReturnStructure, UlamDensity
from imdyn.orbit_engine import PeriodicOrbit
from imdyn.renormalization import TurningPointRenormalization
from imdyn.scalar import format_scalar


def format_word(word: Optional[BranchWord]) -> str:
    if word is None:
        return ''
    return '-'.join(str(index) for index in word)


def _value(value) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'yes' if value else 'no'
    if isinstance(value, (int, str)):
        return str(value)
    return format_scalar(value)


def to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([_value(value) for value in row])
    return buffer.getvalue()


def to_key_values(pairs: Iterable[Tuple[str, object]]) -> str:
    return ''.join(f'{key}={_value(value)}\n' for key, value in pairs)


def orbits_csv(orbits: Sequence[PeriodicOrbit]) -> str:
    """One column per orbit point, padded to the longest orbit."""
    width = max((orbit.period for orbit in orbits), default=0)
    header = ('period', 'word', *(f'point_{i}' for i in range(width)), 'multiplier_left', 'multiplier_right', 'class')
    rows = [(orbit.period, format_word(orbit.word), *orbit.points, *([None] * (width - orbit.period)),
             orbit.multiplier_left, orbit.multiplier_right, orbit.hyperbolicity.value) for orbit in orbits]
    return to_csv(header, rows)


def kn_csv(table: KnTable) -> str:
    rows = [(row.n, row.k_n, row.orbit_count, format_word(row.attaining_word)) for row in table.rows]
    return to_csv(('n', 'K_n', 'orbit_count', 'attaining_word'), rows)


def expansion_report(result: Union[ExpansionCertificate, ExpansionRefusal]) -> str:
    if isinstance(result, ExpansionCertificate):
        return to_key_values((('N', result.n), ('min_expansion', result.min_expansion),
                              ('witness_word', format_word(result.worst_word))))
    return to_key_values((('refused', True), ('n_limit', result.n_limit), ('min_expansion', result.min_expansion),
                          ('witness_word', format_word(result.worst_word)), ('reason', result.reason)))


def mane_report(report: ManeReport) -> str:
    pairs: List[Tuple[str, object]] = [
        ('avoid', ';'.join(f'{format_scalar(lo)},{format_scalar(hi)}' for lo, hi in segments(report.avoid))),
        ('n_max', report.n_max),
        ('period_bound', report.basins.period_bound),
        ('attractors', len(report.basins.basins)),
    ]
    for basin in report.basins.basins:
        pairs.append((f'basin_{format_scalar(basin.orbit.points[0])}',
                      ';'.join(f'{format_scalar(lo)},{format_scalar(hi)}' for lo, hi in basin.intervals)))
    for k, minimum in enumerate(report.minima):
        pairs.append((f'min_{k}', minimum if minimum is not None else 'empty'))
    pairs.extend((('lambda', report.growth), ('C', report.constant), ('certified', report.certified),
                  ('empty_from', report.empty_from)))
    return to_key_values(pairs)


def renorm_report(results: Sequence[TurningPointRenormalization]) -> str:
    pairs: List[Tuple[str, object]] = []
    for result in results:
        c = format_scalar(result.c)
        pairs.append((f'c={c} depth', result.depth))
        pairs.append((f'c={c} suspect', result.suspect))
        for level, interval in enumerate(result.tower.levels, start=1):
            pairs.append((f'c={c} level={level} q', interval.q))
            pairs.append((f'c={c} level={level} J', f'[{format_scalar(interval.lo)},{format_scalar(interval.hi)}]'))
            pairs.append((f'c={c} level={level} boundary_touching', interval.boundary_touching))
    return to_key_values(pairs)


def distortion_csv(trials: Sequence[Tuple[str, DistortionReport]]) -> str:
    rows = [(map_id, report.interval[0], report.interval[1], report.n, report.empirical, report.multiplicity,
             report.bound_multiplicity, report.bound_sum, report.passed) for map_id, report in trials]
    return to_csv(('map_id', 'J_lo', 'J_hi', 'n', 'empirical', 'S', 'bound_multiplicity', 'bound_sum', 'pass'),
                  rows)


def omega_csv(approx: OmegaApprox) -> str:
    return to_csv(('eps', 'cover_length', 'component_count'),
                  ((cover.eps, cover.cover_length, cover.component_count) for cover in approx.covers))


def density_csv(estimate: UlamDensity) -> str:
    rows = [(lo, hi, float(mass), float(value)) for lo, hi, mass, value
            in zip(estimate.edges, estimate.edges[1:], estimate.masses, estimate.density)]
    return to_csv(('bin_lo', 'bin_hi', 'mass', 'density'), rows)


def returns_csv(structure: ReturnStructure) -> str:
    return to_csv(('comp_lo', 'comp_hi', 'transfer_time'),
                  ((component.lo, component.hi, component.time) for component in structure.components))


def class_report(report: ClassReport) -> str:
    return to_key_values((
        ('class_E', report.in_e), ('class_D', report.in_d), ('class_C', report.in_c),
        ('C', report.deriv_bound_c), ('K', report.var_log_deriv), ('L', report.jump_count_l),
        ('M', report.max_jump_m), ('K_lip', report.lipschitz_k), ('min_abs_deriv', report.min_abs_deriv)))
