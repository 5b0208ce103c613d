"""
Batch front end: one subcommand per analysis over a map-definition document.

Exit status is 0 on success, 1 on input errors and 2 when an analysis refuses to run.
"""
import argparse
import asyncio
from dataclasses import dataclass, field
import json
import logging
import sys
import traceback
from typing import Any, Awaitable, Callable, Dict, List, Optional, Tuple

import portion as P

from imdyn import config
from imdyn.distortion import distortion_trials
from imdyn.errors import AnalysisRefusal, ImdynError
from imdyn.expansion_certifier import ExpansionRefusal, expansion_n, kn_table, mane_growth
from imdyn.fixtures import FIXTURES
from imdyn.intervals import length, union
from imdyn.map_model import PiecewiseMap, classify, dump_map, parse_map
from imdyn.measure_lab import first_return, nearest_turning_point, omega_approx, symmetric_interval, ulam_acip
from imdyn.orbit_engine import periodic_orbits
from imdyn.renormalization import is_renormalizable
from imdyn import reports
from imdyn.scalar import EXACT, Arithmetic, Mode, float_arithmetic, format_scalar, parse_scalar
from imdyn.utils import ioutils

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_REFUSED = 2

FLOAT_COMMANDS = ('omega', 'acip')
FIXTURE_PREFIX = 'fixture:'


class UsageError(ImdynError):
    """The command line could not be parsed."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    command: str
    map_source: Optional[str]
    output: Optional[str]
    mode: Mode
    options: Dict[str, Any] = field(default_factory=dict)

    @property
    def arithmetic(self) -> Arithmetic:
        return EXACT if self.mode is Mode.EXACT else float_arithmetic(config.FLOAT_TOLERANCE)


def generate_error_response(message: str, stacktrace: str = None, code: int = 500) -> str:
    """
    Generate an error message to be returned
    :param message: The message describing the error.
    :param stacktrace: The stacktrace associated with the error.
    :param code: The error code
    :return: A JSON object with the information
    """
    error_response = {
        "error": {
            "code": code,
            "message": message,
            "stacktrace": stacktrace
        }
    }
    return json.dumps(error_response)


# ===== Argument types =====

def _scalar(text: str):
    try:
        return parse_scalar(text)
    except ImdynError as e:
        raise argparse.ArgumentTypeError(str(e))


def _avoid_set(text: str) -> P.Interval:
    parts = []
    for chunk in filter(None, (piece.strip() for piece in text.split(';'))):
        bounds = chunk.split(',')
        if len(bounds) != 2:
            raise argparse.ArgumentTypeError(f'Expected "lo,hi", got {chunk!r}')
        lo, hi = (_scalar(bound) for bound in bounds)
        if not lo < hi:
            raise argparse.ArgumentTypeError(f'Empty interval {chunk!r}')
        parts.append(P.open(lo, hi))
    return union(parts)


def _eps_list(text: str) -> Tuple:
    values = tuple(_scalar(piece) for piece in text.split(',') if piece.strip())
    if not values or any(value <= 0 for value in values):
        raise argparse.ArgumentTypeError('eps values must be positive')
    return values


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument('--output', '-o', default=None, help='Report file; the report is printed when omitted')
    common.add_argument('--mode', choices=[mode.value for mode in Mode], default=Mode.EXACT.value,
                        help='Arithmetic mode; float is accepted by omega and acip only (default: exact)')
    common.add_argument('--verbose', '-v', action='store_true', help='Log at DEBUG level')

    parser = _Parser(prog='imdyn', description='Dynamics of piecewise monotone interval maps')
    commands = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    def command(name: str, help_text: str, needs_map: bool = True) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, parents=[common], help=help_text)
        if needs_map:
            sub.add_argument('map', help=f'Map document, or {FIXTURE_PREFIX}<name>')
        return sub

    command('orbits', 'Periodic orbits of minimal period n').add_argument('--period', type=int, default=1)
    command('kn', 'Minimum of |Df^n| over periodic orbits').add_argument('--nmax', type=int, default=8)
    command('expand', 'Smallest N with |Df^N| > 1').add_argument(
        '--limit', type=int, default=config.DEFAULT_EXPANSION_LIMIT)

    mane = command('mane', 'Derivative growth away from an open set and the immediate basins')
    mane.add_argument('--avoid', type=_avoid_set, default=P.empty(), help='Open intervals "lo,hi;lo,hi"')
    mane.add_argument('--nmax', type=int, default=10)
    mane.add_argument('--period-bound', type=int, default=config.DEFAULT_PERIOD_BOUND)

    command('renorm', 'Renormalization towers per turning point').add_argument('--qmax', type=int, default=8)

    distort = commands.add_parser('distort', parents=[common], help='Randomized distortion checks')
    distort.add_argument('map', nargs='?', default=None, help='Fixed map; random affine maps when omitted')
    distort.add_argument('--trials', type=int, default=100)
    distort.add_argument('--seed', type=int, default=config.default_seed())
    distort.add_argument('--nmax', type=int, default=8)

    omega = command('omega', 'Covers of the omega-limit set of a turning point')
    omega.add_argument('--seed-point', type=int, default=0, help='Index of the turning point used as seed')
    omega.add_argument('--burn', type=int, default=config.DEFAULT_BURN)
    omega.add_argument('--steps', type=int, default=config.DEFAULT_STEPS)
    omega.add_argument('--eps-list', type=_eps_list, default=config.DEFAULT_EPS_LIST)

    acip = command('acip', 'Ulam estimate of the invariant density')
    acip.add_argument('--bins', type=int, default=64)
    acip.add_argument('--limit', type=int, default=config.DEFAULT_EXPANSION_LIMIT)

    returns = command('returns', 'First-return components into a symmetric interval')
    returns.add_argument('--base', type=_scalar, required=True)
    returns.add_argument('--horizon', type=int, default=config.DEFAULT_RETURN_HORIZON)

    command('classify', 'Class membership and derivative constants')

    fixture = command('fixture', 'Print a named fixture as a map document', needs_map=False)
    fixture.add_argument('name', choices=sorted(FIXTURES))
    return parser


def parse_config(argv: List[str]) -> RunConfig:
    args = build_parser().parse_args(argv)
    mode = Mode(args.mode)
    if mode is Mode.FLOAT and args.command not in FLOAT_COMMANDS:
        raise UsageError(f'--mode float is not available for {args.command}')
    options = {key: value for key, value in vars(args).items()
               if key not in ('command', 'map', 'output', 'mode', 'verbose')}
    options['verbose'] = args.verbose
    return RunConfig(command=args.command, map_source=getattr(args, 'map', None), output=args.output,
                     mode=mode, options=options)


async def load_map(source: str, arithmetic: Arithmetic = EXACT) -> PiecewiseMap:
    if source.startswith(FIXTURE_PREFIX):
        name = source[len(FIXTURE_PREFIX):]
        if name not in FIXTURES:
            raise UsageError(f'Unknown fixture {name!r}')
        f = FIXTURES[name]()
        return f if arithmetic.exact else parse_map(dump_map(f), arithmetic)
    if not ioutils.file_exists(source):
        raise FileNotFoundError(f'{source} does not exist.')
    return await ioutils.read_map(source, arithmetic)


# ===== Subcommands =====

Outcome = Tuple[str, str, int]


async def _orbits(run: RunConfig, f: PiecewiseMap) -> Outcome:
    n = run.options['period']
    orbits = periodic_orbits(f, n)
    return reports.orbits_csv(orbits), f'period={n} orbits={len(orbits)}', EXIT_OK


async def _kn(run: RunConfig, f: PiecewiseMap) -> Outcome:
    table = kn_table(f, run.options['nmax'])
    values = ' '.join(f'K_{row.n}={format_scalar(row.k_n) if row.k_n is not None else "-"}' for row in table.rows)
    return reports.kn_csv(table), values, EXIT_OK


async def _expand(run: RunConfig, f: PiecewiseMap) -> Outcome:
    result = expansion_n(f, run.options['limit'])
    if isinstance(result, ExpansionRefusal):
        return reports.expansion_report(result), f'refused: {result.reason}', EXIT_REFUSED
    return reports.expansion_report(result), f'N={result.n} min_expansion={format_scalar(result.min_expansion)}', \
        EXIT_OK


async def _mane(run: RunConfig, f: PiecewiseMap) -> Outcome:
    report = mane_growth(f, run.options['avoid'], run.options['nmax'], run.options['period_bound'])
    summary = f'certified={"yes" if report.certified else "no"}'
    if report.empty_from is not None:
        summary += f' empty_from={report.empty_from}'
    elif report.growth is not None:
        summary += f' lambda={format_scalar(report.growth)} C={format_scalar(report.constant)}'
    return reports.mane_report(report), summary, EXIT_OK


async def _renorm(run: RunConfig, f: PiecewiseMap) -> Outcome:
    results = is_renormalizable(f, run.options['qmax'])
    summary = ' '.join(f'c={format_scalar(r.c)}:depth={r.depth}{":suspect" if r.suspect else ""}' for r in results)
    return reports.renorm_report(results), summary or 'no turning points', EXIT_OK


async def _distort(run: RunConfig, f: Optional[PiecewiseMap]) -> Outcome:
    trials = distortion_trials(run.options['seed'], run.options['trials'], run.options['nmax'], f)
    violations = sum(not report.passed for _, report in trials)
    return reports.distortion_csv(trials), f'trials={len(trials)} violations={violations}', EXIT_OK


async def _omega(run: RunConfig, f: PiecewiseMap) -> Outcome:
    index = run.options['seed_point']
    if not 0 <= index < len(f.turning_points):
        raise UsageError(f'The map has {len(f.turning_points)} turning points, no index {index}')
    approx = omega_approx(f, f.turning_points[index], run.options['burn'], run.options['steps'],
                          run.options['eps_list'])
    curve = ' '.join(f'{format_scalar(cover.eps)}:{format_scalar(cover.cover_length)}' for cover in approx.covers)
    return reports.omega_csv(approx), f'arithmetic={approx.arithmetic.value} {curve}', EXIT_OK


async def _acip(run: RunConfig, f: PiecewiseMap) -> Outcome:
    result = expansion_n(f, run.options['limit'])
    if isinstance(result, ExpansionRefusal):
        raise AnalysisRefusal(f'no expansion certificate: {result.reason}')
    estimate = ulam_acip(f, run.options['bins'], result)
    summary = (f'bins={estimate.bin_count} residual={estimate.residual:.3e} '
               f'converged={"yes" if estimate.converged else "no"}')
    return reports.density_csv(estimate), summary, EXIT_OK


async def _returns(run: RunConfig, f: PiecewiseMap) -> Outcome:
    x = run.options['base']
    base = symmetric_interval(f, nearest_turning_point(f, x), x)
    structure = first_return(f, base, run.options['horizon'])
    summary = f'components={len(structure.components)} unresolved={format_scalar(length(structure.unresolved))}'
    return reports.returns_csv(structure), summary, EXIT_OK


async def _classify(run: RunConfig, f: PiecewiseMap) -> Outcome:
    report = classify(f)
    summary = ' '.join(f'{name}={"yes" if flag else "no"}'
                       for name, flag in (('E', report.in_e), ('D', report.in_d), ('C', report.in_c)))
    return reports.class_report(report), summary, EXIT_OK


async def _fixture(run: RunConfig, f: None) -> Outcome:
    name = run.options['name']
    return dump_map(FIXTURES[name]()), f'fixture={name}', EXIT_OK


HANDLERS: Dict[str, Callable[[RunConfig, Any], Awaitable[Outcome]]] = {
    'orbits': _orbits,
    'kn': _kn,
    'expand': _expand,
    'mane': _mane,
    'renorm': _renorm,
    'distort': _distort,
    'omega': _omega,
    'acip': _acip,
    'returns': _returns,
    'classify': _classify,
    'fixture': _fixture,
}


def _configure_logging(verbose: bool):
    level = logging.DEBUG if verbose else config.log_level()
    logging.basicConfig(level=level, stream=sys.stderr,
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')


async def run(argv: List[str]) -> int:
    """
    Run one subcommand
    :param argv: The arguments, without the program name
    :return: The exit status
    """
    try:
        run_config = parse_config(argv)
    except UsageError as e:
        print(generate_error_response(str(e), code=EXIT_INPUT_ERROR), file=sys.stderr)
        return EXIT_INPUT_ERROR
    _configure_logging(run_config.options['verbose'])

    try:
        f = None
        if run_config.map_source is not None:
            f = await load_map(run_config.map_source, run_config.arithmetic)
        report, summary, status = await HANDLERS[run_config.command](run_config, f)
        if run_config.output:
            await ioutils.write_file(run_config.output, report)
        else:
            sys.stdout.write(report)
        print(summary)
        return status

    except AnalysisRefusal as e:
        logger.warning('Analysis refused: %s', e.reason)
        print(generate_error_response(e.reason, code=EXIT_REFUSED), file=sys.stderr)
        return EXIT_REFUSED
    except (ImdynError, ValueError, OSError) as e:
        print(generate_error_response(str(e), traceback.format_exc(), code=EXIT_INPUT_ERROR), file=sys.stderr)
        return EXIT_INPUT_ERROR


def main():
    sys.exit(asyncio.run(run(sys.argv[1:])))
