from dotenv import load_dotenv
from fractions import Fraction
import logging
import os

load_dotenv()

logger = logging.getLogger(__name__)

# Orbit tails used by the omega-limit estimator
DEFAULT_BURN = 1000
DEFAULT_STEPS = 100000
DEFAULT_EPS_LIST = (Fraction(1, 100), Fraction(1, 1000), Fraction(1, 10000))

# Word enumeration and search horizons
DEFAULT_EXPANSION_LIMIT = 12
DEFAULT_PERIOD_BOUND = 6
DEFAULT_RETURN_HORIZON = 12
DEFAULT_NICE_HORIZON = 256

# Exact iteration falls back to floats past these limits
EXACT_ITERATION_STEPS = 2000
EXACT_DENOMINATOR_BITS = 512

# Ulam power iteration
ULAM_TOLERANCE = 1e-12
ULAM_MAX_ITERATIONS = 20000

FLOAT_TOLERANCE = 1e-12


def _int_setting(name: str, default: int, minimum: int = 1) -> int:
    """
    Read an integer setting from the environment
    :param name: The name of the environment variable
    :param default: The value used when the variable is missing or invalid
    :param minimum: The smallest accepted value
    :return: The integer value of the setting
    """
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.warning('Ignoring %s=%r: not an integer, using %d', name, raw, default)
        return default
    if value < minimum:
        logger.warning('Ignoring %s=%d: below %d, using %d', name, value, minimum, default)
        return default
    return value


def worker_count() -> int:
    """
    :return: The maximum number of workers used for word enumeration (IMDYN_THREADS)
    """
    return _int_setting('IMDYN_THREADS', 1)


def word_budget() -> int:
    """
    :return: The maximum number of branch words a single enumeration may visit (IMDYN_WORD_BUDGET)
    """
    return _int_setting('IMDYN_WORD_BUDGET', 2 ** 22)


def default_seed() -> int:
    """
    :return: The seed used by randomized suites when none is given (IMDYN_DEFAULT_SEED)
    """
    return _int_setting('IMDYN_DEFAULT_SEED', 20240607, minimum=0)


def log_level() -> str:
    """
    :return: The name of the log level for the command line (IMDYN_LOG_LEVEL)
    """
    level = os.getenv('IMDYN_LOG_LEVEL', 'WARNING').upper()
    if level not in logging.getLevelNamesMapping():
        logger.warning('Unknown log level %r, using WARNING', level)
        return 'WARNING'
    return level
