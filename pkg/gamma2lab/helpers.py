from os import makedirs
from os.path import isdir
from hashlib import sha256
from fractions import Fraction
from logging import getLogger

import numpy as np

from gamma2lab.structures import ConfigurationError

logger = getLogger()


def hashit(string):
    encoded = string.encode()
    hashed = sha256(encoded).hexdigest()

    return hashed


def mkdir_p(path):
    templogger = getLogger('temp')
    try:
        if not isdir(path):
            templogger.info('Creating folder %s ', path)
            makedirs(path, exist_ok=True)
    except Exception as e:
        templogger.error('Could not create folder %s : %s ', path, e)


def boolcheck(var):
    if isinstance(var, bool):
        return var
    if var.lower() in ['true', 'yes', '1', 'on']:
        return True
    else:
        return False


def parse_number(item):
    """Accepts plain floats and fractions such as 16/7."""
    item = item.strip()
    try:
        return float(item)
    except ValueError:
        return float(Fraction(item))


def clean_float_list(value_list, list_type=None):
    """Parse a comma separated list of numbers. Bad items are logged and dropped."""
    if not value_list:
        return ()
    if not isinstance(value_list, str):
        return tuple(float(value) for value in value_list)

    cleaned_list = value_list.replace(' ', '').split(',')
    valid_values = []
    for item in cleaned_list:
        if not item:
            continue
        try:
            valid_values.append(parse_number(item))
        except (ValueError, ZeroDivisionError):
            logger.error("%s is not a valid number for %s", item, list_type)
    if not valid_values:
        raise ConfigurationError(f'No valid values in {list_type} list: {value_list!r}')
    logger.debug('%s : %s', list_type, valid_values)
    return tuple(valid_values)


def parse_u0_spec(spec):
    """
    Initial data mini-language: 'random', 'counterexample' or 'eigenmode:a,b'.
    Returns (kind, args).
    """
    if spec is None:
        raise ConfigurationError('Missing u0 specification')
    spec = spec.strip().lower()
    if spec in ('random', 'counterexample'):
        return spec, ()
    if spec.startswith('eigenmode:'):
        args = spec.split(':', 1)[1].split(',')
        if len(args) != 2:
            raise ConfigurationError(f'eigenmode needs two numbers a,b: {spec!r}')
        try:
            a, b = (parse_number(arg) for arg in args)
        except (ValueError, ZeroDivisionError):
            raise ConfigurationError(f'Bad eigenmode coefficients: {spec!r}')
        if a <= abs(b):
            raise ConfigurationError(f'eigenmode:a,b needs a > |b| for a positive field, got {spec!r}')
        return 'eigenmode', (a, b)
    raise ConfigurationError(f'Unknown u0 specification {spec!r}. Use random, eigenmode:a,b or counterexample')


def spawn_seeds(seed, count):
    """Deterministic child seeds for per-case generators."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def relative_difference(a, b, floor=1e-300):
    return abs(a - b) / max(abs(a), abs(b), floor)
