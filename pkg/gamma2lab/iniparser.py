from shutil import copyfile
from os import environ as env
from logging import getLogger
from os.path import join, exists
from configparser import ConfigParser, MissingSectionHeaderError

import numpy as np

from gamma2lab.constant_probe import PROBE_FUNCTIONALS
from gamma2lab.sphere_zonal_calculus import MIN_ORDER
from gamma2lab.helpers import boolcheck, clean_float_list, parse_number, parse_u0_spec
from gamma2lab.structures import RunConfig, ConfigurationError, DEFAULT_TOLERANCES
from gamma2lab.inequality_suite import (THEOREMS, CHECKERS, weighted_admissible, modified_admissible,
                                        sobolev_admissible, del14_admissible, ode_admissible, counterexample_window,
                                        _gate)

COMMANDS = ('verify-identities', 'check', 'flow', 'probe', 'counterexample')
SECTION = 'global'
SEED_FALLBACK = 42

# ini key -> RunConfig field
KEYS = {
    'command': 'command',
    'dimension': 'n',
    'grid_order': 'grid_order',
    'seed': 'seed',
    'theorem': 'theorem',
    'param_s': 'param_s',
    'param_p': 'param_p',
    'param_q': 'param_q',
    'sweep': 'sweep',
    'trials': 'trials',
    'exploratory': 'exploratory',
    'functional': 'functional',
    'multistarts': 'multistarts',
    'max_iter': 'max_iter',
    'basis_size': 'basis_size',
    'u0': 'u0',
    'workers': 'workers',
    'output': 'output',
    'csv': 'csv',
}
INTEGER_KEYS = ('dimension', 'grid_order', 'trials', 'multistarts', 'max_iter', 'basis_size', 'workers')
NUMBER_KEYS = ('param_s', 'param_p', 'param_q')
THEOREM_PARAMETER = {'weighted': 'param_s', 'modified': 'param_s', 'sobolev': 'param_q', 'del14': 'param_q'}


class INIParser(object):
    """
    Flat key = value configuration in <data folder>/gamma2lab.ini. Keys may be overridden by
    G2L_<KEY> environment variables; command-line overrides win over both.
    """
    def __init__(self, data_folder, inifile='gamma2lab.ini'):
        self.data_folder = data_folder
        self.inifile = inifile
        self.logger = getLogger()
        self.config = self.read_file(inifile)

    def read_file(self, inifile):
        config = ConfigParser(interpolation=None)
        file_path = join(self.data_folder, inifile)

        if not exists(file_path):
            self.logger.error('File missing (%s) in %s', inifile, self.data_folder)
            example = join(self.data_folder, 'gamma2lab.example.ini')
            if inifile == 'gamma2lab.ini' and exists(example):
                try:
                    self.logger.debug('Creating gamma2lab.ini from gamma2lab.example.ini')
                    copyfile(example, file_path)
                except IOError as e:
                    self.logger.error('Could not write to %s (%s). Using defaults', self.data_folder, e)
                    return config
            else:
                self.logger.warning('No configuration file found. Using defaults')
                return config

        self.logger.debug('Reading from %s', inifile)
        with open(file_path) as config_ini:
            text = config_ini.read()
        try:
            config.read_string(text)
        except MissingSectionHeaderError:
            config.read_string(f'[{SECTION}]\n{text}')
        return config

    def raw(self, key):
        """Environment first, then the file. None when neither sets the key."""
        value = env.get(f'G2L_{key.upper()}')
        if value is None and self.config.has_section(SECTION):
            value = self.config.get(SECTION, key, fallback=None)
        if value is not None and value.strip() == '':
            return None
        return value

    def seed(self, flag=None):
        """--seed > file seed > G2L_SEED > GAMMA2LAB_SEED > 42"""
        for source, value in (('flag', flag),
                              ('file', self.config.get(SECTION, 'seed', fallback=None)
                               if self.config.has_section(SECTION) else None),
                              ('G2L_SEED', env.get('G2L_SEED')),
                              ('GAMMA2LAB_SEED', env.get('GAMMA2LAB_SEED'))):
            if value is not None and str(value).strip() != '':
                self.logger.debug('Seed taken from %s', source)
                return parse_seed(value)
        return SEED_FALLBACK

    def debug(self, flag=None):
        """--debug/--no-debug > G2L_DEBUG > file debug > off"""
        if flag is not None:
            return bool(flag)
        value = self.raw('debug')
        return False if value is None else boolcheck(value.strip())

    def tolerances(self):
        tolerances = dict(DEFAULT_TOLERANCES)
        for name in DEFAULT_TOLERANCES:
            value = self.raw(f'tol_{name}')
            if value is None:
                continue
            try:
                tolerances[name] = parse_number(value)
            except (ValueError, ZeroDivisionError):
                raise ConfigurationError(f'tol_{name} = {value!r} is not a number')
        return tolerances

    def parse_opts(self, overrides=None):
        """RunConfig from defaults, file, environment and overrides (ini key -> value), then validated."""
        overrides = {key: value for key, value in (overrides or {}).items() if value is not None}
        unknown = [key for key in overrides if key not in KEYS and not key.startswith('tol_')]
        if unknown:
            raise ConfigurationError(f'Unknown configuration keys: {unknown}')

        fields = {}
        for key, field in KEYS.items():
            if key == 'seed':
                continue
            value = overrides.get(key, self.raw(key))
            if value is None:
                continue
            fields[field] = convert(key, value)
        fields['seed'] = self.seed(overrides.get('seed'))

        tolerances = self.tolerances()
        for key, value in overrides.items():
            if key.startswith('tol_'):
                name = key[4:]
                if name not in DEFAULT_TOLERANCES:
                    raise ConfigurationError(f'Unknown tolerance {name!r}')
                tolerances[name] = float(value)
        fields['tolerances'] = tolerances

        config = validate_config(RunConfig(**fields))
        self.logger.debug('Effective configuration: %s', config._asdict())
        return config


def parse_seed(value):
    try:
        seed = int(str(value).strip())
    except ValueError:
        raise ConfigurationError(f'Seed must be an integer, got {value!r}')
    if not 0 <= seed < 2 ** 64:
        raise ConfigurationError(f'Seed must be a 64-bit unsigned integer, got {seed}')
    return seed


def convert(key, value):
    if isinstance(value, str):
        value = value.strip()
    try:
        if key in INTEGER_KEYS:
            number = parse_number(value) if isinstance(value, str) else value
            if float(number) != int(number):
                raise ValueError
            return int(number)
        if key in NUMBER_KEYS:
            return parse_number(value) if isinstance(value, str) else float(value)
    except (ValueError, ZeroDivisionError, TypeError):
        raise ConfigurationError(f'{key} = {value!r} is not a valid number')
    if key == 'sweep':
        return clean_float_list(value, 'sweep')
    if key == 'exploratory':
        return boolcheck(value)
    return value


def _parameter_values(config, single):
    value = getattr(config, single)
    if config.sweep:
        return config.sweep
    return () if value is None else (value,)


def validate_config(config):
    """
    Checks a RunConfig against the preconditions of the command it names. Admissibility is
    gated exactly as the library gates it, so out-of-range parameters fail here, before any run.
    """
    if config.command not in COMMANDS:
        raise ConfigurationError(f'Unknown command {config.command!r}; choose from {COMMANDS}')
    if config.n < 2:
        raise ConfigurationError(f'dimension must be >= 2, got {config.n}')
    if config.grid_order < MIN_ORDER:
        raise ConfigurationError(f'grid_order must be >= {MIN_ORDER}, got {config.grid_order}')
    for name in ('trials', 'multistarts', 'max_iter', 'workers'):
        if getattr(config, name) < 1:
            raise ConfigurationError(f'{name} must be >= 1, got {getattr(config, name)}')
    if not 1 <= config.basis_size <= config.grid_order // 4:
        raise ConfigurationError(f'basis_size must be between 1 and grid_order/4 = {config.grid_order // 4}')
    for name, value in config.tolerances.items():
        if not np.isfinite(value) or value <= 0:
            raise ConfigurationError(f'Tolerance {name} must be positive, got {value}')
    kind, args = parse_u0_spec(config.u0)

    n, exploratory = config.n, config.exploratory
    if config.command == 'check':
        if config.theorem not in THEOREMS:
            raise ConfigurationError(f'Unknown theorem {config.theorem!r}; choose from {list(THEOREMS)}')
        values = ()
        if CHECKERS[config.theorem][1] is not None:
            values = _parameter_values(config, THEOREM_PARAMETER[config.theorem])
            if not values:
                flag = THEOREM_PARAMETER[config.theorem].replace('_', '-')
                raise ConfigurationError(f'{config.theorem} needs --{flag} or --sweep')
            admissible = {'weighted': weighted_admissible, 'modified': modified_admissible,
                          'sobolev': sobolev_admissible, 'del14': del14_admissible}[config.theorem]
            for value in values:
                _gate(admissible(n, value), config.theorem, THEOREM_PARAMETER[config.theorem][-1], value,
                      exploratory)
                if config.theorem in ('sobolev', 'del14') and (value == 2 or value <= 0):
                    raise ConfigurationError(f'q = {value} has no Sobolev form')
        if kind == 'counterexample':
            if config.theorem not in ('weighted', 'modified') or -2 in values:
                raise ConfigurationError('u0 = counterexample applies to weighted/modified with s != -2')
    elif config.command == 'flow':
        p = config.param_p
        if p is None:
            raise ConfigurationError('flow needs --param-p (1 runs the Shannon entropy)')
        if p <= 0:
            raise ConfigurationError(f'p must be positive, got {p}')
        if p != 1:
            _gate(ode_admissible(n, p), 'ode', 'p', p, exploratory)
        if kind == 'counterexample':
            _check_window(n, 2 / (p - 1) if p != 1 else float('inf'), f'p = {p}')
    elif config.command == 'probe':
        if config.functional not in PROBE_FUNCTIONALS:
            raise ConfigurationError(f'Unknown probe functional {config.functional!r}; '
                                     f'choose from {PROBE_FUNCTIONALS}')
        if config.functional != 'ji':
            admissible = weighted_admissible if config.functional == 'weighted' else modified_admissible
            for value in _parameter_values(config, 'param_s'):
                _gate(admissible(n, value), config.functional, 's', value, exploratory)
    elif config.command == 'counterexample':
        if config.param_s is None:
            raise ConfigurationError('counterexample needs --param-s')
        _check_window(n, config.param_s, f's = {config.param_s}')
    return config


def _check_window(n, s, label):
    low, high = counterexample_window(n)
    if not low < s < high:
        raise ConfigurationError(f'{label} lies outside the counterexample window ({low:.6g}, {high:g}) '
                                 f'for dimension {n}')
