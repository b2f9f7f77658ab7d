import platform
from sys import version
from os import environ as env
from os import access, R_OK
from distro import linux_distribution
from os.path import isdir, abspath, dirname, join
from argparse import ArgumentParser, RawTextHelpFormatter
from logging import getLogger, StreamHandler, Formatter, DEBUG

# Needed to check version of python
from gamma2lab import structures  # noqa
from gamma2lab import VERSION, BRANCH, BUILD_DATE
from gamma2lab.iniparser import INIParser, COMMANDS
from gamma2lab.gamma2logger import Gamma2Logger
from gamma2lab.structures import ConfigurationError, AdmissibilityError
from gamma2lab.cli_reporting import run_command, EXIT_CONFIGURATION


PLATFORM_LINUX_DISTRO = ' '.join(x for x in linux_distribution() if x)

# long-form flags share their names with the ini keys
FLAG_KEYS = ('dimension', 'grid_order', 'seed', 'theorem', 'param_s', 'param_p', 'param_q', 'sweep', 'trials',
             'functional', 'multistarts', 'max_iter', 'basis_size', 'u0', 'workers', 'output', 'csv')


if __name__ == "__main__":
    parser = ArgumentParser(prog='gamma2lab',
                            description='Numerical laboratory for weighted Gamma-2 inequalities, Tsallis entropy\n'
                                        'flows and their constants on spheres, restricted to zonal functions',
                            formatter_class=RawTextHelpFormatter)

    parser.add_argument("command", choices=COMMANDS, help='Suite to run')
    parser.add_argument("--data-folder", help='Define an alternate data folder location')
    parser.add_argument("--debug", action='store_true', help='Use to enable DEBUG logging')
    parser.add_argument("--no-debug", action='store_true', help='Use to disable DEBUG logging')

    parser.add_argument("--dimension", help='Sphere dimension n >= 2')
    parser.add_argument("--grid-order", help='Quadrature order (>= 8)')
    parser.add_argument("--seed", help='64-bit seed. Falls back to the file, then G2L_SEED, then GAMMA2LAB_SEED')
    parser.add_argument("--theorem", help='ji, weighted, modified, sobolev, logsob, poincare, rothaus or del14')
    parser.add_argument("--param-s", help='Weight exponent s (accepts fractions such as 16/7)')
    parser.add_argument("--param-p", help='Tsallis exponent p (1 runs the Shannon entropy)')
    parser.add_argument("--param-q", help='Sobolev exponent q')
    parser.add_argument("--sweep", help='Comma separated parameter values, ie. -5,-2,0,16/7,5')
    parser.add_argument("--trials", help='Corpus size')
    parser.add_argument("--exploratory", action='store_true', default=None,
                        help='Allow parameters outside the proven ranges; such results never fail the run')
    parser.add_argument("--functional", help='Probe functional: ji, weighted or modified')
    parser.add_argument("--multistarts", help='Number of random probe starts')
    parser.add_argument("--max-iter", help='Iteration cap per probe start')
    parser.add_argument("--basis-size", help='Number of non-constant modes in corpus and probe fields')
    parser.add_argument("--u0", help='random, eigenmode:a,b or counterexample')
    parser.add_argument("--workers", help='Worker threads for corpora, trajectories and multistarts')
    parser.add_argument("--output", help='JSON report path')
    parser.add_argument("--csv", help='Trajectory CSV path (flow only)')

    opts = parser.parse_args()

    templogger = getLogger('temp')
    templogger.setLevel(DEBUG)
    tempch = StreamHandler()
    tempformatter = Formatter('%(asctime)s : %(levelname)s : %(module)s : %(message)s', '%Y-%m-%d %H:%M:%S')
    tempch.setFormatter(tempformatter)
    templogger.addHandler(tempch)

    DATA_FOLDER = env.get('DATA_FOLDER', vars(opts).get('data_folder') or abspath(join(dirname(__file__), 'data')))

    if isdir(DATA_FOLDER):
        if not access(DATA_FOLDER, R_OK):
            templogger.error("Read permission error for %s", DATA_FOLDER)
            exit(EXIT_CONFIGURATION)
    else:
        templogger.error("%s does not exist", DATA_FOLDER)
        exit(EXIT_CONFIGURATION)

    INI = INIParser(DATA_FOLDER)
    # --no-debug wins over --debug; without either flag G2L_DEBUG or the file decides
    DEBUG_FLAG = False if opts.no_debug else (True if opts.debug else None)

    # Initiate the logger
    gl = Gamma2Logger(data_folder=DATA_FOLDER, debug=INI.debug(DEBUG_FLAG), command=opts.command)
    gl.logger.info('Starting gamma2lab %s...', opts.command)

    gl.logger.info('Data folder is "%s"', DATA_FOLDER)

    gl.logger.info(u"%s %s (%s%s)", platform.system(), platform.release(), platform.version(),
                   ' - ' + PLATFORM_LINUX_DISTRO if PLATFORM_LINUX_DISTRO else '')

    gl.logger.info(u"Python %s", version)

    gl.logger.info("gamma2lab v%s-%s %s", VERSION, BRANCH, BUILD_DATE)

    overrides = {key: getattr(opts, key) for key in FLAG_KEYS}
    overrides['command'] = opts.command
    overrides['exploratory'] = opts.exploratory

    try:
        CONFIG = INI.parse_opts(overrides)
    except (ConfigurationError, AdmissibilityError) as e:
        gl.logger.error('Configuration error: %s - Exiting.', e)
        exit(EXIT_CONFIGURATION)

    gl.update_context(seed=CONFIG.seed)
    if CONFIG.exploratory:
        gl.logger.warning('Exploratory mode: out-of-range parameters are reported but never fail the run')

    REPORT, STATUS = run_command(CONFIG)
    gl.close()
    exit(STATUS)
