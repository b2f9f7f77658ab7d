"""
Command dispatch for the gamma2lab entry script: each cmd_* runs one suite from a validated
RunConfig and returns a ReportDocument; run_command maps failures onto exit codes.
"""
from logging import getLogger

import numpy as np

from gamma2lab import VERSION
from gamma2lab.helpers import parse_u0_spec
from gamma2lab.reportmanager import ReportManager, BackendConfig
from gamma2lab.spectral_heat import lambda1
from gamma2lab.sphere_zonal_calculus import (build_grid, counterexample_profile, eigenmode_field, power,
                                             lemma_identities)
from gamma2lab.constant_probe import sharpness_report
from gamma2lab.inequality_suite import (corpus, check_corpus, run_counterexample, weighted_admissible,
                                        modified_admissible, CHECKERS)
from gamma2lab.flow_monitor import (run_flow, run_shannon_flow, check_ode_inequality, check_decay,
                                    counterexample_initial_data, write_trajectory_csv, SHANNON)
from gamma2lab.structures import (ReportDocument, Gamma2LabError, ConfigurationError, AdmissibilityError,
                                  ParameterError, NumericError, DomainError, ConvergenceError)

logger = getLogger()

EXIT_PASS = 0
EXIT_FAILURE = 1
EXIT_CONFIGURATION = 2
EXIT_NUMERIC = 3

MASS_DRIFT = 1e-10
# relative to max |u0| and to the largest |dT/dt| and |T| respectively
MINIMUM_DROP = 1e-9
MONOTONE_SLACK = 1e-12


def _result(check, passed, exploratory=False, **details):
    return {'check': check, 'passed': bool(passed), 'exploratory': bool(exploratory), **details}


def build_report(config, results):
    """Overall pass is the conjunction over the non-exploratory results."""
    passed = all(result['passed'] for result in results if not result['exploratory'])
    return ReportDocument(tool_version=VERSION, config=config._asdict(), tolerances=dict(config.tolerances),
                          results=tuple(results), passed=passed)


def exit_status(report):
    return EXIT_PASS if report.passed else EXIT_FAILURE


def _sweep(config, single):
    if config.sweep:
        return tuple(config.sweep)
    value = getattr(config, single)
    return () if value is None else (value,)


def initial_fields(config, grid, count=1, s=None):
    """Fields named by the u0 setting: the seeded corpus, one eigenmode field or the counterexample field."""
    kind, args = parse_u0_spec(config.u0)
    if kind == 'random':
        return corpus(grid, config.seed, count, config.basis_size)
    if kind == 'eigenmode':
        return [eigenmode_field(grid, *args)]
    if s is None:
        return [counterexample_profile(grid)]
    return [power(counterexample_profile(grid), 2 / (s + 2))]


def cmd_verify_identities(config):
    tolerance = config.tolerances['identity']
    grid = build_grid(config.n, config.grid_order)
    fields = initial_fields(config, grid, config.trials)

    worst = {}
    for field in fields:
        for name, deviation in lemma_identities(field).items():
            worst[name] = max(worst.get(name, 0.0), deviation)

    results = [_result(f'identity:{name}', deviation <= tolerance, deviation=deviation, tolerance=tolerance,
                       cases=len(fields)) for name, deviation in sorted(worst.items())]
    logger.info('Identity suite on S^%s, order %s, %s fields: worst deviation %.3e', config.n, config.grid_order,
                len(fields), max(worst.values()) if worst else 0.0)
    return build_report(config, results)


def cmd_check(config):
    tolerance = config.tolerances['margin']
    grid = build_grid(config.n, config.grid_order)
    parameter_name = CHECKERS[config.theorem][1]
    parameters = (None,) if parameter_name is None else _sweep(config, f'param_{parameter_name}')
    kind, _ = parse_u0_spec(config.u0)

    results = []
    for parameter in parameters:
        s = parameter if kind == 'counterexample' else None
        fields = initial_fields(config, grid, config.trials, s=s)
        reports = check_corpus(config.theorem, fields, parameter, exploratory=config.exploratory,
                               workers=config.workers, rtol=config.tolerances['refine'])
        exploratory = any(report.exploratory for report in reports)
        worst = min(reports, key=lambda report: report.relative_margin)
        results.append(_result(f'theorem:{config.theorem}', all(report.holds(tolerance) for report in reports),
                               exploratory=exploratory, parameter=parameter,
                               worst_relative_margin=worst.relative_margin, worst_case=worst.metadata.get('case'),
                               order=max(report.metadata['order'] for report in reports),
                               refined=all(report.metadata['refined'] for report in reports),
                               cases=reports))
        logger.info('%s parameter=%s: %s cases, worst relative margin %.3e (order %s)', config.theorem, parameter,
                    len(reports), worst.relative_margin, worst.metadata['order'])
    return build_report(config, results)


def flow_initial_data(config, grid):
    kind, _ = parse_u0_spec(config.u0)
    if kind == 'counterexample':
        return counterexample_initial_data(grid, config.param_p)
    return initial_fields(config, grid)[0]


def _fd_discrepancy(analytic, finite, mass):
    """
    Worst relative gap between analytic and finite-difference columns. The scale is floored at 1e-9 of
    the largest analytic value and at 1e-12 of the mass, below which both columns are roundoff.
    """
    usable = np.isfinite(finite)
    if not usable.any():
        return 0.0
    analytic, finite = analytic[usable], finite[usable]
    floor = max(1e-9 * np.abs(analytic).max(), 1e-12 * abs(mass), 1e-300)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(finite)), floor)
    return float((np.abs(analytic - finite) / scale).max())


def cmd_flow(config):
    n, p = config.n, config.param_p
    tolerances = config.tolerances
    grid = build_grid(n, config.grid_order)
    u0 = flow_initial_data(config, grid)

    if p == SHANNON:
        trajectory = run_shannon_flow(u0, workers=config.workers)
    else:
        trajectory = run_flow(u0, p, workers=config.workers)

    ode = check_ode_inequality(trajectory, n, p, exploratory=config.exploratory, tolerance=tolerances['ode'])
    decay = check_decay(trajectory, n, p, exploratory=config.exploratory, tolerance=tolerances['decay'])
    masses = trajectory.column('mass')
    minima = trajectory.column('min_value')
    first = _fd_discrepancy(trajectory.column('d_analytic'), trajectory.column('d_fd'), masses[0])
    second = _fd_discrepancy(trajectory.column('d2_analytic'), trajectory.column('d2_fd'), masses[0])
    drift = float(np.abs(masses - masses[0]).max() / abs(masses[0]))
    drop = float(max(0.0, (minima[0] - minima).max()))
    drop_allowed = MINIMUM_DROP * float(np.abs(u0.values).max())
    rates, entropies = trajectory.column('d_analytic'), trajectory.column('entropy')
    worst_rate = float(rates.min())
    worst_step = float(np.diff(entropies).min()) if entropies.size > 1 else 0.0
    monotone = (worst_rate >= -MONOTONE_SLACK * max(np.abs(rates).max(), 1e-300)
                and worst_step >= -MONOTONE_SLACK * max(np.abs(entropies).max(), 1e-300))

    results = [
        _result('flow:ode_inequality', ode.passed, exploratory=ode.exploratory, p=p, detail=ode),
        _result('flow:decay', decay.passed and decay.slope_ok, exploratory=ode.exploratory, p=p, detail=decay),
        _result('flow:fd_first', first <= tolerances['fd_first'], discrepancy=first,
                tolerance=tolerances['fd_first']),
        _result('flow:fd_second', second <= tolerances['fd_second'], discrepancy=second,
                tolerance=tolerances['fd_second']),
        _result('flow:mass', drift <= MASS_DRIFT, drift=drift, samples=len(trajectory.records),
                horizon=float(trajectory.times[-1])),
        _result('flow:maximum_principle', drop <= drop_allowed, min_value_drop=drop, allowed=drop_allowed,
                initial_min=float(minima[0])),
        _result('flow:monotone', monotone, worst_rate=worst_rate, worst_step=worst_step),
    ]

    if config.csv and not write_trajectory_csv(trajectory, config.csv):
        raise ConfigurationError(f'Could not write the trajectory to {config.csv}')
    return build_report(config, results)


def cmd_probe(config):
    tolerance = config.tolerances['probe_lower_bound']
    sweep = () if config.functional == 'ji' else _sweep(config, 'param_s')
    rows = sharpness_report(config.n, config.functional, sweep, order=config.grid_order,
                            basis_size=config.basis_size, multistarts=config.multistarts, max_iter=config.max_iter,
                            seed=config.seed, exploratory=config.exploratory, workers=config.workers)

    results = []
    for row in rows:
        if config.functional == 'weighted':
            exploratory = not weighted_admissible(config.n, row.parameter)
        elif config.functional == 'modified':
            exploratory = not modified_admissible(config.n, row.parameter)
        else:
            exploratory = False
        lower_bound = row.min_ratio >= row.constant - tolerance * max(1.0, abs(row.constant))
        results.append(_result(f'probe:{config.functional}', lower_bound, exploratory=exploratory, row=row))
    return build_report(config, results)


def cmd_counterexample(config):
    report = run_counterexample(config.n, config.param_s, order=config.grid_order,
                                factor=config.tolerances['counterexample_factor'], rtol=config.tolerances['refine'])
    alpha_flag = report.alpha > config.n / (config.n - 1)
    results = [_result('counterexample', report.confirmed, s=config.param_s, detail=report,
                       alpha_exceeds_ratio=alpha_flag, lambda1=lambda1(config.n),
                       order=report.report.metadata['order'], refined=report.report.metadata['refined'])]
    return build_report(config, results)


COMMANDS = {
    'verify-identities': cmd_verify_identities,
    'check': cmd_check,
    'flow': cmd_flow,
    'probe': cmd_probe,
    'counterexample': cmd_counterexample,
}


def write_report(report, path, timestamp=True):
    manager = ReportManager([BackendConfig(backend_type='json', path=path, timestamp=timestamp)])
    written = manager.write_report(report)
    manager.close()
    return bool(written) and all(written.values())


def run_command(config):
    """
    Runs config.command and returns (report, exit code). report is None when the run aborted:
    configuration and admissibility errors give 2, numeric trouble gives 3.
    """
    try:
        report = COMMANDS[config.command](config)
    except (ConfigurationError, AdmissibilityError, ParameterError) as e:
        logger.error('Configuration error: %s', e)
        return None, EXIT_CONFIGURATION
    except (NumericError, DomainError, ConvergenceError) as e:
        logger.critical('Numeric error: %s', e)
        return None, EXIT_NUMERIC
    except FloatingPointError as e:
        logger.critical('Floating point error: %s', e)
        return None, EXIT_NUMERIC
    except Gamma2LabError as e:
        logger.critical('Run aborted: %s', e)
        return None, EXIT_NUMERIC

    if config.output:
        if not write_report(report, config.output):
            logger.error('Report could not be written to %s', config.output)
            return report, EXIT_CONFIGURATION

    status = exit_status(report)
    failed = [result['check'] for result in report.results if not result['passed'] and not result['exploratory']]
    if failed:
        logger.error('%s failed: %s', config.command, ', '.join(failed))
    else:
        logger.info('%s passed (%s results)', config.command, len(report.results))
    return report, status
