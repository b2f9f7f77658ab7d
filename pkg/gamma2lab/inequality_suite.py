"""
Bound constants, admissible parameter sets and signed-margin checkers.

Margins follow one sign convention: margin = lhs - rhs where rhs already carries the
constant, so margin >= 0 means the inequality holds for the field under test.
"""
from logging import getLogger
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from gamma2lab.helpers import spawn_seeds
from gamma2lab.spectral_heat import lambda1
from gamma2lab.structures import (MarginReport, CounterexampleReport, ConvergenceRow, ConvergenceTable,
                                  ParameterError, AdmissibilityError, DomainError, DEFAULT_TOLERANCES)
from gamma2lab.sphere_zonal_calculus import (build_grid, counterexample_profile, random_positive_field, refine_until,
                                             power, log, quadrature, laplacian, grad_norm_sq, hessian_norm_sq,
                                             ricci_term)
from gamma2lab.entropy_functionals import (gamma2_log, fisher_log, weighted_gamma2, weighted_dirichlet,
                                           modified_weighted_gamma2, entropy_gap, sobolev_gap, dirichlet_mean)

logger = getLogger()

THEOREMS = ('ji', 'weighted', 'modified', 'sobolev', 'logsob', 'poincare', 'rothaus', 'del14')

# closed ends of the admissible sets are compared with this slack
BOUNDARY_SLACK = 1e-12


def _at_most(x, bound):
    return x <= bound + BOUNDARY_SLACK * max(1.0, abs(bound))


def _at_least(x, bound):
    return x >= bound - BOUNDARY_SLACK * max(1.0, abs(bound))


# Admissible sets
def weighted_range(n):
    """s <= 0 or s >= 4(n+2)/(4n-1)"""
    return 0.0, 4 * (n + 2) / (4 * n - 1)


def modified_range(n):
    """s <= -2(2n^2+1)/(4n-1) or s >= 2"""
    return -2 * (2 * n * n + 1) / (4 * n - 1), 2.0


def sobolev_upper(n):
    return (2 * n * n + 1) / (n - 1) ** 2


def del14_upper(n):
    return 2 * n / (n - 2)


def ode_lower(n):
    return 2 * (n - 1) ** 2 / (2 * n * n + 1)


def weighted_admissible(n, s):
    low, high = weighted_range(n)
    return _at_most(s, low) or _at_least(s, high)


def modified_admissible(n, s):
    low, high = modified_range(n)
    return _at_most(s, low) or _at_least(s, high)


def sobolev_admissible(n, q):
    return _at_least(q, 1.0) and q != 2 and _at_most(q, sobolev_upper(n))


def del14_admissible(n, q):
    return n >= 3 and _at_least(q, 1.0) and q != 2 and _at_most(q, del14_upper(n))


def ode_admissible(n, p):
    return _at_least(p, ode_lower(n)) and p != 1 and _at_most(p, 2.0)


def _gate(admissible, theorem, name, value, exploratory):
    if admissible:
        return False
    if not exploratory:
        low_high = {'weighted': 's <= 0 or s >= 4(n+2)/(4n-1)',
                    'modified': 's <= -2(2n^2+1)/(4n-1) or s >= 2',
                    'sobolev': 'q in [1,2) or (2,(2n^2+1)/(n-1)^2]',
                    'del14': 'n >= 3 and q in [1,2) or (2,2n/(n-2)]',
                    'ode': 'p in [2(n-1)^2/(2n^2+1),1) or (1,2]'}[theorem]
        raise AdmissibilityError(f'{name} = {value} is outside the admissible set of {theorem} ({low_high})')
    logger.debug('Exploratory %s with %s = %s outside the admissible set', theorem, name, value)
    return True


# Constants
def constant_weighted(n, lam1, s, exploratory=False):
    _gate(weighted_admissible(n, s), 'weighted', 's', s, exploratory)
    if n * s == 4:
        raise ParameterError('ns = 4 is a pole of the weighted constant')
    factor = (n - 1) ** 2 * s / ((n + 2) * (n * s - 4))
    return (1 - factor) * lam1 + n * factor


def constant_modified(n, lam1, s, exploratory=False):
    _gate(modified_admissible(n, s), 'modified', 's', s, exploratory)
    if s == -2:
        raise ParameterError('s = -2 is a pole of the modified constant')
    factor = (n - 1) ** 2 * (s - 2) / (n * (n + 2) * (s + 2))
    return (1 - factor) * lam1 + n * factor


def constant_ji(n, lam1):
    return (4 * n - 1) / (n * (n + 2)) * lam1 + (n - 1) ** 2 / (n * (n + 2)) * n


def constant_rothaus(n, lam1):
    return 4 * n / (n + 1) ** 2 * lam1 + (n - 1) ** 2 / (n + 1) ** 2 * n


def constant_sobolev(n, lam1, q, exploratory=False):
    _gate(sobolev_admissible(n, q), 'sobolev', 'q', q, exploratory)
    factor = (n - 1) ** 2 * (q - 1) / (n * (n + 2))
    return (1 - factor) * lam1 + n * factor


def constant_del14(n, lam1, q, exploratory=False):
    _gate(del14_admissible(n, q), 'del14', 'q', q, exploratory)
    factor = (n - 1) ** 2 * (q - 1) / ((q - 2) + (n + 1) ** 2)
    return (1 - factor) * lam1 + n * factor


def constant_ode(n, lam1, p, exploratory=False):
    """C(n,p)"""
    _gate(ode_admissible(n, p), 'ode', 'p', p, exploratory)
    if p == 0 or p == 1:
        raise ParameterError(f'p = {p} is singular for C(n,p)')
    factor = (n - 1) ** 2 * (2 / p - 1) / (n * (n + 2))
    return 2 * ((1 - factor) * lam1 + n * factor)


def alpha_parameter(n, s, variant='modified'):
    """The completed-square parameter of the two proofs; the square coefficient of u^-2 |grad u|^4 vanishes for it."""
    if variant == 'weighted':
        return (n - 1) * n * s / ((n + 2) * (n * s - 4))
    if variant == 'modified':
        t = s + 2
        return (n - 1) / (n + 2) * (1 - 4 / t)
    raise ParameterError(f'Unknown alpha variant {variant!r}')


# Reports
def margin_report(theorem, parameter, lhs, constant, rhs_integral, exploratory=False, **metadata):
    rhs = constant * rhs_integral
    margin = lhs - rhs
    return MarginReport(theorem=theorem, parameter=parameter, lhs=float(lhs), constant=float(constant),
                        rhs=float(rhs), margin=float(margin),
                        relative_margin=float(margin / max(abs(lhs), abs(rhs), 1e-300)),
                        exploratory=exploratory, metadata=dict(metadata))


def _lam1(field, lam1):
    return lambda1(field.n) if lam1 is None else lam1


def check_weighted_gamma2(v, s, exploratory=False, lam1=None, **metadata):
    n, lam1 = v.n, _lam1(v, lam1)
    out_of_range = _gate(weighted_admissible(n, s), 'weighted', 's', s, exploratory)
    constant = constant_weighted(n, lam1, s, exploratory=True)
    return margin_report('weighted', s, weighted_gamma2(v, s), constant, weighted_dirichlet(v, s),
                         exploratory=out_of_range, order=v.grid.order, n=n, **metadata)


def check_modified_gamma2(v, s, exploratory=False, lam1=None, **metadata):
    n, lam1 = v.n, _lam1(v, lam1)
    out_of_range = _gate(modified_admissible(n, s), 'modified', 's', s, exploratory)
    constant = constant_modified(n, lam1, s, exploratory=True)
    return margin_report('modified', s, modified_weighted_gamma2(v, s), constant, weighted_dirichlet(v, s),
                         exploratory=out_of_range, order=v.grid.order, n=n, **metadata)


def check_ji(f, lam1=None, **metadata):
    n, lam1 = f.n, _lam1(f, lam1)
    return margin_report('ji', None, gamma2_log(f), constant_ji(n, lam1), fisher_log(f),
                         order=f.grid.order, n=n, **metadata)


def check_sobolev(v, q, exploratory=False, lam1=None, **metadata):
    n, lam1 = v.n, _lam1(v, lam1)
    out_of_range = _gate(sobolev_admissible(n, q), 'sobolev', 'q', q, exploratory)
    constant = constant_sobolev(n, lam1, q, exploratory=True)
    return margin_report('sobolev', q, dirichlet_mean(v), constant, sobolev_gap(v, q),
                         exploratory=out_of_range, order=v.grid.order, n=n, **metadata)


def check_poincare(v, lam1=None, **metadata):
    """mean |grad v|^2 >= lam1 Var(v)"""
    report = check_sobolev(v, 1.0, lam1=lam1, **metadata)
    return report._replace(theorem='poincare')


def check_logsobolev(f, constant=None, lam1=None, **metadata):
    """mean f |grad log f|^2 >= 2C (mean f log f - mean f log mean f), C defaulting to the Ji constant"""
    n, lam1 = f.n, _lam1(f, lam1)
    constant = constant_ji(n, lam1) if constant is None else constant
    return margin_report('logsob', None, fisher_log(f) / f.grid.volume, 2 * constant, entropy_gap(f),
                         order=f.grid.order, n=n, **metadata)


def check_rothaus_logsobolev(f, lam1=None, **metadata):
    n, lam1 = f.n, _lam1(f, lam1)
    report = check_logsobolev(f, constant=constant_rothaus(n, lam1), lam1=lam1, **metadata)
    return report._replace(theorem='rothaus')


def check_del14(v, q, exploratory=False, lam1=None, **metadata):
    """Comparison form with mean v^2 in the bracket (see DESIGN.md)."""
    n, lam1 = v.n, _lam1(v, lam1)
    if n < 3 and not exploratory:
        raise AdmissibilityError(f'The comparison theorem is stated for n >= 3, got n = {n}')
    out_of_range = _gate(del14_admissible(n, q), 'del14', 'q', q, exploratory)
    constant = constant_del14(n, lam1, q, exploratory=True)
    return margin_report('del14', q, dirichlet_mean(v), constant, sobolev_gap(v, q),
                         exploratory=out_of_range, order=v.grid.order, n=n, **metadata)


CHECKERS = {
    'ji': (check_ji, None),
    'weighted': (check_weighted_gamma2, 's'),
    'modified': (check_modified_gamma2, 's'),
    'sobolev': (check_sobolev, 'q'),
    'logsob': (check_logsobolev, None),
    'poincare': (check_poincare, None),
    'rothaus': (check_rothaus_logsobolev, None),
    'del14': (check_del14, 'q'),
}


def check_theorem(theorem, field, parameter=None, exploratory=False, **metadata):
    try:
        checker, parameter_name = CHECKERS[theorem]
    except KeyError:
        raise ParameterError(f'Unknown theorem {theorem!r}; choose from {list(THEOREMS)}')
    if parameter_name is None:
        return checker(field, **metadata)
    if parameter is None:
        raise ParameterError(f'{theorem} needs the parameter {parameter_name}')
    return checker(field, parameter, exploratory=exploratory, **metadata)


def corpus(grid, seed, count, basis_size=8, sigma=1.0):
    """Seeded random positive fields; case i depends only on (seed, i)."""
    seeds = spawn_seeds(seed, count)
    return [random_positive_field(grid, np.random.default_rng(case_seed), basis_size, sigma) for case_seed in seeds]


def _margin_change(previous, current):
    """Margin change between two orders, relative to the larger side; margins themselves may sit at zero."""
    return abs(current.margin - previous.margin) / max(abs(current.lhs), abs(current.rhs), 1e-300)


def refined_check(theorem, field, parameter=None, exploratory=False, rtol=DEFAULT_TOLERANCES['refine'],
                  max_order=512, **metadata):
    """
    check_theorem on the field rebuilt at doubling orders until the margin settles to rtol.
    The report metadata carries the order used, whether it settled and the last change.
    Fields built from node values cannot be rebuilt and are checked at their own order.
    """
    if not field.rebuildable:
        logger.debug('%s field at order %s has no builder; checked without refinement', theorem, field.grid.order)
        report = check_theorem(theorem, field, parameter, exploratory=exploratory, **metadata)
        return report._replace(metadata={**report.metadata, 'refined': False, 'refine_change': float('nan')})

    refined = refine_until(
        lambda grid: check_theorem(theorem, field.on_grid(grid), parameter, exploratory=exploratory, **metadata),
        field.n, field.grid.order, rtol, max(max_order, field.grid.order), change=_margin_change)
    report = refined.result
    return report._replace(metadata={**report.metadata, 'refined': refined.converged, 'refine_change': refined.change})


def check_corpus(theorem, fields, parameter=None, exploratory=False, workers=1, rtol=None, max_order=512):
    """Checks every field; with rtol set each case is refined to rtol (see refined_check)."""
    def run(indexed):
        index, field = indexed
        if rtol is None:
            return check_theorem(theorem, field, parameter, exploratory=exploratory, case=index)
        return refined_check(theorem, field, parameter, exploratory=exploratory, rtol=rtol, max_order=max_order,
                             case=index)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        return list(executor.map(run, enumerate(fields)))


def counterexample_window(n):
    return modified_range(n)[0], -2.0


def run_counterexample(n, s, order=64, shift=2.0, lam1=None, factor=DEFAULT_TOLERANCES['counterexample_factor'],
                       rtol=DEFAULT_TOLERANCES['refine'], max_order=512):
    """
    Modified inequality on v = u^(2/(s+2)), u = (shift + cos r)^(1-n), for s inside the window where it fails.
    The margin is recomputed at doubling orders from `order` until it settles to rtol; the last change is the
    quadrature error estimate and the report comes from the finest order.
    """
    low, high = counterexample_window(n)
    if not low < s < high:
        raise AdmissibilityError(f's = {s} is outside the counterexample window ({low:.6g}, {high:g}) for n = {n}')
    t = s + 2
    alpha = alpha_parameter(n, s, 'modified')
    if alpha <= n / (n - 1):
        logger.warning('alpha = %.6g does not exceed n/(n-1) = %.6g', alpha, n / (n - 1))

    reports = []

    def evaluate(grid):
        v = power(counterexample_profile(grid, shift), 2 / t)
        reports.append(check_modified_gamma2(v, s, exploratory=True, lam1=lam1, shift=shift))
        return reports[-1]

    refined = refine_until(evaluate, n, order, rtol, max(max_order, 2 * order), change=_margin_change)
    coarse, fine = reports[-2], reports[-1]
    error = abs(fine.margin - coarse.margin)

    grid = build_grid(n, refined.order)
    u = counterexample_profile(grid, shift)
    coefficient = 1 - (n - 1) * alpha / n
    lam1 = lambda1(n) if lam1 is None else lam1
    auxiliary_lhs = coefficient * quadrature(grid, laplacian(u).values ** 2)
    auxiliary_rhs = coefficient * lam1 * quadrature(grid, grad_norm_sq(u).values)
    # with the square term gone, the scaled margin reduces to the auxiliary difference
    closed_form = (2 / t) ** 2 * (auxiliary_lhs - auxiliary_rhs)

    report = fine._replace(metadata={**fine.metadata, 'closed_form_margin': closed_form, 'alpha': alpha,
                                     'refined': refined.converged})
    confirmed = coarse.margin < 0 and fine.margin < 0 and abs(fine.margin) > factor * error
    logger.info('Counterexample n=%s s=%s: margin %.6e (order %s), %.6e (order %s), confirmed=%s',
                n, s, coarse.margin, coarse.metadata['order'], fine.margin, refined.order, confirmed)
    return CounterexampleReport(report=report, refined_margin=fine.margin, error_estimate=error, alpha=alpha,
                                auxiliary_lhs=auxiliary_lhs, auxiliary_rhs=auxiliary_rhs,
                                auxiliary_holds=auxiliary_lhs < auxiliary_rhs, confirmed=bool(confirmed))


def _weighted_limit_terms(f, s):
    """
    s^2-scaled weighted functionals of w = 1 - v/s, v = -log f. Since grad w = -grad v / s the scaling
    cancels and only the weight w^s = exp(s log1p(-v/s)) depends on s.
    """
    v = -log(f)
    ratio = -v.values / s
    if np.any(ratio <= -1):
        raise DomainError(f'1 - v/s is not positive for s = {s}')
    weight = np.exp(s * np.log1p(ratio))
    lhs = quadrature(f.grid, weight * (hessian_norm_sq(v).values + ricci_term(v).values))
    rhs = quadrature(f.grid, weight * grad_norm_sq(v).values)
    return lhs, rhs


def _fit_rate(s_values, errors):
    s_values, errors = np.abs(np.asarray(s_values)), np.asarray(errors)
    usable = errors > 0
    if usable.sum() < 2:
        return float('nan')
    slope, _ = np.polyfit(np.log(s_values[usable]), np.log(errors[usable]), 1)
    return float(-slope)


def ji_limit_convergence(f, s_list=(-1e1, -1e2, -1e3, -1e4), lam1=None):
    """Weighted inequality applied to 1 - v/s, v = -log f, as s -> -infinity; converges to the Ji inequality."""
    f.require_positive()
    n, lam1 = f.n, _lam1(f, lam1)
    rows = []
    for s in sorted(s_list, reverse=True):
        if s >= 0:
            raise ParameterError(f'Ji limit needs negative s, got {s}')
        lhs, rhs = _weighted_limit_terms(f, s)
        factor = (n - 1) ** 2 * n * s / ((n + 2) * (n * s - 4))
        rows.append(ConvergenceRow(s=s, lhs=lhs, rhs_integral=rhs,
                                   constant=constant_weighted(n, lam1, s), factor=factor))

    lhs_limit, rhs_limit = gamma2_log(f), fisher_log(f)
    factor_limit = (n - 1) ** 2 / (n + 2)
    s_values = [row.s for row in rows]
    return ConvergenceTable(
        rows=tuple(rows), lhs_limit=lhs_limit, rhs_limit=rhs_limit, constant_limit=constant_ji(n, lam1),
        factor_limit=factor_limit,
        lhs_rate=_fit_rate(s_values, [abs(row.lhs - lhs_limit) for row in rows]),
        rhs_rate=_fit_rate(s_values, [abs(row.rhs_integral - rhs_limit) for row in rows]),
        factor_rate=_fit_rate(s_values, [abs(row.factor - factor_limit) for row in rows]))
