"""
Rayleigh-type ratios of the Gamma-2 functionals over log-parameterized positive fields
v = exp(sum_k w_k phi_k), minimized by multistart BFGS to probe how sharp the bounds are.
"""
from logging import getLogger
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.optimize import minimize

from gamma2lab.spectral_heat import lambda1, forward_transform
from gamma2lab.structures import (RatioProblem, ProbeResult, SharpnessRow, ParameterError, ConvergenceError,
                                  DomainError, NumericError)
from gamma2lab.sphere_zonal_calculus import build_grid, exp_mode_field, gegenbauer_basis, log
from gamma2lab.entropy_functionals import evaluate
from gamma2lab.inequality_suite import (constant_ji, constant_weighted, constant_modified, weighted_admissible,
                                        modified_admissible, _gate)

logger = getLogger()

PROBE_FUNCTIONALS = ('ji', 'weighted', 'modified')
GRADIENT_STEP = 1e-5
PENALTY = 1e12
DEGENERATE = 1e-14
AMPLITUDE_FLOOR = 0.05
SMALL_AMPLITUDE = 1e-3


def make_problem(functional, n, order=64, basis_size=8, s=None, exploratory=False):
    if functional not in PROBE_FUNCTIONALS:
        raise ParameterError(f'Unknown probe functional {functional!r}; choose from {PROBE_FUNCTIONALS}')
    if basis_size < 1 or basis_size > order // 4:
        raise ParameterError(f'Basis size must be between 1 and order/4 = {order // 4}, got {basis_size}')
    build_grid(n, order)
    if functional == 'ji':
        s = None
    elif s is None:
        raise ParameterError(f'{functional} probe needs s')
    elif functional == 'weighted':
        _gate(weighted_admissible(n, s), 'weighted', 's', s, exploratory)
    else:
        _gate(modified_admissible(n, s), 'modified', 's', s, exploratory)
    return RatioProblem(functional=functional, n=n, order=order, basis_size=basis_size, s=s, exploratory=exploratory)


def problem_constant(problem):
    lam1 = lambda1(problem.n)
    if problem.functional == 'ji':
        return constant_ji(problem.n, lam1)
    if problem.functional == 'weighted':
        return constant_weighted(problem.n, lam1, problem.s, exploratory=True)
    return constant_modified(problem.n, lam1, problem.s, exploratory=True)


RATIO_TERMS = {
    'ji': ('gamma2_log', 'fisher_log'),
    'weighted': ('weighted_gamma2', 'weighted_dirichlet'),
    'modified': ('modified_weighted_gamma2', 'weighted_dirichlet'),
}


def _ratio_terms(problem, v):
    params = {} if problem.s is None else {'s': problem.s}
    return tuple(evaluate(functional_id, v, **params).value for functional_id in RATIO_TERMS[problem.functional])


def rayleigh_ratio(problem, w):
    """
    LHS / RHS functional at v = exp(sum_k w_k phi_k), w indexed from k = 0. A degenerate denominator
    or a non-finite evaluation returns the penalty 1e12 (1 + |w|).
    """
    w = np.asarray(w, dtype=float)
    penalty = PENALTY * (1 + np.linalg.norm(w))
    if w.size != problem.basis_size + 1 or not np.all(np.isfinite(w)):
        return penalty
    grid = build_grid(problem.n, problem.order)
    try:
        with np.errstate(over='raise', invalid='raise', divide='raise'):
            numerator, denominator = _ratio_terms(problem, exp_mode_field(grid, w))
    except (DomainError, NumericError, FloatingPointError):
        return penalty
    if not (np.isfinite(numerator) and np.isfinite(denominator)):
        return penalty
    if denominator <= DEGENERATE * max(abs(numerator), abs(denominator)) or denominator <= 0:
        return penalty
    return numerator / denominator


def log_coefficients(field, basis_size):
    """w_0..w_K with log field ~ sum_k w_k phi_k (orthogonal projection)."""
    coefficients = forward_transform(log(field), basis_size).coeffs
    at_pole, _, _ = gegenbauer_basis(field.n, [1.0], basis_size)
    return coefficients * at_pole[0]


def _free_start(rng, basis_size, small):
    k = np.arange(1, basis_size + 1, dtype=float)
    direction = rng.standard_normal(basis_size) / k
    norm = np.linalg.norm(direction)
    if small:
        return SMALL_AMPLITUDE * direction / norm
    direction = 0.5 * direction
    if norm * 0.5 < AMPLITUDE_FLOOR:
        direction *= AMPLITUDE_FLOOR / (0.5 * norm)
    return direction


def _central_gradient(function, x, step=GRADIENT_STEP):
    gradient = np.empty_like(x)
    for i in range(x.size):
        forward, backward = x.copy(), x.copy()
        forward[i] += step
        backward[i] -= step
        gradient[i] = (function(forward) - function(backward)) / (2 * step)
    return gradient


def _descend(problem, start, index, max_iter):
    def objective(free):
        return rayleigh_ratio(problem, np.concatenate([[0.0], free]))

    outcome = minimize(objective, start, method='BFGS', jac=lambda x: _central_gradient(objective, x),
                       options={'maxiter': max_iter, 'gtol': 1e-7})
    converged = outcome.status in (0, 2)
    if not converged:
        logger.warning('Multistart %s of %s did not converge: %s', index, problem.functional, outcome.message)
    return ProbeResult(min_ratio=float(outcome.fun), argmin=tuple(float(x) for x in np.concatenate([[0.0], outcome.x])),
                       iterations=int(outcome.nit), start_index=index, converged=bool(converged))


def minimize_ratio(problem, multistarts=20, max_iter=200, seed=42, warm_starts=(), workers=1):
    """
    Multistart BFGS over w_1..w_K with w_0 = 0: every ratio is invariant under v -> c v, so w_0 carries
    no information and warm starts are projected onto w_0 = 0. Start 0 has small amplitude, the other
    random starts have |w| >= 0.05; warm starts follow with consecutive indices.
    """
    if multistarts < 1 and not warm_starts:
        raise ParameterError('minimize_ratio needs at least one start')
    children = np.random.SeedSequence(seed).spawn(multistarts)
    starts = [_free_start(np.random.default_rng(child), problem.basis_size, small=(i == 0))
              for i, child in enumerate(children)]
    for warm in warm_starts:
        warm = np.asarray(warm, dtype=float)
        if warm.size != problem.basis_size + 1:
            raise ParameterError(f'Warm start needs {problem.basis_size + 1} coefficients, got {warm.size}')
        starts.append(warm[1:].copy())

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        results = list(executor.map(lambda item: _descend(problem, item[1], item[0], max_iter), enumerate(starts)))

    best = min(results, key=lambda result: (result.min_ratio, result.start_index))
    converged = [result for result in results if result.converged]
    if not converged:
        raise ConvergenceError(f'No multistart of {problem.functional} converged in {max_iter} iterations',
                               partial=best)
    best = min(converged, key=lambda result: (result.min_ratio, result.start_index))
    logger.info('Probe %s s=%s n=%s: min ratio %.10g (start %s, %s iterations)', problem.functional, problem.s,
                problem.n, best.min_ratio, best.start_index, best.iterations)
    return best


def sharpness_report(n, functional='weighted', sweep=(), order=64, basis_size=8, multistarts=20, max_iter=200,
                     seed=42, exploratory=False, warm_starts=None, workers=1):
    """
    min_ratio against the theorem constant for each parameter, sorted by parameter. gap is
    (min_ratio - constant) / constant. warm_starts maps a parameter to extra starting coefficients.
    """
    parameters = [None] if functional == 'ji' else sorted(sweep)
    warm_starts = warm_starts or {}
    rows = []
    for parameter in parameters:
        problem = make_problem(functional, n, order, basis_size, parameter, exploratory)
        constant = problem_constant(problem)
        try:
            result = minimize_ratio(problem, multistarts, max_iter, seed, warm_starts.get(parameter, ()), workers)
        except ConvergenceError as e:
            logger.warning('%s; reporting the best unconverged start', e)
            result = e.partial
        rows.append(SharpnessRow(parameter=parameter, min_ratio=result.min_ratio, constant=constant,
                                 gap=(result.min_ratio - constant) / abs(constant), converged=result.converged))
    return rows
