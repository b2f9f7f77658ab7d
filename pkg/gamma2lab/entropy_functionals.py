"""
Scalar functionals of positive zonal fields: Shannon and Tsallis entropies, Fisher-type
energies, plain/weighted/modified Gamma-2 integrals and the Tsallis time derivatives
along the heat flow.
"""
from logging import getLogger

import numpy as np

from gamma2lab.helpers import relative_difference
from gamma2lab.structures import FunctionalValue, DerivativeForms, ParameterError, DEFAULT_TOLERANCES
from gamma2lab.sphere_zonal_calculus import (ZonalField, power, log, integrate, quadrature, mean, laplacian,
                                             grad_norm_sq, hessian_norm_sq, ricci_term, refine_until)

logger = getLogger()


def _check_tsallis_exponent(p):
    if not np.isfinite(p):
        raise ParameterError(f'Tsallis exponent must be finite, got {p}')
    if p <= 0:
        raise ParameterError(f'Tsallis exponent must be positive, got {p}')
    if p == 1:
        raise ParameterError('Tsallis exponent p = 1 is the Shannon entropy; use shannon_entropy')


def _gamma2_density(field):
    return hessian_norm_sq(field).values + ricci_term(field).values


def shannon_entropy(f):
    f.require_positive()
    return -quadrature(f.grid, f.values * np.log(f.values))


def tsallis_entropy(u, p):
    _check_tsallis_exponent(p)
    u.require_positive()
    return (integrate(power(u, p)) - integrate(u)) / (1 - p)


def fisher_log(f):
    """int f |grad log f|^2 = int |grad f|^2 / f"""
    f.require_positive()
    return quadrature(f.grid, grad_norm_sq(f).values / f.values)


def gamma2_log(f, log_f=None):
    """int f (|Hess log f|^2 + Ric(grad log f, grad log f))"""
    f.require_positive()
    g = log(f) if log_f is None else log_f
    return quadrature(f.grid, f.values * _gamma2_density(g))


def weighted_gamma2(v, s):
    """int v^s (|Hess v|^2 + Ric(grad v, grad v))"""
    weight = power(v, s).values
    return quadrature(v.grid, weight * _gamma2_density(v))


def weighted_dirichlet(v, s):
    """int v^s |grad v|^2"""
    weight = power(v, s).values
    return quadrature(v.grid, weight * grad_norm_sq(v).values)


def modified_correction(v, s):
    """int v^(s-1) |grad v|^2 Delta v, the term the modified functional subtracts"""
    weight = power(v, s).values
    return quadrature(v.grid, weight * grad_norm_sq(v).values * laplacian(v).values / v.values)


def modified_weighted_gamma2(v, s):
    """int v^s (|Hess v|^2 + Ric(grad v, grad v) - v^-1 |grad v|^2 Delta v)"""
    return weighted_gamma2(v, s) - modified_correction(v, s)


def tsallis_first_derivative(u, p):
    """
    dT_p/dt along the heat flow in both printed forms:
    p int u^(p-2) |grad u|^2 and p (2/(p-1))^2 int u |grad U|^2 with U = u^((p-1)/2).
    """
    _check_tsallis_exponent(p)
    u.require_positive()
    direct = p * quadrature(u.grid, power(u, p - 2).values * grad_norm_sq(u).values)
    alternate = p * (2 / (p - 1)) ** 2 * weighted_dirichlet_energy(u, p)
    return DerivativeForms(value=direct, alternate=alternate,
                           discrepancy=relative_difference(direct, alternate) if direct or alternate else 0.0)


def tsallis_second_derivative(u, p):
    """-2p (2/(p-1))^2 int u (|Hess U|^2 + Ric(grad U, grad U) - U^-1 |grad U|^2 Delta U)"""
    _check_tsallis_exponent(p)
    u.require_positive()
    big_u = power(u, 0.5 * (p - 1))
    density = _gamma2_density(big_u) - grad_norm_sq(big_u).values * laplacian(big_u).values / big_u.values
    return -2 * p * (2 / (p - 1)) ** 2 * quadrature(u.grid, u.values * density)


def weighted_dirichlet_energy(u, p):
    """E = int u |grad U|^2 with U = u^((p-1)/2)"""
    u.require_positive()
    big_u = power(u, 0.5 * (p - 1))
    return quadrature(u.grid, u.values * grad_norm_sq(big_u).values)


def power_evolution_rhs(u, p):
    """Delta U + (2/(p-1) - 1) U^-1 |grad U|^2: the time derivative of U = u^((p-1)/2) under the heat flow."""
    _check_tsallis_exponent(p)
    big_u = power(u, 0.5 * (p - 1))
    values = laplacian(big_u).values + (2 / (p - 1) - 1) * grad_norm_sq(big_u).values / big_u.values
    return ZonalField(u.grid, values)


def entropy_gap(f):
    """mean(f log f) - mean(f) log mean(f)"""
    f.require_positive()
    average = mean(f)
    return quadrature(f.grid, f.values * np.log(f.values)) / f.grid.volume - average * np.log(average)


def sobolev_gap(v, q):
    """((mean v^q)^(2/q) - mean v^2) / (q - 2)"""
    if q == 2:
        raise ParameterError('q = 2 is the logarithmic Sobolev case; use entropy_gap')
    if q <= 0:
        raise ParameterError(f'Sobolev exponent must be positive, got {q}')
    v.require_positive()
    return (mean(power(v, q)) ** (2 / q) - quadrature(v.grid, v.values ** 2) / v.grid.volume) / (q - 2)


def dirichlet_mean(v):
    """mean |grad v|^2"""
    return integrate(grad_norm_sq(v)) / v.grid.volume


FUNCTIONALS = {
    'shannon': (shannon_entropy, ()),
    'tsallis': (tsallis_entropy, ('p',)),
    'fisher_log': (fisher_log, ()),
    'gamma2_log': (gamma2_log, ()),
    'weighted_gamma2': (weighted_gamma2, ('s',)),
    'weighted_dirichlet': (weighted_dirichlet, ('s',)),
    'modified_weighted_gamma2': (modified_weighted_gamma2, ('s',)),
    'modified_correction': (modified_correction, ('s',)),
    'tsallis_first_derivative': (lambda u, p: tsallis_first_derivative(u, p).value, ('p',)),
    'tsallis_second_derivative': (tsallis_second_derivative, ('p',)),
    'weighted_dirichlet_energy': (weighted_dirichlet_energy, ('p',)),
    'entropy_gap': (entropy_gap, ()),
    'sobolev_gap': (sobolev_gap, ('q',)),
}


def evaluate(functional_id, field, **params):
    try:
        function, names = FUNCTIONALS[functional_id]
    except KeyError:
        raise ParameterError(f'Unknown functional {functional_id!r}; choose from {sorted(FUNCTIONALS)}')
    missing = [name for name in names if name not in params]
    if missing:
        raise ParameterError(f'{functional_id} needs parameters {missing}')
    value = function(field, *(params[name] for name in names))
    return FunctionalValue(value=float(value), functional=functional_id,
                           params={name: params[name] for name in names}, order=field.grid.order)


def refine_functional(functional_id, field, rtol=DEFAULT_TOLERANCES['refine'], max_order=512, **params):
    """evaluate() on the field rebuilt at doubling orders until the value settles; order is the one used."""
    refined = refine_until(lambda grid: evaluate(functional_id, field.on_grid(grid), **params),
                           field.n, field.grid.order, rtol, max(max_order, field.grid.order),
                           change=lambda previous, current: relative_difference(current.value, previous.value))
    value = refined.result
    return value._replace(params={**value.params, 'converged': refined.converged, 'relative_change': refined.change})
