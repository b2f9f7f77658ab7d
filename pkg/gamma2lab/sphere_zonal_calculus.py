"""
Zonal calculus on the round sphere S^n.

Everything is expressed in the coordinate s = cos r, r being the geodesic distance
from the north pole. A zonal function is carried as its values at Gauss-Jacobi nodes
and, when known exactly, its first and second s-derivatives ("jets").
"""
from functools import lru_cache
from dataclasses import dataclass
from logging import getLogger
from numbers import Real

import numpy as np
from scipy.special import roots_jacobi, gammaln

from gamma2lab.helpers import relative_difference
from gamma2lab.structures import (DiffOperators, FunctionalValue, Refinement, ParameterError, DomainError,
                                  NumericError, POSITIVITY_EPS)

logger = getLogger()

MIN_ORDER = 8


def sphere_volume(n):
    """Vol(S^n) = 2 pi^((n+1)/2) / Gamma((n+1)/2)"""
    return float(np.exp(np.log(2.0) + 0.5 * (n + 1) * np.log(np.pi) - gammaln(0.5 * (n + 1))))


def equator_area(n):
    """Area of the unit S^(n-1), the factor turning (1-s^2)^((n-2)/2) ds into the measure of S^n"""
    return float(np.exp(np.log(2.0) + 0.5 * n * np.log(np.pi) - gammaln(0.5 * n)))


def check_dimension(n):
    if isinstance(n, bool) or not isinstance(n, Real) or not np.isfinite(n) or float(n) != int(n):
        raise ParameterError(f'Sphere dimension must be an integer, got {n!r}')
    if int(n) < 2:
        raise ParameterError(f'Sphere dimension must be at least 2, got {n}')
    return int(n)


def recurrence_coefficients(n, degree):
    """
    Off-diagonal Jacobi matrix entries a_0..a_(degree+1) of the orthonormal Gegenbauer family
    with index (n-1)/2, so that s p_k = a_(k+1) p_(k+1) + a_k p_(k-1). a_0 is 0.
    """
    lam = 0.5 * (n - 1)
    k = np.arange(1, degree + 2, dtype=float)
    coefficients = np.zeros(degree + 2)
    coefficients[1:] = np.sqrt(k * (k + 2 * lam - 1) / (4 * (k + lam) * (k + lam - 1)))
    return coefficients


def gegenbauer_basis(n, s, degree):
    """
    Orthonormal zonal eigenfunctions p_0..p_degree of the Laplacian on S^n, with their first and
    second s-derivatives, evaluated at the points s. Returns three arrays of shape (len(s), degree+1).
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    a = recurrence_coefficients(n, degree)
    values = np.zeros((s.size, degree + 1))
    first = np.zeros_like(values)
    second = np.zeros_like(values)

    values[:, 0] = 1.0 / np.sqrt(sphere_volume(n))
    if degree >= 1:
        values[:, 1] = s * values[:, 0] / a[1]
        first[:, 1] = values[:, 0] / a[1]
    for k in range(1, degree):
        values[:, k + 1] = (s * values[:, k] - a[k] * values[:, k - 1]) / a[k + 1]
        first[:, k + 1] = (values[:, k] + s * first[:, k] - a[k] * first[:, k - 1]) / a[k + 1]
        second[:, k + 1] = (2 * first[:, k] + s * second[:, k] - a[k] * second[:, k - 1]) / a[k + 1]
    return values, first, second


def _freeze(array):
    array = np.ascontiguousarray(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Gauss-Jacobi nodes and weights realizing the zonal measure of S^n. Immutable and shareable."""
    n: int
    order: int
    nodes: np.ndarray
    weights: np.ndarray
    volume: float
    basis: np.ndarray
    basis_d1: np.ndarray
    basis_d2: np.ndarray
    operators: DiffOperators

    def __repr__(self):
        return f"<QuadratureGrid n={self.n} order={self.order}>"

    @property
    def degree(self):
        return self.order - 1

    @property
    def eigenvalues(self):
        k = np.arange(self.order, dtype=float)
        return k * (k + self.n - 1)


def build_grid(n, order):
    n = check_dimension(n)
    if isinstance(order, bool) or not isinstance(order, Real) or int(order) != order or order < MIN_ORDER:
        raise ParameterError(f'Grid order must be an integer >= {MIN_ORDER}, got {order!r}')
    return _build_grid(n, int(order))


@lru_cache(maxsize=64)
def _build_grid(n, order):
    alpha = 0.5 * (n - 2)
    nodes, weights = roots_jacobi(order, alpha, alpha)
    volume = sphere_volume(n)
    weights = weights * equator_area(n)
    # Pin the total to the closed form; the raw weights agree to rounding
    weights *= volume / weights.sum()

    values, first, second = gegenbauer_basis(n, nodes, order - 1)
    projector = values.T * weights
    d1 = first @ projector
    d2 = second @ projector
    # Negative-sum diagonal: constants are annihilated exactly
    for matrix in (d1, d2):
        np.fill_diagonal(matrix, 0.0)
        np.fill_diagonal(matrix, -matrix.sum(axis=1))

    logger.debug('Built Gauss-Jacobi grid n=%s order=%s (volume %.15g)', n, order, volume)
    return QuadratureGrid(n=n, order=order, nodes=_freeze(nodes), weights=_freeze(weights), volume=volume,
                          basis=_freeze(values), basis_d1=_freeze(first), basis_d2=_freeze(second),
                          operators=DiffOperators(d1=_freeze(d1), d2=_freeze(d2)))


class ZonalField(object):
    """
    Node values of a zonal function. d1/d2 are exact s-derivatives when the field was built
    from coefficients or closed forms; otherwise they come from the grid's spectral matrices.
    builder(grid) rebuilds the same function on another grid; fields built from node data have none.
    """

    def __init__(self, grid, values, d1=None, d2=None, builder=None):
        values = np.asarray(values, dtype=float)
        if np.ndim(values) == 0:
            values = np.full(grid.order, float(values))
        if values.shape != (grid.order,):
            raise ParameterError(f'Field has {values.shape} values for a grid of order {grid.order}')
        if not np.all(np.isfinite(values)):
            raise NumericError('Field has non-finite node values')
        self.grid = grid
        self.values = values
        self._d1 = None if d1 is None else np.asarray(d1, dtype=float)
        self._d2 = None if d2 is None else np.asarray(d2, dtype=float)
        self.builder = builder

    def __repr__(self):
        return f"<ZonalField n={self.grid.n} order={self.grid.order} min={self.positivity_floor:.6g}>"

    @property
    def n(self):
        return self.grid.n

    @property
    def nodes(self):
        return self.grid.nodes

    @property
    def positivity_floor(self):
        return float(self.values.min())

    @property
    def has_jets(self):
        return self._d1 is not None and self._d2 is not None

    def derivatives(self):
        if not self.has_jets:
            centred = self.values - self.values.mean()
            self._d1 = self.grid.operators.d1 @ centred
            self._d2 = self.grid.operators.d2 @ centred
        return self._d1, self._d2

    def is_positive(self, eps=POSITIVITY_EPS):
        scale = np.abs(self.values).max()
        return bool(scale > 0 and self.values.min() > eps * scale)

    def require_positive(self, what='field'):
        if not self.is_positive():
            raise DomainError(f'{what} must be positive: minimum {self.positivity_floor:.3e} is below '
                              f'{POSITIVITY_EPS:g} x max |value|')
        return self

    def drop_jets(self):
        return ZonalField(self.grid, self.values)

    @property
    def rebuildable(self):
        return self.builder is not None

    def on_grid(self, grid):
        if grid is self.grid:
            return self
        if self.builder is None:
            raise ParameterError('Field was built from node values and cannot be moved to another grid')
        if grid.n != self.n:
            raise ParameterError(f'Cannot move a field on S^{self.n} to S^{grid.n}')
        return self.builder(grid)

    def _same_grid(self, other):
        if other.grid is not self.grid:
            raise ParameterError('Fields live on different grids')

    def __add__(self, other):
        if isinstance(other, ZonalField):
            self._same_grid(other)
            f1, f2 = self.derivatives()
            g1, g2 = other.derivatives()
            return ZonalField(self.grid, self.values + other.values, f1 + g1, f2 + g2,
                              _lift(lambda a, b: a + b, self, other))
        f1, f2 = self.derivatives()
        return ZonalField(self.grid, self.values + other, f1, f2, _lift(lambda a: a + other, self, scalar=other))

    __radd__ = __add__

    def __neg__(self):
        f1, f2 = self.derivatives()
        return ZonalField(self.grid, -self.values, -f1, -f2, _lift(lambda a: -a, self))

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, ZonalField):
            return product(self, other)
        f1, f2 = self.derivatives()
        return ZonalField(self.grid, self.values * other, f1 * other, f2 * other,
                          _lift(lambda a: a * other, self, scalar=other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ZonalField):
            return quotient(self, other)
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return quotient(constant_field(self.grid, other), self)

    def __pow__(self, exponent):
        return power(self, exponent)


def _lift(operation, *fields, scalar=None):
    """
    Builder applying operation to the fields rebuilt on another grid. None if one of them has none,
    or if scalar is an array of node values, which does not carry over to another grid.
    """
    if np.ndim(scalar) != 0 or any(field.builder is None for field in fields):
        return None
    return lambda grid: operation(*(field.on_grid(grid) for field in fields))


# Constructors
def coordinate(grid):
    """s = cos r"""
    return ZonalField(grid, grid.nodes.copy(), np.ones(grid.order), np.zeros(grid.order), builder=coordinate)


def constant_field(grid, c):
    return ZonalField(grid, np.full(grid.order, float(c)), np.zeros(grid.order), np.zeros(grid.order),
                      builder=lambda other: constant_field(other, c))


def eigenmode_field(grid, a, b):
    """a + b cos r"""
    return a + b * coordinate(grid)


def polynomial_field(grid, coefficients):
    """Polynomial in s, coefficients in increasing degree."""
    poly = np.polynomial.Polynomial(coefficients)
    s = grid.nodes
    return ZonalField(grid, poly(s), poly.deriv(1)(s), poly.deriv(2)(s),
                      builder=lambda other: polynomial_field(other, coefficients))


def counterexample_profile(grid, shift=2.0):
    """(shift + cos r)^(1-n)"""
    if shift <= 1:
        raise ParameterError(f'Counterexample shift must exceed 1, got {shift}')
    return power(eigenmode_field(grid, shift, 1.0), 1 - grid.n)


def unit_modes(grid, count):
    """phi_k = p_k / p_k(1), k = 0..count-1, normalized to 1 at the pole."""
    if count > grid.order:
        raise ParameterError(f'{count} modes requested on a grid of order {grid.order}')
    at_pole, _, _ = gegenbauer_basis(grid.n, [1.0], count - 1)
    scale = 1.0 / at_pole[0]
    return grid.basis[:, :count] * scale, grid.basis_d1[:, :count] * scale, grid.basis_d2[:, :count] * scale


def mode_sum(grid, weights):
    """sum_k w_k phi_k as a field with exact jets"""
    weights = np.asarray(weights, dtype=float)
    values, first, second = unit_modes(grid, weights.size)
    return ZonalField(grid, values @ weights, first @ weights, second @ weights,
                      builder=lambda other: mode_sum(other, weights))


def exp_mode_field(grid, weights):
    """exp(sum_k w_k phi_k): positive by construction"""
    return exp(mode_sum(grid, weights))


def random_positive_field(grid, rng, basis_size=8, sigma=1.0):
    """exp(sum_{k=1..K} a_k phi_k) with a_k ~ U(-sigma/k^2, sigma/k^2)"""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    k = np.arange(1, basis_size + 1, dtype=float)
    amplitudes = sigma / k ** 2
    weights = np.concatenate([[0.0], rng.uniform(-amplitudes, amplitudes)])
    return exp_mode_field(grid, weights)


# Pointwise operations with chain-rule jets
def power(field, exponent):
    field.require_positive('base of a power')
    log_values = np.log(field.values)
    values = np.exp(exponent * log_values)
    f1, f2 = field.derivatives()
    ratio = f1 / field.values
    d1 = exponent * values * ratio
    d2 = exponent * values * (f2 / field.values + (exponent - 1) * ratio ** 2)
    return ZonalField(field.grid, values, d1, d2, _lift(lambda f: power(f, exponent), field))


def log(field):
    field.require_positive('argument of log')
    f1, f2 = field.derivatives()
    ratio = f1 / field.values
    return ZonalField(field.grid, np.log(field.values), ratio, f2 / field.values - ratio ** 2, _lift(log, field))


def exp(field):
    values = np.exp(field.values)
    if not np.all(np.isfinite(values)):
        raise NumericError('exp overflow')
    f1, f2 = field.derivatives()
    return ZonalField(field.grid, values, values * f1, values * (f2 + f1 ** 2), _lift(exp, field))


def product(field, other):
    field._same_grid(other)
    f1, f2 = field.derivatives()
    g1, g2 = other.derivatives()
    f, g = field.values, other.values
    return ZonalField(field.grid, f * g, f1 * g + f * g1, f2 * g + 2 * f1 * g1 + f * g2,
                      _lift(product, field, other))


def quotient(field, other):
    field._same_grid(other)
    if np.any(other.values == 0):
        raise DomainError('Division by a field with zeros')
    f1, f2 = field.derivatives()
    g1, g2 = other.derivatives()
    f, g = field.values, other.values
    d1 = (f1 * g - f * g1) / g ** 2
    d2 = f2 / g - 2 * f1 * g1 / g ** 2 - f * g2 / g ** 2 + 2 * f * g1 ** 2 / g ** 3
    return ZonalField(field.grid, f / g, d1, d2, _lift(quotient, field, other))


POINTWISE_OPS = {
    'power': power,
    'log': log,
    'exp': exp,
    'product': product,
    'quotient': quotient,
}


def pointwise(field, op, exponent=None, other=None):
    try:
        function = POINTWISE_OPS[op]
    except KeyError:
        raise ParameterError(f'Unknown pointwise operation {op!r}; choose from {sorted(POINTWISE_OPS)}')
    if op == 'power':
        if exponent is None:
            raise ParameterError('power needs an exponent')
        return function(field, exponent)
    if op in ('product', 'quotient'):
        if other is None:
            raise ParameterError(f'{op} needs a second field')
        return function(field, other)
    return function(field)


# Integration
def quadrature(grid, values):
    total = float(grid.weights @ values)
    if not np.isfinite(total):
        raise NumericError('Non-finite integral')
    return total


def integrate(field):
    return quadrature(field.grid, field.values)


def mean(field):
    return integrate(field) / field.grid.volume


# Pointwise integrands
def _hessian_frame(field):
    """
    Radial and tangential Hessian eigenvalues and |grad F|^2 at the nodes.
    The Hessian of a zonal function is diagonal in the (radial, tangential) frame.
    """
    s = field.grid.nodes
    f1, f2 = field.derivatives()
    sin_sq = 1.0 - s * s
    radial = sin_sq * f2 - s * f1
    tangential = -s * f1
    return radial, tangential, sin_sq * f1 * f1


def _integrand(field, values):
    return ZonalField(field.grid, values)


def laplacian(field):
    s = field.grid.nodes
    f1, f2 = field.derivatives()
    return _integrand(field, (1.0 - s * s) * f2 - field.n * s * f1)


def grad_norm_sq(field):
    _, _, grad_sq = _hessian_frame(field)
    return _integrand(field, grad_sq)


def hessian_norm_sq(field):
    radial, tangential, _ = _hessian_frame(field)
    return _integrand(field, radial ** 2 + (field.n - 1) * tangential ** 2)


def ricci_term(field):
    """Ric(grad F, grad F) with Ric = (n-1) g"""
    return _integrand(field, (field.n - 1) * grad_norm_sq(field).values)


def hessian_grad_pairing(field):
    """<Hess F, dF x dF / F>"""
    field.require_positive()
    radial, _, grad_sq = _hessian_frame(field)
    return _integrand(field, radial * grad_sq / field.values)


def traceless_pairing(field):
    """<Hess F - (Delta F / n) g, dF x dF / F - (|grad F|^2 / (n F)) g>, summed over the eigenframe"""
    field.require_positive()
    n = field.n
    radial, tangential, grad_sq = _hessian_frame(field)
    trace_part = (radial + (n - 1) * tangential) / n
    tensor = grad_sq / field.values
    values = (radial - trace_part) * tensor * (1 - 1.0 / n) + (n - 1) * (tangential - trace_part) * (-tensor / n)
    return _integrand(field, values)


def traceless_tensor_norm_sq(field):
    """|dF x dF / F - (|grad F|^2 / (n F)) g|^2"""
    field.require_positive()
    n = field.n
    _, _, grad_sq = _hessian_frame(field)
    tensor = grad_sq / field.values
    return _integrand(field, (tensor * (1 - 1.0 / n)) ** 2 + (n - 1) * (tensor / n) ** 2)


def fourth_order_term(field):
    """F^-2 |grad F|^4"""
    field.require_positive()
    _, _, grad_sq = _hessian_frame(field)
    return _integrand(field, (grad_sq / field.values) ** 2)


def _deviation(lhs, rhs, *terms):
    scale = max([abs(lhs), abs(rhs)] + [abs(term) for term in terms] + [1e-300])
    return abs(lhs - rhs) / scale


def lemma_identities(field):
    """
    Deviations of the integral identities every zonal field must satisfy. Keys:
    divergence, integration_by_parts, bochner and, for positive fields, pairing_first,
    pairing_second, traceless_pointwise, tensor_norm_pointwise.
    """
    n = field.n
    grid = field.grid
    lap = laplacian(field)
    grad_sq = grad_norm_sq(field)
    lap_scale = np.abs(lap.values).max() * grid.volume

    deviations = {
        'divergence': abs(integrate(lap)) / lap_scale if lap_scale > 0 else 0.0,
        'integration_by_parts': _deviation(quadrature(grid, field.values * lap.values), -integrate(grad_sq)),
        'bochner': _deviation(quadrature(grid, lap.values ** 2),
                              integrate(hessian_norm_sq(field)) + integrate(ricci_term(field))),
    }
    if field.is_positive():
        fourth = integrate(fourth_order_term(field))
        traceless = traceless_pairing(field)
        traceless_integral = integrate(traceless)
        pairing = hessian_grad_pairing(field)
        weighted_laplacian = quadrature(grid, grad_sq.values * lap.values / field.values)

        deviations['pairing_first'] = _deviation(
            weighted_laplacian, n / (n + 2) * fourth - 2 * n / (n + 2) * traceless_integral,
            fourth, traceless_integral)
        deviations['pairing_second'] = _deviation(
            integrate(pairing), fourth / (n + 2) + n / (n + 2) * traceless_integral, fourth, traceless_integral)

        split = traceless.values + lap.values * grad_sq.values / (n * field.values)
        pointwise_scale = max(np.abs(pairing.values).max(), np.abs(split).max(), 1e-300)
        deviations['traceless_pointwise'] = float(np.abs(pairing.values - split).max() / pointwise_scale)

        tensor_norm = traceless_tensor_norm_sq(field).values
        expected = (n - 1) / n * fourth_order_term(field).values
        tensor_scale = max(np.abs(expected).max(), 1e-300)
        deviations['tensor_norm_pointwise'] = float(np.abs(tensor_norm - expected).max() / tensor_scale)
    return deviations


def refine_until(evaluate, n, order=64, rtol=1e-9, max_order=512, change=None):
    """
    Evaluate at doubling grid orders until change(previous, current) <= rtol or max_order is reached.
    change defaults to the relative difference of two floats. Returns the last result as a Refinement.
    """
    change = change or (lambda previous, current: relative_difference(current, previous))
    grid = build_grid(n, order)
    previous = evaluate(grid)
    last_change = float('nan')
    while grid.order < max_order:
        grid = build_grid(n, min(2 * grid.order, max_order))
        current = evaluate(grid)
        last_change = float(change(previous, current))
        logger.debug('Refine n=%s: order %s change %.3e', n, grid.order, last_change)
        previous = current
        if last_change <= rtol:
            return Refinement(result=current, order=grid.order, converged=True, change=last_change)
    logger.warning('Refinement did not reach rtol %g by order %s (last change %.3e)', rtol, grid.order, last_change)
    return Refinement(result=previous, order=grid.order, converged=False, change=last_change)


def refine(evaluate, n, order=64, rtol=1e-9, max_order=512):
    """
    Evaluate a grid functional at doubling orders until two successive values agree to rtol.
    evaluate(grid) -> float. The returned params carry the last change as error estimate.
    """
    name = getattr(evaluate, '__name__', 'functional')
    values = []

    def tracked(grid):
        values.append(float(evaluate(grid)))
        return values[-1]

    refined = refine_until(tracked, n, order, rtol, max_order)
    error = abs(values[-1] - values[-2]) if len(values) > 1 else float('nan')
    return FunctionalValue(value=refined.result, functional=name,
                           params={'converged': refined.converged, 'error_estimate': error}, order=refined.order)
