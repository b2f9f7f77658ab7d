"""
Gegenbauer eigenbasis transforms and the exact heat propagator e^(t Delta) for zonal fields.
"""
from logging import getLogger

import numpy as np

from gamma2lab.sphere_zonal_calculus import ZonalField, check_dimension, mean as field_mean
from gamma2lab.structures import SpectralCoeffs, EigenTable, ParameterError

logger = getLogger()

TAIL_WARNING = 1e-10


def lambda1(n):
    return float(check_dimension(n))


def eigen_table(n, degree):
    n = check_dimension(n)
    if degree < 0:
        raise ParameterError(f'Eigen table degree must be >= 0, got {degree}')
    k = np.arange(degree + 1, dtype=float)
    return EigenTable(n=n, eigenvalues=k * (k + n - 1))


def forward_transform(field, degree=None):
    """Quadrature projection onto the orthonormal basis p_0..p_degree."""
    grid = field.grid
    degree = grid.degree if degree is None else int(degree)
    if degree > grid.degree:
        raise ParameterError(f'Degree {degree} needs a grid of order >= {degree + 1}, got {grid.order}')

    weighted = grid.weights * field.values
    coeffs = grid.basis[:, :degree + 1].T @ weighted

    total = float(weighted @ field.values)
    if total > 0:
        # energy missed by the truncation plus energy in the top quarter of the band
        top = coeffs[3 * degree // 4 + 1:]
        tail = max(total - float(coeffs @ coeffs), 0.0) + float(top @ top)
        if tail > TAIL_WARNING * total:
            logger.warning('Field is under-resolved at order %s: tail energy %.3e of %.3e', grid.order, tail, total)
    return SpectralCoeffs(n=grid.n, coeffs=coeffs)


def inverse_transform(coefficients, grid):
    coeffs = np.asarray(coefficients.coeffs, dtype=float)
    if coefficients.n != grid.n:
        raise ParameterError(f'Coefficients for S^{coefficients.n} cannot be evaluated on S^{grid.n}')
    if coeffs.size > grid.order:
        raise ParameterError(f'{coeffs.size} coefficients exceed grid order {grid.order}')
    size = coeffs.size
    return ZonalField(grid, grid.basis[:, :size] @ coeffs, grid.basis_d1[:, :size] @ coeffs,
                      grid.basis_d2[:, :size] @ coeffs)


def heat_propagate(coefficients, t):
    if not np.isfinite(t) or t < 0:
        raise ParameterError(f'Flow time must be finite and >= 0, got {t}')
    coeffs = np.asarray(coefficients.coeffs, dtype=float)
    eigenvalues = eigen_table(coefficients.n, coeffs.size - 1).eigenvalues
    return SpectralCoeffs(n=coefficients.n, coeffs=coeffs * np.exp(-eigenvalues * t))


class HeatSemigroup(object):
    """The exact flow from one initial datum; coefficients are computed once."""

    def __init__(self, u0, degree=None):
        self.grid = u0.grid
        self.initial = forward_transform(u0, degree)
        self.eigenvalues = eigen_table(self.grid.n, self.initial.coeffs.size - 1).eigenvalues
        self.mean = float(self.initial.coeffs[0]) / np.sqrt(self.grid.volume)
        self.mass = self.mean * self.grid.volume

    def __repr__(self):
        return f"<HeatSemigroup n={self.grid.n} order={self.grid.order} mean={self.mean:.6g}>"

    def coefficients(self, t):
        return heat_propagate(self.initial, t)

    def field(self, t):
        return inverse_transform(self.coefficients(t), self.grid)

    def deviation(self, t):
        return float(np.abs(self.field(t).values - self.mean).max())


def propagate(field, t):
    return HeatSemigroup(field).field(t)


def flow_to_equilibrium(u0, tol=1e-8, max_iter=200):
    """
    Time T with max |u(T) - mean(u0)| < tol * mean(u0) over the nodes. The sup deviation is
    nonincreasing along the flow, so the crossing is bracketed from the single-mode guess and bisected.
    """
    u0.require_positive('initial data')
    flow = HeatSemigroup(u0)
    target = tol * flow.mean
    initial = flow.deviation(0.0)
    if initial < target:
        return 0.0

    rate = flow.eigenvalues[1]
    guess = max(np.log(initial / target) / rate, 1e-12)
    lo, hi = 0.0, guess
    while flow.deviation(hi) >= target:
        lo, hi = hi, 2 * hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if flow.deviation(mid) < target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * hi:
            break
    logger.debug('Equilibrium horizon %.6g (guess %.6g, tol %g)', hi, guess, tol)
    return hi


def time_grid(t_min=1e-3, ratio=1.25, horizon=1.0):
    """[0, t_min, t_min*ratio, ...] up to the first sample >= horizon."""
    if t_min <= 0 or ratio <= 1:
        raise ParameterError(f'time grid needs t_min > 0 and ratio > 1, got {t_min}, {ratio}')
    times = [0.0]
    if horizon <= 0:
        return np.array(times)
    t = t_min
    while True:
        times.append(t)
        if t >= horizon:
            break
        t *= ratio
    return np.array(times)


def mass(field):
    return field_mean(field) * field.grid.volume
