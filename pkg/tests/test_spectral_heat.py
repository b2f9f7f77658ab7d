import numpy as np
import pytest

from gamma2lab.structures import ParameterError, SpectralCoeffs
from gamma2lab.sphere_zonal_calculus import build_grid, constant_field, eigenmode_field, polynomial_field, quadrature
from gamma2lab.spectral_heat import (
    HeatSemigroup,
    eigen_table,
    flow_to_equilibrium,
    forward_transform,
    heat_propagate,
    inverse_transform,
    lambda1,
    mass,
    propagate,
    time_grid,
)


def test_eigen_table():
    np.testing.assert_array_equal(eigen_table(2, 3).eigenvalues, [0.0, 2.0, 6.0, 12.0])
    np.testing.assert_array_equal(eigen_table(3, 2).eigenvalues, [0.0, 3.0, 8.0])
    assert lambda1(4) == 4.0
    with pytest.raises(ParameterError):
        eigen_table(2, -1)


@pytest.mark.parametrize('n', [2, 3, 5])
def test_transforms_reproduce_polynomials(n):
    grid = build_grid(n, 32)
    field = polynomial_field(grid, [1.0, -0.5, 0.25, 0.3, -0.1])
    back = inverse_transform(forward_transform(field), grid)
    np.testing.assert_allclose(back.values, field.values, atol=1e-12)
    np.testing.assert_allclose(back.derivatives()[0], field.derivatives()[0], atol=1e-10)


def test_transform_validation(grid2):
    with pytest.raises(ParameterError):
        forward_transform(constant_field(grid2, 1.0), grid2.order)
    with pytest.raises(ParameterError):
        inverse_transform(SpectralCoeffs(n=3, coeffs=np.ones(4)), grid2)


def test_heat_propagate_rejects_negative_time(grid2):
    coefficients = forward_transform(eigenmode_field(grid2, 1.0, 0.4))
    with pytest.raises(ParameterError):
        heat_propagate(coefficients, -0.1)


@pytest.mark.parametrize('n', [2, 3])
def test_first_mode_decays_at_lambda1(n):
    grid = build_grid(n, 32)
    t = 0.37
    u = propagate(eigenmode_field(grid, 1.0, 0.4), t)
    np.testing.assert_allclose(u.values, 1.0 + 0.4 * np.exp(-n * t) * grid.nodes, atol=1e-13)


def test_flow_conserves_mass(field2):
    flow = HeatSemigroup(field2)
    assert flow.mass == pytest.approx(mass(field2), rel=1e-13)
    for t in (0.01, 0.3, 2.0):
        assert mass(flow.field(t)) == pytest.approx(mass(field2), rel=1e-12)


def test_flow_relaxes_to_the_mean(field2):
    flow = HeatSemigroup(field2)
    for t in (0.001, 0.1, 1.0):
        assert flow.field(t).is_positive()
    assert flow.deviation(2.0) < 0.1 * flow.deviation(0.0)
    assert flow.mean == pytest.approx(mass(field2) / field2.grid.volume, rel=1e-13)


def test_equilibrium_of_constant_is_immediate(grid2):
    assert flow_to_equilibrium(constant_field(grid2, 2.0)) == 0.0


def test_equilibrium_of_single_mode(grid2):
    eps, tol = 0.1, 1e-8
    horizon = flow_to_equilibrium(eigenmode_field(grid2, 1.0, eps), tol)
    # sup deviation over the nodes is eps exp(-2t) max|s|
    expected = np.log(eps * np.abs(grid2.nodes).max() / tol) / 2
    assert horizon == pytest.approx(expected, rel=1e-8)


def test_time_grid():
    times = time_grid(1e-3, 1.25, 2.0)
    assert times[0] == 0.0
    assert times[1] == 1e-3
    assert np.all(np.diff(times) > 0)
    assert times[-1] >= 2.0 > times[-2]
    np.testing.assert_array_equal(time_grid(horizon=0.0), [0.0])
    with pytest.raises(ParameterError):
        time_grid(0.0)


def test_semigroup_property(field2):
    flow = HeatSemigroup(field2)
    for s, t in ((0.05, 0.1), (0.3, 1.2)):
        chained = heat_propagate(flow.coefficients(s), t)
        np.testing.assert_allclose(chained.coeffs, flow.coefficients(s + t).coeffs,
                                   rtol=1e-12, atol=1e-15 * np.abs(flow.initial.coeffs).max())
        np.testing.assert_allclose(propagate(flow.field(s), t).values, flow.field(s + t).values,
                                   rtol=1e-11)


@pytest.mark.parametrize('n', [2, 3])
def test_transform_preserves_the_l2_norm(n, corpus2, corpus3):
    for field in {2: corpus2, 3: corpus3}[n]:
        coefficients = forward_transform(field).coeffs
        assert coefficients @ coefficients == pytest.approx(quadrature(field.grid, field.values ** 2), rel=1e-10)


def test_maximum_principle(corpus2, corpus3):
    for field in corpus2 + corpus3:
        flow = HeatSemigroup(field)
        floor = field.values.min() - 1e-9 * np.abs(field.values).max()
        ceiling = field.values.max() + 1e-9 * np.abs(field.values).max()
        for t in (1e-3, 0.05, 0.5, 5.0):
            values = flow.field(t).values
            assert values.min() >= floor
            assert values.max() <= ceiling
