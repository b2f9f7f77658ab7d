import numpy as np
import pytest
from hypothesis import given, settings, strategies as hyp_st

from gamma2lab.structures import ParameterError, FunctionalValue
from gamma2lab.spectral_heat import HeatSemigroup, propagate
from gamma2lab.sphere_zonal_calculus import (build_grid, constant_field, eigenmode_field, power, integrate,
                                             grad_norm_sq, laplacian, quadrature, ZonalField)
from gamma2lab.entropy_functionals import (
    entropy_gap,
    evaluate,
    fisher_log,
    gamma2_log,
    modified_correction,
    modified_weighted_gamma2,
    power_evolution_rhs,
    refine_functional,
    shannon_entropy,
    sobolev_gap,
    tsallis_entropy,
    tsallis_first_derivative,
    tsallis_second_derivative,
    weighted_dirichlet,
    weighted_gamma2,
)


def test_tsallis_rejects_shannon_exponent(field2):
    with pytest.raises(ParameterError):
        tsallis_entropy(field2, 1.0)
    with pytest.raises(ParameterError):
        tsallis_first_derivative(field2, 1.0)


@settings(deadline=None, max_examples=30)
@given(c=hyp_st.floats(0.1, 10.0), p=hyp_st.floats(0.1, 3.0).filter(lambda p: abs(p - 1) > 1e-3))
def test_entropies_of_constants(c, p):
    grid = build_grid(3, 16)
    u = constant_field(grid, c)
    assert tsallis_entropy(u, p) == pytest.approx((c ** p - c) * grid.volume / (1 - p), rel=1e-10, abs=1e-9)
    assert shannon_entropy(u) == pytest.approx(-c * np.log(c) * grid.volume, rel=1e-12, abs=1e-12)
    assert tsallis_first_derivative(u, p).value == 0.0


@pytest.mark.parametrize('p', [1 - 1e-6, 1 + 1e-6])
def test_tsallis_tends_to_shannon(grid2, p):
    u = eigenmode_field(grid2, 2.0, 1.0)
    assert tsallis_entropy(u, p) == pytest.approx(shannon_entropy(u), rel=1e-5)


def test_fisher_information_forms(field2):
    root = power(field2, 0.5)
    assert fisher_log(field2) == pytest.approx(4 * integrate(grad_norm_sq(root)), rel=1e-12)


@pytest.mark.parametrize('p', [0.5, 1.5, 2.0, 3.0])
def test_first_derivative_forms_agree(corpus2, p):
    for u in corpus2:
        forms = tsallis_first_derivative(u, p)
        assert forms.value > 0
        assert forms.discrepancy <= 1e-10


@pytest.mark.parametrize('p', [0.5, 1.5, 2.0])
def test_derivatives_follow_the_flow(field2, p):
    flow = HeatSemigroup(field2)
    t, h = 0.1, 1e-4

    entropy_rate = (tsallis_entropy(flow.field(t + h), p) - tsallis_entropy(flow.field(t - h), p)) / (2 * h)
    first = tsallis_first_derivative(flow.field(t), p).value
    assert first == pytest.approx(entropy_rate, rel=1e-6)

    first_rate = (tsallis_first_derivative(flow.field(t + h), p).value
                  - tsallis_first_derivative(flow.field(t - h), p).value) / (2 * h)
    assert tsallis_second_derivative(flow.field(t), p) == pytest.approx(first_rate, rel=1e-6)


def test_power_evolution_rhs_matches_the_flow(field2):
    p, t, h = 1.5, 0.05, 1e-4
    flow = HeatSemigroup(field2)
    exponent = 0.5 * (p - 1)
    rate = (power(flow.field(t + h), exponent).values - power(flow.field(t - h), exponent).values) / (2 * h)
    rhs = power_evolution_rhs(flow.field(t), p).values
    np.testing.assert_allclose(rhs, rate, atol=1e-6 * np.abs(rate).max())


def test_shannon_second_derivative_is_gamma2(field2):
    flow = HeatSemigroup(field2)
    t, h = 0.1, 1e-4
    rate = (fisher_log(flow.field(t + h)) - fisher_log(flow.field(t - h))) / (2 * h)
    assert -2 * gamma2_log(flow.field(t)) == pytest.approx(rate, rel=1e-6)


def test_weighted_functionals_at_zero_weight(corpus2):
    # s = 0 is the plain Bochner integral, bounded below by n times the Dirichlet energy on S^2
    for v in corpus2:
        assert weighted_gamma2(v, 0.0) >= 2 * weighted_dirichlet(v, 0.0)


def test_modified_functional_on_eigenmode(grid3):
    v = eigenmode_field(grid3, 2.0, 0.5)
    # each functional scales like c^(s+2) under v -> c v
    for functional in (weighted_gamma2, modified_weighted_gamma2, weighted_dirichlet):
        assert functional(power(v, 1.0) * 3.0, -1.5) == pytest.approx(3.0 ** 0.5 * functional(v, -1.5), rel=1e-12)


def test_gaps(field2, grid2):
    assert entropy_gap(field2) > 0
    assert entropy_gap(constant_field(grid2, 3.0)) == pytest.approx(0.0, abs=1e-14)
    assert sobolev_gap(field2, 1.0) > 0
    assert sobolev_gap(constant_field(grid2, 3.0), 1.5) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ParameterError):
        sobolev_gap(field2, 2.0)
    with pytest.raises(ParameterError):
        sobolev_gap(field2, -1.0)


def test_evaluate_registry(field2):
    value = evaluate('tsallis', field2, p=1.5)
    assert isinstance(value, FunctionalValue)
    assert value.value == tsallis_entropy(field2, 1.5)
    assert value.params == {'p': 1.5}
    assert value.order == 64
    assert evaluate('fisher_log', field2).value == fisher_log(field2)
    with pytest.raises(ParameterError):
        evaluate('renyi', field2)
    with pytest.raises(ParameterError):
        evaluate('weighted_gamma2', field2)


@pytest.mark.parametrize('p', [0.0, -0.5, float('nan')])
def test_tsallis_rejects_nonpositive_exponents(field2, p):
    for functional in (tsallis_entropy, tsallis_second_derivative, power_evolution_rhs):
        with pytest.raises(ParameterError):
            functional(field2, p)
    with pytest.raises(ParameterError):
        tsallis_first_derivative(field2, p)


@pytest.mark.parametrize('s', [-3.0, -1.5, 2.0, 4.0])
def test_modified_functional_subtracts_the_correction(corpus2, s):
    for v in corpus2:
        correction = quadrature(v.grid, power(v, s - 1).values * grad_norm_sq(v).values * laplacian(v).values)
        assert modified_correction(v, s) == pytest.approx(correction, rel=1e-12, abs=1e-14)
        difference = modified_weighted_gamma2(v, s) - weighted_gamma2(v, s)
        assert difference == pytest.approx(-correction, rel=1e-10, abs=1e-12 * abs(weighted_gamma2(v, s)))


@pytest.mark.parametrize('p', [0.5, 1.5, 3.0])
def test_modified_functional_is_the_second_tsallis_derivative(corpus2, p):
    s = 2 / (p - 1)
    for u in corpus2:
        big_u = power(u, 0.5 * (p - 1))
        expected = -(1 / (2 * p)) * (0.5 * (p - 1)) ** 2 * tsallis_second_derivative(u, p)
        assert modified_weighted_gamma2(big_u, s) == pytest.approx(expected, rel=1e-9)


def test_single_mode_quadratic_entropy_decays_at_twice_lambda1(grid2):
    u0 = eigenmode_field(grid2, 1.0, 0.4)
    limit = tsallis_entropy(propagate(u0, 50.0), 2.0)
    early, late = (tsallis_entropy(propagate(u0, t), 2.0) - limit for t in (0.1, 0.6))
    assert late / early == pytest.approx(np.exp(-4 * 0.5), rel=1e-10)


def test_refine_functional_reports_the_order(field2):
    value = refine_functional('weighted_gamma2', field2, rtol=1e-10, s=-1.5)
    assert value.params['converged']
    assert value.params['s'] == -1.5
    assert value.order >= 128
    assert value.params['relative_change'] <= 1e-10
    assert value.value == pytest.approx(weighted_gamma2(field2, -1.5), rel=1e-9)
    assert evaluate('modified_correction', field2, s=-1.5).value == modified_correction(field2, -1.5)
    with pytest.raises(ParameterError):
        refine_functional('weighted_gamma2', ZonalField(field2.grid, field2.values), s=-1.5)
