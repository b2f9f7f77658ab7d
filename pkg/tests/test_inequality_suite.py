import numpy as np
import pytest
from hypothesis import given, settings, strategies as hyp_st

from gamma2lab.structures import AdmissibilityError, ParameterError, MarginReport
from gamma2lab.sphere_zonal_calculus import build_grid, eigenmode_field, exp_mode_field, power, ZonalField
from gamma2lab.inequality_suite import (
    alpha_parameter,
    check_corpus,
    check_del14,
    check_ji,
    check_logsobolev,
    check_modified_gamma2,
    check_poincare,
    check_rothaus_logsobolev,
    check_sobolev,
    check_theorem,
    check_weighted_gamma2,
    constant_del14,
    constant_ji,
    constant_modified,
    constant_ode,
    constant_rothaus,
    constant_sobolev,
    constant_weighted,
    corpus,
    counterexample_window,
    ji_limit_convergence,
    modified_range,
    ode_lower,
    refined_check,
    run_counterexample,
    sobolev_upper,
    weighted_range,
)

dimensions = hyp_st.integers(2, 8)


@settings(max_examples=200)
@given(n=dimensions, data=hyp_st.data())
def test_weighted_constant_collapses_on_the_sphere(n, data):
    low, high = weighted_range(n)
    s = data.draw(hyp_st.floats(-1e3, low) | hyp_st.floats(high, 1e3))
    assert constant_weighted(n, n, s) == pytest.approx(n, rel=1e-12)


@settings(max_examples=200)
@given(n=dimensions, data=hyp_st.data())
def test_modified_constant_collapses_on_the_sphere(n, data):
    low, high = modified_range(n)
    s = data.draw(hyp_st.floats(-1e3, low) | hyp_st.floats(high, 1e3))
    assert constant_modified(n, n, s) == pytest.approx(n, rel=1e-12)


@settings(max_examples=200)
@given(n=dimensions, data=hyp_st.data())
def test_exponent_constants_collapse_on_the_sphere(n, data):
    q = data.draw(hyp_st.floats(1.0, sobolev_upper(n)).filter(lambda q: q != 2))
    p = data.draw(hyp_st.floats(ode_lower(n), 2.0).filter(lambda p: p != 1))
    assert constant_sobolev(n, n, q) == pytest.approx(n, rel=1e-12)
    assert constant_ode(n, n, p) == pytest.approx(2 * n, rel=1e-12)


@pytest.mark.parametrize('n', [2, 3, 4, 7])
def test_fixed_constants_collapse_on_the_sphere(n):
    assert constant_ji(n, n) == pytest.approx(n, rel=1e-14)
    assert constant_rothaus(n, n) == pytest.approx(n, rel=1e-14)
    if n >= 3:
        assert constant_del14(n, n, 1.5) == pytest.approx(n, rel=1e-14)


def test_constants_away_from_the_sphere():
    # lam1 > n: the constants interpolate between lam1 and n
    assert constant_ji(2, 3.0) == pytest.approx(7 / 8 * 3.0 + 1 / 8 * 2, rel=1e-14)
    assert constant_weighted(2, 3.0, 0.0) == pytest.approx(3.0)
    assert constant_ode(2, 3.0, 2.0) == pytest.approx(6.0)


def test_inadmissible_parameters_raise():
    with pytest.raises(AdmissibilityError):
        constant_weighted(2, 2, 1.0)
    with pytest.raises(AdmissibilityError):
        constant_modified(2, 2, 0.0)
    with pytest.raises(AdmissibilityError):
        constant_sobolev(2, 2, 10.0)
    with pytest.raises(AdmissibilityError):
        constant_ode(2, 2, 0.1)
    assert np.isfinite(constant_modified(2, 2, -2.3, exploratory=True))
    with pytest.raises(ParameterError):
        constant_modified(2, 2, -2.0, exploratory=True)


def test_counterexample_window():
    low, high = counterexample_window(2)
    assert low == pytest.approx(-18 / 7)
    assert high == -2.0
    assert alpha_parameter(2, -2.3) > 2
    assert alpha_parameter(3, -2.5) > 1.5
    with pytest.raises(ParameterError):
        alpha_parameter(2, -2.3, 'other')


@pytest.mark.parametrize('n', [2, 3])
@pytest.mark.parametrize('s', [-5.0, -2.0, 0.0, 'upper', 5.0])
def test_weighted_inequality_on_corpus(n, s):
    grid = build_grid(n, 64)
    s = 4 * (n + 2) / (4 * n - 1) if s == 'upper' else s
    reports = check_corpus('weighted', corpus(grid, 42, 10), s)
    assert all(report.holds(1e-8) for report in reports)
    assert [report.metadata['case'] for report in reports] == list(range(10))


@pytest.mark.parametrize('n', [2, 3])
def test_weighted_equality_case(n):
    grid = build_grid(n, 64)
    report = check_weighted_gamma2(eigenmode_field(grid, 2.0, 0.5), 0.0)
    assert isinstance(report, MarginReport)
    assert abs(report.relative_margin) <= 1e-8
    assert report.constant == pytest.approx(n)


@pytest.mark.parametrize('s', [-6.0, -3.0, 2.0, 4.0])
def test_modified_inequality_on_corpus(corpus2, s):
    assert all(report.holds(1e-8) for report in check_corpus('modified', corpus2, s))


@pytest.mark.parametrize('theorem', ['ji', 'logsob', 'rothaus'])
def test_logarithmic_inequalities_on_corpus(corpus2, corpus3, theorem):
    for fields in (corpus2, corpus3):
        assert all(report.holds(1e-8) for report in check_corpus(theorem, fields))


@pytest.mark.parametrize('q', [1.0, 1.5, 3.0, 9.0])
def test_sobolev_inequality_on_corpus(corpus2, q):
    assert all(report.holds(1e-8) for report in check_corpus('sobolev', corpus2, q))


def test_poincare_is_sharp_on_the_first_mode(grid3):
    report = check_poincare(eigenmode_field(grid3, 2.0, 0.5))
    assert report.theorem == 'poincare'
    assert abs(report.relative_margin) <= 1e-8


def test_del14_needs_three_dimensions(field2, corpus3):
    with pytest.raises(AdmissibilityError):
        check_del14(field2, 1.5)
    assert all(check_del14(v, 2.5).holds(1e-8) for v in corpus3)


def test_logsobolev_checks_share_the_fisher_side(field2):
    ji = check_logsobolev(field2, lam1=3.0)
    rothaus = check_rothaus_logsobolev(field2, lam1=3.0)
    assert ji.lhs == rothaus.lhs
    assert rothaus.theorem == 'rothaus'
    assert ji.constant <= rothaus.constant


@pytest.mark.parametrize('n', [3, 4, 6])
@pytest.mark.parametrize('excess', [0.5, 1.0, 5.0])
def test_constants_are_ordered_above_the_sphere(n, excess):
    # lam1 > n: the Rothaus and comparison constants improve on the Ji and Sobolev ones
    lam1 = n + excess
    ji, rothaus = constant_ji(n, lam1), constant_rothaus(n, lam1)
    assert ji < rothaus

    upper = min(sobolev_upper(n), 2 * n / (n - 2))
    for q in (1.25, 1.5, 1.9, 2.5, upper):
        assert constant_sobolev(n, lam1, q) <= constant_del14(n, lam1, q) + 1e-12
        if q < 2:
            assert rothaus <= constant_del14(n, lam1, q) + 1e-12
        else:
            assert constant_del14(n, lam1, q) <= rothaus + 1e-12
    assert constant_sobolev(n, lam1, 1.0) == constant_del14(n, lam1, 1.0) == pytest.approx(lam1)

    # q -> 2 recovers the logarithmic constants
    for q in (2 - 1e-9, 2 + 1e-9):
        assert constant_sobolev(n, lam1, q) == pytest.approx(ji, rel=1e-8)
        assert constant_del14(n, lam1, q) == pytest.approx(rothaus, rel=1e-8)


def test_check_theorem_dispatch(field2):
    assert check_theorem('ji', field2).margin == check_ji(field2).margin
    assert check_theorem('sobolev', field2, 1.5).margin == check_sobolev(field2, 1.5).margin
    with pytest.raises(ParameterError):
        check_theorem('weighted', field2)
    with pytest.raises(ParameterError):
        check_theorem('bakry', field2)


def test_exploratory_reports_are_flagged(field2):
    report = check_modified_gamma2(field2, -1.0, exploratory=True)
    assert report.exploratory
    with pytest.raises(AdmissibilityError):
        check_modified_gamma2(field2, -1.0)


def test_corpus_is_seeded_per_case(grid2):
    first, second = corpus(grid2, 7, 3), corpus(grid2, 7, 5)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(corpus(grid2, 8, 1)[0].values, first[0].values)


@pytest.mark.parametrize('n, s', [(2, -2.3), (3, -2.5)])
def test_counterexample_is_confirmed(n, s):
    result = run_counterexample(n, s)
    assert result.confirmed
    assert result.report.margin < 0
    assert result.refined_margin < 0
    assert abs(result.refined_margin) > 10 * result.error_estimate
    assert result.report.exploratory
    assert result.report.margin == pytest.approx(result.report.metadata['closed_form_margin'], rel=1e-6)
    assert result.auxiliary_holds


def test_counterexample_outside_window():
    with pytest.raises(AdmissibilityError):
        run_counterexample(2, -1.0)
    with pytest.raises(AdmissibilityError):
        run_counterexample(2, -3.0)


def test_ji_limit_converges_at_first_order(field2):
    table = ji_limit_convergence(field2)
    assert [row.s for row in table.rows] == [-1e1, -1e2, -1e3, -1e4]
    for rate in (table.lhs_rate, table.rhs_rate, table.factor_rate):
        assert 0.8 <= rate <= 1.2
    assert table.rows[-1].lhs == pytest.approx(table.lhs_limit, rel=1e-2)
    assert table.constant_limit == pytest.approx(2.0)
    with pytest.raises(ParameterError):
        ji_limit_convergence(field2, s_list=(1.0,))


def test_ji_limit_of_a_single_mode_exponential(grid2):
    table = ji_limit_convergence(exp_mode_field(grid2, [0.0, 0.5]))
    assert 0.8 <= table.lhs_rate <= 1.2
    assert 0.8 <= table.rhs_rate <= 1.2


@pytest.mark.parametrize('c', [3.7, 0.25])
def test_ji_margin_is_homogeneous(field2, c):
    base, scaled = check_ji(field2), check_ji(c * field2)
    assert scaled.margin == pytest.approx(c * base.margin, rel=1e-12)
    assert scaled.relative_margin == pytest.approx(base.relative_margin, rel=1e-10)


@pytest.mark.parametrize('q', [2 - 1e-6, 2 + 1e-6])
def test_sobolev_tends_to_logsobolev(corpus2, q):
    # v^2 = f turns mean |grad v|^2 into mean f |grad log f|^2 / 4
    for v in corpus2[:3]:
        sobolev, logsob = check_sobolev(v, q), check_logsobolev(power(v, 2.0))
        assert sobolev.constant == pytest.approx(logsob.constant / 2, rel=1e-5)
        assert abs(4 * sobolev.margin - logsob.margin) <= 1e-4 * logsob.lhs


def test_refined_check_records_the_order(field2):
    report = refined_check('weighted', field2, -1.5, case=4)
    assert report.metadata['refined']
    assert report.metadata['order'] >= 128
    assert report.metadata['case'] == 4
    assert report.margin == pytest.approx(check_weighted_gamma2(field2, -1.5).margin,
                                          abs=1e-9 * max(abs(report.lhs), abs(report.rhs)))

    frozen = refined_check('ji', ZonalField(field2.grid, field2.values))
    assert not frozen.metadata['refined']
    assert frozen.metadata['order'] == 64


def test_refined_corpus_check(corpus2):
    reports = check_corpus('modified', corpus2, -3.0, rtol=1e-10)
    assert all(report.holds(1e-8) for report in reports)
    assert all(report.metadata['refined'] and report.metadata['order'] >= 128 for report in reports)
    assert [report.metadata['case'] for report in reports] == list(range(len(corpus2)))


def test_large_amplitude_field_is_resolved():
    weights = [0.0, 3.0, -2.0, 1.5, -1.0, 0.8, 0.5, -0.4, 0.3]
    fine = check_weighted_gamma2(exp_mode_field(build_grid(2, 512), weights), -5.0)
    refined = refined_check('weighted', exp_mode_field(build_grid(2, 64), weights), -5.0)
    assert refined.metadata['refined']
    assert 64 < refined.metadata['order'] <= 512
    assert refined.lhs == pytest.approx(fine.lhs, rel=1e-8)
    assert refined.margin == pytest.approx(fine.margin, abs=1e-8 * max(abs(fine.lhs), abs(fine.rhs)))
    assert refined.holds(1e-8)


@pytest.mark.parametrize('n, s', [(2, -2.3), (3, -2.5)])
def test_counterexample_is_stable_under_doubling(n, s):
    result = run_counterexample(n, s)
    doubled = run_counterexample(n, s, order=2 * result.report.metadata['order'])
    assert result.report.metadata['refined']
    assert result.report.metadata['order'] >= 128
    assert abs(doubled.refined_margin - result.refined_margin) <= 0.01 * abs(result.refined_margin)


@pytest.mark.slow
@pytest.mark.parametrize('n', [2, 3])
@pytest.mark.parametrize('s', [-5.0, -2.0, 0.0, 'upper', 5.0])
def test_weighted_inequality_on_full_corpus(n, s):
    grid = build_grid(n, 64)
    s = weighted_range(n)[1] if s == 'upper' else s
    reports = check_corpus('weighted', corpus(grid, 42, 100), s)
    assert len(reports) == 100
    assert all(report.holds(1e-8) for report in reports)


@pytest.mark.slow
@pytest.mark.parametrize('n', [2, 3])
@pytest.mark.parametrize('endpoint', ['below', 'low', 'high', 'above'])
def test_modified_inequality_on_full_corpus(n, endpoint):
    low, high = modified_range(n)
    s = {'below': low - 3, 'low': low, 'high': high, 'above': high + 3}[endpoint]
    reports = check_corpus('modified', corpus(build_grid(n, 64), 42, 100), s)
    assert len(reports) == 100
    assert all(report.holds(1e-8) for report in reports)
