import csv

import numpy as np
import pytest

from gamma2lab.structures import AdmissibilityError, ParameterError, FlowRecord
from gamma2lab.helpers import relative_difference
from gamma2lab.sphere_zonal_calculus import build_grid, constant_field, eigenmode_field
from gamma2lab.inequality_suite import corpus, ode_lower, sobolev_upper
from gamma2lab.flow_monitor import (
    EntropyProbe,
    check_decay,
    check_ode_inequality,
    check_shannon_ode,
    counterexample_initial_data,
    derive_sobolev_from_flow,
    run_flow,
    run_shannon_flow,
    write_trajectory_csv,
)


@pytest.fixture(scope='module')
def trajectory(field2):
    return run_flow(field2, 1.5)


def test_run_flow_validation(field2):
    with pytest.raises(ParameterError):
        run_flow(field2, 1.0)
    with pytest.raises(ParameterError):
        run_flow(field2, 1.5, times=[0.0, 0.2, 0.1])
    with pytest.raises(ParameterError):
        run_flow(field2, 1.5, times=[-0.1, 0.2])


def test_trajectory_layout(trajectory, field2):
    times = trajectory.times
    assert times[0] == 0.0
    assert np.all(np.diff(times) > 0)
    assert np.isnan(trajectory.records[0].d_fd)
    np.testing.assert_allclose(trajectory.column('mass'), trajectory.records[0].mass, rtol=1e-12)
    # the entropy increases along the flow
    assert np.all(np.diff(trajectory.column('entropy')) > -1e-12)


def test_constant_initial_data_is_stationary(grid2):
    trajectory = run_flow(constant_field(grid2, 2.0), 1.5, times=[0.0, 0.1, 1.0])
    for name in ('d_analytic', 'd2_analytic', 'd_fd', 'd2_fd', 'dirichlet_energy'):
        column = trajectory.column(name)
        np.testing.assert_allclose(column[np.isfinite(column)], 0.0, atol=1e-12)
    np.testing.assert_allclose(trajectory.column('entropy'), trajectory.records[0].entropy, rtol=1e-13)
    assert check_decay(trajectory, 2, 1.5).passed


@pytest.mark.parametrize('p', [0.5, 1.5, 2.0])
def test_finite_differences_match_analytic_derivatives(field2, p):
    trajectory = run_flow(field2, p)
    first, second = trajectory.column('d_analytic'), trajectory.column('d2_analytic')
    for record in trajectory.records[1:]:
        if abs(record.d_analytic) >= 1e-6 * np.abs(first).max():
            assert relative_difference(record.d_analytic, record.d_fd) <= 1e-6
        if abs(record.d2_analytic) >= 1e-6 * np.abs(second).max():
            assert relative_difference(record.d2_analytic, record.d2_fd) <= 1e-5


@pytest.mark.parametrize('p', [ode_lower(2), 0.5, 1.5, 2.0])
def test_ode_inequality_on_the_two_sphere(corpus2, p):
    for u0 in corpus2[:3]:
        result = check_ode_inequality(run_flow(u0, p), 2, p)
        assert result.passed
        assert not result.exploratory
        assert result.worst_residual <= 1e-7


@pytest.mark.parametrize('p', [ode_lower(3), 1.5])
def test_ode_inequality_on_the_three_sphere(corpus3, p):
    result = check_ode_inequality(run_flow(corpus3[0], p), 3, p)
    assert result.passed


def test_shannon_ode(field2, corpus3):
    assert check_shannon_ode(field2).passed
    assert check_shannon_ode(corpus3[1]).passed
    trajectory = run_shannon_flow(field2)
    assert check_decay(trajectory, 2, 1.0).passed


def test_decay_bound(trajectory):
    result = check_decay(trajectory, 2, 1.5)
    assert result.passed
    assert result.rate_constant == pytest.approx(4.0)
    assert result.worst_ratio <= 1 + 1e-7
    assert result.slope_ok
    assert result.fitted_slope <= -0.95 * 2
    assert result.lower_bound_rate == -2.0
    assert result.mode_rate == -4.0


def test_inadmissible_exponent_needs_exploratory(trajectory):
    with pytest.raises(AdmissibilityError):
        check_ode_inequality(trajectory, 2, 0.1)
    with pytest.raises(AdmissibilityError):
        check_decay(trajectory, 2, 3.0)


def test_counterexample_initial_data_breaks_the_ode(grid2):
    u0 = counterexample_initial_data(grid2, 0.1)
    assert u0.values.max() == pytest.approx(1.0)
    trajectory = run_flow(u0, 0.1, times=[0.0, 0.01])
    assert trajectory.records[0].ode_residual > 0
    result = check_ode_inequality(trajectory, 2, 0.1, exploratory=True)
    assert result.exploratory
    with pytest.raises(AdmissibilityError):
        counterexample_initial_data(grid2, 0.5)
    with pytest.raises(ParameterError):
        counterexample_initial_data(grid2, -0.5)


def test_probe_changes_are_consistent(field2):
    probe = EntropyProbe(field2, 1.5)
    whole = probe.change(0.1, 0.3)
    parts = probe.change(0.1, 0.2) + probe.change(0.2, 0.3)
    assert whole == pytest.approx(parts, rel=1e-12)
    direct = probe.entropy(probe.field(0.3)) - probe.entropy(probe.field(0.1))
    assert whole == pytest.approx(direct, rel=1e-9)


@pytest.mark.parametrize('q', [1.5, 3.0])
def test_sobolev_from_flow_agrees_with_direct_check(field2, q):
    result = derive_sobolev_from_flow(field2, q)
    assert result.agreement <= 1e-4
    assert result.report.margin >= 0
    assert result.tail == pytest.approx(0.0, abs=1e-14)


def test_sobolev_from_flow_is_sharp_for_poincare(grid2):
    result = derive_sobolev_from_flow(eigenmode_field(grid2, 2.0, 0.5), 1.0)
    scale = max(abs(result.direct.lhs), abs(result.direct.rhs))
    assert abs(result.report.margin) <= 1e-8 * scale
    assert abs(result.direct.margin) <= 1e-8 * scale


def test_trajectory_csv(trajectory, tmp_path):
    path = tmp_path / 'flow' / 'trajectory.csv'
    assert write_trajectory_csv(trajectory, str(path))
    with open(path, newline='') as handle:
        rows = list(csv.reader(handle))
    assert tuple(rows[0]) == FlowRecord._fields
    assert len(rows) == len(trajectory.records) + 1
    times = [float(row[0]) for row in rows[1:]]
    assert all(b > a for a, b in zip(times, times[1:]))
    assert float(rows[-1][1]) == trajectory.records[-1].entropy


@pytest.mark.slow
@pytest.mark.parametrize('n', [2, 3])
@pytest.mark.parametrize('p', ['lower', 0.5, 1.5, 2.0])
def test_ode_inequality_on_corpus(n, p):
    p = ode_lower(n) if p == 'lower' else p
    for u0 in corpus(build_grid(n, 64), 42, 4):
        trajectory = run_flow(u0, p)
        assert check_ode_inequality(trajectory, n, p).passed
        assert check_decay(trajectory, n, p).passed


@pytest.mark.slow
@pytest.mark.parametrize('n', [2, 3])
@pytest.mark.parametrize('q', [1.0, 1.5, 3.0, 'upper'])
def test_sobolev_from_flow_at_the_range_ends(n, q):
    q = sobolev_upper(n) if q == 'upper' else q
    v, = corpus(build_grid(n, 64), 7, 1)
    result = derive_sobolev_from_flow(v, q)
    assert result.agreement <= 1e-4
    assert result.direct.margin >= -1e-8 * max(abs(result.direct.lhs), abs(result.direct.rhs))
