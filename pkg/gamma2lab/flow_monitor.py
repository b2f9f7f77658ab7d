"""
Entropy trajectories along the exact heat flow, and the checks run on them:
the Tsallis ODE inequality, its Shannon counterpart, the weighted Dirichlet energy
decay bound and the Sobolev family recovered by time integration.
"""
from logging import getLogger
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.integrate import quad

from gamma2lab.helpers import relative_difference
from gamma2lab.reportmanager import ReportManager, BackendConfig
from gamma2lab.spectral_heat import HeatSemigroup, flow_to_equilibrium, time_grid, lambda1
from gamma2lab.sphere_zonal_calculus import counterexample_profile, power, integrate
from gamma2lab.structures import (FlowRecord, FlowTrajectory, OdeCheckResult, DecayCheckResult, SobolevFlowReport,
                                  ParameterError, NumericError, AdmissibilityError, DEFAULT_TOLERANCES)
from gamma2lab.entropy_functionals import (tsallis_entropy, shannon_entropy, tsallis_first_derivative,
                                           tsallis_second_derivative, weighted_dirichlet_energy, fisher_log,
                                           gamma2_log)
from gamma2lab.inequality_suite import (constant_ode, constant_ji, check_sobolev, sobolev_admissible,
                                        counterexample_window, margin_report, ode_admissible, _gate)

logger = getLogger()

FD_STEP = 1e-3
SHANNON = 1.0


def _increment(before, delta, p):
    """
    Pointwise change of the entropy density when the node values move from before to before + delta,
    free of cancellation: u^p differences through expm1/log1p, f log f differences through log1p.
    """
    after = before + delta
    if p == SHANNON:
        return -(delta * np.log(before) + after * np.log1p(delta / before))
    return np.power(before, p) * np.expm1(p * np.log1p(delta / before)) / (1 - p)


class EntropyProbe(object):
    """Entropy and its derivatives at any time along one exact flow."""

    def __init__(self, u0, p, lam1=None):
        if p != SHANNON and not np.isfinite(p):
            raise ParameterError(f'Tsallis exponent must be finite, got {p}')
        u0.require_positive('initial data')
        self.p = p
        self.flow = HeatSemigroup(u0)
        self.grid = u0.grid
        self.lam1 = lambda1(self.grid.n) if lam1 is None else lam1

    def field(self, t):
        u = self.flow.field(t)
        if not u.is_positive():
            raise NumericError(f'Positivity lost at t = {t:.6g} (min {u.positivity_floor:.3e}); '
                               f'initial data is under-resolved at order {self.grid.order}')
        return u

    def entropy(self, u):
        if self.p == SHANNON:
            return shannon_entropy(u)
        return tsallis_entropy(u, self.p)

    def first(self, u):
        if self.p == SHANNON:
            return fisher_log(u)
        return tsallis_first_derivative(u, self.p).value

    def second(self, u):
        if self.p == SHANNON:
            return -2 * gamma2_log(u)
        return tsallis_second_derivative(u, self.p)

    def energy(self, u):
        if self.p == SHANNON:
            return fisher_log(u)
        return weighted_dirichlet_energy(u, self.p)

    def change(self, t0, t1):
        """Entropy(t1) - Entropy(t0). The node increment is propagated from the coefficients directly."""
        eigenvalues = self.flow.eigenvalues
        base = self.flow.initial.coeffs * np.exp(-eigenvalues * t0)
        step = base * np.expm1(-eigenvalues * (t1 - t0))
        basis = self.grid.basis[:, :base.size]
        return float(self.grid.weights @ _increment(basis @ base, basis @ step, self.p))

    def finite_differences(self, t, h=FD_STEP):
        """Richardson-extrapolated central differences with step min(h, t/2); NaN at t = 0."""
        if t <= 0:
            return float('nan'), float('nan')
        h = min(h, 0.5 * t)

        def central(step):
            forward, backward = self.change(t, t + step), self.change(t - step, t)
            return (forward + backward) / (2 * step), (forward - backward) / step ** 2

        d_h, d2_h = central(h)
        d_half, d2_half = central(0.5 * h)
        return (4 * d_half - d_h) / 3, (4 * d2_half - d2_h) / 3

    def record(self, t, constant, h=FD_STEP):
        u = self.field(t)
        first, second = self.first(u), self.second(u)
        d_fd, d2_fd = self.finite_differences(t, h)
        return FlowRecord(t=float(t), entropy=self.entropy(u), d_analytic=first, d_fd=d_fd, d2_analytic=second,
                          d2_fd=d2_fd, ode_residual=second + constant * first, dirichlet_energy=self.energy(u),
                          mass=integrate(u), min_value=u.positivity_floor)


def default_times(u0, horizon_tol=1e-6):
    return time_grid(horizon=flow_to_equilibrium(u0, horizon_tol))


def _constant_for(n, lam1, p):
    if p == SHANNON:
        return 2 * constant_ji(n, lam1)
    return constant_ode(n, lam1, p, exploratory=True)


def _run(u0, p, times, workers, h, lam1):
    probe = EntropyProbe(u0, p, lam1)
    times = default_times(u0) if times is None else np.asarray(times, dtype=float)
    if times.size == 0 or np.any(times < 0) or np.any(np.diff(times) <= 0):
        raise ParameterError('Sample times must be nonnegative and strictly increasing')
    constant = _constant_for(u0.n, probe.lam1, p)

    logger.debug('Flow n=%s p=%s over %s samples up to t=%.6g', u0.n, p, times.size, times[-1])
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        records = list(executor.map(lambda t: probe.record(t, constant, h), times))
    return FlowTrajectory(n=u0.n, p=float(p), records=tuple(records))


def run_flow(u0, p, times=None, workers=1, h=FD_STEP, lam1=None):
    """Tsallis trajectory of the exact flow from u0, sampled at times (default: geometric grid to equilibrium)."""
    if p == 1:
        raise ParameterError('p = 1 is the Shannon entropy; use run_shannon_flow')
    return _run(u0, p, times, workers, h, lam1)


def run_shannon_flow(f0, times=None, workers=1, h=FD_STEP, lam1=None):
    return _run(f0, SHANNON, times, workers, h, lam1)


def _residual_check(trajectory, constant, tolerance, exploratory):
    worst, worst_time, passed = -np.inf, 0.0, True
    fd_worst = 0.0
    for record in trajectory.records:
        residual = record.d2_analytic + constant * record.d_analytic
        scale = max(abs(record.d2_analytic), abs(constant * record.d_analytic), 1.0)
        normalized = residual / scale
        if normalized > worst:
            worst, worst_time = normalized, record.t
        if residual > tolerance * scale:
            passed = False
        if np.isfinite(record.d_fd) and record.d_analytic != 0:
            fd_worst = max(fd_worst, relative_difference(record.d_analytic, record.d_fd))
    return OdeCheckResult(worst_residual=float(worst), worst_time=float(worst_time), passed=passed,
                          tolerance=tolerance, exploratory=exploratory, fd_discrepancy=float(fd_worst))


def _gate_ode(n, p, exploratory):
    if p == SHANNON:
        return False
    return _gate(ode_admissible(n, p), 'ode', 'p', p, exploratory)


def check_ode_inequality(trajectory, n, p, exploratory=False, lam1=None, tolerance=DEFAULT_TOLERANCES['ode']):
    """
    d2T + C(n,p) dT <= 0 at every sample, relative to max(|d2T|, |C dT|, 1).
    p = 1 checks the Shannon trajectory against twice the Ji constant.
    """
    lam1 = lambda1(n) if lam1 is None else lam1
    out_of_range = _gate_ode(n, p, exploratory)
    constant = _constant_for(n, lam1, p)
    result = _residual_check(trajectory, constant, tolerance, out_of_range)
    if out_of_range:
        logger.info('Exploratory ODE check p=%s: worst residual %.3e at t=%.4g', p, result.worst_residual,
                    result.worst_time)
    return result


def check_shannon_ode(f0, n=None, times=None, workers=1, lam1=None, tolerance=DEFAULT_TOLERANCES['ode']):
    """d2S + 2C dS <= 0 with C the Ji constant."""
    n = f0.n if n is None else n
    trajectory = run_shannon_flow(f0, times, workers=workers, lam1=lam1)
    return check_ode_inequality(trajectory, n, SHANNON, lam1=lam1, tolerance=tolerance)


def check_decay(trajectory, n, p, exploratory=False, lam1=None, tolerance=DEFAULT_TOLERANCES['decay']):
    """
    E(t) <= exp(-C(n,p) t) E(0) at every sample. The late-time slope of log E is fitted over the
    second half of the time span and must not exceed -0.95 lam1.
    """
    lam1 = lambda1(n) if lam1 is None else lam1
    _gate_ode(n, p, exploratory)
    constant = _constant_for(n, lam1, p)
    times = trajectory.times
    energy = trajectory.column('dirichlet_energy')
    t0, e0 = times[0], energy[0]

    if e0 <= 0:
        return DecayCheckResult(passed=bool(np.all(energy <= 0)), rate_constant=constant, worst_ratio=0.0,
                                lower_bound_rate=-lam1, mode_rate=-2 * lam1)

    bound = np.exp(-constant * (times - t0)) * e0
    ratios = energy / bound
    passed = bool(np.all(energy <= bound * (1 + tolerance)))

    late = (times >= t0 + 0.5 * (times[-1] - t0)) & (energy > 0)
    slope, slope_ok = float('nan'), True
    if late.sum() >= 2:
        slope = float(np.polyfit(times[late], np.log(energy[late]), 1)[0])
        slope_ok = slope <= -0.95 * lam1
    return DecayCheckResult(passed=passed, rate_constant=constant, worst_ratio=float(ratios.max()),
                            fitted_slope=slope, lower_bound_rate=-lam1, mode_rate=-2 * lam1, slope_ok=slope_ok)


def counterexample_initial_data(grid, p, shift=4.0):
    """
    u0 = v^(2/(p-1)) with v the modified-inequality counterexample for s = 2/(p-1), i.e.
    u0 = (shift + cos r)^(2(1-n)s/(s+2)). Requires s inside the counterexample window.
    """
    if p <= 0 or p == 1:
        raise ParameterError(f'p must be positive and != 1, got {p}')
    s = 2 / (p - 1)
    low, high = counterexample_window(grid.n)
    if not low < s < high:
        raise AdmissibilityError(f'p = {p} gives s = {s:.6g}, outside the counterexample window '
                                 f'({low:.6g}, {high:g})')
    u0 = power(counterexample_profile(grid, shift), 2 * s / (s + 2))
    # the inequality is invariant under u0 -> c u0; unit maximum keeps the magnitudes readable
    return u0 / u0.values.max()


def derive_sobolev_from_flow(v, q, exploratory=False, lam1=None, horizon_tol=1e-8):
    """
    Integrates the ODE residual of T_p, p = 2/q, from u0 = v^q over [0, T_eq] plus the single-mode tail.
    -integral = dT(0) - C (T_inf - T_0) = 2q Vol (Sobolev margin), so the margin is recovered by dividing.
    """
    n = v.n
    lam1 = lambda1(n) if lam1 is None else lam1
    out_of_range = _gate(sobolev_admissible(n, q), 'sobolev', 'q', q, exploratory)
    direct = check_sobolev(v, q, exploratory=True, lam1=lam1)._replace(exploratory=out_of_range)
    p = 2.0 / q
    u0 = power(v, q)
    probe = EntropyProbe(u0, p, lam1)
    constant = constant_ode(n, lam1, p, exploratory=True)
    volume = v.grid.volume

    def residual(t):
        u = probe.field(t)
        return tsallis_second_derivative(u, p) + constant * tsallis_first_derivative(u, p).value

    first = tsallis_first_derivative(u0, p).value
    horizon = flow_to_equilibrium(u0, horizon_tol)
    integral, tail = 0.0, 0.0
    if horizon > 0:
        knots = time_grid(horizon=horizon)
        for a, b in zip(knots[:-1], knots[1:]):
            piece, _ = quad(residual, a, b, epsabs=1e-13 * first, epsrel=1e-11, limit=200)
            integral += piece
        slow = 2 * probe.flow.eigenvalues[1]
        tail = (constant - slow) * tsallis_first_derivative(probe.field(knots[-1]), p).value / slow
        horizon = float(knots[-1])

    scale = 2 * q * volume
    lhs = first / scale
    margin = -(integral + tail) / scale
    rhs = lhs - margin
    report = margin_report('sobolev_flow', q, lhs, direct.constant, rhs / direct.constant,
                           exploratory=out_of_range, order=v.grid.order, n=n)
    agreement = abs(report.margin - direct.margin) / max(abs(direct.lhs), abs(direct.rhs), 1e-300)
    logger.debug('Sobolev q=%s from flow: margin %.6e direct %.6e agreement %.2e', q, report.margin,
                 direct.margin, agreement)
    return SobolevFlowReport(report=report, direct=direct, time_integral=integral, tail=tail, horizon=horizon,
                             agreement=agreement)


def write_trajectory_csv(trajectory, path):
    manager = ReportManager([BackendConfig(backend_type='csv', path=path)])
    results = manager.write_trajectory(trajectory)
    manager.close()
    return bool(results) and all(results.values())
