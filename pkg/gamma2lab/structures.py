from sys import version_info
from typing import NamedTuple, Dict, Tuple, Optional, Any
from logging import getLogger

import numpy as np

logger = getLogger('temp')
# Check for python3.8 or newer; NamedTuple defaults and cached_property are needed
if version_info < (3, 8, 0):
    logger.error('Gamma2Lab requires python3.8 or newer. You are on python%s.%s.%s - Exiting...',
                 version_info.major, version_info.minor, version_info.micro)
    exit(1)


# Exceptions
class Gamma2LabError(Exception):
    """Base class for every error raised by the library."""


class ParameterError(Gamma2LabError):
    """Invalid dimension, grid order, time, or exponent."""


class DomainError(Gamma2LabError):
    """A field failed the positivity guard required by powers and logs."""


class AdmissibilityError(Gamma2LabError):
    """A theorem parameter lies outside the range the theorem is stated for."""


class NumericError(Gamma2LabError):
    """Non-finite values or loss of positivity along a flow."""


class ConvergenceError(Gamma2LabError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ConfigurationError(Gamma2LabError):
    """Bad configuration file values or flags."""


# Positivity guard, relative to the largest node value
POSITIVITY_EPS = 1e-8

DEFAULT_TOLERANCES = {
    'margin': 1e-8,
    'identity': 1e-8,
    'ode': 1e-7,
    'decay': 1e-7,
    'fd_first': 1e-6,
    'fd_second': 1e-5,
    'sobolev_routes': 1e-4,
    'probe_lower_bound': 1e-6,
    'refine': 1e-9,
    'counterexample_factor': 10.0,
}


# Calculus
class DiffOperators(NamedTuple):
    d1: np.ndarray = None
    d2: np.ndarray = None


class SpectralCoeffs(NamedTuple):
    n: int = 2
    coeffs: np.ndarray = None


class EigenTable(NamedTuple):
    n: int = 2
    eigenvalues: np.ndarray = None


class FunctionalValue(NamedTuple):
    value: float = 0.0
    functional: str = None
    params: Dict[str, Any] = {}
    order: int = None


class Refinement(NamedTuple):
    result: Any = None
    order: int = None
    converged: bool = False
    change: float = float('nan')


class DerivativeForms(NamedTuple):
    value: float = 0.0
    alternate: float = 0.0
    discrepancy: float = 0.0


# Inequalities
class MarginReport(NamedTuple):
    theorem: str = None
    parameter: Optional[float] = None
    lhs: float = 0.0
    constant: float = 0.0
    rhs: float = 0.0
    margin: float = 0.0
    relative_margin: float = 0.0
    exploratory: bool = False
    metadata: Dict[str, Any] = {}

    def holds(self, tolerance=DEFAULT_TOLERANCES['margin']):
        return self.relative_margin >= -tolerance


class CounterexampleReport(NamedTuple):
    report: MarginReport = None
    refined_margin: float = 0.0
    error_estimate: float = 0.0
    alpha: float = 0.0
    auxiliary_lhs: float = 0.0
    auxiliary_rhs: float = 0.0
    auxiliary_holds: bool = False
    confirmed: bool = False


class ConvergenceRow(NamedTuple):
    s: float = 0.0
    lhs: float = 0.0
    rhs_integral: float = 0.0
    constant: float = 0.0
    factor: float = 0.0


class ConvergenceTable(NamedTuple):
    rows: Tuple[ConvergenceRow, ...] = ()
    lhs_limit: float = 0.0
    rhs_limit: float = 0.0
    constant_limit: float = 0.0
    factor_limit: float = 0.0
    lhs_rate: float = float('nan')
    rhs_rate: float = float('nan')
    factor_rate: float = float('nan')


# Flow
class FlowRecord(NamedTuple):
    t: float = 0.0
    entropy: float = 0.0
    d_analytic: float = 0.0
    d_fd: float = float('nan')
    d2_analytic: float = 0.0
    d2_fd: float = float('nan')
    ode_residual: float = 0.0
    dirichlet_energy: float = 0.0
    mass: float = 0.0
    min_value: float = 0.0


class FlowTrajectory(NamedTuple):
    n: int = 2
    p: float = 2.0
    records: Tuple[FlowRecord, ...] = ()

    @property
    def times(self):
        return np.array([record.t for record in self.records])

    def column(self, name):
        return np.array([getattr(record, name) for record in self.records])


class OdeCheckResult(NamedTuple):
    worst_residual: float = 0.0
    worst_time: float = 0.0
    passed: bool = True
    tolerance: float = DEFAULT_TOLERANCES['ode']
    exploratory: bool = False
    fd_discrepancy: float = float('nan')


class DecayCheckResult(NamedTuple):
    passed: bool = True
    rate_constant: float = 0.0
    worst_ratio: float = 0.0
    fitted_slope: float = float('nan')
    lower_bound_rate: float = 0.0
    mode_rate: float = 0.0
    slope_ok: bool = True


class SobolevFlowReport(NamedTuple):
    report: MarginReport = None
    direct: MarginReport = None
    time_integral: float = 0.0
    tail: float = 0.0
    horizon: float = 0.0
    agreement: float = 0.0


# Probe
class RatioProblem(NamedTuple):
    functional: str = 'ji'
    n: int = 2
    order: int = 64
    basis_size: int = 8
    s: Optional[float] = None
    exploratory: bool = False


class ProbeResult(NamedTuple):
    min_ratio: float = float('inf')
    argmin: Tuple[float, ...] = ()
    iterations: int = 0
    start_index: int = 0
    converged: bool = False


class SharpnessRow(NamedTuple):
    parameter: Optional[float] = None
    min_ratio: float = 0.0
    constant: float = 0.0
    gap: float = 0.0
    converged: bool = False


# Run configuration
class RunConfig(NamedTuple):
    command: str = 'verify-identities'
    n: int = 2
    grid_order: int = 64
    seed: int = 42
    theorem: str = 'weighted'
    param_s: Optional[float] = None
    param_p: Optional[float] = None
    param_q: Optional[float] = None
    sweep: Tuple[float, ...] = ()
    trials: int = 20
    exploratory: bool = False
    functional: str = 'ji'
    multistarts: int = 20
    max_iter: int = 200
    basis_size: int = 8
    u0: str = 'random'
    workers: int = 1
    output: Optional[str] = None
    csv: Optional[str] = None
    tolerances: Dict[str, float] = DEFAULT_TOLERANCES


class ReportDocument(NamedTuple):
    schema_version: int = 1
    tool_version: str = None
    config: Dict[str, Any] = {}
    tolerances: Dict[str, float] = {}
    results: Tuple[Dict[str, Any], ...] = ()
    passed: bool = True
