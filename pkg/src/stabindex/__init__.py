"""Stability indices of non-hyperbolic planar equilibria.

Estimates the basin-measure fractions of the origin over shrinking
neighborhoods, fits the log-log scaling exponents (sigma_minus, sigma_plus,
sigma), and checks the fits against exact closed-form indices.
"""

from .analytic import (
    ConeLabel,
    a_for_target_sigma,
    analytic_sigma,
    cone_classify,
    invariance_inner_product,
    k_threshold,
    lyapunov_V,
    lyapunov_V_dot,
    sigma_eps_bounds,
)
from .integrator import (
    Classification,
    IntegrationError,
    IntegratorConfig,
    Outcome,
    OutcomeKind,
    classify,
    integrate,
    trajectory,
)
from .measure import (
    IndexEstimate,
    LadderError,
    MeasureSample,
    basin_map,
    estimate_fraction,
    estimate_ladder,
    fit_indices,
    local_index,
    make_ladder,
)
from .systems import (
    Family,
    InvalidSpecError,
    InvalidStateError,
    State,
    SystemSpec,
    Velocity,
    eval_plane,
    eval_quadrant,
    eval_transformed,
    phi,
)

__version__ = "0.1.0"
