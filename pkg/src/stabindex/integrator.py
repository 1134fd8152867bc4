"""Trajectory integration with event detection.

``integrate`` answers, for one initial state: does the trajectory reach the
convergence ball around the origin, escape past the outer radius, leave the
delta tube, or exhaust the time budget.  ``classify`` turns that into basin
membership, optionally consulting the certified cones first so only the
undetermined band is integrated (and so slow algebraic convergence toward
the non-hyperbolic origin terminates as soon as a trapping cone is entered).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from . import analytic, backend
from ._kernel_py import (
    CODE_ATTRACT,
    CODE_PHI,
    CODE_PIECEWISE,
    CODE_REPEL,
    ERR_MAX_STEPS,
    ERR_NONFINITE,
    ERR_STEP_UNDERFLOW,
    KIND_CONE_IN,
    KIND_CONE_OUT,
    KIND_CONVERGED,
    KIND_ESCAPED,
    KIND_LEFT_DELTA,
    KIND_TIMED_OUT,
)
from .systems import Family, InvalidStateError, State, SystemSpec

_FAMILY_CODE = {
    Family.POWER_ATTRACT: CODE_ATTRACT,
    Family.POWER_REPEL: CODE_REPEL,
    Family.PHI: CODE_PHI,
    Family.PIECEWISE: CODE_PIECEWISE,
}


class IntegrationError(RuntimeError):
    pass


class StepUnderflowError(IntegrationError):
    pass


class NonFiniteError(IntegrationError):
    pass


_ERRORS = {
    ERR_STEP_UNDERFLOW: StepUnderflowError("step size underflowed h_min"),
    ERR_NONFINITE: NonFiniteError("non-finite state encountered"),
    ERR_MAX_STEPS: IntegrationError("step budget exhausted"),
}


class OutcomeKind(Enum):
    CONVERGED = "Converged"
    ESCAPED = "Escaped"
    LEFT_DELTA = "LeftDelta"
    TIMED_OUT = "TimedOut"


_KIND_MAP = {
    KIND_CONVERGED: OutcomeKind.CONVERGED,
    KIND_ESCAPED: OutcomeKind.ESCAPED,
    KIND_LEFT_DELTA: OutcomeKind.LEFT_DELTA,
    KIND_TIMED_OUT: OutcomeKind.TIMED_OUT,
}


class Classification(Enum):
    IN_BASIN = "InBasin"
    IN_LOCAL_BASIN = "InLocalBasin"
    OUT_OF_BASIN = "OutOfBasin"


@dataclass(frozen=True)
class IntegratorConfig:
    """Event radii and step control.

    Defaults are sized for the non-hyperbolic origin: the approach is
    algebraic, so the time budget is generous and callers should watch the
    timed-out counter rather than assume it suffices.
    """

    r_in: float = 1e-6
    r_out: float = 2.0
    delta: float | None = None
    t_max: float = 1e6
    h_init: float = 1e-3
    tol: float = 1e-9
    h_min: float = 1e-14

    def __post_init__(self):
        if not 0 < self.r_in < self.r_out:
            raise ValueError(f"need 0 < r_in < r_out, got {self.r_in}, {self.r_out}")
        if self.delta is not None and not self.r_in < self.delta < self.r_out:
            raise ValueError(f"need r_in < delta < r_out, got delta={self.delta}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.h_min < self.h_init:
            raise ValueError(f"need 0 < h_min < h_init, got {self.h_min}, {self.h_init}")


DEFAULT_CONFIG = IntegratorConfig()


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    t_exit: float
    final: State
    steps: int = 0


def _kernel_args(spec: SystemSpec):
    """(code, effective exponent, 1/p) for the kernel."""
    code = _FAMILY_CODE[spec.family]
    e = spec.exponent if spec.exponent is not None else 0.0
    pinv = 1.0 / spec.p if spec.p is not None else 1.0
    return code, e, pinv


def cone_parameters(spec: SystemSpec, k_in=None, k_out=None):
    """(use_cones, k_in, k_out, x_limit) for kernel-side cone termination.

    Only the power families have invariant-cone certificates the kernel can
    test cheaply мid-trajectory; phi and piecewise are decided analytically
    before any integration starts.
    """
    if spec.family is Family.POWER_ATTRACT:
        k_in = analytic.default_k_in(spec) if k_in is None else k_in
        k_out = analytic.default_k_out(spec) if k_out is None else k_out
        return 1, k_in, k_out, 0.0
    if spec.family is Family.POWER_REPEL:
        k_in = analytic.default_k_in(spec) if k_in is None else k_in
        k_out = analytic.default_k_out(spec) if k_out is None else k_out
        return 1, k_in, k_out, analytic.out_cone_safe_limit(spec.a, k_out)
    return 0, 0.0, 0.0, 0.0


def integrate(
    spec: SystemSpec,
    s0: State,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    kernel=None,
) -> Outcome:
    """First event of the trajectory through ``s0``.

    Raises StepUnderflowError / NonFiniteError on integration failure.
    """
    x0, y0 = s0
    if not (math.isfinite(x0) and math.isfinite(y0)):
        raise InvalidStateError(f"non-finite initial state ({x0}, {y0})")
    kern = kernel or backend.get_kernel()
    code, e, pinv = _kernel_args(spec)
    delta = cfg.delta if cfg.delta is not None else -1.0
    kind, t, x, y, steps = kern.integrate_one(
        code, e, pinv, float(x0), float(y0), cfg.r_in, cfg.r_out, delta,
        cfg.t_max, cfg.h_init, cfg.tol, cfg.h_min,
    )
    if kind < 0:
        raise _ERRORS[kind]
    return Outcome(_KIND_MAP[kind], t, State(x, y), steps)


def classify(
    spec: SystemSpec,
    s0: State,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    oracle_cones: bool = True,
    k_in: float | None = None,
    k_out: float | None = None,
    kernel=None,
) -> Classification:
    """Basin membership of ``s0``: the delta-local basin when cfg.delta is
    set, the global basin otherwise.

    With ``oracle_cones`` the certified cone label is consulted first and
    integration runs only on undetermined points, terminating as soon as the
    trajectory enters a certified region.  Timed-out trajectories count as
    outside (callers concerned with bias should track them via outcomes).
    """
    local = cfg.delta is not None
    in_label = Classification.IN_LOCAL_BASIN if local else Classification.IN_BASIN

    if oracle_cones:
        sx, sy = s0
        if sx != 0.0 and sy != 0.0:
            if spec.family is Family.PIECEWISE:
                probe = State(sx, sy)
            else:
                probe = State(abs(sx), abs(sy))
            label = analytic.cone_classify(spec, probe, k_in=k_in, k_out=k_out, local=local)
            if label is analytic.ConeLabel.IN_BASIN:
                return in_label
            if label is analytic.ConeLabel.OUT_OF_BASIN:
                return Classification.OUT_OF_BASIN

    kern = kernel or backend.get_kernel()
    code, e, pinv = _kernel_args(spec)
    use_cones, ki, ko, x_limit = (
        cone_parameters(spec, k_in, k_out) if oracle_cones else (0, 0.0, 0.0, 0.0)
    )
    delta = cfg.delta if cfg.delta is not None else -1.0
    kind, _, _, _, _ = kern.integrate_one(
        code, e, pinv, float(s0[0]), float(s0[1]), cfg.r_in, cfg.r_out, delta,
        cfg.t_max, cfg.h_init, cfg.tol, cfg.h_min, use_cones, ki, ko, x_limit,
    )
    if kind < 0:
        raise _ERRORS[kind]
    if kind in (KIND_CONVERGED, KIND_CONE_IN):
        return in_label
    return Classification.OUT_OF_BASIN


def trajectory(
    spec: SystemSpec,
    s0: State,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    max_pts: int = 100_000,
    kernel=None,
):
    """Accepted states of the trajectory, for diagnostics and tests.

    Returns (outcome_kind, t_array, x_array, y_array) as Python lists; the
    last entry is the event state.
    """
    kern = kernel or backend.get_kernel()
    code, e, pinv = _kernel_args(spec)
    delta = cfg.delta if cfg.delta is not None else -1.0
    kind, ts, xs, ys = kern.trajectory(
        code, e, pinv, float(s0[0]), float(s0[1]), cfg.r_in, cfg.r_out, delta,
        cfg.t_max, cfg.h_init, cfg.tol, cfg.h_min, max_pts,
    )
    if kind < 0:
        raise _ERRORS[kind]
    return _KIND_MAP[kind], ts, xs, ys


def with_delta(cfg: IntegratorConfig, delta: float | None) -> IntegratorConfig:
    return replace(cfg, delta=delta)
