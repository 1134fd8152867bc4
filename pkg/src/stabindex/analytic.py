"""Closed-form results for the planar families: exact indices, certified
cones, invariance inner products and two-sided measure bounds.

Extended reals are plain floats; ``math.inf`` carries the infinite cases.
Conventions for when a fitted quantity is declared infinite live in the
measure module; everything here is exact arithmetic.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from .systems import Family, InvalidSpecError, InvalidStateError, State, SystemSpec, phi, pow0

ExtendedReal = float

#: Relative safety margin for the default inner cone (just above the
#: invariance threshold) and for the outer-cone x-range.
CONE_MARGIN = 1e-3

#: Default outer-cone coefficient for the repelling family, inside (0, 1/2).
DEFAULT_K_OUT = 0.25


class ConeLabel(Enum):
    IN_BASIN = "InBasin"
    OUT_OF_BASIN = "OutOfBasin"
    UNDETERMINED = "Undetermined"


def analytic_sigma(spec: SystemSpec) -> tuple[ExtendedReal, ExtendedReal]:
    """Exact (sigma, sigma_loc) at the origin for a valid spec.

    power-attract: a-1 (p*a-1 under the transform); power-repel: 1-1/a;
    phi: (+inf, -inf); piecewise: (0, 0).  For the power families the local
    index coincides with the non-local one.
    """
    if spec.family is Family.POWER_ATTRACT:
        s = spec.exponent - 1.0
        return (s, s)
    if spec.family is Family.POWER_REPEL:
        s = 1.0 - 1.0 / spec.a
        return (s, s)
    if spec.family is Family.PHI:
        return (math.inf, -math.inf)
    return (0.0, 0.0)


def a_for_target_sigma(s: float) -> SystemSpec:
    """Pick the family and exponent realizing a prescribed nonzero index.

    s > 0 -> power-attract with a = s+1; s < 0 -> power-repel with
    a = 1/(1-s).  Round-trips through analytic_sigma.
    """
    if not math.isfinite(s) or s == 0.0:
        raise InvalidSpecError(f"target index must be finite and nonzero, got {s}")
    if s > 0:
        return SystemSpec(Family.POWER_ATTRACT, a=s + 1.0)
    return SystemSpec(Family.POWER_REPEL, a=1.0 / (1.0 - s))


def k_threshold(a: float) -> float:
    """Invariance threshold (a - 1/2)/(a - 1) for the attracting family.

    Strictly greater than 1 for every a > 1; the curve y = k x^a is exactly
    invariant at k equal to the threshold and a strict trapping boundary for
    any larger k.
    """
    if not a > 1:
        raise InvalidSpecError(f"k_threshold needs a > 1, got {a}")
    return (a - 0.5) / (a - 1.0)


def default_k_in(spec: SystemSpec) -> float:
    """Inner-cone coefficient: just above the threshold for power-attract,
    1 for power-repel (the curve y = x^a itself)."""
    if spec.family is Family.POWER_ATTRACT:
        return k_threshold(spec.a) * (1.0 + CONE_MARGIN)
    if spec.family is Family.POWER_REPEL:
        return 1.0
    raise InvalidSpecError(f"no cone coefficients for family {spec.family.value}")


def default_k_out(spec: SystemSpec) -> float:
    """Outer-cone coefficient: 1 for power-attract, 1/4 for power-repel."""
    if spec.family is Family.POWER_ATTRACT:
        return 1.0
    if spec.family is Family.POWER_REPEL:
        return DEFAULT_K_OUT
    raise InvalidSpecError(f"no cone coefficients for family {spec.family.value}")


def out_cone_x_limit(a: float, k_out: float) -> float:
    """Largest x at which the outer-cone inner product stays positive:
    x0 = (a(1/2 - k)/(k(1-k)))^{1/a}.

    Positivity only forbids crossing the curve below x0; trajectories may
    still exit the region rightward past x0 and loop back to the origin, so
    x0 alone does not certify non-membership (see out_cone_safe_limit).
    """
    if not 0 < a < 1:
        raise InvalidSpecError(f"outer cone limit needs 0 < a < 1, got {a}")
    if not 0 < k_out < 0.5:
        raise InvalidSpecError(f"outer cone needs k in (0, 1/2), got {k_out}")
    return (a * (0.5 - k_out) / (k_out * (1.0 - k_out))) ** (1.0 / a)


def out_cone_safe_limit(a: float, k_out: float) -> float:
    """x-range over which a point below y = k_out x^a is certified outside
    the basin.

    Beyond this scale, below-cone starts can swing up across the nullclines
    within order-one distances and return to the origin; the swing scale
    grows like (a/k_out)^{1/a}.  The prefactor is calibrated against
    bisected basin boundaries (the true boundary dips below the quarter
    cone near x = 0.06 for a = 1/2 and x = 0.0055 for a = 1/3); the final
    halving keeps a factor of two in hand.
    """
    x0 = out_cone_x_limit(a, k_out)
    return min(x0 * (1.0 - CONE_MARGIN), 0.5 * (0.13 * a / k_out) ** (1.0 / a))


def escape_cap(a: float, x, r_out: float):
    """Height below which a below-cone point provably escapes past r_out.

    While y <= x^a/4, the growth along the flow obeys dy/dlnx <= 4 y^2, so
    y(x') <= 1/(1/y - 4 ln(x'/x)).  If that bound stays under the cone's
    minimum up to x' = r_out, the trajectory leaves through x' = r_out
    before it can turn; a sufficient condition is
    y < 1/(4 ln(r_out/x) + 4 x^{-a}).  Vectorizes over x.
    """
    lx = np.log(r_out) - np.log(x)
    return 1.0 / (4.0 * lx + 4.0 * x ** (-a))


def invariance_inner_product(spec: SystemSpec, k: float, x: float) -> float:
    """Scalar product of the flow with the outward normal on y = k x^e.

    power-attract (e = p*a or a): k x^{2e} (k(a-1) - a + 1/2), so the sign
    flips exactly at k_threshold(a).  power-repel:
    k x^{2a} (a(1/2-k) - k x^a (1-k)), positive for small x when k < 1/2.
    """
    if x <= 0:
        raise InvalidStateError(f"inner product needs x > 0, got {x}")
    a = spec.a
    if spec.family is Family.POWER_ATTRACT:
        e = spec.exponent
        return k * pow0(x, 2.0 * e) * (k * (a - 1.0) - a + 0.5)
    if spec.family is Family.POWER_REPEL:
        return k * pow0(x, 2.0 * a) * (a * (0.5 - k) - k * pow0(x, a) * (1.0 - k))
    raise InvalidSpecError(f"inner product undefined for family {spec.family.value}")


def cone_classify(
    spec: SystemSpec,
    s: State,
    k_in: float | None = None,
    k_out: float | None = None,
    local: bool = False,
) -> ConeLabel:
    """Certified basin membership from the invariant-cone picture.

    For the power families the point must lie in the open first quadrant:
    above the inner cone it is attracted, below the outer cone (within the
    certified x-range for power-repel) it is not, and the band in between is
    undetermined.  The phi family is decided everywhere off the axes:
    non-locally every point is attracted; in the local (delta) sense exactly
    the region below the guard curve is.  The piecewise basin is the open
    third quadrant.
    """
    x, y = s
    if not (math.isfinite(x) and math.isfinite(y)):
        raise InvalidStateError(f"non-finite state ({x}, {y})")
    if x == 0.0 or y == 0.0:
        raise InvalidStateError("cone classification undefined on the coordinate axes")

    if spec.family is Family.PIECEWISE:
        return ConeLabel.IN_BASIN if (x < 0 and y < 0) else ConeLabel.OUT_OF_BASIN

    if x < 0 or y < 0:
        raise InvalidStateError(f"state ({x}, {y}) outside the open first quadrant")

    if spec.family is Family.PHI:
        if not local:
            return ConeLabel.IN_BASIN
        return ConeLabel.IN_BASIN if y < phi(x) else ConeLabel.OUT_OF_BASIN

    if k_in is None:
        k_in = default_k_in(spec)
    if k_out is None:
        k_out = default_k_out(spec)

    if spec.family is Family.POWER_ATTRACT:
        if not k_in > k_threshold(spec.a):
            raise InvalidSpecError(f"inner cone needs k_in > threshold, got {k_in}")
        xa = pow0(x, spec.exponent)
        if y < k_out * xa:
            return ConeLabel.OUT_OF_BASIN
        if y > k_in * xa:
            return ConeLabel.IN_BASIN
        return ConeLabel.UNDETERMINED

    # power-repel
    xa = pow0(x, spec.a)
    if y > k_in * xa:
        return ConeLabel.IN_BASIN
    if y < k_out * xa and x < out_cone_safe_limit(spec.a, k_out):
        return ConeLabel.OUT_OF_BASIN
    return ConeLabel.UNDETERMINED


def lyapunov_V(s: State) -> float:
    """V(x, y) = x/y, strictly increasing along phi-family trajectories."""
    x, y = s
    if y <= 0 or x < 0:
        raise InvalidStateError(f"V needs x >= 0 and y > 0, got ({x}, {y})")
    return x / y


def lyapunov_V_dot(s: State) -> float:
    """Orbital derivative of V along the phi family: x phi(x) / (2y) > 0
    off the axes."""
    x, y = s
    if y <= 0 or x < 0:
        raise InvalidStateError(f"V_dot needs x >= 0 and y > 0, got ({x}, {y})")
    return x * phi(x) / (2.0 * y)


def sigma_eps_bounds(
    spec: SystemSpec,
    eps: float,
    k_in: float | None = None,
    k_out: float | None = None,
) -> tuple[float, float]:
    """Rigorous two-sided bounds on the basin fraction of the square
    [0, eps]^2 (full square [-eps, eps]^2 for the piecewise family).

    power-attract: the complement fraction lies between eps^{e-1}/(1+e) and
    k_in eps^{e-1}/(1+e) with e the effective exponent.  power-repel: the
    fraction lies between (a/(1+a)) eps^{1/a-1} and the same expression
    scaled by k_out^{-1/a}; the upper value comes from integrating the outer
    cone with the same template and is only certified while the whole square
    sits inside the cone's x-range.  piecewise: exactly 1/4.
    """
    if not (math.isfinite(eps) and eps > 0):
        raise InvalidStateError(f"eps must be positive and finite, got {eps}")

    if spec.family is Family.PIECEWISE:
        return (0.25, 0.25)

    if spec.family is Family.POWER_ATTRACT:
        if k_in is None:
            k_in = default_k_in(spec)
        e = spec.exponent
        scale = eps ** (e - 1.0) / (1.0 + e)
        if k_in * eps**e > eps:
            raise InvalidStateError(
                f"inner cone leaves the square at eps={eps} (k_in*eps^e > eps)"
            )
        return (1.0 - k_in * scale, 1.0 - scale)

    if spec.family is Family.POWER_REPEL:
        if k_out is None:
            k_out = default_k_out(spec)
        a = spec.a
        if eps > out_cone_x_limit(a, k_out):
            raise InvalidStateError(
                f"eps={eps} beyond the certified outer-cone range for a={a}"
            )
        lower = (a / (1.0 + a)) * eps ** (1.0 / a - 1.0)
        return (lower, lower * k_out ** (-1.0 / a))

    raise InvalidSpecError("no closed-form measure bounds for the phi family")


def stability_class(spec: SystemSpec) -> str:
    """Stability classification read off the sign of the exact index.

    A positive index corresponds to essential asymptotic stability, an
    index above -inf to fragmentary asymptotic stability; this mirrors the
    attract/repel corollaries and is a sign-based report, not an
    independent construction of the density set.
    """
    sigma, _ = analytic_sigma(spec)
    if sigma > 0:
        return "e.a.s."
    if sigma > -math.inf:
        return "f.a.s. (not e.a.s.)"
    return "not f.a.s."


def extended_sub(plus: ExtendedReal, minus: ExtendedReal) -> ExtendedReal:
    """sigma_plus - sigma_minus with infinities dominating.

    An infinite sigma_minus forces -inf regardless of sigma_plus (the
    all-degenerate case); inf - inf with both sides genuinely infinite and
    equal signs cannot arise from fraction data and is rejected.
    """
    if math.isinf(minus):
        if minus > 0:
            return -math.inf
        return math.inf
    if math.isinf(plus):
        return plus
    return plus - minus
