"""Planar ODE families with a non-hyperbolic equilibrium at the origin.

Four families are defined on the closed first quadrant and extended to the
whole plane by mirroring (the piecewise-linear family is defined on the full
plane from the start):

* ``power-attract`` (exponent ``a > 1``):  dx = x(x^a - y),  dy = y(x^a/2 - y)
* ``power-repel``   (``0 < a < 1``):       dx = x(x^a/2 - y), dy = y^2(x^a - y)
* ``phi``:                                 dx = x(y - g(x)/2), dy = y(y - g(x))
  with the guard curve g(x) = (2x+1)exp(-1/x), g(0) = 0
* ``piecewise``:                           dx = |x|, dy = |y|

The attracting family additionally supports the coordinate change
``(x, y) = (u^p, v)``, which turns the cone exponent into ``p*a`` while
leaving the quadrant structure intact.

Powers ``x**a`` mean exp(a ln x) for x > 0 and are defined as 0 at x = 0, so
non-integer exponents are supported and both axes stay invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple


class Family(str, Enum):
    POWER_ATTRACT = "power-attract"
    POWER_REPEL = "power-repel"
    PHI = "phi"
    PIECEWISE = "piecewise"


class State(NamedTuple):
    x: float
    y: float


class Velocity(NamedTuple):
    dx: float
    dy: float


class InvalidSpecError(ValueError):
    """Family parameters violate the admissible ranges."""


class InvalidStateError(ValueError):
    """State has non-finite coordinates or lies outside the required domain."""


_PARAMETRIC = (Family.POWER_ATTRACT, Family.POWER_REPEL)


@dataclass(frozen=True)
class SystemSpec:
    """Which ODE family to run, plus its parameters.

    ``a`` is required for the two power families (a > 1 attracting,
    0 < a < 1 repelling).  ``p`` is the optional transform power and is only
    admissible for the attracting family, with p > 0 and p*a > 1.
    """

    family: Family
    a: float | None = None
    p: float | None = None

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if fam in _PARAMETRIC:
            if self.a is None or not math.isfinite(self.a):
                raise InvalidSpecError(f"{fam.value} requires a finite exponent a")
            if fam is Family.POWER_ATTRACT and not self.a > 1:
                raise InvalidSpecError(f"power-attract requires a > 1, got a={self.a}")
            if fam is Family.POWER_REPEL and not 0 < self.a < 1:
                raise InvalidSpecError(f"power-repel requires 0 < a < 1, got a={self.a}")
        elif self.a is not None:
            raise InvalidSpecError(f"{fam.value} takes no exponent parameter")
        if self.p is not None:
            if fam is not Family.POWER_ATTRACT:
                raise InvalidSpecError("transform power p only applies to power-attract")
            if not (math.isfinite(self.p) and self.p > 0 and self.p * self.a > 1):
                raise InvalidSpecError(f"need p > 0 and p*a > 1, got p={self.p}, a={self.a}")

    @property
    def exponent(self) -> float | None:
        """Effective cone exponent: p*a under the transform, a otherwise."""
        if self.a is None:
            return None
        return self.a * self.p if self.p is not None else self.a

    def to_entry(self) -> str:
        """One-line plain-text form, e.g. ``power-attract a=2.0 p=2.0``."""
        parts = [self.family.value]
        if self.a is not None:
            parts.append(f"a={self.a!r}")
        if self.p is not None:
            parts.append(f"p={self.p!r}")
        return " ".join(parts)

    @classmethod
    def from_entry(cls, text: str) -> "SystemSpec":
        tokens = text.split()
        if not tokens:
            raise InvalidSpecError("empty system entry")
        try:
            family = Family(tokens[0])
        except ValueError:
            raise InvalidSpecError(f"unknown family {tokens[0]!r}") from None
        kwargs: dict[str, float] = {}
        for tok in tokens[1:]:
            key, sep, val = tok.partition("=")
            if not sep or key not in ("a", "p"):
                raise InvalidSpecError(f"bad token {tok!r} in system entry")
            kwargs[key] = float(val)
        return cls(family, **kwargs)


def _check_finite(s: State) -> State:
    x, y = s
    if not (math.isfinite(x) and math.isfinite(y)):
        raise InvalidStateError(f"non-finite state ({x}, {y})")
    return State(float(x), float(y))


def pow0(x: float, a: float) -> float:
    """x**a for x > 0 (exp(a ln x)), 0 at x = 0."""
    return math.pow(x, a) if x > 0.0 else 0.0


def phi(x: float) -> float:
    """Guard curve (2x+1)exp(-1/x) for x > 0, 0 at x = 0.

    Nonnegative and strictly increasing; flat to all orders at the origin.
    Hardware underflow of exp(-1/x) to 0 for tiny x is accepted since it
    matches the continuous limit.
    """
    if x < 0:
        raise InvalidStateError(f"phi needs x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    return (2.0 * x + 1.0) * math.exp(-1.0 / x)


def eval_quadrant(spec: SystemSpec, s: State) -> Velocity:
    """Right-hand side on the closed first quadrant (x, y >= 0)."""
    x, y = _check_finite(s)
    if x < 0 or y < 0:
        raise InvalidStateError(f"state ({x}, {y}) outside the closed first quadrant")
    if spec.family is Family.POWER_ATTRACT:
        if spec.p is not None:
            return eval_transformed(spec, s)
        xa = pow0(x, spec.a)
        return Velocity(x * (xa - y), y * (0.5 * xa - y))
    if spec.family is Family.POWER_REPEL:
        xa = pow0(x, spec.a)
        return Velocity(x * (0.5 * xa - y), y * y * (xa - y))
    if spec.family is Family.PHI:
        g = phi(x)
        return Velocity(x * (y - 0.5 * g), y * (y - g))
    # piecewise: first-quadrant law dx = x, dy = y
    return Velocity(x, y)


def eval_transformed(spec: SystemSpec, s: State) -> Velocity:
    """Pullback of the attracting family under (x, y) = (u^p, v).

    du = (1/p) u (u^{pa} - v),  dv = v (u^{pa}/2 - v).
    """
    if spec.family is not Family.POWER_ATTRACT or spec.p is None:
        raise InvalidSpecError("transform evaluation requires power-attract with p set")
    u, v = _check_finite(s)
    if u < 0:
        raise InvalidStateError(f"transformed coordinate u must be >= 0, got {u}")
    ue = pow0(u, spec.a * spec.p)
    return Velocity(u * (ue - v) / spec.p, v * (0.5 * ue - v))


def eval_plane(spec: SystemSpec, s: State) -> Velocity:
    """Extension of the quadrant field to the whole plane.

    The piecewise family follows its own quadrant-by-quadrant law, which
    collapses to (|x|, |y|); every other family is mirrored through both
    axes (evaluate at (|x|, |y|), re-apply the coordinate signs), so the
    axes stay invariant in all four quadrants.
    """
    x, y = _check_finite(s)
    if spec.family is Family.PIECEWISE:
        return Velocity(abs(x), abs(y))
    dq = eval_quadrant(spec, State(abs(x), abs(y)))
    sx = math.copysign(1.0, x) if x != 0 else 0.0
    sy = math.copysign(1.0, y) if y != 0 else 0.0
    return Velocity(sx * dq.dx, sy * dq.dy)
