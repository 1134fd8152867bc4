"""Pure-Python integration kernel: Dormand-Prince 5(4) with event detection.

Fallback for the compiled extension in ``_kernel.pyx``; both implement the
same algorithm with the same arithmetic ordering so results agree.  The
kernel works on raw floats and family codes, never on spec objects.

Events on the trajectory norm (convergence radius, delta tube, escape
radius) are located by re-stepping from the last accepted state with a
bracketed step size until the norm sits within 10*tol of the threshold on
the crossed side.  A convergence event additionally requires the radial
derivative to be negative, so grazing passes through the inner ball do not
count.  When cone checking is enabled, entering a certified cone region
terminates the trajectory immediately (label decided, no event location
needed).
"""

from __future__ import annotations

import math

COMPILED = False

# family codes
CODE_ATTRACT = 1
CODE_REPEL = 2
CODE_PHI = 3
CODE_PIECEWISE = 4

# outcome kinds; negative values are integration failures
KIND_CONVERGED = 0
KIND_ESCAPED = 1
KIND_LEFT_DELTA = 2
KIND_TIMED_OUT = 3
KIND_CONE_IN = 4
KIND_CONE_OUT = 5
ERR_STEP_UNDERFLOW = -1
ERR_NONFINITE = -2
ERR_MAX_STEPS = -3

_MAX_STEPS = 20_000_000

# Dormand-Prince 5(4) tableau (autonomous form)
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)


def _rhs(code, e, pinv, x, y):
    ax = -x if x < 0 else x
    ay = -y if y < 0 else y
    if code == CODE_PIECEWISE:
        return ax, ay
    if code == CODE_ATTRACT:
        xa = math.pow(ax, e) if ax > 0.0 else 0.0
        dx = pinv * ax * (xa - ay)
        dy = ay * (0.5 * xa - ay)
    elif code == CODE_REPEL:
        xa = math.pow(ax, e) if ax > 0.0 else 0.0
        dx = ax * (0.5 * xa - ay)
        dy = ay * ay * (xa - ay)
    else:  # CODE_PHI
        g = (2.0 * ax + 1.0) * math.exp(-1.0 / ax) if ax > 0.0 else 0.0
        dx = ax * (ay - 0.5 * g)
        dy = ay * (ay - g)
    if x < 0:
        dx = -dx
    if y < 0:
        dy = -dy
    return dx, dy


def _cone(code, e, k_in, k_out, x_limit, r_out, x, y):
    """Certified cone label at (x, y): 1 in-basin, -1 out, 0 undetermined.

    Evaluated on the reflected point; only meaningful for the power
    families (callers pass use_cones=0 otherwise).  Below the repelling
    outer cone a point is also certified out when it sits under the escape
    cap 1/(4 ln(r_out/x) + 4/x^e): its height provably stays below the cone
    until it crosses r_out.
    """
    ax = -x if x < 0 else x
    ay = -y if y < 0 else y
    if ax <= 0.0 or ay <= 0.0:
        return 0
    xa = math.pow(ax, e)
    if code == CODE_ATTRACT:
        if ay < xa:
            return -1
        if ay > k_in * xa:
            return 1
        return 0
    if code == CODE_REPEL:
        if ay > xa:
            return 1
        if ay < k_out * xa:
            if ax < x_limit:
                return -1
            denom = 4.0 * (math.log(r_out) - math.log(ax)) + 4.0 / xa
            if denom > 0.0 and ay * denom < 1.0:
                return -1
        return 0
    return 0


def _step(code, e, pinv, x, y, k1x, k1y, h):
    """One Dormand-Prince step; returns (x5, y5, err_x, err_y, k7x, k7y)."""
    k2x, k2y = _rhs(code, e, pinv, x + h * (_A21 * k1x), y + h * (_A21 * k1y))
    k3x, k3y = _rhs(
        code, e, pinv, x + h * (_A31 * k1x + _A32 * k2x), y + h * (_A31 * k1y + _A32 * k2y)
    )
    k4x, k4y = _rhs(
        code,
        e,
        pinv,
        x + h * (_A41 * k1x + _A42 * k2x + _A43 * k3x),
        y + h * (_A41 * k1y + _A42 * k2y + _A43 * k3y),
    )
    k5x, k5y = _rhs(
        code,
        e,
        pinv,
        x + h * (_A51 * k1x + _A52 * k2x + _A53 * k3x + _A54 * k4x),
        y + h * (_A51 * k1y + _A52 * k2y + _A53 * k3y + _A54 * k4y),
    )
    k6x, k6y = _rhs(
        code,
        e,
        pinv,
        x + h * (_A61 * k1x + _A62 * k2x + _A63 * k3x + _A64 * k4x + _A65 * k5x),
        y + h * (_A61 * k1y + _A62 * k2y + _A63 * k3y + _A64 * k4y + _A65 * k5y),
    )
    x5 = x + h * (_B1 * k1x + _B3 * k3x + _B4 * k4x + _B5 * k5x + _B6 * k6x)
    y5 = y + h * (_B1 * k1y + _B3 * k3y + _B4 * k4y + _B5 * k5y + _B6 * k6y)
    k7x, k7y = _rhs(code, e, pinv, x5, y5)
    err_x = h * (_E1 * k1x + _E3 * k3x + _E4 * k4x + _E5 * k5x + _E6 * k6x + _E7 * k7x)
    err_y = h * (_E1 * k1y + _E3 * k3y + _E4 * k4y + _E5 * k5y + _E6 * k6y + _E7 * k7y)
    return x5, y5, err_x, err_y, k7x, k7y


def _locate(code, e, pinv, x, y, k1x, k1y, h_hi, thr, g0, g_hi, x_hi, y_hi, tol):
    """Shrink the step until the norm lands within 10*tol of ``thr`` on the
    crossed side; returns (h, x, y) of the located event state."""
    h_lo = 0.0
    g_lo = g0
    for _ in range(64):
        if abs(g_hi) <= 10.0 * tol:
            break
        span = h_hi - h_lo
        denom = g_hi - g_lo
        h_mid = h_hi - g_hi * span / denom if denom != 0.0 else h_lo + 0.5 * span
        if not (h_lo + 1e-4 * span < h_mid < h_hi - 1e-4 * span):
            h_mid = h_lo + 0.5 * span
        xm, ym, _, _, _, _ = _step(code, e, pinv, x, y, k1x, k1y, h_mid)
        g_mid = math.sqrt(xm * xm + ym * ym) - thr
        if g_mid != 0.0 and (g_mid > 0.0) == (g0 > 0.0):
            h_lo, g_lo = h_mid, g_mid
        else:
            h_hi, g_hi, x_hi, y_hi = h_mid, g_mid, xm, ym
    return h_hi, x_hi, y_hi


def integrate_one(
    code,
    e,
    pinv,
    x0,
    y0,
    r_in,
    r_out,
    delta,
    t_max,
    h_init,
    tol,
    h_min,
    use_cones=0,
    k_in=0.0,
    k_out=0.0,
    x_limit=0.0,
):
    """Advance one trajectory to its first event.

    Returns (kind, t, x, y, steps).  ``delta <= 0`` disables the tube event;
    negative kinds signal integration failures.
    """
    x, y = x0, y0
    if not (math.isfinite(x) and math.isfinite(y)):
        return ERR_NONFINITE, 0.0, x, y, 0
    n = math.sqrt(x * x + y * y)
    if delta > 0.0 and n >= delta:
        return KIND_LEFT_DELTA, 0.0, x, y, 0
    if n >= r_out:
        return KIND_ESCAPED, 0.0, x, y, 0
    if n <= r_in:
        dx, dy = _rhs(code, e, pinv, x, y)
        if x * dx + y * dy <= 0.0:
            return KIND_CONVERGED, 0.0, x, y, 0
    if use_cones:
        c = _cone(code, e, k_in, k_out, x_limit, r_out, x, y)
        if c != 0:
            return (KIND_CONE_IN if c > 0 else KIND_CONE_OUT), 0.0, x, y, 0

    t = 0.0
    h = h_init
    k1x, k1y = _rhs(code, e, pinv, x, y)
    steps = 0
    while True:
        rem = t_max - t
        if rem <= h_min:
            return KIND_TIMED_OUT, t, x, y, steps
        if steps >= _MAX_STEPS:
            return ERR_MAX_STEPS, t, x, y, steps
        if h > rem:
            h = rem
        x5, y5, err_x, err_y, k7x, k7y = _step(code, e, pinv, x, y, k1x, k1y, h)
        steps += 1
        if not (math.isfinite(x5) and math.isfinite(y5)):
            h *= 0.2
            if h < h_min:
                return ERR_NONFINITE, t, x, y, steps
            continue
        sc_x = tol + tol * max(abs(x), abs(x5))
        sc_y = tol + tol * max(abs(y), abs(y5))
        rx = err_x / sc_x
        ry = err_y / sc_y
        en = math.sqrt(0.5 * (rx * rx + ry * ry))
        if en > 1.0:
            h *= max(0.2, 0.9 * en**-0.2)
            if h < h_min:
                return ERR_STEP_UNDERFLOW, t, x, y, steps
            continue

        n0 = math.sqrt(x * x + y * y)
        n1 = math.sqrt(x5 * x5 + y5 * y5)
        if n0 > r_in and n1 <= r_in:
            h_ev, xe, ye = _locate(
                code, e, pinv, x, y, k1x, k1y, h, r_in, n0 - r_in, n1 - r_in, x5, y5, tol
            )
            dx, dy = _rhs(code, e, pinv, xe, ye)
            if xe * dx + ye * dy < 0.0:
                return KIND_CONVERGED, t + h_ev, xe, ye, steps
            # grazing pass: resume from the located state
            t += h_ev
            x, y = xe, ye
            k1x, k1y = dx, dy
            h = max(h_min, 0.25 * h)
            continue
        if delta > 0.0 and n0 < delta and n1 >= delta:
            h_ev, xe, ye = _locate(
                code, e, pinv, x, y, k1x, k1y, h, delta, n0 - delta, n1 - delta, x5, y5, tol
            )
            return KIND_LEFT_DELTA, t + h_ev, xe, ye, steps
        if n0 < r_out and n1 >= r_out:
            h_ev, xe, ye = _locate(
                code, e, pinv, x, y, k1x, k1y, h, r_out, n0 - r_out, n1 - r_out, x5, y5, tol
            )
            return KIND_ESCAPED, t + h_ev, xe, ye, steps

        t += h
        x, y = x5, y5
        k1x, k1y = k7x, k7y
        if use_cones:
            c = _cone(code, e, k_in, k_out, x_limit, r_out, x, y)
            if c != 0:
                return (KIND_CONE_IN if c > 0 else KIND_CONE_OUT), t, x, y, steps
        h *= max(0.2, min(5.0, 0.9 * en**-0.2)) if en > 0.0 else 5.0


def classify_batch(
    code,
    e,
    pinv,
    xs,
    ys,
    kinds,
    ts,
    r_in,
    r_out,
    delta,
    t_max,
    h_init,
    tol,
    h_min,
    use_cones,
    k_in,
    k_out,
    x_limit,
    start,
    stop,
):
    """Fill kinds[start:stop] and ts[start:stop] for initial states
    (xs[i], ys[i]); arrays are float64/int8 buffers."""
    for i in range(start, stop):
        kind, t, _, _, _ = integrate_one(
            code,
            e,
            pinv,
            xs[i],
            ys[i],
            r_in,
            r_out,
            delta,
            t_max,
            h_init,
            tol,
            h_min,
            use_cones,
            k_in,
            k_out,
            x_limit,
        )
        kinds[i] = kind
        ts[i] = t


def trajectory(
    code, e, pinv, x0, y0, r_in, r_out, delta, t_max, h_init, tol, h_min, max_pts=100_000
):
    """Like integrate_one but records every accepted state.

    Returns (kind, ts, xs, ys) as Python lists including the initial state
    and the final event state.  No cone termination.
    """
    out_t, out_x, out_y = [0.0], [x0], [y0]

    x, y = x0, y0
    if not (math.isfinite(x) and math.isfinite(y)):
        return ERR_NONFINITE, out_t, out_x, out_y
    n = math.sqrt(x * x + y * y)
    if delta > 0.0 and n >= delta:
        return KIND_LEFT_DELTA, out_t, out_x, out_y
    if n >= r_out:
        return KIND_ESCAPED, out_t, out_x, out_y
    if n <= r_in:
        dx, dy = _rhs(code, e, pinv, x, y)
        if x * dx + y * dy <= 0.0:
            return KIND_CONVERGED, out_t, out_x, out_y

    t = 0.0
    h = h_init
    k1x, k1y = _rhs(code, e, pinv, x, y)
    while True:
        rem = t_max - t
        if rem <= h_min or len(out_t) >= max_pts:
            return KIND_TIMED_OUT, out_t, out_x, out_y
        if h > rem:
            h = rem
        x5, y5, err_x, err_y, k7x, k7y = _step(code, e, pinv, x, y, k1x, k1y, h)
        if not (math.isfinite(x5) and math.isfinite(y5)):
            h *= 0.2
            if h < h_min:
                return ERR_NONFINITE, out_t, out_x, out_y
            continue
        sc_x = tol + tol * max(abs(x), abs(x5))
        sc_y = tol + tol * max(abs(y), abs(y5))
        rx = err_x / sc_x
        ry = err_y / sc_y
        en = math.sqrt(0.5 * (rx * rx + ry * ry))
        if en > 1.0:
            h *= max(0.2, 0.9 * en**-0.2)
            if h < h_min:
                return ERR_STEP_UNDERFLOW, out_t, out_x, out_y
            continue

        n0 = math.sqrt(x * x + y * y)
        n1 = math.sqrt(x5 * x5 + y5 * y5)
        kind = -10
        if n0 > r_in and n1 <= r_in:
            h_ev, xe, ye = _locate(
                code, e, pinv, x, y, k1x, k1y, h, r_in, n0 - r_in, n1 - r_in, x5, y5, tol
            )
            dx, dy = _rhs(code, e, pinv, xe, ye)
            if xe * dx + ye * dy < 0.0:
                kind = KIND_CONVERGED
            else:
                t += h_ev
                x, y = xe, ye
                k1x, k1y = dx, dy
                h = max(h_min, 0.25 * h)
                out_t.append(t)
                out_x.append(x)
                out_y.append(y)
                continue
        elif delta > 0.0 and n0 < delta and n1 >= delta:
            h_ev, xe, ye = _locate(
                code, e, pinv, x, y, k1x, k1y, h, delta, n0 - delta, n1 - delta, x5, y5, tol
            )
            kind = KIND_LEFT_DELTA
        elif n0 < r_out and n1 >= r_out:
            h_ev, xe, ye = _locate(
                code, e, pinv, x, y, k1x, k1y, h, r_out, n0 - r_out, n1 - r_out, x5, y5, tol
            )
            kind = KIND_ESCAPED
        if kind >= 0:
            out_t.append(t + h_ev)
            out_x.append(xe)
            out_y.append(ye)
            return kind, out_t, out_x, out_y

        t += h
        x, y = x5, y5
        k1x, k1y = k7x, k7y
        out_t.append(t)
        out_x.append(x)
        out_y.append(y)
        h *= max(0.2, min(5.0, 0.9 * en**-0.2)) if en > 0.0 else 5.0
