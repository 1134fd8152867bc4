# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled integration kernel: Dormand-Prince 5(4) with event detection.

Mirrors ``_kernel_py`` statement for statement (same arithmetic ordering)
so the two backends produce matching results; see that module for the
algorithm notes.  ``classify_batch`` releases the GIL so sampling threads
run in parallel.
"""

from libc.math cimport exp, fabs, isfinite, log, pow, sqrt

COMPILED = True

CODE_ATTRACT = 1
CODE_REPEL = 2
CODE_PHI = 3
CODE_PIECEWISE = 4

KIND_CONVERGED = 0
KIND_ESCAPED = 1
KIND_LEFT_DELTA = 2
KIND_TIMED_OUT = 3
KIND_CONE_IN = 4
KIND_CONE_OUT = 5
ERR_STEP_UNDERFLOW = -1
ERR_NONFINITE = -2
ERR_MAX_STEPS = -3

cdef enum:
    C_CONVERGED = 0
    C_ESCAPED = 1
    C_LEFT_DELTA = 2
    C_TIMED_OUT = 3
    C_CONE_IN = 4
    C_CONE_OUT = 5
    C_ERR_UNDERFLOW = -1
    C_ERR_NONFINITE = -2
    C_ERR_MAX_STEPS = -3
    MAX_STEPS = 20000000

# Dormand-Prince 5(4) tableau; same double values as _kernel_py
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0
cdef double A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0
cdef double A42 = -56.0 / 15.0
cdef double A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0
cdef double A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0
cdef double A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0
cdef double A62 = -355.0 / 33.0
cdef double A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0
cdef double A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0
cdef double B3 = 500.0 / 1113.0
cdef double B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0
cdef double B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0
cdef double E3 = -71.0 / 16695.0
cdef double E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0
cdef double E6 = 22.0 / 525.0
cdef double E7 = -1.0 / 40.0


cdef struct StepOut:
    double x5
    double y5
    double err_x
    double err_y
    double k7x
    double k7y


cdef inline void _rhs(int code, double e, double pinv, double x, double y,
                      double* dx, double* dy) nogil:
    cdef double ax = -x if x < 0 else x
    cdef double ay = -y if y < 0 else y
    cdef double xa, g, ddx, ddy
    if code == 4:
        dx[0] = ax
        dy[0] = ay
        return
    if code == 1:
        xa = pow(ax, e) if ax > 0.0 else 0.0
        ddx = pinv * ax * (xa - ay)
        ddy = ay * (0.5 * xa - ay)
    elif code == 2:
        xa = pow(ax, e) if ax > 0.0 else 0.0
        ddx = ax * (0.5 * xa - ay)
        ddy = ay * ay * (xa - ay)
    else:
        g = (2.0 * ax + 1.0) * exp(-1.0 / ax) if ax > 0.0 else 0.0
        ddx = ax * (ay - 0.5 * g)
        ddy = ay * (ay - g)
    if x < 0:
        ddx = -ddx
    if y < 0:
        ddy = -ddy
    dx[0] = ddx
    dy[0] = ddy


cdef inline int _cone(int code, double e, double k_in, double k_out,
                      double x_limit, double r_out, double x, double y) nogil:
    cdef double ax = -x if x < 0 else x
    cdef double ay = -y if y < 0 else y
    cdef double xa, denom
    if ax <= 0.0 or ay <= 0.0:
        return 0
    xa = pow(ax, e)
    if code == 1:
        if ay < xa:
            return -1
        if ay > k_in * xa:
            return 1
        return 0
    if code == 2:
        if ay > xa:
            return 1
        if ay < k_out * xa:
            if ax < x_limit:
                return -1
            denom = 4.0 * (log(r_out) - log(ax)) + 4.0 / xa
            if denom > 0.0 and ay * denom < 1.0:
                return -1
        return 0
    return 0


cdef inline void _step(int code, double e, double pinv, double x, double y,
                       double k1x, double k1y, double h, StepOut* out) nogil:
    cdef double k2x, k2y, k3x, k3y, k4x, k4y, k5x, k5y, k6x, k6y, k7x, k7y
    _rhs(code, e, pinv, x + h * (A21 * k1x), y + h * (A21 * k1y), &k2x, &k2y)
    _rhs(code, e, pinv,
         x + h * (A31 * k1x + A32 * k2x),
         y + h * (A31 * k1y + A32 * k2y), &k3x, &k3y)
    _rhs(code, e, pinv,
         x + h * (A41 * k1x + A42 * k2x + A43 * k3x),
         y + h * (A41 * k1y + A42 * k2y + A43 * k3y), &k4x, &k4y)
    _rhs(code, e, pinv,
         x + h * (A51 * k1x + A52 * k2x + A53 * k3x + A54 * k4x),
         y + h * (A51 * k1y + A52 * k2y + A53 * k3y + A54 * k4y), &k5x, &k5y)
    _rhs(code, e, pinv,
         x + h * (A61 * k1x + A62 * k2x + A63 * k3x + A64 * k4x + A65 * k5x),
         y + h * (A61 * k1y + A62 * k2y + A63 * k3y + A64 * k4y + A65 * k5y), &k6x, &k6y)
    out.x5 = x + h * (B1 * k1x + B3 * k3x + B4 * k4x + B5 * k5x + B6 * k6x)
    out.y5 = y + h * (B1 * k1y + B3 * k3y + B4 * k4y + B5 * k5y + B6 * k6y)
    _rhs(code, e, pinv, out.x5, out.y5, &k7x, &k7y)
    out.err_x = h * (E1 * k1x + E3 * k3x + E4 * k4x + E5 * k5x + E6 * k6x + E7 * k7x)
    out.err_y = h * (E1 * k1y + E3 * k3y + E4 * k4y + E5 * k5y + E6 * k6y + E7 * k7y)
    out.k7x = k7x
    out.k7y = k7y


cdef inline double _locate(int code, double e, double pinv, double x, double y,
                           double k1x, double k1y, double h_hi, double thr,
                           double g0, double g_hi, double* xe, double* ye,
                           double tol) nogil:
    cdef double h_lo = 0.0
    cdef double g_lo = g0
    cdef double x_hi = xe[0]
    cdef double y_hi = ye[0]
    cdef double span, denom, h_mid, g_mid
    cdef StepOut st
    cdef int i
    for i in range(64):
        if fabs(g_hi) <= 10.0 * tol:
            break
        span = h_hi - h_lo
        denom = g_hi - g_lo
        h_mid = h_hi - g_hi * span / denom if denom != 0.0 else h_lo + 0.5 * span
        if not (h_lo + 1e-4 * span < h_mid < h_hi - 1e-4 * span):
            h_mid = h_lo + 0.5 * span
        _step(code, e, pinv, x, y, k1x, k1y, h_mid, &st)
        g_mid = sqrt(st.x5 * st.x5 + st.y5 * st.y5) - thr
        if g_mid != 0.0 and (g_mid > 0.0) == (g0 > 0.0):
            h_lo = h_mid
            g_lo = g_mid
        else:
            h_hi = h_mid
            g_hi = g_mid
            x_hi = st.x5
            y_hi = st.y5
    xe[0] = x_hi
    ye[0] = y_hi
    return h_hi


cdef int _integrate(int code, double e, double pinv, double x0, double y0,
                    double r_in, double r_out, double delta, double t_max,
                    double h_init, double tol, double h_min, int use_cones,
                    double k_in, double k_out, double x_limit,
                    double* t_out, double* x_out, double* y_out,
                    long* steps_out) nogil:
    cdef double x = x0
    cdef double y = y0
    cdef double t = 0.0
    cdef double h, n, n0, n1, rem, dx, dy, sc_x, sc_y, rx, ry, en, fac
    cdef double h_ev, xe, ye, m0, m1
    cdef double k1x, k1y
    cdef long steps = 0
    cdef int c
    cdef StepOut st

    t_out[0] = 0.0
    x_out[0] = x
    y_out[0] = y
    steps_out[0] = 0
    if not (isfinite(x) and isfinite(y)):
        return C_ERR_NONFINITE
    n = sqrt(x * x + y * y)
    if delta > 0.0 and n >= delta:
        return C_LEFT_DELTA
    if n >= r_out:
        return C_ESCAPED
    if n <= r_in:
        _rhs(code, e, pinv, x, y, &dx, &dy)
        if x * dx + y * dy <= 0.0:
            return C_CONVERGED
    if use_cones:
        c = _cone(code, e, k_in, k_out, x_limit, r_out, x, y)
        if c != 0:
            return C_CONE_IN if c > 0 else C_CONE_OUT

    h = h_init
    _rhs(code, e, pinv, x, y, &k1x, &k1y)
    while True:
        rem = t_max - t
        if rem <= h_min:
            t_out[0] = t
            x_out[0] = x
            y_out[0] = y
            steps_out[0] = steps
            return C_TIMED_OUT
        if steps >= MAX_STEPS:
            t_out[0] = t
            x_out[0] = x
            y_out[0] = y
            steps_out[0] = steps
            return C_ERR_MAX_STEPS
        if h > rem:
            h = rem
        _step(code, e, pinv, x, y, k1x, k1y, h, &st)
        steps += 1
        if not (isfinite(st.x5) and isfinite(st.y5)):
            h *= 0.2
            if h < h_min:
                t_out[0] = t
                x_out[0] = x
                y_out[0] = y
                steps_out[0] = steps
                return C_ERR_NONFINITE
            continue
        m0 = -x if x < 0 else x
        m1 = -st.x5 if st.x5 < 0 else st.x5
        sc_x = tol + tol * (m0 if m0 > m1 else m1)
        m0 = -y if y < 0 else y
        m1 = -st.y5 if st.y5 < 0 else st.y5
        sc_y = tol + tol * (m0 if m0 > m1 else m1)
        rx = st.err_x / sc_x
        ry = st.err_y / sc_y
        en = sqrt(0.5 * (rx * rx + ry * ry))
        if en > 1.0:
            fac = 0.9 * pow(en, -0.2)
            if fac < 0.2:
                fac = 0.2
            h *= fac
            if h < h_min:
                t_out[0] = t
                x_out[0] = x
                y_out[0] = y
                steps_out[0] = steps
                return C_ERR_UNDERFLOW
            continue

        n0 = sqrt(x * x + y * y)
        n1 = sqrt(st.x5 * st.x5 + st.y5 * st.y5)
        if n0 > r_in and n1 <= r_in:
            xe = st.x5
            ye = st.y5
            h_ev = _locate(code, e, pinv, x, y, k1x, k1y, h, r_in,
                           n0 - r_in, n1 - r_in, &xe, &ye, tol)
            _rhs(code, e, pinv, xe, ye, &dx, &dy)
            if xe * dx + ye * dy < 0.0:
                t_out[0] = t + h_ev
                x_out[0] = xe
                y_out[0] = ye
                steps_out[0] = steps
                return C_CONVERGED
            t += h_ev
            x = xe
            y = ye
            k1x = dx
            k1y = dy
            h = 0.25 * h
            if h < h_min:
                h = h_min
            continue
        if delta > 0.0 and n0 < delta and n1 >= delta:
            xe = st.x5
            ye = st.y5
            h_ev = _locate(code, e, pinv, x, y, k1x, k1y, h, delta,
                           n0 - delta, n1 - delta, &xe, &ye, tol)
            t_out[0] = t + h_ev
            x_out[0] = xe
            y_out[0] = ye
            steps_out[0] = steps
            return C_LEFT_DELTA
        if n0 < r_out and n1 >= r_out:
            xe = st.x5
            ye = st.y5
            h_ev = _locate(code, e, pinv, x, y, k1x, k1y, h, r_out,
                           n0 - r_out, n1 - r_out, &xe, &ye, tol)
            t_out[0] = t + h_ev
            x_out[0] = xe
            y_out[0] = ye
            steps_out[0] = steps
            return C_ESCAPED

        t += h
        x = st.x5
        y = st.y5
        k1x = st.k7x
        k1y = st.k7y
        if use_cones:
            c = _cone(code, e, k_in, k_out, x_limit, r_out, x, y)
            if c != 0:
                t_out[0] = t
                x_out[0] = x
                y_out[0] = y
                steps_out[0] = steps
                return C_CONE_IN if c > 0 else C_CONE_OUT
        if en > 0.0:
            fac = 0.9 * pow(en, -0.2)
            if fac < 0.2:
                fac = 0.2
            elif fac > 5.0:
                fac = 5.0
        else:
            fac = 5.0
        h *= fac


def integrate_one(int code, double e, double pinv, double x0, double y0,
                  double r_in, double r_out, double delta, double t_max,
                  double h_init, double tol, double h_min, int use_cones=0,
                  double k_in=0.0, double k_out=0.0, double x_limit=0.0):
    """Advance one trajectory to its first event; see _kernel_py."""
    cdef double t, x, y
    cdef long steps
    cdef int kind
    with nogil:
        kind = _integrate(code, e, pinv, x0, y0, r_in, r_out, delta, t_max,
                          h_init, tol, h_min, use_cones, k_in, k_out, x_limit,
                          &t, &x, &y, &steps)
    return kind, t, x, y, steps


def classify_batch(int code, double e, double pinv,
                   double[::1] xs, double[::1] ys,
                   signed char[::1] kinds, double[::1] ts,
                   double r_in, double r_out, double delta, double t_max,
                   double h_init, double tol, double h_min, int use_cones,
                   double k_in, double k_out, double x_limit,
                   Py_ssize_t start, Py_ssize_t stop):
    """Fill kinds[start:stop] / ts[start:stop]; GIL released for threading."""
    cdef Py_ssize_t i
    cdef double t, x, y
    cdef long steps
    with nogil:
        for i in range(start, stop):
            kinds[i] = <signed char> _integrate(
                code, e, pinv, xs[i], ys[i], r_in, r_out, delta, t_max,
                h_init, tol, h_min, use_cones, k_in, k_out, x_limit,
                &t, &x, &y, &steps)
            ts[i] = t


def trajectory(int code, double e, double pinv, double x0, double y0,
               double r_in, double r_out, double delta, double t_max,
               double h_init, double tol, double h_min, int max_pts=100000):
    """Accepted states of one trajectory; delegates to the reference
    implementation (diagnostic path, not performance relevant)."""
    from . import _kernel_py
    return _kernel_py.trajectory(code, e, pinv, x0, y0, r_in, r_out, delta,
                                 t_max, h_init, tol, h_min, max_pts)
