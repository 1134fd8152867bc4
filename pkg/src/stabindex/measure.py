"""Basin-measure estimation over shrinking squares and log-log index fits.

``estimate_fraction`` samples the quadrant square [0, eps]^2 (the full
square [-eps, eps]^2 for the piecewise family), classifies every point with
the certified-cone fast path plus integration of the undetermined band, and
returns the membership counts.  ``fit_indices`` turns a ladder of such
samples into (sigma_minus, sigma_plus, sigma) by weighted least squares on
ln(fraction) against ln(eps), applying the conventions that an everywhere
degenerate fraction or an absurdly steep slope means an infinite limit.

Sampling is deterministic: the point set depends only on (seed, eps, n,
square shape), never on worker count, so parallel and serial runs emit
byte-identical results.
"""

from __future__ import annotations

import math
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import analytic, backend
from ._kernel_py import (
    KIND_CONE_IN,
    KIND_CONVERGED,
    KIND_LEFT_DELTA,
    KIND_TIMED_OUT,
)
from .integrator import DEFAULT_CONFIG, IntegratorConfig, _kernel_args, cone_parameters
from .systems import Family, State, SystemSpec

#: Fractions within ``DEGENERATE_FACTOR / n`` of 0 (or 1) are treated as
#: exactly 0 (or 1): indistinguishable from the degenerate value at the
#: sample size, so the infinite-limit conventions apply.
DEGENERATE_FACTOR = 2.0

#: A fitted slope beyond this is reported as an infinite one.
SLOPE_CUTOFF = 50.0

#: Hard error above this failure fraction; warn above the timeout fraction.
FAIL_FRACTION_LIMIT = 0.01
TIMEOUT_WARN_FRACTION = 0.005


class MeasureError(RuntimeError):
    pass


class LadderError(ValueError):
    pass


@dataclass(frozen=True)
class MeasureSample:
    """Counts from sampling one neighborhood size."""

    eps: float
    delta: float | None
    n_total: int
    n_basin: int
    n_local: int | None
    n_timeout: int
    seed: int
    n_fail: int = 0

    def __post_init__(self):
        if not 0 <= self.n_basin <= self.n_total:
            raise MeasureError(f"n_basin {self.n_basin} outside [0, {self.n_total}]")
        if self.n_local is not None and not 0 <= self.n_local <= self.n_basin:
            raise MeasureError(f"n_local {self.n_local} exceeds n_basin {self.n_basin}")

    @property
    def fraction(self) -> float:
        return self.n_basin / self.n_total

    @property
    def local_fraction(self) -> float | None:
        return None if self.n_local is None else self.n_local / self.n_total


@dataclass(frozen=True)
class IndexEstimate:
    """Fitted indices with the conventions that produced them."""

    sigma_minus: float
    sigma_plus: float
    sigma: float
    slope_stderr: float
    ladder: tuple[MeasureSample, ...]
    diagnostics: dict

    def as_dict(self) -> dict:
        return {
            "sigma_minus": self.sigma_minus,
            "sigma_plus": self.sigma_plus,
            "sigma": self.sigma,
            "stderr": self.slope_stderr,
        }


def make_ladder(top: float = 1e-1, bottom: float = 1e-3, rungs: int = 8) -> list[float]:
    """Geometric eps ladder, descending."""
    if not (0 < bottom < top):
        raise LadderError(f"need 0 < bottom < top, got {bottom}, {top}")
    if rungs < 2:
        raise LadderError("need at least two rungs")
    return list(np.geomspace(top, bottom, rungs))


def _point_rng(seed: int, eps: float, n: int, full_square: bool) -> np.random.Generator:
    eps_bits = struct.unpack("<Q", struct.pack("<d", float(eps)))[0]
    ss = np.random.SeedSequence((int(seed), eps_bits, int(n), int(full_square)))
    return np.random.Generator(np.random.Philox(ss))


def sample_points(
    eps: float,
    n: int,
    seed: int,
    full_square: bool = False,
    sampler: str = "stratified",
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic points filling [0, eps]^2 (or [-eps, eps]^2).

    ``stratified`` jitters one point per cell of the largest square grid
    that fits (leftovers uniform), cutting the boundary-crossing variance of
    set-measure estimates well below the plain binomial level; ``uniform``
    is plain Monte Carlo.
    """
    rng = _point_rng(seed, eps, n, full_square)
    jit = rng.random((n, 2))
    if sampler == "stratified":
        m = math.isqrt(n)
        k = m * m
        idx = np.arange(k)
        u = np.empty((n, 2))
        u[:k, 0] = (idx % m + jit[:k, 0]) / m
        u[:k, 1] = (idx // m + jit[:k, 1]) / m
        u[k:] = jit[k:]
    elif sampler == "uniform":
        u = jit
    else:
        raise ValueError(f"unknown sampler {sampler!r}")
    if full_square:
        return (2.0 * u[:, 0] - 1.0) * eps, (2.0 * u[:, 1] - 1.0) * eps
    return u[:, 0] * eps, u[:, 1] * eps


def _phi_curve(xs: np.ndarray) -> np.ndarray:
    out = np.zeros_like(xs)
    pos = xs > 0
    xp = xs[pos]
    out[pos] = (2.0 * xp + 1.0) * np.exp(-1.0 / xp)
    return out


def _cone_pass(
    spec: SystemSpec,
    xs: np.ndarray,
    ys: np.ndarray,
    local: bool,
    k_in: float,
    k_out: float,
    r_out: float,
) -> np.ndarray:
    """Vectorized certified labels: +1 in, -1 out, 0 undetermined.

    Off-axis points only; callers mask axis points beforehand.  Mirrors
    analytic.cone_classify, plus the below-cone escape cap (certified to
    leave through r_out before any return is possible).
    """
    lab = np.zeros(xs.shape, dtype=np.int8)
    if spec.family is Family.PIECEWISE:
        np.copyto(lab, np.where((xs < 0) & (ys < 0), 1, -1).astype(np.int8))
        return lab
    ax = np.abs(xs)
    ay = np.abs(ys)
    if spec.family is Family.PHI:
        if local:
            np.copyto(lab, np.where(ay < _phi_curve(ax), 1, -1).astype(np.int8))
        else:
            lab.fill(1)
        return lab
    xa = ax ** spec.exponent
    if spec.family is Family.POWER_ATTRACT:
        lab[ay < xa] = -1
        lab[ay > k_in * xa] = 1
        return lab
    # power-repel
    x_lim = analytic.out_cone_safe_limit(spec.a, k_out)
    below = ay < k_out * xa
    lab[below & ((ax < x_lim) | (ay < analytic.escape_cap(spec.a, ax, r_out)))] = -1
    lab[ay > k_in * xa] = 1
    return lab


def _axis_labels(spec: SystemSpec, xs, ys, local: bool, delta: float | None):
    """(in_basin, in_local) bool arrays for points with a zero coordinate.

    Axis dynamics are one-dimensional and monotone, so membership is exact:
    contracting axes belong to the basin, expanding axes do not.
    """
    ax = np.abs(xs)
    ay = np.abs(ys)
    on_x = (ys == 0) & (xs != 0)
    on_y = (xs == 0) & (ys != 0)
    origin = (xs == 0) & (ys == 0)
    if spec.family is Family.POWER_ATTRACT:
        in_basin = on_y | origin
    elif spec.family is Family.POWER_REPEL:
        in_basin = on_y | origin
    elif spec.family is Family.PHI:
        in_basin = on_x | origin
    else:  # piecewise: closure of the third quadrant, ties toward it
        in_basin = ((xs <= 0) & (ys <= 0)) | origin
    in_local = in_basin.copy()
    if delta is not None:
        in_local &= np.hypot(ax, ay) < delta
    return in_basin, in_local


def _run_batches(kern, args, xs_u, ys_u, workers: int):
    n = xs_u.shape[0]
    kinds = np.zeros(n, dtype=np.int8)
    ts = np.zeros(n, dtype=np.float64)
    if n == 0:
        return kinds, ts
    (code, e, pinv), cfgv, cones = args
    call = lambda lo, hi: kern.classify_batch(  # noqa: E731
        code, e, pinv, xs_u, ys_u, kinds, ts, *cfgv, *cones, lo, hi
    )
    if workers <= 1 or n < 256:
        call(0, n)
        return kinds, ts
    bounds = np.linspace(0, n, workers * 4 + 1).astype(np.int64)
    spans = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if a < b]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda s: call(*s), spans))
    return kinds, ts


def estimate_fraction(
    spec: SystemSpec,
    eps: float,
    delta: float | None = None,
    n: int = 100_000,
    seed: int = 0,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    k_in: float | None = None,
    k_out: float | None = None,
    workers: int = 1,
    sampler: str = "stratified",
    kernel=None,
) -> MeasureSample:
    """Sampled basin fraction of the eps-square, deterministic in the seed.

    With ``delta`` the tube event is armed and the delta-local membership is
    counted alongside the global one (eps must stay below delta/10 so the
    certified cone arguments apply to every sampled point).  Timed-out
    points count as outside and are reported; integration failures above
    FAIL_FRACTION_LIMIT abort.
    """
    if not eps > 0:
        raise MeasureError(f"eps must be positive, got {eps}")
    if n < 100:
        raise MeasureError(f"need at least 100 samples, got {n}")
    if delta is not None:
        if not delta > 0:
            raise MeasureError(f"delta must be positive, got {delta}")
        if eps > delta / 10.0 * (1.0 + 1e-12):
            raise MeasureError(f"need eps <= delta/10, got eps={eps}, delta={delta}")
    local = delta is not None
    if spec.family in (Family.POWER_ATTRACT, Family.POWER_REPEL):
        k_in = analytic.default_k_in(spec) if k_in is None else k_in
        k_out = analytic.default_k_out(spec) if k_out is None else k_out
    kern = kernel or backend.get_kernel()

    full = spec.family is Family.PIECEWISE
    xs, ys = sample_points(eps, n, seed, full_square=full, sampler=sampler)

    off_axis = (xs != 0) & (ys != 0)
    lab = np.zeros(n, dtype=np.int8)
    lab[off_axis] = _cone_pass(spec, xs[off_axis], ys[off_axis], local, k_in, k_out, cfg.r_out)

    in_basin = lab == 1
    in_local = in_basin.copy() if local else None
    if local and spec.family is Family.PHI:
        # the guard-curve test decides only delta-local membership; globally
        # every off-axis trajectory is homoclinic to the origin
        in_basin = off_axis.copy()

    # exact axis dynamics for the (measure-zero) points with a 0 coordinate
    if not off_axis.all():
        axis = ~off_axis
        ab, al = _axis_labels(spec, xs[axis], ys[axis], local, delta)
        in_basin[axis] = ab
        if local:
            in_local[axis] = al

    n_timeout = 0
    n_fail = 0
    undet = np.flatnonzero(off_axis & (lab == 0))
    if undet.size:
        run_cfg = (
            cfg.r_in,
            cfg.r_out,
            delta if local else -1.0,
            cfg.t_max,
            cfg.h_init,
            cfg.tol,
            cfg.h_min,
        )
        cones = cone_parameters(spec, k_in, k_out)
        args = (_kernel_args(spec), run_cfg, cones)
        xs_u = np.ascontiguousarray(xs[undet])
        ys_u = np.ascontiguousarray(ys[undet])
        kinds, _ = _run_batches(kern, args, xs_u, ys_u, workers)

        got_in = (kinds == KIND_CONVERGED) | (kinds == KIND_CONE_IN)
        in_basin[undet] = got_in
        if local:
            in_local[undet] = got_in
            # resolve global membership of the points that left the tube
            left = np.flatnonzero(kinds == KIND_LEFT_DELTA)
            if left.size:
                run_cfg2 = run_cfg[:2] + (-1.0,) + run_cfg[3:]
                kinds2, _ = _run_batches(
                    kern,
                    (args[0], run_cfg2, cones),
                    np.ascontiguousarray(xs_u[left]),
                    np.ascontiguousarray(ys_u[left]),
                    workers,
                )
                in2 = (kinds2 == KIND_CONVERGED) | (kinds2 == KIND_CONE_IN)
                in_basin[undet[left]] = in2
                n_timeout += int((kinds2 == KIND_TIMED_OUT).sum())
                n_fail += int((kinds2 < 0).sum())
        n_timeout += int((kinds == KIND_TIMED_OUT).sum())
        n_fail += int((kinds < 0).sum())

    if n_fail > FAIL_FRACTION_LIMIT * n:
        raise MeasureError(f"{n_fail}/{n} classifications failed")
    if n_timeout > TIMEOUT_WARN_FRACTION * n:
        warnings.warn(
            f"{n_timeout}/{n} trajectories timed out at eps={eps}; "
            "they count as outside the basin",
            stacklevel=2,
        )

    return MeasureSample(
        eps=float(eps),
        delta=delta,
        n_total=n,
        n_basin=int(in_basin.sum()),
        n_local=int(in_local.sum()) if local else None,
        n_timeout=n_timeout,
        seed=seed,
        n_fail=n_fail,
    )


def estimate_ladder(
    spec: SystemSpec,
    ladder: list[float],
    delta: float | None = None,
    n: int = 100_000,
    seed: int = 0,
    **kwargs,
) -> list[MeasureSample]:
    return [estimate_fraction(spec, eps, delta=delta, n=n, seed=seed, **kwargs) for eps in ladder]


def _fit_side(eps: np.ndarray, p: np.ndarray, ns: np.ndarray, name: str):
    """WLS slope of ln p against ln eps, dropping degenerate rungs.

    Returns (slope, stderr, n_used, notes); an everywhere-degenerate side
    has an infinite slope by convention.
    """
    notes = []
    cut = DEGENERATE_FACTOR / ns
    usable = p > cut
    n_used = int(usable.sum())
    if n_used == 0:
        return math.inf, 0.0, 0, [f"{name}: all rungs degenerate, slope is +inf"]
    if n_used < 2:
        return math.inf, 0.0, n_used, [
            f"{name}: only {n_used} non-degenerate rung(s), slope is +inf"
        ]
    if n_used < len(p):
        dropped = [float(e) for e in eps[~usable]]
        notes.append(f"{name}: dropped degenerate rungs at eps={dropped}")
        warnings.warn(notes[-1], stacklevel=3)
    x = np.log(eps[usable])
    yv = np.log(p[usable])
    pu = p[usable]
    nu = ns[usable]
    w = nu * pu / ((1.0 - pu) + 1.0 / nu)  # inverse variance of ln p-hat
    xb = np.average(x, weights=w)
    yb = np.average(yv, weights=w)
    sxx = float(np.sum(w * (x - xb) ** 2))
    slope = float(np.sum(w * (x - xb) * (yv - yb)) / sxx)
    if n_used >= 3:
        resid = yv - yb - slope * (x - xb)
        s2 = float(np.sum(w * resid**2) / (n_used - 2))
        stderr = math.sqrt(max(s2, 1.0) / sxx)
    else:
        stderr = math.sqrt(1.0 / sxx)
    return slope, stderr, n_used, notes


def fit_indices(
    ladder: list[MeasureSample],
    use_local: bool = False,
    slope_cutoff: float = SLOPE_CUTOFF,
) -> IndexEstimate:
    """Fit sigma_minus, sigma_plus and sigma = sigma_plus - sigma_minus.

    Needs at least 4 distinct eps spanning 1.5 decades.  Conventions: a
    fraction within DEGENERATE_FACTOR/n of 0 (1) at every rung sets
    sigma_minus (sigma_plus) to +inf; a fitted slope beyond ``slope_cutoff``
    is promoted to +inf as well.  Everything applied is recorded in the
    diagnostics.
    """
    if use_local and any(s.n_local is None for s in ladder):
        raise LadderError("local fit requested but the ladder has no local counts")
    eps = np.array([s.eps for s in ladder], dtype=float)
    if len(np.unique(eps)) < 4:
        raise LadderError("ladder needs at least 4 distinct eps values")
    span = math.log10(eps.max() / eps.min())
    if span < 1.5 - 1e-9:
        raise LadderError(f"ladder spans {span:.2f} decades, need at least 1.5")
    frac = np.array(
        [(s.local_fraction if use_local else s.fraction) for s in ladder], dtype=float
    )
    ns = np.array([s.n_total for s in ladder], dtype=float)

    sm, se_m, used_m, notes_m = _fit_side(eps, frac, ns, "sigma_minus")
    sp, se_p, used_p, notes_p = _fit_side(eps, 1.0 - frac, ns, "sigma_plus")
    notes = notes_m + notes_p
    if math.isfinite(sm) and sm > slope_cutoff:
        notes.append(f"sigma_minus slope {sm:.2f} beyond cutoff {slope_cutoff}, set to +inf")
        sm, se_m = math.inf, 0.0
    if math.isfinite(sp) and sp > slope_cutoff:
        notes.append(f"sigma_plus slope {sp:.2f} beyond cutoff {slope_cutoff}, set to +inf")
        sp, se_p = math.inf, 0.0
    sigma = analytic.extended_sub(sp, sm)
    stderr = math.sqrt(se_m**2 + se_p**2)
    diagnostics = {
        "rungs_used_minus": used_m,
        "rungs_used_plus": used_p,
        "stderr_minus": se_m,
        "stderr_plus": se_p,
        "degenerate_cutoff": [float(DEGENERATE_FACTOR / s.n_total) for s in ladder][0],
        "slope_cutoff": slope_cutoff,
        "notes": notes,
        "local": use_local,
    }
    return IndexEstimate(sm, sp, sigma, stderr, tuple(ladder), diagnostics)


@dataclass(frozen=True)
class LocalIndexResult:
    """Per-delta fits for the double limit, smallest delta last."""

    per_delta: tuple[tuple[float, IndexEstimate], ...]
    sigma_loc: float
    slope_cutoff: float

    @property
    def slopes(self) -> list[float]:
        """The per-delta sigma_loc_minus sequence (the outer-limit trend)."""
        return [est.sigma_minus for _, est in self.per_delta]


def local_index(
    spec: SystemSpec,
    deltas: list[float],
    rungs: int = 8,
    decades: float = 2.0,
    n: int = 100_000,
    seed: int = 0,
    slope_cutoff: float = SLOPE_CUTOFF,
    **kwargs,
) -> LocalIndexResult:
    """Estimate the local index: eps-slope at each delta, descending.

    Each delta gets the geometric ladder [delta/10 / 10^decades, delta/10],
    so the eps << delta separation holds on every rung.  The verdict comes
    from the smallest delta: a sigma_loc_minus at or beyond the cutoff
    (including the degenerate +inf convention) means sigma_loc = -inf, the
    symmetric case means +inf, otherwise the fitted difference is reported.
    The full per-delta slope sequence stays visible in the result.
    """
    deltas = sorted(deltas, reverse=True)
    per_delta = []
    for d in deltas:
        ladder = make_ladder(d / 10.0, d / 10.0 / 10.0**decades, rungs)
        samples = estimate_ladder(spec, ladder, delta=d, n=n, seed=seed, **kwargs)
        per_delta.append((d, fit_indices(samples, use_local=True, slope_cutoff=slope_cutoff)))
    last = per_delta[-1][1]
    if last.sigma_minus >= slope_cutoff:
        sigma_loc = -math.inf
    elif last.sigma_plus >= slope_cutoff:
        sigma_loc = math.inf
    else:
        sigma_loc = last.sigma
    return LocalIndexResult(tuple(per_delta), sigma_loc, slope_cutoff)


def basin_map(
    spec: SystemSpec,
    window: tuple[float, float, float, float],
    resolution: tuple[int, int],
    delta: float | None = None,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    k_in: float | None = None,
    k_out: float | None = None,
    workers: int = 1,
    kernel=None,
):
    """Classify the centers of a rectangular grid.

    Returns (x_centers, y_centers, labels) with labels[j, i] in {1, 0} for
    the cell at (x_centers[i], y_centers[j]); 1 means in the (delta-local
    when delta is set) basin.
    """
    x0, x1, y0, y1 = window
    nx, ny = resolution
    if not (x0 < x1 and y0 < y1):
        raise ValueError(f"degenerate window {window}")
    if not (0 < nx <= 4096 and 0 < ny <= 4096):
        raise ValueError("resolution limited to 4096 per axis")
    if spec.family in (Family.POWER_ATTRACT, Family.POWER_REPEL):
        k_in = analytic.default_k_in(spec) if k_in is None else k_in
        k_out = analytic.default_k_out(spec) if k_out is None else k_out
    local = delta is not None
    kern = kernel or backend.get_kernel()

    xc = (np.arange(nx) + 0.5) * (x1 - x0) / nx + x0
    yc = (np.arange(ny) + 0.5) * (y1 - y0) / ny + y0
    gx, gy = np.meshgrid(xc, yc)
    xs = gx.ravel()
    ys = gy.ravel()

    off_axis = (xs != 0) & (ys != 0)
    lab = np.zeros(xs.size, dtype=np.int8)
    lab[off_axis] = _cone_pass(spec, xs[off_axis], ys[off_axis], local, k_in, k_out, cfg.r_out)
    in_basin = lab == 1
    if local and spec.family is not Family.PHI:
        # cone certificates are monotone in the norm; the tube constrains them
        in_basin &= np.hypot(xs, ys) < delta
    if not off_axis.all():
        axis = ~off_axis
        ab, al = _axis_labels(spec, xs[axis], ys[axis], local, delta)
        in_basin[axis] = al if local else ab

    undet = np.flatnonzero(off_axis & (lab == 0))
    if undet.size:
        run_cfg = (
            cfg.r_in,
            cfg.r_out,
            delta if local else -1.0,
            cfg.t_max,
            cfg.h_init,
            cfg.tol,
            cfg.h_min,
        )
        cones = cone_parameters(spec, k_in, k_out)
        kinds, _ = _run_batches(
            kern,
            (_kernel_args(spec), run_cfg, cones),
            np.ascontiguousarray(xs[undet]),
            np.ascontiguousarray(ys[undet]),
            workers,
        )
        in_basin[undet] = (kinds == KIND_CONVERGED) | (kinds == KIND_CONE_IN)

    return xc, yc, in_basin.reshape(ny, nx).astype(np.int8)
