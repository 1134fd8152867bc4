import math
import random

import pytest

from stabindex.analytic import ConeLabel, cone_classify, default_k_in, k_threshold
from stabindex.integrator import (
    Classification,
    IntegratorConfig,
    OutcomeKind,
    StepUnderflowError,
    classify,
    integrate,
    trajectory,
)
from stabindex.systems import Family, InvalidStateError, State, SystemSpec, phi

ATTRACT2 = SystemSpec(Family.POWER_ATTRACT, a=2.0)
REPEL_HALF = SystemSpec(Family.POWER_REPEL, a=0.5)
PHI = SystemSpec(Family.PHI)
PIECEWISE = SystemSpec(Family.PIECEWISE)


def norm(s: State) -> float:
    return math.hypot(s.x, s.y)


class TestConfigValidation:
    def test_radii_ordering(self):
        with pytest.raises(ValueError):
            IntegratorConfig(r_in=1.0, r_out=0.5)
        with pytest.raises(ValueError):
            IntegratorConfig(delta=3.0)  # above r_out
        with pytest.raises(ValueError):
            IntegratorConfig(delta=1e-7)  # below r_in

    def test_steps(self):
        with pytest.raises(ValueError):
            IntegratorConfig(tol=0.0)
        with pytest.raises(ValueError):
            IntegratorConfig(h_min=1.0, h_init=1e-3)


class TestOutcomes:
    def test_y_axis_contracts_to_origin(self):
        # quadratic contraction: reaching r_in=1e-6 takes ~1/r_in time units
        cfg = IntegratorConfig(r_in=1e-6, t_max=1e7)
        out = integrate(ATTRACT2, State(0.0, 0.5), cfg)
        assert out.kind is OutcomeKind.CONVERGED
        assert norm(out.final) <= cfg.r_in
        assert abs(norm(out.final) - cfg.r_in) <= 10 * cfg.tol

    def test_x_axis_escapes_with_exact_time(self):
        # on the axis dx = x^3, so t_exit = (x0^-2 - r_out^-2)/2 = 1.5
        cfg = IntegratorConfig(r_in=1e-6, r_out=1.0)
        out = integrate(ATTRACT2, State(0.5, 0.0), cfg)
        assert out.kind is OutcomeKind.ESCAPED
        assert out.t_exit == pytest.approx(1.5, abs=1e-5)
        assert norm(out.final) >= 1.0
        assert abs(norm(out.final) - 1.0) <= 10 * cfg.tol

    def test_equilibrium_converges_immediately(self):
        for spec in (ATTRACT2, REPEL_HALF, PHI, PIECEWISE):
            out = integrate(spec, State(0.0, 0.0))
            assert out.kind is OutcomeKind.CONVERGED
            assert out.t_exit == 0.0

    def test_phi_tube_exit_vs_global_convergence(self):
        # (0.5, 1.0) lies above the guard curve: it first travels away from
        # the origin (beyond norm 2), then crosses the curve and comes back
        s0 = State(0.5, 1.0)
        cfg = IntegratorConfig(r_in=0.1, r_out=4.0, delta=0.6, t_max=1e7)
        out = integrate(PHI, s0, cfg)
        assert out.kind is OutcomeKind.LEFT_DELTA  # |s0| already exceeds delta
        assert out.t_exit == 0.0

        cfg = IntegratorConfig(r_in=0.1, r_out=4.0, delta=2.0, t_max=1e7)
        out = integrate(PHI, s0, cfg)
        assert out.kind is OutcomeKind.LEFT_DELTA
        assert out.t_exit > 0.0
        assert norm(out.final) >= 2.0

        cfg = IntegratorConfig(r_in=0.1, r_out=4.0, t_max=1e7)
        out = integrate(PHI, s0, cfg)
        assert out.kind is OutcomeKind.CONVERGED

    def test_timeout_reported(self):
        cfg = IntegratorConfig(r_in=1e-12, r_out=10.0, t_max=2.0)
        out = integrate(PIECEWISE, State(-0.3, -0.4), cfg)
        assert out.kind is OutcomeKind.TIMED_OUT
        assert out.t_exit == pytest.approx(2.0, rel=1e-12)

    def test_radial_guard_skips_outgoing_pass(self):
        # start inside the ball but on the expanding axis: not converged
        # (dx = x^3, so the escape needs (x0^-2 - 1)/2 = 2e6 time units)
        cfg = IntegratorConfig(r_in=1e-3, r_out=1.0, t_max=1e7)
        out = integrate(ATTRACT2, State(5e-4, 0.0), cfg)
        assert out.kind is OutcomeKind.ESCAPED

    def test_non_finite_state_rejected(self):
        with pytest.raises(InvalidStateError):
            integrate(ATTRACT2, State(math.nan, 0.1))

    def test_step_underflow_raises(self):
        cfg = IntegratorConfig(h_init=1.0, h_min=0.5, tol=1e-13)
        with pytest.raises(StepUnderflowError):
            integrate(PHI, State(0.9, 1.1), cfg)


class TestClassify:
    def test_attract_cone_point(self):
        assert classify(ATTRACT2, State(0.1, 0.02)) is Classification.IN_BASIN
        assert (
            cone_classify(ATTRACT2, State(0.1, 0.02), k_in=default_k_in(ATTRACT2))
            is ConeLabel.IN_BASIN
        )

    def test_repel_out_point(self):
        # certified outside near the origin; the frozen y never catches the
        # growing nullcline, so the trajectory runs off along the x direction
        assert classify(REPEL_HALF, State(0.01, 0.002)) is Classification.OUT_OF_BASIN

    def test_repel_below_cone_return_point(self):
        # far from the origin the invariance certificate lapses: from
        # (0.25, 0.1) the trajectory exits rightward, swings over the
        # nullclines near x = 1.6 and converges, so it belongs to the basin
        cfg = IntegratorConfig(r_in=1e-3, r_out=30.0, t_max=1e7)
        assert classify(REPEL_HALF, State(0.25, 0.1), cfg) is Classification.IN_BASIN
        assert (
            classify(REPEL_HALF, State(0.25, 0.1), cfg, oracle_cones=False)
            is Classification.IN_BASIN
        )

    def test_piecewise_third_quadrant(self):
        assert classify(PIECEWISE, State(-0.3, -0.4)) is Classification.IN_BASIN

    def test_band_point_integrates_to_cone(self):
        # between the cones: only integration decides; k_th separatrix at 1.5 x^2
        below = State(0.2, 1.45 * 0.04)
        above = State(0.2, 1.55 * 0.04)
        assert classify(ATTRACT2, below) is Classification.OUT_OF_BASIN
        assert classify(ATTRACT2, above) is Classification.IN_BASIN

    def test_local_label_with_delta(self):
        cfg = IntegratorConfig(delta=0.3)
        assert classify(ATTRACT2, State(0.02, 0.01), cfg) is Classification.IN_LOCAL_BASIN
        assert classify(ATTRACT2, State(0.02, 1e-5), cfg) is Classification.OUT_OF_BASIN

    def test_cone_shortcut_matches_integration(self):
        rng = random.Random(9)
        cfg = IntegratorConfig(r_in=1e-3, r_out=3.0, t_max=1e7)
        for _ in range(40):
            x = rng.uniform(0.02, 0.4)
            side = rng.random() < 0.5
            y = x**2 * (1.6 if side else 0.9) * rng.uniform(1.0, 1.3 if side else 0.9)
            fast = classify(ATTRACT2, State(x, y), cfg, oracle_cones=True)
            slow = classify(ATTRACT2, State(x, y), cfg, oracle_cones=False)
            assert fast is slow


class TestNumericalInvariants:
    def test_axis_confinement_exact(self):
        cfg = IntegratorConfig(r_in=1e-9, r_out=10.0, t_max=5.0)
        for spec, s0 in (
            (ATTRACT2, State(0.0, 0.3)),
            (PHI, State(0.4, 0.0)),
            (PIECEWISE, State(-0.2, 0.0)),
        ):
            out = integrate(spec, s0, cfg)
            off = out.final.x if s0.x == 0.0 else out.final.y
            assert abs(off) <= 1e-12 * max(out.t_exit, 1.0)

    def test_step_halving_keeps_labels(self):
        rng = random.Random(21)
        pts = []
        while len(pts) < 50:
            x = rng.uniform(0.05, 0.5)
            y = rng.uniform(0.0, 2.0) * x**2
            # stay safely away from the separatrix y = 1.5 x^2
            if abs(y - 1.5 * x**2) > 0.15 * x**2:
                pts.append(State(x, y))
        base = IntegratorConfig(r_in=1e-4, r_out=3.0, t_max=1e7, tol=1e-9)
        half = IntegratorConfig(r_in=1e-4, r_out=3.0, t_max=1e7, tol=5e-10)
        for s in pts:
            a = classify(ATTRACT2, s, base, oracle_cones=False)
            b = classify(ATTRACT2, s, half, oracle_cones=False)
            assert a is b

    def test_piecewise_contraction_matches_exact_solution(self):
        # third quadrant solves to |state(t)| = |s0| e^{-t}
        cfg = IntegratorConfig(r_in=1e-9, r_out=2.0, t_max=2.0)
        s0 = State(-0.3, -0.4)
        out = integrate(PIECEWISE, s0, cfg)
        assert out.kind is OutcomeKind.TIMED_OUT
        expected = norm(s0) * math.exp(-2.0)
        assert abs(norm(out.final) - expected) / expected <= 10 * cfg.tol

    def test_trajectory_records_event_state(self):
        cfg = IntegratorConfig(r_in=1e-4, r_out=1.0)
        kind, ts, xs, ys = trajectory(ATTRACT2, State(0.5, 0.0), cfg)
        assert kind is OutcomeKind.ESCAPED
        assert ts[0] == 0.0 and xs[0] == 0.5
        assert math.hypot(xs[-1], ys[-1]) >= 1.0
        assert all(b > a for a, b in zip(ts, ts[1:]))

    def test_outer_cone_safe_limit_calibration(self):
        # every below-cone point within the safe x-range must truly escape,
        # across exponents (honest integration, no cone shortcuts)
        from stabindex.analytic import out_cone_safe_limit

        cfg = IntegratorConfig(r_in=1e-3, r_out=30.0, t_max=1e8)
        for a in (0.2, 1 / 3, 0.5, 0.7, 0.9):
            spec = SystemSpec(Family.POWER_REPEL, a=a)
            x_lim = out_cone_safe_limit(a, 0.25)
            for f in (1.0, 0.3):
                for u in (0.5, 0.97):
                    s0 = State(x_lim * f, 0.25 * (x_lim * f) ** a * u)
                    got = classify(spec, s0, cfg, oracle_cones=False)
                    assert got is Classification.OUT_OF_BASIN, (a, f, u)

    def test_lyapunov_strictly_increasing_along_phi_trajectories(self):
        rng = random.Random(5)
        cfg = IntegratorConfig(r_in=0.1, r_out=4.0, t_max=1e7)
        for _ in range(25):
            x0 = rng.uniform(0.2, 0.7)
            y0 = x0 * rng.uniform(0.3, 1.6)
            kind, ts, xs, ys = trajectory(PHI, State(x0, y0), cfg)
            V = [x / y for x, y in zip(xs, ys)]
            assert all(b > a for a, b in zip(V, V[1:]))
