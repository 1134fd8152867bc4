import math
import random

import pytest

from stabindex.systems import (
    Family,
    InvalidSpecError,
    InvalidStateError,
    State,
    SystemSpec,
    eval_plane,
    eval_quadrant,
    eval_transformed,
    phi,
)

ATTRACT2 = SystemSpec(Family.POWER_ATTRACT, a=2.0)
REPEL_HALF = SystemSpec(Family.POWER_REPEL, a=0.5)
PHI = SystemSpec(Family.PHI)
PIECEWISE = SystemSpec(Family.PIECEWISE)


class TestSpecValidation:
    def test_attract_needs_a_above_one(self):
        with pytest.raises(InvalidSpecError):
            SystemSpec(Family.POWER_ATTRACT, a=1.0)
        with pytest.raises(InvalidSpecError):
            SystemSpec(Family.POWER_ATTRACT, a=0.5)
        with pytest.raises(InvalidSpecError):
            SystemSpec(Family.POWER_ATTRACT)

    def test_repel_needs_a_in_unit_interval(self):
        with pytest.raises(InvalidSpecError):
            SystemSpec(Family.POWER_REPEL, a=1.5)
        with pytest.raises(InvalidSpecError):
            SystemSpec(Family.POWER_REPEL, a=0.0)

    def test_transform_power_constraints(self):
        SystemSpec(Family.POWER_ATTRACT, a=2.0, p=0.75)  # p*a = 1.5 > 1 ok
        with pytest.raises(InvalidSpecError):
            SystemSpec(Family.POWER_ATTRACT, a=2.0, p=0.5)  # p*a = 1
        with pytest.raises(InvalidSpecError):
            SystemSpec(Family.POWER_REPEL, a=0.5, p=2.0)

    def test_parameterless_families_reject_a(self):
        with pytest.raises(InvalidSpecError):
            SystemSpec(Family.PHI, a=2.0)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidSpecError):
            SystemSpec(Family.POWER_ATTRACT, a=math.nan)

    def test_entry_round_trip(self):
        for spec in (ATTRACT2, REPEL_HALF, PHI, PIECEWISE,
                     SystemSpec(Family.POWER_ATTRACT, a=2.0, p=2.0)):
            assert SystemSpec.from_entry(spec.to_entry()) == spec

    def test_entry_parse_errors(self):
        with pytest.raises(InvalidSpecError):
            SystemSpec.from_entry("")
        with pytest.raises(InvalidSpecError):
            SystemSpec.from_entry("unknown-family a=2")
        with pytest.raises(InvalidSpecError):
            SystemSpec.from_entry("power-attract b=2")


class TestPhi:
    def test_values(self):
        assert phi(0.0) == 0.0
        assert phi(1.0) == pytest.approx(3.0 * math.exp(-1.0), rel=1e-15)
        assert phi(0.5) == pytest.approx(2.0 * math.exp(-2.0), rel=1e-15)

    def test_negative_rejected(self):
        with pytest.raises(InvalidStateError):
            phi(-0.1)

    def test_strictly_increasing(self):
        rng = random.Random(11)
        for _ in range(500):
            x1 = rng.uniform(0.0, 3.0)
            x2 = x1 + rng.uniform(1e-6, 1.0)
            assert phi(x1) < phi(x2)

    def test_tiny_argument_underflows_to_zero_continuously(self):
        assert phi(1e-4) >= 0.0
        assert phi(5e-4) < 1e-300


class TestQuadrantField:
    def test_origin_is_equilibrium_for_every_family(self):
        for spec in (ATTRACT2, REPEL_HALF, PHI, PIECEWISE):
            assert eval_quadrant(spec, State(0.0, 0.0)) == (0.0, 0.0)

    def test_attract_axis_laws(self):
        # x-axis expands like x^{a+1}, y-axis contracts like -y^2
        assert eval_quadrant(ATTRACT2, State(1.0, 0.0)) == (1.0, 0.0)
        assert eval_quadrant(ATTRACT2, State(0.0, 1.0)) == (0.0, -1.0)

    def test_repel_axis_law(self):
        assert eval_quadrant(REPEL_HALF, State(1.0, 0.0)) == (0.5, 0.0)

    def test_phi_y_axis_expands_quadratically(self):
        assert eval_quadrant(PHI, State(0.0, 0.5)) == (0.0, 0.25)

    def test_rejects_non_finite_and_negative(self):
        with pytest.raises(InvalidStateError):
            eval_quadrant(ATTRACT2, State(math.nan, 0.0))
        with pytest.raises(InvalidStateError):
            eval_quadrant(ATTRACT2, State(-0.1, 0.2))

    def test_axis_invariance_random(self):
        rng = random.Random(3)
        specs = [ATTRACT2, REPEL_HALF, PHI, PIECEWISE,
                 SystemSpec(Family.POWER_ATTRACT, a=1.5),
               SystemSpec(Family.POWER_REPEL, a=1 / 3)]
        for _ in range(200):
            spec = rng.choice(specs)
            v = rng.uniform(0.0, 2.0)
            assert eval_quadrant(spec, State(v, 0.0)).dy == 0.0
            assert eval_quadrant(spec, State(0.0, v)).dx == 0.0

    def test_attract_nullcline_sign_pattern(self):
        rng = random.Random(7)
        for _ in range(300):
            a = rng.uniform(1.1, 4.0)
            spec = SystemSpec(Family.POWER_ATTRACT, a=a)
            x = rng.uniform(0.01, 1.0)
            y = rng.uniform(0.0, 2.0) * x**a
            dx, dy = eval_quadrant(spec, State(x, y))
            if y != x**a:
                assert (dx > 0) == (y < x**a)
            if y not in (0.0, 0.5 * x**a):
                assert (dy > 0) == (0.0 < y < 0.5 * x**a)

    def test_repel_nullcline_sign_pattern(self):
        rng = random.Random(13)
        for _ in range(300):
            a = rng.uniform(0.1, 0.9)
            spec = SystemSpec(Family.POWER_REPEL, a=a)
            x = rng.uniform(0.01, 1.0)
            y = rng.uniform(1e-6, 2.0) * x**a
            dx, dy = eval_quadrant(spec, State(x, y))
            if y != 0.5 * x**a:
                assert (dx > 0) == (y < 0.5 * x**a)
            if y != x**a:
                assert (dy > 0) == (y < x**a)

    def test_phi_sign_pattern(self):
        rng = random.Random(17)
        for _ in range(300):
            x = rng.uniform(0.05, 2.0)
            y = rng.uniform(1e-6, 2.0) * phi(x)
            dx, dy = eval_quadrant(PHI, State(x, y))
            assert (dx > 0) == (y > 0.5 * phi(x))
            assert (dy > 0) == (y > phi(x))


class TestPlaneExtension:
    def test_piecewise_quadrant_laws(self):
        # third quadrant points at the origin
        assert eval_plane(PIECEWISE, State(-1.0, -1.0)) == (1.0, 1.0)
        # first quadrant expands
        assert eval_plane(PIECEWISE, State(1.0, 1.0)) == (1.0, 1.0)
        # second quadrant: toward the y-axis, expanding upward
        assert eval_plane(PIECEWISE, State(-2.0, 1.0)) == (2.0, 1.0)
        assert eval_plane(PIECEWISE, State(2.0, -1.0)) == (2.0, 1.0)

    def test_mirror_of_axis_point(self):
        assert eval_plane(ATTRACT2, State(-1.0, 0.0)) == (-1.0, 0.0)

    def test_origin(self):
        for spec in (ATTRACT2, REPEL_HALF, PHI, PIECEWISE):
            assert eval_plane(spec, State(0.0, 0.0)) == (0.0, 0.0)

    def test_mirror_symmetry_random(self):
        rng = random.Random(23)
        for spec in (ATTRACT2, REPEL_HALF, PHI):
            for _ in range(100):
                x = rng.uniform(0.01, 1.5)
                y = rng.uniform(0.01, 1.5)
                ref = eval_plane(spec, State(x, y))
                mx = eval_plane(spec, State(-x, y))
                my = eval_plane(spec, State(x, -y))
                assert (mx.dx, mx.dy) == (-ref.dx, ref.dy)
                assert (my.dx, my.dy) == (ref.dx, -ref.dy)


class TestTransform:
    def test_identity_at_p_one_on_grid(self):
        plain = ATTRACT2
        lifted = SystemSpec(Family.POWER_ATTRACT, a=2.0, p=1.0)
        for i in range(10):
            for j in range(10):
                s = State(i * 0.1, j * 0.1)
                assert eval_transformed(lifted, s) == eval_quadrant(plain, s)

    def test_y_axis_law_unchanged(self):
        spec = SystemSpec(Family.POWER_ATTRACT, a=2.0, p=2.0)
        assert eval_transformed(spec, State(0.0, 1.0)) == (0.0, -1.0)

    def test_x_axis_rate_scaled_by_p(self):
        spec = SystemSpec(Family.POWER_ATTRACT, a=2.0, p=2.0)
        assert eval_transformed(spec, State(1.0, 0.0)) == (0.5, 0.0)

    def test_requires_transform_power(self):
        with pytest.raises(InvalidSpecError):
            eval_transformed(ATTRACT2, State(1.0, 0.0))

    def test_exponent_property(self):
        assert SystemSpec(Family.POWER_ATTRACT, a=2.0, p=2.0).exponent == 4.0
        assert ATTRACT2.exponent == 2.0
        assert PIECEWISE.exponent is None
