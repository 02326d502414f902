"""Curve primitives, curve fitting, and the lookup-table library."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from kinoplan.geometry import (CurveLibrary, CurveParams, LibraryConfig, Pose,
                               build_curve_library, curvature_at, fit_curve,
                               heading_change, integrate_endpoint,
                               max_abs_curvature, normalize_angle,
                               sample_curve_poses)


def straight(s_f):
    return CurveParams(0.0, 0.0, 0.0, 0.0, s_f)


class TestPose:
    def test_theta_normalized(self):
        assert Pose(0.0, 0.0, 3.0 * math.pi).theta == pytest.approx(math.pi)

    def test_transform_then_local_offset_roundtrip(self):
        base = Pose(1.0, -2.0, 0.7)
        other = base.transform(3.0, 0.5, -0.2)
        dx, dy, dth = base.local_offset(other)
        assert (dx, dy, dth) == pytest.approx((3.0, 0.5, -0.2))

    @given(st.floats(-100.0, 100.0))
    def test_normalize_angle_range(self, theta):
        t = normalize_angle(theta)
        assert -math.pi < t <= math.pi
        assert math.isclose(math.sin(t), math.sin(theta), abs_tol=1e-9)
        assert math.isclose(math.cos(t), math.cos(theta), abs_tol=1e-9)


class TestCurvature:
    def test_zero_polynomial(self):
        assert curvature_at(straight(5.0), 3.0) == 0.0

    def test_constant_term(self):
        assert curvature_at(CurveParams(0.1, 0.0, 0.0, 0.0, 6.0), 5.0) == 0.1

    def test_cubic_evaluation(self):
        p = CurveParams(0.0, 0.01, 0.002, 0.0003, 3.0)
        assert curvature_at(p, 2.0) == pytest.approx(0.0304, abs=1e-12)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            curvature_at(straight(2.0), 3.0)
        with pytest.raises(ValueError):
            heading_change(straight(2.0), -0.5)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            CurveParams(0.0, 0.0, 0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            CurveParams(math.nan, 0.0, 0.0, 0.0, 1.0)

    def test_reversed_is_mirrored_curvature(self):
        p = CurveParams(0.1, -0.02, 0.005, -0.001, 3.0)
        r = p.reversed()
        for s in np.linspace(0.0, p.s_f, 7):
            assert curvature_at(r, s) == pytest.approx(
                -curvature_at(p, p.s_f - s), abs=1e-12)


class TestHeadingChange:
    def test_straight(self):
        assert heading_change(straight(10.0), 10.0) == 0.0

    def test_constant_curvature(self):
        assert heading_change(CurveParams(0.2, 0.0, 0.0, 0.0, 6.0), 5.0) == \
            pytest.approx(1.0, abs=1e-12)

    def test_linear_term(self):
        p = CurveParams(0.0, 0.04, 0.0, 0.0, 4.0)
        assert heading_change(p, 3.0) == pytest.approx(0.18, abs=1e-12)

    @given(st.floats(-0.3, 0.3), st.floats(-0.05, 0.05), st.floats(-0.01, 0.01),
           st.floats(-0.002, 0.002), st.floats(0.1, 8.0))
    @settings(max_examples=40, deadline=None)
    def test_closed_form_equals_quadrature(self, k0, a, b, c, s):
        p = CurveParams(k0, a, b, c, 8.0)
        ref, _ = quad(lambda u: curvature_at(p, u), 0.0, s, epsabs=1e-12)
        assert heading_change(p, s) == pytest.approx(ref, abs=1e-9)


class TestIntegrateEndpoint:
    def test_straight_line(self):
        assert integrate_endpoint(straight(7.0)) == pytest.approx((7.0, 0.0, 0.0))

    def test_circular_arc(self):
        dx, dy, dth = integrate_endpoint(CurveParams(0.5, 0.0, 0.0, 0.0, math.pi))
        assert dx == pytest.approx(2.0, abs=1e-6)
        assert dy == pytest.approx(2.0, abs=1e-6)
        assert dth == pytest.approx(math.pi / 2.0, abs=1e-9)

    def test_against_adaptive_quadrature(self):
        p = CurveParams(0.0, 0.1, 0.01, 0.001, 4.0)
        ref_x, _ = quad(lambda s: math.cos(heading_change(p, s)), 0.0, p.s_f,
                        epsabs=1e-10, epsrel=1e-10)
        ref_y, _ = quad(lambda s: math.sin(heading_change(p, s)), 0.0, p.s_f,
                        epsabs=1e-10, epsrel=1e-10)
        dx, dy, _ = integrate_endpoint(p)
        assert dx == pytest.approx(ref_x, abs=1e-6)
        assert dy == pytest.approx(ref_y, abs=1e-6)


class TestSampleCurvePoses:
    def test_straight_spacing(self):
        poses = sample_curve_poses(straight(1.0), Pose(0.0, 0.0, 0.0), 0.5)
        assert [p.x for p in poses] == pytest.approx([0.0, 0.5, 1.0])
        assert all(p.y == 0.0 for p in poses)

    def test_rotated_base(self):
        poses = sample_curve_poses(straight(1.0), Pose(0.0, 0.0, math.pi / 2.0), 1.0)
        end = poses[-1]
        assert (end.x, end.y, end.theta) == pytest.approx(
            (0.0, 1.0, math.pi / 2.0), abs=1e-12)

    def test_arc_endpoint_matches_integration(self):
        p = CurveParams(0.5, 0.0, 0.0, 0.0, math.pi)
        poses = sample_curve_poses(p, Pose(0.0, 0.0, 0.0), math.pi / 2.0)
        dx, dy, dth = integrate_endpoint(p)
        assert (poses[-1].x, poses[-1].y) == pytest.approx((dx, dy), abs=1e-12)
        assert poses[-1].theta == pytest.approx(dth, abs=1e-12)

    def test_bad_ds(self):
        with pytest.raises(ValueError):
            sample_curve_poses(straight(1.0), Pose(0.0, 0.0, 0.0), 0.0)


class TestFitCurve:
    def test_straight_solution(self):
        p = fit_curve(0.0, (5.0, 0.0, 0.0), kappa_max=0.5)
        assert p is not None
        assert p.s_f == pytest.approx(5.0, abs=1e-3)
        assert max_abs_curvature(p) < 1e-4

    def test_recovers_circular_arc(self):
        p = fit_curve(0.5, (2.0, 2.0, math.pi / 2.0), kappa_max=0.7)
        assert p is not None
        assert p.kappa0 == 0.5
        assert p.s_f == pytest.approx(math.pi, abs=1e-2)
        dx, dy, dth = integrate_endpoint(p)
        assert (dx, dy, dth) == pytest.approx((2.0, 2.0, math.pi / 2.0), abs=1e-4)

    def test_curvature_bound_rejection(self):
        # A half-circle to (0, 2) needs kappa = 1; a bound of 0.2 forbids it.
        assert fit_curve(0.0, (0.001, 2.0, math.pi), kappa_max=0.2) is None

    def test_degenerate_goal(self):
        assert fit_curve(0.0, (0.0, 0.0, 0.0), kappa_max=0.5) is None


class TestLibrary:
    def test_straight_cell(self, library):
        i, j = library.cell_index(2.0, 0.0)
        entry = library.entries[(i, j)]
        assert entry.beta == pytest.approx(0.0, abs=1e-9)
        assert entry.dy == pytest.approx(0.0, abs=1e-4)
        assert entry.params.s_f == pytest.approx(entry.r, abs=1e-3)

    def test_curvature_bound_holds_everywhere(self, library):
        for entry in library.entries.values():
            assert max_abs_curvature(entry.params) <= library.config.kappa_max + 1e-9
            assert entry.params.s_f <= library.config.max_arc_length + 1e-9

    def test_endpoint_on_target_circle(self, library):
        for entry in library.entries.values():
            assert math.hypot(entry.dx, entry.dy) == pytest.approx(entry.r, abs=1e-4)
            assert math.atan2(entry.dy, entry.dx) == pytest.approx(entry.beta, abs=1e-4)

    def test_reflection_symmetry(self, library):
        cfg = library.config
        for (i, j), entry in library.entries.items():
            mirror = library.entries.get((i, cfg.n_beta - 1 - j))
            assert mirror is not None, "asymmetric feasibility"
            assert mirror.dx == pytest.approx(entry.dx, abs=1e-3)
            assert mirror.dy == pytest.approx(-entry.dy, abs=1e-3)
            assert mirror.dtheta == pytest.approx(-entry.dtheta, abs=1e-3)

    def test_lookup_clamps(self, library):
        cfg = library.config
        assert library.cell_index(0.1, 0.0) == library.cell_index(cfg.r_min, 0.0)
        assert library.cell_index(100.0, 2.0) == \
            library.cell_index(cfg.r_max, cfg.beta_max)
        # Clamping is idempotent and lookup is total.
        assert library.lookup(1e6, -1e6) is library.lookup(cfg.r_max, cfg.beta_min)

    def test_exact_grid_lookup(self, library):
        entry = next(iter(library.entries.values()))
        assert library.lookup(entry.r, entry.beta) is entry

    def test_save_load_roundtrip(self, library, tmp_path):
        path = tmp_path / "lib.csv"
        library.save_csv(path)
        loaded = CurveLibrary.load_csv(path)
        assert loaded.entries.keys() == library.entries.keys()
        for key, entry in library.entries.items():
            other = loaded.entries[key]
            assert other.params == entry.params
            assert (other.dx, other.dy, other.dtheta) == \
                (entry.dx, entry.dy, entry.dtheta)

    def test_single_cell_config(self):
        cfg = LibraryConfig(r_min=2.0, r_max=2.0, n_r=1, beta_min=0.0,
                            beta_max=0.0, n_beta=1)
        lib = build_curve_library(cfg)
        assert len(lib.entries) == 1
        entry = lib.entries[(0, 0)]
        assert entry.params.s_f == pytest.approx(2.0, abs=1e-3)
        assert max_abs_curvature(entry.params) < 1e-4

    def test_build_is_deterministic(self):
        cfg = LibraryConfig(n_r=3, n_beta=5)
        a = build_curve_library(cfg)
        b = build_curve_library(cfg)
        assert a.entries.keys() == b.entries.keys()
        for key in a.entries:
            assert a.entries[key].params == b.entries[key].params
