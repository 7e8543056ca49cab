import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import monte_carlo_covariance

from viewsub.mesh import TriangleMesh, transform_mesh
from viewsub.pose import (
    Category,
    DegenerateMeshError,
    categorize,
    cpca_covariance,
    eigenvalue_ratios,
    normalize_pose,
    principal_axes,
)
from viewsub.synthetic import box, random_blob, random_mesh, random_rotation

PLATE = TriangleMesh(
    [[-0.5, -0.5, 0], [0.5, -0.5, 0], [0.5, 0.5, 0], [-0.5, 0.5, 0]], [[0, 1, 2], [0, 2, 3]]
)


class TestCovariance:
    def test_plate_closed_form(self):
        c, C = cpca_covariance(PLATE)
        np.testing.assert_allclose(c, 0, atol=1e-15)
        np.testing.assert_allclose(C, np.diag([1 / 12, 1 / 12, 0]), atol=1e-15)

    def test_plate_against_sampling(self):
        _, C = cpca_covariance(PLATE)
        _, C_mc = monte_carlo_covariance(PLATE, seed=1)
        assert np.linalg.norm(C - C_mc) / np.linalg.norm(C) < 1e-2

    def test_single_triangle_centroid(self):
        m = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
        c, _ = cpca_covariance(m)
        np.testing.assert_allclose(c, [1 / 3, 1 / 3, 0], atol=1e-15)

    def test_translation(self, rng):
        m = random_mesh(rng)
        t = rng.normal(size=3) * 10
        c0, C0 = cpca_covariance(m)
        c1, C1 = cpca_covariance(transform_mesh(m, np.eye(3), t))
        np.testing.assert_allclose(c1, c0 + t, atol=1e-12)
        np.testing.assert_allclose(C1, C0, atol=1e-11)

    def test_zero_area(self):
        m = TriangleMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])
        with pytest.raises(DegenerateMeshError):
            cpca_covariance(m)

    def test_box_against_sampling(self):
        m = box((4, 2, 1))
        c, C = cpca_covariance(m)
        _, C_mc = monte_carlo_covariance(m, seed=2)
        np.testing.assert_allclose(c, 0, atol=1e-14)
        assert np.linalg.norm(C - C_mc) / np.linalg.norm(C) < 1e-2


class TestPrincipalAxes:
    def test_diagonal(self):
        lam, axes = principal_axes(np.diag([2.0, 4.0, 1.0]))
        np.testing.assert_allclose(lam, [4, 2, 1])
        np.testing.assert_allclose(np.abs(axes), [[0, 1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)

    def test_isotropic(self):
        lam, axes = principal_axes(np.eye(3))
        np.testing.assert_allclose(lam, 1)
        np.testing.assert_allclose(axes @ axes.T, np.eye(3), atol=1e-12)

    def test_plate(self):
        lam, axes = principal_axes(cpca_covariance(PLATE)[1])
        np.testing.assert_allclose(lam, [1 / 12, 1 / 12, 0], atol=1e-15)
        np.testing.assert_allclose(np.abs(axes[2]), [0, 0, 1], atol=1e-12)

    def test_right_handed(self, rng):
        for _ in range(50):
            a = rng.normal(size=(3, 3))
            _, axes = principal_axes(a + a.T)
            assert np.linalg.det(axes) == pytest.approx(1.0, abs=1e-9)
            np.testing.assert_allclose(axes @ axes.T, np.eye(3), atol=1e-9)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            principal_axes([[1, 2, 0], [0, 1, 0], [0, 0, 1]])


class TestRatios:
    @pytest.mark.parametrize(
        "lam, expected",
        [((4, 2, 1), (0.5, 0.25, 0.5)), ((1, 1, 1), (1, 1, 1)), ((1, 0, 0), (0, 0, 1))],
    )
    def test_examples(self, lam, expected):
        assert eigenvalue_ratios(*lam) == pytest.approx(expected, abs=1e-15)

    def test_point_like(self):
        with pytest.raises(DegenerateMeshError):
            eigenvalue_ratios(1e-13, 0, 0)

    @settings(max_examples=200)
    @given(st.lists(st.floats(0, 1e3), min_size=3, max_size=3).filter(lambda v: max(v) > 1e-6))
    def test_product_and_range(self, lam):
        a1, a2, a3 = eigenvalue_ratios(*sorted(lam, reverse=True))
        assert 0 <= a1 <= 1 and 0 <= a2 <= 1 and 0 <= a3 <= 1
        assert abs(a2 - a1 * a3) <= 1e-9


class TestCategorize:
    def test_elongated(self):
        assert categorize(0.2, 0.2, 0.4) == Category.ELONGATED

    def test_spherical(self):
        assert categorize(1, 1, 0.4) == Category.SPHERICAL

    def test_zero_threshold(self):
        assert categorize(0.01, 0.0, 0.0) == Category.SPHERICAL

    def test_boundary_inclusive(self):
        assert categorize(0.3, 0.4, 0.5) == Category.ELONGATED


class TestNormalizePose:
    def test_box(self):
        m, info = normalize_pose(box((4, 2, 1)))
        np.testing.assert_allclose(np.abs(info.rotation), np.eye(3), atol=1e-12)
        ext = m.vertices.max(axis=0) - m.vertices.min(axis=0)
        assert ext[0] > ext[1] > ext[2]
        assert np.sqrt((m.vertices**2).sum(axis=1)).max() == pytest.approx(1.0, abs=1e-12)

    def test_idempotent(self, rng):
        m, _ = normalize_pose(random_blob(rng))
        m2, info = normalize_pose(m)
        np.testing.assert_allclose(np.abs(info.rotation), np.eye(3), atol=1e-6)
        assert info.scale == pytest.approx(1.0, abs=1e-6)
        np.testing.assert_allclose(np.abs(m2.vertices), np.abs(m.vertices), atol=1e-6)

    def test_rotation_invariant_eigenvalues(self, rng):
        m = random_blob(rng)
        _, a = normalize_pose(m)
        _, b = normalize_pose(transform_mesh(m, random_rotation(rng), rng.normal(size=3)))
        np.testing.assert_allclose(b.eigenvalues, a.eigenvalues, rtol=1e-6)

    def test_pose_info_invariants(self, rng):
        _, info = normalize_pose(random_blob(rng), t_c=0.4)
        r = info.rotation
        np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-9)
        assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-9)
        l1, l2, l3 = info.eigenvalues
        assert l1 >= l2 >= l3 >= 0
        assert info.category is not None

    def test_scale_covariance(self, rng):
        m = random_mesh(rng)
        _, C = cpca_covariance(m)
        _, C3 = cpca_covariance(transform_mesh(m, 3.0 * np.eye(3)))
        np.testing.assert_allclose(np.linalg.eigvalsh(C3), 9 * np.linalg.eigvalsh(C), rtol=1e-9)
        _, i1 = normalize_pose(m)
        _, i3 = normalize_pose(transform_mesh(m, 3.0 * np.eye(3)))
        np.testing.assert_allclose(i3.ratios, i1.ratios, atol=1e-9)

    def test_degenerate_propagates(self):
        m = TriangleMesh([[0, 0, 0], [0, 0, 0], [0, 0, 0]], [[0, 1, 2]])
        with pytest.raises(DegenerateMeshError):
            normalize_pose(m)


def test_rod_ratio_rule():
    a1, a2, a3 = eigenvalue_ratios(1.0, 1e-12, 0.0)
    assert (a1, a2, a3) == (0.0, 0.0, 1.0)
    assert math.hypot(a1, a3) == 1.0
