import numpy as np
import pytest

from sphtransport.basis import SHBasis, sh_eval
from sphtransport.errors import ConfigurationError
from sphtransport.geometry import NodeSet, icosahedral_nodes, project_to_sphere
from sphtransport.interp_local import build_stencils, eval_local
from sphtransport.interp_pu import (
    PUCover,
    bspline_weight,
    build_cover,
    eval_pu,
    fibonacci_nodes,
    pu_weights,
)

from conftest import random_sphere_points


@pytest.fixture(scope="module")
def cover49(nodes2562):
    return build_cover(nodes2562, 49)


class TestBsplineWeight:
    def test_value_at_zero(self):
        assert bspline_weight(0.0) == pytest.approx(2.0 / 3.0)

    def test_branch_continuity_at_half(self):
        assert bspline_weight(0.5) == pytest.approx(1.0 / 6.0)
        assert bspline_weight(np.nextafter(0.5, 0.0)) == pytest.approx(1.0 / 6.0, rel=1e-6)

    def test_zero_beyond_support(self):
        assert bspline_weight(1.0) == 0.0
        assert bspline_weight(2.5) == 0.0

    def test_negative_rejected(self):
        with pytest.raises(ConfigurationError):
            bspline_weight(-0.1)

    def test_c2_along_transect(self):
        # finite-difference second derivative continuous across r=1/2 and r=1
        h = 1e-3
        for r0 in (0.5, 1.0):
            def second(r):
                return (bspline_weight(r + h) - 2 * bspline_weight(r) + bspline_weight(r - h)) / h**2

            assert abs(second(r0 - 5 * h) - second(r0 + 5 * h)) <= 1e-4 + 0.1


class TestFibonacciNodes:
    def test_exact_count(self):
        assert fibonacci_nodes(103).n_nodes == 103

    def test_on_sphere(self):
        pts = fibonacci_nodes(64).points
        np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-13)

    def test_invalid_count(self):
        with pytest.raises(ConfigurationError):
            fibonacci_nodes(0)


class TestBuildCover:
    def test_radius_and_patch_count_n49(self, cover49, nodes2562):
        assert cover49.radius == pytest.approx(2.0 * np.sqrt(49.0 / 2562.0))
        assert cover49.radius == pytest.approx(0.276591, abs=1e-6)
        assert cover49.n_patches == int(np.ceil(2.5 * 2562 / 49))
        assert cover49.n_patches == 131

    def test_radius_and_count_arithmetic_n100(self):
        # N=4096, n=100, a=2.5: R=0.3125, M=103
        rng = np.random.default_rng(7)
        pts = random_sphere_points(rng, 4096)
        nodes = NodeSet.from_points(pts)
        cover = build_cover(nodes, 100, a=2.5)
        assert cover.radius == pytest.approx(0.3125)
        assert cover.n_patches == 103

    def test_members_match_brute_force(self, cover49, nodes2562):
        for patch in cover49.patches[::13]:
            d = np.linalg.norm(nodes2562.points - patch.center, axis=1)
            want = np.flatnonzero(d < cover49.radius)
            np.testing.assert_array_equal(patch.member_indices, want)

    def test_small_multiplicity_rejected(self, nodes2562):
        with pytest.raises(ConfigurationError):
            build_cover(nodes2562, 49, a=1.0)

    def test_explicit_centers_accepted(self, nodes2562):
        centers = fibonacci_nodes(140)
        cover = build_cover(nodes2562, 49, patch_centers=centers)
        assert cover.n_patches == 140


class TestPUWeights:
    def test_weights_sum_to_one(self, cover49, rng):
        pts = random_sphere_points(rng, 10000)
        for x in pts[:200]:
            entries = pu_weights(cover49, x)
            if entries:
                assert abs(sum(w for _, w in entries) - 1.0) <= 1e-14

    def test_full_cover_weight_sums(self, cover49, rng):
        # batched check over many points via eval of the constant field
        targets = random_sphere_points(rng, 10000)
        got = eval_pu(cover49, np.ones(2562), targets)
        np.testing.assert_allclose(got, 1.0, atol=1e-13)

    def test_single_patch_weight_one(self, cover49):
        # a point at a patch center that no other patch reaches
        for patch in cover49.patches:
            d = np.linalg.norm(
                np.array([q.center for q in cover49.patches]) - patch.center, axis=1
            )
            if np.sort(d)[1] > cover49.radius:
                entries = pu_weights(cover49, patch.center)
                assert len(entries) == 1 and entries[0][1] == pytest.approx(1.0)
                break

    def test_symmetric_midpoint_half_half(self):
        # two sphere-covering patches with centers mirrored about the target
        nodes = icosahedral_nodes(3)
        centers = NodeSet.from_points(
            project_to_sphere(np.array([[1.0, 0.2, 0.0], [1.0, -0.2, 0.0]]))
        )
        cover = build_cover(nodes, 642, patch_centers=centers)
        mid = np.array([1.0, 0.0, 0.0])
        entries = dict(pu_weights(cover, mid))
        assert entries[0] == pytest.approx(0.5)
        assert entries[1] == pytest.approx(0.5)


class TestEvalPU:
    def test_reproduces_nodal_values(self, cover49, nodes2562):
        f = np.cos(2.0 * nodes2562.points[:, 1]) * nodes2562.points[:, 0]
        got = eval_pu(cover49, f, nodes2562.points)
        assert np.linalg.norm(got - f) <= 1e-10 * np.linalg.norm(f)

    def test_degree3_harmonic_reproduction(self, cover49, nodes2562, rng):
        sh = SHBasis(3)
        col = 2 * 2 + (2 + 1)  # Y_2^1
        f = sh_eval(sh, nodes2562.points)[:, col]
        targets = random_sphere_points(rng, 1000)
        got = eval_pu(cover49, f, targets)
        want = sh_eval(sh, targets)[:, col]
        assert np.linalg.norm(got - want) / np.linalg.norm(want) <= 1e-8

    def test_wrong_field_length(self, cover49):
        with pytest.raises(ConfigurationError):
            eval_pu(cover49, np.zeros(3), np.array([[0.0, 0.0, 1.0]]))

    def test_dense_limit_matches_local(self, rng):
        # one all-containing patch vs a local interpolator with n = N:
        # both reduce to the same single augmented system
        pts = random_sphere_points(rng, 60)
        nodes = NodeSet.from_points(pts)
        f = np.sin(pts[:, 0] * 2.0) + pts[:, 2]
        li = build_stencils(nodes, 60)
        targets = random_sphere_points(rng, 100)
        got_local = eval_local(li, f, targets)

        center = NodeSet.from_points(np.array([[0.0, 0.0, 1.0]]))
        cover = build_cover(nodes, 60, patch_centers=center)
        # force an all-containing patch: radius 2 sqrt(60/60) = 2 covers S^2
        assert cover.radius == pytest.approx(2.0)
        got_pu = eval_pu(cover, f, targets)
        np.testing.assert_allclose(got_pu, got_local, atol=2e-7)

    def test_uncovered_target_falls_back(self, nodes2562):
        # a sparse cover with explicit centers leaves gaps; eval must still
        # return finite values and count the fallbacks
        centers = fibonacci_nodes(40)
        try:
            cover = build_cover(nodes2562, 49, patch_centers=centers)
        except ConfigurationError:
            pytest.skip("cover construction rejected the sparse centers")
        before = cover.uncovered_count
        gap = -centers.points[0]
        vals = eval_pu(cover, np.ones(2562), np.atleast_2d(gap))
        assert np.isfinite(vals).all()
        assert cover.uncovered_count >= before
