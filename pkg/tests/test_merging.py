"""Edge preparation (thinning, orientation) and the gradient-field mergers."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgesal.merging import (MergerKind, NMS_FLOOR, POST_MERGERS,
                             PRE_MERGERS, PreparedEdges,
                             across_edge_orientation, gdm_run,
                             gdm_run_color, merge_post, merge_pre,
                             prepare_edges_post, prepare_saliency_post)
from edgesal.fields import gaussian_blur
from edgesal.solver import KernelCache, VectorField, gradient


def _wrapped(delta):
    """Angle difference folded into (-pi, pi]."""
    return np.angle(np.exp(1j * delta))


def _ridge(height, width, column, sharpness=8.0):
    cols = np.arange(width, dtype=np.float64)
    profile = np.exp(-((cols - column) ** 2) / sharpness)
    return np.tile(profile, (height, 1))


class TestAcrossEdgeOrientation:
    def test_vertical_ridge_points_across_horizontally(self):
        theta = across_edge_orientation(_ridge(24, 21, 10))
        assert np.abs(np.cos(theta[:, 8:13])).min() >= 0.99

    def test_horizontal_ridge_points_across_vertically(self):
        theta = across_edge_orientation(_ridge(24, 21, 10).T)
        assert np.abs(np.sin(theta[8:13, :])).min() >= 0.99

    def test_diagonal_ridge_at_forty_five_degrees(self):
        yy, xx = np.mgrid[0:32, 0:32].astype(np.float64)
        field = np.exp(-((xx - yy) ** 2) / 8.0)
        theta = across_edge_orientation(field)
        band = np.abs(xx - yy) <= 1
        interior = band[8:-8, 8:-8]
        angles = theta[8:-8, 8:-8][interior]
        assert np.abs(np.abs(angles) - math.pi / 4).max() <= 0.1

    def test_range_is_half_circle(self):
        rng = np.random.default_rng(0)
        theta = across_edge_orientation(rng.random((16, 16)))
        assert theta.min() > -math.pi / 2 - 1e-12
        assert theta.max() <= math.pi / 2 + 1e-12


class TestPrepareEdges:
    def test_gaussian_ridge_thins_to_single_column_then_dilates(self):
        prepared = prepare_edges_post(_ridge(24, 21, 10))
        assert (prepared.strength[:, 9:12] == 1.0).all()
        assert (prepared.strength[:, :9] == 0.0).all()
        assert (prepared.strength[:, 12:] == 0.0).all()
        assert prepared.valid[:, 9:12].all()
        assert not prepared.valid[:, :9].any()
        assert np.abs(prepared.theta[prepared.valid]).max() <= 1e-9

    def test_flat_two_pixel_crest_keeps_both_columns(self):
        field = np.zeros((16, 20))
        field[:, 8] = 0.5
        field[:, 9] = 1.0
        field[:, 10] = 1.0
        field[:, 11] = 0.5
        prepared = prepare_edges_post(field)
        # ties survive (comparison is "at least as strong"), so the two
        # crest columns both stay and dilation spreads one column outward
        assert (prepared.strength[:, 9:11] == 1.0).all()
        assert (prepared.strength[:, 8] == 1.0).all()
        assert (prepared.strength[:, 11] == 1.0).all()
        assert (prepared.strength[:, :8] == 0.0).all()
        assert (prepared.strength[:, 12:] == 0.0).all()

    def test_isolated_pixel_survives_and_dilates_to_plus(self):
        field = np.zeros((15, 15))
        field[7, 7] = 0.8
        prepared = prepare_edges_post(field)
        expected = np.zeros((15, 15))
        for r, c in ((7, 7), (6, 7), (8, 7), (7, 6), (7, 8)):
            expected[r, c] = 0.8
        assert np.array_equal(prepared.strength, expected)
        assert prepared.valid.sum() == 5

    def test_everything_below_floor_yields_empty_result(self):
        field = np.full((12, 12), NMS_FLOOR * 0.9)
        prepared = prepare_edges_post(field)
        assert (prepared.strength == 0.0).all()
        assert not prepared.valid.any()

    def test_strength_never_exceeds_input_maximum(self):
        rng = np.random.default_rng(3)
        field = rng.random((20, 20))
        prepared = prepare_edges_post(field)
        assert prepared.strength.max() <= field.max() + 1e-12
        assert (prepared.strength >= 0.0).all()

    def test_rejects_non_2d(self):
        with pytest.raises(ValueError):
            prepare_edges_post(np.zeros((4, 4, 3)))

    def test_prepare_saliency_is_a_blur(self):
        rng = np.random.default_rng(21)
        field = rng.random((16, 16))
        out = prepare_saliency_post(field, sigma=3.0)
        assert np.array_equal(out, gaussian_blur(field, 3.0))
        assert out.std() < field.std()


class TestMergePost:
    def _random_setup(self, seed, shape=(12, 14)):
        rng = np.random.default_rng(seed)
        grad = VectorField(ex=rng.normal(size=shape),
                           ey=rng.normal(size=shape))
        valid = rng.random(shape) < 0.6
        strength = np.where(valid, rng.uniform(0.1, 1.0, shape), 0.0)
        theta = np.where(valid, rng.uniform(-math.pi / 2, math.pi / 2,
                                            shape), 0.0)
        prepared = PreparedEdges(strength=strength, theta=theta, valid=valid)
        return grad, prepared

    def test_norm_is_geometric_mean_with_edge_strength(self):
        grad, prepared = self._random_setup(1)
        merged = merge_post(grad, prepared)
        expected = np.sqrt(prepared.strength * grad.norm())
        assert np.allclose(merged.norm()[prepared.valid],
                           expected[prepared.valid], atol=1e-12)
        assert (merged.norm()[~prepared.valid] == 0.0).all()

    def test_direction_follows_edge_axis_toward_the_gradient(self):
        grad, prepared = self._random_setup(2)
        merged = merge_post(grad, prepared)
        live = prepared.valid & (merged.norm() > 1e-12)
        # same axis as the prepared orientation...
        axis_delta = _wrapped(2.0 * (merged.orientation() - prepared.theta))
        assert np.abs(axis_delta[live]).max() <= 1e-9
        # ...with the half-turn chosen to face the original gradient
        alignment = np.cos(merged.orientation() - grad.orientation())
        assert alignment[live].min() >= -1e-12

    def test_orientation_stays_in_principal_range(self):
        grad, prepared = self._random_setup(3)
        merged = merge_post(grad, prepared)
        assert merged.orientation().min() > -math.pi - 1e-12
        assert merged.orientation().max() <= math.pi + 1e-12

    def test_opposing_gradient_flips_by_half_turn_and_wraps(self):
        theta_c = math.pi - 0.1
        prepared = PreparedEdges(strength=np.ones((1, 1)),
                                 theta=np.full((1, 1), theta_c),
                                 valid=np.ones((1, 1), dtype=bool))
        angle = theta_c - math.pi
        grad = VectorField(ex=np.full((1, 1), 2.0 * math.cos(angle)),
                           ey=np.full((1, 1), 2.0 * math.sin(angle)))
        merged = merge_post(grad, prepared)
        assert merged.orientation()[0, 0] == pytest.approx(angle, abs=1e-12)
        assert merged.norm()[0, 0] == pytest.approx(math.sqrt(2.0), abs=1e-12)

    def test_zero_gradient_stays_zero(self):
        prepared = PreparedEdges(strength=np.ones((4, 4)),
                                 theta=np.zeros((4, 4)),
                                 valid=np.ones((4, 4), dtype=bool))
        merged = merge_post(VectorField(np.zeros((4, 4)), np.zeros((4, 4))),
                            prepared)
        assert (merged.norm() == 0.0).all()


class TestMergePre:
    @settings(deadline=None, max_examples=25)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_norm_formula_and_direction_preservation(self, seed):
        rng = np.random.default_rng(seed)
        shape = (9, 11)
        grad = VectorField(ex=rng.normal(size=shape),
                           ey=rng.normal(size=shape))
        edges = rng.random(shape)
        merged = merge_pre(grad, edges)
        expected = 0.5 * (np.sqrt(edges * grad.norm()) + grad.norm())
        assert np.allclose(merged.norm(), expected, atol=1e-12)
        cross = merged.ex * grad.ey - merged.ey * grad.ex
        dot = merged.ex * grad.ex + merged.ey * grad.ey
        assert np.abs(cross).max() <= 1e-9
        assert dot.min() >= -1e-12

    def test_zero_edges_halve_the_gradient(self):
        rng = np.random.default_rng(5)
        grad = VectorField(ex=rng.normal(size=(6, 6)),
                           ey=rng.normal(size=(6, 6)))
        merged = merge_pre(grad, np.zeros((6, 6)))
        assert np.allclose(merged.ex, 0.5 * grad.ex, atol=1e-12)
        assert np.allclose(merged.ey, 0.5 * grad.ey, atol=1e-12)

    def test_unit_edge_on_unit_gradient_is_identity(self):
        grad = VectorField(ex=np.ones((3, 3)), ey=np.zeros((3, 3)))
        merged = merge_pre(grad, np.ones((3, 3)))
        assert np.allclose(merged.ex, 1.0, atol=1e-12)
        assert np.allclose(merged.ey, 0.0, atol=1e-12)


class TestGdmRun:
    def _square_scene(self, size=64):
        gt = np.zeros((size, size), dtype=bool)
        gt[20:44, 20:44] = True
        edges = np.zeros((size, size))
        edges[20, 20:44] = 1.0
        edges[43, 20:44] = 1.0
        edges[20:44, 20] = 1.0
        edges[20:44, 43] = 1.0
        return gt, edges

    def test_deterministic_and_bounded(self):
        rng = np.random.default_rng(6)
        values = rng.random((40, 40))
        edges = np.zeros((40, 40))
        edges[10:30, 15] = 1.0
        first = gdm_run(values, edges, POST_MERGERS, cache=KernelCache())
        second = gdm_run(values, edges, POST_MERGERS, cache=KernelCache())
        assert np.array_equal(first, second)
        assert first.min() >= 0.0 and first.max() <= 1.0

    def test_zero_edges_flatten_post_output(self):
        values = np.random.default_rng(7).random((32, 32))
        out = gdm_run(values, np.zeros((32, 32)), POST_MERGERS)
        assert np.abs(out).max() <= 1e-9

    def test_post_merge_recovers_blurred_square(self):
        from edgesal.fields import gaussian_blur
        gt, edges = self._square_scene()
        blurred = gaussian_blur(gt.astype(np.float64), 4.0)
        out = gdm_run(blurred, edges, POST_MERGERS)
        before = np.abs(blurred - gt).mean()
        after = np.abs(out - gt).mean()
        assert after < before

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            gdm_run(np.zeros((8, 8)), np.zeros((8, 9)))

    def test_merger_pair_must_be_norm_then_orientation(self):
        values = np.zeros((8, 8))
        with pytest.raises(ValueError):
            gdm_run(values, values, (MergerKind.POST_NORM,
                                     MergerKind.PRE_NORM))
        with pytest.raises(ValueError):
            gdm_run(values, values, (MergerKind.POST_ORIENTATION,
                                     MergerKind.POST_NORM))

    def test_mixed_merger_pair_is_allowed(self):
        values = np.random.default_rng(8).random((24, 24))
        edges = np.zeros((24, 24))
        edges[6:18, 12] = 1.0
        out = gdm_run(values, edges, (MergerKind.PRE_NORM,
                                      MergerKind.POST_ORIENTATION))
        assert out.shape == (24, 24)
        assert np.isfinite(out).all()

    def test_color_run_matches_per_channel_runs(self):
        rng = np.random.default_rng(9)
        image = rng.random((20, 22, 3))
        edges = np.zeros((20, 22))
        edges[5:15, 11] = 1.0
        color = gdm_run_color(image, edges, PRE_MERGERS)
        for ch in range(3):
            solo = gdm_run(image[:, :, ch], edges, PRE_MERGERS)
            assert np.array_equal(color[:, :, ch], solo)

    def test_color_run_shape_validation(self):
        with pytest.raises(ValueError):
            gdm_run_color(np.zeros((8, 8)), np.zeros((8, 8)))
        with pytest.raises(ValueError):
            gdm_run_color(np.zeros((8, 8, 3)), np.zeros((9, 8)))
