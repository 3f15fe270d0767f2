"""Log-odds algebra, fusion, patch extraction/insertion."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridwise.errors import OutOfBounds, ResolutionMismatch
from gridwise.grid import (DEFAULT_TAU, FREE, L_MAX, OCCUPIED, UNKNOWN,
                           OccupancyGrid, Pose2D, extract_patch, fuse_cell,
                           fuse_grid, logit_to_prob, normalize_heading,
                           prob_to_logit, trinarize)

probs = st.floats(min_value=1e-6, max_value=1.0 - 1e-6)
logits = st.floats(min_value=-13.0, max_value=13.0)


class TestLogitAlgebra:
    def test_examples(self):
        assert prob_to_logit(0.5) == 0.0
        assert prob_to_logit(0.8) == pytest.approx(math.log(4.0), abs=1e-4)
        assert prob_to_logit(0.2) == pytest.approx(-math.log(4.0), abs=1e-4)
        assert logit_to_prob(0.0) == 0.5
        assert logit_to_prob(1.3863) == pytest.approx(0.8, abs=1e-4)
        # two fused p=0.8 beliefs land on 16/17
        assert logit_to_prob(2.7726) == pytest.approx(16.0 / 17.0, abs=1e-4)

    def test_clamps_out_of_domain_probabilities(self):
        assert np.isfinite(prob_to_logit(0.0))
        assert np.isfinite(prob_to_logit(1.0))
        assert prob_to_logit(0.0) == prob_to_logit(1e-6)

    @given(p=probs)
    def test_round_trip(self, p):
        assert logit_to_prob(prob_to_logit(p)) == pytest.approx(p, abs=1e-12)

    @given(l=logits)
    def test_tanh_half_identity(self, l):
        assert 2.0 * logit_to_prob(l) - 1.0 == pytest.approx(
            math.tanh(l / 2.0), abs=1e-12)


class TestFuseCell:
    def test_examples(self):
        assert fuse_cell(0.0, 0.0) == 0.0
        assert fuse_cell(1.3863, 1.3863) == pytest.approx(2.7726)
        assert fuse_cell(1.3863, -1.3863) == 0.0

    @given(a=logits, b=logits)
    def test_commutative(self, a, b):
        assert fuse_cell(a, b) == fuse_cell(b, a)

    @given(a=st.floats(-15, 15), b=st.floats(-15, 15), c=st.floats(-15, 15))
    def test_associative_within_clamp(self, a, b, c):
        assert fuse_cell(fuse_cell(a, b), c) == pytest.approx(
            fuse_cell(a, fuse_cell(b, c)), abs=1e-12)

    def test_n_copies(self):
        l = prob_to_logit(0.7)
        acc = 0.0
        for _ in range(5):
            acc = fuse_cell(acc, l)
        assert acc == pytest.approx(5 * l, abs=1e-12)

    def test_clamp(self):
        assert fuse_cell(L_MAX, 10.0) == L_MAX
        assert fuse_cell(-L_MAX, -10.0) == -L_MAX


class TestTrinarize:
    def test_all_zero_is_unknown(self):
        g = OccupancyGrid(4, 4, 1.0, (0.0, 4.0))
        assert np.all(trinarize(g) == UNKNOWN)

    def test_threshold_arithmetic(self):
        tau = prob_to_logit(0.75)
        cells = np.array([[-5.0, 0.0, 5.0]])
        out = trinarize(cells, tau)
        assert out.tolist() == [[FREE, UNKNOWN, OCCUPIED]]

    def test_boundary_goes_to_unknown(self):
        tau = 1.0986
        assert trinarize(np.array([tau]), tau)[0] == UNKNOWN
        assert trinarize(np.array([-tau]), tau)[0] == UNKNOWN

    def test_rejects_nonpositive_tau(self):
        with pytest.raises(ValueError):
            trinarize(np.zeros((2, 2)), 0.0)


class TestPose:
    def test_heading_normalized(self):
        assert Pose2D(0, 0, math.pi).heading == pytest.approx(math.pi)
        assert Pose2D(0, 0, -math.pi).heading == pytest.approx(math.pi)
        assert Pose2D(0, 0, 3 * math.pi).heading == pytest.approx(math.pi)
        assert normalize_heading(math.pi / 2 + 2 * math.pi) == pytest.approx(
            math.pi / 2)


class TestFuseGrid:
    def test_all_zero_source_changes_nothing(self, random_map):
        before = random_map.cells.copy()
        src = OccupancyGrid.vehicle_patch(6, random_map.resolution)
        pose = Pose2D(10.0, 7.0, 0.0)
        fuse_grid(random_map, src, pose)
        assert np.array_equal(random_map.cells, before)

    def test_sparse_impulse_identity_pose(self):
        target = OccupancyGrid(16, 16, 1.0, (0.0, 16.0))
        src = OccupancyGrid.vehicle_patch(4, 1.0)
        src.cells[1, 2] = 2.0
        # patch centered mid-map, axis aligned: lands on a unique cell
        fuse_grid(target, src, Pose2D(8.0, 8.0, 0.0))
        assert target.cells.sum() == 2.0
        assert np.count_nonzero(target.cells) == 1

    def test_rotated_impulse_matches_brute_force(self):
        res = 1.0
        target = OccupancyGrid(9, 9, res, (0.0, 9.0))
        src = OccupancyGrid.vehicle_patch(3, res)
        src.cells[1, 0] = 2.0
        pose = Pose2D(4.5, 4.5, math.pi / 2)
        fuse_grid(target, src, pose)
        # brute-force transform of the one lit source cell center
        xv = (0 + 0.5) * res - 1.5
        yv = (3 - 1 - 0.5) * res - 1.5
        wx = pose.x + math.cos(pose.heading) * xv - math.sin(pose.heading) * yv
        wy = pose.y + math.sin(pose.heading) * xv + math.cos(pose.heading) * yv
        row, col = target.world_to_cell(wx, wy)
        assert target.cells[row, col] == 2.0
        assert np.count_nonzero(target.cells) == 1

    def test_resolution_mismatch_raises(self, random_map):
        src = OccupancyGrid.vehicle_patch(4, random_map.resolution * 2)
        with pytest.raises(ResolutionMismatch):
            fuse_grid(random_map, src, Pose2D(5, 5, 0))

    def test_skipped_count(self, random_map):
        src = OccupancyGrid.vehicle_patch(4, random_map.resolution)
        # patch hanging half off the west edge
        n_skipped = fuse_grid(random_map, src, Pose2D(0.0, 7.0, 0.0))
        assert n_skipped == 8

    def test_order_independence(self, random_map, rng):
        a = OccupancyGrid.vehicle_patch(8, random_map.resolution,
                                        rng.normal(size=(8, 8)))
        b = OccupancyGrid.vehicle_patch(8, random_map.resolution,
                                        rng.normal(size=(8, 8)))
        pa, pb = Pose2D(9.0, 8.0, 0.4), Pose2D(10.0, 7.0, -1.1)
        m1 = random_map.copy()
        m2 = random_map.copy()
        fuse_grid(m1, a, pa)
        fuse_grid(m1, b, pb)
        fuse_grid(m2, b, pb)
        fuse_grid(m2, a, pa)
        assert np.allclose(m1.cells, m2.cells, atol=1e-9)


class TestExtractPatch:
    def test_axis_aligned_center_equals_subwindow(self, random_map):
        # pose on the cell lattice so the gather is an exact sub-window
        pose = Pose2D(10.0, 7.5, 0.0)
        patch = extract_patch(random_map, pose, 10)
        row, col = random_map.world_to_cell(pose.x, pose.y)
        want = random_map.cells[row - 5:row + 5, col - 5:col + 5]
        assert np.array_equal(patch.cells, want)

    def test_fully_outside_raises(self, random_map):
        with pytest.raises(OutOfBounds):
            extract_patch(random_map, Pose2D(100.0, 100.0, 0.0), 8)

    def test_quarter_turn_equals_rot90(self, random_map):
        pose0 = Pose2D(10.0, 7.5, 0.0)
        pose90 = Pose2D(10.0, 7.5, math.pi / 2)
        p0 = extract_patch(random_map, pose0, 8)
        p90 = extract_patch(random_map, pose90, 8)
        assert np.array_equal(p90.cells, np.rot90(p0.cells, 3))

    def test_outside_cells_read_unknown(self, random_map):
        pose = Pose2D(0.5, 14.5, 0.0)  # NW corner, patch mostly off-map
        patch = extract_patch(random_map, pose, 12)
        assert np.any(patch.cells == 0.0)

    def test_round_trip_heading_zero(self, random_map):
        pose = Pose2D(9.3, 6.9, 0.0)
        patch = extract_patch(random_map, pose, 8)
        blank = OccupancyGrid(random_map.width, random_map.height,
                              random_map.resolution, random_map.origin)
        fuse_grid(blank, patch, pose)
        touched = blank.cells != 0.0
        assert touched.sum() == 64
        assert np.array_equal(blank.cells[touched], random_map.cells[touched])


class TestGridValidation:
    def test_rejects_bad_dimensions(self):
        with pytest.raises(ValueError):
            OccupancyGrid(0, 4, 1.0, (0, 0))
        with pytest.raises(ValueError):
            OccupancyGrid(4, 4, -1.0, (0, 0))

    def test_rejects_non_finite_cells(self):
        cells = np.zeros((4, 4))
        cells[0, 0] = np.inf
        with pytest.raises(ValueError):
            OccupancyGrid(4, 4, 1.0, (0.0, 4.0), cells)

    def test_zero_cell_means_half_probability(self):
        g = OccupancyGrid(2, 2, 1.0, (0.0, 2.0))
        assert np.all(g.probabilities() == 0.5)
