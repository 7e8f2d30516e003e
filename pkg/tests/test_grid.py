"""Rotation candidate grid construction and common-line bin caches."""

import numpy as np
import pytest

from cnlines.errors import DegenerateGeometryError
from cnlines.geometry import commonline_angles, generator_powers, random_rotations, self_commonline
from cnlines.grid import build_grid, pair_line_bins, pair_line_bins_stack


class TestBuildGrid:
    def test_third_column_azimuth_domain(self):
        for n in (3, 7):
            grid = build_grid(n, 15.0, 360)
            az = np.arctan2(grid.rotations[:, 1, 2], grid.rotations[:, 0, 2]) % (2 * np.pi)
            # fold azimuths a hair below 2*pi back to ~0 (boundary rounding)
            az = np.where(az > 2 * np.pi - 1e-9, az - 2 * np.pi, az)
            # points exactly on the axis have arbitrary azimuth
            on_axis = np.hypot(grid.rotations[:, 0, 2], grid.rotations[:, 1, 2]) < 1e-12
            assert np.all(az[~on_axis] < 2 * np.pi / n + 1e-9)
            assert np.all(az[~on_axis] > -1e-9)

    def test_candidates_are_rotations(self):
        grid = build_grid(4, 20.0, 120)
        rots = grid.rotations
        eye = np.einsum("kij,kil->kjl", rots, rots)
        np.testing.assert_allclose(eye, np.broadcast_to(np.eye(3), eye.shape), atol=1e-12)
        np.testing.assert_allclose(np.linalg.det(rots), 1.0, atol=1e-12)

    def test_count_near_target(self):
        # about (360/step) * (180/step) * (360/(n*step)) candidates
        n, step = 11, 4.0
        grid = build_grid(n, step, 360)
        target = 360000 / n
        assert abs(grid.size - target) / target < 0.05

    def test_self_bins_match_direct_computation(self):
        n, L = 5, 360
        grid = build_grid(n, 30.0, L)
        keep = np.flatnonzero(~grid.degenerate)[:20]
        for k in keep:
            r = grid.rotations[k]
            for col, s in enumerate(range(1, (n - 1) // 2 + 1)):
                sc = self_commonline(r, n, s)
                b1 = int(round(sc.alpha_ii * L / (2 * np.pi))) % L
                b2 = int(round(sc.alpha_gi * L / (2 * np.pi))) % L
                got = set(grid.self_bins[k, col])
                # the partner line of exponent s is the line of exponent n-s;
                # either labeling of the cached pair is acceptable
                sc2 = self_commonline(r, n, n - s)
                b3 = int(round(sc2.alpha_ii * L / (2 * np.pi))) % L
                assert got in ({b1, b2}, {b1, b3})

    def test_pole_candidates_flagged(self):
        grid = build_grid(3, 10.0, 360)
        near_pole = np.abs(grid.rotations[:, 2, 2]) > np.cos(np.deg2rad(5.0))
        assert np.all(grid.degenerate[near_pole])

    def test_collinear_self_pairs_flagged(self):
        # equator-view candidates have self pairs separated by ~pi; their
        # correlation saturates on any image so they must be excluded
        n, L = 7, 360
        grid = build_grid(n, 4.0, L)
        diff = np.abs(grid.self_bins[..., 0] - grid.self_bins[..., 1])
        diff = np.minimum(diff, L - diff)
        collinear = (np.abs(diff - L // 2) < 2).any(axis=1)
        assert np.all(grid.degenerate[collinear])
        assert not np.all(grid.degenerate)

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            build_grid(0, 4.0, 360)
        with pytest.raises(ValueError):
            build_grid(3, -1.0, 360)


class TestPairLineBins:
    def test_matches_commonline_angles(self, rng):
        n, L = 4, 360
        ri, rj = random_rotations(2, rng)
        bins, valid = pair_line_bins_stack(ri, rj, n, L)
        assert bins.shape == (1, 1, n, 2)
        for s in range(n):
            assert valid[0, 0, s]
            pair = commonline_angles(ri, rj, n, s)
            assert bins[0, 0, s, 0] == int(round(pair.alpha_ij * L / (2 * np.pi))) % L
            assert bins[0, 0, s, 1] == int(round(pair.alpha_ji * L / (2 * np.pi))) % L

    def test_stack_shapes(self, rng):
        ra = random_rotations(3, rng)
        rb = random_rotations(5, rng)
        bins, valid = pair_line_bins_stack(ra, rb, 3, 120)
        assert bins.shape == (3, 5, 3, 2)
        assert valid.shape == (3, 5, 3)

    def test_single_pair_wrapper(self, rng):
        ri, rj = random_rotations(2, rng)
        out = pair_line_bins(ri, rj, 3, 360)
        assert len(out) == 3
        assert all(v is None or len(v) == 2 for v in out)

    def test_degenerate_exponent_is_none(self):
        # identical rotations: the s=0 planes coincide and give no line
        r = random_rotations(1, np.random.default_rng(0))[0]
        out = pair_line_bins(r, r, 3, 360)
        assert out[0] is None
        assert out[1] is not None and out[2] is not None

    def test_all_degenerate_raises(self):
        with pytest.raises(DegenerateGeometryError):
            pair_line_bins(np.eye(3), np.eye(3), 1, 360)
