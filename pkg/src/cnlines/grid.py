"""Discretized rotation search space with cached self-common-line bins.

The search space is a fundamental domain of SO(3) modulo the symmetry
group: rotations are generated as R_z(theta) @ Rtilde(phi, tilt) where the
third row of Rtilde has spherical angles (phi, tilt) and theta spans
[0, 2*pi/n).  Each candidate is then normalized by a symmetry power so that
the azimuth of its third column lies in [0, 2*pi/n).

For every candidate the quantized ray bins of its self common lines are
precomputed, which turns score evaluation into table lookups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError
from .geometry import (
    PARALLEL_TOL,
    angles_to_bins,
    complete_third_row,
    euler_zxz,
    generator_powers,
)

# Candidates viewing almost straight down the symmetry axis have no usable
# self common lines; they are flagged and excluded from scoring.
POLE_TILT_DEG = 5.0

# A self-common-line pair that is (nearly) collinear correlates perfectly on
# any image because every ray is conjugate-symmetric to its opposite.  Such
# candidates (viewing directions near the equator) carry no self-line signal
# and would otherwise saturate the self score, so they are flagged too.
COLLINEAR_MARGIN_DEG = 5.0


@dataclass(frozen=True)
class CandidateGrid:
    """Immutable rotation grid plus per-candidate self-common-line bins."""

    n: int
    num_lines: int
    step_deg: float
    rotations: np.ndarray  # (k, 3, 3)
    self_bins: np.ndarray  # (k, floor((n-1)/2), 2) int bins
    degenerate: np.ndarray  # (k,) bool

    @property
    def size(self) -> int:
        return self.rotations.shape[0]

    @property
    def third_rows(self) -> np.ndarray:
        return self.rotations[:, 2, :]


def _self_line_angles(rotations: np.ndarray, n: int) -> np.ndarray:
    """Ray angles of all self common lines: shape (k, n-1), entry s-1 is the
    in-image angle for symmetry exponent s."""
    powers = generator_powers(n)
    out = np.empty((rotations.shape[0], n - 1))
    for s in range(1, n):
        m = np.einsum("kba,bc,kcd->kad", rotations, powers[s], rotations)
        a, _, _ = euler_zxz(m)
        out[:, s - 1] = a
    return out


def build_grid(n: int, step_deg: float, L: int) -> CandidateGrid:
    """Equal-angular-step grid over (azimuth, tilt, in-plane angle).

    Azimuth spans [0, 2*pi), tilt spans (0, pi) at cell midpoints (avoiding
    the poles), and the in-plane angle spans [0, 2*pi/n); the per-axis point
    counts follow the common step so the total is about
    (360/step) * (180/step) * (360/(n*step)).
    """
    if n < 1:
        raise ValueError(f"symmetry order must be >= 1, got {n}")
    if step_deg <= 0:
        raise ValueError(f"step must be positive, got {step_deg}")
    step = np.deg2rad(step_deg)
    num_phi = max(1, int(round(2.0 * np.pi / step)))
    num_tilt = max(1, int(round(np.pi / step)))
    num_inplane = max(1, int(round(2.0 * np.pi / n / step)))
    phis = 2.0 * np.pi * np.arange(num_phi) / num_phi
    tilts = (np.arange(num_tilt) + 0.5) * np.pi / num_tilt
    thetas = 2.0 * np.pi / n * np.arange(num_inplane) / num_inplane

    phi_g, tilt_g = np.meshgrid(phis, tilts, indexing="ij")
    phi_g = phi_g.ravel()
    tilt_g = tilt_g.ravel()
    vs = np.stack(
        [np.sin(tilt_g) * np.cos(phi_g), np.sin(tilt_g) * np.sin(phi_g), np.cos(tilt_g)],
        axis=-1,
    )
    frames = np.stack([complete_third_row(v) for v in vs])  # (F, 3, 3)

    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    rz = np.zeros((num_inplane, 3, 3))
    rz[:, 0, 0] = cos_t
    rz[:, 0, 1] = -sin_t
    rz[:, 1, 0] = sin_t
    rz[:, 1, 1] = cos_t
    rz[:, 2, 2] = 1.0
    # all (frame, in-plane) combinations, frame-major ordering
    rotations = np.einsum("tij,fjk->ftik", rz, frames).reshape(-1, 3, 3)

    # normalize each candidate by a symmetry power so the third-column
    # azimuth falls in [0, 2*pi/n); this does not affect third rows or
    # self common lines
    powers = generator_powers(n)
    az = np.arctan2(rotations[:, 1, 2], rotations[:, 0, 2]) % (2.0 * np.pi)
    shift = (-np.floor(az / (2.0 * np.pi / n))).astype(int) % n
    rotations = np.einsum("kij,kjl->kil", powers[shift], rotations)

    tilt_all = np.repeat(tilt_g, num_inplane)
    degenerate = np.abs(np.cos(tilt_all)) > np.cos(np.deg2rad(POLE_TILT_DEG))

    n_half = (n - 1) // 2
    if n_half > 0:
        angles = _self_line_angles(rotations, n)
        bins = angles_to_bins(angles, L)
        self_bins = np.stack(
            [np.stack([bins[:, s - 1], bins[:, n - s - 1]], axis=-1) for s in range(1, n_half + 1)],
            axis=1,
        )
        # flag candidates with a near-collinear self pair (equator views)
        margin = max(1, int(round(np.deg2rad(COLLINEAR_MARGIN_DEG) * L / (2.0 * np.pi))))
        diff = np.abs(self_bins[..., 0] - self_bins[..., 1])
        diff = np.minimum(diff, L - diff)
        degenerate |= (np.abs(diff - L // 2) < margin).any(axis=1)
    else:
        self_bins = np.zeros((rotations.shape[0], 0, 2), dtype=int)

    return CandidateGrid(
        n=n,
        num_lines=L,
        step_deg=step_deg,
        rotations=rotations,
        self_bins=self_bins,
        degenerate=degenerate,
    )


def pair_line_bins_stack(
    ri: np.ndarray, rj: np.ndarray, n: int, L: int
) -> tuple[np.ndarray, np.ndarray]:
    """Quantized common-line bins for all rotation pairs of two stacks.

    Returns (bins, valid): bins has shape (A, B, n, 2) holding the ray bin
    in image i and image j for every symmetry exponent; valid flags pairs
    whose planes are not nearly parallel.
    """
    ri = np.asarray(ri, dtype=float).reshape(-1, 3, 3)
    rj = np.asarray(rj, dtype=float).reshape(-1, 3, 3)
    powers = generator_powers(n)
    # M[a, b, s] = ri[a].T @ g^s @ rj[b]
    m = np.einsum("aki,skl,blj->absij", ri, powers, rj)
    a_ang, _, b_ang = euler_zxz(m)
    valid = np.abs(m[..., 2, 2]) < 1.0 - PARALLEL_TOL
    bins = np.stack([angles_to_bins(a_ang, L), angles_to_bins(b_ang, L)], axis=-1)
    return bins, valid


def pair_line_bins(ri: np.ndarray, rj: np.ndarray, n: int, L: int):
    """Common-line bins of one rotation pair, one entry per exponent s.

    Returns a list of n items, each either a (bin_i, bin_j) tuple or None
    when that exponent's planes are nearly parallel.  Raises when every
    exponent is degenerate.
    """
    bins, valid = pair_line_bins_stack(ri, rj, n, L)
    bins, valid = bins[0, 0], valid[0, 0]
    if not valid.any():
        raise DegenerateGeometryError("all symmetry exponents give parallel planes")
    return [tuple(bins[s]) if valid[s] else None for s in range(bins.shape[0])]
