"""In-plane angle recovery once every viewing direction is known.

With per-image frames fixed up to a rotation about the symmetry axis, the
relative in-plane angle of every image pair is found by correlating the
common lines implied by candidate angles on a K-point grid over
[0, 2*pi/n).  The pairwise angles are then synchronized through the
Hermitian matrix of their n-fold phases: its leading eigenvector carries
each image's absolute in-plane phase up to one global shift.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, DegenerateGeometryError
from .geometry import PARALLEL_TOL, angles_to_bins, euler_zxz, rot_z
from .polar import PolarImage, correlation_tables


def estimate_theta_ij(
    pi: PolarImage,
    pj: PolarImage,
    frame_i: np.ndarray,
    frame_j: np.ndarray,
    n: int,
    K: int,
    L: int | None = None,
    cross: np.ndarray | None = None,
) -> float:
    """Relative in-plane angle of two images on a K-point grid.

    For each grid angle the common lines implied by all symmetry copies are
    quantized to ray bins and the conjugated correlations multiplied; the
    argmax grid angle is returned (ties to the lowest grid index).
    """
    if K < 2:
        raise ValueError(f"need at least 2 grid points, got K={K}")
    L = pi.num_lines if L is None else L
    if cross is None:
        cross = correlation_tables(pi, pj).cross
    thetas = 2.0 * np.pi / (n * K) * np.arange(K)
    shifts = 2.0 * np.pi / n * np.arange(n)
    total = thetas[:, None] + shifts[None, :]  # (K, n)
    cos_t, sin_t = np.cos(total), np.sin(total)
    rz = np.zeros((K, n, 3, 3))
    rz[..., 0, 0] = cos_t
    rz[..., 0, 1] = -sin_t
    rz[..., 1, 0] = sin_t
    rz[..., 1, 1] = cos_t
    rz[..., 2, 2] = 1.0
    m = np.einsum("ba,ksbc,cd->ksad", frame_i, rz, frame_j)
    valid = np.abs(m[..., 2, 2]) < 1.0 - PARALLEL_TOL
    a_ang, _, b_ang = euler_zxz(m)
    corr = cross[angles_to_bins(a_ang, L), angles_to_bins(b_ang, L)]
    scores = np.where(valid.all(axis=1), np.prod(corr, axis=1), -np.inf)
    if not np.isfinite(scores).any():
        raise DegenerateGeometryError("all in-plane grid points are degenerate")
    return float(thetas[int(np.argmax(scores))])


def sync_inplane(theta_ij: np.ndarray, n: int, m: int) -> np.ndarray:
    """Absolute in-plane angles from the table of pairwise angles.

    ``theta_ij`` is an m x m array whose upper triangle holds the pairwise
    estimates.  Builds the Hermitian unit-modulus matrix of n-fold phases,
    extracts its leading eigenvector by power iteration, and reads each
    image's angle from the argument of its entry.  The common shift of all
    angles is unresolved by construction.
    """
    q_mat = np.eye(m, dtype=complex)
    for i in range(m):
        for j in range(i + 1, m):
            phase = np.exp(1j * n * theta_ij[i, j])
            q_mat[i, j] = phase
            q_mat[j, i] = np.conj(phase)
    vec = np.ones(m, dtype=complex) / np.sqrt(m)
    tol, max_iter = 1e-12, 10000
    for _ in range(max_iter):
        new = q_mat @ vec
        norm = np.linalg.norm(new)
        if norm == 0.0:
            raise ConvergenceError("phase matrix annihilated the iterate")
        new /= norm
        if np.linalg.norm(new - vec) < tol:
            vec = new
            break
        vec = new
    else:
        raise ConvergenceError(f"phase synchronization did not converge in {max_iter} steps")
    return (-np.angle(vec)) % (2.0 * np.pi) / n


def assemble_rotations(frames: list, thetas: np.ndarray) -> np.ndarray:
    """Compose each frame with its recovered in-plane angle."""
    if len(frames) != len(thetas):
        raise ValueError("frames and angles must have equal lengths")
    return np.stack([rot_z(t) @ f for f, t in zip(frames, thetas)])
