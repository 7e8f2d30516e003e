"""Rotation algebra, the cyclic symmetry group, and common-line angle maps.

Conventions used throughout the package:

* Rotations are 3x3 orthonormal matrices with determinant one, acting on
  column vectors.  The third row of a rotation is the viewing direction of
  the corresponding projection image.
* The cyclic group of order n is generated by ``generator(n)``, a rotation
  by 2*pi/n about the z axis.
* A relative rotation ``M = R_i.T @ g**s @ R_j`` factors as
  ``R_z(alpha_ij) @ R_x(gamma) @ R_z(-alpha_ji)``; the three angles locate
  the common line of the two image planes in each image's own coordinates.
  ``euler_zxz`` extracts them with two-argument arctangents so that the
  factorization round-trips exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateExponentError, DegenerateGeometryError, InvalidOrderError

# Mirror through the xy plane followed by a point reflection: conjugating a
# rotation by HAND_FLIP produces the opposite-handed but image-identical
# interpretation of the data.  Numerically equal to a z-rotation by pi.
HAND_FLIP = np.diag([-1.0, -1.0, 1.0])

# Two central planes closer to parallel than this (in terms of the inner
# product of their normals) have no well-conditioned common line.
PARALLEL_TOL = 1e-7


def rot_z(angle: float) -> np.ndarray:
    """Rotation by ``angle`` radians about the z axis."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_x(angle: float) -> np.ndarray:
    """Rotation by ``angle`` radians about the x axis."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def generator(n: int) -> np.ndarray:
    """Generator of the cyclic symmetry group: rotation by 2*pi/n about z."""
    if n < 1:
        raise InvalidOrderError(f"symmetry order must be >= 1, got {n}")
    return rot_z(2.0 * np.pi / n)


def generator_powers(n: int) -> np.ndarray:
    """Stack of shape (n, 3, 3) holding g^0 .. g^(n-1)."""
    angles = 2.0 * np.pi * np.arange(n) / n
    out = np.zeros((n, 3, 3))
    out[:, 0, 0] = np.cos(angles)
    out[:, 0, 1] = -np.sin(angles)
    out[:, 1, 0] = np.sin(angles)
    out[:, 1, 1] = np.cos(angles)
    out[:, 2, 2] = 1.0
    return out


def power_sum(n: int, l: int) -> np.ndarray:
    """Mean of g^(l*s) over s = 0..n-1; equals diag(0,0,1) when l % n != 0."""
    if n <= 1:
        raise InvalidOrderError(f"power_sum requires n > 1, got {n}")
    if l % n == 0:
        raise DegenerateExponentError(
            f"exponent l={l} is a multiple of n={n}; the mean is the identity"
        )
    g = generator(n)
    acc = np.zeros((3, 3))
    term = np.eye(3)
    step = np.linalg.matrix_power(g, l % n)
    for _ in range(n):
        acc += term
        term = term @ step
    return acc / n


def j_conjugate(m: np.ndarray) -> np.ndarray:
    """Conjugate a matrix (or stack of matrices) by the hand-flip matrix."""
    out = np.array(m, copy=True)
    out[..., 0, 2] *= -1.0
    out[..., 1, 2] *= -1.0
    out[..., 2, 0] *= -1.0
    out[..., 2, 1] *= -1.0
    return out


def random_rotations(m: int, rng: np.random.Generator) -> np.ndarray:
    """Draw m rotations uniformly from SO(3) via normalized quaternions."""
    q = rng.standard_normal((m, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    out = np.empty((m, 3, 3))
    out[:, 0, 0] = 1 - 2 * (y * y + z * z)
    out[:, 0, 1] = 2 * (x * y - w * z)
    out[:, 0, 2] = 2 * (x * z + w * y)
    out[:, 1, 0] = 2 * (x * y + w * z)
    out[:, 1, 1] = 1 - 2 * (x * x + z * z)
    out[:, 1, 2] = 2 * (y * z - w * x)
    out[:, 2, 0] = 2 * (x * z - w * y)
    out[:, 2, 1] = 2 * (y * z + w * x)
    out[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return out


def euler_zxz(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Extract (a, g, b) with m = rot_z(a) @ rot_x(g) @ rot_z(-b).

    Works on a single matrix or a stack; angles a and b are reduced into
    [0, 2*pi), g lies in [0, pi].  When the middle angle is 0 or pi only
    the combination of a and b is determined; b is then set to zero and a
    carries the whole z-rotation.
    """
    m = np.asarray(m)
    a = np.arctan2(m[..., 0, 2], -m[..., 1, 2]) % (2.0 * np.pi)
    b = np.arctan2(-m[..., 2, 0], m[..., 2, 1]) % (2.0 * np.pi)
    g = np.arccos(np.clip(m[..., 2, 2], -1.0, 1.0))
    # gimbal-locked matrices: rot_z(a) rot_x(0) rot_z(-b) = rot_z(a - b) and
    # rot_z(a) rot_x(pi) rot_z(-b) = rot_z(a + b) rot_x(pi), so put the whole
    # z-rotation into a (read off the upper-left block) and zero out b
    locked = np.abs(m[..., 2, 2]) > 1.0 - 1e-12
    if np.any(locked):
        a_locked = np.arctan2(m[..., 1, 0], m[..., 0, 0]) % (2.0 * np.pi)
        a = np.where(locked, a_locked, a)
        b = np.where(locked, 0.0, b)
        if a.ndim == 0:
            a, b = float(a), float(b)
    return a, g, b


def circular_distance(x, y):
    """Minimal angular distance between two angles (or arrays), in [0, pi]."""
    d = np.abs(np.asarray(x) - np.asarray(y)) % (2.0 * np.pi)
    return np.minimum(d, 2.0 * np.pi - d)


@dataclass(frozen=True)
class CommonLinePair:
    """Common line of two image planes, expressed as a ray angle in each."""

    alpha_ij: float
    alpha_ji: float
    gamma: float
    s: int


@dataclass(frozen=True)
class SelfCommonLine:
    """Common line of an image with its own symmetry-rotated copy."""

    alpha_ii: float
    alpha_gi: float
    gamma_ii: float
    s: int


def commonline_angles(r_i: np.ndarray, r_j: np.ndarray, n: int, s: int) -> CommonLinePair:
    """Angles locating the common line of planes ``r_i`` and ``g^s r_j``.

    Returns the in-plane ray angles (alpha_ij in image i, alpha_ji in image
    j) and the angle gamma between the two planes, extracted from
    ``M = r_i.T @ g^s @ r_j`` with two-argument arctangents.
    """
    g = generator(n)
    m = r_i.T @ np.linalg.matrix_power(g, s % n) @ r_j
    dot = m[2, 2]
    if abs(dot) >= 1.0 - PARALLEL_TOL:
        raise DegenerateGeometryError(
            f"planes nearly parallel (|dot| = {abs(dot):.9f}); no common line"
        )
    a, gam, b = euler_zxz(m)
    return CommonLinePair(alpha_ij=float(a), alpha_ji=float(b), gamma=float(gam), s=s % n)


def self_commonline(r: np.ndarray, n: int, s: int) -> SelfCommonLine:
    """Self common line of an image for symmetry exponent s in [1, n)."""
    if not 1 <= s % n <= n - 1:
        raise DegenerateExponentError(
            f"self common lines need s % n in [1, n), got s={s}"
        )
    pair = commonline_angles(r, r, n, s)
    return SelfCommonLine(
        alpha_ii=pair.alpha_ij, alpha_gi=pair.alpha_ji, gamma_ii=pair.gamma, s=pair.s
    )


def rotation_from_cl(alpha_ij: float, gamma: float, alpha_ji: float) -> np.ndarray:
    """Rebuild a relative rotation from its common-line angles."""
    return rot_z(alpha_ij) @ rot_x(gamma) @ rot_z(-alpha_ji)


def relative_direction_sum(rotations) -> np.ndarray:
    """Arithmetic mean of a non-empty list of 3x3 matrices.

    When the inputs are the n relative rotations ``r_i.T @ g^s @ r_j`` for
    s = 0..n-1, the mean equals the outer product of the two viewing
    directions (third rows of r_i and r_j).
    """
    mats = np.asarray(list(rotations), dtype=float)
    if mats.ndim != 3 or mats.shape[0] == 0:
        raise ValueError("relative_direction_sum needs a non-empty list of 3x3 matrices")
    return mats.mean(axis=0)


def complete_third_row(v: np.ndarray) -> np.ndarray:
    """Deterministic rotation whose third row is the unit vector ``v``.

    The first row is the normalized cross product of a fixed reference axis
    with v (the z axis, or the x axis when v is nearly vertical); the second
    row completes the right-handed frame.
    """
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    ref = np.array([0.0, 0.0, 1.0])
    if abs(v @ ref) > 0.999:
        ref = np.array([1.0, 0.0, 0.0])
    r1 = np.cross(ref, v)
    r1 /= np.linalg.norm(r1)
    r2 = np.cross(v, r1)
    return np.vstack([r1, r2, v])


def angles_to_bins(angles, num_lines: int) -> np.ndarray:
    """Quantize ray angles to the nearest of ``num_lines`` direction bins."""
    idx = np.rint(np.asarray(angles) * num_lines / (2.0 * np.pi)).astype(int)
    return idx % num_lines
