"""Angular error of estimated rotations against ground truth.

Estimates are only defined up to a global rotation about the symmetry axis
(optionally composed with a flip of that axis), a global hand, and a
per-image symmetry power.  The scorer searches this whole class and
reports, at the best alignment, the angle between the true and estimated
images of in-plane rays: eps(i, l) = arccos <R_i c_l, A_i c_l> with c_l
unit vectors in the xy plane and A_i the fully adjusted estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import HAND_FLIP, rot_x, rot_z

COARSE_STEP_DEG = 0.25
REFINE_FACTOR = 10  # refinement grid is COARSE_STEP / REFINE_FACTOR


@dataclass(frozen=True)
class AlignmentReport:
    median_error_deg: float
    mean_error_deg: float
    delta: int  # global hand bit
    z_angle: float  # global rotation about the symmetry axis (radians)
    axis_flip: bool  # whether the pi flip about the x axis was applied
    exponents: np.ndarray  # per-image symmetry power
    per_image_mean_deg: np.ndarray

    def to_dict(self) -> dict:
        return {
            "median_error_deg": self.median_error_deg,
            "mean_error_deg": self.mean_error_deg,
            "delta": self.delta,
            "z_angle_deg": float(np.rad2deg(self.z_angle)),
            "axis_flip": self.axis_flip,
            "exponents": [int(s) for s in self.exponents],
            "per_image_mean_deg": [float(e) for e in self.per_image_mean_deg],
        }


def _ray_coefficients(truth: np.ndarray, adjusted: np.ndarray, L: int):
    """Per-(image, ray) coefficients (a, b, c) so that the aligned inner
    product equals a*cos(psi) + b*sin(psi) + c for a z-rotation by psi."""
    angles = 2.0 * np.pi * np.arange(L) / L
    rays = np.stack([np.cos(angles), np.sin(angles), np.zeros(L)], axis=-1)
    u = truth @ rays.T  # (m, 3, L): true ray images
    w = adjusted @ rays.T  # (m, 3, L): estimate ray images before z-rotation
    a = u[:, 0] * w[:, 0] + u[:, 1] * w[:, 1]
    b = u[:, 1] * w[:, 0] - u[:, 0] * w[:, 1]
    c = u[:, 2] * w[:, 2]
    return a, b, c


def _mean_errors_at(a, b, c, psis):
    """Mean ray error per image at each angle: shape (m, len(psis))."""
    dots = (
        a[:, None, :] * np.cos(psis)[None, :, None]
        + b[:, None, :] * np.sin(psis)[None, :, None]
        + c[:, None, :]
    )
    return np.arccos(np.clip(dots, -1.0, 1.0)).mean(axis=2)


def align_and_score(
    truth: np.ndarray, est: np.ndarray, n: int, L: int = 360
) -> AlignmentReport:
    """Best-aligned ray-wise angular error between two rotation sets.

    Searches the hand bit and the x-axis flip exhaustively and the global
    z-rotation on a coarse grid refined once; the per-image symmetry power
    minimizing that image's mean error is chosen at every alignment.
    """
    truth = np.asarray(truth, dtype=float)
    est = np.asarray(est, dtype=float)
    if truth.shape != est.shape:
        raise ValueError(f"shape mismatch: {truth.shape} vs {est.shape}")
    if L < 4:
        raise ValueError(f"need L >= 4 rays, got {L}")
    m = truth.shape[0]
    flip = rot_x(np.pi)

    num_coarse = int(round(360.0 / COARSE_STEP_DEG))
    coarse = 2.0 * np.pi * np.arange(num_coarse) / num_coarse
    # a per-image symmetry power shifts that image's effective z-angle by a
    # multiple of 2*pi/n; on the coarse grid this is a (rounded) index shift
    index_shifts = np.array(
        [int(round(num_coarse * s / n)) for s in range(n)]
    )

    best = None  # (mean error, delta, flipped, coefficients, psi)
    for delta in (0, 1):
        for flipped in (False, True):
            adjusted = est @ HAND_FLIP if delta else est
            if flipped:
                adjusted = flip[None] @ adjusted
            a, b, c = _ray_coefficients(truth, adjusted, L)
            errs = _mean_errors_at(a, b, c, coarse)  # (m, num_coarse)
            # best symmetry power per image and coarse angle
            shifted = np.stack(
                [np.roll(errs, -shift, axis=1) for shift in index_shifts]
            )
            objective = shifted.min(axis=0).mean(axis=0)  # (num_coarse,)
            k = int(np.argmin(objective))
            if best is None or objective[k] < best[0]:
                best = (objective[k], delta, flipped, (a, b, c), coarse[k])

    _, delta, flipped, (a, b, c), psi0 = best
    fine_step = np.deg2rad(COARSE_STEP_DEG) / REFINE_FACTOR
    fine = psi0 + fine_step * np.arange(-REFINE_FACTOR, REFINE_FACTOR + 1)
    # exact per-image exponent choice on the fine grid
    shifts = 2.0 * np.pi * np.arange(n) / n
    all_psis = (fine[:, None] + shifts[None, :]).ravel()  # (F*n,)
    errs = _mean_errors_at(a, b, c, all_psis).reshape(m, fine.size, n)
    per_image_best = errs.min(axis=2)  # (m, F)
    k = int(np.argmin(per_image_best.mean(axis=0)))
    psi = float(fine[k] % (2.0 * np.pi))
    exponents = np.argmin(errs[:, k, :], axis=1)

    angles = 2.0 * np.pi * np.arange(L) / L
    rays = np.stack([np.cos(angles), np.sin(angles), np.zeros(L)], axis=-1)
    per_ray = np.empty((m, L))
    for i in range(m):
        adj = est[i] @ HAND_FLIP if delta else est[i]
        if flipped:
            adj = flip @ adj
        adj = rot_z(psi + 2.0 * np.pi * exponents[i] / n) @ adj
        dots = np.einsum("lk,lk->l", (truth[i] @ rays.T).T, (adj @ rays.T).T)
        per_ray[i] = np.arccos(np.clip(dots, -1.0, 1.0))
    per_ray_deg = np.rad2deg(per_ray)
    return AlignmentReport(
        median_error_deg=float(np.median(per_ray_deg)),
        mean_error_deg=float(per_ray_deg.mean()),
        delta=delta,
        z_angle=psi,
        axis_flip=flipped,
        exponents=exponents,
        per_image_mean_deg=per_ray_deg.mean(axis=1),
    )
