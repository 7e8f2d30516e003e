"""Polar Fourier rays of projection images and ray-correlation tables.

An image is resampled in Fourier space on L equally spaced directions
(angles 2*pi*l/L) and n_r radial points xi_k = k * delta_xi, k = 1..n_r.
The zero-frequency sample is excluded: it is shared by every ray and would
inflate all correlations uniformly.  Rays are normalized to unit Euclidean
norm before any correlation is computed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Image:
    """Real-space projection image on an N x N pixel grid."""

    pixels: np.ndarray
    pixel_size: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError(f"pixels must be square, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("pixels must be finite")
        if not self.pixel_size > 0.0:
            raise ValueError(f"pixel_size must be positive, got {self.pixel_size}")
        object.__setattr__(self, "pixels", p)


@dataclass(frozen=True)
class PolarImage:
    """Complex Fourier rays: shape (L, n_r), ray l at angle 2*pi*l/L."""

    rays: np.ndarray
    normalized: bool = False

    @property
    def num_lines(self) -> int:
        return self.rays.shape[0]

    @property
    def num_radial(self) -> int:
        return self.rays.shape[1]


@dataclass(frozen=True)
class CorrelationTable:
    """Ray-correlation tables between two polar images.

    ``cross[l1, l2]``    = Re sum_k ray_i(l1, k) * conj(ray_j(l2, k))
    ``selfprod[l1, l2]`` = Re sum_k ray_i(l1, k) * ray_j(l2, k)

    The conjugated table detects rays with equal values; the unconjugated
    table detects rays whose values are complex conjugates of each other.
    """

    cross: np.ndarray
    selfprod: np.ndarray


def polar_ft(image: Image, L: int, n_r: int, delta_xi: float) -> PolarImage:
    """Direct-summation Fourier transform of an image on a polar grid.

    rays[l, k] = sum_{x,y} pixels(x, y) * exp(-1j * xi_k * (x*cos + y*sin))
    with (x, y) centered pixel coordinates and xi_k = (k+1) * delta_xi.
    """
    if L % 2 != 0:
        raise ValueError(f"direction count L must be even, got {L}")
    if n_r < 1:
        raise ValueError(f"n_r must be >= 1, got {n_r}")
    pixels = image.pixels
    N = pixels.shape[0]
    coords = np.arange(N) - (N - 1) / 2.0
    xs, ys = np.meshgrid(coords, coords, indexing="ij")
    flat = pixels.ravel()
    angles = 2.0 * np.pi * np.arange(L) / L
    # projection of every pixel onto every ray direction: (N*N, L)
    proj = np.outer(xs.ravel(), np.cos(angles)) + np.outer(ys.ravel(), np.sin(angles))
    base = np.exp(-1j * delta_xi * proj)
    rays = np.empty((L, n_r), dtype=complex)
    phase = base.copy()
    for k in range(n_r):
        rays[:, k] = flat @ phase
        if k + 1 < n_r:
            phase *= base
    return PolarImage(rays=rays, normalized=False)


def normalize(polar: PolarImage) -> PolarImage:
    """Scale every ray to unit norm; all-zero rays are left untouched."""
    norms = np.linalg.norm(polar.rays, axis=1, keepdims=True)
    safe = np.where(norms > 0.0, norms, 1.0)
    return PolarImage(rays=polar.rays / safe, normalized=True)


def correlation_tables(
    pi: PolarImage,
    pj: PolarImage,
    r_min: int = 0,
    r_max: int | None = None,
) -> CorrelationTable:
    """Correlation tables between all ray pairs of two polar images.

    ``r_min``/``r_max`` optionally restrict the radial band (half-open index
    range into the radial axis) used in the sums.
    """
    if not (pi.normalized and pj.normalized):
        raise ValueError("correlation_tables requires normalized polar images")
    if pi.rays.shape != pj.rays.shape:
        raise ValueError(
            f"shape mismatch: {pi.rays.shape} vs {pj.rays.shape}"
        )
    band = slice(r_min, r_max)
    a = pi.rays[:, band]
    b = pj.rays[:, band]
    cross = np.real(a @ b.conj().T)
    selfprod = np.real(a @ b.T)
    return CorrelationTable(cross=cross, selfprod=selfprod)
