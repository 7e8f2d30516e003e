"""Synthetic data: symmetric Gaussian-blob volumes with exact projections.

A volume is a sum of isotropic Gaussian blobs replicated around the z axis
so that the density is invariant under rotation by 2*pi/n.  Both projection
paths are available in closed form:

* real-space projection images (the line integral of a 3-D Gaussian is a
  2-D Gaussian), and
* polar Fourier rays (the Fourier transform of a Gaussian is a Gaussian,
  evaluated on the central plane of the image's rotation).

Ground-truth rotations are drawn uniformly from SO(3).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import generator_powers, random_rotations
from .polar import Image, PolarImage


@dataclass(frozen=True)
class Blob:
    center: np.ndarray
    sigma: float
    amplitude: float


@dataclass(frozen=True)
class BlobVolume:
    """Sum of Gaussian blobs, symmetrized about the z axis with order n."""

    n: int
    blobs: tuple[Blob, ...]

    def replicated_centers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All symmetry copies of the blob centers.

        Returns (centers, sigmas, amplitudes) with centers of shape
        (n * len(blobs), 3).
        """
        powers = generator_powers(self.n)
        centers = []
        sigmas = []
        amps = []
        for blob in self.blobs:
            rotated = powers @ np.asarray(blob.center, dtype=float)
            centers.append(rotated)
            sigmas.extend([blob.sigma] * self.n)
            amps.extend([blob.amplitude] * self.n)
        return np.vstack(centers), np.asarray(sigmas), np.asarray(amps)

    def density(self, points: np.ndarray) -> np.ndarray:
        """Evaluate the symmetrized density at points of shape (..., 3)."""
        centers, sigmas, amps = self.replicated_centers()
        pts = np.asarray(points, dtype=float)[..., None, :]
        d2 = np.sum((pts - centers) ** 2, axis=-1)
        return np.sum(amps * np.exp(-d2 / (2.0 * sigmas**2)), axis=-1)

    def fourier(self, freqs: np.ndarray) -> np.ndarray:
        """Evaluate the Fourier transform at frequencies of shape (..., 3).

        Uses the closed form of the Gaussian transform:
        a * (2 pi)^(3/2) sigma^3 * exp(-sigma^2 |w|^2 / 2) * exp(-i <w, c>).
        """
        centers, sigmas, amps = self.replicated_centers()
        w = np.asarray(freqs, dtype=float)
        w2 = np.sum(w**2, axis=-1)[..., None]
        phase = np.exp(-1j * (w @ centers.T))
        radial = (
            amps
            * (2.0 * np.pi) ** 1.5
            * sigmas**3
            * np.exp(-(sigmas**2) * w2 / 2.0)
        )
        return np.sum(radial * phase, axis=-1)


@dataclass(frozen=True)
class Scene:
    """A volume plus ground-truth rotations for m projection images."""

    volume: BlobVolume
    rotations: np.ndarray
    seed: int
    fov: float = 4.0  # physical side length covered by a rendered image

    @property
    def num_images(self) -> int:
        return self.rotations.shape[0]

    def pixel_size(self, N: int) -> float:
        return self.fov / N


def random_scene(n: int, m: int, blob_count: int, seed: int) -> Scene:
    """Random symmetric blob volume and m uniform rotations.

    Blob centers lie in the unit ball at distance > 0.15 from the symmetry
    axis so that symmetrization never collapses copies onto each other.
    """
    if m < 3:
        raise ValueError(f"need at least 3 images, got m={m}")
    if blob_count < 2:
        raise ValueError(f"need at least 2 blobs, got {blob_count}")
    rng = np.random.default_rng(seed)
    blobs = []
    while len(blobs) < blob_count:
        c = rng.uniform(-1.0, 1.0, size=3)
        if np.linalg.norm(c) > 1.0 or np.hypot(c[0], c[1]) <= 0.15:
            continue
        sigma = rng.uniform(0.1, 0.25)
        amplitude = rng.uniform(0.5, 1.5)
        blobs.append(Blob(center=c, sigma=float(sigma), amplitude=float(amplitude)))
    rotations = random_rotations(m, rng)
    return Scene(volume=BlobVolume(n=n, blobs=tuple(blobs)), rotations=rotations, seed=seed)


def ray_values(
    volume: BlobVolume, rotation: np.ndarray, angles: np.ndarray, radii: np.ndarray
) -> np.ndarray:
    """Exact Fourier-ray values at arbitrary in-plane angles.

    Returns an array of shape (len(angles), len(radii)): the volume's
    Fourier transform sampled at ``xi * rotation @ (cos a, sin a, 0)`` for
    every angle a and radius xi.
    """
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    dirs = np.stack([np.cos(angles), np.sin(angles), np.zeros_like(angles)], axis=-1)
    dirs3 = dirs @ rotation.T  # rotation applied to each direction
    freqs = radii[None, :, None] * dirs3[:, None, :]
    return volume.fourier(freqs)


def project_rays(scene: Scene, index: int, L: int, n_r: int, delta_xi: float) -> PolarImage:
    """Exact polar Fourier rays of image ``index`` (no pixel discretization)."""
    angles = 2.0 * np.pi * np.arange(L) / L
    radii = delta_xi * np.arange(1, n_r + 1)
    rays = ray_values(scene.volume, scene.rotations[index], angles, radii)
    return PolarImage(rays=rays, normalized=False)


def project_image(scene: Scene, index: int, N: int) -> Image:
    """Exact real-space projection image of image ``index`` on N x N pixels.

    The beam integral of an isotropic 3-D Gaussian is an isotropic 2-D
    Gaussian of the same width, weighted by amplitude * sigma * sqrt(2 pi),
    centered at the in-plane coordinates of the rotated blob center.
    """
    if N < 16:
        raise ValueError(f"image side must be >= 16 pixels, got N={N}")
    rotation = scene.rotations[index]
    centers, sigmas, amps = scene.volume.replicated_centers()
    in_plane = centers @ rotation[:, :2]  # in-plane coordinates of each copy
    h = scene.pixel_size(N)
    coords = (np.arange(N) - (N - 1) / 2.0) * h
    xs, ys = np.meshgrid(coords, coords, indexing="ij")
    pixels = np.zeros((N, N))
    weights = amps * sigmas * np.sqrt(2.0 * np.pi)
    for (cx, cy), sigma, w in zip(in_plane, sigmas, weights):
        d2 = (xs - cx) ** 2 + (ys - cy) ** 2
        pixels += w * np.exp(-d2 / (2.0 * sigma**2))
    return Image(pixels=pixels, pixel_size=h)


def add_noise(image: Image, snr: float, seed: int) -> Image:
    """Add white Gaussian noise with variance var(signal) / snr."""
    if snr <= 0:
        raise ValueError(f"snr must be positive, got {snr}")
    rng = np.random.default_rng(seed)
    var = float(np.var(image.pixels))
    noise = rng.normal(0.0, np.sqrt(var / snr), size=image.pixels.shape)
    return Image(pixels=image.pixels + noise, pixel_size=image.pixel_size)
