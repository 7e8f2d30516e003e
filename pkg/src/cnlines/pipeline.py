"""End-to-end orchestration: images in, estimated rotations out.

The stages are polar resampling, relative viewing-direction estimation
(either the general grid search or the fast order-3/4 path), global hand
synchronization with direction factorization, and in-plane angle recovery.
Per-stage wall times and eigen-gap diagnostics are logged.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import c3c4, inplane, pairwise, sync
from .errors import ConfigError
from .grid import build_grid
from .polar import Image, PolarImage, normalize, polar_ft

logger = logging.getLogger("cnlines")

MODE_GENERAL = "cn"
MODE_FAST = "c3c4-fast"


@dataclass(frozen=True)
class PipelineConfig:
    n: int
    mode: str = MODE_GENERAL
    L: int = 360
    n_r: int | None = None  # defaults to half the image side
    step_deg: float = 4.0
    T: int = 100
    K: int | None = None  # defaults to about one degree of n*theta
    seed: int = 0
    snr: float | None = None

    def __post_init__(self):
        if self.mode not in (MODE_GENERAL, MODE_FAST):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == MODE_GENERAL and self.n <= 2:
            raise ConfigError("the general path requires symmetry order n > 2")
        if self.mode == MODE_FAST and self.n not in (3, 4):
            raise ConfigError("the fast path supports n in {3, 4} only")
        if self.L % 2 != 0:
            raise ConfigError("ray count L must be even")

    @property
    def inplane_grid(self) -> int:
        return self.K if self.K is not None else max(2, int(round(360 / self.n)))


@dataclass
class PipelineResult:
    rotations: np.ndarray
    direction_gap: float
    stage_seconds: dict = field(default_factory=dict)


def _timed(result: PipelineResult, stage: str, fn):
    start = time.perf_counter()
    out = fn()
    elapsed = time.perf_counter() - start
    result.stage_seconds[stage] = elapsed
    logger.info("stage %-12s %8.2f s", stage, elapsed)
    return out


def polar_stack(pixels: np.ndarray, config: PipelineConfig) -> list[PolarImage]:
    """Normalized polar Fourier rays of every image in a pixel stack."""
    N = pixels.shape[1]
    n_r = config.n_r if config.n_r is not None else N // 2
    delta_xi = np.pi / (N // 2)
    return [
        normalize(polar_ft(Image(pixels=img), config.L, n_r, delta_xi))
        for img in pixels
    ]


def run_abinitio(polars: list[PolarImage], config: PipelineConfig) -> PipelineResult:
    """Estimate all rotations from normalized polar images."""
    m = len(polars)
    result = PipelineResult(rotations=np.empty((m, 3, 3)), direction_gap=np.nan)

    if config.mode == MODE_FAST:
        v_ij, v_ii = _timed(
            result, "pairwise", lambda: c3c4.estimate_all_pairs_fast(polars, config.n)
        )
    else:
        grid = _timed(
            result, "grid", lambda: build_grid(config.n, config.step_deg, config.L)
        )
        v_ij, v_ii = _timed(
            result,
            "pairwise",
            lambda: pairwise.estimate_all_pairs(polars, grid, config.T),
        )

    def _sync():
        synced_ij, synced_ii = sync.sync_hands(v_ij, v_ii, m)
        return sync.factor_directions(synced_ij, synced_ii, m)

    directions, frames = _timed(result, "sync", _sync)
    logger.info("direction eigen-gap (second/first): %.3e", directions.eigenvalue_gap)

    def _inplane():
        theta_ij = np.zeros((m, m))
        for i in range(m):
            for j in range(i + 1, m):
                theta_ij[i, j] = inplane.estimate_theta_ij(
                    polars[i],
                    polars[j],
                    frames[i],
                    frames[j],
                    config.n,
                    config.inplane_grid,
                    config.L,
                )
        thetas = inplane.sync_inplane(theta_ij, config.n, m)
        return inplane.assemble_rotations(frames, thetas)

    result.rotations = _timed(result, "inplane", _inplane)
    result.direction_gap = directions.eigenvalue_gap
    return result


def run_abinitio_stack(pixels: np.ndarray, config: PipelineConfig) -> PipelineResult:
    """Full pipeline from a real-space pixel stack."""
    result_holder = PipelineResult(rotations=np.empty(0), direction_gap=np.nan)
    polars = _timed(result_holder, "polar", lambda: polar_stack(pixels, config))
    result = run_abinitio(polars, config)
    result.stage_seconds = {**result_holder.stage_seconds, **result.stage_seconds}
    return result
