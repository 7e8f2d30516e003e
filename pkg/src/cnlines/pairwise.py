"""Relative viewing-direction estimation by candidate-pair correlation search.

For each image pair the product of ray correlations over all common lines
and self common lines implied by a candidate rotation pair is maximized.
The search is pruned in two stages: candidates are first ranked per image
by their self-common-line score (which depends on one candidate only), then
the full score is maximized over the top-T cross product of candidate
lists.  At the maximizing pair the mean of the n relative rotations gives
the rank-1 estimate of the outer product of the two viewing directions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationFailedError
from .geometry import generator_powers, relative_direction_sum
from .grid import CandidateGrid, pair_line_bins_stack
from .polar import CorrelationTable, PolarImage, correlation_tables


@dataclass(frozen=True)
class PairEstimate:
    """Outputs of the per-pair search."""

    v_ij: np.ndarray
    v_ii: np.ndarray  # self estimate for the first image, from this pair
    v_jj: np.ndarray  # self estimate for the second image, from this pair
    score: float
    cand_i: int
    cand_j: int


def self_scores(table: CorrelationTable, grid: CandidateGrid) -> np.ndarray:
    """Self-common-line score of every grid candidate for one image.

    The score is the product over the non-collinear self-common-line pairs
    of the unconjugated ray correlation at the cached bins; degenerate
    (near-pole) candidates get -inf.
    """
    scores = np.ones(grid.size)
    for p in range(grid.self_bins.shape[1]):
        b1 = grid.self_bins[:, p, 0]
        b2 = grid.self_bins[:, p, 1]
        scores *= table.selfprod[b1, b2]
    scores[grid.degenerate] = -np.inf
    return scores


def self_score(table: CorrelationTable, grid: CandidateGrid, candidate: int) -> float:
    """Score of a single candidate; -inf sentinel when degenerate."""
    return float(self_scores(table, grid)[candidate])


def top_candidates(
    polar: PolarImage, grid: CandidateGrid, T: int, scores: np.ndarray | None = None
) -> np.ndarray:
    """Indices of the T best candidates by self score, ties to lower index."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if scores is None:
        scores = self_scores(correlation_tables(polar, polar), grid)
    order = np.argsort(-scores, kind="stable")
    return order[: min(T, grid.size)]


def estimate_pair(
    pi: PolarImage,
    pj: PolarImage,
    cands_i: np.ndarray,
    cands_j: np.ndarray,
    grid: CandidateGrid,
    scores_i: np.ndarray | None = None,
    scores_j: np.ndarray | None = None,
    cross: np.ndarray | None = None,
) -> PairEstimate:
    """Maximize the full correlation score over a candidate-pair grid.

    ``scores_i``/``scores_j`` are the per-grid-candidate self scores (they
    are recomputed from the polar images when not supplied); ``cross`` is
    the conjugated correlation table between the two images.
    """
    cands_i = np.asarray(cands_i, dtype=int)
    cands_j = np.asarray(cands_j, dtype=int)
    if cands_i.size == 0 or cands_j.size == 0:
        raise EstimationFailedError("empty candidate list")
    if scores_i is None:
        scores_i = self_scores(correlation_tables(pi, pi), grid)
    if scores_j is None:
        scores_j = self_scores(correlation_tables(pj, pj), grid)
    if cross is None:
        cross = correlation_tables(pi, pj).cross

    n = grid.n
    ri = grid.rotations[cands_i]
    rj = grid.rotations[cands_j]
    bins, valid = pair_line_bins_stack(ri, rj, n, grid.num_lines)
    cross_factor = np.prod(cross[bins[..., 0], bins[..., 1]], axis=-1)
    total = (
        cross_factor
        * scores_i[cands_i][:, None]
        * scores_j[cands_j][None, :]
    )
    # exclude pairs where any symmetry copy of the planes is near parallel
    total = np.where(valid.all(axis=-1), total, -np.inf)
    if not np.isfinite(total).any():
        raise EstimationFailedError("all candidate pairs are degenerate")

    best = np.flatnonzero(total.ravel() == total.max())
    # ties broken by the lexicographically smallest (candidate index i,
    # candidate index j) pair
    ai, bj = np.unravel_index(best, total.shape)
    keys = np.stack([cands_i[ai], cands_j[bj]], axis=-1)
    pick = np.lexsort((keys[:, 1], keys[:, 0]))[0]
    a, b = ai[pick], bj[pick]

    powers = generator_powers(n)
    r_best_i = grid.rotations[cands_i[a]]
    r_best_j = grid.rotations[cands_j[b]]
    v_ij = relative_direction_sum([r_best_i.T @ powers[s] @ r_best_j for s in range(n)])
    v_ii = relative_direction_sum([r_best_i.T @ powers[s] @ r_best_i for s in range(n)])
    v_jj = relative_direction_sum([r_best_j.T @ powers[s] @ r_best_j for s in range(n)])
    return PairEstimate(
        v_ij=v_ij,
        v_ii=v_ii,
        v_jj=v_jj,
        score=float(total[a, b]),
        cand_i=int(cands_i[a]),
        cand_j=int(cands_j[b]),
    )


def select_vii(estimates) -> np.ndarray:
    """Pick the estimate whose singular values are closest to (1, 0, 0)."""
    estimates = list(estimates)
    if not estimates:
        raise ValueError("select_vii needs at least one estimate")
    target = np.array([1.0, 0.0, 0.0])
    dists = [
        np.linalg.norm(np.linalg.svd(np.asarray(e), compute_uv=False) - target)
        for e in estimates
    ]
    return np.asarray(estimates[int(np.argmin(dists))])


def estimate_all_pairs(
    polars: list[PolarImage], grid: CandidateGrid, T: int
) -> tuple[dict[tuple[int, int], np.ndarray], list[np.ndarray]]:
    """Run the pair search over every image pair.

    Returns the map (i, j) -> v_ij for i < j, and the per-image self
    estimates v_ii selected across pairs by closeness to rank one.
    """
    m = len(polars)
    scores = [self_scores(correlation_tables(p, p), grid) for p in polars]
    cand_lists = [top_candidates(polars[i], grid, T, scores=scores[i]) for i in range(m)]
    v_ij: dict[tuple[int, int], np.ndarray] = {}
    vii_votes: list[list[np.ndarray]] = [[] for _ in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            cross = correlation_tables(polars[i], polars[j]).cross
            est = estimate_pair(
                polars[i],
                polars[j],
                cand_lists[i],
                cand_lists[j],
                grid,
                scores_i=scores[i],
                scores_j=scores[j],
                cross=cross,
            )
            v_ij[(i, j)] = est.v_ij
            vii_votes[i].append(est.v_ii)
            vii_votes[j].append(est.v_jj)
    v_ii = [select_vii(votes) for votes in vii_votes]
    return v_ij, v_ii
