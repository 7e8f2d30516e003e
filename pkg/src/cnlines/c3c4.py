"""Fast orientation path for symmetry orders 3 and 4.

Instead of searching a rotation grid, each image's self common line is
located directly as the best unconjugated ray-pair correlation under an
angular-separation constraint; the plane angle then follows in closed form
from the separation.  A single common line per image pair is detected by
conjugated correlation, its plane angle recovered by triangle voting over
third images, and the handedness/exponent ambiguities of the per-image and
per-pair rotations are resolved locally by testing eight candidate
combinations for closeness to rank one.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateGeometryError, InvalidOrderError, VotingFailedError
from .geometry import (
    circular_distance,
    j_conjugate,
    rot_x,
    rot_z,
    rotation_from_cl,
)
from .polar import PolarImage, correlation_tables

# Minimal angular separation of the two self-common-line rays, per order.
MIN_SEPARATION = {3: np.pi / 3.0, 4: np.pi / 2.0}

VOTE_BINS = 60
VOTE_SIN_TOL = 1e-3

# Rays separated by almost half a turn are near-conjugate for any real
# image, so the unconjugated self correlation is spuriously high there; the
# search domain stops this far short of half a turn.
SEPARATION_MARGIN = np.deg2rad(5.0)


def _check_order(n: int):
    if n not in (3, 4):
        raise InvalidOrderError(f"fast path supports orders 3 and 4 only, got n={n}")


def search_self_cl(polar: PolarImage, n: int, L: int | None = None) -> tuple[float, float]:
    """Locate the self-common-line ray pair of one image.

    Maximizes the unconjugated ray correlation over ray-bin pairs whose
    circular separation lies in [pi/3, pi) for n=3 and [pi/2, pi) for n=4
    (strictly below pi, which excludes collinear pairs).  Returns the two
    bin-center angles ordered increasingly, with the pair jointly shifted by
    pi when needed so their plain difference equals the circular separation.
    """
    _check_order(n)
    if not polar.normalized:
        raise ValueError("search_self_cl requires a normalized polar image")
    L = polar.num_lines if L is None else L
    table = correlation_tables(polar, polar).selfprod
    angles = 2.0 * np.pi * np.arange(L) / L
    # separation handled in integer bins: robust at the boundaries, where a
    # collinear pair (exactly half a turn apart) must stay excluded
    bins = np.arange(L)
    diff = (bins[None, :] - bins[:, None]) % L
    sep_bins = np.minimum(diff, L - diff)
    min_bins = int(np.ceil(MIN_SEPARATION[n] * L / (2.0 * np.pi) - 1e-9))
    max_bins = L // 2 - max(1, int(round(SEPARATION_MARGIN * L / (2.0 * np.pi))))
    allowed = (sep_bins >= min_bins) & (sep_bins <= max_bins)
    allowed &= np.tri(L, L, -1, dtype=bool).T  # upper triangle: l1 < l2
    scores = np.where(allowed, table, -np.inf)
    flat = np.flatnonzero(scores.ravel() == scores.max())[0]  # lowest (l1, l2)
    l1, l2 = np.unravel_index(flat, scores.shape)
    a1, a2 = angles[l1], angles[l2]
    if a2 - a1 > np.pi:
        # jointly shift both rays by pi so the ordered difference equals the
        # circular separation; this maps the implied rotation to an
        # equivalent (hand-flipped) member of its ambiguity class
        a1, a2 = a2 - np.pi, a1 + np.pi
    return float(a1), float(a2)


def gamma_from_separation(delta: float, n: int) -> float:
    """Plane angle of a self common line from the ray-pair separation."""
    _check_order(n)
    cos_d = np.cos(delta)
    if n == 3:
        cos_g = cos_d / (1.0 - cos_d)
    else:
        cos_g = (1.0 + cos_d) / (1.0 - cos_d)
    if cos_g > 1.0 + 1e-9 or cos_g < -1.0 - 1e-9:
        raise DegenerateGeometryError(
            f"separation {delta:.6f} gives cos(gamma) = {cos_g:.6f} outside [-1, 1]"
        )
    return float(np.arccos(np.clip(cos_g, -1.0, 1.0)))


def self_relative_rotation(alpha1: float, gamma: float, alpha2: float) -> np.ndarray:
    """Rotation relating an image to its own symmetry-rotated copy."""
    return rot_z(alpha1) @ rot_x(gamma) @ rot_z(-alpha2 - np.pi)


def detect_single_cl(pi: PolarImage, pj: PolarImage) -> tuple[float, float]:
    """Best conjugated-correlation ray pair between two images.

    Bin pairs at separation exactly 0 or pi are excluded (they would win
    spuriously for self-correlated inputs).  Ties go to the lowest bins.
    """
    if not (pi.normalized and pj.normalized):
        raise ValueError("detect_single_cl requires normalized polar images")
    L = pi.num_lines
    table = correlation_tables(pi, pj).cross.copy()
    idx = np.arange(L)
    table[idx, idx] = -np.inf
    table[idx, (idx + L // 2) % L] = -np.inf
    flat = np.flatnonzero(table.ravel() == table.max())[0]
    l1, l2 = np.unravel_index(flat, table.shape)
    return float(2.0 * np.pi * l1 / L), float(2.0 * np.pi * l2 / L)


def vote_gamma(
    i: int, j: int, alphas: np.ndarray, bins: int = VOTE_BINS, clamp: bool = False
) -> float:
    """Plane angle between images i and j by voting over third images.

    ``alphas[a, b]`` holds the detected common-line ray angle of pair
    (a, b) expressed in image a.  Every third image k contributes, through
    the spherical law of cosines on the three common-line directions, a
    candidate cosine of the plane angle; candidates outside [-1, 1] or with
    an ill-conditioned denominator are discarded, and the vote histogram
    peak (refined by the mean of in-bin votes) is returned.

    ``clamp`` keeps out-of-range cosines by clipping them into [-1, 1]; it
    is a fallback for small image counts where every vote may be discarded.
    """
    m = alphas.shape[0]
    votes = []
    for k in range(m):
        if k in (i, j):
            continue
        a_i = alphas[i, k] - alphas[i, j]
        a_j = alphas[j, k] - alphas[j, i]
        a_k = alphas[k, j] - alphas[k, i]
        den = np.sin(a_i) * np.sin(a_j)
        if abs(np.sin(a_i)) < VOTE_SIN_TOL or abs(np.sin(a_j)) < VOTE_SIN_TOL:
            continue
        cos_g = (np.cos(a_k) - np.cos(a_i) * np.cos(a_j)) / den
        if not -1.0 <= cos_g <= 1.0:
            if not clamp:
                continue
            cos_g = np.clip(cos_g, -1.0, 1.0)
        votes.append(np.arccos(cos_g))
    if not votes:
        raise VotingFailedError(f"no valid plane-angle votes for pair ({i}, {j})")
    votes = np.asarray(votes)
    hist, edges = np.histogram(votes, bins=bins, range=(0.0, np.pi))
    peak = int(np.argmax(hist))
    in_bin = votes[(votes >= edges[peak]) & (votes < edges[peak + 1])]
    return float(in_bin.mean())


def _expressions(r_ii: np.ndarray, r_ij: np.ndarray, r_jj: np.ndarray, n: int):
    """The eight rank-1 candidate combinations of one pair's rotations.

    Each combination applies a possible transpose to the self rotation of
    image i and possible hand flips to either self rotation, then averages
    the implied symmetry-related relative rotations.  Yields tuples
    (candidate v_ij, corrected r_ii, corrected r_jj).
    """
    a_variants = [r_ii, j_conjugate(r_ii), r_ii.T, j_conjugate(r_ii.T)]
    b_variants = [r_jj, j_conjugate(r_jj)]
    for a in a_variants:
        for b in b_variants:
            if n == 3:
                v = (r_ij + a @ r_ij @ b + a.T @ r_ij @ b.T) / 3.0
            else:
                v = (r_ij + a @ r_ij @ b) / 2.0
            yield v, a, b


def local_sync(
    r_ii: np.ndarray, r_ij: np.ndarray, r_jj: np.ndarray, n: int
) -> tuple[tuple[np.ndarray, np.ndarray, np.ndarray], np.ndarray]:
    """Resolve the per-pair transpose/hand ambiguities of (r_ii, r_ij, r_jj).

    Evaluates the eight candidate combinations and keeps the one whose
    singular values are closest to (1, 0, 0); returns the corrected triple
    and the rank-1 relative viewing-direction estimate.
    """
    _check_order(n)
    target = np.array([1.0, 0.0, 0.0])
    best = None
    for v, a, b in _expressions(r_ii, r_ij, r_jj, n):
        dist = np.linalg.norm(np.linalg.svd(v, compute_uv=False) - target)
        if best is None or dist < best[0]:
            best = (dist, v, a, b)
    _, v, a, b = best
    return (a, r_ij, b), v


def self_direction(r_ii: np.ndarray, n: int) -> np.ndarray:
    """Mean of the powers of a self relative rotation (rank-1 for exact input)."""
    acc = np.zeros((3, 3))
    term = np.eye(3)
    for _ in range(n):
        acc += term
        term = term @ r_ii
    return acc / n


def estimate_all_pairs_fast(
    polars: list[PolarImage], n: int
) -> tuple[dict[tuple[int, int], np.ndarray], list[np.ndarray]]:
    """Full fast-path estimation of all relative viewing directions.

    Returns the map (i, j) -> v_ij for i < j and the per-image self
    estimates v_ii, both up to an independent hand flip per entry (resolved
    downstream by global synchronization).
    """
    _check_order(n)
    m = len(polars)
    self_rots = []
    for p in polars:
        a1, a2 = search_self_cl(p, n)
        gamma = gamma_from_separation(a2 - a1, n)
        self_rots.append(self_relative_rotation(a1, gamma, a2))

    alphas = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            a_ij, a_ji = detect_single_cl(polars[i], polars[j])
            alphas[i, j] = a_ij
            alphas[j, i] = a_ji

    v_ij: dict[tuple[int, int], np.ndarray] = {}
    for i in range(m):
        for j in range(i + 1, m):
            try:
                gamma_ij = vote_gamma(i, j, alphas)
            except VotingFailedError:
                # every vote was discarded (possible for small image
                # counts); fall back to clipped votes
                gamma_ij = vote_gamma(i, j, alphas, clamp=True)
            r_ij = rotation_from_cl(alphas[i, j], gamma_ij, alphas[j, i])
            _, v = local_sync(self_rots[i], r_ij, self_rots[j], n)
            v_ij[(i, j)] = v

    v_ii = [self_direction(r, n) for r in self_rots]
    return v_ij, v_ii
