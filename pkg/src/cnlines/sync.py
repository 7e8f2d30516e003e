"""Global handedness synchronization and viewing-direction factorization.

Every pairwise estimate v_ij is known only up to conjugation by the hand
flip.  Triangles of estimates reveal relative hands: for each image triple
the conjugation pattern bringing the triple closest to multiplicative
consistency is found, and the resulting agreement/disagreement signs are
assembled into a graph over image pairs whose leading eigenvector splits
the pairs into two consistent hand classes.  The self estimates v_ii are
then aligned to the synchronized pairs by a majority vote, the block matrix
of all estimates is factorized by its leading eigenvector into per-image
viewing directions, and each direction is completed to a rotation with an
undetermined in-plane angle.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError
from .geometry import complete_third_row, j_conjugate


@dataclass(frozen=True)
class ViewingDirections:
    """Unit viewing direction per image plus an eigen-gap diagnostic."""

    rows: np.ndarray  # (m, 3) unit vectors
    eigenvalue_gap: float  # second eigenvalue / first (small is good)


def pair_index(i: int, j: int, m: int) -> int:
    """Index of unordered pair (i, j), i < j, in lexicographic order."""
    if not 0 <= i < j < m:
        raise ValueError(f"need 0 <= i < j < m, got ({i}, {j}) with m={m}")
    return i * m - i * (i + 1) // 2 + (j - i - 1)


_CONFIGS = ((0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0))


def triangle_config(v_ij: np.ndarray, v_jk: np.ndarray, v_ik: np.ndarray):
    """Hand-flip pattern making a triangle of estimates most consistent.

    Minimizes the residual of v_ij * v_jk = v_ik over flipping at most one
    of the three estimates; ties go to the lexicographically smallest
    pattern (mu_ij, mu_jk, mu_ik).
    """
    best = None
    for cfg in _CONFIGS:
        a = j_conjugate(v_ij) if cfg[0] else v_ij
        b = j_conjugate(v_jk) if cfg[1] else v_jk
        c = j_conjugate(v_ik) if cfg[2] else v_ik
        res = np.linalg.norm(a @ b - c)
        if best is None or res < best[0]:
            best = (res, cfg)
    return best[1]


def _triangle_configs_batch(v_stack: np.ndarray, ij, jk, ik) -> np.ndarray:
    """Vectorized triangle_config over index arrays into a (P, 3, 3) stack."""
    flipped = j_conjugate(v_stack)
    residuals = np.empty((len(_CONFIGS), len(ij)))
    for c, cfg in enumerate(_CONFIGS):
        a = (flipped if cfg[0] else v_stack)[ij]
        b = (flipped if cfg[1] else v_stack)[jk]
        d = (flipped if cfg[2] else v_stack)[ik]
        residuals[c] = np.linalg.norm(np.einsum("pij,pjk->pik", a, b) - d, axis=(1, 2))
    # argmin returns the first (lexicographically smallest) config on ties
    return np.argmin(residuals, axis=0)


def build_sign_graph(v_ij: dict, m: int) -> sp.csr_matrix:
    """Signed agreement graph over all image pairs.

    For each image triple, the chosen flip pattern contributes +1 edges
    between pairs assigned the same hand and -1 edges otherwise; each edge
    of the C(m,2)-node graph is set by exactly one triple.
    """
    pairs = list(combinations(range(m), 2))
    if set(v_ij.keys()) < set(pairs):
        missing = set(pairs) - set(v_ij.keys())
        raise ValueError(f"missing pair estimates, e.g. {sorted(missing)[:3]}")
    v_stack = np.stack([v_ij[p] for p in pairs])
    triples = np.array(list(combinations(range(m), 3)))
    if len(triples) == 0:
        raise ValueError("need at least 3 images to synchronize hands")
    idx_ij = np.array([pair_index(i, j, m) for i, j, _ in triples])
    idx_jk = np.array([pair_index(j, k, m) for _, j, k in triples])
    idx_ik = np.array([pair_index(i, k, m) for i, _, k in triples])
    cfg_ids = _triangle_configs_batch(v_stack, idx_ij, idx_jk, idx_ik)
    mus = np.array(_CONFIGS)[cfg_ids]  # (num_triples, 3)

    rows = np.concatenate([idx_ij, idx_ij, idx_jk])
    cols = np.concatenate([idx_jk, idx_ik, idx_ik])
    signs = np.concatenate(
        [
            (-1.0) ** (mus[:, 0] - mus[:, 1]),
            (-1.0) ** (mus[:, 0] - mus[:, 2]),
            (-1.0) ** (mus[:, 1] - mus[:, 2]),
        ]
    )
    dim = len(pairs)
    graph = sp.coo_matrix(
        (np.concatenate([signs, signs]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(dim, dim),
    )
    return graph.tocsr()


def leading_eigenvector(matrix, tol: float = 1e-10, max_iter: int = 10000) -> np.ndarray:
    """Leading eigenvector by power iteration from a deterministic start.

    The start vector is all ones; iteration stops when successive
    normalized iterates differ by less than ``tol``.  The first entry of
    non-negligible magnitude is made positive.
    """
    dim = matrix.shape[0]
    x = np.ones(dim) / np.sqrt(dim)
    for _ in range(max_iter):
        y = matrix @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            raise ConvergenceError("matrix annihilated the iterate")
        y /= norm
        if np.linalg.norm(y - x) < tol:
            x = y
            break
        x = y
    else:
        raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")
    lead = np.flatnonzero(np.abs(x) > 1e-6)
    if lead.size and x[lead[0]] < 0:
        x = -x
    return x


def sync_hands(v_ij: dict, v_ii: list, m: int):
    """Bring all pairwise and self estimates to one common hand.

    Pair estimates whose eigenvector entry is negative are conjugated by
    the hand flip; each self estimate is then conjugated when a majority of
    the synchronized pairs containing its image disagree with it.
    Returns (synchronized v_ij dict, synchronized v_ii list).
    """
    graph = build_sign_graph(v_ij, m)
    eigvec = leading_eigenvector(graph)
    synced_ij = {}
    for (i, j), v in v_ij.items():
        if eigvec[pair_index(i, j, m)] < 0:
            synced_ij[(i, j)] = j_conjugate(v)
        else:
            synced_ij[(i, j)] = np.asarray(v)

    synced_ii = []
    for i in range(m):
        vote = 0.0
        vii = np.asarray(v_ii[i])
        vii_flipped = j_conjugate(vii)
        for j in range(m):
            if j == i:
                continue
            vij = synced_ij[(i, j)] if i < j else synced_ij[(j, i)].T
            res_flip = np.linalg.norm(vii_flipped @ vij - vij)
            res_keep = np.linalg.norm(vii @ vij - vij)
            vote += np.sign(res_flip - res_keep)
        synced_ii.append(vii_flipped if vote < 0 else vii)
    return synced_ij, synced_ii


def factor_directions(v_ij: dict, v_ii: list, m: int):
    """Factor the block matrix of synchronized estimates into directions.

    Assembles the symmetric 3m x 3m matrix with blocks v_ij (transposed
    below the diagonal, v_ii on it), takes its leading eigenvector, and
    normalizes each 3-block into a unit viewing direction, which is then
    completed to a rotation with an undetermined in-plane angle.
    Returns (ViewingDirections, list of completed rotations).
    """
    big = np.zeros((3 * m, 3 * m))
    for i in range(m):
        big[3 * i : 3 * i + 3, 3 * i : 3 * i + 3] = v_ii[i]
    for (i, j), v in v_ij.items():
        big[3 * i : 3 * i + 3, 3 * j : 3 * j + 3] = v
        big[3 * j : 3 * j + 3, 3 * i : 3 * i + 3] = v.T
    eigvals, eigvecs = np.linalg.eigh(big)
    lead = eigvecs[:, -1]
    gap = float(abs(eigvals[-2]) / abs(eigvals[-1])) if abs(eigvals[-1]) > 0 else np.inf
    rows = lead.reshape(m, 3)
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ConvergenceError("factorization produced a zero viewing direction")
    rows = rows / norms
    frames = [complete_third_row(v) for v in rows]
    return ViewingDirections(rows=rows, eigenvalue_gap=gap), frames
