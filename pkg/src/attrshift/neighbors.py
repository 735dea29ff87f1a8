"""Exact k-nearest-neighbour search.

The brute-force search is the reference: it orders candidates by squared
Euclidean distance and breaks ties by ascending reference index. The tree
search delegates to :class:`scipy.spatial.cKDTree` and returns the same
neighbour sets whenever the distances are tie-free.
"""

import numpy as np
from scipy.spatial import cKDTree

ALGORITHMS = ("brute", "kd_tree")
_CHUNK_ELEMS = 1 << 22


def _sq_dists(Q, R):
    # explicit differences keep exact ties exact (no expansion round-off)
    diff = Q[:, None, :] - R[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _brute(R, Q, k, exclude):
    n_q = Q.shape[0]
    chunk = max(1, _CHUNK_ELEMS // max(1, R.shape[0] * R.shape[1]))
    out = np.empty((n_q, k), dtype=np.int64)
    for start in range(0, n_q, chunk):
        stop = min(start + chunk, n_q)
        d = _sq_dists(Q[start:stop], R)
        if exclude is not None:
            rows = np.arange(stop - start)
            cols = exclude[start:stop]
            keep = cols >= 0
            d[rows[keep], cols[keep]] = np.inf
        # stable sort: equal distances keep ascending reference index
        out[start:stop] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


def _tree(R, Q, k, exclude):
    tree = cKDTree(R)
    extra = 1 if exclude is not None else 0
    kk = min(k + extra, R.shape[0])
    _, idx = tree.query(Q, k=kk)
    idx = np.asarray(idx).reshape(Q.shape[0], kk)
    if exclude is None:
        return idx[:, :k]
    out = np.empty((Q.shape[0], k), dtype=np.int64)
    for i, row in enumerate(idx):
        row = row[row != exclude[i]]
        out[i] = row[:k]
    return out


def kneighbors(reference, queries, k, exclude=None, algorithm="brute"):
    """Indices of the ``k`` nearest reference points for every query.

    Parameters
    ----------
    reference : ndarray of shape (n_ref, m)
    queries : ndarray of shape (n_q, m)
    k : int
    exclude : ndarray of shape (n_q,), optional
        Reference index to skip for each query (``-1`` skips nothing). Used
        for leave-one-out evaluation on the reference set itself.
    algorithm : {"brute", "kd_tree"}

    Returns
    -------
    indices : ndarray of shape (n_q, k)
        Sorted nearest first.
    """
    R = np.asarray(reference, dtype=float)
    Q = np.asarray(queries, dtype=float)
    if R.ndim != 2 or Q.ndim != 2 or R.shape[1] != Q.shape[1]:
        raise ValueError(f"dimension mismatch: reference {R.shape}, queries {Q.shape}")
    available = R.shape[0] - (1 if exclude is not None else 0)
    if not 1 <= k <= available:
        raise ValueError(f"k={k} out of range [1, {available}]")
    if exclude is not None:
        exclude = np.asarray(exclude, dtype=np.int64).reshape(-1)
        if exclude.shape[0] != Q.shape[0]:
            raise ValueError("exclude must have one entry per query")
    if algorithm == "brute":
        return _brute(R, Q, k, exclude)
    if algorithm == "kd_tree":
        return _tree(R, Q, k, exclude)
    raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {algorithm!r}")
