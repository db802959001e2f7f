"""Pure-numpy kernels. Reference implementations for the numba fast path.

Float kernels here use the same per-element operation order as the numba
versions wherever that is feasible (edit-distance DP, BM25 accumulation),
so those agree bitwise; reductions that go through BLAS (`project_segments`)
agree only to rounding.
"""

import numpy as np

_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)

BACKEND = "numpy"


def hash_ngram_buckets(codes, n_min, n_max, n_buckets):
    """Bucket ids of all n-grams (n_min..n_max) of a code sequence.

    ``codes`` is a uint64 array of character codepoints with 0 acting as a
    token separator; windows containing a 0 are skipped.  The hash folds each
    code unit into FNV-1a (h = (h ^ code) * prime mod 2^64).
    """
    out = []
    nb = np.uint64(n_buckets)
    for n in range(n_min, n_max + 1):
        if len(codes) < n:
            continue
        win = np.lib.stride_tricks.sliding_window_view(codes, n)
        h = np.full(win.shape[0], _FNV_OFFSET, dtype=np.uint64)
        for k in range(n):
            h = (h ^ win[:, k]) * _FNV_PRIME
        valid = ~np.any(win == 0, axis=1)
        out.append((h[valid] % nb).astype(np.int64))
    if not out:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(out)


def project_segments(weights, idx, vals, offsets):
    """Row i of the result is sum_k weights[:, idx[k]] * vals[k] over segment i."""
    n_seg = len(offsets) - 1
    out = np.zeros((n_seg, weights.shape[0]), dtype=np.float64)
    for i in range(n_seg):
        lo, hi = offsets[i], offsets[i + 1]
        if hi > lo:
            out[i] = weights[:, idx[lo:hi]] @ vals[lo:hi]
    return out


def scatter_outer(out, rows, vecs):
    """out[rows[i]] += vecs[i], applied sequentially in index order."""
    np.add.at(out, rows, vecs)


def bm25_accumulate(scores, doc_idx, tf, idf, k1, norm):
    """Add one query term's BM25 contribution to per-document scores.

    ``doc_idx`` must not contain duplicates (postings of a single term).
    """
    sel = norm[doc_idx]
    scores[doc_idx] += (idf * (tf * (k1 + 1.0))) / (tf + sel)


def edit_distance_scan(a_cp, a_cls, c_cp, c_cls, c_len, cost_table, generic, ins, dele):
    """Weighted edit distance from one word to each candidate.

    Substitution cost is 0 for equal codepoints, ``cost_table[class_a, class_b]``
    when both characters fall in the classed alphabet, ``generic`` otherwise.
    Insert/delete costs are per-character constants.  Candidates are rows of
    ``c_cp`` padded to a common width; ``c_len`` gives true lengths.
    """
    m = len(a_cp)
    n_cand, width = c_cp.shape
    prev = np.empty((n_cand, width + 1), dtype=np.float64)
    cur = np.empty_like(prev)
    for j in range(width + 1):
        prev[:, j] = j * ins
    cls_safe = np.maximum(c_cls, 0)
    for i in range(1, m + 1):
        a_c = a_cp[i - 1]
        a_k = a_cls[i - 1]
        if a_k >= 0:
            table_cost = cost_table[a_k][cls_safe]
        else:
            table_cost = np.full((n_cand, width), generic)
        sub = np.where(c_cp == a_c, 0.0, np.where((a_k >= 0) & (c_cls >= 0), table_cost, generic))
        cur[:, 0] = i * dele
        for j in range(1, width + 1):
            best = np.minimum(prev[:, j] + dele, prev[:, j - 1] + sub[:, j - 1])
            cur[:, j] = np.minimum(best, cur[:, j - 1] + ins)
        prev, cur = cur, prev
    return np.take_along_axis(prev, c_len[:, None], axis=1)[:, 0]
