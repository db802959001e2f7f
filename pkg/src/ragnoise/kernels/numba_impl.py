"""Numba-compiled kernels. Same contracts as :mod:`ragnoise.kernels.numpy_impl`."""

import numpy as np
from numba import njit

BACKEND = "numba"

_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)


@njit(cache=True)
def _hash_ngrams_into(codes, n_min, n_max, n_buckets, out):
    count = 0
    total = len(codes)
    nb = np.uint64(n_buckets)
    for n in range(n_min, n_max + 1):
        for start in range(total - n + 1):
            h = _FNV_OFFSET
            ok = True
            for k in range(start, start + n):
                c = codes[k]
                if c == np.uint64(0):
                    ok = False
                    break
                h = (h ^ c) * _FNV_PRIME
            if ok:
                out[count] = np.int64(h % nb)
                count += 1
    return count


def hash_ngram_buckets(codes, n_min, n_max, n_buckets):
    total = len(codes)
    cap = 0
    for n in range(n_min, n_max + 1):
        cap += max(total - n + 1, 0)
    if cap == 0:
        return np.empty(0, dtype=np.int64)
    out = np.empty(cap, dtype=np.int64)
    count = _hash_ngrams_into(codes, n_min, n_max, n_buckets, out)
    return out[:count]


@njit(cache=True)
def project_segments(weights, idx, vals, offsets):
    n_seg = len(offsets) - 1
    d_out = weights.shape[0]
    out = np.zeros((n_seg, d_out), dtype=np.float64)
    for i in range(n_seg):
        for k in range(offsets[i], offsets[i + 1]):
            col = idx[k]
            v = vals[k]
            for d in range(d_out):
                out[i, d] += weights[d, col] * v
    return out


@njit(cache=True)
def scatter_outer(out, rows, vecs):
    d = out.shape[1]
    for i in range(len(rows)):
        r = rows[i]
        for k in range(d):
            out[r, k] += vecs[i, k]


@njit(cache=True)
def bm25_accumulate(scores, doc_idx, tf, idf, k1, norm):
    for p in range(len(doc_idx)):
        d = doc_idx[p]
        scores[d] += (idf * (tf[p] * (k1 + 1.0))) / (tf[p] + norm[d])


@njit(cache=True)
def edit_distance_scan(a_cp, a_cls, c_cp, c_cls, c_len, cost_table, generic, ins, dele):
    m = len(a_cp)
    n_cand, width = c_cp.shape
    dist = np.empty(n_cand, dtype=np.float64)
    prev = np.empty(width + 1, dtype=np.float64)
    cur = np.empty(width + 1, dtype=np.float64)
    for c in range(n_cand):
        for j in range(width + 1):
            prev[j] = j * ins
        for i in range(1, m + 1):
            a_c = a_cp[i - 1]
            a_k = a_cls[i - 1]
            cur[0] = i * dele
            for j in range(1, width + 1):
                b_c = c_cp[c, j - 1]
                b_k = c_cls[c, j - 1]
                if b_c == a_c:
                    sub = 0.0
                elif a_k >= 0 and b_k >= 0:
                    sub = cost_table[a_k, b_k]
                else:
                    sub = generic
                best = min(prev[j] + dele, prev[j - 1] + sub)
                tmp = cur[j - 1] + ins
                if tmp < best:
                    best = tmp
                cur[j] = best
            for j in range(width + 1):
                prev[j] = cur[j]
        dist[c] = prev[c_len[c]]
    return dist
