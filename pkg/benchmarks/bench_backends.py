#!/usr/bin/env python3
"""Time the numba kernels against the pure-numpy fallbacks.

Runs each hot kernel on realistic desk-scale inputs, reports per-call wall
time for both backends and the speedup.  Numba JIT compilation happens during
warmup and is excluded from the timings.

Usage: python3 benchmarks/bench_backends.py [--repeats 30]
"""

import argparse
import time

import numpy as np

from ragnoise.kernels import numba_impl, numpy_impl


def time_call(fn, *args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_hash(repeats):
    rng = np.random.Generator(np.random.PCG64(0))
    # ~60 tokens of 8 chars with separators, like a long document
    codes = []
    for _ in range(60):
        codes += [1] + list(rng.integers(97, 123, size=8)) + [1, 0]
    codes = np.array(codes[:-1], dtype=np.uint64)
    args = (codes, 3, 4, 2**18)
    return args, "hash_ngram_buckets", "60-token doc, 3-4 grams"


def bench_project(repeats):
    rng = np.random.Generator(np.random.PCG64(1))
    weights = rng.standard_normal((128, 2**15))
    n_texts, feats_per = 64, 90
    idx = rng.integers(0, 2**15, size=n_texts * feats_per).astype(np.int64)
    vals = rng.random(n_texts * feats_per)
    offsets = np.arange(0, n_texts * feats_per + 1, feats_per, dtype=np.int64)
    return (weights, idx, vals, offsets), "project_segments", "64 texts x 90 features, dim 128"


def bench_scatter(repeats):
    rng = np.random.Generator(np.random.PCG64(2))
    rows = rng.integers(0, 4000, size=17000).astype(np.int64)
    vecs = rng.standard_normal((17000, 64))
    def run(impl):
        out = np.zeros((4000, 64))
        impl.scatter_outer(out, rows, vecs)
    return run, "scatter_outer", "17k outer contributions, dim 64"


def bench_bm25(repeats):
    rng = np.random.Generator(np.random.PCG64(3))
    n_docs = 50_000
    norm = 1.2 * (0.25 + 0.75 * rng.random(n_docs))
    doc_idx = np.sort(rng.choice(n_docs, size=8000, replace=False)).astype(np.int64)
    tf = rng.integers(1, 6, size=8000).astype(np.float64)
    def run(impl):
        scores = np.zeros(n_docs)
        impl.bm25_accumulate(scores, doc_idx, tf, 1.9, 1.2, norm)
    return run, "bm25_accumulate", "one term, 8k postings, 50k docs"


def bench_edit(repeats):
    rng = np.random.Generator(np.random.PCG64(4))
    n_cand, width = 3000, 10
    c_cp = rng.integers(97, 123, size=(n_cand, width)).astype(np.int64)
    c_cls = c_cp - 97
    c_len = rng.integers(4, width + 1, size=n_cand).astype(np.int64)
    a = "restaraunt"
    a_cp = np.array([ord(c) for c in a], dtype=np.int64)
    a_cls = a_cp - 97
    table = np.full((36, 36), 1.0)
    args = (a_cp, a_cls, c_cp, c_cls, c_len, table, 1.0, 1.1, 1.1)
    return args, "edit_distance_scan", "10-char word vs 3k candidates"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=30)
    args = parser.parse_args()

    benches = [bench_hash, bench_project, bench_scatter, bench_bm25, bench_edit]
    print(f"{'kernel':<22} {'workload':<34} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for bench in benches:
        payload, name, workload = bench(args.repeats)
        results = {}
        for label, impl in (("numpy", numpy_impl), ("numba", numba_impl)):
            if callable(payload):
                payload(impl)  # warmup (includes JIT for numba)
                results[label] = time_call(payload, impl, repeats=args.repeats)
            else:
                fn = getattr(impl, name)
                fn(*payload)
                results[label] = time_call(fn, *payload, repeats=args.repeats)
        speedup = results["numpy"] / results["numba"] if results["numba"] else float("inf")
        print(f"{name:<22} {workload:<34} {results['numpy'] * 1e3:>8.3f}ms "
              f"{results['numba'] * 1e3:>8.3f}ms {speedup:>7.1f}x")


if __name__ == "__main__":
    main()
